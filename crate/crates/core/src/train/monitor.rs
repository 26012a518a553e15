use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::loss::LossBreakdown;

/// CSV header of [`MonitorReport::write_csv`].
pub const MONITOR_COLUMNS: [&str; 9] = [
    "iter",
    "loss_pde",
    "loss_gm",
    "loss_bdy",
    "loss_total",
    "u_cauchy",
    "v_cauchy",
    "err_u_lp",
    "err_Du_lp",
];

/// Diagnostics recorded at one checkpoint.
///
/// Distances are `L^p` norms on the validation set. The Cauchy distances
/// compare with the previous checkpoint and are absent on the first row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub iter: u64,
    pub loss: LossBreakdown,
    pub u_cauchy: Option<f64>,
    pub v_cauchy: Option<f64>,
    pub err_u_lp: Option<f64>,
    pub err_du_lp: Option<f64>,
    /// `‖V − Du*‖_p`; reported in JSON only.
    pub err_v_lp: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub rows: Vec<MonitorRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MonitorReport {
    pub fn last(&self) -> Option<&MonitorRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// One line per checkpoint; absent values are empty cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(MONITOR_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.iter.to_string(),
                r.loss.pde.to_string(),
                cell(r.loss.grad_match),
                r.loss.boundary.to_string(),
                r.loss.total.to_string(),
                cell(r.u_cauchy),
                cell(r.v_cauchy),
                cell(r.err_u_lp),
                cell(r.err_du_lp),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Whether the last `window` rows satisfy: `v_cauchy`, `grad_match` and
    /// `boundary` all below `threshold` implies `u_cauchy < 10·threshold`.
    ///
    /// `None` when the premise fails somewhere in the window or the report is
    /// too short, in which case nothing is asserted.
    pub fn cauchy_implication(&self, window: usize, threshold: f64) -> Option<bool> {
        if self.rows.len() < window || window == 0 {
            return None;
        }
        let tail = &self.rows[self.rows.len() - window..];
        let premise = tail.iter().all(|r| {
            r.v_cauchy.is_some_and(|v| v < threshold)
                && r.loss.grad_match.is_some_and(|g| g < threshold)
                && r.loss.boundary < threshold
        });
        premise.then(|| tail.iter().all(|r| r.u_cauchy.is_some_and(|u| u < 10.0 * threshold)))
    }
}
