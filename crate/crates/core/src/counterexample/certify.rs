use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

use super::integrate::integrate;
use super::sequence::{radial_residual, rho_n, SeqParams};

/// Absolute quadrature tolerance.
pub const ABS_TOL: f64 = 1e-10;
/// Relative quadrature tolerance, needed once the integrals reach `1e4` and
/// beyond where `ABS_TOL` alone is below double-precision resolution.
pub const REL_TOL: f64 = 1e-12;
pub const MAX_DEPTH: u32 = 40;

/// One certified member of the sequence.
///
/// Every `scaled_*` quantity is `(1/(d|Ω|)) ∫_Ω h(|x|) dx = ∫_0^1 h(r) r^{d−1} dr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathologyRow {
    pub n: u64,
    pub d: usize,
    pub p: f64,
    /// `∫ |N[u_n]|^p`.
    pub scaled_loss_p: f64,
    /// `(9d − 1)^p / (2p + 1) · n⁻¹`.
    pub loss_upper_bound: f64,
    /// `∫ |Du_n|^p`.
    pub scaled_grad_p: f64,
    /// `|−3n + 4n³ − 6n²|^p · (1 − (1 − 1/n)^d) / d`.
    pub grad_lower_bound: f64,
    /// `∫ |u_n − 1|^p`.
    pub dist_to_limit_p: f64,
    pub loss_bound_ok: bool,
    pub grad_bound_ok: bool,
    pub bounds_ok: bool,
}

pub fn loss_upper_bound(params: &SeqParams) -> f64 {
    let d = params.d as f64;
    (9.0 * d - 1.0).powf(params.p) / (2.0 * params.p + 1.0) / params.n as f64
}

pub fn grad_lower_bound(params: &SeqParams) -> f64 {
    let n = params.n as f64;
    let d = params.d as f64;
    let poly = -3.0 * n + 4.0 * n * n * n - 6.0 * n * n;
    poly.abs().powf(params.p) * (1.0 - (1.0 - 1.0 / n).powi(params.d as i32)) / d
}

fn shell_integral(params: &SeqParams, h: impl Fn(f64) -> f64) -> Result<f64> {
    let dm1 = params.d as i32 - 1;
    let p = params.p;
    integrate(
        |r| h(r).abs().powf(p) * r.powi(dm1),
        params.r_n(),
        1.0,
        ABS_TOL,
        REL_TOL,
        MAX_DEPTH,
    )
    .map(|i| i.value)
}

/// Evaluates the three scaled integrals by adaptive quadrature on the shell
/// `[r_n, 1]` (every integrand vanishes for `r < r_n`) and checks both bounds.
pub fn certify(params: &SeqParams) -> Result<PathologyRow> {
    let params = &SeqParams::new(params.n, params.d, params.p)?;
    let scaled_loss_p = shell_integral(params, |r| radial_residual(params, r))?;
    let scaled_grad_p = shell_integral(params, |r| rho_n(params, r).d1)?;
    let dist_to_limit_p = shell_integral(params, |r| rho_n(params, r).value - 1.0)?;
    let loss_upper_bound = loss_upper_bound(params);
    let grad_lower_bound = grad_lower_bound(params);
    let loss_bound_ok = scaled_loss_p <= loss_upper_bound;
    let grad_bound_ok = scaled_grad_p >= grad_lower_bound;
    Ok(PathologyRow {
        n: params.n,
        d: params.d,
        p: params.p,
        scaled_loss_p,
        loss_upper_bound,
        scaled_grad_p,
        grad_lower_bound,
        dist_to_limit_p,
        loss_bound_ok,
        grad_bound_ok,
        bounds_ok: loss_bound_ok && grad_bound_ok,
    })
}

/// Monotonicity of the rows over `n ≥ 3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Trends {
    pub loss_strictly_decreasing: bool,
    pub grad_strictly_increasing: bool,
    pub dist_strictly_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathologyTable {
    pub d: usize,
    pub p: f64,
    pub rows: Vec<PathologyRow>,
    pub trends: Trends,
}

impl PathologyTable {
    pub fn all_bounds_ok(&self) -> bool {
        self.rows.iter().all(|r| r.bounds_ok)
    }

    /// CSV with columns `n, scaled_loss_p, loss_upper_bound, scaled_grad_p,
    /// grad_lower_bound, dist_to_limit_p, bounds_ok`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(PATHOLOGY_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.scaled_loss_p.to_string(),
                r.loss_upper_bound.to_string(),
                r.scaled_grad_p.to_string(),
                r.grad_lower_bound.to_string(),
                r.dist_to_limit_p.to_string(),
                r.bounds_ok.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const PATHOLOGY_COLUMNS: [&str; 7] = [
    "n",
    "scaled_loss_p",
    "loss_upper_bound",
    "scaled_grad_p",
    "grad_lower_bound",
    "dist_to_limit_p",
    "bounds_ok",
];

/// Steps smaller than the quadrature tolerance do not count as strict.
fn strictly(rows: &[PathologyRow], key: impl Fn(&PathologyRow) -> f64, up: bool) -> bool {
    let vals: Vec<f64> = rows.iter().filter(|r| r.n >= 3).map(key).collect();
    vals.windows(2).all(|w| if up { w[1] - w[0] > ABS_TOL } else { w[0] - w[1] > ABS_TOL })
}

/// Certifies each `n` in `n_list` (which must be strictly ascending).
pub fn pathology_table(n_list: &[u64], d: usize, p: f64) -> Result<PathologyTable> {
    if n_list.is_empty() {
        return Err(Error::invalid("n-list must not be empty"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n-list must be strictly ascending"));
    }
    let rows = n_list
        .iter()
        .map(|&n| certify(&SeqParams::new(n, d, p)?))
        .collect::<Result<Vec<_>>>()?;
    let trends = Trends {
        loss_strictly_decreasing: strictly(&rows, |r| r.scaled_loss_p, false),
        grad_strictly_increasing: strictly(&rows, |r| r.scaled_grad_p, true),
        dist_strictly_decreasing: strictly(&rows, |r| r.dist_to_limit_p, false),
    };
    Ok(PathologyTable { d, p, rows, trends })
}
