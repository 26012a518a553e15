use serde::Serialize;

use crate::autodiff::ScalarField;
use crate::error::{Error, Result};
use crate::model::{Activation, Mlp, MlpSpec};
use crate::quad::{poincare_estimate, sample, Domain, PoincareEstimate, Scheme};

/// `u(x) = x₁`, whose ratio on the unit square is `1/√12 ≈ 0.2887`.
struct FirstCoordinate(usize);

impl ScalarField for FirstCoordinate {
    fn input_dim(&self) -> usize {
        self.0
    }
    fn eval<S: crate::autodiff::Scalar>(&self, x: &[S]) -> S {
        x[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoincareTrial {
    pub trial: usize,
    pub init_seed: u64,
    /// Absent when the network's gradient norm was degenerate.
    pub ratio: Option<f64>,
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PoincareReport {
    pub domain: Domain,
    #[serde(with = "crate::train::exponent_serde")]
    pub p: f64,
    pub seed: u64,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub trials: Vec<PoincareTrial>,
    pub evaluated: usize,
    pub skipped_degenerate: usize,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub linear_ratio: f64,
    pub linear_std_error: Option<f64>,
}

pub const POINCARE_COLUMNS: [&str; 4] = ["trial", "init_seed", "ratio", "std_error"];

/// Hidden widths of the random networks in the sweep.
pub const SWEEP_WIDTHS: [usize; 2] = [16, 16];

/// Poincaré ratios of `trials` randomly initialized tanh networks plus the
/// linear field `x₁`, all on one Monte Carlo collocation set.
pub fn poincare_sweep(
    domain: Domain,
    p: f64,
    trials: usize,
    seed: u64,
    n_interior: usize,
    n_boundary: usize,
) -> Result<PoincareReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    crate::quad::check_exponent(p)?;
    let colloc = sample(domain, n_interior, n_boundary, Scheme::MonteCarlo, seed)?;
    let d = domain.dim();
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let init_seed = seed.wrapping_add(1 + trial as u64);
        let net = Mlp::init(
            MlpSpec::new(d, SWEEP_WIDTHS.to_vec(), 1)
                .with_activation(Activation::Tanh)
                .with_seed(init_seed),
        )?;
        let (ratio, std_error) = match poincare_estimate(&net, &colloc, p) {
            Ok(PoincareEstimate { ratio, std_error, .. }) => (Some(ratio), std_error),
            Err(Error::DegenerateGradient { .. }) => (None, None),
            Err(e) => return Err(e),
        };
        rows.push(PoincareTrial {
            trial,
            init_seed,
            ratio,
            std_error,
        });
    }
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let median_ratio = match ratios.len() {
        0 => None,
        n if n % 2 == 1 => Some(ratios[n / 2]),
        n => Some(0.5 * (ratios[n / 2 - 1] + ratios[n / 2])),
    };
    let linear = poincare_estimate(&FirstCoordinate(d), &colloc, p)?;
    Ok(PoincareReport {
        domain,
        p,
        seed,
        n_interior,
        n_boundary,
        evaluated: ratios.len(),
        skipped_degenerate: trials - ratios.len(),
        max_ratio: ratios.last().copied(),
        median_ratio,
        trials: rows,
        linear_ratio: linear.ratio,
        linear_std_error: linear.std_error,
    })
}

impl PoincareReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(POINCARE_COLUMNS)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for t in &self.trials {
            w.write_record([t.trial.to_string(), t.init_seed.to_string(), cell(t.ratio), cell(t.std_error)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Accepts `unit_square`, `unit_cube`, `unit_disk`, `unit_hypercube(d)` and
/// `unit_ball(d)`.
pub fn parse_domain(s: &str) -> Result<Domain> {
    let s = s.trim();
    let bad = || Error::invalid(format!("unknown domain `{s}`"));
    match s {
        "unit_square" => return Ok(Domain::UnitHypercube(2)),
        "unit_cube" => return Ok(Domain::UnitHypercube(3)),
        "unit_disk" => return Ok(Domain::UnitBall(2)),
        _ => {}
    }
    let (name, rest) = s.split_once('(').ok_or_else(bad)?;
    let d: usize = rest.strip_suffix(')').ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    if d == 0 {
        return Err(bad());
    }
    match name {
        "unit_hypercube" => Ok(Domain::UnitHypercube(d)),
        "unit_ball" => Ok(Domain::UnitBall(d)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_names() {
        assert_eq!(parse_domain("unit_square").unwrap(), Domain::UnitHypercube(2));
        assert_eq!(parse_domain("unit_ball(3)").unwrap(), Domain::UnitBall(3));
        assert_eq!(parse_domain(&Domain::UnitHypercube(4).to_string()).unwrap(), Domain::UnitHypercube(4));
        assert!(parse_domain("unit_ball(0)").is_err());
        assert!(parse_domain("torus").is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_finite() {
        let a = poincare_sweep(Domain::UnitHypercube(2), 2.0, 5, 3, 512, 256).unwrap();
        let b = poincare_sweep(Domain::UnitHypercube(2), 2.0, 5, 3, 512, 256).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.evaluated + a.skipped_degenerate, 5);
        assert!(a.max_ratio.unwrap().is_finite());
        assert!(poincare_sweep(Domain::UnitHypercube(2), 2.0, 0, 3, 512, 256).is_err());
    }
}
