use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{JetPlan, Mlp};
use crate::pde::{weak_residual_sampled, PdeProblem, TestFunction};
use crate::quad::{sample, Scheme};

/// Largest support radius drawn by [`random_test_functions`].
pub const MAX_RADIUS: f64 = 0.3;
/// Centers closer than this to the boundary are redrawn.
pub const MIN_CLEARANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakRow {
    pub index: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakReport {
    pub problem: String,
    pub points_per_test_function: usize,
    pub seed: u64,
    pub rows: Vec<WeakRow>,
    pub max_abs_value: f64,
    /// Standard error of the row attaining `max_abs_value`.
    pub std_error_at_max: f64,
    pub max_std_error: f64,
}

pub const WEAK_COLUMNS: [&str; 5] = ["index", "center", "radius", "value", "std_error"];

/// Bumps with centers uniform in the domain (redrawn within
/// [`MIN_CLEARANCE`] of the boundary) and radius uniform in
/// `[0.5, 0.9]·min(distance to boundary, MAX_RADIUS)`, or exactly `radius`
/// when given.
pub fn random_test_functions(
    problem: &PdeProblem,
    n: usize,
    seed: u64,
    radius: Option<f64>,
) -> Result<Vec<TestFunction>> {
    let domain = problem.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut draws = 0u64;
    while out.len() < n {
        let c = sample(domain, 1, 1, Scheme::MonteCarlo, rng.random())?;
        let center = c.interior.point(0).to_vec();
        let dist = domain.distance_to_boundary(&center);
        draws += 1;
        if draws > 1000 * (n as u64 + 1) {
            return Err(Error::invalid("could not place test functions inside the domain"));
        }
        let r = match radius {
            Some(r) => r,
            None if dist < MIN_CLEARANCE => continue,
            None => rng.random_range(0.5..0.9) * dist.min(MAX_RADIUS),
        };
        out.push(TestFunction::new(center, r)?);
    }
    Ok(out)
}

/// Weak residual of `u_net` against each test function, with `points`
/// Monte Carlo samples per support ball.
pub fn weak_check(
    problem: &PdeProblem,
    u_net: &Mlp,
    tests: &[TestFunction],
    points: usize,
    seed: u64,
) -> Result<WeakReport> {
    if tests.is_empty() {
        return Err(Error::invalid("need at least one test function"));
    }
    let d = problem.dim();
    if u_net.input_dim() != d || u_net.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: u_net.input_dim(),
        });
    }
    let mut rows = Vec::with_capacity(tests.len());
    for (index, phi) in tests.iter().enumerate() {
        phi.check_support(problem.domain())?;
        let quad = phi.support_points(points, seed.wrapping_add(index as u64))?;
        let trace = u_net.jet_forward(quad.points(), &JetPlan::first_order())?;
        let out = trace.output();
        let values = out.value().column(0).to_vec();
        let mut grads = Array2::zeros((quad.len(), d));
        for k in 0..d {
            grads.column_mut(k).assign(&out.grad(k).column(0));
        }
        let est = weak_residual_sampled(&values, grads.view(), problem, phi, &quad)?;
        rows.push(WeakRow {
            index,
            center: phi.center().to_vec(),
            radius: phi.radius(),
            value: est.value,
            std_error: est.std_error,
        });
    }
    let worst = rows
        .iter()
        .max_by(|a, b| a.value.abs().total_cmp(&b.value.abs()))
        .expect("nonempty");
    Ok(WeakReport {
        problem: problem.name().to_string(),
        points_per_test_function: points,
        seed,
        max_abs_value: worst.value.abs(),
        std_error_at_max: worst.std_error,
        max_std_error: rows.iter().map(|r| r.std_error).fold(0.0, f64::max),
        rows,
    })
}

impl WeakReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(WEAK_COLUMNS)?;
        for r in &self.rows {
            let center: Vec<String> = r.center.iter().map(f64::to_string).collect();
            w.write_record([
                r.index.to_string(),
                center.join(" "),
                r.radius.to_string(),
                r.value.to_string(),
                r.std_error.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MlpSpec;
    use crate::quad::Domain;

    #[test]
    fn supports_are_admissible() {
        let problem = crate::pde::poisson_square();
        let tests = random_test_functions(&problem, 30, 1, None).unwrap();
        for t in &tests {
            t.check_support(Domain::UnitHypercube(2)).unwrap();
            assert!(t.radius() <= MAX_RADIUS);
        }
        let big = random_test_functions(&problem, 3, 1, Some(0.8)).unwrap();
        let net = Mlp::init(MlpSpec::new(2, vec![4], 1)).unwrap();
        assert!(matches!(
            weak_check(&problem, &net, &big, 100, 0),
            Err(Error::SupportOutsideDomain { .. })
        ));
    }

    #[test]
    fn zero_network_on_zero_data() {
        let problem = PdeProblem::new("zero", Domain::UnitHypercube(2));
        let mut net = Mlp::init(MlpSpec::new(2, vec![4], 1)).unwrap();
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let tests = random_test_functions(&problem, 4, 2, None).unwrap();
        let rep = weak_check(&problem, &net, &tests, 500, 0).unwrap();
        assert_eq!(rep.max_abs_value, 0.0);
    }
}
