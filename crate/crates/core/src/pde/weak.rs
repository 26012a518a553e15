use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::quad::{ball_volume, Domain, PointSet};

use super::problem::PdeProblem;

/// Bump `φ(x) = exp(−1/(1−s²))` with `s = |x − center| / radius`, zero for
/// `s ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    center: Vec<f64>,
    radius: f64,
}

impl TestFunction {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("test function radius {radius} must be positive")));
        }
        Ok(TestFunction { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn scaled_sq(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s2 = self.scaled_sq(x);
        if s2 >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - s2)).exp()
        }
    }

    /// `Dφ = −2φ (x − c) / (radius² (1 − s²)²)`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s2 = self.scaled_sq(x);
        if s2 >= 1.0 {
            return vec![0.0; x.len()];
        }
        let phi = (-1.0 / (1.0 - s2)).exp();
        let k = -2.0 * phi / (self.radius * self.radius * (1.0 - s2) * (1.0 - s2));
        x.iter().zip(&self.center).map(|(a, c)| k * (a - c)).collect()
    }

    /// Errors unless the closed support ball lies strictly inside `domain`.
    pub fn check_support(&self, domain: Domain) -> Result<()> {
        let inside = self.center.len() == domain.dim()
            && domain.distance_to_boundary(&self.center) > self.radius;
        if inside {
            Ok(())
        } else {
            Err(Error::SupportOutsideDomain {
                center: self.center.clone(),
                radius: self.radius,
            })
        }
    }

    /// Uniform Monte Carlo points on the support ball with equal weights
    /// summing to its volume.
    pub fn support_points(&self, n: usize, seed: u64) -> Result<PointSet> {
        if n == 0 {
            return Err(Error::invalid("support quadrature needs at least one point"));
        }
        let d = self.center.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Array2::zeros((n, d));
        for mut row in pts.rows_mut() {
            let g: Vec<f64> = loop {
                let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                if g.iter().any(|v: &f64| v.abs() > 1e-12) {
                    break g;
                }
            };
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = self.radius * rng.random::<f64>().powf(1.0 / d as f64);
            for k in 0..d {
                row[k] = self.center[k] + r * g[k] / gn;
            }
        }
        let vol = ball_volume(d) * self.radius.powi(d as i32);
        PointSet::new(pts, vec![vol / n as f64; n])
    }
}

/// A quadrature estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Quadrature estimate of
/// `Σ_ij ∫ a_ij D_i u D_j φ + Σ_i ∫ b_i D_i u φ + ∫ c u φ − ∫ f φ`.
///
/// The standard error treats the weighted terms `wᵢ hᵢ` as i.i.d. draws, as
/// they are for Monte Carlo point sets.
pub fn weak_residual(
    u: impl Fn(&[f64]) -> f64,
    du: impl Fn(&[f64]) -> Vec<f64>,
    problem: &PdeProblem,
    phi: &TestFunction,
    quad: &PointSet,
) -> Result<WeakEstimate> {
    let d = problem.dim();
    let values: Vec<f64> = quad.iter().map(|(x, _)| u(x)).collect();
    let mut grads = Array2::zeros((quad.len(), d));
    for (i, (x, _)) in quad.iter().enumerate() {
        let g = du(x);
        if g.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: g.len(),
            });
        }
        grads.row_mut(i).assign(&ArrayView1::from(&g));
    }
    weak_residual_sampled(&values, grads.view(), problem, phi, quad)
}

/// [`weak_residual`] from `u` and `Du` already evaluated at the quadrature
/// points (`Du` as `n × d`).
pub fn weak_residual_sampled(
    values: &[f64],
    grads: ArrayView2<'_, f64>,
    problem: &PdeProblem,
    phi: &TestFunction,
    quad: &PointSet,
) -> Result<WeakEstimate> {
    phi.check_support(problem.domain())?;
    if quad.is_empty() {
        return Err(Error::invalid("weak residual needs a nonempty quadrature"));
    }
    let d = problem.dim();
    if values.len() != quad.len() || grads.nrows() != quad.len() {
        return Err(Error::DimensionMismatch {
            expected: quad.len(),
            found: values.len().min(grads.nrows()),
        });
    }
    if grads.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: grads.ncols(),
        });
    }
    let mut terms = Vec::with_capacity(quad.len());
    for (i, (x, w)) in quad.iter().enumerate() {
        let ph = phi.value(x);
        if ph == 0.0 {
            terms.push(0.0);
            continue;
        }
        let dph = phi.gradient(x);
        let pc = problem.coefficients_at(x)?;
        let g = grads.row(i);
        let mut h = (pc.c * values[i] - pc.f) * ph;
        for i in 0..d {
            h += pc.b[i] * g[i] * ph;
            for j in 0..d {
                h += pc.a[i * d + j] * g[i] * dph[j];
            }
        }
        terms.push(w * h);
    }
    let n = terms.len() as f64;
    let value: f64 = terms.iter().sum();
    let std_error = if terms.len() > 1 {
        let mean = value / n;
        let var = terms.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0);
        (n * var).sqrt()
    } else {
        f64::NAN
    };
    Ok(WeakEstimate { value, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{input_gradient, ScalarField};
    use crate::pde::{poisson_square, CoefficientField, SineProduct};

    #[test]
    fn bump_vanishes_at_support_edge() {
        let phi = TestFunction::new(vec![0.5, 0.5], 0.2).unwrap();
        assert_eq!(phi.value(&[0.7, 0.5]), 0.0);
        assert!(phi.value(&[0.6999, 0.5]) < 1e-100);
        assert!((phi.value(&[0.5, 0.5]) - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn bump_gradient_matches_fd() {
        let phi = TestFunction::new(vec![0.4, 0.6], 0.3).unwrap();
        let x = [0.5, 0.5];
        let g = phi.gradient(&x);
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (phi.value(&xp) - phi.value(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn support_checked() {
        let p = poisson_square();
        let phi = TestFunction::new(vec![0.1, 0.5], 0.2).unwrap();
        let q = phi.support_points(10, 0).unwrap();
        assert!(matches!(
            weak_residual(|_| 0.0, |_| vec![0.0; 2], &p, &phi, &q),
            Err(Error::SupportOutsideDomain { .. })
        ));
    }

    #[test]
    fn trivial_zeros() {
        let phi = TestFunction::new(vec![0.5, 0.5], 0.3).unwrap();
        let q = phi.support_points(500, 1).unwrap();
        let zero = PdeProblem::new("z", Domain::UnitHypercube(2));
        let e = weak_residual(|_| 0.0, |_| vec![0.0; 2], &zero, &phi, &q).unwrap();
        assert_eq!(e.value, 0.0);
        let a = CoefficientField::matrix(2, |x| vec![x[0] + 2.0, x[1], x[1], x[0] * x[0] + 1.0]);
        let p = zero.with_a(a).unwrap();
        let e = weak_residual(|_| 1.0, |_| vec![0.0; 2], &p, &phi, &q).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn manufactured_solution_converges() {
        let p = poisson_square();
        let u = SineProduct { dim: 2 };
        let phi = TestFunction::new(vec![0.45, 0.6], 0.25).unwrap();
        let mut prev = f64::INFINITY;
        for (n, seed) in [(1_000, 3), (100_000, 4)] {
            let q = phi.support_points(n, seed).unwrap();
            let e = weak_residual(|x| u.eval(x), |x| input_gradient(&u, x).unwrap(), &p, &phi, &q)
                .unwrap();
            assert!(e.value.abs() <= 4.0 * e.std_error, "{e:?}");
            assert!(e.std_error < prev);
            prev = e.std_error;
        }
    }
}
