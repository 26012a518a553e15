use crate::autodiff::{input_gradient, ScalarField};
use crate::error::{Error, Result};

use super::sample::{CollocationSet, Scheme};

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        Err(Error::InvalidExponent(p))
    } else {
        Ok(())
    }
}

/// `(Σ wᵢ|vᵢ|^p)^{1/p}`, or `max |vᵢ|` for `p = ∞`.
///
/// The `p = ∞` value is a sample maximum and so only a lower bound for the
/// essential supremum.
pub fn lp_norm(values: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            found: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::invalid(format!("quadrature weight {w} is negative")));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let sum: f64 = if p == 1.0 {
        values.iter().zip(weights).map(|(v, w)| w * v.abs()).sum()
    } else if p == 2.0 {
        values.iter().zip(weights).map(|(v, w)| w * v * v).sum()
    } else {
        values.iter().zip(weights).map(|(v, w)| w * v.abs().powf(p)).sum()
    };
    Ok(if p == 2.0 { sum.sqrt() } else { sum.powf(1.0 / p) })
}

/// `(1/|∂Ω|) ∫_∂Ω u` by the boundary quadrature.
pub fn boundary_average(u: impl Fn(&[f64]) -> f64, colloc: &CollocationSet) -> Result<f64> {
    let b = &colloc.boundary;
    if b.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let total = b.weight_sum();
    if !(total > 0.0) {
        return Err(Error::EmptyBoundary);
    }
    Ok(b.iter().map(|(x, w)| w * u(x)).sum::<f64>() / total)
}

/// Poincaré-ratio estimate with its ingredients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareEstimate {
    pub ratio: f64,
    /// Delta-method standard error; `None` for grid quadrature or `p = ∞`.
    pub std_error: Option<f64>,
    pub boundary_mean: f64,
    pub deviation_norm: f64,
    pub gradient_norm: f64,
}

/// `‖u − ⟨u⟩_∂Ω‖_p / ‖Du‖_p` on the interior quadrature.
pub fn poincare_ratio<F: ScalarField>(u: &F, colloc: &CollocationSet, p: f64) -> Result<f64> {
    poincare_estimate(u, colloc, p).map(|e| e.ratio)
}

pub fn poincare_estimate<F: ScalarField>(
    u: &F,
    colloc: &CollocationSet,
    p: f64,
) -> Result<PoincareEstimate> {
    check_exponent(p)?;
    let d = colloc.domain.dim();
    if u.input_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: u.input_dim(),
        });
    }
    let mean = boundary_average(|x| u.eval::<f64>(x), colloc)?;
    let n = colloc.interior.len();
    let mut dev = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    for (x, _) in colloc.interior.iter() {
        dev.push(u.eval::<f64>(x) - mean);
        let g = input_gradient(u, x)?;
        grad.push(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let w = colloc.interior.weights();
    let deviation_norm = lp_norm(&dev, w, p)?;
    let gradient_norm = lp_norm(&grad, w, p)?;
    if !(gradient_norm >= 1e-12) {
        return Err(Error::DegenerateGradient {
            norm: gradient_norm,
        });
    }
    let ratio = deviation_norm / gradient_norm;
    let std_error = (colloc.scheme == Scheme::MonteCarlo && p.is_finite() && n > 1)
        .then(|| ratio_std_error(&dev, &grad, p, ratio));
    Ok(PoincareEstimate {
        ratio,
        std_error,
        boundary_mean: mean,
        deviation_norm,
        gradient_norm,
    })
}

/// With `a = mean |dev|^p`, `b = mean |grad|^p` and `ratio = (a/b)^{1/p}`,
/// propagates the sample covariance of `(a, b)` to first order.
fn ratio_std_error(dev: &[f64], grad: &[f64], p: f64, ratio: f64) -> f64 {
    let n = dev.len() as f64;
    let h: Vec<f64> = dev.iter().map(|v| v.abs().powf(p)).collect();
    let g: Vec<f64> = grad.iter().map(|v| v.abs().powf(p)).collect();
    let a = h.iter().sum::<f64>() / n;
    let b = g.iter().sum::<f64>() / n;
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (hi, gi) in h.iter().zip(&g) {
        vaa += (hi - a) * (hi - a);
        vbb += (gi - b) * (gi - b);
        vab += (hi - a) * (gi - b);
    }
    let scale = 1.0 / ((n - 1.0) * n);
    let (vaa, vbb, vab) = (vaa * scale, vbb * scale, vab * scale);
    let q = a / b;
    let var_q = (vaa - 2.0 * q * vab + q * q * vbb) / (b * b);
    if q == 0.0 {
        return 0.0;
    }
    ratio / p * var_q.max(0.0).sqrt() / q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Scalar;
    use crate::quad::{sample, Domain};
    use proptest::prelude::*;

    struct Linear(Vec<f64>);

    impl ScalarField for Linear {
        fn input_dim(&self) -> usize {
            self.0.len()
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            x.iter().zip(&self.0).fold(S::zero(), |acc, (xi, c)| acc + *xi * *c)
        }
    }

    fn grid(n: usize, m: usize) -> CollocationSet {
        sample(Domain::UnitHypercube(2), n, m, Scheme::Grid, 0).unwrap()
    }

    #[test]
    fn constant_norm() {
        let c = grid(100, 8);
        let v = vec![3.0; c.interior.len()];
        assert!((lp_norm(&v, c.interior.weights(), 2.0).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sup_norm_ignores_weights() {
        assert_eq!(lp_norm(&[1.0, -2.0], &[1.0, 1.0], f64::INFINITY).unwrap(), 2.0);
        assert_eq!(lp_norm(&[1.0, -2.0], &[0.0, 0.0], f64::INFINITY).unwrap(), 2.0);
    }

    #[test]
    fn exponent_and_length_errors() {
        assert!(matches!(lp_norm(&[1.0], &[1.0], 0.5), Err(Error::InvalidExponent(_))));
        assert!(lp_norm(&[1.0], &[1.0, 2.0], 2.0).is_err());
        assert!(lp_norm(&[1.0], &[-1.0], 2.0).is_err());
    }

    #[test]
    fn boundary_averages_on_square() {
        let c = grid(16, 4000);
        assert!((boundary_average(|_| 2.5, &c).unwrap() - 2.5).abs() < 1e-12);
        assert!((boundary_average(|x| x[0], &c).unwrap() - 0.5).abs() < 1e-12);
        // Midpoint rule on the two faces x₂ ∈ {0,1} has error O(h²).
        assert!((boundary_average(|x| x[0] * x[0], &c).unwrap() - 5.0 / 12.0).abs() < 1e-6);
    }

    #[test]
    fn poincare_linear_functions() {
        let c = grid(250_000, 4000);
        let r = poincare_ratio(&Linear(vec![1.0, 0.0]), &c, 2.0).unwrap();
        assert!((r - (1.0f64 / 12.0).sqrt()).abs() < 1e-6);
        let r = poincare_ratio(&Linear(vec![1.0, 1.0]), &c, 2.0).unwrap();
        assert!((r - (1.0f64 / 6.0).sqrt() / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn poincare_degenerate() {
        let c = grid(100, 40);
        assert!(matches!(
            poincare_ratio(&Linear(vec![0.0, 0.0]), &c, 2.0),
            Err(Error::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn mc_standard_error_is_reported() {
        let c = sample(Domain::UnitHypercube(2), 4000, 400, Scheme::MonteCarlo, 1).unwrap();
        let e = poincare_estimate(&Linear(vec![1.0, 0.0]), &c, 2.0).unwrap();
        let se = e.std_error.unwrap();
        assert!(se > 0.0 && se < 0.01);
        assert!((e.ratio - (1.0f64 / 12.0).sqrt()).abs() < 4.0 * se + 0.01);
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0..10.0f64, n),
                prop::collection::vec(-10.0..10.0f64, n),
                prop::collection::vec(0.0..1.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn monotone_in_p((v, _, w) in pair(), p in 1.0..6.0f64, dp in 0.0..4.0f64) {
            let total: f64 = w.iter().sum();
            prop_assume!(total > 1e-6);
            let prob: Vec<f64> = w.iter().map(|x| x / total).collect();
            let lo = lp_norm(&v, &prob, p).unwrap();
            let hi = lp_norm(&v, &prob, p + dp).unwrap();
            prop_assert!(lo <= hi * (1.0 + 1e-12) + 1e-300);
            let sup = lp_norm(&v, &prob, f64::INFINITY).unwrap();
            prop_assert!(hi <= sup * (1.0 + 1e-12));
        }

        #[test]
        fn triangle_inequality((u, v, w) in pair(), which in 0usize..3) {
            let p = [1.0, 2.0, f64::INFINITY][which];
            let s: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
            let lhs = lp_norm(&s, &w, p).unwrap();
            let rhs = lp_norm(&u, &w, p).unwrap() + lp_norm(&v, &w, p).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn p2_matches_direct_sum((v, _, w) in pair()) {
            let direct = v.iter().zip(&w).map(|(a, b)| b * a * a).sum::<f64>().sqrt();
            let got = lp_norm(&v, &w, 2.0).unwrap();
            prop_assert!((got - direct).abs() <= 1e-14 * direct.max(1.0));
        }
    }
}
