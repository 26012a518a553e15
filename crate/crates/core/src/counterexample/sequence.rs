use crate::autodiff::{norm, Scalar, ScalarField};
use crate::error::{Error, Result};

/// Index `n ≥ 2`, dimension `d ≥ 1` and exponent `1 ≤ p < ∞` of one member
/// of the radial sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeqParams {
    pub n: u64,
    pub d: usize,
    pub p: f64,
}

impl SeqParams {
    pub fn new(n: u64, d: usize, p: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("sequence index n = {n} must be at least 2")));
        }
        if d == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidExponent(p));
        }
        Ok(SeqParams { n, d, p })
    }

    /// `r_n = 1 − 1/n`.
    pub fn r_n(&self) -> f64 {
        1.0 - 1.0 / self.n as f64
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }
}

/// Value and first two radial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// `q_n(r) = n³(r − r_n)² + n²(r − r_n) + n`.
pub fn q_n(params: &SeqParams, r: f64) -> f64 {
    let n = params.nf();
    let s = r - params.r_n();
    n * n * n * s * s + n * n * s + n
}

/// `ρ_n(r) = 1` for `r ≤ r_n` and `(1 − r) q_n(r)` beyond.
pub fn rho_n(params: &SeqParams, r: f64) -> RadialJet {
    let rn = params.r_n();
    if r <= rn {
        return RadialJet {
            value: 1.0,
            d1: 0.0,
            d2: 0.0,
        };
    }
    let n = params.nf();
    let s = r - rn;
    let q = q_n(params, r);
    let q1 = 2.0 * n * n * n * s + n * n;
    let q2 = 2.0 * n * n * n;
    let t = 1.0 - r;
    RadialJet {
        value: t * q,
        d1: -q + t * q1,
        d2: -2.0 * q1 + t * q2,
    }
}

/// `ρ_n` on any scalar, for autodiff cross-checks.
pub fn rho_n_generic<S: Scalar>(params: &SeqParams, r: S) -> S {
    let rn = params.r_n();
    if r.value() <= rn {
        return S::one() + r * 0.0;
    }
    let n = params.nf();
    let s = r - rn;
    let q = s * s * (n * n * n) + s * (n * n) + n;
    (-r + 1.0) * q
}

/// `u_n(x) = ρ_n(|x|)`.
pub fn u_n(params: &SeqParams, x: &[f64]) -> f64 {
    rho_n(params, norm(x)).value
}

/// `Du_n(x) = ρ_n'(|x|) x/|x|`, zero at the origin.
pub fn grad_u_n(params: &SeqParams, x: &[f64]) -> Vec<f64> {
    let r = norm(x);
    if r == 0.0 {
        return vec![0.0; x.len()];
    }
    let d1 = rho_n(params, r).d1;
    x.iter().map(|xi| d1 * xi / r).collect()
}

/// `u_n` as a differentiable field on `R^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnField(pub SeqParams);

impl ScalarField for UnField {
    fn input_dim(&self) -> usize {
        self.0.d
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        rho_n_generic(&self.0, norm(x))
    }
}

/// `(1 − r)² (ρ'' + (d − 1) ρ' / r)`; the drift term is orthogonal to the
/// radial gradient and drops out.
pub fn radial_residual(params: &SeqParams, r: f64) -> f64 {
    if r <= params.r_n() || r <= 0.0 {
        return 0.0;
    }
    let j = rho_n(params, r);
    let t = 1.0 - r;
    t * t * (j.d2 + (params.d as f64 - 1.0) * j.d1 / r)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn profile_derivatives_close_form(n in 2u64..5000, t in 0.0..1.0f64, d in 1usize..4) {
            let params = SeqParams::new(n, d, 2.0).unwrap();
            let nf = n as f64;
            let s = t / nf;
            let j = rho_n(&params, params.r_n() + s);
            prop_assert!((j.d1 + 3.0 * nf.powi(3) * s * s).abs() <= 1e-9 * nf);
            prop_assert!((j.d2 + 6.0 * nf.powi(3) * s).abs() <= 1e-9 * nf * nf);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&j.value));
        }
    }
}
