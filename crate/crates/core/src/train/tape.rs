use crate::autodiff::{Dual1, Scalar, TapeLoss, Var};
use crate::error::{Error, Result};
use crate::model::Mlp;
use crate::pde::{PdeProblem, PointCoefficients};
use crate::quad::{check_exponent, CollocationSet};

use super::loss::LossWeights;

/// `|x|^p` on any scalar, with `p = 1, 2` kept exact.
fn pow_abs<S: Scalar>(x: S, p: f64) -> S {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x.abs()
    } else if p.fract() == 0.0 && p < 64.0 {
        x.abs().powi(p as i32)
    } else if x.value() == 0.0 {
        S::zero()
    } else {
        (x.abs().ln() * p).exp()
    }
}

fn root<S: Scalar>(s: S, p: f64) -> S {
    if p == 1.0 {
        s
    } else if s.value() == 0.0 {
        S::zero()
    } else if p == 2.0 {
        s.sqrt()
    } else {
        (s.ln() / p).exp()
    }
}

fn weighted_norm<S: Scalar>(values: &[S], weights: &[f64], p: f64) -> S {
    let s = values
        .iter()
        .zip(weights)
        .fold(S::zero(), |acc, (&v, &w)| acc + pow_abs(v, p) * w);
    root(s, p)
}

fn magnitude<S: Scalar>(v: &[S]) -> S {
    if v.iter().all(|c| c.value() == 0.0) {
        return S::zero();
    }
    v.iter().fold(S::zero(), |acc, &c| acc + c * c).sqrt()
}

/// The split loss written directly on scalars, differentiable on a tape by
/// nesting [`Dual1`] (spatial derivatives) over [`Var`] (parameters).
///
/// Slow and independent of the batched engine; used to cross-check
/// [`super::Objective`] gradients. Finite `p` only.
pub struct VsTapeLoss<'m> {
    u: &'m Mlp,
    v: &'m Mlp,
    p: f64,
    weights: LossWeights,
    interior: Vec<(Vec<f64>, f64, PointCoefficients)>,
    boundary: Vec<(Vec<f64>, f64, f64)>,
}

impl<'m> VsTapeLoss<'m> {
    pub fn new(
        u: &'m Mlp,
        v: &'m Mlp,
        problem: &PdeProblem,
        colloc: &CollocationSet,
        weights: LossWeights,
        p: f64,
    ) -> Result<Self> {
        check_exponent(p)?;
        if p.is_infinite() {
            return Err(Error::invalid("tape loss needs a finite exponent"));
        }
        let d = problem.dim();
        if u.input_dim() != d || v.input_dim() != d || v.output_dim() != d || u.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.output_dim(),
            });
        }
        let interior = colloc
            .interior
            .iter()
            .map(|(x, w)| Ok((x.to_vec(), w, problem.coefficients_at(x)?)))
            .collect::<Result<_>>()?;
        let boundary = colloc
            .boundary
            .iter()
            .map(|(x, w)| (x.to_vec(), w, problem.boundary_value(x)))
            .collect();
        Ok(VsTapeLoss {
            u,
            v,
            p,
            weights,
            interior,
            boundary,
        })
    }

    /// `[u params, V params]`.
    pub fn initial_params(&self) -> Vec<f64> {
        let mut out = self.u.params().to_vec();
        out.extend_from_slice(self.v.params());
        out
    }
}

impl TapeLoss for VsTapeLoss<'_> {
    fn param_count(&self) -> usize {
        self.u.param_count() + self.v.param_count()
    }

    fn eval<'t>(&self, params: &[Var<'t>]) -> Var<'t> {
        let (pu, pv) = params.split_at(self.u.param_count());
        let lift = |ps: &[Var<'t>]| ps.iter().map(|&p| Dual1::constant(p)).collect::<Vec<_>>();
        let (du_params, dv_params) = (lift(pu), lift(pv));
        let d = self.u.input_dim();
        let mut residuals = Vec::with_capacity(self.interior.len());
        let mut mismatches = Vec::with_capacity(self.interior.len());
        let mut w_int = Vec::with_capacity(self.interior.len());
        for (x, w, pc) in &self.interior {
            let beta = pc.beta();
            let mut u_val = Var::constant(0.0);
            let mut v_val = vec![Var::constant(0.0); d];
            let mut mismatch = Vec::with_capacity(d);
            let mut r = Var::constant(-pc.f);
            for j in 0..d {
                let xs: Vec<Dual1<Var<'t>>> = x
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| {
                        let c = Var::constant(c);
                        if k == j {
                            Dual1::variable(c)
                        } else {
                            Dual1::constant(c)
                        }
                    })
                    .collect();
                let uo = self.u.eval_with_params(&du_params, &xs)[0];
                let vo = self.v.eval_with_params(&dv_params, &xs);
                if j == 0 {
                    u_val = uo.value;
                    v_val = vo.iter().map(|c| c.value).collect();
                }
                mismatch.push(uo.tangent - vo[j].value);
                // α_ij ∂_j V_i with α = −A.
                for (i, vi) in vo.iter().enumerate() {
                    r = r - vi.tangent * pc.a[i * d + j];
                }
            }
            for (vi, bi) in v_val.iter().zip(&beta) {
                r = r + *vi * *bi;
            }
            r = r + u_val * pc.c;
            residuals.push(r);
            mismatches.push(magnitude(&mismatch));
            w_int.push(*w);
        }
        let mut bdy = Vec::with_capacity(self.boundary.len());
        let mut w_bdy = Vec::with_capacity(self.boundary.len());
        for (x, w, g) in &self.boundary {
            let xs: Vec<Var<'t>> = x.iter().map(|&c| Var::constant(c)).collect();
            bdy.push(self.u.eval_with_params(pu, &xs)[0] - *g);
            w_bdy.push(*w);
        }
        let pde = weighted_norm(&residuals, &w_int, self.p);
        let gm = weighted_norm(&mismatches, &w_int, self.p);
        let b = weighted_norm(&bdy, &w_bdy, self.p);
        pde * self.weights.lambda_n + gm * self.weights.lambda_d + b * self.weights.lambda_b
    }
}
