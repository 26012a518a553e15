use serde::{Deserialize, Serialize};

use crate::autodiff::{ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::pde::{gradient_mismatch_fields, pinn_residual, split_residual_fields, PdeProblem};
use crate::quad::{lp_norm, CollocationSet};

/// Positive multipliers of the loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_n: f64,
    pub lambda_d: f64,
    pub lambda_b: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_n: 1.0,
            lambda_d: 1.0,
            lambda_b: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(lambda_n: f64, lambda_d: f64, lambda_b: f64) -> Result<Self> {
        let w = LossWeights {
            lambda_n,
            lambda_d,
            lambda_b,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_n", self.lambda_n),
            ("lambda_d", self.lambda_d),
            ("lambda_b", self.lambda_b),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be positive and finite")));
            }
        }
        Ok(())
    }
}

/// Per-term losses and their weighted sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub pde: f64,
    /// Absent for the single-network loss.
    pub grad_match: Option<f64>,
    pub boundary: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// The one place the total is formed, so every caller shares its rounding.
    pub fn combine(weights: &LossWeights, pde: f64, grad_match: Option<f64>, boundary: f64) -> Self {
        let total = match grad_match {
            Some(gm) => weights.lambda_n * pde + weights.lambda_d * gm + weights.lambda_b * boundary,
            None => weights.lambda_n * pde + weights.lambda_b * boundary,
        };
        LossBreakdown {
            pde,
            grad_match,
            boundary,
            total,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pde.is_finite()
            && self.boundary.is_finite()
            && self.total.is_finite()
            && self.grad_match.is_none_or(f64::is_finite)
    }
}

/// `∂L/∂v_i` for `L = (Σ w|v|^p)^{1/p}` (sample maximum for `p = ∞`, with
/// the whole subgradient on the first maximizer). Zero when `L = 0`.
pub fn lp_norm_grad(values: &[f64], weights: &[f64], p: f64, norm: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    if norm == 0.0 {
        return;
    }
    if p.is_infinite() {
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if v.abs() > values[best].abs() {
                best = i;
            }
        }
        out[best] = values[best].signum();
        return;
    }
    if p == 2.0 {
        for ((o, v), w) in out.iter_mut().zip(values).zip(weights) {
            *o = w * v / norm;
        }
        return;
    }
    let scale = norm.powf(1.0 - p);
    for ((o, v), w) in out.iter_mut().zip(values).zip(weights) {
        *o = if *v == 0.0 {
            0.0
        } else {
            w * v.abs().powf(p - 1.0) * v.signum() * scale
        };
    }
}

pub(crate) fn boundary_misfit(
    u: impl Fn(&[f64]) -> f64,
    problem: &PdeProblem,
    colloc: &CollocationSet,
    p: f64,
) -> Result<f64> {
    let e: Vec<f64> = colloc
        .boundary
        .iter()
        .map(|(x, _)| u(x) - problem.boundary_value(x))
        .collect();
    lp_norm(&e, colloc.boundary.weights(), p)
}

/// Single-network loss evaluated point by point with forward-mode
/// derivatives. A reference implementation; training uses the batched
/// evaluation in [`super::Objective`].
pub fn pinn_loss<U: ScalarField>(
    u: &U,
    problem: &PdeProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
    p: f64,
) -> Result<LossBreakdown> {
    let r = colloc
        .interior
        .iter()
        .map(|(x, _)| pinn_residual(u, problem, x))
        .collect::<Result<Vec<_>>>()?;
    let pde = lp_norm(&r, colloc.interior.weights(), p)?;
    let boundary = boundary_misfit(|x| u.eval::<f64>(x), problem, colloc, p)?;
    Ok(LossBreakdown::combine(weights, pde, None, boundary))
}

/// Split loss evaluated point by point, for any pair of fields standing in
/// for `u` and `V`.
pub fn vs_loss_fields<U: ScalarField, V: VectorField>(
    u: &U,
    v: &V,
    problem: &PdeProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
    p: f64,
) -> Result<LossBreakdown> {
    let mut r = Vec::with_capacity(colloc.interior.len());
    let mut m = Vec::with_capacity(colloc.interior.len());
    for (x, _) in colloc.interior.iter() {
        r.push(split_residual_fields(u, v, problem, x)?);
        let gm = gradient_mismatch_fields(u, v, x)?;
        m.push(gm.iter().map(|c| c * c).sum::<f64>().sqrt());
    }
    let w = colloc.interior.weights();
    let pde = lp_norm(&r, w, p)?;
    let gm = lp_norm(&m, w, p)?;
    let boundary = boundary_misfit(|x| u.eval::<f64>(x), problem, colloc, p)?;
    Ok(LossBreakdown::combine(weights, pde, Some(gm), boundary))
}

pub fn vs_loss(
    model: &crate::model::SplitModel,
    problem: &PdeProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
    p: f64,
) -> Result<LossBreakdown> {
    vs_loss_fields(model.u_net(), model.v_net(), problem, colloc, weights, p)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn values_and_weights() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(-3.0..3.0f64, n),
                prop::collection::vec(0.01..1.0f64, n),
            )
        })
    }

    proptest! {
        #[test]
        fn norm_gradient_matches_finite_differences((v, w) in values_and_weights(), p in 1.2..5.0f64) {
            prop_assume!(v.iter().all(|x| x.abs() > 1e-2));
            let norm = lp_norm(&v, &w, p).unwrap();
            let mut g = vec![0.0; v.len()];
            lp_norm_grad(&v, &w, p, norm, &mut g);
            let h = 1e-6;
            for i in 0..v.len() {
                let (mut vp, mut vm) = (v.clone(), v.clone());
                vp[i] += h;
                vm[i] -= h;
                let fd = (lp_norm(&vp, &w, p).unwrap() - lp_norm(&vm, &w, p).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()));
            }
        }

        #[test]
        fn total_is_the_weighted_sum(
            l in (0.01..10.0f64, 0.01..10.0f64, 0.01..10.0f64),
            t in (0.0..5.0f64, prop::option::of(0.0..5.0f64), 0.0..5.0f64),
        ) {
            let w = LossWeights::new(l.0, l.1, l.2).unwrap();
            let b = LossBreakdown::combine(&w, t.0, t.1, t.2);
            let expect = l.0 * t.0 + t.1.map_or(0.0, |g| l.1 * g) + l.2 * t.2;
            prop_assert!((b.total - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }
}
