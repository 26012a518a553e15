use crate::autodiff::{
    divergence_with, input_gradient, input_hessian, Dual1, ScalarField, VectorField,
};
use crate::error::{Error, Result};
use crate::model::SplitModel;

use super::problem::PdeProblem;

fn check_point(problem: &PdeProblem, x: &[f64], field_dim: usize) -> Result<()> {
    let d = problem.dim();
    if field_dim != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: field_dim,
        });
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    Ok(())
}

/// Strong residual of the product-rule expansion
/// `−Σ_ij (D_j a_ij · D_i u + a_ij D²_ij u) + bᵀDu + cu − f`.
pub fn pinn_residual<U: ScalarField>(u: &U, problem: &PdeProblem, x: &[f64]) -> Result<f64> {
    check_point(problem, x, u.input_dim())?;
    if let Some(activation) = u.second_order_obstruction() {
        return Err(Error::UnsupportedSecondOrder { activation });
    }
    let d = problem.dim();
    let pc = problem.coefficients_at(x)?;
    let g = input_gradient(u, x)?;
    let h = input_hessian(u, x)?;
    let mut r = pc.c * u.eval::<f64>(x) - pc.f;
    for i in 0..d {
        r += (pc.b[i] - pc.div_a[i]) * g[i];
        for j in 0..d {
            r -= pc.a[i * d + j] * h[[i, j]];
        }
    }
    Ok(r)
}

/// Residual of the split system, `−D·(A V) + bᵀV + cu − f`, with the
/// divergence taken of the composite flux `F_j = Σ_i a_ij V_i`.
pub fn split_residual_fields<U, V>(u: &U, v: &V, problem: &PdeProblem, x: &[f64]) -> Result<f64>
where
    U: ScalarField,
    V: VectorField,
{
    check_point(problem, x, u.input_dim())?;
    check_point(problem, x, v.input_dim())?;
    if v.output_dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: v.output_dim(),
        });
    }
    let d = problem.dim();
    let a = problem.a();
    let div = divergence_with(
        |p: &[Dual1<f64>]| {
            let am = a.eval_dual(p);
            let vv = v.eval(p);
            (0..d)
                .map(|j| {
                    (0..d).fold(Dual1::constant(0.0), |acc, i| acc + am[i * d + j] * vv[i])
                })
                .collect()
        },
        x,
    )?;
    let vx = v.eval::<f64>(x);
    let b = problem.b().value(x);
    let c = problem.c().value(x)[0];
    let bv: f64 = b.iter().zip(&vx).map(|(b, v)| b * v).sum();
    Ok(-div + bv + c * u.eval::<f64>(x) - problem.source(x))
}

pub fn split_residual(model: &SplitModel, problem: &PdeProblem, x: &[f64]) -> Result<f64> {
    split_residual_fields(model.u_net(), model.v_net(), problem, x)
}

/// `Du(x) − V(x)`.
pub fn gradient_mismatch_fields<U, V>(u: &U, v: &V, x: &[f64]) -> Result<Vec<f64>>
where
    U: ScalarField,
    V: VectorField,
{
    if v.output_dim() != u.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: u.input_dim(),
            found: v.output_dim(),
        });
    }
    let du = input_gradient(u, x)?;
    let vx = v.eval::<f64>(x);
    Ok(du.iter().zip(&vx).map(|(a, b)| a - b).collect())
}

pub fn gradient_mismatch(model: &SplitModel, x: &[f64]) -> Result<Vec<f64>> {
    gradient_mismatch_fields(model.u_net(), model.v_net(), x)
}
