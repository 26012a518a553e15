//! Differentiation engine.
//!
//! Spatial derivatives (gradients, Hessians, divergences) come from
//! forward-mode duals; parameter gradients come from a reverse-mode tape.
//! The two compose: evaluating a field on `Dual1<Var>` records the spatial
//! derivative itself on the tape, which is how a loss containing `Du` or
//! `D·V` is differentiated with respect to network weights.

mod dual;
mod scalar;
mod tape;

use ndarray::Array2;

pub use dual::{Dual1, Dual2};
pub use scalar::{dot, lift, norm, Scalar};
pub use tape::{loss_fn, param_gradient, FnLoss, ParamTape, TapeLoss, Var};

use crate::error::{Error, Result};

/// A map `R^d -> R` that can be evaluated on any [`Scalar`].
pub trait ScalarField {
    fn input_dim(&self) -> usize;

    fn eval<S: Scalar>(&self, x: &[S]) -> S;

    /// `Some(reason)` when the field is not twice differentiable and second
    /// derivatives must be refused.
    fn second_order_obstruction(&self) -> Option<String> {
        None
    }
}

/// A map `R^d -> R^m` that can be evaluated on any [`Scalar`].
pub trait VectorField {
    fn input_dim(&self) -> usize;

    fn output_dim(&self) -> usize;

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S>;
}

impl<F: ScalarField + ?Sized> ScalarField for &F {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        (**self).eval(x)
    }
    fn second_order_obstruction(&self) -> Option<String> {
        (**self).second_order_obstruction()
    }
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        (**self).eval(x)
    }
}

/// The gradient of a scalar field, as a vector field. Evaluating it on
/// `S` evaluates the underlying field on `Dual1<S>`.
#[derive(Clone, Copy, Debug)]
pub struct GradientField<F>(pub F);

impl<F: ScalarField> VectorField for GradientField<F> {
    fn input_dim(&self) -> usize {
        self.0.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.0.input_dim()
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let d = x.len();
        let mut seeded: Vec<Dual1<S>> = x.iter().map(|&v| Dual1::constant(v)).collect();
        (0..d)
            .map(|k| {
                seeded[k].tangent = S::one();
                let t = self.0.eval(&seeded).tangent;
                seeded[k].tangent = S::zero();
                t
            })
            .collect()
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn finite_or_err(values: &[f64], x: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteDerivative { point: x.to_vec() })
    }
}

/// Dual1 seeds `x + ε e_k`.
fn seed1(x: &[f64], k: usize) -> Vec<Dual1<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| Dual1::new(v, if i == k { 1.0 } else { 0.0 }))
        .collect()
}

/// `(∂f/∂x_1, …, ∂f/∂x_d)` by `d` forward passes.
pub fn input_gradient<F: ScalarField>(field: &F, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(field.input_dim(), x.len())?;
    let g: Vec<f64> = (0..x.len())
        .map(|k| field.eval(&seed1(x, k)).tangent)
        .collect();
    finite_or_err(&g, x)?;
    Ok(g)
}

/// Symmetric matrix of second partials by `d(d+1)/2` hyper-dual passes.
pub fn input_hessian<F: ScalarField>(field: &F, x: &[f64]) -> Result<Array2<f64>> {
    check_dim(field.input_dim(), x.len())?;
    if let Some(activation) = field.second_order_obstruction() {
        return Err(Error::UnsupportedSecondOrder { activation });
    }
    let d = x.len();
    let mut h = Array2::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            let pt: Vec<Dual2<f64>> = x
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    Dual2::new(
                        v,
                        if k == i { 1.0 } else { 0.0 },
                        if k == j { 1.0 } else { 0.0 },
                        0.0,
                    )
                })
                .collect();
            let hij = field.eval(&pt).t12;
            h[[i, j]] = hij;
            h[[j, i]] = hij;
        }
    }
    finite_or_err(h.as_slice().unwrap(), x)?;
    Ok(h)
}

/// `Σ_j ∂F_j/∂x_j` for a field given as a closure over dual points.
///
/// This form accepts composites whose pieces are only available on
/// `Dual1<f64>` (for instance coefficient closures multiplied by a network).
pub fn divergence_with<F>(field: F, x: &[f64]) -> Result<f64>
where
    F: Fn(&[Dual1<f64>]) -> Vec<Dual1<f64>>,
{
    let mut div = 0.0;
    for j in 0..x.len() {
        let out = field(&seed1(x, j));
        check_dim(x.len(), out.len())?;
        div += out[j].tangent;
    }
    finite_or_err(&[div], x)?;
    Ok(div)
}

/// Trace of the Jacobian of a square vector field.
pub fn divergence<F: VectorField>(field: &F, x: &[f64]) -> Result<f64> {
    check_dim(field.input_dim(), x.len())?;
    check_dim(field.input_dim(), field.output_dim())?;
    divergence_with(|p| field.eval(p), x)
}

/// Jacobian `J[i][j] = ∂F_i/∂x_j`.
pub fn jacobian<F: VectorField>(field: &F, x: &[f64]) -> Result<Array2<f64>> {
    check_dim(field.input_dim(), x.len())?;
    let m = field.output_dim();
    let d = x.len();
    let mut jac = Array2::zeros((m, d));
    for j in 0..d {
        let out = field.eval(&seed1(x, j));
        for i in 0..m {
            jac[[i, j]] = out[i].tangent;
        }
    }
    finite_or_err(jac.as_slice().unwrap(), x)?;
    Ok(jac)
}
