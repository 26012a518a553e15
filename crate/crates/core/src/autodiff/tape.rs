//! Scalar reverse-mode tape.
//!
//! Each arithmetic operation on a [`Var`] appends a node holding the local
//! partial derivatives with respect to its (at most two) operands. The first
//! `param_count` nodes are the parameter leaves, so a backward sweep leaves
//! the parameter gradient in the first slots of the adjoint vector.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{sign_of, Scalar};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    lhs: u32,
    d_lhs: f64,
    rhs: u32,
    d_rhs: f64,
}

#[derive(Debug)]
pub struct ParamTape {
    nodes: RefCell<Vec<Node>>,
    param_count: usize,
}

/// A value recorded on a [`ParamTape`]. Constants carry no tape reference and
/// cost nothing to combine.
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: Option<&'t ParamTape>,
    idx: u32,
    val: f64,
}

impl ParamTape {
    pub fn new(param_count: usize) -> Self {
        let leaf = Node {
            lhs: NONE,
            d_lhs: 0.0,
            rhs: NONE,
            d_rhs: 0.0,
        };
        ParamTape {
            nodes: RefCell::new(vec![leaf; param_count]),
            param_count,
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf variables bound to the given parameter values.
    pub fn params<'t>(&'t self, values: &[f64]) -> Vec<Var<'t>> {
        assert_eq!(values.len(), self.param_count);
        values
            .iter()
            .enumerate()
            .map(|(i, &val)| Var {
                tape: Some(self),
                idx: i as u32,
                val,
            })
            .collect()
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        (nodes.len() - 1) as u32
    }

    /// Backward sweep from `output`; returns d(output)/d(params).
    pub fn gradient(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adjoint = vec![0.0; nodes.len()];
        if output.idx == NONE {
            adjoint.truncate(self.param_count);
            return adjoint;
        }
        adjoint[output.idx as usize] = 1.0;
        for i in (self.param_count..=output.idx as usize).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let n = nodes[i];
            if n.lhs != NONE {
                adjoint[n.lhs as usize] += a * n.d_lhs;
            }
            if n.rhs != NONE {
                adjoint[n.rhs as usize] += a * n.d_rhs;
            }
        }
        adjoint.truncate(self.param_count);
        adjoint
    }
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Var {
            tape: None,
            idx: NONE,
            val,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Self {
        match self.tape {
            None => Var::constant(val),
            Some(tape) => {
                let idx = tape.push(Node {
                    lhs: self.idx,
                    d_lhs: d,
                    rhs: NONE,
                    d_rhs: 0.0,
                });
                Var {
                    tape: Some(tape),
                    idx,
                    val,
                }
            }
        }
    }

    #[inline]
    fn binary(self, rhs: Self, val: f64, d_lhs: f64, d_rhs: f64) -> Self {
        match self.tape.or(rhs.tape) {
            None => Var::constant(val),
            Some(tape) => {
                let idx = tape.push(Node {
                    lhs: self.idx,
                    d_lhs,
                    rhs: rhs.idx,
                    d_rhs,
                });
                Var {
                    tape: Some(tape),
                    idx,
                    val,
                }
            }
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.val / rhs.val;
        self.binary(rhs, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.val + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.val - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.val * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.unary(self.val / rhs, 1.0 / rhs)
    }
}

impl<'t> Scalar for Var<'t> {
    fn from_f64(v: f64) -> Self {
        Var::constant(v)
    }

    fn value(&self) -> f64 {
        self.val
    }

    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }

    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }

    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }

    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }

    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Var::constant(1.0);
        }
        self.unary(self.val.powi(n), n as f64 * self.val.powi(n - 1))
    }

    fn abs(self) -> Self {
        self.unary(self.val.abs(), sign_of(self.val))
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.unary(r, -r * r)
    }
}

/// A scalar loss over a flat parameter vector, evaluable on a tape.
pub trait TapeLoss {
    fn param_count(&self) -> usize;
    fn eval<'t>(&self, params: &[Var<'t>]) -> Var<'t>;
}

/// Adapter turning a closure into a [`TapeLoss`].
pub struct FnLoss<F> {
    param_count: usize,
    f: F,
}

pub fn loss_fn<F>(param_count: usize, f: F) -> FnLoss<F>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    FnLoss { param_count, f }
}

impl<F> TapeLoss for FnLoss<F>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    fn param_count(&self) -> usize {
        self.param_count
    }

    fn eval<'t>(&self, params: &[Var<'t>]) -> Var<'t> {
        (self.f)(params)
    }
}

/// Loss value and exact reverse-mode gradient with respect to `params`.
///
/// The tape is local to this call.
pub fn param_gradient<L: TapeLoss + ?Sized>(loss: &L, params: &[f64]) -> Result<(f64, Vec<f64>)> {
    if params.len() != loss.param_count() {
        return Err(Error::ParamCountMismatch {
            expected: loss.param_count(),
            found: params.len(),
        });
    }
    let tape = ParamTape::new(params.len());
    let vars = tape.params(params);
    let out = loss.eval(&vars);
    let value = out.value();
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss { value });
    }
    Ok((value, tape.gradient(out)))
}
