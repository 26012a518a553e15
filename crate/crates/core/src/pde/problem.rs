use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::autodiff::{input_gradient, norm, Dual1, Scalar, ScalarField};
use crate::error::{Error, Result};
use crate::quad::Domain;

use super::coeff::{CoefficientField, Shape, Structure};

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A known exact solution and its gradient.
#[derive(Clone)]
pub struct Reference {
    pub u: PointFn,
    pub du: VectorFn,
}

/// Linear second-order Dirichlet problem in divergence form,
///
/// ```text
/// −Σ_ij D_j(a_ij D_i u) + bᵀDu + cu = f  in Ω,
///                                 u = g  on ∂Ω.
/// ```
#[derive(Clone)]
pub struct PdeProblem {
    name: String,
    domain: Domain,
    a: CoefficientField,
    b: CoefficientField,
    c: CoefficientField,
    f: PointFn,
    g: PointFn,
    reference: Option<Reference>,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("c", &self.c)
            .field("has_reference", &self.reference.is_some())
            .finish_non_exhaustive()
    }
}

/// Coefficients at one point, arranged for the expanded operator
/// `Σ α_ij H_ij + βᵀG + cu − f` with `α = −A` and
/// `β_i = b_i − Σ_j D_j a_ij`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCoefficients {
    /// Row-major `d×d`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub div_a: Vec<f64>,
    pub c: f64,
    pub f: f64,
}

impl PointCoefficients {
    pub fn beta(&self) -> Vec<f64> {
        self.b.iter().zip(&self.div_a).map(|(b, da)| b - da).collect()
    }
}

impl PdeProblem {
    /// Poisson problem `−Δu = 0, u = 0` on `domain`; adjust with the `with_*`
    /// builders.
    pub fn new(name: impl Into<String>, domain: Domain) -> Self {
        let d = domain.dim();
        PdeProblem {
            name: name.into(),
            domain,
            a: CoefficientField::identity(d),
            b: CoefficientField::zero_vector(d),
            c: CoefficientField::constant_scalar(0.0),
            f: Arc::new(|_| 0.0),
            g: Arc::new(|_| 0.0),
            reference: None,
        }
    }

    pub fn with_a(mut self, a: CoefficientField) -> Result<Self> {
        check_shape(&a, Shape::Matrix(self.dim()), "a")?;
        self.a = a;
        Ok(self)
    }

    pub fn with_b(mut self, b: CoefficientField) -> Result<Self> {
        check_shape(&b, Shape::Vector(self.dim()), "b")?;
        self.b = b;
        Ok(self)
    }

    pub fn with_c(mut self, c: CoefficientField) -> Result<Self> {
        check_shape(&c, Shape::Scalar, "c")?;
        self.c = c;
        Ok(self)
    }

    pub fn with_source(mut self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.f = Arc::new(f);
        self
    }

    pub fn with_boundary(mut self, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.g = Arc::new(g);
        self
    }

    pub fn with_reference(
        mut self,
        u: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        du: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.reference = Some(Reference {
            u: Arc::new(u),
            du: Arc::new(du),
        });
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn a(&self) -> &CoefficientField {
        &self.a
    }

    pub fn b(&self) -> &CoefficientField {
        &self.b
    }

    pub fn c(&self) -> &CoefficientField {
        &self.c
    }

    pub fn source(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    /// Cheapest matrix structure `A` admits.
    pub fn structure(&self) -> Structure {
        self.a.structure()
    }

    pub fn coefficients_at(&self, x: &[f64]) -> Result<PointCoefficients> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.len(),
            });
        }
        let mut div_a = vec![0.0; d];
        let a = if self.a.is_constant() {
            self.a.value(x)
        } else {
            let mut a = Vec::new();
            for j in 0..d {
                let (val, der) = self.a.value_and_partial(x, j);
                for (i, da) in div_a.iter_mut().enumerate() {
                    *da += der[i * d + j];
                }
                a = val;
            }
            a
        };
        let pc = PointCoefficients {
            a,
            b: self.b.value(x),
            div_a,
            c: self.c.value(x)[0],
            f: self.source(x),
        };
        let finite = pc.a.iter().chain(&pc.b).chain(&pc.div_a).all(|v| v.is_finite())
            && pc.c.is_finite()
            && pc.f.is_finite();
        if !finite {
            return Err(Error::NonFiniteDerivative { point: x.to_vec() });
        }
        Ok(pc)
    }

    /// Registry lookup. `poisson_square` ignores `dim` unless it conflicts;
    /// `counterexample_ball` needs it.
    pub fn builtin(name: &str, dim: Option<usize>) -> Result<Self> {
        match name {
            "poisson_square" => match dim {
                None | Some(2) => Ok(poisson_square()),
                Some(d) => Err(Error::invalid(format!(
                    "poisson_square is two-dimensional, got d = {d}"
                ))),
            },
            "counterexample_ball" => counterexample_ball(dim.unwrap_or(2)),
            other => Err(Error::invalid(format!(
                "unknown problem `{other}` (available: {})",
                BUILTIN_PROBLEMS.join(", ")
            ))),
        }
    }
}

pub const BUILTIN_PROBLEMS: &[&str] = &["poisson_square", "counterexample_ball"];

fn check_shape(c: &CoefficientField, want: Shape, which: &str) -> Result<()> {
    if c.shape() != want {
        return Err(Error::invalid(format!(
            "coefficient `{which}` has shape {:?}, expected {want:?}",
            c.shape()
        )));
    }
    Ok(())
}

/// `Π_i sin(π x_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SineProduct {
    pub dim: usize,
}

impl ScalarField for SineProduct {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        x.iter().fold(S::one(), |acc, &xi| acc * (xi * PI).sin())
    }
}

/// `−Δu = 2π² sin(πx₁)sin(πx₂)` on `(0,1)²`, `u = 0` on the boundary,
/// exact solution `u* = sin(πx₁)sin(πx₂)`.
pub fn poisson_square() -> PdeProblem {
    let exact = SineProduct { dim: 2 };
    PdeProblem::new("poisson_square", Domain::UnitHypercube(2))
        .with_source(move |x| 2.0 * PI * PI * exact.eval(x))
        .with_reference(
            move |x| exact.eval(x),
            move |x| input_gradient(&exact, x).expect("finite gradient"),
        )
}

/// Degenerate operator `(1−|x|)²Δu + τᵀDu` on the unit ball with
/// `f = 0`, `g = 0`, written in divergence form as
/// `A = −(1−|x|)² I` and `b = τ + 2(1−|x|) x/|x|`, where
/// `τ(x) = (−x₂, x₁, 0, …)` (zero for `d = 1`).
pub fn counterexample_ball(d: usize) -> Result<PdeProblem> {
    if d == 0 {
        return Err(Error::invalid("counterexample_ball needs d ≥ 1"));
    }
    let a = CoefficientField::isotropic(d, |x| {
        let s = Dual1::constant(1.0) - norm(x);
        -(s * s)
    });
    let b = CoefficientField::vector(d, move |x| {
        let r = norm(x);
        let mut out: Vec<Dual1<f64>> = if r.value == 0.0 {
            vec![Dual1::constant(0.0); d]
        } else {
            let k = (Dual1::constant(1.0) - r) * 2.0 / r;
            x.iter().map(|&xi| k * xi).collect()
        };
        if d >= 2 {
            out[0] = out[0] - x[1];
            out[1] = out[1] + x[0];
        }
        out
    });
    PdeProblem::new("counterexample_ball", Domain::UnitBall(d))
        .with_a(a)?
        .with_b(b)
        .map(|p| p.with_reference(|_| 0.0, move |_| vec![0.0; d]))
}
