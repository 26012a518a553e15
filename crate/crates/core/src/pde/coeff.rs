use std::fmt;
use std::sync::Arc;

use crate::autodiff::Dual1;

type DualFn = Arc<dyn Fn(&[Dual1<f64>]) -> Vec<Dual1<f64>> + Send + Sync>;

/// Output shape of a coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    /// `d×d`, returned row-major.
    Matrix(usize),
}

/// Sparsity of a matrix coefficient, used to pick the cheapest set of
/// second-derivative directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Structure {
    /// `A = s(x)·I`
    Isotropic,
    /// `A = diag(a_11(x), …, a_dd(x))`
    Diagonal,
    General,
}

/// A coefficient `Ω → R`, `R^d` or `R^{d×d}` written as a closure over
/// forward-mode duals, so its spatial derivatives come for free.
#[derive(Clone)]
pub struct CoefficientField {
    shape: Shape,
    structure: Structure,
    constant: bool,
    f: DualFn,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("shape", &self.shape)
            .field("structure", &self.structure)
            .field("constant", &self.constant)
            .finish_non_exhaustive()
    }
}

fn consts(v: &[f64]) -> Vec<Dual1<f64>> {
    v.iter().map(|&c| Dual1::constant(c)).collect()
}

impl CoefficientField {
    pub fn scalar<F>(f: F) -> Self
    where
        F: Fn(&[Dual1<f64>]) -> Dual1<f64> + Send + Sync + 'static,
    {
        CoefficientField {
            shape: Shape::Scalar,
            structure: Structure::General,
            constant: false,
            f: Arc::new(move |x| vec![f(x)]),
        }
    }

    pub fn vector<F>(d: usize, f: F) -> Self
    where
        F: Fn(&[Dual1<f64>]) -> Vec<Dual1<f64>> + Send + Sync + 'static,
    {
        CoefficientField {
            shape: Shape::Vector(d),
            structure: Structure::General,
            constant: false,
            f: Arc::new(f),
        }
    }

    /// General matrix coefficient; `f` returns the `d²` entries row-major.
    pub fn matrix<F>(d: usize, f: F) -> Self
    where
        F: Fn(&[Dual1<f64>]) -> Vec<Dual1<f64>> + Send + Sync + 'static,
    {
        CoefficientField {
            shape: Shape::Matrix(d),
            structure: Structure::General,
            constant: false,
            f: Arc::new(f),
        }
    }

    /// `A(x) = s(x)·I`.
    pub fn isotropic<F>(d: usize, s: F) -> Self
    where
        F: Fn(&[Dual1<f64>]) -> Dual1<f64> + Send + Sync + 'static,
    {
        CoefficientField {
            shape: Shape::Matrix(d),
            structure: Structure::Isotropic,
            constant: false,
            f: Arc::new(move |x| {
                let s = s(x);
                let mut m = vec![Dual1::constant(0.0); d * d];
                for i in 0..d {
                    m[i * d + i] = s;
                }
                m
            }),
        }
    }

    /// `A(x) = diag(f(x))`.
    pub fn diagonal<F>(d: usize, f: F) -> Self
    where
        F: Fn(&[Dual1<f64>]) -> Vec<Dual1<f64>> + Send + Sync + 'static,
    {
        CoefficientField {
            shape: Shape::Matrix(d),
            structure: Structure::Diagonal,
            constant: false,
            f: Arc::new(move |x| {
                let diag = f(x);
                let mut m = vec![Dual1::constant(0.0); d * d];
                for (i, v) in diag.into_iter().enumerate().take(d) {
                    m[i * d + i] = v;
                }
                m
            }),
        }
    }

    pub fn constant_scalar(c: f64) -> Self {
        CoefficientField {
            constant: true,
            ..CoefficientField::scalar(move |_| Dual1::constant(c))
        }
    }

    pub fn constant_vector(v: Vec<f64>) -> Self {
        let d = v.len();
        CoefficientField {
            constant: true,
            ..CoefficientField::vector(d, move |_| consts(&v))
        }
    }

    pub fn zero_vector(d: usize) -> Self {
        CoefficientField::constant_vector(vec![0.0; d])
    }

    /// Constant matrix from row-major entries; the structure is detected.
    pub fn constant_matrix(d: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), d * d, "constant_matrix needs d² entries");
        let off_diag_zero = (0..d).all(|i| (0..d).all(|j| i == j || entries[i * d + j] == 0.0));
        let iso = off_diag_zero && (0..d).all(|i| entries[i * d + i] == entries[0]);
        let structure = if iso {
            Structure::Isotropic
        } else if off_diag_zero {
            Structure::Diagonal
        } else {
            Structure::General
        };
        CoefficientField {
            shape: Shape::Matrix(d),
            structure,
            constant: true,
            f: Arc::new(move |_| consts(&entries)),
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut e = vec![0.0; d * d];
        for i in 0..d {
            e[i * d + i] = 1.0;
        }
        CoefficientField::constant_matrix(d, e)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// Flattened output length.
    pub fn len(&self) -> usize {
        match self.shape {
            Shape::Scalar => 1,
            Shape::Vector(d) => d,
            Shape::Matrix(d) => d * d,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eval_dual(&self, x: &[Dual1<f64>]) -> Vec<Dual1<f64>> {
        (self.f)(x)
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        self.eval_dual(&consts(x)).iter().map(|v| v.value).collect()
    }

    /// Values and directional derivatives along `e_k`.
    pub fn value_and_partial(&self, x: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
        let seeded: Vec<Dual1<f64>> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual1::new(v, if i == k { 1.0 } else { 0.0 }))
            .collect();
        let out = self.eval_dual(&seeded);
        (
            out.iter().map(|v| v.value).collect(),
            out.iter().map(|v| v.tangent).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_structure_detection() {
        assert_eq!(CoefficientField::identity(3).structure(), Structure::Isotropic);
        let diag = CoefficientField::constant_matrix(2, vec![1.0, 0.0, 0.0, 2.0]);
        assert_eq!(diag.structure(), Structure::Diagonal);
        let full = CoefficientField::constant_matrix(2, vec![1.0, 0.5, 0.5, 2.0]);
        assert_eq!(full.structure(), Structure::General);
    }

    #[test]
    fn isotropic_partials() {
        let a = CoefficientField::isotropic(2, |x| x[0] * x[1]);
        let (v, t) = a.value_and_partial(&[2.0, 3.0], 1);
        assert_eq!(v, vec![6.0, 0.0, 0.0, 6.0]);
        assert_eq!(t, vec![2.0, 0.0, 0.0, 2.0]);
        assert!(!a.is_constant());
    }
}
