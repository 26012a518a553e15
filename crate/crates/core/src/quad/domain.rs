use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Bounded Lipschitz domains with closed-form measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `(0, 1)^d`
    UnitHypercube(usize),
    /// `{ |x| < 1 } ⊂ R^d`
    UnitBall(usize),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match *self {
            Domain::UnitHypercube(d) | Domain::UnitBall(d) => d,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Domain::UnitHypercube(_) => 1.0,
            Domain::UnitBall(d) => ball_volume(d),
        }
    }

    /// `(d−1)`-dimensional measure of the boundary (counting measure for d = 1).
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            Domain::UnitHypercube(d) => 2.0 * d as f64,
            Domain::UnitBall(d) => d as f64 * ball_volume(d),
        }
    }

    /// Euclidean distance from an interior point to `∂Ω` (negative outside).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            Domain::UnitHypercube(_) => x
                .iter()
                .map(|&c| c.min(1.0 - c))
                .fold(f64::INFINITY, f64::min),
            Domain::UnitBall(_) => 1.0 - x.iter().map(|c| c * c).sum::<f64>().sqrt(),
        }
    }

    pub fn contains_strictly(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.distance_to_boundary(x) > 0.0
    }

    pub fn on_boundary(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Domain::UnitHypercube(_) => {
                x.iter().all(|&c| (-tol..=1.0 + tol).contains(&c))
                    && x.iter().any(|&c| c.abs() <= tol || (c - 1.0).abs() <= tol)
            }
            Domain::UnitBall(_) => (x.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs() <= tol,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::UnitHypercube(d) => write!(f, "unit_hypercube({d})"),
            Domain::UnitBall(d) => write!(f, "unit_ball({d})"),
        }
    }
}

/// `π^{d/2} / Γ(d/2 + 1)` via `V_d = (2π/d)·V_{d−2}`.
pub fn ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * ball_volume(d - 2),
    }
}
