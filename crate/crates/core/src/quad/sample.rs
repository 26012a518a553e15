use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::domain::Domain;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    MonteCarlo,
    Grid,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::MonteCarlo => "monte_carlo",
            Scheme::Grid => "grid",
        })
    }
}

/// Quadrature nodes (one per row) and their weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    points: Array2<f64>,
    weights: Vec<f64>,
}

impl PointSet {
    pub fn new(points: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.nrows() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: points.nrows(),
                found: weights.len(),
            });
        }
        Ok(PointSet { points, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(point, weight)` pairs with points as plain slices.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .rows()
            .into_iter()
            .zip(&self.weights)
            .map(|(r, &w)| (r.to_slice().expect("row-major points"), w))
    }
}

/// Interior and boundary quadrature for one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    pub domain: Domain,
    pub scheme: Scheme,
    pub seed: u64,
    pub interior: PointSet,
    pub boundary: PointSet,
}

/// Draws a collocation set.
///
/// * `MonteCarlo`: i.i.d. uniform points with equal weights `|Ω|/n` and
///   `|∂Ω|/m`. Ball interiors use radius inversion `r = U^{1/d}` times a
///   uniform direction (a normalized Gaussian vector); hypercube boundaries
///   pick a face uniformly (all faces have unit measure) and a uniform point
///   on it. Interior and boundary use separate RNG streams, so changing one
///   count leaves the other set unchanged.
/// * `Grid` (hypercube only): the midpoint rule on the largest `k^d ≤ n`
///   tensor grid, and on each face the largest `k_b^{d−1}` grid with
///   `2d·k_b^{d−1} ≤ m`.
pub fn sample(
    domain: Domain,
    n_interior: usize,
    n_boundary: usize,
    scheme: Scheme,
    seed: u64,
) -> Result<CollocationSet> {
    if n_interior == 0 || n_boundary == 0 {
        return Err(Error::invalid("collocation counts must be at least 1"));
    }
    if domain.dim() == 0 {
        return Err(Error::invalid("domain dimension must be at least 1"));
    }
    let (interior, boundary) = match (scheme, domain) {
        (Scheme::MonteCarlo, _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let interior = mc_interior(domain, n_interior, &mut rng);
            rng.set_stream(1);
            rng.set_word_pos(0);
            let boundary = mc_boundary(domain, n_boundary, &mut rng);
            (interior, boundary)
        }
        (Scheme::Grid, Domain::UnitHypercube(d)) => {
            (grid_interior(d, n_interior), grid_boundary(d, n_boundary))
        }
        (Scheme::Grid, Domain::UnitBall(_)) => {
            return Err(Error::UnsupportedScheme {
                scheme: scheme.to_string(),
                domain: domain.to_string(),
            })
        }
    };
    Ok(CollocationSet {
        domain,
        scheme,
        seed,
        interior,
        boundary,
    })
}

fn equal_weights(points: Array2<f64>, total: f64) -> PointSet {
    let n = points.nrows();
    PointSet {
        points,
        weights: vec![total / n as f64; n],
    }
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn unit_direction<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

fn mc_interior<R: Rng>(domain: Domain, n: usize, rng: &mut R) -> PointSet {
    let d = domain.dim();
    let mut pts = Array2::zeros((n, d));
    for mut row in pts.rows_mut() {
        match domain {
            Domain::UnitHypercube(_) => row.iter_mut().for_each(|c| *c = open_unit(rng)),
            Domain::UnitBall(_) => {
                let dir = unit_direction(d, rng);
                let r = rng.random::<f64>().powf(1.0 / d as f64);
                row.iter_mut().zip(dir).for_each(|(c, u)| *c = r * u);
            }
        }
    }
    equal_weights(pts, domain.volume())
}

fn mc_boundary<R: Rng>(domain: Domain, n: usize, rng: &mut R) -> PointSet {
    let d = domain.dim();
    let mut pts = Array2::zeros((n, d));
    for mut row in pts.rows_mut() {
        match domain {
            Domain::UnitHypercube(_) => {
                let face = rng.random_range(0..2 * d);
                row.iter_mut().for_each(|c| *c = rng.random::<f64>());
                row[face / 2] = (face % 2) as f64;
            }
            Domain::UnitBall(_) => {
                let dir = unit_direction(d, rng);
                row.iter_mut().zip(dir).for_each(|(c, u)| *c = u);
            }
        }
    }
    equal_weights(pts, domain.boundary_measure())
}

/// Largest `k` with `k^e ≤ n` (at least 1).
fn grid_side(n: usize, e: usize) -> usize {
    if e == 0 {
        return 1;
    }
    let mut k = (n as f64).powf(1.0 / e as f64).round() as usize + 1;
    while k > 1 && k.checked_pow(e as u32).is_none_or(|v| v > n) {
        k -= 1;
    }
    k.max(1)
}

/// Midpoint tensor grid on `(0,1)^e`, first coordinate varying slowest.
fn midpoints(k: usize, e: usize) -> Array2<f64> {
    let count = k.pow(e as u32);
    let mut pts = Array2::zeros((count, e));
    for (idx, mut row) in pts.rows_mut().into_iter().enumerate() {
        let mut rem = idx;
        for c in (0..e).rev() {
            row[c] = ((rem % k) as f64 + 0.5) / k as f64;
            rem /= k;
        }
    }
    pts
}

fn grid_interior(d: usize, n: usize) -> PointSet {
    let k = grid_side(n, d);
    equal_weights(midpoints(k, d), 1.0)
}

fn grid_boundary(d: usize, m: usize) -> PointSet {
    let kb = grid_side((m / (2 * d)).max(1), d - 1);
    let face = midpoints(kb, d - 1);
    let per_face = face.nrows();
    let mut pts = Array2::zeros((2 * d * per_face, d));
    let mut r = 0;
    for axis in 0..d {
        for side in [0.0, 1.0] {
            for fp in face.rows() {
                let mut row = pts.row_mut(r);
                let mut j = 0;
                for c in 0..d {
                    if c == axis {
                        row[c] = side;
                    } else {
                        row[c] = fp[j];
                        j += 1;
                    }
                }
                r += 1;
            }
        }
    }
    PointSet {
        points: pts,
        weights: vec![1.0 / per_face as f64; 2 * d * per_face],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_grid_on_square() {
        let c = sample(Domain::UnitHypercube(2), 4, 4, Scheme::Grid, 0).unwrap();
        let got: Vec<Vec<f64>> = c.interior.iter().map(|(p, _)| p.to_vec()).collect();
        assert_eq!(
            got,
            vec![vec![0.25, 0.25], vec![0.25, 0.75], vec![0.75, 0.25], vec![0.75, 0.75]]
        );
        assert!(c.interior.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn grid_rejected_on_ball() {
        assert!(matches!(
            sample(Domain::UnitBall(2), 10, 10, Scheme::Grid, 0),
            Err(Error::UnsupportedScheme { .. })
        ));
    }

    #[test]
    fn grid_side_is_floor_root() {
        assert_eq!(grid_side(4, 2), 2);
        assert_eq!(grid_side(8, 2), 2);
        assert_eq!(grid_side(9, 2), 3);
        assert_eq!(grid_side(27, 3), 3);
        assert_eq!(grid_side(1, 3), 1);
        assert_eq!(grid_side(5, 0), 1);
    }

    #[test]
    fn same_seed_same_set() {
        let a = sample(Domain::UnitBall(3), 50, 20, Scheme::MonteCarlo, 7).unwrap();
        let b = sample(Domain::UnitBall(3), 50, 20, Scheme::MonteCarlo, 7).unwrap();
        let c = sample(Domain::UnitBall(3), 50, 20, Scheme::MonteCarlo, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.interior, c.interior);
    }

    #[test]
    fn boundary_stream_independent_of_interior_count() {
        let a = sample(Domain::UnitHypercube(2), 10, 30, Scheme::MonteCarlo, 3).unwrap();
        let b = sample(Domain::UnitHypercube(2), 99, 30, Scheme::MonteCarlo, 3).unwrap();
        assert_eq!(a.boundary, b.boundary);
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(sample(Domain::UnitHypercube(2), 0, 3, Scheme::MonteCarlo, 0).is_err());
    }

    #[test]
    fn one_dimensional_boundaries() {
        let c = sample(Domain::UnitHypercube(1), 5, 2, Scheme::Grid, 0).unwrap();
        let b: Vec<f64> = c.boundary.iter().map(|(p, _)| p[0]).collect();
        assert_eq!(b, vec![0.0, 1.0]);
        assert_eq!(c.boundary.weight_sum(), 2.0);
    }
}
