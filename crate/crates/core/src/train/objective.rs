use std::fmt;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JetPlan, Mlp, Probe};
use crate::pde::{PdeProblem, Structure};
use crate::quad::{check_exponent, lp_norm, CollocationSet};

use super::loss::{lp_norm_grad, LossBreakdown, LossWeights};

/// Which objective to minimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Strong-form residual of a single network.
    Pinn,
    /// Split residual of `u` and `V` plus gradient matching.
    #[default]
    Vs,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pinn => "pinn",
            Mode::Vs => "vs",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinn" => Ok(Mode::Pinn),
            "vs" => Ok(Mode::Vs),
            other => Err(Error::invalid(format!("unknown mode `{other}` (expected pinn or vs)"))),
        }
    }
}

/// Probes covering `Σ_ij α_ij D²_ij u` for the given structure of `A`, with
/// the per-probe coefficient read from row-major `α`.
fn probes_for(structure: Structure, d: usize) -> (Vec<Probe>, Vec<Vec<(usize, f64)>>) {
    match structure {
        Structure::Isotropic => (vec![Probe::laplacian(d)], vec![vec![(0, 1.0)]]),
        Structure::Diagonal => (
            (0..d).map(Probe::diagonal).collect(),
            (0..d).map(|k| vec![(k * d + k, 1.0)]).collect(),
        ),
        Structure::General => {
            let plan = JetPlan::full_hessian(d);
            let mut pick: Vec<Vec<(usize, f64)>> = (0..d).map(|k| vec![(k * d + k, 1.0)]).collect();
            for k in 0..d {
                for l in k + 1..d {
                    pick.push(vec![(k * d + l, 0.5), (l * d + k, 0.5)]);
                }
            }
            (plan.probes, pick)
        }
    }
}

/// Rows per block of interior points. Blocks are evaluated independently
/// (in parallel when threads are available) and their gradients summed in
/// block order, so results do not depend on the thread count.
pub const CHUNK_ROWS: usize = 256;

/// The training loss of one mode on one collocation set, evaluated in
/// batches through [`Mlp::jet_forward`] with exact parameter gradients from
/// [`Mlp::jet_backward`].
///
/// Coefficients are sampled once at construction: `α = −A`,
/// `β_i = b_i − Σ_j D_j a_ij`, `c`, `f` at interior points and `g` at
/// boundary points.
#[derive(Clone, Debug)]
pub struct Objective {
    mode: Mode,
    weights: LossWeights,
    p: f64,
    dim: usize,
    chunks: Vec<Array2<f64>>,
    w_int: Vec<f64>,
    /// `n × d²`, row-major `α` per point.
    alpha: Array2<f64>,
    beta: Array2<f64>,
    c: Vec<f64>,
    f: Vec<f64>,
    /// Single-network mode only: `n × probes`.
    gamma: Array2<f64>,
    u_plan: JetPlan,
    boundary: Array2<f64>,
    w_bdy: Vec<f64>,
    g: Vec<f64>,
}

/// Sums per-block gradients into `out` in block order.
fn reduce_into(out: &mut [f64], parts: &[Vec<f64>]) {
    for part in parts {
        for (o, v) in out.iter_mut().zip(part) {
            *o += v;
        }
    }
}

impl Objective {
    pub fn new(
        problem: &PdeProblem,
        colloc: &CollocationSet,
        mode: Mode,
        weights: LossWeights,
        p: f64,
    ) -> Result<Self> {
        check_exponent(p)?;
        weights.validate()?;
        let d = problem.dim();
        if colloc.domain.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: colloc.domain.dim(),
            });
        }
        if colloc.boundary.is_empty() {
            return Err(Error::EmptyBoundary);
        }
        let n = colloc.interior.len();
        let mut alpha = Array2::zeros((n, d * d));
        let mut beta = Array2::zeros((n, d));
        let mut c = Vec::with_capacity(n);
        let mut f = Vec::with_capacity(n);
        for (i, (x, _)) in colloc.interior.iter().enumerate() {
            let pc = problem.coefficients_at(x)?;
            for (k, a) in pc.a.iter().enumerate() {
                alpha[[i, k]] = -a;
            }
            for (k, b) in pc.beta().into_iter().enumerate() {
                beta[[i, k]] = b;
            }
            c.push(pc.c);
            f.push(pc.f);
        }
        let (u_plan, gamma) = match mode {
            Mode::Vs => (JetPlan::first_order(), Array2::zeros((n, 0))),
            Mode::Pinn => {
                let (probes, pick) = probes_for(problem.structure(), d);
                let mut gamma = Array2::zeros((n, probes.len()));
                for i in 0..n {
                    for (s, terms) in pick.iter().enumerate() {
                        gamma[[i, s]] = terms.iter().map(|&(k, w)| w * alpha[[i, k]]).sum();
                    }
                }
                (JetPlan::with_probes(probes), gamma)
            }
        };
        let points = colloc.interior.points();
        let chunks = (0..n)
            .step_by(CHUNK_ROWS)
            .map(|s| points.slice(ndarray::s![s..(s + CHUNK_ROWS).min(n), ..]).to_owned())
            .collect();
        let g = colloc
            .boundary
            .iter()
            .map(|(x, _)| problem.boundary_value(x))
            .collect();
        Ok(Objective {
            mode,
            weights,
            p,
            dim: d,
            chunks,
            w_int: colloc.interior.weights().to_vec(),
            alpha,
            beta,
            c,
            f,
            gamma,
            u_plan,
            boundary: colloc.boundary.points().to_owned(),
            w_bdy: colloc.boundary.weights().to_vec(),
            g,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    /// Number of second-order probes per point in single-network mode.
    pub fn probe_count(&self) -> usize {
        self.u_plan.probes.len()
    }

    fn check_nets(&self, u: &Mlp, v: Option<&Mlp>) -> Result<()> {
        let d = self.dim;
        if u.input_dim() != d || u.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: u.input_dim(),
            });
        }
        match (self.mode, v) {
            (Mode::Vs, Some(v)) if v.input_dim() == d && v.output_dim() == d => Ok(()),
            (Mode::Vs, Some(v)) => Err(Error::DimensionMismatch {
                expected: d,
                found: v.output_dim(),
            }),
            (Mode::Vs, None) => Err(Error::invalid("split mode needs a V network")),
            (Mode::Pinn, _) => Ok(()),
        }
    }

    pub fn loss(&self, u: &Mlp, v: Option<&Mlp>) -> Result<LossBreakdown> {
        self.evaluate(u, v, false).map(|(l, _)| l)
    }

    /// Loss and its gradient with respect to the concatenated parameters
    /// `[u params, V params]`.
    pub fn loss_and_grad(&self, u: &Mlp, v: Option<&Mlp>) -> Result<(LossBreakdown, Vec<f64>)> {
        self.evaluate(u, v, true)
    }

    fn evaluate(&self, u: &Mlp, v: Option<&Mlp>, want_grad: bool) -> Result<(LossBreakdown, Vec<f64>)> {
        self.check_nets(u, v)?;
        let v = if self.mode == Mode::Vs { v } else { None };
        let nu = u.param_count();
        let nv = v.map_or(0, Mlp::param_count);
        let mut grad = if want_grad { vec![0.0; nu + nv] } else { Vec::new() };
        let (gu, gv) = grad.split_at_mut(if want_grad { nu } else { 0 });

        let (pde, grad_match) = match (self.mode, v) {
            (Mode::Vs, Some(v)) => {
                let (pde, gm) = self.split_terms(u, v, want_grad, gu, gv)?;
                (pde, Some(gm))
            }
            _ => (self.strong_term(u, want_grad, gu)?, None),
        };
        let boundary = self.boundary_term(u, want_grad, gu)?;
        let loss = LossBreakdown::combine(&self.weights, pde, grad_match, boundary);
        Ok((loss, grad))
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.chunks.iter().scan(0, |start, c| {
            let s = *start;
            *start += c.nrows();
            Some((s, c.nrows()))
        })
    }

    fn strong_term(&self, u: &Mlp, want_grad: bool, gu: &mut [f64]) -> Result<f64> {
        let n = self.w_int.len();
        let d = self.dim;
        let traces = self
            .chunks
            .par_iter()
            .map(|c| u.jet_forward(c.view(), &self.u_plan))
            .collect::<Result<Vec<_>>>()?;
        let mut r = vec![0.0; n];
        for (trace, (s, m)) in traces.iter().zip(self.offsets()) {
            let out = trace.output();
            let val = out.value();
            for j in 0..m {
                let i = s + j;
                r[i] = self.c[i] * val[[j, 0]] - self.f[i];
            }
            for k in 0..d {
                let g = out.grad(k);
                for j in 0..m {
                    r[s + j] += self.beta[[s + j, k]] * g[[j, 0]];
                }
            }
            for q in 0..self.gamma.ncols() {
                let h = out.probe(q);
                for j in 0..m {
                    r[s + j] += self.gamma[[s + j, q]] * h[[j, 0]];
                }
            }
        }
        let pde = lp_norm(&r, &self.w_int, self.p)?;
        if want_grad {
            let mut rbar = vec![0.0; n];
            lp_norm_grad(&r, &self.w_int, self.p, pde, &mut rbar);
            rbar.iter_mut().for_each(|x| *x *= self.weights.lambda_n);
            let offsets: Vec<_> = self.offsets().collect();
            let parts: Vec<Vec<f64>> = traces
                .into_par_iter()
                .zip(offsets)
                .map(|(trace, (s, m))| {
                    let mut cot = trace.zero_cotangent();
                    {
                        let mut cv = cot.value_mut();
                        for j in 0..m {
                            cv[[j, 0]] = self.c[s + j] * rbar[s + j];
                        }
                    }
                    for k in 0..d {
                        let mut cg = cot.grad_mut(k);
                        for j in 0..m {
                            cg[[j, 0]] = self.beta[[s + j, k]] * rbar[s + j];
                        }
                    }
                    for q in 0..self.gamma.ncols() {
                        let mut cq = cot.probe_mut(q);
                        for j in 0..m {
                            cq[[j, 0]] = self.gamma[[s + j, q]] * rbar[s + j];
                        }
                    }
                    let mut g = vec![0.0; u.param_count()];
                    u.jet_backward(trace, &cot, &mut g);
                    g
                })
                .collect();
            reduce_into(gu, &parts);
        }
        Ok(pde)
    }

    fn split_terms(
        &self,
        u: &Mlp,
        v: &Mlp,
        want_grad: bool,
        gu: &mut [f64],
        gv: &mut [f64],
    ) -> Result<(f64, f64)> {
        let n = self.w_int.len();
        let d = self.dim;
        let plan = JetPlan::first_order();
        let traces = self
            .chunks
            .par_iter()
            .map(|c| Ok((u.jet_forward(c.view(), &plan)?, v.jet_forward(c.view(), &plan)?)))
            .collect::<Result<Vec<_>>>()?;

        let mut r = vec![0.0; n];
        let mut mismatch = Array2::<f64>::zeros((n, d));
        for ((ut, vt), (s, m)) in traces.iter().zip(self.offsets()) {
            let (uo, vo) = (ut.output(), vt.output());
            let uval = uo.value();
            let vval = vo.value();
            for j in 0..m {
                let i = s + j;
                let mut ri = self.c[i] * uval[[j, 0]] - self.f[i];
                for a in 0..d {
                    ri += self.beta[[i, a]] * vval[[j, a]];
                }
                r[i] = ri;
            }
            for b in 0..d {
                let jb = vo.grad(b);
                for j in 0..m {
                    let i = s + j;
                    for a in 0..d {
                        r[i] += self.alpha[[i, a * d + b]] * jb[[j, a]];
                    }
                }
            }
            for k in 0..d {
                let gk = uo.grad(k);
                for j in 0..m {
                    mismatch[[s + j, k]] = gk[[j, 0]] - vval[[j, k]];
                }
            }
        }
        let mag: Vec<f64> = mismatch
            .axis_iter(Axis(0))
            .map(|row| row.iter().map(|m| m * m).sum::<f64>().sqrt())
            .collect();
        let pde = lp_norm(&r, &self.w_int, self.p)?;
        let gm = lp_norm(&mag, &self.w_int, self.p)?;

        if want_grad {
            let mut rbar = vec![0.0; n];
            lp_norm_grad(&r, &self.w_int, self.p, pde, &mut rbar);
            rbar.iter_mut().for_each(|x| *x *= self.weights.lambda_n);
            let mut mbar = vec![0.0; n];
            lp_norm_grad(&mag, &self.w_int, self.p, gm, &mut mbar);
            // Pointwise d|m|/dm = m/|m|, with 0 at m = 0.
            let mut unit = mismatch;
            for (i, mut row) in unit.axis_iter_mut(Axis(0)).enumerate() {
                let s = if mag[i] > 0.0 {
                    self.weights.lambda_d * mbar[i] / mag[i]
                } else {
                    0.0
                };
                row.iter_mut().for_each(|m| *m *= s);
            }

            let offsets: Vec<_> = self.offsets().collect();
            let parts: Vec<(Vec<f64>, Vec<f64>)> = traces
                .into_par_iter()
                .zip(offsets)
                .map(|((ut, vt), (s, m))| {
                    let mut cu = ut.zero_cotangent();
                    {
                        let mut cv = cu.value_mut();
                        for j in 0..m {
                            cv[[j, 0]] = self.c[s + j] * rbar[s + j];
                        }
                    }
                    for k in 0..d {
                        let mut cg = cu.grad_mut(k);
                        for j in 0..m {
                            cg[[j, 0]] = unit[[s + j, k]];
                        }
                    }
                    let mut cvt = vt.zero_cotangent();
                    {
                        let mut cv = cvt.value_mut();
                        for j in 0..m {
                            for a in 0..d {
                                cv[[j, a]] = self.beta[[s + j, a]] * rbar[s + j] - unit[[s + j, a]];
                            }
                        }
                    }
                    for b in 0..d {
                        let mut cg = cvt.grad_mut(b);
                        for j in 0..m {
                            for a in 0..d {
                                cg[[j, a]] = self.alpha[[s + j, a * d + b]] * rbar[s + j];
                            }
                        }
                    }
                    let mut g_u = vec![0.0; u.param_count()];
                    let mut g_v = vec![0.0; v.param_count()];
                    u.jet_backward(ut, &cu, &mut g_u);
                    v.jet_backward(vt, &cvt, &mut g_v);
                    (g_u, g_v)
                })
                .collect();
            let (pu, pv): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
            reduce_into(gu, &pu);
            reduce_into(gv, &pv);
        }
        Ok((pde, gm))
    }

    fn boundary_term(&self, u: &Mlp, want_grad: bool, gu: &mut [f64]) -> Result<f64> {
        let trace = u.jet_forward(self.boundary.view(), &JetPlan::values_only())?;
        let val = trace.output().value();
        let e: Vec<f64> = self.g.iter().enumerate().map(|(i, g)| val[[i, 0]] - g).collect();
        let bdy = lp_norm(&e, &self.w_bdy, self.p)?;
        if want_grad {
            let mut ebar = vec![0.0; e.len()];
            lp_norm_grad(&e, &self.w_bdy, self.p, bdy, &mut ebar);
            let mut cot = trace.zero_cotangent();
            {
                let mut cv = cot.value_mut();
                for (i, eb) in ebar.iter().enumerate() {
                    cv[[i, 0]] = self.weights.lambda_b * eb;
                }
            }
            u.jet_backward(trace, &cot, gu);
        }
        Ok(bdy)
    }
}
