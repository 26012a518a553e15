use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Activation, JetPlan, Mlp, MlpSpec};
use crate::pde::PdeProblem;
use crate::quad::{check_exponent, lp_norm, sample, CollocationSet, PointSet, Scheme};

use super::loss::{LossBreakdown, LossWeights};
use super::monitor::{MonitorReport, MonitorRow};
use super::objective::{Mode, Objective};
use super::optim::{Optimizer, OptimizerState};

/// Reads `p` as a number or the string `"inf"`.
pub(crate) mod exponent {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
        if p.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*p)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(p),
            Raw::Text(t) => parse(&t).ok_or_else(|| de::Error::custom(format!("invalid exponent `{t}`"))),
        }
    }

    pub fn parse(t: &str) -> Option<f64> {
        match t.trim() {
            "inf" | "infinity" | "∞" => Some(f64::INFINITY),
            other => other.parse().ok(),
        }
    }
}

pub use exponent::parse as parse_exponent;

/// Interior and boundary collocation counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollocationSpec {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub scheme: Scheme,
    pub seed: u64,
}

impl Default for CollocationSpec {
    fn default() -> Self {
        CollocationSpec {
            n_interior: crate::quad::DEFAULT_INTERIOR,
            n_boundary: crate::quad::DEFAULT_BOUNDARY,
            scheme: Scheme::MonteCarlo,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: Mode,
    #[serde(with = "exponent")]
    pub p: f64,
    pub weights: LossWeights,
    pub optimizer: Optimizer,
    pub max_iters: u64,
    /// Monitor spacing, clamped into `1..=max(max_iters, 1)`. The final
    /// iteration is always recorded.
    pub checkpoint_every: u64,
    pub collocation: CollocationSpec,
    /// Draw a fresh collocation set every this many iterations; 0 keeps one
    /// set for the whole run.
    pub resample_every: u64,
    pub validation_points: usize,
    /// Seed of the validation set used by the monitors.
    pub validation_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Vs,
            p: 2.0,
            weights: LossWeights::default(),
            optimizer: Optimizer::default(),
            max_iters: 20_000,
            checkpoint_every: 500,
            collocation: CollocationSpec::default(),
            resample_every: 0,
            validation_points: 1024,
            validation_seed: 0x05ee_d0f7_a11d,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_exponent(self.p)?;
        self.weights.validate()?;
        self.optimizer.validate()?;
        if self.validation_points == 0 {
            return Err(Error::invalid("validation_points must be at least 1"));
        }
        Ok(())
    }

    pub fn effective_checkpoint_every(&self) -> u64 {
        self.checkpoint_every.clamp(1, self.max_iters.max(1))
    }

    /// Iterations at which a monitor row is written.
    pub fn is_checkpoint(&self, iter: u64) -> bool {
        iter.is_multiple_of(self.effective_checkpoint_every()) || iter == self.max_iters
    }
}

/// The trainable networks: `u`, and `V` in split mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Networks {
    pub u_net: Mlp,
    pub v_net: Option<Mlp>,
}

impl Networks {
    /// Three hidden tanh layers of width 64 for `u` and, in split mode, `V`.
    pub fn default_for(mode: Mode, dim: usize, seed: u64) -> Result<Self> {
        let spec = |out, s| MlpSpec::new(dim, vec![64, 64, 64], out).with_activation(Activation::Tanh).with_seed(s);
        Ok(Networks {
            u_net: Mlp::init(spec(1, seed))?,
            v_net: match mode {
                Mode::Vs => Some(Mlp::init(spec(dim, seed.wrapping_add(1)))?),
                Mode::Pinn => None,
            },
        })
    }

    pub fn param_count(&self) -> usize {
        self.u_net.param_count() + self.v_net.as_ref().map_or(0, Mlp::param_count)
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(self.u_net.params());
        if let Some(v) = &self.v_net {
            out.extend_from_slice(v.params());
        }
    }

    fn read_params(&mut self, flat: &[f64]) {
        let nu = self.u_net.param_count();
        self.u_net.params_mut().copy_from_slice(&flat[..nu]);
        if let Some(v) = &mut self.v_net {
            v.params_mut().copy_from_slice(&flat[nu..]);
        }
    }
}

/// Values on the validation set kept between checkpoints.
struct Snapshot {
    u: Vec<f64>,
    v: Option<Array2<f64>>,
}

/// Fixed point set for the monitors, independent of the training points.
struct Validation {
    points: PointSet,
    p: f64,
    reference: Option<(Vec<f64>, Array2<f64>)>,
}

fn row_norms(a: &Array2<f64>) -> Vec<f64> {
    a.axis_iter(Axis(0))
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect()
}

impl Validation {
    fn new(problem: &PdeProblem, config: &TrainConfig) -> Result<Self> {
        let set = sample(problem.domain(), config.validation_points, 1, Scheme::MonteCarlo, config.validation_seed)?;
        let points = set.interior;
        let d = problem.dim();
        let reference = problem.reference().map(|r| {
            let u = points.iter().map(|(x, _)| (r.u)(x)).collect();
            let mut du = Array2::zeros((points.len(), d));
            for (i, (x, _)) in points.iter().enumerate() {
                for (k, g) in (r.du)(x).into_iter().enumerate() {
                    du[[i, k]] = g;
                }
            }
            (u, du)
        });
        Ok(Validation {
            points,
            p: config.p,
            reference,
        })
    }

    fn norm(&self, v: &[f64]) -> Result<f64> {
        lp_norm(v, self.points.weights(), self.p)
    }

    fn record(&self, iter: u64, loss: LossBreakdown, nets: &Networks, prev: Option<&Snapshot>) -> Result<(MonitorRow, Snapshot)> {
        let plan = JetPlan::first_order();
        let ut = nets.u_net.jet_forward(self.points.points(), &plan)?;
        let uo = ut.output();
        let u: Vec<f64> = uo.value().column(0).to_vec();
        let d = nets.u_net.input_dim();
        let mut du = Array2::zeros((u.len(), d));
        for k in 0..d {
            du.column_mut(k).assign(&uo.grad(k).column(0));
        }
        let v = match &nets.v_net {
            Some(net) => Some(net.jet_forward(self.points.points(), &JetPlan::values_only())?.output().value().to_owned()),
            None => None,
        };

        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        let u_cauchy = prev.map(|s| self.norm(&diff(&u, &s.u))).transpose()?;
        let v_cauchy = match (prev.and_then(|s| s.v.as_ref()), &v) {
            (Some(old), Some(new)) => Some(self.norm(&row_norms(&(new - old)))?),
            _ => None,
        };
        let (err_u_lp, err_du_lp, err_v_lp) = match &self.reference {
            Some((ru, rdu)) => (
                Some(self.norm(&diff(&u, ru))?),
                Some(self.norm(&row_norms(&(&du - rdu)))?),
                v.as_ref().map(|v| self.norm(&row_norms(&(v - rdu)))).transpose()?,
            ),
            None => (None, None, None),
        };
        let row = MonitorRow {
            iter,
            loss,
            u_cauchy,
            v_cauchy,
            err_u_lp,
            err_du_lp,
            err_v_lp,
        };
        Ok((row, Snapshot { u, v }))
    }
}

/// Optimization state of one run: networks, optimizer moments, iteration
/// counter and the current collocation set.
pub struct Trainer<'a> {
    config: TrainConfig,
    problem: &'a PdeProblem,
    nets: Networks,
    objective: Objective,
    state: OptimizerState,
    flat: Vec<f64>,
    iter: u64,
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, problem: &'a PdeProblem, nets: Networks) -> Result<Self> {
        config.validate()?;
        let d = problem.dim();
        if nets.u_net.input_dim() != d || nets.u_net.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: nets.u_net.input_dim(),
            });
        }
        match (config.mode, &nets.v_net) {
            (Mode::Vs, None) => return Err(Error::invalid("split mode needs a V network")),
            (Mode::Pinn, _) if !nets.u_net.activation().is_twice_differentiable() => {
                return Err(Error::UnsupportedSecondOrder {
                    activation: nets.u_net.activation().to_string(),
                })
            }
            _ => {}
        }
        let objective = Objective::new(problem, &Self::collocation(&config, problem, 0)?, config.mode, config.weights, config.p)?;
        let state = config.optimizer.state(nets.param_count());
        Ok(Trainer {
            config,
            problem,
            nets,
            objective,
            state,
            flat: Vec::new(),
            iter: 0,
        })
    }

    fn collocation(config: &TrainConfig, problem: &PdeProblem, round: u64) -> Result<CollocationSet> {
        let c = &config.collocation;
        sample(problem.domain(), c.n_interior, c.n_boundary, c.scheme, c.seed.wrapping_add(round))
    }

    pub fn iteration(&self) -> u64 {
        self.iter
    }

    pub fn networks(&self) -> &Networks {
        &self.nets
    }

    pub fn into_networks(self) -> Networks {
        self.nets
    }

    /// Loss at the current parameters without updating.
    pub fn current_loss(&self) -> Result<LossBreakdown> {
        self.objective.loss(&self.nets.u_net, self.nets.v_net.as_ref())
    }

    fn maybe_resample(&mut self) -> Result<()> {
        let every = self.config.resample_every;
        if every > 0 && self.iter > 0 && self.iter.is_multiple_of(every) {
            let colloc = Self::collocation(&self.config, self.problem, self.iter / every)?;
            self.objective = Objective::new(self.problem, &colloc, self.config.mode, self.config.weights, self.config.p)?;
        }
        Ok(())
    }

    /// One optimizer update. Returns the loss at the parameters before the
    /// update.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        self.maybe_resample()?;
        let (loss, grad) = self.objective.loss_and_grad(&self.nets.u_net, self.nets.v_net.as_ref())?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::DivergedTraining {
                iter: self.iter,
                report: Box::default(),
            });
        }
        self.nets.write_params(&mut self.flat);
        self.state.update(&mut self.flat, &grad)?;
        self.nets.read_params(&self.flat);
        self.iter += 1;
        Ok(loss)
    }
}

/// Runs `config.max_iters` updates and records a monitor row at every
/// checkpoint, including iteration 0 and the final parameters.
///
/// A non-finite loss stops the run with [`Error::DivergedTraining`], which
/// carries the rows recorded so far.
pub fn train(config: &TrainConfig, problem: &PdeProblem, nets: Networks) -> Result<(Networks, MonitorReport)> {
    let mut trainer = Trainer::new(*config, problem, nets)?;
    let validation = Validation::new(problem, config)?;
    let mut report = MonitorReport::default();
    let mut snapshot: Option<Snapshot> = None;
    let diverged = |iter, report: &MonitorReport| Error::DivergedTraining {
        iter,
        report: Box::new(report.clone()),
    };
    loop {
        let it = trainer.iteration();
        let checkpoint = config.is_checkpoint(it);
        let done = it >= config.max_iters;
        let loss = if done || checkpoint {
            let loss = trainer.current_loss()?;
            if !loss.is_finite() {
                return Err(diverged(it, &report));
            }
            Some(loss)
        } else {
            None
        };
        if let (true, Some(loss)) = (checkpoint, loss) {
            let (row, snap) = validation.record(it, loss, trainer.networks(), snapshot.as_ref())?;
            report.rows.push(row);
            snapshot = Some(snap);
        }
        if done {
            break;
        }
        match trainer.step() {
            Err(Error::DivergedTraining { iter, .. }) => return Err(diverged(iter, &report)),
            other => other?,
        };
    }
    Ok((trainer.into_networks(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{poisson_square, CoefficientField};
    use crate::quad::Domain;

    fn small(mode: Mode, d: usize, seed: u64) -> Networks {
        let spec = |out, s| MlpSpec::new(d, vec![12, 12], out).with_seed(s);
        Networks {
            u_net: Mlp::init(spec(1, seed)).unwrap(),
            v_net: (mode == Mode::Vs).then(|| Mlp::init(spec(d, seed + 1)).unwrap()),
        }
    }

    fn quick(mode: Mode, iters: u64) -> TrainConfig {
        TrainConfig {
            mode,
            max_iters: iters,
            checkpoint_every: 10,
            optimizer: Optimizer::adam(1e-2),
            collocation: CollocationSpec {
                n_interior: 64,
                n_boundary: 32,
                ..CollocationSpec::default()
            },
            validation_points: 128,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_iterations_gives_initial_row() {
        let problem = poisson_square();
        let (nets, rep) = train(&quick(Mode::Vs, 0), &problem, small(Mode::Vs, 2, 1)).unwrap();
        assert_eq!(rep.len(), 1);
        let r = rep.rows[0];
        assert_eq!(r.iter, 0);
        assert!(r.u_cauchy.is_none() && r.v_cauchy.is_none());
        assert!(r.err_u_lp.is_some() && r.err_v_lp.is_some());
        assert_eq!(nets, small(Mode::Vs, 2, 1));
    }

    #[test]
    fn schedule_and_decrease() {
        let problem = poisson_square();
        for mode in [Mode::Vs, Mode::Pinn] {
            let (_, rep) = train(&quick(mode, 45), &problem, small(mode, 2, 3)).unwrap();
            let iters: Vec<u64> = rep.rows.iter().map(|r| r.iter).collect();
            assert_eq!(iters, [0, 10, 20, 30, 40, 45]);
            assert!(rep.last().unwrap().loss.total < rep.rows[0].loss.total);
            for r in &rep.rows[1..] {
                assert!(r.u_cauchy.unwrap() >= 0.0);
                assert_eq!(r.v_cauchy.is_some(), mode == Mode::Vs);
            }
        }
    }

    #[test]
    fn deterministic_and_decomposed() {
        let problem = poisson_square();
        let mut cfg = quick(Mode::Vs, 30);
        cfg.resample_every = 7;
        let run = || train(&cfg, &problem, small(Mode::Vs, 2, 5)).unwrap().1.to_csv_string().unwrap();
        assert_eq!(run(), run());
        let (_, rep) = train(&cfg, &problem, small(Mode::Vs, 2, 5)).unwrap();
        for r in &rep.rows {
            let w = cfg.weights;
            assert_eq!(
                r.loss.total,
                w.lambda_n * r.loss.pde + w.lambda_d * r.loss.grad_match.unwrap() + w.lambda_b * r.loss.boundary
            );
        }
    }

    #[test]
    fn divergence_carries_partial_report() {
        let problem = PdeProblem::new("blowup", Domain::UnitHypercube(1))
            .with_c(CoefficientField::constant_scalar(1.0))
            .unwrap()
            .with_source(|_| 1.0);
        let mut cfg = quick(Mode::Pinn, 40);
        cfg.optimizer = Optimizer::sgd(1e300);
        let err = train(&cfg, &problem, small(Mode::Pinn, 1, 0)).unwrap_err();
        match err {
            Error::DivergedTraining { iter, report } => {
                assert!(iter >= 1);
                assert!(!report.is_empty());
                assert_eq!(report.rows[0].iter, 0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn config_parsing() {
        let cfg: TrainConfig = toml::from_str("p = \"inf\"\nmode = \"pinn\"\n[optimizer]\nkind = \"sgd\"\nlr = 0.1").unwrap();
        assert!(cfg.p.is_infinite());
        assert_eq!(cfg.mode, Mode::Pinn);
        assert_eq!(cfg.max_iters, 20_000);
        assert!(toml::from_str::<TrainConfig>("max_iter = 5").is_err());
        let cfg = TrainConfig {
            max_iters: 7,
            checkpoint_every: 0,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.effective_checkpoint_every(), 1);
        let cfg = TrainConfig {
            max_iters: 7,
            checkpoint_every: 100,
            ..TrainConfig::default()
        };
        assert!(cfg.is_checkpoint(0) && cfg.is_checkpoint(7) && !cfg.is_checkpoint(3));
    }

    #[test]
    fn pinn_refuses_relu() {
        let problem = poisson_square();
        let mut nets = small(Mode::Pinn, 2, 0);
        nets.u_net = Mlp::init(MlpSpec::new(2, vec![4], 1).with_activation(Activation::Relu)).unwrap();
        assert!(matches!(
            train(&quick(Mode::Pinn, 1), &problem, nets),
            Err(Error::UnsupportedSecondOrder { .. })
        ));
    }
}
