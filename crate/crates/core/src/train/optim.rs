use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First-order update rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        #[serde(default = "adam_lr")]
        lr: f64,
        #[serde(default = "adam_beta1")]
        beta1: f64,
        #[serde(default = "adam_beta2")]
        beta2: f64,
        #[serde(default = "adam_eps")]
        eps: f64,
    },
}

fn adam_lr() -> f64 {
    1e-3
}
fn adam_beta1() -> f64 {
    0.9
}
fn adam_beta2() -> f64 {
    0.999
}
fn adam_eps() -> f64 {
    1e-8
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(1e-3)
    }
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr }
    }

    /// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: adam_beta1(),
            beta2: adam_beta2(),
            eps: adam_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Optimizer::Sgd { lr } => lr >= 0.0 && lr.is_finite(),
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                lr >= 0.0
                    && lr.is_finite()
                    && (0.0..1.0).contains(&beta1)
                    && (0.0..1.0).contains(&beta2)
                    && eps > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid optimizer settings {self:?}")))
        }
    }

    pub fn state(&self, param_count: usize) -> OptimizerState {
        let moments = match self {
            Optimizer::Sgd { .. } => 0,
            Optimizer::Adam { .. } => param_count,
        };
        OptimizerState {
            rule: *self,
            step: 0,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
        }
    }
}

/// Moments and step counter of an [`Optimizer`].
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    rule: Optimizer,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update in place.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(Error::ParamCountMismatch {
                expected: params.len(),
                found: grad.len(),
            });
        }
        self.step += 1;
        match self.rule {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                if self.m.len() != params.len() {
                    return Err(Error::ParamCountMismatch {
                        expected: self.m.len(),
                        found: params.len(),
                    });
                }
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(self.m.iter_mut())
                    .zip(self.v.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let mhat = *m / c1;
                    let vhat = *v / c2;
                    *p -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_is_identity() {
        for opt in [Optimizer::sgd(0.0), Optimizer::adam(0.0)] {
            let mut s = opt.state(3);
            let mut p = [1.0, -2.0, 0.5];
            s.update(&mut p, &[0.3, 0.1, -7.0]).unwrap();
            assert_eq!(p, [1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn sgd_on_square() {
        let mut s = Optimizer::sgd(0.1).state(1);
        let mut theta = [1.0];
        let g = [2.0 * theta[0]];
        s.update(&mut theta, &g).unwrap();
        assert!((theta[0] - 0.8).abs() < 1e-15);
    }

    // Straight-line Adam on θ² for comparison.
    fn reference_adam(steps: usize) -> Vec<f64> {
        let (mut th, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        let mut out = vec![th];
        for t in 1..=steps {
            let g = 2.0 * th;
            m = 0.9 * m + (1.0 - 0.9) * g;
            v = 0.999 * v + (1.0 - 0.999) * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t as i32));
            let vh = v / (1.0 - 0.999f64.powi(t as i32));
            th -= 1e-3 * mh / (vh.sqrt() + 1e-8);
            out.push(th);
        }
        out
    }

    #[test]
    fn adam_matches_reference_and_decreases() {
        let reference = reference_adam(100);
        let mut s = Optimizer::default().state(1);
        let mut theta = [1.0];
        let mut last = theta[0] * theta[0];
        for want in &reference[1..] {
            let g = [2.0 * theta[0]];
            s.update(&mut theta, &g).unwrap();
            assert_eq!(theta[0], *want);
            let loss = theta[0] * theta[0];
            assert!(loss < last);
            last = loss;
        }
        assert_eq!(s.steps_taken(), 100);
    }

    #[test]
    fn config_round_trip() {
        let o: Optimizer = toml::from_str("kind = \"adam\"\nlr = 0.01").unwrap();
        assert_eq!(o, Optimizer::adam(0.01));
        let o: Optimizer = toml::from_str("kind = \"sgd\"\nlr = 0.5").unwrap();
        assert_eq!(o, Optimizer::sgd(0.5));
        assert!(toml::from_str::<Optimizer>("kind = \"sgd\"\nlr = 0.5\nmomentum = 1").is_err());
        assert!(Optimizer::adam(-1.0).validate().is_err());
    }
}
