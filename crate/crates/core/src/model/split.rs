use crate::autodiff::input_gradient;
use crate::error::{Error, Result};

use super::mlp::{Mlp, MlpSpec};

/// Primary network `u: R^d → R` and auxiliary network `V: R^d → R^d`,
/// parameterized independently.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitModel {
    u_net: Mlp,
    v_net: Mlp,
}

/// `u(x)`, its autodiff gradient `Du(x)` and the auxiliary output `V(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSample {
    pub u: f64,
    pub du: Vec<f64>,
    pub v: Vec<f64>,
}

impl SplitModel {
    pub fn new(u_net: Mlp, v_net: Mlp) -> Result<Self> {
        let d = u_net.input_dim();
        if u_net.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: u_net.output_dim(),
            });
        }
        if v_net.input_dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v_net.input_dim(),
            });
        }
        if v_net.output_dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v_net.output_dim(),
            });
        }
        Ok(SplitModel { u_net, v_net })
    }

    pub fn init(u_spec: MlpSpec, v_spec: MlpSpec) -> Result<Self> {
        SplitModel::new(Mlp::init(u_spec)?, Mlp::init(v_spec)?)
    }

    pub fn dim(&self) -> usize {
        self.u_net.input_dim()
    }

    pub fn u_net(&self) -> &Mlp {
        &self.u_net
    }

    pub fn v_net(&self) -> &Mlp {
        &self.v_net
    }

    pub fn u_net_mut(&mut self) -> &mut Mlp {
        &mut self.u_net
    }

    pub fn v_net_mut(&mut self) -> &mut Mlp {
        &mut self.v_net
    }

    pub fn into_parts(self) -> (Mlp, Mlp) {
        (self.u_net, self.v_net)
    }

    pub fn u_and_grad(&self, x: &[f64]) -> Result<SplitSample> {
        let u = self.u_net.forward(x)?[0];
        let du = input_gradient(&self.u_net, x)?;
        let v = self.v_net.forward(x)?;
        Ok(SplitSample { u, du, v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(seed: u64) -> SplitModel {
        SplitModel::init(
            MlpSpec::new(2, vec![8, 8], 1).with_seed(seed),
            MlpSpec::new(2, vec![8, 8], 2).with_seed(seed + 1),
        )
        .unwrap()
    }

    #[test]
    fn dimensions_validated() {
        let u = Mlp::init(MlpSpec::new(2, vec![4], 1)).unwrap();
        let v = Mlp::init(MlpSpec::new(2, vec![4], 3)).unwrap();
        assert!(SplitModel::new(u, v).is_err());
    }

    #[test]
    fn constant_u_has_zero_gradient() {
        let mut m = model(1);
        let (w, _) = m.u_net().layer_offsets(2);
        for p in &mut m.u_net_mut().params_mut()[w..] {
            *p = 0.0;
        }
        let n = m.u_net().param_count();
        m.u_net_mut().params_mut()[n - 1] = 0.7;
        let s = m.u_and_grad(&[0.3, 0.4]).unwrap();
        assert_eq!(s.u, 0.7);
        assert_eq!(s.du, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_last_layer_gives_zero_v() {
        let mut m = model(2);
        let (w, _) = m.v_net().layer_offsets(2);
        for p in &mut m.v_net_mut().params_mut()[w..] {
            *p = 0.0;
        }
        assert_eq!(m.u_and_grad(&[0.1, 0.9]).unwrap().v, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = model(3);
        let x = [0.35, -0.6];
        let s = m.u_and_grad(&x).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (m.u_net().forward(&xp).unwrap()[0] - m.u_net().forward(&xm).unwrap()[0])
                / (2.0 * h);
            assert!((s.du[k] - fd).abs() <= 1e-5 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn nets_are_independent() {
        let mut m = model(4);
        let x = [0.2, 0.2];
        let v0 = m.u_and_grad(&x).unwrap().v;
        m.u_net_mut().params_mut()[0] += 1.0;
        assert_eq!(m.u_and_grad(&x).unwrap().v, v0);
        let u0 = m.u_and_grad(&x).unwrap().u;
        m.v_net_mut().params_mut()[3] -= 0.5;
        assert_eq!(m.u_and_grad(&x).unwrap().u, u0);
    }
}
