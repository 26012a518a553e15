//! Model checkpoints: a JSON document holding each network's [`MlpSpec`] and
//! flat parameter array.
//!
//! ```json
//! {
//!   "format": "vspinn-checkpoint",
//!   "version": 1,
//!   "u_net": { "spec": { ... }, "params": [ ... ] },
//!   "v_net": null
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so loading restores every
//! parameter bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpSpec};
use super::split::SplitModel;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "vspinn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetRecord {
    pub spec: MlpSpec,
    pub params: Vec<f64>,
}

impl From<&Mlp> for NetRecord {
    fn from(net: &Mlp) -> Self {
        NetRecord {
            spec: net.spec().clone(),
            params: net.params().to_vec(),
        }
    }
}

impl NetRecord {
    pub fn to_mlp(&self) -> Result<Mlp> {
        Mlp::from_params(self.spec.clone(), self.params.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub u_net: NetRecord,
    pub v_net: Option<NetRecord>,
}

impl Checkpoint {
    pub fn from_u_net(u_net: &Mlp) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            u_net: u_net.into(),
            v_net: None,
        }
    }

    pub fn from_split(model: &SplitModel) -> Self {
        Checkpoint {
            v_net: Some(model.v_net().into()),
            ..Checkpoint::from_u_net(model.u_net())
        }
    }

    pub fn u_net(&self) -> Result<Mlp> {
        self.u_net.to_mlp()
    }

    pub fn split_model(&self) -> Result<Option<SplitModel>> {
        match &self.v_net {
            None => Ok(None),
            Some(v) => Ok(Some(SplitModel::new(self.u_net.to_mlp()?, v.to_mlp()?)?)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::invalid(format!("not a checkpoint (format `{}`)", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Activation;

    fn model() -> SplitModel {
        SplitModel::init(
            MlpSpec::new(2, vec![5, 4], 1).with_seed(9),
            MlpSpec::new(2, vec![6], 2)
                .with_activation(Activation::LeakyRelu(0.2))
                .with_seed(10),
        )
        .unwrap()
    }

    #[test]
    fn serialization_is_stable() {
        let ck = Checkpoint::from_split(&model());
        let a = ck.to_json().unwrap();
        let b = Checkpoint::from_json(&a).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reload_preserves_outputs_bitwise() {
        let m = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        Checkpoint::from_split(&m).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap().split_model().unwrap().unwrap();
        for x in [[0.1, 0.2], [-0.77, 0.31], [1e-3, 0.999]] {
            let a = m.u_net().forward(&x).unwrap();
            let b = back.u_net().forward(&x).unwrap();
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            let va = m.v_net().forward(&x).unwrap();
            let vb = back.v_net().forward(&x).unwrap();
            assert!(va.iter().zip(&vb).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn version_is_checked() {
        let mut ck = Checkpoint::from_u_net(model().u_net());
        ck.version = 7;
        let text = serde_json::to_string(&ck).unwrap();
        assert!(Checkpoint::from_json(&text).is_err());
    }
}
