use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Activation, Mlp, MlpSpec};
use crate::pde::PdeProblem;
use crate::quad::Scheme;
use crate::train::{CollocationSpec, LossWeights, Mode, Networks, Optimizer, TrainConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "VSPINN_OUT_DIR";
/// Output directory when neither a flag, the config nor the environment
/// names one.
pub const DEFAULT_OUT_DIR: &str = "vspinn-out";

/// A complete experiment description. Every field has a default, so an empty
/// document is valid; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub quad: QuadSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    /// Registry name, see [`crate::pde::BUILTIN_PROBLEMS`].
    pub name: String,
    /// Dimension, for problems defined in any dimension.
    pub d: Option<usize>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            name: "poisson_square".into(),
            d: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSection {
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    /// Defaults to `train.seed` for `u` and `train.seed + 1` for `V`.
    pub init_seed: Option<u64>,
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection {
            hidden_widths: vec![64, 64, 64],
            activation: Activation::Tanh,
            init_seed: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub u: NetSection,
    /// Used in split mode only.
    pub v: NetSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub mode: Mode,
    #[serde(with = "crate::train::exponent_serde")]
    pub p: f64,
    pub weights: LossWeights,
    pub optimizer: Optimizer,
    pub max_iters: u64,
    pub checkpoint_every: u64,
    pub seed: u64,
    pub resample_every: u64,
    pub validation_points: usize,
    pub validation_seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            mode: t.mode,
            p: t.p,
            weights: t.weights,
            optimizer: t.optimizer,
            max_iters: t.max_iters,
            checkpoint_every: t.checkpoint_every,
            seed: 0,
            resample_every: t.resample_every,
            validation_points: t.validation_points,
            validation_seed: t.validation_seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSection {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub scheme: Scheme,
    pub seed: u64,
}

impl Default for QuadSection {
    fn default() -> Self {
        let c = CollocationSpec::default();
        QuadSection {
            n_interior: c.n_interior,
            n_boundary: c.n_boundary,
            scheme: c.scheme,
            seed: c.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// `--out`, then the config, then [`OUT_DIR_ENV`], then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| text[s].trim().trim_matches(|c| c == '[' || c == ']').to_string())
                .unwrap_or_default();
            Error::config(field, e.message().trim())
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::config("--config", format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_toml(&text)
    }

    /// Checks every field and cross-field constraint, naming the offending
    /// key on failure.
    pub fn validate(&self) -> Result<()> {
        self.problem()?;
        let t = self.train_config();
        crate::quad::check_exponent(t.p).map_err(|e| Error::config("train.p", e.to_string()))?;
        t.weights
            .validate()
            .map_err(|e| Error::config("train.weights", e.to_string()))?;
        t.optimizer
            .validate()
            .map_err(|e| Error::config("train.optimizer", e.to_string()))?;
        if t.validation_points == 0 {
            return Err(Error::config("train.validation_points", "must be at least 1"));
        }
        for (field, n) in [("quad.n_interior", self.quad.n_interior), ("quad.n_boundary", self.quad.n_boundary)] {
            if n == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        let nets: &[(&str, &NetSection)] = match t.mode {
            Mode::Pinn => &[("model.u", &self.model.u)],
            Mode::Vs => &[("model.u", &self.model.u), ("model.v", &self.model.v)],
        };
        for (name, net) in nets {
            if net.hidden_widths.is_empty() || net.hidden_widths.contains(&0) {
                return Err(Error::config(format!("{name}.hidden_widths"), "widths must be positive"));
            }
        }
        if t.mode == Mode::Pinn && !self.model.u.activation.is_twice_differentiable() {
            return Err(Error::config(
                "model.u.activation",
                format!(
                    "`{}` is not twice differentiable; pinn mode needs a C² activation such as tanh",
                    self.model.u.activation
                ),
            ));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<PdeProblem> {
        PdeProblem::builtin(&self.problem.name, self.problem.d).map_err(|e| Error::config("problem", e.to_string()))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            mode: t.mode,
            p: t.p,
            weights: t.weights,
            optimizer: t.optimizer,
            max_iters: t.max_iters,
            checkpoint_every: t.checkpoint_every,
            collocation: CollocationSpec {
                n_interior: self.quad.n_interior,
                n_boundary: self.quad.n_boundary,
                scheme: self.quad.scheme,
                seed: self.quad.seed,
            },
            resample_every: t.resample_every,
            validation_points: t.validation_points,
            validation_seed: t.validation_seed,
        }
    }

    /// Freshly initialized networks for the configured mode.
    pub fn networks(&self, dim: usize) -> Result<Networks> {
        let build = |net: &NetSection, out: usize, seed: u64| {
            Mlp::init(
                MlpSpec::new(dim, net.hidden_widths.clone(), out)
                    .with_activation(net.activation)
                    .with_seed(net.init_seed.unwrap_or(seed)),
            )
        };
        let seed = self.train.seed;
        Ok(Networks {
            u_net: build(&self.model.u, 1, seed)?,
            v_net: match self.train.mode {
                Mode::Vs => Some(build(&self.model.v, dim, seed.wrapping_add(1))?),
                Mode::Pinn => None,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_valid() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.train_config(), TrainConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("[train]\nmax_iter = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config { .. }), "{e}");
        assert!(e.to_string().contains("max_iter"), "{e}");
        assert!(RunConfig::from_toml("[trian]\n").is_err());
    }

    #[test]
    fn relu_in_pinn_mode_names_the_field() {
        let c = RunConfig::from_toml("[train]\nmode = \"pinn\"\n[model.u]\nactivation = \"relu\"\n").unwrap();
        match c.validate().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "model.u.activation"),
            other => panic!("{other}"),
        }
        let c = RunConfig::from_toml("[model.u]\nactivation = \"relu\"\n").unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn field_errors() {
        let field = |text: &str| match RunConfig::from_toml(text).unwrap().validate().unwrap_err() {
            Error::Config { field, .. } => field,
            other => panic!("{other}"),
        };
        assert_eq!(field("[train]\np = 0.5\n"), "train.p");
        assert_eq!(field("[quad]\nn_interior = 0\n"), "quad.n_interior");
        assert_eq!(field("[problem]\nname = \"heat\"\n"), "problem");
        assert_eq!(field("[model.v]\nhidden_widths = []\n"), "model.v.hidden_widths");
    }

    #[test]
    fn seeds_and_networks() {
        let c = RunConfig::from_toml("[train]\nseed = 7\np = \"inf\"\n[model.u]\nhidden_widths = [4]\n").unwrap();
        let nets = c.networks(2).unwrap();
        assert_eq!(nets.u_net.spec().init_seed, 7);
        assert_eq!(nets.v_net.unwrap().spec().init_seed, 8);
        assert!(c.train_config().p.is_infinite());
    }

    #[test]
    fn out_dir_precedence() {
        let flag = Path::new("a");
        let cfg = Path::new("b");
        assert_eq!(resolve_out_dir(Some(flag), Some(cfg)), PathBuf::from("a"));
        assert_eq!(resolve_out_dir(None, Some(cfg)), PathBuf::from("b"));
    }
}
