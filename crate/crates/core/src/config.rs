// Run configuration (TOML), with "auto" hyperparameters resolved from data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::likelihoods::LikelihoodModel;
use crate::quadrature::QuadratureConfig;
use crate::sampler::{NewClusterWeight, SamplerConfig, SigmaPrior};
use crate::slice::SliceConfig;
use crate::stable::StableIndex;
use crate::tilting::TiltingFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoMarker {
    Auto,
}

/// A hyperparameter given explicitly or left to the data-driven default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum Hyper {
    Value(f64),
    #[default]
    #[serde(with = "auto_marker")]
    Auto,
}

mod auto_marker {
    use super::AutoMarker;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        AutoMarker::Auto.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        AutoMarker::deserialize(d).map(|_| ())
    }
}

impl Hyper {
    fn or(self, default: f64) -> f64 {
        match self {
            Hyper::Value(v) => v,
            Hyper::Auto => default,
        }
    }
}

/// Vector or matrix hyperparameters that may be "auto".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum HyperVec<T> {
    Value(T),
    #[default]
    #[serde(with = "auto_marker")]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    UnivConjI {
        #[serde(default)]
        mu0: Hyper,
        #[serde(default)]
        tau0: Hyper,
        #[serde(default)]
        tau_common: Hyper,
    },
    UnivConjII {
        #[serde(default)]
        mu0: Hyper,
        #[serde(default)]
        tau0: Hyper,
        #[serde(default)]
        alpha0: Hyper,
        #[serde(default)]
        beta0: Hyper,
    },
    UnivNonConj {
        #[serde(default)]
        a0: Hyper,
        #[serde(default)]
        b0: Hyper,
        #[serde(default)]
        alpha0: Hyper,
        #[serde(default)]
        beta0: Hyper,
    },
    MvNiw {
        #[serde(default)]
        mu0: HyperVec<Vec<f64>>,
        #[serde(default)]
        r0: Hyper,
        #[serde(default)]
        nu0: Hyper,
        #[serde(default)]
        s0: HyperVec<Vec<Vec<f64>>>,
    },
}

impl ModelSpec {
    /// Replaces every "auto" hyperparameter by its data-driven default:
    /// mu0 = data mean, tau0 = 1/range^2, common standard deviation
    /// range/4, Gamma shapes and rates 1; for the Normal-Inverse-Wishart
    /// S0 = (largest column range) I, nu0 = d + 3, r0 = 1.
    pub fn resolve(&self, data: &Dataset) -> Result<LikelihoodModel> {
        let mean = data.mean();
        let ranges = data.ranges();
        let range = ranges.iter().copied().fold(0.0, f64::max);
        let univariate = || -> Result<()> {
            if data.d() != 1 {
                return Err(Error::Config(format!("a univariate model needs one column, the data has {}", data.d())));
            }
            Ok(())
        };
        let positive_range = || -> Result<f64> {
            if range > 0.0 {
                Ok(range)
            } else {
                Err(Error::Config("auto hyperparameters need data with a positive range".into()))
            }
        };
        let model = match self {
            ModelSpec::UnivConjI { mu0, tau0, tau_common } => {
                univariate()?;
                let need = matches!(tau0, Hyper::Auto) || matches!(tau_common, Hyper::Auto);
                let r = if need { positive_range()? } else { 1.0 };
                LikelihoodModel::UnivConjI {
                    mu0: mu0.or(mean[0]),
                    tau0: tau0.or(r.powi(-2)),
                    tau_common: tau_common.or((r / 4.0).powi(-2)),
                }
            }
            ModelSpec::UnivConjII { mu0, tau0, alpha0, beta0 } => {
                univariate()?;
                let r = if matches!(tau0, Hyper::Auto) { positive_range()? } else { 1.0 };
                LikelihoodModel::UnivConjII {
                    mu0: mu0.or(mean[0]),
                    tau0: tau0.or(r.powi(-2)),
                    alpha0: alpha0.or(1.0),
                    beta0: beta0.or(1.0),
                }
            }
            ModelSpec::UnivNonConj { a0, b0, alpha0, beta0 } => {
                univariate()?;
                LikelihoodModel::UnivNonConj {
                    a0: a0.or(1.0),
                    b0: b0.or(1.0),
                    alpha0: alpha0.or(1.0),
                    beta0: beta0.or(1.0),
                }
            }
            ModelSpec::MvNiw { mu0, r0, nu0, s0 } => {
                let d = data.d();
                let s0 = match s0 {
                    HyperVec::Value(v) => v.clone(),
                    HyperVec::Auto => {
                        let r = positive_range()?;
                        (0..d).map(|i| (0..d).map(|j| if i == j { r } else { 0.0 }).collect()).collect()
                    }
                };
                LikelihoodModel::MvNiw {
                    mu0: match mu0 {
                        HyperVec::Value(v) => v.clone(),
                        HyperVec::Auto => mean,
                    },
                    r0: r0.or(1.0),
                    nu0: nu0.or(d as f64 + 3.0),
                    s0,
                }
            }
        };
        model.validate().map_err(|e| Error::Config(e.to_string()))?;
        if model.dim() != data.d() {
            return Err(Error::Config(format!(
                "model dimension {} does not match data dimension {}",
                model.dim(),
                data.d()
            )));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferMarker {
    Infer,
}

/// Fixed stable index or "infer".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSetting {
    Fixed(f64),
    Infer(InferMarker),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub tilt: TiltingFunction,
    pub sigma: SigmaSetting,
    /// Starting value when sigma is inferred.
    #[serde(default = "default_sigma_init")]
    pub sigma_init: f64,
    #[serde(default)]
    pub sigma_prior: SigmaPrior,
    pub iterations: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default)]
    pub marginalized: bool,
    #[serde(default)]
    pub slice: SliceConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    pub pca_components: Option<usize>,
}

fn default_sigma_init() -> f64 {
    0.5
}

fn one() -> usize {
    1
}

fn default_m() -> usize {
    4
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 || self.m == 0 || self.chains == 0 {
            return Err(Error::Config("thin, m and chains must be at least 1".into()));
        }
        let s = self.initial_sigma()?;
        self.tilt.validate(s).map_err(|e| Error::Config(e.to_string()))?;
        if self.pca_components == Some(0) {
            return Err(Error::Config("pca_components must be at least 1".into()));
        }
        self.sampler_config(0)?.validate()
    }

    pub fn initial_sigma(&self) -> Result<StableIndex> {
        let s = match self.sigma {
            SigmaSetting::Fixed(s) => s,
            SigmaSetting::Infer(_) => self.sigma_init,
        };
        StableIndex::new(s).map_err(|_| Error::Config(format!("sigma must lie in (0, 1), got {s}")))
    }

    pub fn sampler_config(&self, seed: u64) -> Result<SamplerConfig> {
        Ok(SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            m: self.m,
            seed,
            sigma_update: matches!(self.sigma, SigmaSetting::Infer(_)).then_some(self.sigma_prior),
            marginalized: self.marginalized,
            slice: self.slice,
            quadrature: self.quadrature,
            new_cluster_weight: NewClusterWeight::MainText,
        })
    }
}
