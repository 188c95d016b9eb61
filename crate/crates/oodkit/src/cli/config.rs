//! Pipeline configuration: one TOML file drives every subcommand, with
//! command-line flags winning over file values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::autoencoder::{Activation, LayerSpec, Optimizer, TrainConfig};
use crate::data::{MixtureComponent, OutlierKind, OutlierSpec};
use crate::error::{Error, Result};
use crate::scorers::ScorerKind;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Global seed; flows into training, synthesis and subsampling.
    #[serde(default)]
    pub seed: u64,
    /// Output directory for every artifact.
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub ae: AeSection,
    #[serde(default)]
    pub scorer: ScorerSection,
    pub synth: Option<SynthSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Training features: CSV or IDX image file.
    pub train: Option<PathBuf>,
    /// Query features to score: CSV or IDX image file.
    pub queries: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeSection {
    /// Widths of the layers between input and reconstruction; must be
    /// symmetric around the bottleneck. Defaults to [256, 64, 256] for
    /// 784-dimensional input.
    pub hidden: Option<Vec<usize>>,
    #[serde(default = "default_hidden_activation")]
    pub hidden_activation: String,
    #[serde(default = "default_output_activation")]
    pub output_activation: String,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// "adam" or "sgd".
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    /// Optional count of most-active latent neurons to keep as the trace.
    pub trace_subset: Option<usize>,
}

fn default_hidden_activation() -> String {
    "relu".into()
}
fn default_output_activation() -> String {
    "sigmoid".into()
}
fn default_epochs() -> usize {
    20
}
fn default_batch_size() -> usize {
    32
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_optimizer() -> String {
    "adam".into()
}
fn default_true() -> bool {
    true
}

impl Default for AeSection {
    fn default() -> Self {
        Self {
            hidden: None,
            hidden_activation: default_hidden_activation(),
            output_activation: default_output_activation(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            optimizer: default_optimizer(),
            shuffle: true,
            trace_subset: None,
        }
    }
}

impl AeSection {
    /// Hidden-layer specs for the given input width.
    pub fn hidden_layers(&self, input_dim: usize) -> Result<Vec<LayerSpec>> {
        let activation: Activation = self.hidden_activation.parse()?;
        let widths = match &self.hidden {
            Some(w) => w.clone(),
            None if input_dim == 784 => vec![256, 64, 256],
            None => {
                return Err(Error::Config(format!(
                    "ae.hidden must be set for {input_dim}-dimensional input \
                     (the built-in default only covers 784)"
                )))
            }
        };
        Ok(widths
            .into_iter()
            .map(|w| LayerSpec::new(w, activation))
            .collect())
    }

    pub fn output_activation(&self) -> Result<Activation> {
        self.output_activation.parse()
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let optimizer = match self.optimizer.as_str() {
            "adam" => Optimizer::adam_default(),
            "sgd" => Optimizer::Sgd,
            other => {
                return Err(Error::Config(format!(
                    "unknown optimizer '{other}' (expected adam|sgd)"
                )))
            }
        };
        Ok(TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer,
            seed,
            shuffle: self.shuffle,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Kernel bandwidth for kd; median heuristic when absent.
    pub sigma: Option<f64>,
    /// Target perplexity for lcp; defaults to k/3.
    pub perplexity: Option<f64>,
    /// Ablation switch: use the raw-distance weight formula for lcp.
    #[serde(default)]
    pub lcp_literal_weights: bool,
}

fn default_kind() -> String {
    "lcp".into()
}
fn default_k() -> usize {
    20
}

impl Default for ScorerSection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            k: default_k(),
            sigma: None,
            perplexity: None,
            lcp_literal_weights: false,
        }
    }
}

impl ScorerSection {
    pub fn kind(&self) -> Result<ScorerKind> {
        self.kind.parse()
    }
}

/// Scalar-or-vector field: a scalar broadcasts across all axes.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NumOrVec {
    Num(f64),
    Vec(Vec<f64>),
}

impl NumOrVec {
    pub fn broadcast(&self, dim: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            NumOrVec::Num(v) => Ok(vec![*v; dim]),
            NumOrVec::Vec(v) => {
                if v.len() != dim {
                    return Err(Error::Config(format!(
                        "{what} has {} entries, expected {dim}",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    /// Feature dimensionality of the mixture.
    pub dim: usize,
    #[serde(default)]
    pub components: Vec<ComponentSection>,
    pub outliers: Option<OutlierSection>,
    /// When present, also emit queries.csv (fresh mixture draws + the
    /// outliers) and matching labels.csv (0 = normal, 1 = outlier).
    pub eval: Option<EvalSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSection {
    pub mean: NumOrVec,
    pub deviation: NumOrVec,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierSection {
    pub kind: String,
    pub count: usize,
    /// Defaults to the global seed + 2.
    pub seed: Option<u64>,
    pub source: Option<PathBuf>,
    /// Target image shape [channels, height, width] for external sources.
    pub image_shape: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Per-component row counts for the fresh test draw.
    pub test_counts: Vec<usize>,
}

impl SynthSection {
    pub fn mixture_components(&self, counts: Option<&[usize]>) -> Result<Vec<MixtureComponent>> {
        if self.components.is_empty() {
            return Err(Error::Config("synth.components is empty".into()));
        }
        if let Some(c) = counts {
            if c.len() != self.components.len() {
                return Err(Error::Config(format!(
                    "test_counts has {} entries for {} components",
                    c.len(),
                    self.components.len()
                )));
            }
        }
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(MixtureComponent::new(
                    c.mean.broadcast(self.dim, "synth component mean")?,
                    c.deviation.broadcast(self.dim, "synth component deviation")?,
                    counts.map(|v| v[i]).unwrap_or(c.count),
                ))
            })
            .collect()
    }

    pub fn outlier_spec(&self, global_seed: u64) -> Result<Option<OutlierSpec>> {
        let Some(o) = &self.outliers else {
            return Ok(None);
        };
        let kind: OutlierKind = o.kind.parse()?;
        Ok(Some(OutlierSpec {
            kind,
            count: o.count,
            seed: o.seed.unwrap_or(global_seed.wrapping_add(2)),
            source: o.source.clone(),
        }))
    }
}

impl PipelineConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{e}")))
    }

    /// Applies flag overrides (flags win over file values).
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out = Some(o);
        }
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: PipelineConfig = toml::from_str("").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.scorer.k, 20);
        assert_eq!(cfg.scorer.kind, "lcp");
        assert_eq!(cfg.ae.epochs, 20);
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
seed = 42
out = "runs/demo"

[data]
train = "train.csv"
queries = "queries.csv"

[ae]
hidden = [8, 4, 8]
epochs = 30
learning_rate = 0.01
optimizer = "sgd"
trace_subset = 3

[scorer]
kind = "knn"
k = 10
sigma = 1.5

[synth]
dim = 4

[[synth.components]]
mean = 0.3
deviation = 0.05
count = 100

[[synth.components]]
mean = [0.7, 0.7, 0.2, 0.2]
deviation = 0.04
count = 50

[synth.outliers]
kind = "uniform_noise"
count = 30

[synth.eval]
test_counts = [20, 10]
"#;
        let cfg: PipelineConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.seed, 42);
        let synth = cfg.synth.as_ref().unwrap();
        let comps = synth.mixture_components(None).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].mean, vec![0.3; 4]);
        assert_eq!(comps[1].mean, vec![0.7, 0.7, 0.2, 0.2]);
        let spec = synth.outlier_spec(42).unwrap().unwrap();
        assert_eq!(spec.seed, 44);
        let test = synth
            .mixture_components(Some(&synth.eval.as_ref().unwrap().test_counts))
            .unwrap();
        assert_eq!(test[0].count, 20);
        assert_eq!(test[1].count, 10);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(toml::from_str::<PipelineConfig>("quux = 1").is_err());
        assert!(toml::from_str::<PipelineConfig>("[scorer]\nbogus = 1").is_err());
    }

    #[test]
    fn overrides_win() {
        let cfg: PipelineConfig = toml::from_str("seed = 1\nout = \"a\"").unwrap();
        let cfg = cfg.with_overrides(Some(9), Some(PathBuf::from("b")));
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.out_dir(), PathBuf::from("b"));
    }

    #[test]
    fn ae_defaults_only_cover_mnist_width() {
        let ae = AeSection::default();
        assert!(ae.hidden_layers(784).is_ok());
        assert!(ae.hidden_layers(16).is_err());
    }
}
