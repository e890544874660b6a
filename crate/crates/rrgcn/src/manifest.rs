//! Experiment manifests: a versioned TOML file describing one pipeline run.
//!
//! ```toml
//! version = 1
//! task = "classify"            # "embed", "classify" or "linkpred"
//! output_dir = "out/aifb"
//! seeds = [0, 1, 2]
//!
//! [dataset]
//! graph = ["aifb.nt.gz"]        # N-Triples files, or one RRGX cache
//! labels = "aifb_labels.tsv"    # classify
//! # train = "train.tsv"; valid = "valid.tsv"; test = "test.tsv"   (linkpred)
//!
//! [preprocess]                  # all optional; applied in this order
//! relation_filter = "importance.tsv"
//! relation_filter_fraction = 0.6
//! khop = 2
//! degree_cut = 5
//!
//! [embed]
//! dim = 512
//! layers = 2
//! ppv = true
//! residual = false
//! memory_budget_gb = 16.0
//!
//! [classify]
//! layer_grid = [1, 2, 3, 4, 5]   # grid search when non-empty
//! dim_grid = [256, 512]
//!
//! [linkpred]
//! pca_dim = 512
//! width = 256
//! ```
//!
//! Relative paths are resolved against the manifest's directory. The
//! resolved manifest (defaults filled in, paths as written) is what gets
//! hashed, so the hash does not depend on where the run happens.

use std::fs;
use std::path::{Path, PathBuf};

use rrgcn_core::classify::TrainParams;
use rrgcn_core::linkpred::{Optimizer, TrainConfig};
use rrgcn_core::EmbedConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{sha256, Hash};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Embed,
    Classify,
    Linkpred,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub task: Task,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub preprocess: PreprocessSection,
    pub embed: EmbedSection,
    #[serde(default)]
    pub classify: ClassifySection,
    #[serde(default)]
    pub linkpred: LinkPredSection,
    /// Directory relative paths are resolved against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default)]
    pub graph: Vec<PathBuf>,
    pub labels: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessSection {
    pub relation_filter: Option<PathBuf>,
    pub relation_filter_fraction: f64,
    pub khop: Option<usize>,
    pub degree_cut: Option<u32>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self { relation_filter: None, relation_filter_fraction: 0.6, khop: None, degree_cut: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedSection {
    pub dim: usize,
    pub layers: usize,
    #[serde(default = "yes")]
    pub ppv: bool,
    #[serde(default)]
    pub residual: bool,
    pub memory_budget_gb: Option<f64>,
    /// Also write embeddings as TSV.
    #[serde(default)]
    pub export_tsv: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub layer_grid: Vec<usize>,
    pub dim_grid: Vec<usize>,
    pub folds: usize,
    pub l2: f64,
    pub max_iterations: usize,
    pub eval_every: usize,
    pub patience: usize,
}

impl Default for ClassifySection {
    fn default() -> Self {
        let t = TrainParams::default();
        Self {
            layer_grid: Vec::new(),
            dim_grid: Vec::new(),
            folds: 5,
            l2: t.l2,
            max_iterations: t.max_iterations,
            eval_every: t.eval_every,
            patience: t.patience,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerName {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkPredSection {
    /// PCA components; omit to feed embeddings to the decoder directly.
    pub pca_dim: Option<usize>,
    pub width: usize,
    pub depth: usize,
    pub optimizer: OptimizerName,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub negatives: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f32,
    pub validation_subsample: usize,
    pub strict_negatives: bool,
}

impl Default for LinkPredSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            pca_dim: None,
            width: 256,
            depth: 3,
            optimizer: OptimizerName::Adam,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            negatives: t.negatives_per_positive,
            max_epochs: t.max_epochs,
            patience: t.patience,
            clip_norm: t.clip_norm.unwrap_or(0.0),
            validation_subsample: t.validation_subsample,
            strict_negatives: t.strict_negatives,
        }
    }
}

/// Command-line values that take precedence over the manifest.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dim: Option<usize>,
    pub layers: Option<usize>,
    pub ppv: Option<bool>,
    pub residual: Option<bool>,
    pub memory_budget_gb: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

impl Manifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| invalid(format!("manifest: {e}")))?;
        m.base_dir = base_dir.to_path_buf();
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seeds = vec![s];
        }
        if let Some(d) = o.dim {
            self.embed.dim = d;
        }
        if let Some(n) = o.layers {
            self.embed.layers = n;
        }
        if let Some(p) = o.ppv {
            self.embed.ppv = p;
        }
        if let Some(r) = o.residual {
            self.embed.residual = r;
        }
        if let Some(b) = o.memory_budget_gb {
            self.embed.memory_budget_gb = Some(b);
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
    }

    /// Checks the whole manifest before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(invalid(format!("manifest version {} unsupported (expected {MANIFEST_VERSION})", self.version)));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds must not be empty"));
        }
        let e = &self.embed;
        if e.dim == 0 || e.layers == 0 {
            return Err(invalid("embed.dim and embed.layers must be positive"));
        }
        if let Some(b) = e.memory_budget_gb {
            if !(b.is_finite() && b > 0.0) {
                return Err(invalid("embed.memory_budget_gb must be positive"));
            }
        }
        let p = &self.preprocess;
        if !(p.relation_filter_fraction > 0.0 && p.relation_filter_fraction <= 1.0) {
            return Err(invalid("preprocess.relation_filter_fraction must be in (0, 1]"));
        }
        if p.khop == Some(0) {
            return Err(invalid("preprocess.khop must be at least 1"));
        }
        let d = &self.dataset;
        match self.task {
            Task::Embed | Task::Classify => {
                if d.graph.is_empty() {
                    return Err(invalid("dataset.graph must list at least one file"));
                }
                if d.train.is_some() || d.valid.is_some() || d.test.is_some() {
                    return Err(invalid("dataset.train/valid/test are only used by the linkpred task"));
                }
            }
            Task::Linkpred => {
                if d.train.is_none() || d.valid.is_none() || d.test.is_none() {
                    return Err(invalid("linkpred needs dataset.train, dataset.valid and dataset.test"));
                }
                if !d.graph.is_empty() || d.labels.is_some() {
                    return Err(invalid("linkpred builds its graph from dataset.train; remove dataset.graph/labels"));
                }
                if p.khop.is_some() || p.degree_cut.is_some() || p.relation_filter.is_some() {
                    return Err(invalid("preprocessing is not supported for linkpred"));
                }
            }
        }
        if self.task == Task::Classify {
            if d.labels.is_none() {
                return Err(invalid("classify needs dataset.labels"));
            }
            let c = &self.classify;
            if c.layer_grid.is_empty() != c.dim_grid.is_empty() {
                return Err(invalid("classify.layer_grid and classify.dim_grid must both be set or both empty"));
            }
            if c.layer_grid.contains(&0) || c.dim_grid.contains(&0) {
                return Err(invalid("grid values must be positive"));
            }
            if c.folds < 2 || c.max_iterations == 0 || c.eval_every == 0 || !(c.l2 >= 0.0) {
                return Err(invalid("classify: folds >= 2, max_iterations > 0, eval_every > 0, l2 >= 0 required"));
            }
        }
        if p.khop.is_some() && d.labels.is_none() {
            return Err(invalid("preprocess.khop needs dataset.labels to pick the seed nodes"));
        }
        if self.task == Task::Linkpred {
            let l = &self.linkpred;
            let out = if e.ppv { 2 * e.dim } else { e.dim };
            if l.pca_dim.is_some_and(|k| k == 0 || k > out) {
                return Err(invalid(format!("linkpred.pca_dim must be in 1..={out}")));
            }
            if l.width == 0 || l.batch_size == 0 || l.max_epochs == 0 || !(l.learning_rate > 0.0) {
                return Err(invalid("linkpred: width, batch_size, max_epochs and learning_rate must be positive"));
            }
            if l.depth == 0 && l.width != l.pca_dim.unwrap_or(out) {
                return Err(invalid("linkpred.depth = 0 needs width equal to the decoder input size"));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Canonical text of the manifest with every default filled in.
    pub fn resolved_text(&self) -> String {
        toml::to_string(self).expect("manifest is always serialisable")
    }

    pub fn hash(&self) -> Hash {
        sha256(self.resolved_text().as_bytes())
    }

    pub fn memory_budget_bytes(&self) -> Option<u128> {
        self.embed.memory_budget_gb.map(gb_to_bytes)
    }

    pub fn embed_config(&self, seed: u64) -> EmbedConfig {
        EmbedConfig::new(self.embed.dim, self.embed.layers, seed)
            .with_ppv(self.embed.ppv)
            .with_residual(self.embed.residual)
            .with_memory_budget(self.memory_budget_bytes())
    }

    pub fn train_params(&self) -> TrainParams {
        let c = &self.classify;
        TrainParams { l2: c.l2, max_iterations: c.max_iterations, eval_every: c.eval_every, patience: c.patience, ..TrainParams::default() }
    }

    pub fn linkpred_config(&self, seed: u64) -> TrainConfig {
        let l = &self.linkpred;
        TrainConfig {
            optimizer: match l.optimizer {
                OptimizerName::Adam => Optimizer::ADAM,
                OptimizerName::Sgd => Optimizer::Sgd,
            },
            learning_rate: l.learning_rate,
            batch_size: l.batch_size,
            negatives_per_positive: l.negatives,
            max_epochs: l.max_epochs,
            patience: l.patience,
            clip_norm: (l.clip_norm > 0.0).then_some(l.clip_norm),
            validation_subsample: l.validation_subsample,
            strict_negatives: l.strict_negatives,
            seed,
        }
    }
}

/// Decimal gigabytes to bytes.
pub fn gb_to_bytes(gb: f64) -> u128 {
    (gb * 1e9).round() as u128
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
task = "classify"
output_dir = "out"
seeds = [1, 2]

[dataset]
graph = ["g.nt"]
labels = "labels.tsv"

[embed]
dim = 8
layers = 2
"#;

    #[test]
    fn defaults_are_filled_and_round_trip() {
        let m = Manifest::parse(MINIMAL, Path::new("/data")).unwrap();
        m.validate().unwrap();
        assert!(m.embed.ppv);
        assert_eq!(m.preprocess.relation_filter_fraction, 0.6);
        let again = Manifest::parse(&m.resolved_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again.resolved_text(), m.resolved_text());
        assert_eq!(again.hash(), m.hash());
        assert_eq!(m.resolve(Path::new("g.nt")), PathBuf::from("/data/g.nt"));
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(Manifest::parse(&MINIMAL.replace("layers = 2", "layers = 2\nlayer = 3"), Path::new(".")).is_err());
        let mut m = Manifest::parse(MINIMAL, Path::new(".")).unwrap();
        m.embed.dim = 0;
        assert!(matches!(m.validate(), Err(Error::Validation(_))));
        let mut m = Manifest::parse(MINIMAL, Path::new(".")).unwrap();
        m.classify.layer_grid = vec![1, 2];
        assert!(m.validate().is_err());
        let m = Manifest::parse(&MINIMAL.replace("version = 1", "version = 7"), Path::new(".")).unwrap();
        assert!(m.validate().is_err());
    }

    #[test]
    fn overrides_win_and_change_the_hash() {
        let mut m = Manifest::parse(MINIMAL, Path::new(".")).unwrap();
        let before = m.hash();
        m.apply(&Overrides { seed: Some(9), dim: Some(16), ppv: Some(false), ..Overrides::default() });
        assert_eq!(m.seeds, vec![9]);
        assert_eq!((m.embed.dim, m.embed.ppv), (16, false));
        assert_ne!(m.hash(), before);
    }
}
