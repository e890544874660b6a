//! Link prediction on frozen embeddings: normalisation and PCA, a three-layer
//! network feeding a DistMult decoder, negative-sampling training and filtered
//! ranking.

pub mod decoder;
pub mod pca;
pub mod ranking;
pub mod train;

pub use decoder::{Decoder, DecoderShape, Gradients};
pub use pca::{fit_pca, PcaModel};
pub use ranking::{rank_filtered, ConstantScorer, DecoderScorer, KnownTriples, RankingReport, TripleScorer};
pub use train::{train_decoder, NegativeSampler, Optimizer, TrainConfig, TrainOutcome};

use crate::error::Result;
use crate::graph::TripleSplit;
use crate::matrix::Matrix;

/// Sizes of the link prediction head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkPredPreset {
    pub embedding_dim: usize,
    /// Components kept by PCA; `None` feeds embeddings to the decoder directly.
    pub pca_dim: Option<usize>,
    pub width: usize,
    pub depth: usize,
}

impl LinkPredPreset {
    /// Embedding 32,000 (with PPV), PCA to 8,192, decoder width 2,048.
    pub const FULL: Self = Self { embedding_dim: 32_000, pca_dim: Some(8_192), width: 2_048, depth: 3 };
    /// Embedding 2,048, PCA to 512, decoder width 256.
    pub const DESK: Self = Self { embedding_dim: 2_048, pca_dim: Some(512), width: 256, depth: 3 };
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkPredResult {
    pub pca: Option<PcaModel>,
    pub training: TrainOutcome,
    pub report: RankingReport,
}

/// PCA (fit on every entity) -> decoder training -> filtered ranking of `split.test`.
pub fn run(embeddings: &Matrix, split: &TripleSplit, relations: usize, preset: &LinkPredPreset, cfg: &TrainConfig) -> Result<LinkPredResult> {
    split.validate(embeddings.rows(), relations)?;
    let (pca, inputs) = match preset.pca_dim {
        Some(k) => {
            let model = fit_pca(embeddings, k)?;
            let z = model.transform(embeddings)?;
            (Some(model), z)
        }
        None => (None, embeddings.clone()),
    };
    let shape = DecoderShape { input_dim: inputs.cols(), width: preset.width, depth: preset.depth, relations };
    let decoder = Decoder::new(shape, cfg.seed ^ 0xDEC0_DE)?;
    let training = train_decoder(decoder, split, &inputs, cfg)?;
    let known = KnownTriples::new(split.all_known());
    let scorer = DecoderScorer::new(&training.decoder, &inputs)?;
    let report = rank_filtered(&scorer, &split.test, &known);
    Ok(LinkPredResult { pca, training, report })
}
