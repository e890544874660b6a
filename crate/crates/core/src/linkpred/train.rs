//! Negative-sampling training of the decoder with epoch selection on validation FMRR.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::graph::{Triple, TripleSplit};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

use super::decoder::{clip_scale, Decoder, Gradients};
use super::ranking::{rank_filtered, DecoderScorer, KnownTriples};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f32, beta2: f32, eps: f32 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 };
}

/// Per-parameter optimiser state.
struct OptimizerState {
    kind: Optimizer,
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
}

impl OptimizerState {
    fn new(kind: Optimizer, params: usize) -> Self {
        let n = if matches!(kind, Optimizer::Adam { .. }) { params } else { 0 };
        Self { kind, m: alloc::vec![0.0; n], v: alloc::vec![0.0; n], t: 0 }
    }

    fn step(&mut self, decoder: &mut Decoder, grads: &Gradients, lr: f32, clip_norm: Option<f32>) {
        match self.kind {
            Optimizer::Sgd => decoder.sgd_step(grads, lr, clip_norm),
            Optimizer::Adam { beta1, beta2, eps } => {
                let scale = clip_scale(grads, clip_norm);
                self.t += 1;
                let c1 = 1.0 - libm::powf(beta1, self.t as f32);
                let c2 = 1.0 - libm::powf(beta2, self.t as f32);
                let (m, v) = (&mut self.m, &mut self.v);
                decoder.update(grads, |i, p, g| {
                    let g = g * scale;
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    *p -= lr * (m[i] / c1) / (libm::sqrtf(v[i] / c2) + eps);
                });
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f32,
    pub batch_size: usize,
    /// Negatives sampled per positive triple.
    pub negatives_per_positive: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm clip.
    pub clip_norm: Option<f32>,
    /// Validation triples ranked after each epoch (deterministic subsample).
    pub validation_subsample: usize,
    /// Resample negatives that happen to be training triples.
    pub strict_negatives: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::ADAM,
            learning_rate: 1e-3,
            batch_size: 1024,
            negatives_per_positive: 1,
            max_epochs: 100,
            patience: 10,
            clip_norm: Some(5.0),
            validation_subsample: 1000,
            strict_negatives: false,
            seed: 0,
        }
    }
}

/// Corrupts the head or the tail (probability 1/2 each) with a uniformly drawn entity.
pub struct NegativeSampler<'a> {
    entities: usize,
    strict: Option<&'a KnownTriples>,
}

impl<'a> NegativeSampler<'a> {
    pub fn new(entities: usize) -> Self {
        Self { entities, strict: None }
    }

    /// Never emits a triple contained in `train`.
    pub fn strict(entities: usize, train: &'a KnownTriples) -> Self {
        Self { entities, strict: Some(train) }
    }

    pub fn sample(&self, (h, r, t): Triple, rng: &mut SplitMix64) -> Triple {
        loop {
            let e = rng.below(self.entities) as u32;
            let cand = if rng.next_u64() >> 63 == 0 { (e, r, t) } else { (h, r, e) };
            match self.strict {
                Some(known) if known.contains(cand) => continue,
                _ => return cand,
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    /// Snapshot with the best validation FMRR (the last epoch when there is no validation data).
    pub decoder: Decoder,
    pub best_epoch: usize,
    pub best_validation_mrr: f64,
    /// `(epoch, mean training loss, validation FMRR)`; epoch 0 is the untrained decoder.
    pub history: Vec<(usize, f64, f64)>,
    /// Epoch at which the loss became non-finite, if it did.
    pub diverged_at: Option<usize>,
}

/// Trains `decoder` on `split.train` with sampled negatives; `embeddings` are the decoder inputs.
pub fn train_decoder(mut decoder: Decoder, split: &TripleSplit, embeddings: &Matrix, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let entities = embeddings.rows();
    if split.train.is_empty() {
        return Err(invalid("no training triples"));
    }
    if let Some(&(h, r, t)) = split.train.iter().chain(&split.valid).find(|&&(h, r, t)| {
        h as usize >= entities || t as usize >= entities || r as usize >= decoder.relation_count()
    }) {
        return Err(invalid(alloc::format!("triple ({h}, {r}, {t}) not covered by embeddings or decoder")));
    }
    if cfg.batch_size == 0 {
        return Err(invalid("batch size must be positive"));
    }

    let train_known = KnownTriples::new(split.train.iter().copied());
    let all_known = KnownTriples::new(split.all_known());
    let sampler = if cfg.strict_negatives {
        NegativeSampler::strict(entities, &train_known)
    } else {
        NegativeSampler::new(entities)
    };
    let mut rng = SplitMix64::new(cfg.seed);
    let mut valid = split.valid.clone();
    rng.shuffle(&mut valid);
    valid.truncate(cfg.validation_subsample);

    let validate = |dec: &Decoder| -> Result<f64> {
        if valid.is_empty() {
            return Ok(f64::NAN);
        }
        let scorer = DecoderScorer::new(dec, embeddings)?;
        Ok(rank_filtered(&scorer, &valid, &all_known).filtered.mrr)
    };

    let initial = validate(&decoder)?;
    let mut history = Vec::from([(0, f64::NAN, initial)]);
    let mut best = (decoder.clone(), 0usize, initial);
    let mut stale = 0;
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut batch: Vec<(Triple, f32)> = Vec::new();
    let mut diverged_at = None;
    let mut optimizer = OptimizerState::new(cfg.optimizer, decoder.param_count());

    'epochs: for epoch in 1..=cfg.max_epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            for &i in chunk {
                let pos = split.train[i];
                batch.push((pos, 1.0));
                for _ in 0..cfg.negatives_per_positive {
                    batch.push((sampler.sample(pos, &mut rng), 0.0));
                }
            }
            let (loss, grads) = decoder.loss_and_grad(embeddings, &batch)?;
            if !loss.is_finite() {
                diverged_at = Some(epoch);
                break 'epochs;
            }
            optimizer.step(&mut decoder, &grads, cfg.learning_rate, cfg.clip_norm);
            if !decoder.is_finite() {
                diverged_at = Some(epoch);
                break 'epochs;
            }
            total += loss;
            batches += 1;
        }
        let mrr = validate(&decoder)?;
        history.push((epoch, total / batches.max(1) as f64, mrr));
        if valid.is_empty() || mrr > best.2 {
            best = (decoder.clone(), epoch, mrr);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (decoder, best_epoch, best_validation_mrr) = best;
    Ok(TrainOutcome { decoder, best_epoch, best_validation_mrr, history, diverged_at })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_sampler_avoids_training_triples() {
        let train = KnownTriples::new((0..4u32).flat_map(|h| (0..4u32).filter(move |&t| t != 2).map(move |t| (h, 0, t))));
        let s = NegativeSampler::strict(4, &train);
        let mut rng = SplitMix64::new(1);
        for _ in 0..200 {
            let c = s.sample((0, 0, 1), &mut rng);
            assert!(!train.contains(c));
        }
    }

    #[test]
    fn sampler_corrupts_exactly_one_side() {
        let s = NegativeSampler::new(50);
        let mut rng = SplitMix64::new(2);
        let (mut heads, mut tails) = (0, 0);
        for _ in 0..1000 {
            let (h, r, t) = s.sample((3, 1, 7), &mut rng);
            assert_eq!(r, 1);
            assert!(h == 3 || t == 7);
            if h != 3 {
                heads += 1;
            }
            if t != 7 {
                tails += 1;
            }
        }
        assert!(heads > 400 && tails > 400);
    }
}
