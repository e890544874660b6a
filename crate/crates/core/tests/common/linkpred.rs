//! Link-prediction fixtures: finite-difference gradient check and the planted toy KG.
#![allow(dead_code)]

use rrgcn_core::graph::{Triple, TripleSplit};
use rrgcn_core::linkpred::{rank_filtered, train_decoder, Decoder, DecoderScorer, DecoderShape, KnownTriples, Optimizer, TrainConfig};
use rrgcn_core::rng::SplitMix64;
use rrgcn_core::Matrix;

pub fn normals(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = SplitMix64::new(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.next_normal_pair().0 as f32)
}

/// Central differences (h = 1e-2) on 10 random parameters with a
/// non-negligible gradient; returns the worst relative error.
pub fn gradient_check(depth: usize, seed: u64) -> f64 {
    let shape = DecoderShape { input_dim: 5, width: if depth == 0 { 5 } else { 7 }, depth, relations: 3 };
    let mut dec = Decoder::new(shape, seed).unwrap();
    let mut rng = SplitMix64::new(seed);
    // Move every parameter off its initial value.
    for i in 0..dec.param_count() {
        let v = dec.param(i) + 0.3 * rng.next_normal_pair().0 as f32;
        dec.set_param(i, v);
    }
    let emb = normals(9, 5, seed + 1);
    let batch: Vec<(Triple, f32)> = (0..12)
        .map(|k| ((rng.below(9) as u32, rng.below(3) as u32, rng.below(9) as u32), (k % 2) as f32))
        .collect();
    let (_, grads) = dec.loss_and_grad(&emb, &batch).unwrap();
    let (mut checked, mut attempts, mut worst) = (0, 0, 0.0f64);
    while checked < 10 && attempts < 1000 {
        attempts += 1;
        let idx = rng.below(dec.param_count());
        let analytic = grads.get(idx) as f64;
        if analytic.abs() < 1e-3 {
            continue;
        }
        let h = 1e-2f32;
        let orig = dec.param(idx);
        dec.set_param(idx, orig + h);
        let fp = dec.loss_and_grad(&emb, &batch).unwrap().0;
        dec.set_param(idx, orig - h);
        let fm = dec.loss_and_grad(&emb, &batch).unwrap().0;
        dec.set_param(idx, orig);
        let fd = (fp - fm) / (2.0 * h as f64);
        worst = worst.max((analytic - fd).abs() / analytic.abs().max(fd.abs()));
        checked += 1;
    }
    assert_eq!(checked, 10, "too few parameters with a usable gradient");
    worst
}

/// `m` entities on a cycle; relation 0 links neighbours. Both directions are
/// facts, since a DistMult score cannot tell them apart. Embeddings are
/// near-one-hot. Every forward edge and a third of the reverse edges train;
/// the other reverse edges are split between validation and test.
pub fn planted_cycle(m: usize) -> (Matrix, TripleSplit) {
    let mut split = TripleSplit::default();
    for i in 0..m as u32 {
        let next = (i + 1) % m as u32;
        split.train.push((i, 0, next));
        match i % 3 {
            0 => split.train.push((next, 0, i)),
            1 => split.valid.push((next, 0, i)),
            _ => split.test.push((next, 0, i)),
        }
    }
    let mut rng = SplitMix64::new(3);
    let emb = Matrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.05 * rng.next_normal_pair().0 as f32 });
    (emb, split)
}

pub fn toy_config() -> TrainConfig {
    TrainConfig {
        optimizer: Optimizer::ADAM,
        learning_rate: 0.01,
        batch_size: 16,
        negatives_per_positive: 4,
        max_epochs: 400,
        patience: 60,
        clip_norm: Some(5.0),
        validation_subsample: 1000,
        strict_negatives: false,
        seed: 1,
    }
}

pub struct PlantedOutcome {
    pub untrained_fmrr: f64,
    pub valid_fmrr: f64,
    pub diverged: bool,
}

/// Trains a width-32, depth-3 decoder on the 30-entity planted cycle.
pub fn planted_run(seed: u64) -> PlantedOutcome {
    let m = 30;
    let (emb, split) = planted_cycle(m);
    split.validate(m, 1).unwrap();
    let dec = Decoder::new(DecoderShape { input_dim: m, width: 32, depth: 3, relations: 1 }, seed).unwrap();
    let known = KnownTriples::new(split.all_known());
    let untrained_fmrr = rank_filtered(&DecoderScorer::new(&dec, &emb).unwrap(), &split.valid, &known).filtered.mrr;
    let out = train_decoder(dec, &split, &emb, &TrainConfig { seed, ..toy_config() }).unwrap();
    let scorer = DecoderScorer::new(&out.decoder, &emb).unwrap();
    let valid_fmrr = rank_filtered(&scorer, &split.valid, &known).filtered.mrr;
    PlantedOutcome { untrained_fmrr, valid_fmrr, diverged: out.diverged_at.is_some() }
}
