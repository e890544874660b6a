//! DistMult scorer preceded by a small feed-forward network shared by heads and tails.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::Triple;
use crate::matrix::{dot, Matrix};
use crate::rng::{self, SplitMix64, WeightSpec};

/// Affine layer `y = W x + b` with `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f32>,
}

impl Dense {
    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul_t(&self.weight)?;
        for i in 0..y.rows() {
            for (v, b) in y.row_mut(i).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }
}

/// `score(h, r, t) = < f(z_h) * w_r, f(z_t) >` where `f` applies the dense
/// layers with ReLU between them (none after the last). With no layers `f` is
/// the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub layers: Vec<Dense>,
    /// `relations x width` DistMult diagonals.
    pub relations: Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderShape {
    pub input_dim: usize,
    pub width: usize,
    /// Dense layers before DistMult; 3 in the standard setup, 0 for the identity debug mode.
    pub depth: usize,
    pub relations: usize,
}

impl Decoder {
    /// Glorot-uniform dense layers, zero biases and relation diagonals uniform in [-1, 1).
    pub fn new(shape: DecoderShape, seed: u64) -> Result<Self> {
        if shape.depth == 0 && shape.width != shape.input_dim {
            return Err(Error::DimensionMismatch { what: "identity decoder width", expected: shape.input_dim, found: shape.width });
        }
        let mut seeds = SplitMix64::new(seed);
        let mut layers = Vec::with_capacity(shape.depth);
        let mut fan_in = shape.input_dim;
        for _ in 0..shape.depth {
            let weight = rng::materialize(&WeightSpec::glorot(shape.width, fan_in, seeds.next_u64()))?;
            layers.push(Dense { weight, bias: vec![0.0; shape.width] });
            fan_in = shape.width;
        }
        let mut rel_rng = SplitMix64::new(seeds.next_u64());
        let relations = Matrix::from_fn(shape.relations, shape.width, |_, _| 2.0 * rel_rng.next_f32() - 1.0);
        Ok(Self { layers, relations })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(self.relations.cols(), |l| l.weight.cols())
    }

    pub fn width(&self) -> usize {
        self.relations.cols()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.rows()
    }

    /// `f(z)` for every row of `z`.
    pub fn represent(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch { what: "decoder input width", expected: self.input_dim(), found: z.cols() });
        }
        let mut a = z.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.forward(&a)?;
            if l + 1 < self.layers.len() {
                a.relu_in_place();
            }
        }
        Ok(a)
    }

    pub fn score(&self, z_head: &[f32], z_tail: &[f32], relation: usize) -> Result<f32> {
        if relation >= self.relation_count() {
            return Err(crate::error::invalid(alloc::format!("unknown relation id {relation}")));
        }
        let d = self.input_dim();
        let z = Matrix::from_vec(2, d, [z_head, z_tail].concat())?;
        let f = self.represent(&z)?;
        Ok(distmult(f.row(0), self.relations.row(relation), f.row(1)))
    }

    /// Mean binary cross-entropy over labelled triples and its gradient.
    /// `embeddings` holds the decoder input of every entity.
    pub fn loss_and_grad(&self, embeddings: &Matrix, batch: &[(Triple, f32)]) -> Result<(f64, Gradients)> {
        let m = batch.len();
        let d = self.input_dim();
        let mut z = Matrix::try_zeros(2 * m, d)?;
        for (k, &((h, _, t), _)) in batch.iter().enumerate() {
            z.row_mut(2 * k).copy_from_slice(embeddings.row(h as usize));
            z.row_mut(2 * k + 1).copy_from_slice(embeddings.row(t as usize));
        }
        // Forward, keeping every layer's output.
        let mut acts = vec![z];
        for (l, layer) in self.layers.iter().enumerate() {
            let mut a = layer.forward(acts.last().expect("input"))?;
            if l + 1 < self.layers.len() {
                a.relu_in_place();
            }
            acts.push(a);
        }
        let f = acts.last().expect("output");
        let w = self.width();

        let mut grads = Gradients::zeros_like(self);
        let mut df = Matrix::try_zeros(2 * m, w)?;
        let mut loss = 0.0f64;
        for (k, &((_, r, _), label)) in batch.iter().enumerate() {
            let r = r as usize;
            if r >= self.relation_count() {
                return Err(crate::error::invalid(alloc::format!("unknown relation id {r}")));
            }
            let (fh, ft, wr) = (f.row(2 * k), f.row(2 * k + 1), self.relations.row(r));
            let s = distmult(fh, wr, ft);
            loss += bce_with_logits(s, label) as f64;
            let g = (sigmoid(s) - label) / m as f32;
            let gr = grads.relations.row_mut(r);
            for c in 0..w {
                gr[c] += g * fh[c] * ft[c];
            }
            let (dh, dt) = {
                let mut dh = vec![0.0f32; w];
                let mut dt = vec![0.0f32; w];
                for c in 0..w {
                    dh[c] = g * wr[c] * ft[c];
                    dt[c] = g * wr[c] * fh[c];
                }
                (dh, dt)
            };
            df.row_mut(2 * k).copy_from_slice(&dh);
            df.row_mut(2 * k + 1).copy_from_slice(&dt);
        }

        // Backward through the dense stack.
        let mut delta = df;
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            grads.layers[l].0 = delta.t_matmul(input)?;
            let gb = &mut grads.layers[l].1;
            for i in 0..delta.rows() {
                for (b, &v) in gb.iter_mut().zip(delta.row(i)) {
                    *b += v;
                }
            }
            if l > 0 {
                let mut prev = delta.matmul(&self.layers[l].weight)?;
                // acts[l] is post-ReLU output of layer l-1: zero where the unit was inactive.
                for (p, &a) in prev.as_mut_slice().iter_mut().zip(acts[l].as_slice()) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        Ok((loss / m.max(1) as f64, grads))
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.as_slice().len() + l.bias.len()).sum::<usize>()
            + self.relations.as_slice().len()
    }

    fn param_slot(&mut self, mut idx: usize) -> &mut f32 {
        for layer in &mut self.layers {
            let n = layer.weight.as_slice().len();
            if idx < n {
                return &mut layer.weight.as_mut_slice()[idx];
            }
            idx -= n;
            if idx < layer.bias.len() {
                return &mut layer.bias[idx];
            }
            idx -= layer.bias.len();
        }
        &mut self.relations.as_mut_slice()[idx]
    }

    /// Parameter `idx` in the flattened order (layer weights, layer bias, ..., relations).
    pub fn param(&self, idx: usize) -> f32 {
        let mut copy_idx = idx;
        for layer in &self.layers {
            let n = layer.weight.as_slice().len();
            if copy_idx < n {
                return layer.weight.as_slice()[copy_idx];
            }
            copy_idx -= n;
            if copy_idx < layer.bias.len() {
                return layer.bias[copy_idx];
            }
            copy_idx -= layer.bias.len();
        }
        self.relations.as_slice()[copy_idx]
    }

    pub fn set_param(&mut self, idx: usize, value: f32) {
        *self.param_slot(idx) = value;
    }

    /// `params -= lr * grads`, after scaling `grads` down to at most `clip_norm` global norm.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f32, clip_norm: Option<f32>) {
        let step = lr * clip_scale(grads, clip_norm);
        self.update(grads, |_, p, g| *p -= step * g);
    }

    /// Calls `f(index, param, grad)` for every parameter in the order of [`Decoder::param`].
    pub fn update(&mut self, grads: &Gradients, mut f: impl FnMut(usize, &mut f32, f32)) {
        let mut idx = 0;
        let mut visit = |ps: &mut [f32], gs: &[f32]| {
            for (p, &g) in ps.iter_mut().zip(gs) {
                f(idx, p, g);
                idx += 1;
            }
        };
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            visit(layer.weight.as_mut_slice(), gw.as_slice());
            visit(&mut layer.bias, gb);
        }
        visit(self.relations.as_mut_slice(), grads.relations.as_slice());
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite())) && self.relations.is_finite()
    }
}

/// Factor that brings the global gradient norm down to `clip_norm`.
pub fn clip_scale(grads: &Gradients, clip_norm: Option<f32>) -> f32 {
    let norm = grads.norm();
    match clip_norm {
        Some(c) if norm > c as f64 => (c as f64 / norm) as f32,
        _ => 1.0,
    }
}

/// Gradients with the same layout as a [`Decoder`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Matrix, Vec<f32>)>,
    pub relations: Matrix,
}

impl Gradients {
    fn zeros_like(dec: &Decoder) -> Self {
        Self {
            layers: dec
                .layers
                .iter()
                .map(|l| (Matrix::zeros(l.weight.rows(), l.weight.cols()), vec![0.0; l.bias.len()]))
                .collect(),
            relations: Matrix::zeros(dec.relations.rows(), dec.relations.cols()),
        }
    }

    pub fn norm(&self) -> f64 {
        let sq = |s: &[f32]| s.iter().map(|&v| v as f64 * v as f64).sum::<f64>();
        let total: f64 = self.layers.iter().map(|(w, b)| sq(w.as_slice()) + sq(b)).sum::<f64>() + sq(self.relations.as_slice());
        libm::sqrt(total)
    }

    /// Gradient entry in the order of [`Decoder::param`].
    pub fn get(&self, mut idx: usize) -> f32 {
        for (w, b) in &self.layers {
            let n = w.as_slice().len();
            if idx < n {
                return w.as_slice()[idx];
            }
            idx -= n;
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        self.relations.as_slice()[idx]
    }
}

#[inline]
pub fn distmult(head: &[f32], relation: &[f32], tail: &[f32]) -> f32 {
    // (h * t) * r keeps the score bit-for-bit symmetric in head and tail.
    head.iter().zip(tail).zip(relation).map(|((h, t), r)| h * t * r).sum()
}

#[inline]
fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::expf(-x))
    } else {
        let e = libm::expf(x);
        e / (1.0 + e)
    }
}

/// `-(y log sigma(s) + (1 - y) log(1 - sigma(s)))`, computed stably.
#[inline]
pub fn bce_with_logits(s: f32, label: f32) -> f32 {
    let softplus = |x: f32| x.max(0.0) + libm::log1pf(libm::expf(-x.abs()));
    label * softplus(-s) + (1.0 - label) * softplus(s)
}

/// Scores `q * reps[j]` for every entity `j`, where `q` already includes the relation diagonal.
pub(crate) fn score_all(reps: &Matrix, q: &[f32], out: &mut [f32]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = dot(q, reps.row(j));
    }
}
