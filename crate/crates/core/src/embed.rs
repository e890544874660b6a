//! Frozen relational message passing, PPV aggregation and the layered
//! embedding pipeline.
//!
//! One layer computes, for every node `i`,
//!
//! ```text
//! x_i = W_0 h_i + sum_{r in R} (1 / |N_r(i)|) sum_{j in N_r(i)} W_r h_j
//! ```
//!
//! where `R` holds both directions of every relation and every `W` is a
//! Glorot-uniform `e x e` matrix regenerated from its seed. Only one weight
//! matrix is alive at a time. Aggregation happens before the transform, so a
//! relation costs `e^2` per node that has neighbours through it, and the only
//! scratch memory is a block of [`ROW_BLOCK`] rows.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{GraphIndex, RelationAdjacency};
use crate::matrix::{dot, dot4, gemv_acc, Matrix};
use crate::rng::{self, SeedSchedule, WeightSpec};

/// Rows of per-relation contributions computed before they are added to the accumulator.
pub const ROW_BLOCK: usize = 256;

/// Configuration of one embedding run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbedConfig {
    /// Embedding size `e`.
    pub dim: usize,
    /// Number of message passing layers `n`.
    pub layers: usize,
    /// Master seed `s`.
    pub seed: u64,
    /// Append PPV features to the node states.
    pub ppv: bool,
    /// Add the raw input state once per relation term and once for the self-loop,
    /// reproducing the literal accumulation of the per-relation update line.
    pub residual: bool,
    /// Refuse to run when the peak estimate exceeds this many bytes.
    pub memory_budget: Option<u128>,
}

impl EmbedConfig {
    pub fn new(dim: usize, layers: usize, seed: u64) -> Self {
        Self { dim, layers, seed, ppv: true, residual: false, memory_budget: None }
    }

    pub fn with_ppv(mut self, ppv: bool) -> Self {
        self.ppv = ppv;
        self
    }

    pub fn with_residual(mut self, residual: bool) -> Self {
        self.residual = residual;
        self
    }

    pub fn with_memory_budget(mut self, bytes: Option<u128>) -> Self {
        self.memory_budget = bytes;
        self
    }

    pub fn output_dim(&self) -> usize {
        if self.ppv {
            2 * self.dim
        } else {
            self.dim
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(crate::error::invalid("embedding size must be at least 1"));
        }
        if self.layers == 0 {
            return Err(crate::error::invalid("layer count must be at least 1"));
        }
        Ok(())
    }
}

/// Output of [`embed`]: `|V| x e` (or `|V| x 2e` with PPV) plus the settings that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeEmbeddings {
    pub config: EmbedConfig,
    pub matrix: Matrix,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConvOptions {
    pub residual: bool,
}

fn check_states(g: &GraphIndex, h: &Matrix, seeds: &SeedSchedule) -> Result<()> {
    if h.rows() != g.entity_count() {
        return Err(Error::DimensionMismatch { what: "node state rows", expected: g.entity_count(), found: h.rows() });
    }
    if seeds.len() < g.directed_relation_count() + 1 {
        return Err(Error::DimensionMismatch {
            what: "seed schedule length",
            expected: g.directed_relation_count() + 1,
            found: seeds.len(),
        });
    }
    if h.cols() == 0 {
        return Err(crate::error::invalid("node states need at least one column"));
    }
    Ok(())
}

/// One frozen relational convolution (pre-activation).
pub fn conv_layer(g: &GraphIndex, h: &Matrix, seeds: &SeedSchedule, opts: ConvOptions) -> Result<Matrix> {
    check_states(g, h, seeds)?;
    let e = h.cols();
    let mut x = Matrix::try_zeros(h.rows(), e)?;

    {
        let w0 = rng::materialize(&WeightSpec::glorot(e, e, seeds.self_loop()))?;
        let mut i = 0;
        while i + GROUP <= h.rows() {
            let rows: [&[f32]; GROUP] = core::array::from_fn(|b| h.row(i + b));
            for k in 0..e {
                let v = dot4(w0.row(k), rows);
                for (b, vb) in v.iter().enumerate() {
                    x.row_mut(i + b)[k] += vb;
                }
            }
            i += GROUP;
        }
        for i in i..h.rows() {
            gemv_acc(&w0, h.row(i), x.row_mut(i));
        }
    }

    for (k, adj) in g.directed().iter().enumerate() {
        if adj.row_count() == 0 {
            continue;
        }
        let w = rng::materialize(&WeightSpec::glorot(e, e, seeds.relation(k)))?;
        accumulate_relation(adj, &w, h, &mut x);
    }

    if opts.residual {
        let copies = (g.directed_relation_count() + 1) as f32;
        for (xv, &hv) in x.as_mut_slice().iter_mut().zip(h.as_slice()) {
            *xv += copies * hv;
        }
    }
    Ok(x)
}

/// `x_i += W (mean_{j in N(i)} h_j)` for every row of `adj`.
fn accumulate_relation(adj: &RelationAdjacency, w: &Matrix, h: &Matrix, x: &mut Matrix) {
    let e = h.cols();
    let rows = adj.row_count();
    let mut block = vec![0.0f32; ROW_BLOCK.min(rows) * e];
    let mut start = 0;
    while start < rows {
        let len = ROW_BLOCK.min(rows - start);
        let out = &mut block[..len * e];
        contributions(adj, w, h, start, out);
        for (b, chunk) in out.chunks_exact(e).enumerate() {
            let (node, _) = adj.row_at(start + b);
            for (xv, &c) in x.row_mut(node as usize).iter_mut().zip(chunk) {
                *xv += c;
            }
        }
        start += len;
    }
}

/// Mean of the neighbour states of `row` into `agg`.
fn neighbour_mean(adj: &RelationAdjacency, h: &Matrix, row: usize, agg: &mut [f32]) {
    let (_, ns) = adj.row_at(row);
    agg.iter_mut().for_each(|v| *v = 0.0);
    for &j in ns {
        for (a, &v) in agg.iter_mut().zip(h.row(j as usize)) {
            *a += v;
        }
    }
    let inv = 1.0 / ns.len() as f32;
    agg.iter_mut().for_each(|v| *v *= inv);
}

/// `W * mean` for up to four consecutive rows; `out` holds one `e`-row per adjacency row.
fn row_group(adj: &RelationAdjacency, w: &Matrix, h: &Matrix, first: usize, agg: &mut [f32], out: &mut [f32]) {
    let e = h.cols();
    let g = out.len() / e;
    for b in 0..g {
        neighbour_mean(adj, h, first + b, &mut agg[b * e..(b + 1) * e]);
    }
    if g == GROUP {
        let a: [&[f32]; GROUP] = core::array::from_fn(|b| &agg[b * e..(b + 1) * e]);
        for k in 0..e {
            let v = dot4(w.row(k), a);
            for b in 0..GROUP {
                out[b * e + k] = v[b];
            }
        }
    } else {
        for b in 0..g {
            for k in 0..e {
                out[b * e + k] = dot(w.row(k), &agg[b * e..(b + 1) * e]);
            }
        }
    }
}

const GROUP: usize = 4;

#[cfg(not(feature = "parallel"))]
fn contributions(adj: &RelationAdjacency, w: &Matrix, h: &Matrix, start: usize, out: &mut [f32]) {
    let e = h.cols();
    let mut agg = vec![0.0f32; GROUP * e];
    for (c, chunk) in out.chunks_mut(GROUP * e).enumerate() {
        row_group(adj, w, h, start + c * GROUP, &mut agg, chunk);
    }
}

#[cfg(feature = "parallel")]
fn contributions(adj: &RelationAdjacency, w: &Matrix, h: &Matrix, start: usize, out: &mut [f32]) {
    use rayon::prelude::*;
    let e = h.cols();
    out.par_chunks_mut(GROUP * e).enumerate().for_each_init(
        || vec![0.0f32; GROUP * e],
        |agg, (c, chunk)| row_group(adj, w, h, start + c * GROUP, agg, chunk),
    );
}

/// Per-dimension fraction of a node's neighbours (over all relations and
/// directions) whose state is strictly positive. Isolated nodes get zeros.
pub fn ppv(g: &GraphIndex, h: &Matrix) -> Result<Matrix> {
    if h.rows() != g.entity_count() {
        return Err(Error::DimensionMismatch { what: "node state rows", expected: g.entity_count(), found: h.rows() });
    }
    let e = h.cols();
    let mut p = Matrix::try_zeros(h.rows(), e)?;
    let mut counts = vec![0u32; e];
    for i in 0..h.rows() {
        let ns = g.neighbours(i as u32);
        if ns.is_empty() {
            continue;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        for &j in ns {
            for (c, &v) in counts.iter_mut().zip(h.row(j as usize)) {
                *c += (v > 0.0) as u32;
            }
        }
        let n = ns.len() as f32;
        for (pv, &c) in p.row_mut(i).iter_mut().zip(&counts) {
            *pv = c as f32 / n;
        }
    }
    Ok(p)
}

/// Generates node embeddings: random normal features, then `layers` rounds of
/// frozen convolution with ReLU, with PPV features convolved alongside.
///
/// Every layer reuses the same seed schedule. PPV features are never rectified.
pub fn embed(g: &GraphIndex, cfg: &EmbedConfig) -> Result<NodeEmbeddings> {
    cfg.validate()?;
    if let Some(budget) = cfg.memory_budget {
        let need = estimate_memory(g.entity_count(), g.directed_relation_count(), cfg.dim, MemoryMode::RrgcnPeak)?;
        if need > budget {
            return Err(Error::Capacity { requested_bytes: need, budget_bytes: budget });
        }
    }
    let seeds = rng::schedule_for_relations(cfg.seed, g.relation_count());
    let opts = ConvOptions { residual: cfg.residual };

    let h0 = rng::initial_features(cfg.seed, g.entity_count(), cfg.dim)?;
    let mut h = conv_layer(g, &h0, &seeds, opts)?;
    drop(h0);
    h.relu_in_place();
    let mut p = if cfg.ppv { Some(ppv(g, &h)?) } else { None };

    for _ in 1..cfg.layers {
        let mut next = conv_layer(g, &h, &seeds, opts)?;
        next.relu_in_place();
        h = next;
        if let Some(prev) = p.take() {
            let conv = conv_layer(g, &prev, &seeds, opts)?;
            drop(prev);
            p = Some(ppv(g, &conv)?);
        }
    }

    let matrix = match p {
        Some(p) => h.hconcat(&p)?,
        None => h,
    };
    Ok(NodeEmbeddings { config: *cfg, matrix })
}

/// Which memory figure to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MemoryMode {
    /// Trained model with `bases` basis matrices: two `B x |V| x e` tensors.
    RgcnParams { bases: usize },
    /// Stored activations of a trained model: one `|V| x e` tensor per
    /// directed relation plus the layer output, for every layer.
    RgcnActivations { layers: usize },
    /// Random model peak: previous states, previous PPV features, accumulator
    /// and one relation's intermediate result.
    RrgcnPeak,
}

/// Bytes needed under `mode`, with 4-byte floats. Overflow is an error, never wrapped.
pub fn estimate_memory(entities: usize, directed_relations: usize, dim: usize, mode: MemoryMode) -> Result<u128> {
    let per_matrix = (entities as u128)
        .checked_mul(dim as u128)
        .and_then(|n| n.checked_mul(4))
        .ok_or(Error::Overflow("memory estimate"))?;
    let factor = match mode {
        MemoryMode::RgcnParams { bases } => (bases as u128).checked_mul(2),
        MemoryMode::RgcnActivations { layers } => (directed_relations as u128 + 1).checked_mul(layers as u128),
        MemoryMode::RrgcnPeak => Some(4),
    }
    .ok_or(Error::Overflow("memory estimate"))?;
    per_matrix.checked_mul(factor).ok_or(Error::Overflow("memory estimate"))
}

/// Working memory [`embed`] may hold beyond the [`MemoryMode::RrgcnPeak`]
/// figure: one `e x e` weight matrix, one block of aggregated rows, one
/// `e`-vector scratch buffer per worker, and 64 KiB for the seed schedule and
/// bookkeeping.
pub fn embed_overhead_bytes(dim: usize, workers: usize) -> u128 {
    let e = dim as u128;
    4 * (e * e + ROW_BLOCK as u128 * e + (workers as u128 + 1) * GROUP as u128 * e) + 65536
}

/// Decimal gigabytes (10^9 bytes).
pub fn bytes_to_gb(bytes: u128) -> f64 {
    bytes as f64 / 1e9
}

/// Seeds used by [`embed`] for a graph, exposed for reference implementations.
pub fn seed_schedule(g: &GraphIndex, seed: u64) -> SeedSchedule {
    rng::schedule_for_relations(seed, g.relation_count())
}

/// Row sums of the normalised adjacency of a directed relation: 1 for nodes
/// with neighbours, 0 otherwise.
pub fn normalised_row_sums(g: &GraphIndex, directed: usize) -> Vec<f32> {
    let mut sums = vec![0.0f32; g.entity_count()];
    for (i, ns) in g.adjacency(directed).iter() {
        let w = 1.0 / ns.len() as f32;
        sums[i as usize] = ns.iter().map(|_| w).sum();
    }
    sums
}
