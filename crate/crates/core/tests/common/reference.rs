//! Dense, straight-line reference of the embedding pipeline in f64.
//!
//! Shares only the random number source with the crate under test; adjacency,
//! normalisation, message passing and PPV are recomputed from the raw triple list.
#![allow(dead_code)]

use rrgcn_core::rng::{self, WeightSpec};

pub type Dense = Vec<Vec<f64>>;

pub struct RefGraph {
    pub nodes: usize,
    pub relations: usize,
    /// One `nodes x nodes` row-normalised matrix per directed relation.
    pub adjacency: Vec<Dense>,
    /// `neighbourhood[i][j]` is true when `j` sends to `i` through any directed relation.
    pub neighbourhood: Vec<Vec<bool>>,
}

pub fn build(nodes: usize, relations: usize, triples: &[(u32, u32, u32)]) -> RefGraph {
    let mut raw = vec![vec![vec![0.0f64; nodes]; nodes]; 2 * relations];
    for &(h, r, t) in triples {
        let (h, r, t) = (h as usize, r as usize, t as usize);
        if h == t {
            continue;
        }
        raw[r][h][t] = 1.0;
        raw[relations + r][t][h] = 1.0;
    }
    let mut neighbourhood = vec![vec![false; nodes]; nodes];
    for a in &raw {
        for i in 0..nodes {
            for j in 0..nodes {
                if a[i][j] > 0.0 {
                    neighbourhood[i][j] = true;
                }
            }
        }
    }
    let adjacency = raw
        .into_iter()
        .map(|mut a| {
            for row in &mut a {
                let deg: f64 = row.iter().sum();
                if deg > 0.0 {
                    row.iter_mut().for_each(|v| *v /= deg);
                }
            }
            a
        })
        .collect();
    RefGraph { nodes, relations, adjacency, neighbourhood }
}

fn to_dense(m: &rrgcn_core::Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).iter().map(|&v| v as f64).collect()).collect()
}

fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for p in 0..k {
            for j in 0..m {
                out[i][j] += a[i][p] * b[p][j];
            }
        }
    }
    out
}

fn transpose(a: &Dense) -> Dense {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn add(a: &mut Dense, b: &Dense) {
    for (ra, rb) in a.iter_mut().zip(b) {
        for (x, y) in ra.iter_mut().zip(rb) {
            *x += y;
        }
    }
}

/// `H W_0^T + sum_k A_k H W_k^T`, every product fully materialised.
pub fn conv(g: &RefGraph, h: &Dense, seed: u64, residual: bool) -> Dense {
    let e = h[0].len();
    let seeds = rng::schedule_for_relations(seed, g.relations);
    let w0 = to_dense(&rng::materialize(&WeightSpec::glorot(e, e, seeds.self_loop())).unwrap());
    let mut x = matmul(h, &transpose(&w0));
    for k in 0..2 * g.relations {
        let wk = to_dense(&rng::materialize(&WeightSpec::glorot(e, e, seeds.relation(k))).unwrap());
        let msg = matmul(&matmul(&g.adjacency[k], h), &transpose(&wk));
        add(&mut x, &msg);
    }
    if residual {
        let copies = (2 * g.relations + 1) as f64;
        for (rx, rh) in x.iter_mut().zip(h) {
            for (a, b) in rx.iter_mut().zip(rh) {
                *a += copies * b;
            }
        }
    }
    x
}

pub fn ppv(g: &RefGraph, h: &Dense) -> Dense {
    let e = h[0].len();
    (0..g.nodes)
        .map(|i| {
            let ns: Vec<usize> = (0..g.nodes).filter(|&j| g.neighbourhood[i][j]).collect();
            (0..e)
                .map(|k| {
                    if ns.is_empty() {
                        0.0
                    } else {
                        ns.iter().filter(|&&j| h[j][k] > 0.0).count() as f64 / ns.len() as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn relu(mut a: Dense) -> Dense {
    a.iter_mut().flatten().for_each(|v| *v = v.max(0.0));
    a
}

/// Layered pipeline: features, conv + ReLU, PPV, then `layers - 1` more rounds.
pub fn embed(g: &RefGraph, dim: usize, layers: usize, seed: u64, with_ppv: bool, residual: bool) -> Dense {
    let h0 = to_dense(&rng::initial_features(seed, g.nodes, dim).unwrap());
    let mut h = relu(conv(g, &h0, seed, residual));
    let mut p = ppv(g, &h);
    for _ in 1..layers {
        h = relu(conv(g, &h, seed, residual));
        p = conv(g, &p, seed, residual);
        p = ppv(g, &p);
    }
    if with_ppv {
        h.iter().zip(&p).map(|(a, b)| a.iter().chain(b).copied().collect()).collect()
    } else {
        h
    }
}

pub fn max_abs_diff(a: &rrgcn_core::Matrix, b: &Dense) -> f64 {
    assert_eq!(a.rows(), b.len());
    let mut worst = 0.0f64;
    for (i, row) in b.iter().enumerate() {
        assert_eq!(a.cols(), row.len());
        for (x, y) in a.row(i).iter().zip(row) {
            worst = worst.max((*x as f64 - y).abs());
        }
    }
    worst
}

/// Random KG: `nodes` entities, `relations` relations, about `edges` triples (self-loops allowed; dropped downstream).
pub fn random_triples(nodes: usize, relations: usize, edges: usize, seed: u64) -> Vec<(u32, u32, u32)> {
    let mut rng = rng::SplitMix64::new(seed);
    (0..edges)
        .map(|_| (rng.below(nodes) as u32, rng.below(relations) as u32, rng.below(nodes) as u32))
        .collect()
}
