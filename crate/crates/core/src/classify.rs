//! Node classification head: standardised features, L2-regularised
//! multinomial logistic regression trained by gradient descent with early
//! stopping, stratified folds and the `(layers, dim)` grid search.

use alloc::vec;
use alloc::vec::Vec;

use crate::embed::{self, EmbedConfig, MemoryMode};
use crate::error::{invalid, Error, Result};
use crate::graph::{GraphIndex, LabeledSplit, NodeId};
use crate::matrix::Matrix;
use crate::rng::SplitMix64;

/// Per-dimension mean and inverse standard deviation fitted on training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let (n, d) = x.shape();
        let mut mean = vec![0.0f64; d];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(x.row(i)) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0f64; d];
        for i in 0..n {
            for ((s, &v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v as f64 - m) * (v as f64 - m);
            }
        }
        // Constant columns are centred but not scaled.
        let inv_std = var
            .iter()
            .map(|s| {
                let sd = libm::sqrt(s / n.max(1) as f64);
                if sd > 1e-12 { 1.0 / sd } else { 1.0 }
            })
            .collect();
        Self { mean, inv_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f32], out: &mut [f64]) {
        for (((o, &v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.inv_std) {
            *o = (v as f64 - m) * s;
        }
    }

    pub fn transform(&self, x: &Matrix) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; x.rows() * d];
        for i in 0..x.rows() {
            self.transform_row(x.row(i), &mut out[i * d..(i + 1) * d]);
        }
        out
    }
}

/// Trained multinomial logistic regression, including its feature scaler.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierModel {
    pub class_count: usize,
    pub dim: usize,
    /// `class_count x dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub scaler: Standardizer,
    /// Gradient steps taken to reach the returned snapshot.
    pub iterations: usize,
    /// Validation log-loss of the snapshot (training loss when no validation rows were given).
    pub best_val_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainParams {
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
    /// Fixed step size; `None` uses `1 / L` with `L` the smoothness constant of the loss.
    pub step: Option<f64>,
    pub max_iterations: usize,
    /// Gradient steps between validation evaluations.
    pub eval_every: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self { l2: 1e-2, step: None, max_iterations: 2000, eval_every: 10, patience: 10 }
    }
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [u32],
    dim: usize,
    classes: usize,
}

impl Problem<'_> {
    fn rows(&self) -> usize {
        self.y.len()
    }

    fn logits(&self, w: &[f64], b: &[f64], i: usize, out: &mut [f64]) {
        let xi = &self.x[i * self.dim..(i + 1) * self.dim];
        for (c, o) in out.iter_mut().enumerate() {
            let wc = &w[c * self.dim..(c + 1) * self.dim];
            *o = b[c] + wc.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Mean cross-entropy; when `grad` is given, also accumulates the data gradient.
    fn loss(&self, w: &[f64], b: &[f64], mut grad: Option<(&mut [f64], &mut [f64])>) -> f64 {
        let n = self.rows();
        let mut z = vec![0.0; self.classes];
        let mut total = 0.0;
        if let Some((gw, gb)) = grad.as_mut() {
            gw.iter_mut().for_each(|v| *v = 0.0);
            gb.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..n {
            self.logits(w, b, i, &mut z);
            log_softmax_in_place(&mut z);
            let yi = self.y[i] as usize;
            total -= z[yi];
            if let Some((gw, gb)) = grad.as_mut() {
                let xi = &self.x[i * self.dim..(i + 1) * self.dim];
                for c in 0..self.classes {
                    let r = libm::exp(z[c]) - if c == yi { 1.0 } else { 0.0 };
                    gb[c] += r / n as f64;
                    let row = &mut gw[c * self.dim..(c + 1) * self.dim];
                    for (g, &xv) in row.iter_mut().zip(xi) {
                        *g += r * xv / n as f64;
                    }
                }
            }
        }
        total / n as f64
    }

    /// Largest eigenvalue of `[x 1]^T [x 1] / n` by power iteration.
    fn gram_spectral_norm(&self) -> f64 {
        let n = self.rows();
        let d = self.dim + 1;
        let mut v = vec![1.0 / libm::sqrt(d as f64); d];
        let mut lambda = 0.0;
        for _ in 0..100 {
            let mut next = vec![0.0; d];
            for i in 0..n {
                let xi = &self.x[i * self.dim..(i + 1) * self.dim];
                let s = xi.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + v[self.dim];
                for (o, &xv) in next.iter_mut().zip(xi) {
                    *o += s * xv;
                }
                next[self.dim] += s;
            }
            next.iter_mut().for_each(|o| *o /= n as f64);
            let norm = libm::sqrt(next.iter().map(|a| a * a).sum::<f64>());
            if norm == 0.0 {
                return 0.0;
            }
            let converged = (norm - lambda).abs() <= 1e-9 * norm;
            lambda = norm;
            v = next.into_iter().map(|a| a / norm).collect();
            if converged {
                break;
            }
        }
        lambda
    }
}

/// Replaces logits by log-probabilities; returns the log-sum-exp.
fn log_softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|&v| libm::exp(v - max)).sum();
    let lse = max + libm::log(sum);
    z.iter_mut().for_each(|v| *v -= lse);
    lse
}

fn check_labels(x: &Matrix, y: &[u32], what: &'static str) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch { what, expected: x.rows(), found: y.len() });
    }
    Ok(())
}

/// L2-regularised objective `mean CE + l2/2 |W|^2` and its gradient; exposed for gradient checks.
pub fn objective(
    x: &[f64],
    y: &[u32],
    dim: usize,
    classes: usize,
    l2: f64,
    weights: &[f64],
    bias: &[f64],
) -> (f64, Vec<f64>, Vec<f64>) {
    let p = Problem { x, y, dim, classes };
    let mut gw = vec![0.0; weights.len()];
    let mut gb = vec![0.0; bias.len()];
    let data = p.loss(weights, bias, Some((&mut gw, &mut gb)));
    let reg: f64 = weights.iter().map(|w| w * w).sum::<f64>() * l2 / 2.0;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (data + reg, gw, gb)
}

/// Trains on `(x_train, y_train)`, early-stopping on the validation log-loss.
/// Labels must lie in `[0, class_count)`.
pub fn train_classifier(
    x_train: &Matrix,
    y_train: &[u32],
    x_val: &Matrix,
    y_val: &[u32],
    class_count: usize,
    params: &TrainParams,
) -> Result<ClassifierModel> {
    check_labels(x_train, y_train, "training labels")?;
    check_labels(x_val, y_val, "validation labels")?;
    if x_val.rows() > 0 && x_val.cols() != x_train.cols() {
        return Err(Error::DimensionMismatch { what: "validation feature width", expected: x_train.cols(), found: x_val.cols() });
    }
    if class_count < 2 {
        return Err(invalid("classification needs at least two classes"));
    }
    if y_train.iter().chain(y_val).any(|&c| c as usize >= class_count) {
        return Err(invalid("label outside [0, class_count)"));
    }
    let first = *y_train.first().ok_or_else(|| invalid("empty training set"))?;
    if y_train.iter().all(|&c| c == first) {
        return Err(invalid("training set contains a single class"));
    }

    let dim = x_train.cols();
    let scaler = Standardizer::fit(x_train);
    let xt = scaler.transform(x_train);
    let xv = scaler.transform(x_val);
    let train = Problem { x: &xt, y: y_train, dim, classes: class_count };
    let val = Problem { x: &xv, y: y_val, dim, classes: class_count };
    let has_val = !y_val.is_empty();

    let step = match params.step {
        Some(s) => s,
        None => 1.0 / (0.5 * train.gram_spectral_norm() + params.l2).max(1e-12),
    };

    let mut w = vec![0.0; class_count * dim];
    let mut b = vec![0.0; class_count];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; b.len()];
    let score = |w: &[f64], b: &[f64]| if has_val { val.loss(w, b, None) } else { train.loss(w, b, None) };

    let mut best = (score(&w, &b), w.clone(), b.clone(), 0usize);
    let mut stale = 0;
    let eval_every = params.eval_every.max(1);
    for it in 1..=params.max_iterations {
        let loss = train.loss(&w, &b, Some((&mut gw, &mut gb)));
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: it, loss });
        }
        for (wv, g) in w.iter_mut().zip(&gw) {
            *wv -= step * (g + params.l2 * *wv);
        }
        for (bv, g) in b.iter_mut().zip(&gb) {
            *bv -= step * g;
        }
        if it % eval_every == 0 || it == params.max_iterations {
            let s = score(&w, &b);
            if !s.is_finite() {
                return Err(Error::Diverged { iteration: it, loss: s });
            }
            if s < best.0 {
                best = (s, w.clone(), b.clone(), it);
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    break;
                }
            }
        }
    }
    let (best_val_loss, weights, bias, iterations) = best;
    Ok(ClassifierModel { class_count, dim, weights, bias, scaler, iterations, best_val_loss })
}

impl ClassifierModel {
    pub fn predict_log_proba_row(&self, row: &[f32], out: &mut [f64]) {
        let mut xs = vec![0.0; self.dim];
        self.scaler.transform_row(row, &mut xs);
        let p = Problem { x: &xs, y: &[], dim: self.dim, classes: self.class_count };
        p.logits(&self.weights, &self.bias, 0, out);
        log_softmax_in_place(out);
    }

    pub fn predict(&self, x: &Matrix) -> Vec<u32> {
        let mut z = vec![0.0; self.class_count];
        (0..x.rows())
            .map(|i| {
                self.predict_log_proba_row(x.row(i), &mut z);
                argmax(&z) as u32
            })
            .collect()
    }

    /// Mean negative log-likelihood of `y` under the model.
    pub fn log_loss(&self, x: &Matrix, y: &[u32]) -> f64 {
        let mut z = vec![0.0; self.class_count];
        let total: f64 = (0..x.rows())
            .map(|i| {
                self.predict_log_proba_row(x.row(i), &mut z);
                -z[y[i] as usize]
            })
            .sum();
        total / x.rows().max(1) as f64
    }
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassReport {
    pub class: u32,
    pub support: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl ClassReport {
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 { 0.0 } else { self.correct as f64 / self.predicted as f64 }
    }

    pub fn recall(&self) -> f64 {
        if self.support == 0 { 0.0 } else { self.correct as f64 / self.support as f64 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassReport>,
}

/// Accuracy and per-class counts of `predictions` against `truth`.
pub fn score_predictions(predictions: &[u32], truth: &[u32], class_count: usize) -> EvalReport {
    let mut per_class: Vec<ClassReport> =
        (0..class_count as u32).map(|class| ClassReport { class, support: 0, predicted: 0, correct: 0 }).collect();
    let mut correct = 0;
    for (&p, &t) in predictions.iter().zip(truth) {
        if let Some(r) = per_class.get_mut(t as usize) {
            r.support += 1;
        }
        if let Some(r) = per_class.get_mut(p as usize) {
            r.predicted += 1;
        }
        if p == t {
            correct += 1;
            per_class[t as usize].correct += 1;
        }
    }
    let accuracy = if truth.is_empty() { 0.0 } else { correct as f64 / truth.len() as f64 };
    EvalReport { accuracy, per_class }
}

pub fn evaluate(model: &ClassifierModel, x_test: &Matrix, y_test: &[u32]) -> EvalReport {
    score_predictions(&model.predict(x_test), y_test, model.class_count)
}

/// Assigns every index to one of `k` folds so that each class is spread
/// evenly: per class, fold sizes differ by at most one.
pub fn stratified_folds(labels: &[u32], k: usize, seed: u64) -> Vec<Vec<usize>> {
    let classes = labels.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c as usize].push(i);
    }
    let mut rng = SplitMix64::new(seed);
    let mut folds = vec![Vec::new(); k];
    // Continue the round-robin across classes so that total fold sizes also stay balanced.
    let mut next = 0;
    for members in &mut by_class {
        rng.shuffle(members);
        for &i in members.iter() {
            folds[next % k].push(i);
            next += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

fn rows_of(emb: &Matrix, nodes: &[(NodeId, u32)]) -> (Matrix, Vec<u32>) {
    let idx: Vec<usize> = nodes.iter().map(|p| p.0 as usize).collect();
    (emb.select_rows(&idx), nodes.iter().map(|p| p.1).collect())
}

/// Result of one classifier fit on one embedding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOutcome {
    pub seed: u64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Settings shared by every grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct GridParams {
    pub layer_grid: Vec<usize>,
    pub dim_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub ppv: bool,
    pub residual: bool,
    pub memory_budget: Option<u128>,
    pub folds: usize,
    pub train: TrainParams,
}

impl GridParams {
    pub fn new(layer_grid: Vec<usize>, dim_grid: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self {
            layer_grid,
            dim_grid,
            seeds,
            ppv: true,
            residual: false,
            memory_budget: None,
            folds: 5,
            train: TrainParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub layers: usize,
    pub dim: usize,
    /// Over the memory budget and not evaluated.
    pub skipped: bool,
    pub peak_bytes: u128,
    pub mean_log_loss: f64,
    pub std_error: f64,
    pub mean_accuracy: f64,
    pub outcomes: Vec<FitOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchReport {
    pub cells: Vec<GridCell>,
    /// Index into `cells` of the chosen configuration.
    pub chosen: usize,
    /// Evaluation protocol used: stratified k-fold or the given validation split.
    pub cross_validated: bool,
}

impl GridSearchReport {
    pub fn chosen_cell(&self) -> &GridCell {
        &self.cells[self.chosen]
    }
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

fn evaluate_cell(g: &GraphIndex, labels: &LabeledSplit, layers: usize, dim: usize, p: &GridParams) -> Result<Vec<FitOutcome>> {
    let cfg = |seed| EmbedConfig { dim, layers, seed, ppv: p.ppv, residual: p.residual, memory_budget: None };
    let mut outcomes = Vec::new();
    if labels.valid.is_empty() {
        // Stratified k-fold over the training nodes, one embedding seed per fold.
        let y: Vec<u32> = labels.train.iter().map(|t| t.1).collect();
        let folds = stratified_folds(&y, p.folds, p.seeds[0]);
        for (f, fold) in folds.iter().enumerate() {
            let seed = p.seeds[f % p.seeds.len()];
            let emb = embed::embed(g, &cfg(seed))?.matrix;
            let mut in_fold = vec![false; y.len()];
            fold.iter().for_each(|&i| in_fold[i] = true);
            let tr: Vec<_> = labels.train.iter().zip(&in_fold).filter(|(_, &v)| !v).map(|(t, _)| *t).collect();
            let va: Vec<_> = fold.iter().map(|&i| labels.train[i]).collect();
            outcomes.push(fit_once(&emb, &tr, &va, labels.class_count, &p.train, seed)?);
        }
    } else {
        for &seed in &p.seeds {
            let emb = embed::embed(g, &cfg(seed))?.matrix;
            outcomes.push(fit_once(&emb, &labels.train, &labels.valid, labels.class_count, &p.train, seed)?);
        }
    }
    Ok(outcomes)
}

fn fit_once(
    emb: &Matrix,
    train: &[(NodeId, u32)],
    valid: &[(NodeId, u32)],
    classes: usize,
    params: &TrainParams,
    seed: u64,
) -> Result<FitOutcome> {
    let (xt, yt) = rows_of(emb, train);
    let (xv, yv) = rows_of(emb, valid);
    let model = train_classifier(&xt, &yt, &xv, &yv, classes, params)?;
    let val_accuracy = evaluate(&model, &xv, &yv).accuracy;
    Ok(FitOutcome { seed, val_loss: model.log_loss(&xv, &yv), val_accuracy })
}

/// Evaluates every `(layers, dim)` cell and selects the one with the lowest
/// mean validation log-loss. Among cells within one standard error of the
/// best, the smallest `layers`, then smallest `dim`, wins.
pub fn grid_search(g: &GraphIndex, labels: &LabeledSplit, params: &GridParams) -> Result<GridSearchReport> {
    if params.layer_grid.is_empty() || params.dim_grid.is_empty() {
        return Err(invalid("grid must contain at least one layer count and one embedding size"));
    }
    if params.seeds.is_empty() {
        return Err(invalid("grid search needs at least one seed"));
    }
    labels.validate(g.entity_count())?;
    let mut layer_grid = params.layer_grid.clone();
    let mut dim_grid = params.dim_grid.clone();
    layer_grid.sort_unstable();
    layer_grid.dedup();
    dim_grid.sort_unstable();
    dim_grid.dedup();

    let mut cells = Vec::new();
    for &layers in &layer_grid {
        for &dim in &dim_grid {
            let peak = embed::estimate_memory(g.entity_count(), g.directed_relation_count(), dim, MemoryMode::RrgcnPeak)?;
            let skipped = params.memory_budget.is_some_and(|b| peak > b);
            cells.push(GridCell {
                layers,
                dim,
                skipped,
                peak_bytes: peak,
                mean_log_loss: f64::NAN,
                std_error: f64::NAN,
                mean_accuracy: f64::NAN,
                outcomes: Vec::new(),
            });
        }
    }
    if cells.iter().all(|c| c.skipped) {
        let need = cells.iter().map(|c| c.peak_bytes).min().unwrap_or(0);
        return Err(Error::Capacity { requested_bytes: need, budget_bytes: params.memory_budget.unwrap_or(0) });
    }

    let results = run_cells(g, labels, params, &cells);
    for (cell, res) in cells.iter_mut().zip(results) {
        if let Some(res) = res {
            let outcomes = res?;
            let losses: Vec<f64> = outcomes.iter().map(|o| o.val_loss).collect();
            let (m, se) = mean_and_se(&losses);
            cell.mean_log_loss = m;
            cell.std_error = se;
            cell.mean_accuracy = outcomes.iter().map(|o| o.val_accuracy).sum::<f64>() / outcomes.len() as f64;
            cell.outcomes = outcomes;
        }
    }
    let chosen = select_cell(&cells).ok_or_else(|| invalid("no grid cell produced a finite loss"))?;
    Ok(GridSearchReport { cells, chosen, cross_validated: labels.valid.is_empty() })
}

#[cfg(feature = "parallel")]
fn run_cells(g: &GraphIndex, labels: &LabeledSplit, p: &GridParams, cells: &[GridCell]) -> Vec<Option<Result<Vec<FitOutcome>>>> {
    use rayon::prelude::*;
    cells
        .par_iter()
        .map(|c| (!c.skipped).then(|| evaluate_cell(g, labels, c.layers, c.dim, p)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_cells(g: &GraphIndex, labels: &LabeledSplit, p: &GridParams, cells: &[GridCell]) -> Vec<Option<Result<Vec<FitOutcome>>>> {
    cells
        .iter()
        .map(|c| (!c.skipped).then(|| evaluate_cell(g, labels, c.layers, c.dim, p)))
        .collect()
}

/// Index of the selected cell; cells are expected in ascending `(layers, dim)` order.
pub fn select_cell(cells: &[GridCell]) -> Option<usize> {
    let best = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.skipped && c.mean_log_loss.is_finite())
        .min_by(|a, b| a.1.mean_log_loss.total_cmp(&b.1.mean_log_loss))?;
    let limit = best.1.mean_log_loss + best.1.std_error;
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.skipped && c.mean_log_loss.is_finite() && c.mean_log_loss <= limit)
        .min_by_key(|(_, c)| (c.layers, c.dim))
        .map(|(i, _)| i)
}

/// One embedding seed's classifier and test-set report.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub embeddings: Matrix,
    pub model: ClassifierModel,
    pub report: EvalReport,
}

/// Training and early-stopping nodes: the given splits, or a stratified fifth
/// of the training nodes held out (chosen by `seed`) when there is no
/// validation split.
pub fn early_stopping_split(labels: &LabeledSplit, seed: u64) -> (Vec<(NodeId, u32)>, Vec<(NodeId, u32)>) {
    if !labels.valid.is_empty() {
        return (labels.train.clone(), labels.valid.clone());
    }
    let y: Vec<u32> = labels.train.iter().map(|t| t.1).collect();
    let folds = stratified_folds(&y, 5, seed);
    let mut hold = vec![false; y.len()];
    folds[0].iter().for_each(|&i| hold[i] = true);
    let (held, kept): (Vec<_>, Vec<_>) = labels.train.iter().zip(&hold).partition(|(_, &h)| h);
    (kept.into_iter().map(|(t, _)| *t).collect(), held.into_iter().map(|(t, _)| *t).collect())
}

/// Embeds with `cfg`, fits on the training nodes and scores the test nodes.
pub fn fit_seed(g: &GraphIndex, labels: &LabeledSplit, cfg: &EmbedConfig, params: &TrainParams) -> Result<SeedRun> {
    labels.validate(g.entity_count())?;
    let (train, valid) = early_stopping_split(labels, cfg.seed);
    let emb = embed::embed(g, cfg)?.matrix;
    let (xt, yt) = rows_of(&emb, &train);
    let (xv, yv) = rows_of(&emb, &valid);
    let (xs, ys) = rows_of(&emb, &labels.test);
    let model = train_classifier(&xt, &yt, &xv, &yv, labels.class_count, params)?;
    let report = evaluate(&model, &xs, &ys);
    Ok(SeedRun { seed: cfg.seed, embeddings: emb, model, report })
}

/// Test report of one configuration for every seed (see [`fit_seed`]).
pub fn test_accuracies(
    g: &GraphIndex,
    labels: &LabeledSplit,
    cfg: &EmbedConfig,
    seeds: &[u64],
    params: &TrainParams,
) -> Result<Vec<(u64, EvalReport)>> {
    seeds
        .iter()
        .map(|&seed| fit_seed(g, labels, &EmbedConfig { seed, ..*cfg }, params).map(|r| (seed, r.report)))
        .collect()
}
