//! Manifest-driven runs: load -> preprocess -> embed -> task, with every
//! artifact tagged by the resolved manifest hash.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rrgcn_core::classify::{self, GridParams};
use rrgcn_core::embed::{bytes_to_gb, estimate_memory, MemoryMode};
use rrgcn_core::graph::relations_above_fraction;
use rrgcn_core::linkpred::{self, rank_filtered, ConstantScorer, KnownTriples, LinkPredPreset};
use rrgcn_core::{embed, EmbedConfig, GraphIndex, TripleSplit};

use crate::dataset::{self, Dataset};
use crate::error::{Error, Result};
use crate::formats::{self, write_atomic, ClassifierFile, EmbeddingFile, Hash, LinkPredFile};
use crate::manifest::{Manifest, Task};
use crate::report::{f, mean_std, table, tsv, tsv_manifest_hash};
use crate::tsv::{read_importance, read_labels, read_triple_splits, Labels};

pub const RESOLVED_MANIFEST: &str = "manifest.resolved.toml";
pub const MANIFEST_HASH_FILE: &str = "manifest.sha256";
pub const METRICS_FILE: &str = "metrics.tsv";
/// Sidecar holding everything non-deterministic about a run (timestamps).
pub const RUN_INFO: &str = "run-info.toml";
pub const LOCK_FILE: &str = ".rrgcn.lock";

/// Held for the duration of a run; one run per output directory.
pub struct OutputLock(PathBuf);

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Validation(format!(
                "{} is locked by another run (remove {} if that run is dead)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Loaded and preprocessed inputs.
pub struct Prepared {
    pub dataset: Dataset,
    pub labels: Option<Labels>,
    pub split: Option<TripleSplit>,
}

/// Loads inputs and applies relation filtering, k-hop pruning and degree cutting, in that order.
pub fn prepare(m: &Manifest) -> Result<Prepared> {
    let d = &m.dataset;
    if m.task == Task::Linkpred {
        let (train, valid, test) = (d.train.as_ref(), d.valid.as_ref(), d.test.as_ref());
        let (dataset, split) = read_triple_splits(
            &m.resolve(train.expect("validated")),
            &m.resolve(valid.expect("validated")),
            &m.resolve(test.expect("validated")),
        )?;
        return Ok(Prepared { dataset, labels: None, split: Some(split) });
    }
    let paths: Vec<PathBuf> = d.graph.iter().map(|p| m.resolve(p)).collect();
    let mut ds = dataset::load(&paths)?;
    let mut labels = match &d.labels {
        Some(p) => Some(read_labels(&m.resolve(p), &ds.entities)?),
        None => None,
    };
    let p = &m.preprocess;
    if let Some(file) = &p.relation_filter {
        let scores = read_importance(&m.resolve(file), &ds.relations)?;
        let keep = relations_above_fraction(&scores, p.relation_filter_fraction);
        if keep.is_empty() {
            return Err(Error::Data("relation filter keeps no relation".into()));
        }
        let before = ds.relations.len();
        ds = ds.filter_relations(&keep)?;
        log::info!("relation filter kept {} of {before} relations", ds.relations.len());
    }
    let seeds = labels.as_ref().map(|l| l.split.labelled_nodes()).unwrap_or_default();
    if let Some(hops) = p.khop {
        let (pruned, map) = ds.prune_khop(&seeds, hops)?;
        log::info!("{hops}-hop pruning kept {} of {} entities", pruned.entities.len(), ds.entities.len());
        ds = pruned;
        labels = labels.map(|l| remap_labels(l, &map)).transpose()?;
    }
    if let Some(threshold) = p.degree_cut {
        let protected = labels.as_ref().map(|l| l.split.labelled_nodes()).unwrap_or_default();
        let (cut, map) = ds.cut_low_degree(threshold, &protected);
        log::info!("degree cut <= {threshold} kept {} of {} entities", cut.entities.len(), ds.entities.len());
        ds = cut;
        labels = labels.map(|l| remap_labels(l, &map)).transpose()?;
    }
    Ok(Prepared { dataset: ds, labels, split: None })
}

fn remap_labels(l: Labels, map: &rrgcn_core::graph::IdMap) -> Result<Labels> {
    Ok(Labels { split: l.split.remap(map)?, classes: l.classes })
}

/// Refuses configurations whose peak working set exceeds the budget.
pub fn check_capacity(g: &GraphIndex, cfg: &EmbedConfig) -> Result<()> {
    let need = estimate_memory(g.entity_count(), g.directed_relation_count(), cfg.dim, MemoryMode::RrgcnPeak)?;
    match cfg.memory_budget {
        Some(budget) if need > budget => Err(Error::Capacity(format!(
            "embedding {} entities at e={} needs {:.2} GB at peak (4 x |V| x e x 4 bytes), over the {:.2} GB budget",
            g.entity_count(),
            cfg.dim,
            bytes_to_gb(need),
            bytes_to_gb(budget)
        ))),
        _ => Ok(()),
    }
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest_hash: Hash,
    /// Output files, relative to `output_dir`.
    pub files: Vec<String>,
    /// Human-readable results.
    pub table: String,
}

struct Outputs<'a> {
    dir: &'a Path,
    hash: Hash,
    files: Vec<String>,
}

impl Outputs<'_> {
    fn path(&mut self, name: String) -> PathBuf {
        let p = self.dir.join(&name);
        self.files.push(name);
        p
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name.to_owned());
        write_atomic(&p, text.as_bytes())
    }

    fn embeddings(&mut self, m: &Manifest, ds: &Dataset, cfg: &EmbedConfig, matrix: rrgcn_core::Matrix) -> Result<()> {
        if m.embed.export_tsv {
            let mut buf = Vec::new();
            formats::write_embeddings_tsv(&mut buf, &matrix, &ds.entities).map_err(|e| Error::io(self.dir, e))?;
            let p = self.path(format!("embeddings-seed{}.tsv", cfg.seed));
            write_atomic(&p, &buf)?;
        }
        let file = EmbeddingFile::new(cfg, &ds.graph, self.hash, matrix);
        let p = self.path(format!("embeddings-seed{}.rrem", cfg.seed));
        file.write(&p)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Executes a validated manifest. Outputs are byte-identical across runs of
/// the same manifest; only the run-info sidecar differs.
pub fn run(m: &Manifest) -> Result<RunSummary> {
    m.validate()?;
    let started = unix_now();
    let dir = m.resolve(&m.output_dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let _lock = OutputLock::acquire(&dir)?;

    let hash = m.hash();
    let mut out = Outputs { dir: &dir, hash, files: Vec::new() };
    out.text(RESOLVED_MANIFEST, &m.resolved_text())?;
    out.text(MANIFEST_HASH_FILE, &format!("{}\n", hex::encode(hash)))?;

    let prepared = prepare(m).map_err(|e| e.in_stage("load"))?;
    let table = match m.task {
        Task::Embed => run_embed(m, &prepared, &mut out),
        Task::Classify => run_classify(m, &prepared, &mut out),
        Task::Linkpred => run_linkpred(m, &prepared, &mut out),
    }?;

    let files = out.files.clone();
    let info = format!(
        "started_unix = {started}\nfinished_unix = {}\nversion = \"{}\"\nfiles = {:?}\n",
        unix_now(),
        env!("CARGO_PKG_VERSION"),
        files
    );
    write_atomic(&dir.join(RUN_INFO), info.as_bytes())?;
    Ok(RunSummary { output_dir: dir, manifest_hash: hash, files, table })
}

fn run_embed(m: &Manifest, p: &Prepared, out: &mut Outputs) -> Result<String> {
    let g = &p.dataset.graph;
    let cfg0 = m.embed_config(m.seeds[0]);
    check_capacity(g, &cfg0).map_err(|e| e.in_stage("embed"))?;
    let mut rows = Vec::new();
    for &seed in &m.seeds {
        let cfg = m.embed_config(seed);
        let emb = embed(g, &cfg).map_err(|e| Error::from(e).in_stage("embed"))?;
        let checksum = hex::encode(formats::sha256(&emb.matrix.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<_>>()));
        rows.push(vec![seed.to_string(), emb.matrix.rows().to_string(), emb.matrix.cols().to_string(), checksum]);
        out.embeddings(m, &p.dataset, &cfg, emb.matrix)?;
    }
    let header = ["seed", "entities", "output_dim", "sha256"];
    out.text(METRICS_FILE, &tsv(&out.hash, &header, &rows))?;
    Ok(table(&header, &rows))
}

fn run_classify(m: &Manifest, p: &Prepared, out: &mut Outputs) -> Result<String> {
    let g = &p.dataset.graph;
    let labels = p.labels.as_ref().expect("validated");
    labels.split.validate(g.entity_count()).map_err(|e| Error::Data(format!("labels: {e}")))?;
    let params = m.train_params();
    let mut text = String::new();

    let (layers, dim) = if m.classify.layer_grid.is_empty() {
        (m.embed.layers, m.embed.dim)
    } else {
        let mut gp = GridParams::new(m.classify.layer_grid.clone(), m.classify.dim_grid.clone(), m.seeds.clone());
        gp.ppv = m.embed.ppv;
        gp.residual = m.embed.residual;
        gp.memory_budget = m.memory_budget_bytes();
        gp.folds = m.classify.folds;
        gp.train = params;
        let report = classify::grid_search(g, &labels.split, &gp).map_err(|e| Error::from(e).in_stage("grid"))?;
        if report.cells.iter().all(|c| c.skipped) {
            let cfg = EmbedConfig::new(*gp.dim_grid.iter().min().expect("nonempty"), 1, 0);
            check_capacity(g, &EmbedConfig { memory_budget: gp.memory_budget, ..cfg }).map_err(|e| e.in_stage("grid"))?;
        }
        let header = ["layers", "dim", "skipped", "peak_gb", "mean_log_loss", "std_error", "mean_accuracy", "chosen"];
        let rows: Vec<Vec<String>> = report
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                vec![
                    c.layers.to_string(),
                    c.dim.to_string(),
                    c.skipped.to_string(),
                    format!("{:.2}", bytes_to_gb(c.peak_bytes)),
                    f(c.mean_log_loss),
                    f(c.std_error),
                    f(c.mean_accuracy),
                    (i == report.chosen).to_string(),
                ]
            })
            .collect();
        out.text("grid.tsv", &tsv(&out.hash, &header, &rows))?;
        text.push_str(&table(&header, &rows));
        text.push('\n');
        let c = report.chosen_cell();
        (c.layers, c.dim)
    };

    let mut rows = Vec::new();
    let mut accs = Vec::new();
    for &seed in &m.seeds {
        let cfg = EmbedConfig { layers, dim, ..m.embed_config(seed) };
        check_capacity(g, &cfg).map_err(|e| e.in_stage("embed"))?;
        let run = classify::fit_seed(g, &labels.split, &cfg, &params).map_err(|e| Error::from(e).in_stage("classify"))?;
        accs.push(run.report.accuracy);
        rows.push(vec![
            seed.to_string(),
            layers.to_string(),
            dim.to_string(),
            cfg.ppv.to_string(),
            f(run.report.accuracy),
            f(run.model.best_val_loss),
            run.model.iterations.to_string(),
        ]);
        let model = ClassifierFile { manifest_hash: out.hash, embed_seed: seed, classes: labels.classes.clone(), model: run.model };
        let path = out.path(format!("model-seed{seed}.rrcm"));
        model.write(&path)?;
        out.embeddings(m, &p.dataset, &cfg, run.embeddings)?;
    }
    let (mean, std) = mean_std(&accs);
    let header = ["seed", "layers", "dim", "ppv", "test_accuracy", "val_log_loss", "iterations"];
    let mut all = rows.clone();
    all.push(vec!["mean".into(), layers.to_string(), dim.to_string(), m.embed.ppv.to_string(), f(mean), String::new(), String::new()]);
    all.push(vec!["std".into(), layers.to_string(), dim.to_string(), m.embed.ppv.to_string(), f(std), String::new(), String::new()]);
    out.text(METRICS_FILE, &tsv(&out.hash, &header, &all))?;
    text.push_str(&table(&header, &all));
    Ok(text)
}

fn run_linkpred(m: &Manifest, p: &Prepared, out: &mut Outputs) -> Result<String> {
    let g = &p.dataset.graph;
    let split = p.split.as_ref().expect("validated");
    let l = &m.linkpred;
    let preset = LinkPredPreset { embedding_dim: m.embed.dim, pca_dim: l.pca_dim, width: l.width, depth: l.depth };
    let known = KnownTriples::new(split.all_known());
    let baseline = rank_filtered(&ConstantScorer(g.entity_count()), &split.test, &known).filtered.mrr;

    let mut rows = Vec::new();
    let mut per_relation = Vec::new();
    for &seed in &m.seeds {
        let cfg = m.embed_config(seed);
        check_capacity(g, &cfg).map_err(|e| e.in_stage("embed"))?;
        let emb = embed(g, &cfg).map_err(|e| Error::from(e).in_stage("embed"))?;
        let result = linkpred::run(&emb.matrix, split, g.relation_count(), &preset, &m.linkpred_config(seed))
            .map_err(|e| Error::from(e).in_stage("linkpred"))?;
        let t = &result.training;
        if let Some(epoch) = t.diverged_at {
            log::warn!("seed {seed}: decoder training diverged at epoch {epoch}; using the best earlier snapshot");
        }
        let (fm, rm) = (&result.report.filtered, &result.report.raw);
        rows.push(vec![
            seed.to_string(),
            t.best_epoch.to_string(),
            f(t.best_validation_mrr),
            f(fm.mrr),
            f(fm.hits1),
            f(fm.hits3),
            f(fm.hits10),
            f(rm.mrr),
            f(rm.hits1),
            f(rm.hits3),
            f(rm.hits10),
            f(baseline),
        ]);
        for (r, met) in &result.report.per_relation {
            per_relation.push(vec![
                seed.to_string(),
                p.dataset.relations.name(*r).to_owned(),
                met.queries.to_string(),
                f(met.mrr),
                f(met.hits1),
                f(met.hits3),
                f(met.hits10),
            ]);
        }
        let ckpt = LinkPredFile {
            manifest_hash: out.hash,
            embed_seed: seed,
            best_epoch: t.best_epoch as u32,
            pca: result.pca,
            decoder: result.training.decoder,
        };
        let path = out.path(format!("decoder-seed{seed}.rrld"));
        ckpt.write(&path)?;
        out.embeddings(m, &p.dataset, &cfg, emb.matrix)?;
    }
    let header = [
        "seed", "best_epoch", "valid_fmrr", "fmrr", "fhits1", "fhits3", "fhits10", "mrr", "hits1", "hits3", "hits10", "constant_fmrr",
    ];
    out.text(METRICS_FILE, &tsv(&out.hash, &header, &rows))?;
    let rel_header = ["seed", "relation", "queries", "fmrr", "fhits1", "fhits3", "fhits10"];
    out.text("per_relation.tsv", &tsv(&out.hash, &rel_header, &per_relation))?;
    Ok(table(&header, &rows))
}

/// Outcome of [`verify`]: files checked and problems found.
#[derive(Clone, Debug, Default)]
pub struct Verification {
    pub checked: Vec<String>,
    pub problems: Vec<String>,
}

/// Recomputes the manifest hash of a run directory and checks that every
/// output file carries it.
pub fn verify(dir: &Path) -> Result<Verification> {
    let manifest_path = dir.join(RESOLVED_MANIFEST);
    let m = Manifest::load(&manifest_path)?;
    let expected = hex::encode(m.hash());
    let mut v = Verification::default();
    let recorded = fs::read_to_string(dir.join(MANIFEST_HASH_FILE)).map_err(|e| Error::io(dir.join(MANIFEST_HASH_FILE), e))?;
    if recorded.trim() != expected {
        v.problems.push(format!("{MANIFEST_HASH_FILE}: records {}, manifest hashes to {expected}", recorded.trim()));
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    for path in entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
        let found = match path.extension().and_then(|e| e.to_str()) {
            Some("rrem" | "rrcm" | "rrld") => match formats::embedded_manifest_hash(&path) {
                Ok(h) => h.map(hex::encode),
                Err(e) => {
                    v.problems.push(e.to_string());
                    continue;
                }
            },
            Some("tsv") if !name.starts_with("embeddings-") => {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                tsv_manifest_hash(&text)
            }
            _ => continue,
        };
        match found {
            Some(h) if h == expected => v.checked.push(name),
            Some(h) => v.problems.push(format!("{name}: manifest hash {h} does not match {expected}")),
            None => v.problems.push(format!("{name}: no manifest hash")),
        }
    }
    Ok(v)
}
