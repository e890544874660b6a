//! Tab-separated side inputs: node labels, link-prediction splits and
//! relation importance scores.

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use rrgcn_core::graph::{RelationId, Triple};
use rrgcn_core::{GraphBuilder, LabeledSplit, TripleSplit};

use crate::dataset::{open_input, Dataset, Dictionary};
use crate::error::{Error, Result};

pub const LABEL_HEADER: &str = "node_iri\tlabel\tsplit";

/// Labelled nodes with class names; class ids follow the sorted class names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labels {
    pub split: LabeledSplit,
    pub classes: Vec<String>,
}

fn lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>>> {
    let reader = open_input(path)?;
    let p = path.to_path_buf();
    Ok(reader
        .lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(|e| Error::io(&p, e))))
}

fn data_error(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}:{line}: {msg}", path.display()))
}

/// Reads `node_iri<TAB>label<TAB>split` rows (header required).
pub fn read_labels(path: &Path, entities: &Dictionary) -> Result<Labels> {
    let mut rows = Vec::new();
    let mut iter = lines(path)?;
    match iter.next().transpose()? {
        Some((_, h)) if h.trim_end() == LABEL_HEADER => {}
        _ => return Err(data_error(path, 1, format!("expected header {LABEL_HEADER:?}"))),
    }
    let mut seen = HashSet::new();
    for item in iter {
        let (n, line) = item?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        let [node, label, split] = fields[..] else {
            return Err(data_error(path, n, "expected 3 tab-separated fields"));
        };
        let id = entities.get(node).ok_or_else(|| data_error(path, n, format!("unknown node {node:?}")))?;
        if !seen.insert(id) {
            return Err(data_error(path, n, format!("node {node:?} labelled twice")));
        }
        if !matches!(split, "train" | "valid" | "test") {
            return Err(data_error(path, n, format!("split must be train, valid or test, got {split:?}")));
        }
        rows.push((id, label.to_owned(), split.to_owned()));
    }
    let classes: Vec<String> = rows.iter().map(|r| r.1.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut split = LabeledSplit { class_count: classes.len(), ..LabeledSplit::default() };
    for (id, label, which) in rows {
        let class = classes.binary_search(&label).expect("collected above") as u32;
        match which.as_str() {
            "train" => split.train.push((id, class)),
            "valid" => split.valid.push((id, class)),
            _ => split.test.push((id, class)),
        }
    }
    Ok(Labels { split, classes })
}

/// Reads link-prediction splits. The graph holds only the training triples;
/// the entity dictionary covers all three files (train ids first).
pub fn read_triple_splits(train: &Path, valid: &Path, test: &Path) -> Result<(Dataset, TripleSplit)> {
    let mut entities = Dictionary::new();
    let mut relations = Dictionary::new();
    let mut parts: [Vec<Triple>; 3] = Default::default();
    for (path, out) in [train, valid, test].into_iter().zip(parts.iter_mut()) {
        for item in lines(path)? {
            let (n, line) = item?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() || (n == 1 && line == "head_iri\trelation_iri\ttail_iri") {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [h, r, t] = fields[..] else {
                return Err(data_error(path, n, "expected 3 tab-separated fields"));
            };
            let strip = |s: &str| s.strip_prefix('<').and_then(|s| s.strip_suffix('>')).unwrap_or(s).to_owned();
            out.push((entities.intern(&strip(h)), relations.intern(&strip(r)), entities.intern(&strip(t))));
        }
    }
    let [train_t, valid_t, test_t] = parts;
    let mut builder = GraphBuilder::new(entities.len(), relations.len());
    train_t.iter().for_each(|&t| builder.push(t));
    let graph = builder.build();
    // Splits are compared as sets: duplicates within a file collapse, and
    // triples repeated across files are a data error.
    let dedup = |v: Vec<Triple>| {
        let mut seen = HashSet::new();
        v.into_iter().filter(|t| seen.insert(*t)).collect::<Vec<_>>()
    };
    let split = TripleSplit { train: dedup(train_t), valid: dedup(valid_t), test: dedup(test_t) };
    split
        .validate(entities.len(), relations.len())
        .map_err(|e| Error::Data(format!("triple splits: {e}")))?;
    Ok((Dataset { graph, entities, relations }, split))
}

/// Reads `relation_iri<TAB>score` rows; relations absent from the graph are skipped.
pub fn read_importance(path: &Path, relations: &Dictionary) -> Result<Vec<(RelationId, f64)>> {
    let mut out = Vec::new();
    for item in lines(path)? {
        let (n, line) = item?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [rel, score] = fields[..] else {
            return Err(data_error(path, n, "expected 2 tab-separated fields"));
        };
        let score: f64 = match score.trim().parse() {
            Ok(s) => s,
            // Tolerate a header row.
            Err(_) if n == 1 => continue,
            Err(_) => return Err(data_error(path, n, format!("bad score {score:?}"))),
        };
        if !score.is_finite() {
            return Err(data_error(path, n, "score must be finite"));
        }
        match relations.get(rel) {
            Some(id) => out.push((id, score)),
            None => log::warn!("{}:{n}: relation {rel:?} not in graph, skipped", path.display()),
        }
    }
    Ok(out)
}
