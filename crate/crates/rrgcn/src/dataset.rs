//! Dictionary-encoded knowledge graphs loaded from N-Triples.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use rrgcn_core::graph::{self, IdMap, NodeId, RelationId};
use rrgcn_core::{GraphBuilder, GraphIndex};

use crate::error::{Error, Result};
use crate::ntriples::{parse_line, Term};

/// Bidirectional string <-> dense id map; ids follow first insertion.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionary {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails on duplicate names.
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if ids.insert(n.clone(), i as u32).is_some() {
                return Err(Error::Data(format!("duplicate dictionary entry {n:?}")));
            }
        }
        Ok(Self { names, ids })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    /// Accepts IRIs with or without angle brackets.
    pub fn get(&self, name: &str) -> Option<u32> {
        let bare = name.strip_prefix('<').and_then(|n| n.strip_suffix('>')).unwrap_or(name);
        self.ids.get(bare).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Keeps `old_ids` in the given order, renumbered densely.
    pub fn select(&self, old_ids: &[u32]) -> Self {
        let names: Vec<String> = old_ids.iter().map(|&i| self.names[i as usize].clone()).collect();
        Self::from_names(names).expect("subset of a valid dictionary")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub graph: GraphIndex,
    pub entities: Dictionary,
    pub relations: Dictionary,
}

/// Counts gathered while ingesting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub statements: usize,
    pub self_loops: usize,
    pub duplicates: usize,
}

/// Opens a file, transparently decompressing gzip (detected by magic bytes).
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}

/// Streaming N-Triples ingestion into one graph.
#[derive(Default)]
pub struct Ingest {
    entities: Dictionary,
    relations: Dictionary,
    builder: GraphBuilder,
    report: IngestReport,
}

impl Ingest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads every statement from `reader`; `name` is used in error messages.
    pub fn read(&mut self, mut reader: impl BufRead, name: &str) -> Result<()> {
        let mut buf = Vec::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::io(name, e))?;
            if n == 0 {
                return Ok(());
            }
            line_no += 1;
            let line = std::str::from_utf8(&buf).map_err(|e| Error::Parse {
                path: name.to_owned(),
                line: line_no,
                column: e.valid_up_to() + 1,
                message: "invalid UTF-8".into(),
            })?;
            let parsed = parse_line(line).map_err(|e| Error::Parse {
                path: name.to_owned(),
                line: line_no,
                column: e.column,
                message: e.message,
            })?;
            if let Some((s, p, o)) = parsed {
                self.push(s, p, o);
            }
        }
    }

    fn push(&mut self, s: Term<'_>, p: Term<'_>, o: Term<'_>) {
        let h = self.entities.intern(&s.key());
        let r = self.relations.intern(&p.key());
        let t = self.entities.intern(&o.key());
        self.report.statements += 1;
        if h == t {
            self.report.self_loops += 1;
        }
        self.builder.push((h, r, t));
    }

    pub fn finish(mut self) -> (Dataset, IngestReport) {
        self.builder.ensure_entities(self.entities.len());
        self.builder.ensure_relations(self.relations.len());
        let graph = self.builder.build();
        self.report.duplicates = self.report.statements - self.report.self_loops - graph.edge_count();
        (Dataset { graph, entities: self.entities, relations: self.relations }, self.report)
    }
}

/// Ingests N-Triples files (plain or gzip) in order into one graph.
pub fn ingest_paths(paths: &[PathBuf]) -> Result<(Dataset, IngestReport)> {
    let mut ingest = Ingest::new();
    for path in paths {
        let reader = open_input(path)?;
        ingest.read(reader, &path.display().to_string())?;
    }
    Ok(ingest.finish())
}

/// Loads a graph cache (detected by its magic) or ingests N-Triples.
pub fn load(paths: &[PathBuf]) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::Validation("no graph input given".into()));
    }
    if let [single] = paths {
        let mut magic = [0u8; 4];
        let mut f = File::open(single).map_err(|e| Error::io(single, e))?;
        if f.read(&mut magic).map_err(|e| Error::io(single, e))? == 4 && &magic == crate::formats::GRAPH_MAGIC {
            return crate::formats::read_graph_file(single);
        }
    }
    let (ds, report) = ingest_paths(paths)?;
    log::info!(
        "ingested {} statements: {} entities, {} relations, {} edges ({} self-loops dropped, {} duplicates)",
        report.statements,
        ds.entities.len(),
        ds.relations.len(),
        ds.graph.edge_count(),
        report.self_loops,
        report.duplicates
    );
    Ok(ds)
}

impl Dataset {
    pub fn entity(&self, name: &str) -> Option<NodeId> {
        self.entities.get(name)
    }

    pub fn relation(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name)
    }

    pub fn prune_khop(&self, seeds: &[NodeId], hops: usize) -> Result<(Dataset, IdMap)> {
        let (graph, map) = graph::prune_khop(&self.graph, seeds, hops)?;
        let entities = self.entities.select(&map.new_to_old);
        Ok((Dataset { graph, entities, relations: self.relations.clone() }, map))
    }

    pub fn cut_low_degree(&self, threshold: u32, protected: &[NodeId]) -> (Dataset, IdMap) {
        let (graph, map) = graph::cut_low_degree(&self.graph, threshold, protected);
        let entities = self.entities.select(&map.new_to_old);
        (Dataset { graph, entities, relations: self.relations.clone() }, map)
    }

    /// Keeps only `keep`; relation ids are renumbered in ascending old-id order.
    pub fn filter_relations(&self, keep: &[RelationId]) -> Result<Dataset> {
        let (graph, kept) = graph::filter_relations(&self.graph, keep)?;
        let relations = self.relations.select(&kept);
        Ok(Dataset { graph, entities: self.entities.clone(), relations })
    }

    /// Writes the deduplicated triple set back out as N-Triples.
    pub fn write_ntriples(&self, mut w: impl Write) -> io::Result<()> {
        for (h, r, t) in self.graph.triples() {
            writeln!(
                w,
                "{} <{}> {} .",
                term_text(self.entities.name(h)),
                self.relations.name(r),
                term_text(self.entities.name(t))
            )?;
        }
        Ok(())
    }
}

fn term_text(key: &str) -> String {
    if key.starts_with("_:") || key.starts_with('"') {
        key.to_owned()
    } else {
        format!("<{key}>")
    }
}
