//! Little-endian binary files: graph cache (`RRGX`), embeddings (`RREM`),
//! classifier snapshot (`RRCM`) and link-prediction checkpoint (`RRLD`).
//!
//! Every file starts with a 4-byte magic and a u16 version. Files written by
//! a pipeline run also carry the SHA-256 of the resolved manifest (all zeros
//! when written outside a run).

use std::fs;
use std::io::Write;
use std::path::Path;

use rrgcn_core::classify::{ClassifierModel, Standardizer};
use rrgcn_core::graph::Triple;
use rrgcn_core::linkpred::decoder::Dense;
use rrgcn_core::linkpred::{Decoder, PcaModel};
use rrgcn_core::{EmbedConfig, GraphIndex, Matrix};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, Dictionary};
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 4] = b"RRGX";
pub const EMBEDDING_MAGIC: &[u8; 4] = b"RREM";
pub const CLASSIFIER_MAGIC: &[u8; 4] = b"RRCM";
pub const LINKPRED_MAGIC: &[u8; 4] = b"RRLD";
pub const FORMAT_VERSION: u16 = 1;

pub type Hash = [u8; 32];
pub const NO_MANIFEST: Hash = [0; 32];

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn header(magic: &[u8; 4]) -> Self {
        let mut e = Enc(Vec::new());
        e.bytes(magic);
        e.u16(FORMAT_VERSION);
        e
    }
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }
    fn u32s(&mut self, v: &[u32]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.u32(x));
    }
    fn usizes(&mut self, v: &[usize]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.u64(x as u64));
    }
    fn f32s(&mut self, v: &[f32]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.bytes(&x.to_le_bytes()));
    }
    fn f64s(&mut self, v: &[f64]) {
        self.len(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
    fn matrix(&mut self, m: &Matrix) {
        self.u32(m.rows() as u32);
        self.u32(m.cols() as u32);
        m.as_slice().iter().for_each(|&x| self.bytes(&x.to_le_bytes()));
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
    what: &'static str,
}

impl<'a> Dec<'a> {
    fn open(buf: &'a [u8], path: &'a Path, what: &'static str, magic: &[u8; 4]) -> Result<Self> {
        let mut d = Dec { buf, pos: 0, path, what };
        if d.take(4)? != magic {
            return Err(d.err("wrong magic"));
        }
        let v = d.u16()?;
        if v != FORMAT_VERSION {
            return Err(d.err(format!("unsupported version {v}")));
        }
        Ok(d)
    }
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format { path: self.path.to_path_buf(), what: self.what, message: message.into() }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(self.err(format!("invalid flag byte {b}"))),
        }
    }
    /// Element count, refusing counts the remaining bytes cannot hold.
    fn len(&mut self, elem: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.checked_mul(elem).map_or(true, |b| b > self.buf.len() - self.pos) {
            return Err(self.err(format!("length {n} exceeds file size")));
        }
        Ok(n)
    }
    fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.len(4)?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.u64().map(|v| v as usize)).collect()
    }
    fn f32_run(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| self.err("size overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }
    fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.len(4)?;
        self.f32_run(n)
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.err("string is not UTF-8"))
    }
    fn matrix(&mut self) -> Result<Matrix> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let data = self.f32_run(rows.checked_mul(cols).ok_or_else(|| self.err("size overflow"))?)?;
        Ok(Matrix::from_vec(rows, cols, data)?)
    }
    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes via a temporary sibling and a rename so readers never see partial files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256(bytes: &[u8]) -> Hash {
    Sha256::digest(bytes).into()
}

// ---- graph cache -------------------------------------------------------

fn encode_graph_section(g: &GraphIndex, e: &mut Enc) {
    let raw = g.raw_parts();
    e.u64(raw.entity_count as u64);
    e.u64(raw.relation_count as u64);
    e.u32s(raw.degrees);
    for (rows, offsets, cols) in raw.adjacency {
        e.u32s(rows);
        e.usizes(offsets);
        e.u32s(cols);
    }
}

/// Content hash of a graph: SHA-256 of its CSR section as stored in `RRGX`.
pub fn graph_hash(g: &GraphIndex) -> Hash {
    let mut e = Enc::default();
    encode_graph_section(g, &mut e);
    sha256(&e.0)
}

/// Serialises the graph and its dictionaries.
pub fn encode_graph(ds: &Dataset) -> Vec<u8> {
    let mut e = Enc::header(GRAPH_MAGIC);
    encode_graph_section(&ds.graph, &mut e);
    for dict in [&ds.entities, &ds.relations] {
        e.len(dict.len());
        dict.names().iter().for_each(|n| e.str(n));
    }
    e.0
}

pub fn decode_graph(buf: &[u8], path: &Path) -> Result<Dataset> {
    let mut d = Dec::open(buf, path, "graph", GRAPH_MAGIC)?;
    let entities = d.u64()? as usize;
    let relations = d.u64()? as usize;
    let degrees = d.u32s()?;
    let mut triples: Vec<Triple> = Vec::new();
    let mut arrays = Vec::with_capacity(2 * relations);
    for k in 0..relations.checked_mul(2).ok_or_else(|| d.err("relation count overflow"))? {
        let (rows, offsets, cols) = (d.u32s()?, d.usizes()?, d.u32s()?);
        if k < relations {
            if offsets.len() != rows.len() + 1 || offsets[rows.len()] != cols.len() {
                return Err(d.err("inconsistent CSR offsets"));
            }
            for (i, &h) in rows.iter().enumerate() {
                let (a, b) = (offsets[i], offsets[i + 1]);
                if a > b || b > cols.len() {
                    return Err(d.err("inconsistent CSR offsets"));
                }
                triples.extend(cols[a..b].iter().map(|&t| (h, k as u32, t)));
            }
        }
        arrays.push((rows, offsets, cols));
    }
    if triples.iter().any(|&(h, _, t)| h as usize >= entities || t as usize >= entities) {
        return Err(d.err("node id out of range"));
    }
    let graph = GraphIndex::from_triples(entities, relations, triples);
    let raw = graph.raw_parts();
    let consistent = raw.degrees == &degrees[..]
        && raw.adjacency.iter().zip(&arrays).all(|(a, b)| a.0 == &b.0[..] && a.1 == &b.1[..] && a.2 == &b.2[..]);
    if !consistent {
        return Err(d.err("CSR arrays do not describe a consistent graph"));
    }
    let mut dict = |expected: usize| -> Result<Dictionary> {
        let n = d.len(4)?;
        if n != expected {
            return Err(d.err(format!("dictionary has {n} entries, expected {expected}")));
        }
        let names = (0..n).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
        Dictionary::from_names(names).map_err(|e| d.err(e.to_string()))
    };
    let entity_dict = dict(entities)?;
    let relation_dict = dict(relations)?;
    d.finish()?;
    Ok(Dataset { graph, entities: entity_dict, relations: relation_dict })
}

pub fn write_graph_file(path: &Path, ds: &Dataset) -> Result<()> {
    write_atomic(path, &encode_graph(ds))
}

pub fn read_graph_file(path: &Path) -> Result<Dataset> {
    decode_graph(&read_file(path)?, path)
}

// ---- embeddings ---------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingFile {
    pub seed: u64,
    pub dim: u32,
    pub layers: u32,
    pub ppv: bool,
    pub residual: bool,
    pub graph_hash: Hash,
    pub manifest_hash: Hash,
    pub matrix: Matrix,
}

impl EmbeddingFile {
    pub fn new(cfg: &EmbedConfig, graph: &GraphIndex, manifest_hash: Hash, matrix: Matrix) -> Self {
        Self {
            seed: cfg.seed,
            dim: cfg.dim as u32,
            layers: cfg.layers as u32,
            ppv: cfg.ppv,
            residual: cfg.residual,
            graph_hash: graph_hash(graph),
            manifest_hash,
            matrix,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut e = Enc::header(EMBEDDING_MAGIC);
        e.u64(self.seed);
        e.u32(self.dim);
        e.u32(self.layers);
        e.u8(self.ppv as u8);
        e.u8(self.residual as u8);
        e.bytes(&self.graph_hash);
        e.bytes(&self.manifest_hash);
        e.matrix(&self.matrix);
        e.0
    }

    pub fn decode(buf: &[u8], path: &Path) -> Result<Self> {
        let mut d = Dec::open(buf, path, "embedding", EMBEDDING_MAGIC)?;
        let f = EmbeddingFile {
            seed: d.u64()?,
            dim: d.u32()?,
            layers: d.u32()?,
            ppv: d.bool()?,
            residual: d.bool()?,
            graph_hash: d.array()?,
            manifest_hash: d.array()?,
            matrix: d.matrix()?,
        };
        let expected = f.dim as usize * if f.ppv { 2 } else { 1 };
        if f.matrix.cols() != expected {
            return Err(d.err(format!("{} columns, header implies {expected}", f.matrix.cols())));
        }
        d.finish()?;
        Ok(f)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&read_file(path)?, path)
    }
}

/// `node_iri<TAB>v1<TAB>...` per row.
pub fn write_embeddings_tsv(mut w: impl Write, matrix: &Matrix, entities: &Dictionary) -> std::io::Result<()> {
    for i in 0..matrix.rows() {
        write!(w, "{}", entities.name(i as u32))?;
        for v in matrix.row(i) {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

// ---- classifier ---------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierFile {
    pub manifest_hash: Hash,
    pub embed_seed: u64,
    pub classes: Vec<String>,
    pub model: ClassifierModel,
}

impl ClassifierFile {
    pub fn encode(&self) -> Vec<u8> {
        let m = &self.model;
        let mut e = Enc::header(CLASSIFIER_MAGIC);
        e.bytes(&self.manifest_hash);
        e.u64(self.embed_seed);
        e.u32(m.class_count as u32);
        e.u32(m.dim as u32);
        e.u64(m.iterations as u64);
        e.f64(m.best_val_loss);
        e.f64s(&m.scaler.mean);
        e.f64s(&m.scaler.inv_std);
        e.f64s(&m.weights);
        e.f64s(&m.bias);
        e.len(self.classes.len());
        self.classes.iter().for_each(|c| e.str(c));
        e.0
    }

    pub fn decode(buf: &[u8], path: &Path) -> Result<Self> {
        let mut d = Dec::open(buf, path, "classifier", CLASSIFIER_MAGIC)?;
        let manifest_hash = d.array()?;
        let embed_seed = d.u64()?;
        let class_count = d.u32()? as usize;
        let dim = d.u32()? as usize;
        let iterations = d.u64()? as usize;
        let best_val_loss = d.f64()?;
        let scaler = Standardizer { mean: d.f64s()?, inv_std: d.f64s()? };
        let weights = d.f64s()?;
        let bias = d.f64s()?;
        let n = d.len(4)?;
        let classes = (0..n).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
        if scaler.mean.len() != dim || scaler.inv_std.len() != dim || weights.len() != class_count * dim || bias.len() != class_count {
            return Err(d.err("array sizes disagree with the header"));
        }
        if !classes.is_empty() && classes.len() != class_count {
            return Err(d.err("class-name count disagrees with the header"));
        }
        d.finish()?;
        let model = ClassifierModel { class_count, dim, weights, bias, scaler, iterations, best_val_loss };
        Ok(Self { manifest_hash, embed_seed, classes, model })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&read_file(path)?, path)
    }
}

// ---- link prediction checkpoint ------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct LinkPredFile {
    pub manifest_hash: Hash,
    pub embed_seed: u64,
    pub best_epoch: u32,
    pub pca: Option<PcaModel>,
    pub decoder: Decoder,
}

impl LinkPredFile {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Enc::header(LINKPRED_MAGIC);
        e.bytes(&self.manifest_hash);
        e.u64(self.embed_seed);
        e.u32(self.best_epoch);
        match &self.pca {
            None => e.u8(0),
            Some(p) => {
                e.u8(1);
                e.u32(p.input_dim as u32);
                e.u32(p.k as u32);
                e.f64s(&p.mean);
                e.f64s(&p.inv_std);
                e.f64s(&p.components);
                e.f64s(&p.explained_variance);
                e.f64(p.total_variance);
            }
        }
        e.u32(self.decoder.layers.len() as u32);
        for layer in &self.decoder.layers {
            e.matrix(&layer.weight);
            e.f32s(&layer.bias);
        }
        e.matrix(&self.decoder.relations);
        e.0
    }

    pub fn decode(buf: &[u8], path: &Path) -> Result<Self> {
        let mut d = Dec::open(buf, path, "link prediction", LINKPRED_MAGIC)?;
        let manifest_hash = d.array()?;
        let embed_seed = d.u64()?;
        let best_epoch = d.u32()?;
        let pca = if d.bool()? {
            let input_dim = d.u32()? as usize;
            let k = d.u32()? as usize;
            let p = PcaModel {
                mean: d.f64s()?,
                inv_std: d.f64s()?,
                components: d.f64s()?,
                input_dim,
                k,
                explained_variance: d.f64s()?,
                total_variance: d.f64()?,
            };
            if p.mean.len() != input_dim || p.inv_std.len() != input_dim || p.components.len() != input_dim * k || p.explained_variance.len() != k {
                return Err(d.err("PCA array sizes disagree with the header"));
            }
            Some(p)
        } else {
            None
        };
        let depth = d.u32()? as usize;
        let mut layers = Vec::with_capacity(depth.min(64));
        for _ in 0..depth {
            let weight = d.matrix()?;
            let bias = d.f32s()?;
            if bias.len() != weight.rows() || layers.last().is_some_and(|l: &Dense| l.weight.rows() != weight.cols()) {
                return Err(d.err("decoder layer shapes do not chain"));
            }
            layers.push(Dense { weight, bias });
        }
        let relations = d.matrix()?;
        if layers.last().is_some_and(|l| l.weight.rows() != relations.cols()) {
            return Err(d.err("relation width disagrees with the decoder output"));
        }
        d.finish()?;
        Ok(Self { manifest_hash, embed_seed, best_epoch, pca, decoder: Decoder { layers, relations } })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&read_file(path)?, path)
    }
}

/// Manifest hash embedded in any of the binary outputs, identified by magic.
pub fn embedded_manifest_hash(path: &Path) -> Result<Option<Hash>> {
    let buf = read_file(path)?;
    Ok(match buf.get(..4) {
        Some(m) if m == EMBEDDING_MAGIC => Some(EmbeddingFile::decode(&buf, path)?.manifest_hash),
        Some(m) if m == CLASSIFIER_MAGIC => Some(ClassifierFile::decode(&buf, path)?.manifest_hash),
        Some(m) if m == LINKPRED_MAGIC => Some(LinkPredFile::decode(&buf, path)?.manifest_hash),
        _ => None,
    })
}
