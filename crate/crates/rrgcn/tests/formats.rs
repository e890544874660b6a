mod common;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use common::*;
use flate2::{write::GzEncoder, Compression};
use proptest::prelude::*;
use rrgcn::dataset::{self, Dataset, Ingest};
use rrgcn::formats::{self, ClassifierFile, EmbeddingFile, LinkPredFile};
use rrgcn::Error;

fn ingest_text(text: &str) -> Dataset {
    let mut ing = Ingest::new();
    ing.read(text.as_bytes(), "mem").unwrap();
    ing.finish().0
}

/// Triples as name strings, independent of id assignment.
fn named(ds: &Dataset) -> BTreeSet<(String, String, String)> {
    ds.graph
        .triples()
        .map(|(h, r, t)| (ds.entities.name(h).to_owned(), ds.relations.name(r).to_owned(), ds.entities.name(t).to_owned()))
        .collect()
}

fn random_ntriples(nodes: usize, relations: usize, edges: usize, seed: u64) -> String {
    let mut rng = rrgcn_core::rng::SplitMix64::new(seed);
    let mut s = String::new();
    for _ in 0..edges {
        let (h, r, t) = (rng.below(nodes), rng.below(relations), rng.below(nodes));
        let tail = match t % 3 {
            0 => format!("<{EX}n{t}>"),
            1 => format!("_:b{t}"),
            _ => format!("\"lit {t}\""),
        };
        s.push_str(&format!("<{EX}n{h}> <{EX}r{r}> {tail} .\n"));
    }
    s
}

#[test]
fn graph_cache_round_trip_is_bit_exact() {
    let ds = ingest_text(&toy_ntriples());
    let bytes = formats::encode_graph(&ds);
    assert_eq!(&bytes[..4], b"RRGX");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    let back = formats::decode_graph(&bytes, Path::new("mem")).unwrap();
    assert_eq!(formats::encode_graph(&back), bytes);
    assert_eq!(named(&back), named(&ds));
}

#[test]
fn corrupted_graph_cache_is_rejected() {
    let bytes = formats::encode_graph(&ingest_text(&toy_ntriples()));
    let p = Path::new("mem");
    for cut in [3, 6, 20, bytes.len() - 1] {
        assert!(matches!(formats::decode_graph(&bytes[..cut], p), Err(Error::Format { .. })), "truncated at {cut}");
    }
    let mut wrong_version = bytes.clone();
    wrong_version[4] = 2;
    assert!(formats::decode_graph(&wrong_version, p).is_err());
    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(formats::decode_graph(&trailing, p).is_err());
    // Flip the first column id of the first CSR block.
    let mut bad = bytes;
    let n = bad.len();
    bad[n / 2] ^= 0xff;
    assert!(formats::decode_graph(&bad, p).is_err());
}

#[test]
fn ntriples_export_reproduces_the_deduplicated_set() {
    let ds = ingest_text(&toy_ntriples());
    let mut out = Vec::new();
    ds.write_ntriples(&mut out).unwrap();
    let again = ingest_text(std::str::from_utf8(&out).unwrap());
    assert_eq!(named(&again), named(&ds));
    assert_eq!(again.graph.edge_count(), ds.graph.edge_count());
}

#[test]
fn gzip_input_matches_plain_input() {
    let dir = tempfile::tempdir().unwrap();
    let text = toy_ntriples();
    fs::write(dir.path().join("g.nt"), &text).unwrap();
    let mut gz = GzEncoder::new(Vec::new(), Compression::default());
    gz.write_all(text.as_bytes()).unwrap();
    fs::write(dir.path().join("g.nt.gz"), gz.finish().unwrap()).unwrap();
    let plain = dataset::load(&[dir.path().join("g.nt")]).unwrap();
    let zipped = dataset::load(&[dir.path().join("g.nt.gz")]).unwrap();
    assert_eq!(formats::encode_graph(&plain), formats::encode_graph(&zipped));
}

#[test]
fn multiple_inputs_merge_into_one_graph() {
    let dir = tempfile::tempdir().unwrap();
    let text = toy_ntriples();
    let (a, b) = text.split_at(text.len() / 2);
    let cut = a.rfind('\n').unwrap() + 1;
    fs::write(dir.path().join("a.nt"), &text[..cut]).unwrap();
    fs::write(dir.path().join("b.nt"), [&a[cut..], b].concat()).unwrap();
    let merged = dataset::load(&[dir.path().join("a.nt"), dir.path().join("b.nt")]).unwrap();
    assert_eq!(named(&merged), named(&ingest_text(&text)));
}

#[test]
fn run_outputs_decode_and_reencode_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    classify_fixture(dir.path(), "");
    linkpred_fixture(dir.path());
    assert_ok(&rrgcn(&["run", "toy.toml"], dir.path()));
    assert_ok(&rrgcn(&["run", "lp.toml"], dir.path()));
    let out = dir.path().join("out");

    let p = out.join("embeddings-seed0.rrem");
    let bytes = fs::read(&p).unwrap();
    let emb = EmbeddingFile::decode(&bytes, &p).unwrap();
    assert_eq!(emb.encode(), bytes);
    assert_eq!((emb.seed, emb.dim, emb.layers, emb.ppv), (0, 16, 2, true));
    let ds = dataset::load(&[dir.path().join("toy.nt")]).unwrap();
    assert_eq!(emb.graph_hash, formats::graph_hash(&ds.graph));

    let p = out.join("model-seed1.rrcm");
    let bytes = fs::read(&p).unwrap();
    let model = ClassifierFile::decode(&bytes, &p).unwrap();
    assert_eq!(model.encode(), bytes);
    assert_eq!(model.manifest_hash, emb.manifest_hash);

    let p = dir.path().join("lp-out/decoder-seed3.rrld");
    let bytes = fs::read(&p).unwrap();
    let lp = LinkPredFile::decode(&bytes, &p).unwrap();
    assert_eq!(lp.encode(), bytes);
    assert_ne!(lp.manifest_hash, formats::NO_MANIFEST);

    // A file of one kind is not accepted as another.
    assert!(ClassifierFile::decode(&fs::read(out.join("embeddings-seed0.rrem")).unwrap(), &p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ingest_cache_export_cycle(nodes in 1usize..25, relations in 1usize..5, edges in 0usize..80, seed in any::<u64>()) {
        let ds = ingest_text(&random_ntriples(nodes, relations, edges, seed));
        let bytes = formats::encode_graph(&ds);
        let back = formats::decode_graph(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(formats::encode_graph(&back), bytes);
        let mut out = Vec::new();
        back.write_ntriples(&mut out).unwrap();
        prop_assert_eq!(named(&ingest_text(std::str::from_utf8(&out).unwrap())), named(&ds));
    }
}
