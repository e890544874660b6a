mod common;

use std::fs;

use common::*;
use rrgcn::formats::{ClassifierFile, EmbeddingFile, LinkPredFile};
use rrgcn::pipeline::{METRICS_FILE, RESOLVED_MANIFEST};

#[test]
fn classify_manifest_produces_embeddings_model_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    classify_fixture(dir.path(), "");
    let o = rrgcn(&["run", "toy.toml"], dir.path());
    assert_ok(&o);
    let out = dir.path().join("out");
    for seed in [0, 1] {
        let emb = EmbeddingFile::read(&out.join(format!("embeddings-seed{seed}.rrem"))).unwrap();
        assert_eq!(emb.matrix.shape(), (emb.matrix.rows(), 32));
        let model = ClassifierFile::read(&out.join(format!("model-seed{seed}.rrcm"))).unwrap();
        assert_eq!(model.classes, vec!["a".to_owned(), "b".to_owned()]);
        assert_eq!(model.embed_seed, seed);
    }
    let metrics = fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    assert!(metrics.starts_with("# manifest_sha256="), "{metrics}");
    assert!(out.join(RESOLVED_MANIFEST).exists());
    assert!(!out.join(".rrgcn.lock").exists());
}

#[test]
fn same_manifest_twice_gives_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        classify_fixture(d.path(), "");
        assert_ok(&rrgcn(&["run", "toy.toml"], d.path()));
    }
    for name in [METRICS_FILE, "embeddings-seed1.rrem", "model-seed0.rrcm", "manifest.sha256", RESOLVED_MANIFEST] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn over_budget_run_is_refused_with_exit_code_3() {
    let dir = tempfile::tempdir().unwrap();
    classify_fixture(dir.path(), "memory_budget_gb = 0.000000001\n");
    let o = rrgcn(&["run", "toy.toml"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("GB"));
    assert!(!dir.path().join("out/embeddings-seed0.rrem").exists());
}

#[test]
fn invalid_configuration_exits_with_2_and_bad_input_with_4() {
    let dir = tempfile::tempdir().unwrap();
    classify_fixture(dir.path(), "");
    assert_eq!(rrgcn(&["run", "toy.toml", "--dim", "0"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.nt"), "<a> <b> <c> .\n<a> <b> oops .\n").unwrap();
    let o = rrgcn(&["stats", "bad.nt"], dir.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_accepts_a_run_and_flags_tampering() {
    let dir = tempfile::tempdir().unwrap();
    classify_fixture(dir.path(), "");
    assert_ok(&rrgcn(&["run", "toy.toml"], dir.path()));
    let o = rrgcn(&["verify", "out"], dir.path());
    assert_ok(&o);
    assert!(stdout(&o).contains("model-seed0.rrcm"));
    let metrics = dir.path().join("out").join(METRICS_FILE);
    let text = fs::read_to_string(&metrics).unwrap().replacen("manifest_sha256=", "manifest_sha256=00", 1);
    fs::write(&metrics, text).unwrap();
    assert!(!rrgcn(&["verify", "out"], dir.path()).status.success());
}

#[test]
fn existing_lock_refuses_a_second_writer() {
    let dir = tempfile::tempdir().unwrap();
    classify_fixture(dir.path(), "");
    fs::create_dir_all(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/.rrgcn.lock"), "").unwrap();
    assert_eq!(rrgcn(&["run", "toy.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn ingest_stats_and_preprocessing_commands() {
    let dir = tempfile::tempdir().unwrap();
    classify_fixture(dir.path(), "");
    assert_ok(&rrgcn(&["ingest", "toy.nt", "-o", "toy.rrgx"], dir.path()));
    let o = rrgcn(&["stats", "toy.rrgx"], dir.path());
    assert_ok(&o);
    // 11 entities (ten nodes plus one merged literal), 4 relations, 15 edges
    // after dropping the self-loop.
    let s = stdout(&o);
    let last = s.lines().last().unwrap();
    let cols: Vec<&str> = last.split_whitespace().collect();
    assert_eq!(&cols[..3], &["11", "4", "15"], "{s}");

    assert_ok(&rrgcn(&["prune", "toy.rrgx", "--labels", "labels.tsv", "--hops", "1", "-o", "pruned.rrgx"], dir.path()));
    assert_ok(&rrgcn(&["cut", "toy.rrgx", "--threshold", "1", "-o", "cut.rrgx"], dir.path()));
    fs::write(dir.path().join("imp.tsv"), format!("{}\t1.0\n{}\t0.7\n{}\t0.1\n", iri("p"), iri("q"), iri("name"))).unwrap();
    assert_ok(&rrgcn(&["filter-relations", "toy.rrgx", "--importance", "imp.tsv", "-o", "filtered.rrgx"], dir.path()));
    let f = rrgcn::dataset::load(&[dir.path().join("filtered.rrgx")]).unwrap();
    assert_eq!(f.relations.len(), 2);
    assert_eq!(f.graph.edge_count(), 12);

    assert_ok(&rrgcn(&["embed", "toy.rrgx", "--dim", "4", "--layers", "1", "--no-ppv", "-o", "e.rrem", "--tsv", "e.tsv"], dir.path()));
    let e = EmbeddingFile::read(&dir.path().join("e.rrem")).unwrap();
    assert_eq!(e.matrix.shape(), (11, 4));
    let tsv = fs::read_to_string(dir.path().join("e.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 11);
    assert_eq!(tsv.lines().next().unwrap().split('\t').count(), 5);
}

#[test]
fn linkpred_manifest_writes_decoder_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    linkpred_fixture(dir.path());
    let o = rrgcn(&["run", "lp.toml"], dir.path());
    assert_ok(&o);
    let out = dir.path().join("lp-out");
    let d = LinkPredFile::read(&out.join("decoder-seed3.rrld")).unwrap();
    assert_eq!(d.pca.as_ref().map(|p| p.k), Some(8));
    let metrics = fs::read_to_string(out.join(METRICS_FILE)).unwrap();
    assert!(metrics.contains("constant_fmrr"), "{metrics}");
    assert!(out.join("per_relation.tsv").exists());
    assert_ok(&rrgcn(&["verify", "lp-out"], dir.path()));
}

#[test]
fn estimate_memory_prints_gigabytes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrgcn(&["estimate-memory", "--mode", "params", "--entities", "4470778", "--relations", "68", "--bases", "40", "--dim", "16"], dir.path());
    assert_ok(&o);
    assert!(stdout(&o).starts_with("22.89 GB"), "{}", stdout(&o));
}

#[test]
fn grid_and_linkpred_subcommands_run_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    classify_fixture(dir.path(), "");
    let o = rrgcn(
        &["grid", "--graph", "toy.nt", "--labels", "labels.tsv", "--seeds", "0,1", "--layer-grid", "1,2", "--dim-grid", "4,8", "--out", "g"],
        dir.path(),
    );
    assert_ok(&o);
    let grid = fs::read_to_string(dir.path().join("g/grid.tsv")).unwrap();
    assert_eq!(grid.lines().filter(|l| l.ends_with("\ttrue")).count(), 1, "{grid}");
    assert_eq!(grid.lines().count(), 2 + 4);

    linkpred_fixture(dir.path());
    let args = ["linkpred", "--train", "train.tsv", "--valid", "valid.tsv", "--test", "test.tsv", "--dim", "8", "--pca-dim", "4"];
    assert_ok(&rrgcn(&[&args[..], &["--width", "8", "--max-epochs", "2", "--out", "lp"]].concat(), dir.path()));
    assert!(dir.path().join("lp/decoder-seed0.rrld").exists());
    // A manifest for one task is refused by another task's subcommand.
    assert_eq!(rrgcn(&["linkpred", "--manifest", "toy.toml"], dir.path()).status.code(), Some(2));
}
