//! Toy fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const EX: &str = "http://example.org/";

pub fn iri(local: &str) -> String {
    format!("{EX}{local}")
}

/// Two communities of five nodes; `p` links inside the first, `q` inside the
/// second, `bridge` joins them once. Node labels follow the community.
pub fn toy_ntriples() -> String {
    let mut s = String::from("# toy graph\n");
    let link = |s: &mut String, a: usize, r: &str, b: usize| writeln!(s, "<{EX}n{a}> <{EX}{r}> <{EX}n{b}> .").unwrap();
    for i in 0..5 {
        link(&mut s, i, "p", (i + 1) % 5);
        link(&mut s, 5 + i, "q", 5 + (i + 1) % 5);
    }
    link(&mut s, 0, "p", 2);
    link(&mut s, 5, "q", 7);
    link(&mut s, 4, "bridge", 9);
    writeln!(s, "<{EX}n0> <{EX}name> \"zero\"@en .").unwrap();
    writeln!(s, "<{EX}n1> <{EX}name> \"zero\" .").unwrap();
    writeln!(s, "<{EX}n2> <{EX}p> <{EX}n3> .").unwrap();
    writeln!(s, "<{EX}n2> <{EX}p> <{EX}n2> .").unwrap();
    s
}

pub fn toy_labels() -> String {
    let mut s = String::from("node_iri\tlabel\tsplit\n");
    for i in 0..10 {
        let class = if i < 5 { "a" } else { "b" };
        let split = if i % 5 < 3 { "train" } else { "test" };
        writeln!(s, "{EX}n{i}\t{class}\t{split}").unwrap();
    }
    s
}

/// Writes the toy graph, labels and a classify manifest into `dir`.
pub fn classify_fixture(dir: &Path, extra: &str) -> PathBuf {
    fs::write(dir.join("toy.nt"), toy_ntriples()).unwrap();
    fs::write(dir.join("labels.tsv"), toy_labels()).unwrap();
    let manifest = dir.join("toy.toml");
    fs::write(
        &manifest,
        format!(
            "version = 1\ntask = \"classify\"\noutput_dir = \"out\"\nseeds = [0, 1]\n\n\
             [dataset]\ngraph = [\"toy.nt\"]\nlabels = \"labels.tsv\"\n\n\
             [embed]\ndim = 16\nlayers = 2\n{extra}"
        ),
    )
    .unwrap();
    manifest
}

/// Link prediction splits over a ring of 12 entities with two relations.
pub fn linkpred_fixture(dir: &Path) -> PathBuf {
    let (mut train, mut valid, mut test) = (String::new(), String::new(), String::new());
    for i in 0..12 {
        let r = if i % 2 == 0 { "even" } else { "odd" };
        let line = format!("{EX}e{i}\t{EX}{r}\t{EX}e{}\n", (i + 1) % 12);
        match i % 6 {
            4 => valid.push_str(&line),
            5 => test.push_str(&line),
            _ => train.push_str(&line),
        }
        train.push_str(&format!("{EX}e{i}\t{EX}far\t{EX}e{}\n", (i + 3) % 12));
    }
    for (name, text) in [("train.tsv", train), ("valid.tsv", valid), ("test.tsv", test)] {
        fs::write(dir.join(name), text).unwrap();
    }
    let manifest = dir.join("lp.toml");
    fs::write(
        &manifest,
        "version = 1\ntask = \"linkpred\"\noutput_dir = \"lp-out\"\nseeds = [3]\n\n\
         [dataset]\ntrain = \"train.tsv\"\nvalid = \"valid.tsv\"\ntest = \"test.tsv\"\n\n\
         [embed]\ndim = 16\nlayers = 1\n\n\
         [linkpred]\npca_dim = 8\nwidth = 16\ndepth = 2\nmax_epochs = 5\nbatch_size = 8\n",
    )
    .unwrap();
    manifest
}

pub fn rrgcn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrgcn")).args(args).current_dir(cwd).output().expect("spawn rrgcn")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status.code(), stdout(o), String::from_utf8_lossy(&o.stderr));
}
