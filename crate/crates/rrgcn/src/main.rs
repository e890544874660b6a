use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rrgcn::dataset::{self, Dataset};
use rrgcn::formats::{self, EmbeddingFile, NO_MANIFEST};
use rrgcn::manifest::{
    ClassifySection, DatasetSection, EmbedSection, LinkPredSection, Manifest, Overrides, PreprocessSection, Task,
    MANIFEST_VERSION,
};
use rrgcn::pipeline::{self, check_capacity};
use rrgcn::report::table;
use rrgcn::tsv::{read_importance, read_labels};
use rrgcn::{Error, Result};
use rrgcn_core::embed::{bytes_to_gb, estimate_memory, MemoryMode};
use rrgcn_core::graph::relations_above_fraction;
use rrgcn_core::linkpred::LinkPredPreset;
use rrgcn_core::{embed, EmbedConfig};

/// Untrained relational graph-convolutional embeddings for knowledge graphs.
#[derive(Parser)]
#[command(name = "rrgcn", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse N-Triples (plain or gzip) into a binary graph cache.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Dataset statistics.
    Stats {
        #[arg(required = true)]
        graph: Vec<PathBuf>,
    },
    /// Keep nodes within n undirected hops of the labelled nodes.
    Prune {
        #[arg(required = true)]
        graph: Vec<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        hops: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Remove unlabelled nodes of total degree <= threshold (single pass).
    Cut {
        #[arg(required = true)]
        graph: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        threshold: u32,
        /// Labelled nodes are never removed.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Keep relations whose importance is at least a fraction of the maximum.
    FilterRelations {
        #[arg(required = true)]
        graph: Vec<PathBuf>,
        #[arg(long)]
        importance: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        fraction: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Compute node embeddings.
    Embed {
        #[arg(required = true)]
        graph: Vec<PathBuf>,
        #[command(flatten)]
        embed: EmbedArgs,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write `node_iri<TAB>v1<TAB>...` rows here.
        #[arg(long)]
        tsv: Option<PathBuf>,
    },
    /// Node classification with a fixed (n, e).
    Classify(TaskArgs),
    /// Node classification with a grid search over n and e.
    Grid {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        layer_grid: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "256,512")]
        dim_grid: Vec<usize>,
    },
    /// Link prediction: embeddings, PCA, decoder training, filtered ranking.
    Linkpred {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Sizes of the decoder head.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        pca_dim: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Execute an experiment manifest.
    Run {
        manifest: PathBuf,
        #[command(flatten)]
        embed: EmbedArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Memory needed by a trained R-GCN or by the random model.
    EstimateMemory {
        #[arg(long, value_enum, default_value = "peak")]
        mode: Mode,
        #[arg(long, required_unless_present = "graph")]
        entities: Option<usize>,
        /// Original relations (each also gets an inverse).
        #[arg(long, conflicts_with = "directed_relations")]
        relations: Option<usize>,
        #[arg(long)]
        directed_relations: Option<usize>,
        #[arg(long)]
        dim: usize,
        /// Basis count for `--mode params`.
        #[arg(long, default_value_t = 1)]
        bases: usize,
        /// Layers for `--mode activations`.
        #[arg(long, default_value_t = 1)]
        layers: usize,
        /// Take entity and relation counts from a graph.
        #[arg(long, num_args = 1..)]
        graph: Vec<PathBuf>,
    },
    /// Check that every output of a run carries its manifest hash.
    Verify { dir: PathBuf },
}

#[derive(Args, Default)]
struct EmbedArgs {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Append PPV features (default).
    #[arg(long, overrides_with = "no_ppv")]
    ppv: bool,
    #[arg(long, overrides_with = "ppv")]
    no_ppv: bool,
    /// Add each node's own state to every message.
    #[arg(long)]
    residual: bool,
    /// Refuse embeddings whose peak memory exceeds this (decimal GB).
    #[arg(long)]
    memory_budget_gb: Option<f64>,
}

impl EmbedArgs {
    fn overrides(&self, out: Option<PathBuf>) -> Overrides {
        Overrides {
            seed: self.seed,
            dim: self.dim,
            layers: self.layers,
            ppv: if self.no_ppv { Some(false) } else if self.ppv { Some(true) } else { None },
            residual: self.residual.then_some(true),
            memory_budget_gb: self.memory_budget_gb,
            output_dir: out,
        }
    }

    fn config(&self) -> EmbedConfig {
        let mut m = default_embed_section();
        let o = self.overrides(None);
        m.dim = o.dim.unwrap_or(m.dim);
        m.layers = o.layers.unwrap_or(m.layers);
        EmbedConfig::new(m.dim, m.layers, self.seed.unwrap_or(0))
            .with_ppv(o.ppv.unwrap_or(true))
            .with_residual(self.residual)
            .with_memory_budget(self.memory_budget_gb.map(rrgcn::manifest::gb_to_bytes))
    }
}

/// Task flags; a `--manifest` supplies defaults that flags override.
#[derive(Args)]
struct TaskArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    graph: Vec<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Embedding seeds, comma separated (one run each).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Embedding 2048, PCA 512, width 256.
    Desk,
    /// Embedding 32000, PCA 8192, width 2048.
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Trained R-GCN basis parameters.
    Params,
    /// Trained R-GCN stored activations.
    Activations,
    /// Random model peak working set.
    Peak,
}

fn default_embed_section() -> EmbedSection {
    EmbedSection { dim: 512, layers: 2, ppv: true, residual: false, memory_budget_gb: None, export_tsv: false }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write_cache(path: &Path, ds: &Dataset) -> Result<()> {
    formats::write_graph_file(path, ds)?;
    println!(
        "wrote {}: {} entities, {} relations, {} edges",
        path.display(),
        ds.entities.len(),
        ds.relations.len(),
        ds.graph.edge_count()
    );
    Ok(())
}

fn labelled_nodes(path: &Path, ds: &Dataset) -> Result<Vec<u32>> {
    Ok(read_labels(path, &ds.entities)?.split.labelled_nodes())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest { inputs, output } => {
            let (ds, report) = dataset::ingest_paths(&inputs)?;
            log::info!("{report:?}");
            write_cache(&output, &ds)
        }
        Command::Stats { graph } => {
            let ds = dataset::load(&graph)?;
            let s = ds.graph.stats();
            let header = ["entities", "relations", "edges", "mean_degree(|E|/|V|)", "mean_degree(2|E|/|V|)", "max_degree"];
            let row = vec![
                s.entities.to_string(),
                s.relations.to_string(),
                s.edges.to_string(),
                format!("{:.2}", s.mean_degree_edges_per_node),
                format!("{:.2}", s.mean_degree_incident),
                s.max_degree.to_string(),
            ];
            print!("{}", table(&header, &[row]));
            Ok(())
        }
        Command::Prune { graph, labels, hops, output } => {
            if hops == 0 {
                return Err(Error::Validation("--hops must be at least 1".into()));
            }
            let ds = dataset::load(&graph)?;
            let seeds = labelled_nodes(&labels, &ds)?;
            let (pruned, _) = ds.prune_khop(&seeds, hops)?;
            write_cache(&output, &pruned)
        }
        Command::Cut { graph, threshold, labels, output } => {
            let ds = dataset::load(&graph)?;
            let protected = match labels {
                Some(l) => labelled_nodes(&l, &ds)?,
                None => Vec::new(),
            };
            let (cut, _) = ds.cut_low_degree(threshold, &protected);
            write_cache(&output, &cut)
        }
        Command::FilterRelations { graph, importance, fraction, output } => {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::Validation("--fraction must be in (0, 1]".into()));
            }
            let ds = dataset::load(&graph)?;
            let keep = relations_above_fraction(&read_importance(&importance, &ds.relations)?, fraction);
            if keep.is_empty() {
                return Err(Error::Data("relation filter keeps no relation".into()));
            }
            write_cache(&output, &ds.filter_relations(&keep)?)
        }
        Command::Embed { graph, embed: args, output, tsv } => {
            let cfg = args.config();
            cfg.validate().map_err(|e| Error::Validation(e.to_string()))?;
            let ds = dataset::load(&graph)?;
            check_capacity(&ds.graph, &cfg)?;
            let emb = embed(&ds.graph, &cfg)?;
            if let Some(path) = tsv {
                let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
                let mut w = BufWriter::new(f);
                formats::write_embeddings_tsv(&mut w, &emb.matrix, &ds.entities)
                    .and_then(|_| w.flush())
                    .map_err(|e| Error::io(&path, e))?;
            }
            let (rows, cols) = emb.matrix.shape();
            EmbeddingFile::new(&cfg, &ds.graph, NO_MANIFEST, emb.matrix).write(&output)?;
            println!("wrote {}: {rows} x {cols} (seed {}, n={}, e={}, ppv={})", output.display(), cfg.seed, cfg.layers, cfg.dim, cfg.ppv);
            Ok(())
        }
        Command::Classify(task) => run_task(task, Task::Classify, |_| {}),
        Command::Grid { task, layer_grid, dim_grid } => run_task(task, Task::Classify, |m| {
            m.classify.layer_grid = layer_grid;
            m.classify.dim_grid = dim_grid;
        }),
        Command::Linkpred { task, train, valid, test, preset, pca_dim, width, max_epochs } => {
            run_task(task, Task::Linkpred, |m| {
                m.dataset.train = train.or(m.dataset.train.take());
                m.dataset.valid = valid.or(m.dataset.valid.take());
                m.dataset.test = test.or(m.dataset.test.take());
                if let Some(p) = preset {
                    let p = match p {
                        Preset::Desk => LinkPredPreset::DESK,
                        Preset::Full => LinkPredPreset::FULL,
                    };
                    m.embed.dim = p.embedding_dim / if m.embed.ppv { 2 } else { 1 };
                    m.linkpred.pca_dim = p.pca_dim;
                    m.linkpred.width = p.width;
                    m.linkpred.depth = p.depth;
                }
                m.linkpred.pca_dim = pca_dim.or(m.linkpred.pca_dim);
                m.linkpred.width = width.unwrap_or(m.linkpred.width);
                m.linkpred.max_epochs = max_epochs.unwrap_or(m.linkpred.max_epochs);
            })
        }
        Command::Run { manifest, embed: args, out } => {
            let mut m = Manifest::load(&manifest)?;
            m.apply(&args.overrides(out));
            finish(pipeline::run(&m)?)
        }
        Command::EstimateMemory { mode, entities, relations, directed_relations, dim, bases, layers, graph } => {
            let (entities, directed) = if graph.is_empty() {
                (entities.expect("required by clap"), directed_relations.or(relations.map(|r| 2 * r)).unwrap_or(0))
            } else {
                let ds = dataset::load(&graph)?;
                (entities.unwrap_or(ds.graph.entity_count()), directed_relations.unwrap_or(ds.graph.directed_relation_count()))
            };
            let mode = match mode {
                Mode::Params => MemoryMode::RgcnParams { bases },
                Mode::Activations => MemoryMode::RgcnActivations { layers },
                Mode::Peak => MemoryMode::RrgcnPeak,
            };
            let bytes = estimate_memory(entities, directed, dim, mode)?;
            println!("{:.2} GB ({bytes} bytes)", bytes_to_gb(bytes));
            Ok(())
        }
        Command::Verify { dir } => {
            let v = pipeline::verify(&dir)?;
            for name in &v.checked {
                println!("ok      {name}");
            }
            for p in &v.problems {
                println!("FAILED  {p}");
            }
            if v.problems.is_empty() {
                Ok(())
            } else {
                Err(Error::Data(format!("{} problem(s) in {}", v.problems.len(), dir.display())))
            }
        }
    }
}

fn run_task(args: TaskArgs, task: Task, customise: impl FnOnce(&mut Manifest)) -> Result<()> {
    let mut m = match &args.manifest {
        Some(p) => Manifest::load(p)?,
        None => Manifest {
            version: MANIFEST_VERSION,
            task,
            output_dir: PathBuf::from("rrgcn-out"),
            seeds: vec![0],
            dataset: DatasetSection::default(),
            preprocess: PreprocessSection::default(),
            embed: default_embed_section(),
            classify: ClassifySection::default(),
            linkpred: LinkPredSection::default(),
            base_dir: std::env::current_dir().map_err(|e| Error::io(".", e))?,
        },
    };
    if m.task != task {
        return Err(Error::Validation(format!("manifest task is {:?}, this subcommand runs {task:?}", m.task)));
    }
    let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    let abs = |p: PathBuf| if p.is_absolute() { p } else { cwd.join(p) };
    if !args.graph.is_empty() {
        m.dataset.graph = args.graph.into_iter().map(abs).collect();
    }
    if let Some(l) = args.labels {
        m.dataset.labels = Some(abs(l));
    }
    if !args.seeds.is_empty() {
        m.seeds = args.seeds;
    }
    m.apply(&args.embed.overrides(args.out.map(abs)));
    customise(&mut m);
    finish(pipeline::run(&m)?)
}

fn finish(summary: pipeline::RunSummary) -> Result<()> {
    print!("{}", summary.table);
    println!("outputs in {} (manifest sha256 {})", summary.output_dir.display(), hex::encode(summary.manifest_hash));
    Ok(())
}
