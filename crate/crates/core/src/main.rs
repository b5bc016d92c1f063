use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use pegc::embedding::{EigenOrder, EmbeddingScale};
use pegc::graph::{self, EdgeFormat, Graph, Partition};
use pegc::kmedian;
use pegc::metrics::{self, MetricsReport};
use pegc::noise::derive_seed;
use pegc::pipeline::{self, PipelineConfig, PrivacyBudget, ResultDocument};
use pegc::sbm::generate_sbm;
use pegc::sdp::SdpConfig;
use pegc::Error;

/// Differentially private, explainable graph clustering.
#[derive(Parser)]
#[command(name = "pegc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the result document.
    Run(RunArgs),
    /// Score a clustering against ground-truth labels.
    Eval(EvalArgs),
    /// Generate a stochastic block model graph with planted labels.
    Sbm(SbmArgs),
    /// Compare initial and final k-median cost across seeding strategies.
    Initcost(InitcostArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Edge list, one `u<sep>v` pair per line.
    #[arg(long)]
    graph: PathBuf,
    /// Input format; inferred from the extension when absent.
    #[arg(long)]
    format: Option<EdgeFormat>,
    /// Map arbitrary vertex ids to a dense range by first appearance.
    #[arg(long)]
    remap_ids: bool,
}

impl GraphArgs {
    fn format_for(&self, path: &Path) -> EdgeFormat {
        self.format.unwrap_or_else(|| EdgeFormat::from_path(path))
    }

    fn load(&self) -> Result<Graph, Error> {
        let text = read(&self.graph)?;
        let format = self.format_for(&self.graph);
        if self.remap_ids {
            graph::load_graph_remapped(&text, format)
        } else {
            graph::load_graph(&text, format)
        }
    }
}

#[derive(Args)]
struct PrivacyArgs {
    /// Total privacy budget, split ε/2 embedding, ε/4 critical set, ε/4 tree.
    #[arg(long, required_unless_present = "privacy_disabled")]
    epsilon: Option<f64>,
    /// Turn every noise source off. Must be requested explicitly.
    #[arg(long, conflicts_with = "epsilon")]
    privacy_disabled: bool,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
}

impl PrivacyArgs {
    fn budget(&self) -> Result<PrivacyBudget, Error> {
        match self.epsilon {
            Some(eps) if !self.privacy_disabled => PrivacyBudget::split(eps, self.delta),
            _ => Ok(PrivacyBudget {
                delta: self.delta,
                ..PrivacyBudget::disabled()
            }),
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trade-off between cut cost and the balance regulariser.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Volume-balance lower bound.
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    /// Cost exponent (1 for k-median, 2 for squared distances).
    #[arg(long, default_value_t = 1)]
    p: u32,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Projection dimension, defaults to min(k, 20).
    #[arg(long)]
    d_prime: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda_p_alpha: f64,
    #[arg(long, default_value = "largest")]
    eigen_order: EigenOrder,
    #[arg(long, default_value = "volume")]
    embedding_scale: EmbeddingScale,
    #[arg(long, default_value_t = 5000)]
    sdp_max_iter: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
}

impl ModelArgs {
    fn config(&self, budget: PrivacyBudget) -> PipelineConfig {
        PipelineConfig {
            sdp: SdpConfig {
                lambda: self.lambda,
                b: self.b,
                max_iterations: self.sdp_max_iter,
                ..SdpConfig::default()
            },
            eigen_order: self.eigen_order,
            embedding_scale: self.embedding_scale,
            p: self.p,
            alpha: self.alpha,
            beta: self.beta,
            d_prime: self.d_prime,
            lambda_p_alpha: self.lambda_p_alpha,
            kmedian_max_iter: self.max_iter,
            ..PipelineConfig::new(self.k, budget, self.seed)
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Vertices to explain (external ids, comma separated).
    #[arg(long, value_delimiter = ',')]
    query: Vec<u64>,
    /// Ground-truth labels; adds a metrics block to the output.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Result file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Result document produced by `run`.
    #[arg(long, required_unless_present = "pred", conflicts_with = "pred")]
    result: Option<PathBuf>,
    /// Predicted labels as `vertex<sep>label`.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Ground-truth labels as `vertex<sep>label`.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    format: Option<EdgeFormat>,
}

#[derive(Args)]
struct SbmArgs {
    /// Block sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    blocks: Vec<usize>,
    #[arg(long)]
    p_in: f64,
    #[arg(long)]
    p_out: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    graph_out: PathBuf,
    #[arg(long)]
    labels_out: PathBuf,
}

#[derive(Args)]
struct InitcostArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Number of consecutive seeds starting at `--seed`.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::InvalidConfig(_) => 2,
        Error::Io(_)
        | Error::Json(_)
        | Error::MalformedLine { .. }
        | Error::SelfLoop { .. }
        | Error::EmptyGraph
        | Error::LabelMismatch(_)
        | Error::InvalidPartition(_)
        | Error::DimensionMismatch { .. }
        | Error::DegreeZero { .. } => 3,
        _ => 4,
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let g = args.graph.load()?;
    let cfg = args.model.config(args.privacy.budget()?);
    let queries = args
        .query
        .iter()
        .map(|&q| {
            g.dense_id(q)
                .ok_or_else(|| Error::InvalidConfig(format!("query vertex {q} is not in the graph")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    info!(
        "graph: {} vertices, {} edges; k = {}",
        g.vertex_count(),
        g.edge_count(),
        cfg.k
    );
    let out = pipeline::run_pipeline(&g, &queries, &cfg)?;
    let mut doc = out.document(&g, &cfg);
    if let Some(path) = &args.labels {
        let truth = graph::load_labels(&read(path)?, args.graph.format_for(path), &g)?;
        doc.metrics = Some(metrics::compute_metrics(&out.partition, &truth)?);
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn eval(args: &EvalArgs) -> Result<MetricsReport, Error> {
    let format_for = |p: &Path| args.format.unwrap_or_else(|| EdgeFormat::from_path(p));
    let (ids, pred) = match (&args.result, &args.pred) {
        (Some(path), _) => {
            let doc: ResultDocument = serde_json::from_str(&read(path)?)?;
            let pred = Partition::new(doc.assignment, doc.k)?;
            (doc.vertex_ids, pred)
        }
        (None, Some(path)) => {
            let mut labels = graph::parse_labels(&read(path)?, format_for(path))?;
            labels.sort_by_key(|(v, _)| *v);
            labels.dedup_by_key(|(v, _)| *v);
            let ids: Vec<u64> = labels.iter().map(|(v, _)| *v).collect();
            let pred = graph::partition_for_ids(&ids, &labels)?;
            (ids, pred)
        }
        (None, None) => unreachable!("clap requires one of --result and --pred"),
    };
    let truth = graph::partition_for_ids(
        &ids,
        &graph::parse_labels(&read(&args.labels)?, format_for(&args.labels))?,
    )?;
    metrics::compute_metrics(&pred, &truth)
}

fn sbm(args: &SbmArgs) -> Result<(), Error> {
    let (g, truth) = generate_sbm(&args.blocks, args.p_in, args.p_out, args.seed)?;
    let sep = |p: &Path| match EdgeFormat::from_path(p) {
        EdgeFormat::Csv => ",",
        EdgeFormat::Tsv => "\t",
    };
    let s = sep(&args.graph_out);
    let edges: String = g.edges().iter().map(|(u, v)| format!("{u}{s}{v}\n")).collect();
    fs::write(&args.graph_out, edges)?;
    let s = sep(&args.labels_out);
    let labels: String = truth
        .assignment()
        .iter()
        .enumerate()
        .map(|(u, c)| format!("{u}{s}{c}\n"))
        .collect();
    fs::write(&args.labels_out, labels)?;
    info!("wrote {} vertices and {} edges", g.vertex_count(), g.edge_count());
    Ok(())
}

fn initcost(args: &InitcostArgs) -> Result<(), Error> {
    let g = args.graph.load()?;
    let budget = args.privacy.budget()?;
    let base = args.model.config(budget);
    let gram = pipeline::solve(&g, &base)?;
    let k = base.k;
    let p = base.p;
    let iters = base.kmedian_max_iter;
    println!("seed\tmethod\tinitial_cost\tfinal_cost");
    for offset in 0..args.seeds {
        let seed = base.seed + offset;
        let cfg = PipelineConfig { seed, ..base.clone() };
        let out = match pipeline::run_with_gram(&g, &gram, &[], &cfg) {
            Ok(out) => out,
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                continue;
            }
        };
        let cs = &out.critical_set;
        let rows = [
            ("hst", out.model.initial_cost(), out.model.cost),
            seeded(cs, &kmedian::uniform_centers(cs.len(), k, derive_seed(seed, 100))?, k, iters, p, "uniform")?,
            seeded(cs, &kmedian::farthest_point_centers(&cs.points, k, derive_seed(seed, 101))?, k, iters, p, "farthest")?,
        ];
        for (name, initial, fin) in rows {
            println!("{seed}\t{name}\t{initial:.6}\t{fin:.6}");
        }
    }
    Ok(())
}

fn seeded(
    cs: &pegc::coreset::CriticalSet,
    init: &[usize],
    k: usize,
    iters: usize,
    p: u32,
    name: &'static str,
) -> Result<(&'static str, f64, f64), Error> {
    let model = kmedian::kmedian(&cs.points, &cs.weights, k, init, iters, p)?;
    Ok((name, model.initial_cost(), model.cost))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PEGC_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a).and_then(|m| {
            println!("{}", serde_json::to_string_pretty(&m)?);
            Ok(())
        }),
        Command::Sbm(a) => sbm(a),
        Command::Initcost(a) => initcost(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
