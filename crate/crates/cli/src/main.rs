mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use treegnas::graph::load_graph_with_report;
use treegnas::model::TrainConfig;
use treegnas::{
    edge_homophily, make_split, search, ArchitectureParams, GnnEvaluator, MctTree, SearchConfig, SearchSpace,
};

use config::ConfigFile;

#[derive(Parser)]
#[command(name = "treegnas", version, about = "Explainable GNN architecture search with Monte-Carlo trees")]
struct Cli {
    /// Defaults file with one key=value per line; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for splits, sampling and weight initialization.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for the best architecture on a graph.
    Search(SearchArgs),
    /// Print the edge homophily of a graph.
    Homophily {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Train fixed architectures and print their metrics.
    TrainFixed {
        /// Architecture JSON file; repeat to compare several.
        #[arg(long, required = true)]
        arch: Vec<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, value_enum)]
        timing: Option<Timing>,
    },
    /// Print the number of distinct architectures in the search space.
    CountSpace {
        #[arg(long)]
        reduced: bool,
    },
    /// Render a saved tree.json as Graphviz DOT.
    Export {
        /// Path to tree.json.
        tree: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SearchArgs {
    /// Graph directory (meta.tsv, edges.tsv, features.tsv, labels.tsv).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Number of architectures to evaluate.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Exploration constant.
    #[arg(long)]
    c: Option<f64>,
    /// Visits before a tree node is expanded.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    theta: Option<u64>,
    /// Output directory, created if missing [default: treegnas-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Search the reduced space (two layers, two widths, no MLPs).
    #[arg(long)]
    reduced: bool,
    /// `off` records zero training time, making tree.json reproducible.
    #[arg(long, value_enum)]
    timing: Option<Timing>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Timing {
    Wall,
    Off,
}

impl std::str::FromStr for Timing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Timing as ValueEnum>::from_str(s, true)
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(Failure::Usage)?,
        None => ConfigFile::default(),
    };
    let seed = file.pick("seed", cli.seed).map_err(Failure::Usage)?.unwrap_or(0);
    let graph_dir = |flag: Option<PathBuf>| -> Result<PathBuf, Failure> {
        file.pick("graph", flag).map_err(Failure::Usage)?.ok_or_else(|| Failure::Usage("--graph is required".into()))
    };
    let timing = |flag: Option<Timing>| -> Result<Timing, Failure> {
        Ok(file.pick("timing", flag).map_err(Failure::Usage)?.unwrap_or(Timing::Wall))
    };

    match cli.command {
        Command::Search(args) => {
            let graph = graph_dir(args.graph.clone())?;
            let timing = timing(args.timing)?;
            cmd_search(&file, args, graph, seed, timing)
        }
        Command::Homophily { graph } => {
            let g = load_graph(&graph_dir(graph)?)?;
            println!("{:.4}", edge_homophily(&g)?);
            Ok(())
        }
        Command::TrainFixed { arch, graph, timing: t } => cmd_train_fixed(&arch, &graph_dir(graph)?, seed, timing(t)?),
        Command::CountSpace { reduced } => {
            let reduced = reduced || file.pick::<bool>("reduced", None).map_err(Failure::Usage)?.unwrap_or(false);
            let space = if reduced { SearchSpace::reduced() } else { SearchSpace::default() };
            println!("{}", space.count());
            Ok(())
        }
        Command::Export { tree, out } => {
            let text = std::fs::read_to_string(&tree).map_err(|e| format!("cannot read {}: {e}", tree.display()))?;
            let dot = MctTree::from_json(&text)?.to_dot();
            match out {
                Some(path) => write_atomic(&path, &dot)?,
                None => print!("{dot}"),
            }
            Ok(())
        }
    }
}

fn train_config(timing: Timing) -> TrainConfig {
    TrainConfig { measure_time: timing == Timing::Wall, ..TrainConfig::default() }
}

fn cmd_search(file: &ConfigFile, args: SearchArgs, graph: PathBuf, seed: u64, timing: Timing) -> Result<(), Failure> {
    let usage = Failure::Usage;
    let trials = file.pick("trials", args.trials).map_err(usage)?.unwrap_or(1000);
    if trials == 0 {
        return Err(Failure::Usage("trials must be at least 1".into()));
    }
    let theta = file.pick("theta", args.theta).map_err(usage)?.unwrap_or(10);
    if theta == 0 {
        return Err(Failure::Usage("theta must be at least 1".into()));
    }
    let c = file.pick("c", args.c).map_err(usage)?.unwrap_or(std::f64::consts::SQRT_2);
    if !(c.is_finite() && c >= 0.0) {
        return Err(Failure::Usage(format!("c must be finite and non-negative, got {c}")));
    }
    let out = file.pick("out", args.out).map_err(usage)?.unwrap_or_else(|| PathBuf::from("treegnas-out"));
    let reduced = args.reduced || file.pick::<bool>("reduced", None).map_err(usage)?.unwrap_or(false);

    let start = Instant::now();
    let g = load_graph(&graph)?;
    let homophily = edge_homophily(&g).ok();
    let split = make_split(&g, seed)?;
    let evaluator = GnnEvaluator::new(g, split, train_config(timing));
    let cfg = SearchConfig {
        c,
        theta,
        trials: trials as usize,
        seed,
        space: if reduced { SearchSpace::reduced() } else { SearchSpace::default() },
    };
    let report = search(&cfg, &evaluator)?;
    let elapsed = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    write_atomic(&out.join("best_architecture.json"), &(report.best_architecture.to_json() + "\n"))?;
    write_atomic(&out.join("tree.json"), &(report.tree.to_json() + "\n"))?;
    write_atomic(&out.join("tree.dot"), &report.tree.to_dot())?;
    write_atomic(&out.join("trials.jsonl"), &report.trials_jsonl())?;

    let mut text = String::new();
    text.push_str(&format!("graph: {}\n", graph.display()));
    text.push_str(&match homophily {
        Some(h) => format!("homophily: {h:.4}\n"),
        None => "homophily: undefined\n".to_string(),
    });
    text.push_str(&format!("trials: {}\nc: {c}\ntheta: {theta}\nseed: {seed}\n", report.total_models()));
    text.push_str(&format!("best_trial: {}\n", report.best_trial));
    text.push_str(&format!("best_val_auc: {:.6}\n", report.best_result.val_auc));
    text.push_str(&format!("best_test_auc: {:.6}\n", report.best_result.test_auc));
    text.push_str(&format!("best_architecture: {}\n", report.best_architecture));
    text.push_str(&format!("wall_seconds: {elapsed:.3}\n"));
    text.push_str("\n[selection ratios]\n");
    text.push_str(&report.importance.ratios_text());
    write_atomic(&out.join("report.txt"), &text)?;

    println!(
        "best val AUC {:.4}, test AUC {:.4}: {}",
        report.best_result.val_auc, report.best_result.test_auc, report.best_architecture
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_train_fixed(archs: &[PathBuf], graph: &Path, seed: u64, timing: Timing) -> Result<(), Failure> {
    let parsed = archs
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            ArchitectureParams::from_json(&text).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let g = load_graph(graph)?;
    let split = make_split(&g, seed)?;
    let cfg = train_config(timing);
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    for (path, arch) in archs.iter().zip(&parsed) {
        let (_, r) = treegnas::train_model(arch, &g, &split, seed, &cfg)?;
        // Metrics go to stdout and stay reproducible; timing goes to stderr.
        let line = serde_json::json!({
            "arch": path.display().to_string(),
            "val_auc": r.val_auc,
            "test_auc": r.test_auc,
            "epochs_run": r.epochs_run,
            "final_epoch_loss": r.final_epoch_loss,
            "diverged": r.diverged,
        });
        writeln!(stdout, "{line}")?;
        eprintln!("{}: train_seconds={:.3}", path.display(), r.train_seconds);
    }
    Ok(())
}

/// Loads a graph, warning on stderr about merged duplicate edges.
fn load_graph(dir: &Path) -> Result<treegnas::Graph, Failure> {
    let (g, report) = load_graph_with_report(dir)?;
    if report.duplicate_edges > 0 {
        eprintln!("warning: {}: merged {} duplicate edge lines", dir.display(), report.duplicate_edges);
    }
    Ok(g)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
