use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use netgame::experiment::{self, Executor, ExperimentError, Scenario};
use netgame::graph::{self, GraphError, Network};

#[derive(Parser)]
#[command(
    name = "netgame",
    version,
    about = "Networked iterated prisoner's dilemma experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the built-in scenario names.
    ListPresets,
    /// Run a preset or a `key = value` scenario file.
    Run(RunArgs),
    /// Generate a network and write it as an edge list.
    Netgen(NetgenArgs),
    /// Report degree statistics and assortativity of an edge list.
    Measure(MeasureArgs),
    /// Pearson correlation of achieved assortativity and mean final fraction.
    Correlate(CorrelateArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Preset name or path to a scenario file.
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    /// Use the 200-node, 30 000-step profile.
    #[arg(long)]
    reduced: bool,
    /// Output directory (default: results/<scenario name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    WellMixed,
    ScaleFree,
}

#[derive(clap::Args)]
struct NetgenArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    /// Degree of the regular graph.
    #[arg(long, default_value_t = 8)]
    degree: usize,
    /// Edges per new node of the scale-free graph.
    #[arg(long, default_value_t = 1)]
    attach: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Rewire towards this assortativity.
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_steps: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write a `degree,count` histogram.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(clap::Args)]
struct MeasureArgs {
    edges: PathBuf,
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CorrelateArgs {
    /// Scenario output directory, or a CSV whose first two columns are x,y.
    input: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Csv { path: PathBuf, line: usize, msg: String },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Experiment(e) => e.kind(),
            CliError::Graph(_) => "network",
            CliError::Io { .. } => "io",
            CliError::Csv { .. } => "csv",
        }
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListPresets => {
            experiment::PRESETS.iter().for_each(|p| println!("{p}"));
            Ok(())
        }
        Command::Run(args) => run(args),
        Command::Netgen(args) => netgen(args),
        Command::Measure(args) => measure(args),
        Command::Correlate(args) => correlate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} message=\"{}\"", e.kind(), msg.replace('"', "'"));
            ExitCode::FAILURE
        }
    }
}

fn load_scenario(spec: &str) -> Result<Scenario, CliError> {
    match experiment::preset(spec) {
        Ok(s) => Ok(s),
        Err(ExperimentError::UnknownPreset(name)) => {
            let path = Path::new(spec);
            if !path.is_file() {
                return Err(ExperimentError::UnknownPreset(name).into());
            }
            let text = fs::read_to_string(path).map_err(io_at(path))?;
            Ok(Scenario::parse(&text)?)
        }
        Err(e) => Err(e.into()),
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut s = load_scenario(&args.scenario)?;
    if args.reduced {
        s = s.reduced();
    }
    if let Some(seed) = args.seed {
        s.base_seed = seed;
    }
    if let Some(r) = args.replicates {
        s.replicates = r;
    }
    if let Some(steps) = args.steps {
        s.steps = steps;
    }
    let out = args.out.unwrap_or_else(|| PathBuf::from("results").join(&s.name));
    fs::create_dir_all(&out).map_err(io_at(&out))?;
    let exec = match args.parallel {
        1 => Executor::Sequential,
        n => Executor::Parallel(n),
    };
    let output = experiment::run_scenario(&s, exec, Some(&out))?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    let _ = writeln!(w, "scenario {} -> {}", s.name, out.display());
    for (i, p) in output.result.points.iter().enumerate() {
        let _ = writeln!(
            w,
            "point {i}: rho={:.4} mean_final_fraction_a={:.4} std={:.4} extinct_a={}/{}",
            p.achieved_rho,
            p.mean,
            p.std_dev,
            p.extinct_a,
            p.finals.len()
        );
    }
    if let Some(c) = output.result.correlation {
        let _ = writeln!(w, "correlation={c:.4}");
    }
    Ok(())
}

fn netgen(args: NetgenArgs) -> Result<(), CliError> {
    let mut net = match args.family {
        FamilyArg::WellMixed => graph::regular_random(args.nodes, args.degree, args.seed)?,
        FamilyArg::ScaleFree => graph::barabasi_albert(args.nodes, args.attach, args.seed)?,
    };
    if let Some(target) = args.rho {
        net = graph::rewire_to_assortativity(&net, target, args.tol, args.max_steps, args.seed)?.network;
    }
    let f = fs::File::create(&args.out).map_err(io_at(&args.out))?;
    net.write_edge_list(BufWriter::new(f)).map_err(io_at(&args.out))?;
    report(&net, args.histogram.as_deref())
}

fn measure(args: MeasureArgs) -> Result<(), CliError> {
    let f = fs::File::open(&args.edges).map_err(io_at(&args.edges))?;
    let net = Network::read_edge_list(BufReader::new(f))?;
    report(&net, args.histogram.as_deref())
}

fn report(net: &Network, histogram: Option<&Path>) -> Result<(), CliError> {
    let stats = graph::degree_stats(net);
    let rho = graph::assortativity(net)?.rho;
    println!("nodes={}", net.node_count());
    println!("edges={}", net.edge_count());
    println!("mean_degree={}", stats.mean_degree);
    println!("max_degree={}", stats.histogram.last().map_or(0, |h| h.0));
    println!("assortativity={rho}");
    println!("connected={}", net.is_connected());
    if let Some(gamma) = graph::power_law_exponent(&stats.histogram) {
        println!("power_law_exponent={gamma}");
    }
    if let Some(path) = histogram {
        let f = fs::File::create(path).map_err(io_at(path))?;
        stats.write_histogram_csv(BufWriter::new(f)).map_err(io_at(path))?;
    }
    Ok(())
}

fn correlate(args: CorrelateArgs) -> Result<(), CliError> {
    let points = if args.input.is_dir() {
        experiment::aggregate_dir(&args.input)?
            .points
            .iter()
            .map(|p| (p.achieved_rho, p.mean))
            .collect()
    } else {
        read_xy(&args.input)?
    };
    let r = experiment::correlate(&points)?;
    println!("points={}", points.len());
    println!("correlation={r}");
    Ok(())
}

fn read_xy(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let parsed = (|| Some((cols.next()?.parse().ok()?, cols.next()?.parse().ok()?)))();
        match parsed {
            Some(p) => points.push(p),
            None if i == 0 => continue,
            None => {
                return Err(CliError::Csv {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: "expected two numeric columns".into(),
                })
            }
        }
    }
    Ok(points)
}
