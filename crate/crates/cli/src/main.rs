use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use whitener_core::coloring::find_legal_coloring;
use whitener_core::experiments::{
    ColoringSource, CountSpec, Ensemble, ExperimentSpec, QuasiSpec, RingDemoSpec, SpSettings, SpSingleSpec,
    SweepSpec, TheoremBSpec, TheoremCSpec, WORKERS_ENV,
};
use whitener_core::graph::{generate_planted_graph, generate_random_graph};
use whitener_core::io::Instance;
use whitener_core::survey::SpInit;
use whitener_core::whitening::{directional_from_coloring, whiten_directional_with_order, whiten_with_order};
use whitener_core::{Coloring, Error};

#[derive(Parser)]
#[command(name = "whitener", version, about = "Whitening and survey-propagation experiments for random-graph coloring")]
struct Cli {
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Output format of experiment reports.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for experiment campaigns.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random graph in the text instance format.
    Gen(GenArgs),
    /// Find a legal coloring by local search.
    Color(ColorArgs),
    /// Whiten the coloring of an instance.
    Whiten(WhitenArgs),
    /// Min-sum residual trace from a k-stable configuration.
    Quasi(QuasiArgs),
    /// One survey-propagation run.
    Sp(SpArgs),
    /// Exhaustive whitening counts next to the survey complexity.
    Count(CountArgs),
    /// Phase sweep over the edge density.
    Sweep(SweepArgs),
    /// Colorings differing inside a tree region.
    TheoremB(TheoremBArgs),
    /// Colorings differing near a random node, as a function of size.
    TheoremC(TheoremCArgs),
    /// Odd rings with two colors.
    RingDemo(RingDemoArgs),
    /// Run an experiment described by a JSON spec file.
    Run {
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl GraphArgs {
    fn edges(&self) -> Result<usize, Error> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidSpec(format!("alpha = {} must be finite and >= 0", self.alpha)));
        }
        Ok((self.alpha * self.n as f64).round() as usize)
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 3)]
    q: usize,
    /// Hide a uniformly random coloring and emit it with the graph.
    #[arg(long)]
    planted: bool,
}

#[derive(Args)]
struct ColorArgs {
    /// Instance file; `-` for standard input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_steps: u64,
    #[arg(long, default_value_t = whitener_core::coloring::DEFAULT_NOISE)]
    noise: f64,
}

#[derive(Args)]
struct WhitenArgs {
    /// Instance file with a coloring; `-` for standard input.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    directional: bool,
    /// Random update order instead of first-in first-out.
    #[arg(long)]
    order_seed: Option<u64>,
    /// Add a `# fingerprint:` line with the SHA-256 of the result.
    #[arg(long)]
    emit_fingerprint: bool,
}

#[derive(Args)]
struct QuasiArgs {
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    b: usize,
    #[arg(long, default_value_t = 100)]
    sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    UniformRandom,
    AllWhite,
    FromWhiteningEnsemble,
}

#[derive(Args)]
struct SpFlags {
    #[arg(long, default_value_t = 0.2)]
    damping: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_sweeps: usize,
}

impl SpFlags {
    fn settings(&self) -> SpSettings {
        SpSettings {
            damping: self.damping,
            tol: self.tol,
            max_sweeps: self.max_sweeps,
        }
    }
}

#[derive(Args)]
struct SpArgs {
    #[arg(long, default_value_t = 3)]
    q: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "uniform-random")]
    init: InitArg,
    #[command(flatten)]
    sp: SpFlags,
    /// Colorings sought for `--init from-whitening-ensemble`.
    #[arg(long, default_value_t = 20)]
    ensemble_size: usize,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    n: usize,
    /// Comma-separated densities.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    q: usize,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random trees instead of uniform graphs.
    #[arg(long)]
    tree: bool,
    #[arg(long, default_value_t = whitener_core::coloring::DEFAULT_ENUMERATION_BUDGET)]
    budget: u64,
    /// Local-search colorings per instance for the sampled count.
    #[arg(long, default_value_t = 0)]
    sampled_colorings: usize,
    #[command(flatten)]
    sp: SpFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    q: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha_min: f64,
    #[arg(long)]
    alpha_max: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha_step: f64,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    solver_steps_per_node: u64,
    #[command(flatten)]
    sp: SpFlags,
}

#[derive(Args)]
struct TheoremBArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 3)]
    q: usize,
    #[arg(long, default_value_t = 100)]
    pairs: usize,
    #[arg(long, default_value_t = 2)]
    radius: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Planted,
    Solver,
}

#[derive(Args)]
struct TheoremCArgs {
    #[arg(long, value_delimiter = ',')]
    ns: Vec<usize>,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 3)]
    q: usize,
    #[arg(long, default_value_t = 2)]
    l: usize,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "planted")]
    colorings: SourceArg,
}

#[derive(Args)]
struct RingDemoArgs {
    #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read_instance(path: &PathBuf) -> Result<Instance, Error> {
    let text = if path.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(path)?
    };
    Instance::parse(&text)
}

fn experiment_spec(command: Command) -> Result<ExperimentSpec, Error> {
    Ok(match command {
        Command::Quasi(a) => ExperimentSpec::Quasi(QuasiSpec {
            n: a.n,
            q: a.q,
            alpha: a.alpha,
            k: a.k,
            b: a.b,
            sweeps: a.sweeps,
            seed: a.seed,
        }),
        Command::Sp(a) => ExperimentSpec::SpSingle(SpSingleSpec {
            n: a.n,
            q: a.q,
            alpha: a.alpha,
            seed: a.seed,
            init: match a.init {
                InitArg::UniformRandom => SpInit::UniformRandom,
                InitArg::AllWhite => SpInit::AllWhite,
                InitArg::FromWhiteningEnsemble => SpInit::FromWhiteningEnsemble,
            },
            sp: a.sp.settings(),
            ensemble_size: a.ensemble_size,
            solver_steps_per_node: 5000,
            noise: whitener_core::coloring::DEFAULT_NOISE,
        }),
        Command::Count(a) => ExperimentSpec::Count(CountSpec {
            n: a.n,
            alphas: a.alphas,
            q: a.q,
            samples: a.samples,
            seed: a.seed,
            ensemble: if a.tree { Ensemble::Tree } else { Ensemble::Random },
            enumeration_budget: a.budget,
            sampled_colorings: a.sampled_colorings,
            solver_steps_per_node: 5000,
            noise: whitener_core::coloring::DEFAULT_NOISE,
            sp: a.sp.settings(),
        }),
        Command::Sweep(a) => ExperimentSpec::Sweep(SweepSpec {
            q: a.q,
            n: a.n,
            alpha_min: a.alpha_min,
            alpha_max: a.alpha_max,
            alpha_step: a.alpha_step,
            samples: a.samples,
            seed: a.seed,
            solver_steps_per_node: a.solver_steps_per_node,
            noise: whitener_core::coloring::DEFAULT_NOISE,
            sp: a.sp.settings(),
        }),
        Command::TheoremB(a) => ExperimentSpec::TheoremB(TheoremBSpec {
            n: a.n,
            alpha: a.alpha,
            q: a.q,
            pairs: a.pairs,
            radius: a.radius,
            seed: a.seed,
            attempt_factor: 20,
            search_budget: 1_000_000,
            solver_steps_per_node: 5000,
            noise: whitener_core::coloring::DEFAULT_NOISE,
        }),
        Command::TheoremC(a) => ExperimentSpec::TheoremC(TheoremCSpec {
            ns: a.ns,
            alpha: a.alpha,
            q: a.q,
            l: a.l,
            samples: a.samples,
            seed: a.seed,
            colorings: match a.colorings {
                SourceArg::Planted => ColoringSource::Planted,
                SourceArg::Solver => ColoringSource::Solver,
            },
            attempt_factor: 20,
            search_budget: 1_000_000,
            solver_steps_per_node: 5000,
            noise: whitener_core::coloring::DEFAULT_NOISE,
        }),
        Command::RingDemo(a) => ExperimentSpec::RingDemo(RingDemoSpec {
            ns: a.ns,
            max_sweeps: a.max_sweeps,
            seed: a.seed,
            enumeration_budget: 10_000_000,
        }),
        Command::Run { spec } => ExperimentSpec::from_json(&std::fs::read_to_string(spec)?)?,
        Command::Gen(_) | Command::Color(_) | Command::Whiten(_) => unreachable!("instance commands"),
    })
}

fn run(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Gen(a) => {
            let m = a.graph.edges()?;
            let instance = if a.planted {
                let (g, hidden) = generate_planted_graph(a.graph.n, m, a.q, a.graph.seed)?;
                let mut inst = Instance::new(g, a.q);
                inst.coloring = Some(Coloring::new(a.q, hidden)?);
                inst
            } else {
                Instance::new(generate_random_graph(a.graph.n, m, a.graph.seed)?, a.q)
            };
            Ok(instance.to_text())
        }
        Command::Color(a) => {
            let mut inst = read_instance(&a.input)?;
            let q = a.q.unwrap_or(inst.q);
            let c = find_legal_coloring(&inst.graph, q, a.seed, a.max_steps, a.noise)?.ok_or_else(|| {
                Error::ResourceLimit(format!("no legal {q}-coloring found in {} steps", a.max_steps))
            })?;
            inst.q = q;
            inst.coloring = Some(c);
            inst.whitening = None;
            inst.directional = None;
            Ok(inst.to_text())
        }
        Command::Whiten(a) => {
            let mut inst = read_instance(&a.input)?;
            let c = inst
                .coloring
                .clone()
                .ok_or_else(|| Error::InvalidArgument("instance carries no coloring ('c' lines)".into()))?;
            let fingerprint = if a.directional {
                let d = directional_from_coloring(&inst.graph, &c)?;
                let w = whiten_directional_with_order(&inst.graph, &d, a.order_seed)?;
                let fp = w.fingerprint().hex();
                inst.directional = Some(w);
                fp
            } else {
                let w = whiten_with_order(&inst.graph, &c, a.order_seed)?;
                let fp = w.fingerprint().hex();
                inst.whitening = Some(w);
                fp
            };
            let mut text = inst.to_text();
            if a.emit_fingerprint {
                text.push_str(&format!("# fingerprint: {fingerprint}\n"));
            }
            Ok(text)
        }
        command => {
            let default_format = match command {
                Command::Sp(_) => Format::Json,
                _ => Format::Csv,
            };
            let spec = experiment_spec(command)?;
            let report = spec.run()?;
            match cli.format.unwrap_or(default_format) {
                Format::Csv => report.to_csv(),
                Format::Json => report.to_json(),
            }
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidSpec(_) | Error::InvalidParameter(_) | Error::InvalidArgument(_) | Error::Parse { .. } => 2,
        Error::ResourceLimit(_) | Error::NoConvergence(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        // read once, when the worker pool is first built
        std::env::set_var(WORKERS_ENV, w.to_string());
    }
    let output = cli.output.clone();
    let result = run(cli).and_then(|text| match &output {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("whitener: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
