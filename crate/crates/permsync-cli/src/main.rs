//! Command line driver: generate synthetic datasets, run the estimator
//! and solvers on them, score predictions against ground truth, and time
//! the pipeline against the dense baseline. Exit codes: 0 success (all
//! requested checks passed), 1 usage error or failed check, 2 unreadable
//! or inconsistent data, 3 internal failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use permsync_cli::formats::{self, Dataset, EvalMetrics, ResolvedConfig, RunMetrics, TheoremMetrics};
use permsync_core::cemp::{cemp_history, cemp_with_table, BetaSchedule, CempConfig};
use permsync_core::cycle::all_inconsistencies;
use permsync_core::eval::{precision_recall, separation_check, theorem_quantities, SeparationCheck};
use permsync_core::graph::ViewingGraph;
use permsync_core::solver::{
    corruption_weights, estimate_universe_size, match_fame, mst_initialize, ppm_baseline,
    relative_matches, spectral_baseline, weighted_ppm_step, FillMode, SolverConfig, SpectralConfig,
};
use permsync_core::synth::{generate, CorruptionModel, SynthConfig};

#[derive(Parser)]
#[command(
    name = "permsync",
    version,
    about = "Partial permutation synchronization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Run a method on a dataset directory and write a result directory.
    Run(RunArgs),
    /// Score a result directory against a dataset's ground truth.
    Eval(EvalArgs),
    /// Time the pipeline and the dense spectral baseline over a size sweep.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Ucm,
    Lbc,
    Lac,
}

#[derive(Args)]
struct SynthArgs {
    /// Corruption model.
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Number of images.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Universe size.
    #[arg(long, default_value_t = 20)]
    m: usize,
    /// Edge probability of the viewing graph.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Probability that an image observes a universe point.
    #[arg(long = "pI", default_value_t = 0.8)]
    p_keypoint: f64,
    /// Corruption fraction (uniform model only).
    #[arg(long)]
    q: Option<f64>,
    /// Number of corruption seed nodes (local models only).
    #[arg(long)]
    nc: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fame,
    Cemp,
    Ppm,
    Spectral,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Fame => "fame",
            Method::Cemp => "cemp",
            Method::Ppm => "ppm",
            Method::Spectral => "spectral",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Fill {
    Col,
    Row,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Input dataset directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output result directory.
    #[arg(long)]
    out: PathBuf,
    /// Corruption estimator iterations.
    #[arg(long = "T", default_value_t = 25)]
    iterations: usize,
    /// Initial inverse temperature of the estimator schedule.
    #[arg(long, default_value_t = 1.0)]
    beta0: f64,
    /// Geometric growth rate of the schedule.
    #[arg(long = "beta-growth", default_value_t = 1.2)]
    beta_growth: f64,
    /// Upper cap on the schedule; pass inf to disable.
    #[arg(long = "beta-cap", default_value_t = 40.0)]
    beta_cap: f64,
    /// Sharpness of the corruption-to-weight map exp(-gamma * s).
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
    /// Refinement iteration budget.
    #[arg(long, default_value_t = 60)]
    t0: usize,
    /// Projection keeps scores strictly above this threshold.
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    /// Universe estimate as a multiple of the mean keypoint count.
    #[arg(long = "mhat-factor", default_value_t = 2.0)]
    mhat_factor: f64,
    /// What the initialization fills with leftover randomness.
    #[arg(long, value_enum, default_value_t = Fill::Col)]
    fill: Fill,
    /// Accumulate raw vote sums instead of per-node normalized ones.
    #[arg(long = "no-weight-norm")]
    no_weight_norm: bool,
    /// Force ordered reductions regardless of thread count.
    #[arg(long)]
    deterministic: bool,
    /// Worker threads for the parallel phases.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for the initialization's fill randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Result directory with matches.coo.
    #[arg(long)]
    pred: PathBuf,
    /// Dataset directory with ground truth.
    #[arg(long)]
    gt: PathBuf,
    /// Also verify the separation guarantee on this instance.
    #[arg(long = "theorem-check")]
    theorem_check: bool,
    /// Write metrics.toml here instead of only printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Fixed dimension, e.g. "n=20" or "m=20".
    #[arg(long)]
    fix: String,
    /// Comma-separated sweep over the number of images.
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated sweep over the universe size.
    #[arg(long)]
    m: Option<String>,
    /// Uniform corruption fraction of the timed instances.
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<formats::FormatError> for CliError {
    fn from(e: formats::FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<permsync_core::solver::SolverError> for CliError {
    fn from(e: permsync_core::solver::SolverError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<permsync_core::eval::EvalError> for CliError {
    fn from(e: permsync_core::eval::EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode, CliError> {
    let model = match args.model {
        ModelKind::Ucm => {
            if args.nc.is_some() {
                return Err(CliError::Usage("--nc only applies to lbc and lac".into()));
            }
            CorruptionModel::Uniform {
                fraction: args.q.unwrap_or(0.2),
            }
        }
        ModelKind::Lbc | ModelKind::Lac => {
            if args.q.is_some() {
                return Err(CliError::Usage("--q only applies to ucm".into()));
            }
            let seeds = args.nc.unwrap_or(10);
            match args.model {
                ModelKind::Lbc => CorruptionModel::locally_biased(seeds),
                _ => CorruptionModel::locally_adversarial(seeds),
            }
        }
    };
    let cfg = SynthConfig {
        nodes: args.n,
        universe: args.m,
        edge_prob: args.p,
        keypoint_prob: args.p_keypoint,
        model,
        seed: args.seed,
    };
    let inst = generate(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    formats::write_dataset(&args.out, &Dataset::from_instance(&inst, &cfg))?;
    println!(
        "wrote {} nodes, {} edges ({} corrupted) to {}",
        cfg.nodes,
        inst.graph.edge_count(),
        inst.bad_edge_count(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, CliError> {
    if args.beta_cap <= 0.0 {
        return Err(CliError::Usage("--beta-cap must be positive".into()));
    }
    let dataset = formats::read_dataset(&args.input)?;
    let resolved = ResolvedConfig {
        method: args.method.name().into(),
        input: args.input.display().to_string(),
        iterations: args.iterations,
        beta0: args.beta0,
        beta_growth: args.beta_growth,
        beta_cap: args.beta_cap.is_finite().then_some(args.beta_cap),
        gamma: args.gamma,
        t0: args.t0,
        theta: args.theta,
        mhat_factor: args.mhat_factor,
        fill: match args.fill {
            Fill::Col => "col".into(),
            Fill::Row => "row".into(),
        },
        normalize_weights: !args.no_weight_norm,
        deterministic: args.deterministic,
        threads: args.threads,
        seed: args.seed,
    };

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Data(e.to_string()))?;
    let run = || run_method(&args, &resolved, &dataset.graph);
    let metrics = match args.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(run),
        None => run(),
    }?;
    formats::write_toml(&args.out.join(formats::CONFIG_FILE), &resolved)?;
    formats::write_toml(&args.out.join(formats::METRICS_FILE), &metrics)?;
    Ok(ExitCode::SUCCESS)
}

/// Executes the selected phases, writing artifacts as they appear so a
/// later phase failure still leaves the earlier outputs on disk.
fn run_method(
    args: &RunArgs,
    resolved: &ResolvedConfig,
    graph: &ViewingGraph,
) -> Result<RunMetrics, CliError> {
    let schedule = BetaSchedule::new(args.beta0, args.beta_growth, resolved.beta_cap)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let cemp_config = CempConfig {
        iterations: args.iterations,
        schedule,
    };
    let mut runtime_ms = BTreeMap::new();
    let mut clock = |name: &str, since: Instant| {
        runtime_ms.insert(name.to_string(), since.elapsed().as_secs_f64() * 1e3);
    };
    let mut metrics = RunMetrics {
        method: args.method.name().into(),
        refinement_steps: None,
        converged: None,
        spectral_sweeps: None,
        runtime_ms: BTreeMap::new(),
    };

    match args.method {
        Method::Cemp => {
            let t = Instant::now();
            let table = all_inconsistencies(graph);
            clock("triangles", t);
            let t = Instant::now();
            let estimates = cemp_with_table(&table, &cemp_config);
            clock("estimator", t);
            formats::write_estimates(&args.out, graph, &estimates)?;
        }
        Method::Fame => {
            let t = Instant::now();
            let table = all_inconsistencies(graph);
            clock("triangles", t);
            let t = Instant::now();
            let estimates = cemp_with_table(&table, &cemp_config);
            clock("estimator", t);
            formats::write_estimates(&args.out, graph, &estimates)?;

            let solver = SolverConfig {
                corruption: cemp_config,
                weight_sharpness: args.gamma,
                max_refinement_steps: args.t0,
                acceptance_threshold: args.theta,
                universe_factor: args.mhat_factor,
                fill: match args.fill {
                    Fill::Col => FillMode::EmptyColumns,
                    Fill::Row => FillMode::EmptyRows,
                },
                normalize_weights: !args.no_weight_norm,
                seed: args.seed,
            };
            let t = Instant::now();
            let mut assignment = mst_initialize(graph, &estimates, &solver)?;
            clock("initialization", t);
            let weights = corruption_weights(graph, &estimates, args.gamma)?;
            let t = Instant::now();
            let mut steps = 0usize;
            let mut converged = false;
            for _ in 0..args.t0 {
                let next = weighted_ppm_step(
                    graph,
                    &weights,
                    !args.no_weight_norm,
                    args.theta,
                    &assignment,
                )?;
                steps += 1;
                if next == assignment {
                    converged = true;
                    break;
                }
                assignment = next;
            }
            clock("refinement", t);
            metrics.refinement_steps = Some(steps);
            metrics.converged = Some(converged);
            formats::write_matches(&args.out, graph, &relative_matches(graph, &assignment))?;
            formats::write_assignment(&args.out, &assignment)?;
        }
        Method::Ppm | Method::Spectral => {
            let t = Instant::now();
            let mhat = estimate_universe_size(graph, args.mhat_factor)?;
            let spectral = spectral_baseline(
                graph,
                mhat,
                &SpectralConfig {
                    acceptance_threshold: args.theta,
                    seed: args.seed,
                    ..SpectralConfig::default()
                },
            )?;
            clock("spectral", t);
            metrics.spectral_sweeps = Some(spectral.sweeps);
            if matches!(args.method, Method::Spectral) {
                formats::write_matches(&args.out, graph, &spectral.matches)?;
                formats::write_assignment(&args.out, &spectral.assignment)?;
            } else {
                let t = Instant::now();
                let refined = ppm_baseline(graph, spectral.assignment, args.t0, args.theta)?;
                clock("refinement", t);
                metrics.refinement_steps = Some(refined.refinement_steps);
                metrics.converged = Some(refined.converged);
                formats::write_matches(&args.out, graph, &refined.matches)?;
                formats::write_assignment(&args.out, &refined.assignment)?;
            }
        }
    }
    metrics.runtime_ms = runtime_ms;
    Ok(metrics)
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode, CliError> {
    let dataset = formats::read_dataset(&args.gt)?;
    let inst = dataset.instance()?;
    let matches = formats::read_matches(&args.pred, &inst.graph)?;
    let scored = precision_recall(&inst, &matches)?;

    let mut metrics = EvalMetrics {
        precision: scored.precision,
        recall: scored.recall,
        correct_matches: scored.correct_matches,
        predicted_matches: scored.predicted_matches,
        true_matches: scored.true_matches,
        vacuous_precision: scored.vacuous_precision,
        vacuous_recall: scored.vacuous_recall,
        theorem: None,
    };
    println!("precision {:.6}", metrics.precision);
    println!("recall {:.6}", metrics.recall);

    let mut failed_check = false;
    if args.theorem_check {
        let report = theorem_quantities(&inst);
        // The guarantee needs an uncapped geometric schedule inside the
        // instance's admissible range, so derive one from the report:
        // the tightest admissible start, and a growth rate halfway to
        // the maximum (capped at the default 1.2). Infeasible instances
        // keep a placeholder schedule; the check explains the rejection.
        let (beta0, growth) = if report.max_growth > 1.0 {
            let growth = if report.max_growth > 1.2 {
                1.2
            } else {
                1.0 + (report.max_growth - 1.0) / 2.0
            };
            (report.max_initial_beta.min(40.0), growth)
        } else {
            (1.0, 1.1)
        };
        let cfg = CempConfig {
            iterations: 25,
            schedule: BetaSchedule::geometric(beta0, growth)
                .map_err(|e| CliError::Internal(e.to_string()))?,
        };
        let history = cemp_history(&all_inconsistencies(&inst.graph), &cfg);
        let mut theorem = TheoremMetrics {
            status: String::new(),
            lambda: report.lambda,
            verifiability: report.verifiability,
            feasibility_bound: report.lambda_bound,
            feasible: report.feasible,
            schedule_beta0: beta0,
            schedule_growth: growth,
            violations: None,
            reason: None,
        };
        match separation_check(&history, &cfg, &inst, &report) {
            SeparationCheck::Checked(outcome) => {
                theorem.status = if outcome.pass { "pass" } else { "violated" }.into();
                theorem.violations = Some(outcome.violations);
                failed_check = !outcome.pass;
                println!("separation {}", theorem.status);
            }
            SeparationCheck::HypothesesUnmet { reason } => {
                theorem.status = "hypotheses_unmet".into();
                eprintln!("warning: separation guarantee not applicable: {reason}");
                println!("separation hypotheses_unmet");
                theorem.reason = Some(reason);
            }
        }
        metrics.theorem = Some(theorem);
    }
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CliError::Data(e.to_string()))?;
        }
        formats::write_toml(out, &metrics)?;
    }
    Ok(if failed_check {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn parse_sweep(flag: &str, text: &str) -> Result<Vec<usize>, CliError> {
    let mut out = Vec::new();
    for part in text.split(',') {
        out.push(part.trim().parse().map_err(|_| {
            CliError::Usage(format!("{flag} expects comma-separated sizes, found {part:?}"))
        })?);
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("{flag} lists no sizes")));
    }
    Ok(out)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode, CliError> {
    let (fixed_key, fixed_value) = args
        .fix
        .split_once('=')
        .ok_or_else(|| CliError::Usage("--fix expects n=<size> or m=<size>".into()))?;
    let fixed: usize = fixed_value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("bad fixed size {fixed_value:?}")))?;
    let (swept_name, sizes) = match fixed_key.trim() {
        "n" => {
            if args.n.is_some() {
                return Err(CliError::Usage("n is fixed; sweep with --m".into()));
            }
            let list = args.m.as_deref().ok_or_else(|| {
                CliError::Usage("--fix n=... needs --m with a sweep list".into())
            })?;
            ("m", parse_sweep("--m", list)?)
        }
        "m" => {
            if args.m.is_some() {
                return Err(CliError::Usage("m is fixed; sweep with --n".into()));
            }
            let list = args.n.as_deref().ok_or_else(|| {
                CliError::Usage("--fix m=... needs --n with a sweep list".into())
            })?;
            ("n", parse_sweep("--n", list)?)
        }
        other => {
            return Err(CliError::Usage(format!(
                "--fix expects n or m, found {other:?}"
            )))
        }
    };

    println!("{:>8} {:>12} {:>12}", swept_name, "fame_s", "spectral_s");
    for size in sizes {
        let (nodes, universe) = match swept_name {
            "m" => (fixed, size),
            _ => (size, fixed),
        };
        let inst = generate(&SynthConfig {
            nodes,
            universe,
            edge_prob: 0.5,
            keypoint_prob: 0.8,
            model: CorruptionModel::Uniform { fraction: args.q },
            seed: args.seed,
        })
        .map_err(|e| CliError::Usage(e.to_string()))?;

        let t = Instant::now();
        match_fame(&inst.graph, &SolverConfig::default())?;
        let fame_s = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mhat = estimate_universe_size(&inst.graph, 2.0)?;
        spectral_baseline(&inst.graph, mhat, &SpectralConfig::default())?;
        let spectral_s = t.elapsed().as_secs_f64();

        println!("{size:>8} {fame_s:>12.3} {spectral_s:>12.3}");
    }
    Ok(ExitCode::SUCCESS)
}
