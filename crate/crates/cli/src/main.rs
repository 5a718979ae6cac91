//! Command-line driver for knowledge tracing, item response curves and the
//! equilibrium experiment.

mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use bktirt::bkt::{fit_baum_welch, forward_filter, simulate_panel, FitOptions};
use bktirt::bridge::bkt_to_irt;
use bktirt::experiment::{run_equilibrium_experiment, summarize, write_curves_csv, SimConfig};
use bktirt::irt::irf_4pl;
use bktirt::ising::{boltzmann_exact, state_from_index, Dynamics, FieldChain, IsingNetwork, NetworkFile, ScanOrder};
use bktirt::markov::stationary_closed_form;
use bktirt::panel::ResponsePanel;
use bktirt::rng::Stream;
use bktirt::{validate_bkt, BktParams, Constraints, Error, Irf4pl, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use manifest::Run;

const DEFAULT_SEED: u64 = 20_160_629;
const THREADS_ENV: &str = "BKT_IRT_THREADS";

#[derive(Parser)]
#[command(
    name = "bktirt",
    version,
    about = "Knowledge tracing, item response curves and their equilibrium link"
)]
struct Cli {
    /// Worker threads for parallel commands [default: available cores].
    /// The BKT_IRT_THREADS environment variable takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a response panel (CSV) from knowledge-tracing parameters.
    Simulate(SimulateArgs),
    /// Filter every sequence of a panel; writes posterior mastery and
    /// predicted correctness per attempt (CSV).
    Filter(FilterArgs),
    /// Fit knowledge-tracing parameters to a panel with Baum-Welch EM (JSON).
    FitBkt(FitArgs),
    /// Map knowledge-tracing parameters to their equilibrium 4PL curve (JSON).
    Bridge(BridgeArgs),
    /// Run the population simulation and compare it with the equilibrium
    /// curve (CSV, plus a JSON summary).
    Experiment(ExperimentArgs),
    /// Sample a 4PL item response curve (CSV).
    Irf(IrfArgs),
    /// Sample an Ising skill network and tabulate latent state
    /// frequencies (CSV).
    Ising(IsingArgs),
    /// Stationary distribution of the latent mastery chain (JSON).
    Stationary(StationaryArgs),
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// JSON file with p_init, p_learn, p_forget, p_slip, p_guess; replaces
    /// the individual flags [default: use the flags].
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    p_init: f64,
    #[arg(long, default_value_t = 0.3)]
    p_learn: f64,
    #[arg(long, default_value_t = 0.1)]
    p_forget: f64,
    #[arg(long, default_value_t = 0.1)]
    p_slip: f64,
    #[arg(long, default_value_t = 0.1)]
    p_guess: f64,
}

impl ParamArgs {
    fn load(&self) -> Result<BktParams> {
        let params = match &self.params {
            Some(path) => serde_json::from_slice(&fs::read(path)?)?,
            None => BktParams::new(self.p_init, self.p_learn, self.p_forget, self.p_slip, self.p_guess),
        };
        validate_bkt(params, Constraints::NONE)
    }
}

#[derive(Clone, Copy)]
enum SeedArg {
    Fixed(u64),
    Auto,
}

impl std::fmt::Display for SeedArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeedArg::Fixed(s) => write!(f, "{s}"),
            SeedArg::Auto => f.write_str("auto"),
        }
    }
}

impl SeedArg {
    fn resolve(self) -> u64 {
        match self {
            SeedArg::Fixed(s) => s,
            SeedArg::Auto => rand::random(),
        }
    }
}

fn parse_seed(s: &str) -> std::result::Result<SeedArg, String> {
    if s == "auto" {
        Ok(SeedArg::Auto)
    } else {
        s.parse()
            .map(SeedArg::Fixed)
            .map_err(|e| format!("expected an integer or `auto`: {e}"))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 100)]
    people: u32,
    #[arg(long, default_value_t = 20)]
    attempts: u32,
    #[arg(long, default_value_t = 0)]
    skill: u32,
    /// Integer seed, or `auto` for a random one.
    #[arg(long, value_parser = parse_seed, default_value_t = SeedArg::Fixed(DEFAULT_SEED))]
    seed: SeedArg,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterArgs {
    /// Input panel CSV (person_id,item_id,skill_id,attempt,correct).
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, default_value_t = 0)]
    skill: u32,
    #[command(flatten)]
    params: ParamArgs,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Input panel CSV (person_id,item_id,skill_id,attempt,correct).
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, default_value_t = 0)]
    skill: u32,
    /// Starting point for EM.
    #[command(flatten)]
    init: ParamArgs,
    /// Fix p_forget at 0.
    #[arg(long)]
    classic: bool,
    /// Keep p_guess and p_slip below 0.5.
    #[arg(long)]
    identified: bool,
    /// Relative log-likelihood change that stops the iterations.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Output JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BridgeArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Output JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Use the reduced preset (200 people, 50 items, 200 replications).
    #[arg(long)]
    desk: bool,
    /// [default: 1000, or 200 with --desk]
    #[arg(long)]
    people: Option<usize>,
    /// [default: 100, or 50 with --desk]
    #[arg(long)]
    items: Option<usize>,
    /// [default: 1000, or 200 with --desk]
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',', default_value = "2,5,50")]
    iters: Vec<u32>,
    #[arg(long, default_value_t = 0.1)]
    slip: f64,
    #[arg(long, default_value_t = 0.1)]
    guess: f64,
    /// Integer seed, or `auto` for a random one.
    #[arg(long, value_parser = parse_seed, default_value_t = SeedArg::Fixed(DEFAULT_SEED))]
    seed: SeedArg,
    #[arg(long, default_value_t = 0.25)]
    bin_width: f64,
    /// Bins with fewer observations are left out of the summary.
    #[arg(long, default_value_t = 200)]
    min_count: u64,
    /// Output CSV; the summary goes to the same path with extension
    /// `.summary.json` [default: CSV to stdout, summary to stderr].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IrfArgs {
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 0.0)]
    b: f64,
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    d: f64,
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    from: f64,
    #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
    to: f64,
    #[arg(long, default_value_t = 81)]
    points: usize,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DynamicsArg {
    Glauber,
    Metropolis,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScanArg {
    Fixed,
    Random,
}

#[derive(Args)]
struct IsingArgs {
    /// Network JSON with n, couplings ([i, j, sigma] for i < j), fields and
    /// emissions ([{p_guess, p_slip}] per node).
    #[arg(long)]
    net: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    sweeps: u64,
    /// Sweeps discarded before counting.
    #[arg(long, default_value_t = 1000)]
    burn_in: u64,
    #[arg(long, value_enum, default_value_t = DynamicsArg::Glauber)]
    dynamics: DynamicsArg,
    #[arg(long, value_enum, default_value_t = ScanArg::Fixed)]
    scan: ScanArg,
    /// Integer seed, or `auto` for a random one.
    #[arg(long, value_parser = parse_seed, default_value_t = SeedArg::Fixed(DEFAULT_SEED))]
    seed: SeedArg,
    /// Add the exact Boltzmann probability of every state (at most 20 nodes).
    #[arg(long)]
    exact: bool,
    /// Output CSV [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StationaryArgs {
    #[arg(long)]
    p_learn: f64,
    #[arg(long)]
    p_forget: f64,
    /// Output JSON [default: stdout].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn json_bytes<T: serde::Serialize>(value: &T, pretty: bool) -> Result<Vec<u8>> {
    let mut bytes = if pretty {
        serde_json::to_vec_pretty(value)?
    } else {
        serde_json::to_vec(value)?
    };
    bytes.push(b'\n');
    Ok(bytes)
}

fn simulate(args: &SimulateArgs, seed: SeedArg, run: &mut Run) -> Result<()> {
    let params = args.params.load()?;
    let seed = seed.resolve();
    run.seed(seed);
    let panel = simulate_panel(&params, args.people, args.attempts, args.skill, seed)?;
    let mut buf = Vec::new();
    panel.to_csv_writer(&mut buf)?;
    run.emit(args.out.as_deref(), &buf)?;
    Ok(())
}

fn filter(args: &FilterArgs, run: &mut Run) -> Result<()> {
    let params = args.params.load()?;
    let panel = ResponsePanel::read_csv(&args.panel)?;
    let seqs = panel.sequences(args.skill);
    if seqs.is_empty() {
        return Err(Error::UnknownSkill(args.skill));
    }
    let mut out = String::from("person_id,attempt,correct,posterior,predictive\n");
    for (person, x) in &seqs {
        let res = forward_filter(&params, x)?;
        for (t, ((x, post), pred)) in x.iter().zip(&res.posterior).zip(&res.predictive).enumerate() {
            writeln!(out, "{person},{},{x},{post},{pred}", t + 1).unwrap();
        }
    }
    run.emit(args.out.as_deref(), out.as_bytes())?;
    Ok(())
}

fn fit(args: &FitArgs, run: &mut Run) -> Result<()> {
    let constraints = Constraints {
        classic: args.classic,
        identified: args.identified,
    };
    let init = args.init.load()?;
    let panel = ResponsePanel::read_csv(&args.panel)?;
    let options = FitOptions {
        tol: args.tol,
        max_iters: args.max_iters,
    };
    let report = fit_baum_welch(&panel, args.skill, &init, constraints, options)?;
    if report.degenerate_data {
        eprintln!("warning: {}", Error::DegenerateData);
    }
    run.emit(args.out.as_deref(), &json_bytes(&report, true)?)?;
    Ok(())
}

fn bridge(args: &BridgeArgs, run: &mut Run) -> Result<()> {
    let eq = bkt_to_irt(&args.params.load()?)?;
    run.emit(args.out.as_deref(), &json_bytes(&eq, false)?)?;
    Ok(())
}

fn experiment(args: &ExperimentArgs, seed: SeedArg, run: &mut Run) -> Result<()> {
    let seed = seed.resolve();
    run.seed(seed);
    let preset = if args.desk {
        SimConfig::desk(seed)
    } else {
        SimConfig::full_scale(seed)
    };
    let config = SimConfig {
        n_people: args.people.unwrap_or(preset.n_people),
        n_items: args.items.unwrap_or(preset.n_items),
        replications: args.reps.unwrap_or(preset.replications),
        iteration_counts: args.iters.clone(),
        p_slip: args.slip,
        p_guess: args.guess,
        seed,
        bin_width: args.bin_width,
    };
    config.validate()?;
    let curves = run_equilibrium_experiment(&config)?;
    let mut csv = Vec::new();
    write_curves_csv(&curves, &config, &mut csv)?;
    let summary = json_bytes(&summarize(&curves, &config, args.min_count)?, true)?;
    run.emit(args.out.as_deref(), &csv)?;
    match &args.out {
        Some(path) => run.emit(Some(&path.with_extension("summary.json")), &summary)?,
        None => eprint!("{}", String::from_utf8_lossy(&summary)),
    }
    Ok(())
}

fn irf(args: &IrfArgs, run: &mut Run) -> Result<()> {
    let item = Irf4pl::new(args.a, args.b, args.c, args.d)?;
    if args.points < 2 || args.from.is_nan() || args.to.is_nan() || args.from >= args.to {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 points and from < to, got {} points on [{}, {}]",
            args.points, args.from, args.to
        )));
    }
    let mut out = String::from("theta,p\n");
    let step = (args.to - args.from) / (args.points - 1) as f64;
    for k in 0..args.points {
        let theta = if k + 1 == args.points {
            args.to
        } else {
            args.from + k as f64 * step
        };
        writeln!(out, "{theta},{}", irf_4pl(theta, &item)).unwrap();
    }
    run.emit(args.out.as_deref(), out.as_bytes())?;
    Ok(())
}

fn state_label(z: &[u8]) -> String {
    z.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

fn ising(args: &IsingArgs, seed: SeedArg, run: &mut Run) -> Result<()> {
    let file: NetworkFile = serde_json::from_slice(&fs::read(&args.net)?)?;
    let net = IsingNetwork::try_from(file)?;
    if args.sweeps == 0 {
        return Err(Error::InvalidConfig("at least one sweep is required".into()));
    }
    let exact = if args.exact { Some(boltzmann_exact(&net)?) } else { None };
    let seed = seed.resolve();
    run.seed(seed);
    let dynamics = match args.dynamics {
        DynamicsArg::Glauber => Dynamics::Glauber,
        DynamicsArg::Metropolis => Dynamics::Metropolis,
    };
    let order = match args.scan {
        ScanArg::Fixed => ScanOrder::Fixed,
        ScanArg::Random => ScanOrder::Random,
    };
    let mut chain = FieldChain::new(&net, dynamics, order, Stream::new(seed, "cli.ising", [0; 4]));
    for _ in 0..args.burn_in {
        chain.sweep();
    }
    // rows are listed in the order of the state labels, node 0 first
    let mut counts = std::collections::BTreeMap::<String, u64>::new();
    for _ in 0..args.sweeps {
        chain.sweep();
        *counts.entry(state_label(chain.latent())).or_default() += 1;
    }
    let total = args.sweeps as f64;
    let mut out = String::new();
    match exact {
        Some(probs) => {
            out.push_str("state,count,frequency,exact\n");
            let mut rows: Vec<_> = probs
                .iter()
                .enumerate()
                .map(|(s, p)| (state_label(&state_from_index(s, net.n_nodes())), *p))
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            for (label, p) in rows {
                let c = counts.get(&label).copied().unwrap_or(0);
                writeln!(out, "{label},{c},{},{p}", c as f64 / total).unwrap();
            }
        }
        None => {
            out.push_str("state,count,frequency\n");
            for (label, c) in counts {
                writeln!(out, "{label},{c},{}", c as f64 / total).unwrap();
            }
        }
    }
    run.emit(args.out.as_deref(), out.as_bytes())?;
    Ok(())
}

fn stationary(args: &StationaryArgs, run: &mut Run) -> Result<()> {
    let params = validate_bkt(
        BktParams::new(0.0, args.p_learn, args.p_forget, 0.0, 0.0),
        Constraints::NONE,
    )?;
    let dist = stationary_closed_form(&params)?;
    run.emit(args.out.as_deref(), &json_bytes(&dist, false)?)?;
    Ok(())
}

fn configure_threads(flag: Option<usize>) -> std::result::Result<(), String> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.parse::<usize>()
                .map_err(|e| format!("{THREADS_ENV}={v} is not a thread count: {e}"))?,
        ),
        Err(_) => flag,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn dispatch(command: &Command, run: &mut Run) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a, a.seed, run),
        Command::Filter(a) => filter(a, run),
        Command::FitBkt(a) => fit(a, run),
        Command::Bridge(a) => bridge(a, run),
        Command::Experiment(a) => experiment(a, a.seed, run),
        Command::Irf(a) => irf(a, run),
        Command::Ising(a) => ising(a, a.seed, run),
        Command::Stationary(a) => stationary(a, run),
    }
}

fn report(err: &Error) -> ExitCode {
    // output closed early by the reader, e.g. `| head`
    if matches!(err, Error::Io(e) if e.kind() == std::io::ErrorKind::BrokenPipe) {
        return ExitCode::SUCCESS;
    }
    let message = err.to_string().replace('\n', " ");
    eprintln!("{}: {message}", err.code());
    if err.is_io() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads(cli.threads) {
        eprintln!("InvalidArgument: {msg}");
        return ExitCode::from(2);
    }
    let mut run = Run::new();
    if let Err(e) = dispatch(&cli.command, &mut run) {
        return report(&e);
    }
    match run.finish() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&Error::Io(e)),
    }
}
