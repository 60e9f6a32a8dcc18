use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gameng::bench::{self, BenchConfig};
use gameng::io;
use gameng::model::{build_engineering_model, export_lp, BmaxIndexing, EngineeringSpec};
use gameng::pipeline::{self, Enumeration, Termination};
use gameng::{Error, Game};

/// Engineer payoff perturbations that install or remove pure Nash equilibria.
#[derive(Debug, Parser)]
#[command(name = "gameng", version)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the pure Nash equilibria of a game.
    Analyze {
        game: PathBuf,
        #[arg(long)]
        by_index: bool,
    },
    /// Find one minimal perturbation.
    Engineer(SolveArgs),
    /// Find the minimal perturbation and its alternatives.
    Enumerate(SolveArgs),
    /// Re-check every solution in a solution file.
    Verify {
        game: PathBuf,
        solutions: PathBuf,
        /// Spec to check against; defaults to the sets recorded in the solution file.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        by_index: bool,
    },
    /// Write the engineering model as an LP file.
    ExportLp {
        #[command(flatten)]
        input: SpecArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the runtime scaling benchmark on random games.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    input: SpecArgs,
    /// Where to write the solution file.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Indexing {
    PerProfile,
    PaperShared,
}

#[derive(Debug, Args)]
struct SpecArgs {
    game: PathBuf,
    /// Spec file; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Profile to make a strict equilibrium, e.g. `C,C` (repeatable).
    #[arg(long = "desired")]
    desired: Vec<String>,
    /// Profile that must stop being an equilibrium (repeatable).
    #[arg(long = "undesired")]
    undesired: Vec<String>,
    /// Read profiles as strategy indices instead of labels.
    #[arg(long)]
    by_index: bool,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    big_m: Option<f64>,
    #[arg(long)]
    freeze_undesired: Option<bool>,
    #[arg(long)]
    max_perturbation: Option<f64>,
    /// 0 means unlimited.
    #[arg(long)]
    max_solutions: Option<usize>,
    #[arg(long, value_enum)]
    bmax_indexing: Option<Indexing>,
    #[arg(long)]
    objective_ceiling: Option<f64>,
    #[arg(long)]
    node_limit: Option<u64>,
    /// Seconds for the whole run.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Strategies per player, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_SIZES)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = bench::DEFAULT_BENCH_MAX_SOLUTIONS)]
    max_solutions: usize,
    /// Per-solution timings.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-size medians.
    #[arg(long)]
    summary_csv: Option<PathBuf>,
    /// Worker threads (default: the GAMENG_BENCH_WORKERS variable, then all cores).
    #[arg(long)]
    workers: Option<usize>,
}

/// Failure with its exit code: 1 for infeasible or unverified results, 2 for bad input.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Infeasible(_)
            | Error::VerificationFailed { .. }
            | Error::Numerical(_)
            | Error::NotOptimal(_)
            | Error::Inconsistent(_) => 1,
            _ => 2,
        };
        let mut message = e.to_string();
        if let Error::VerificationFailed { dump, .. } = &e {
            message.push('\n');
            message.push_str(dump);
        }
        Failure { code, message }
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_game(path: &Path) -> Result<Game, Failure> {
    io::read_game(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_spec(args: &SpecArgs, game: &Game) -> Result<EngineeringSpec, Failure> {
    let mut spec = match &args.spec {
        Some(path) => io::read_spec(&read(path)?, game, args.by_index)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => EngineeringSpec::default(),
    };
    let profiles = |list: &[String]| -> Result<Vec<_>, Failure> {
        list.iter().map(|s| io::parse_profile(game, s, args.by_index).map_err(Failure::from)).collect()
    };
    if !args.desired.is_empty() {
        spec.desired = profiles(&args.desired)?;
    }
    if !args.undesired.is_empty() {
        spec.undesired = profiles(&args.undesired)?;
    }
    if let Some(x) = args.epsilon {
        spec.epsilon = x;
    }
    if args.big_m.is_some() {
        spec.big_m = args.big_m;
    }
    if let Some(x) = args.freeze_undesired {
        spec.freeze_undesired = x;
    }
    if args.max_perturbation.is_some() {
        spec.max_perturbation = args.max_perturbation;
    }
    if let Some(n) = args.max_solutions {
        spec.max_solutions = if n == 0 { None } else { Some(n) };
    }
    if let Some(i) = args.bmax_indexing {
        spec.bmax_indexing = match i {
            Indexing::PerProfile => BmaxIndexing::PerProfile,
            Indexing::PaperShared => BmaxIndexing::PaperShared,
        };
    }
    if args.objective_ceiling.is_some() {
        spec.objective_ceiling = args.objective_ceiling;
    }
    if args.node_limit.is_some() {
        spec.node_limit = args.node_limit;
    }
    if args.time_limit.is_some() {
        spec.time_limit = args.time_limit;
    }
    if spec.desired.is_empty() && spec.undesired.is_empty() {
        return Err(Failure::input("no desired or undesired profiles given"));
    }
    spec.validate(game, false)?;
    Ok(spec)
}

fn profile_list(game: &Game, profiles: &[gameng::Profile]) -> String {
    if profiles.is_empty() {
        return "(none)".into();
    }
    profiles.iter().map(|p| io::format_profile(game, p, false)).collect::<Vec<_>>().join("  ")
}

fn print_enumeration(out: &mut impl Write, game: &Game, run: &Enumeration) -> std::io::Result<()> {
    for (i, s) in run.solutions.iter().enumerate() {
        writeln!(out, "solution {}  objective {:.6}", i + 1, s.objective)?;
        for p in s.perturbations.iter() {
            writeln!(
                out,
                "  {:<8} {:<16} {:+.6}",
                game.player_names()[p.player],
                io::format_profile(game, &p.profile, false),
                p.delta
            )?;
        }
        writeln!(out, "  NE set: {}", profile_list(game, &s.verification.ne_set))?;
        for w in &s.warnings {
            writeln!(out, "  warning: {w}")?;
        }
    }
    match &run.termination {
        Termination::Infeasible(report) => writeln!(out, "infeasible: {report}"),
        t => writeln!(out, "{} solution(s), stopped: {t}", run.solutions.len()),
    }
}

fn solve(args: &SolveArgs, all: bool) -> CmdResult {
    let game = load_game(&args.input.game)?;
    let mut spec = load_spec(&args.input, &game)?;
    if !all {
        spec.max_solutions = Some(1);
    }
    let run = pipeline::enumerate_solutions(&game, &spec)?;
    if let Some(path) = &args.output {
        write(path, &io::write_solution_file(&io::solution_file(&game, &spec, &run)))?;
    }
    let mut out = std::io::stdout().lock();
    print_enumeration(&mut out, &game, &run).map_err(|e| Failure::input(e.to_string()))?;
    Ok(if run.solutions.is_empty() { 1 } else { 0 })
}

fn analyze(path: &Path, by_index: bool) -> CmdResult {
    let game = load_game(path)?;
    for p in game.enumerate_pure_nash() {
        println!("{}", io::format_profile(&game, &p, by_index));
    }
    Ok(0)
}

fn verify(game_path: &Path, solutions: &Path, spec_path: Option<&Path>, by_index: bool) -> CmdResult {
    let game = load_game(game_path)?;
    let file = io::read_solution_file(&read(solutions)?)
        .map_err(|e| Failure::input(format!("{}: {e}", solutions.display())))?;
    let spec = match spec_path {
        Some(path) => io::read_spec(&read(path)?, &game, by_index)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => {
            let parse = |list: &[String]| -> Result<Vec<_>, Failure> {
                list.iter().map(|s| io::parse_profile(&game, s, false).map_err(Failure::from)).collect()
            };
            EngineeringSpec::new(parse(&file.desired)?, parse(&file.undesired)?)
        }
    };
    if file.solutions.is_empty() {
        println!("no solutions to verify");
        return Ok(1);
    }
    let mut failed = 0;
    for rec in &file.solutions {
        let set = rec.perturbation_set(&game)?;
        let v = pipeline::verify(&game, &set, &spec)?;
        let status = if v.passed() { "pass" } else { "FAIL" };
        println!("solution {}: {status}  NE set: {}", rec.index, profile_list(&game, &v.ne_set));
        if !v.desired_are_ne {
            println!("  desired not NE: {}", profile_list(&game, &v.missing_desired));
        }
        if !v.undesired_not_ne {
            println!("  undesired still NE: {}", profile_list(&game, &v.remaining_undesired));
        }
        if !v.passed() {
            failed += 1;
        }
    }
    Ok(if failed == 0 { 0 } else { 1 })
}

fn export(input: &SpecArgs, output: Option<&Path>) -> CmdResult {
    let game = load_game(&input.game)?;
    let spec = load_spec(input, &game)?;
    let model = build_engineering_model(&game, &spec)?;
    let text = export_lp(&model);
    match output {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn run_bench(args: &BenchArgs, seed: u64) -> CmdResult {
    if args.max_solutions == 0 {
        return Err(Failure::input("--max-solutions must be positive for the benchmark"));
    }
    let mut config = BenchConfig { sizes: args.sizes.clone(), repeats: args.repeats, seed, workers: args.workers, ..BenchConfig::default() };
    config.spec.max_solutions = Some(args.max_solutions);
    let report = bench::run_scaling_benchmark(&config)?;
    if let Some(path) = &args.csv {
        let f = fs::File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        bench::write_runs_csv(&report, f)?;
    }
    if let Some(path) = &args.summary_csv {
        let f = fs::File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        bench::write_summary_csv(&report, f)?;
    }
    print!("{}", bench::summary_text(&report));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match &cli.command {
        Command::Analyze { game, by_index } => analyze(game, *by_index),
        Command::Engineer(args) => solve(args, false),
        Command::Enumerate(args) => solve(args, true),
        Command::Verify { game, solutions, spec, by_index } => verify(game, solutions, spec.as_deref(), *by_index),
        Command::ExportLp { input, output } => export(input, output.as_deref()),
        Command::Bench(args) => run_bench(args, cli.seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
