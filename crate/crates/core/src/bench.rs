//! Random two-player games with a planted equilibrium, and the runtime
//! scaling benchmark built on them.

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{Game, Profile};
use crate::model::EngineeringSpec;
use crate::pipeline::enumerate_solutions;

/// Payoffs are drawn uniformly from `[-PAYOFF_BOUND, PAYOFF_BOUND]`.
pub const PAYOFF_BOUND: f64 = 10.0;
/// Planted payoffs beat their best alternative by this much.
pub const PLANT_MARGIN: f64 = 1.0;
pub const DEFAULT_SIZES: [usize; 4] = [20, 50, 100, 200];
pub const DEFAULT_BENCH_MAX_SOLUTIONS: usize = 16;
/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "GAMENG_BENCH_WORKERS";

/// A random `n x n` game.
///
/// Returns the game, the planted equilibrium and a distinct target
/// profile. The planted profile's two payoffs exceed the best alternative
/// in their column (player 0) and row (player 1) by [`PLANT_MARGIN`].
pub fn generate_random_game(n: usize, seed: u64) -> Result<(Game, Profile, Profile)> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("random games need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut payoffs: Vec<f64> =
        (0..2 * n * n).map(|_| rng.gen_range(-PAYOFF_BOUND..=PAYOFF_BOUND)).collect();
    let (r, c) = (rng.gen_range(0..n), rng.gen_range(0..n));
    let target = loop {
        let t = (rng.gen_range(0..n), rng.gen_range(0..n));
        if t != (r, c) {
            break t;
        }
    };
    let at = |row: usize, col: usize, k: usize| 2 * (row * n + col) + k;
    let best_row = (0..n).filter(|&i| i != r).map(|i| payoffs[at(i, c, 0)]).fold(f64::NEG_INFINITY, f64::max);
    let best_col = (0..n).filter(|&j| j != c).map(|j| payoffs[at(r, j, 1)]).fold(f64::NEG_INFINITY, f64::max);
    payoffs[at(r, c, 0)] = best_row + PLANT_MARGIN;
    payoffs[at(r, c, 1)] = best_col + PLANT_MARGIN;
    let labels: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let game = Game::new(2, vec![labels.clone(), labels], payoffs)?
        .with_player_names(vec!["P1".into(), "P2".into()])?;
    Ok((game, Profile::new(vec![r, c]), Profile::new(vec![target.0, target.1])))
}

/// Seed of the `repeat`-th game of size `n`, independent of scheduling.
pub fn task_seed(seed: u64, n: usize, repeat: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) ^ repeat as u64);
    rng.next_u64()
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    /// Template for every run; its profile sets are replaced per game.
    pub spec: EngineeringSpec,
    pub seed: u64,
    /// Worker threads; `None` reads [`WORKERS_ENV`], then uses all cores.
    pub workers: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: DEFAULT_SIZES.to_vec(),
            repeats: 3,
            spec: EngineeringSpec {
                max_solutions: Some(DEFAULT_BENCH_MAX_SOLUTIONS),
                ..EngineeringSpec::default()
            },
            seed: 0,
            workers: None,
        }
    }
}

/// One enumerated game.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRun {
    pub n: usize,
    pub repeat: usize,
    pub seed: u64,
    /// `(seconds, objective)` per solution, in enumeration order.
    pub solutions: Vec<(f64, f64)>,
    pub termination: String,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SizeSummary {
    pub n: usize,
    pub cells: usize,
    pub solutions_found: usize,
    pub median_seconds: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Fewer than two distinct x values, or constant y.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub seed: u64,
    pub runs: Vec<BenchRun>,
    /// Sorted by `n`.
    pub sizes: Vec<SizeSummary>,
    /// Median seconds against cells, over sizes with at least one solution.
    pub fit: LinearFit,
}

/// Median of `values`; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

/// Ordinary least squares of y on x.
///
/// With fewer than two distinct x values the slope is 0 and the intercept
/// the mean of y. A zero total sum of squares gives `r_squared = 1`. Both
/// cases set the degeneracy flag.
pub fn linear_fit_r2(points: &[(f64, f64)]) -> LinearFit {
    let n = points.len() as f64;
    if points.is_empty() {
        return LinearFit { slope: 0.0, intercept: 0.0, r_squared: 1.0, degenerate: true };
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return LinearFit { slope: 0.0, intercept: my, r_squared: 1.0, degenerate: true };
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if syy == 0.0 {
        return LinearFit { slope, intercept, r_squared: 1.0, degenerate: true };
    }
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = (1.0 - ss_res / syy).clamp(0.0, 1.0);
    LinearFit { slope, intercept, r_squared, degenerate: false }
}

fn workers(config: &BenchConfig) -> usize {
    config
        .workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&w| w > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

fn run_one(config: &BenchConfig, n: usize, repeat: usize) -> BenchRun {
    let seed = task_seed(config.seed, n, repeat);
    let mut run = BenchRun { n, repeat, seed, solutions: Vec::new(), termination: String::new(), error: None };
    let outcome = generate_random_game(n, seed).and_then(|(game, planted, target)| {
        let spec = EngineeringSpec { desired: vec![target], undesired: vec![planted], ..config.spec.clone() };
        enumerate_solutions(&game, &spec)
    });
    match outcome {
        Ok(e) => {
            run.solutions = e.solutions.iter().map(|s| (s.stats.wall_time.as_secs_f64(), s.objective)).collect();
            run.termination = e.termination.to_string();
        }
        Err(err) => {
            run.termination = "error".into();
            run.error = Some(err.to_string());
        }
    }
    log::info!("n={n} repeat={repeat}: {} solutions ({})", run.solutions.len(), run.termination);
    run
}

/// Enumerates `repeats` random games per size and fits median
/// per-solution time against the number of cells.
///
/// Pipeline errors are recorded on their run, not propagated.
pub fn run_scaling_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    if config.sizes.is_empty() {
        return Err(Error::InvalidSpec("benchmark needs at least one size".into()));
    }
    if config.repeats == 0 {
        return Err(Error::InvalidSpec("benchmark needs at least one repeat".into()));
    }
    if let Some(&n) = config.sizes.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidSpec(format!("benchmark sizes must be at least 2, got {n}")));
    }
    let mut sizes = config.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let tasks: Vec<(usize, usize)> =
        sizes.iter().flat_map(|&n| (0..config.repeats).map(move |r| (n, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers(config))
        .build()
        .map_err(|e| Error::InvalidSpec(format!("worker pool: {e}")))?;
    let runs: Vec<BenchRun> = pool.install(|| tasks.par_iter().map(|&(n, r)| run_one(config, n, r)).collect());

    let summaries: Vec<SizeSummary> = sizes
        .iter()
        .map(|&n| {
            let times: Vec<f64> =
                runs.iter().filter(|r| r.n == n).flat_map(|r| r.solutions.iter().map(|s| s.0)).collect();
            SizeSummary { n, cells: n * n, solutions_found: times.len(), median_seconds: median(&times) }
        })
        .collect();
    let points: Vec<(f64, f64)> =
        summaries.iter().filter_map(|s| s.median_seconds.map(|m| (s.cells as f64, m))).collect();
    Ok(BenchReport { seed: config.seed, runs, sizes: summaries, fit: linear_fit_r2(&points) })
}

/// Per-solution CSV: `n,cells,repeat,solution_index,seconds,objective`.
pub fn write_runs_csv<W: Write>(report: &BenchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "cells", "repeat", "solution_index", "seconds", "objective"])?;
    for run in &report.runs {
        for (i, (secs, obj)) in run.solutions.iter().enumerate() {
            w.write_record([
                run.n.to_string(),
                (run.n * run.n).to_string(),
                run.repeat.to_string(),
                i.to_string(),
                format!("{secs:.6}"),
                format!("{obj:.6}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-size CSV: `n,cells,median_seconds`.
pub fn write_summary_csv<W: Write>(report: &BenchReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "cells", "median_seconds"])?;
    for s in &report.sizes {
        let med = s.median_seconds.map_or(String::new(), |m| format!("{m:.6}"));
        w.write_record([s.n.to_string(), s.cells.to_string(), med])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable summary block.
pub fn summary_text(report: &BenchReport) -> String {
    let mut out = format!(
        "payoffs uniform on [-{PAYOFF_BOUND}, {PAYOFF_BOUND}], plant margin {PLANT_MARGIN}, seed {}\n",
        report.seed
    );
    for s in &report.sizes {
        let terms: Vec<String> = report.runs.iter().filter(|r| r.n == s.n).map(|r| r.termination.clone()).collect();
        out.push_str(&format!(
            "n={:<5} cells={:<7} solutions={:<4} median_s={} stops=[{}]\n",
            s.n,
            s.cells,
            s.solutions_found,
            s.median_seconds.map_or("-".into(), |m| format!("{m:.6}")),
            terms.join(",")
        ));
    }
    for run in report.runs.iter().filter(|r| r.error.is_some()) {
        out.push_str(&format!("error n={} repeat={}: {}\n", run.n, run.repeat, run.error.as_deref().unwrap_or("")));
    }
    let f = &report.fit;
    out.push_str(&format!(
        "fit: slope={:.6e} intercept={:.6e} r_squared={:.4}{}\n",
        f.slope,
        f.intercept,
        f.r_squared,
        if f.degenerate { " (degenerate)" } else { "" }
    ));
    out
}
