//! Command-line surface of the `galaxy` binary.
//!
//! Exit codes: 0 success, 1 a verified bound failed, 2 bad input or format,
//! 3 pool exhausted, 4 `select --strategy galaxy` without `--oracle`.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bisection::{cor52_grid, prop53_check, thm51_grid, thm54_grid, BoundCheck};
use crate::engine::{galaxy_select_batch, run_rounds, RunConfig, StaticGraph, TruthOracle};
use crate::error::{Error, Result};
use crate::formats;
use crate::labels::{ClassId, ExampleId, LabeledSet};
use crate::pool_sim::{make_imbalanced_pool, preset, MetricsRow, Quality, SimPool};
use crate::scores::ScoreMatrix;
use crate::strategies::{confidence_sampling_batch, most_likely_positive_batch, random_batch, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUND: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EXHAUSTED: i32 = 3;
pub const EXIT_NO_ORACLE: i32 = 4;

/// Smallest trial count accepted by the statistical suites.
pub const MIN_TRIALS: u64 = 1000;

#[derive(Debug, Parser)]
#[command(name = "galaxy", version, about = "Graph-based batch active learning under extreme class imbalance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select one batch of examples to label.
    Select(SelectArgs),
    /// Run strategies on synthetic pools and write per-round metrics.
    Simulate(SimulateArgs),
    /// Check the balancedness and noise-tolerance bounds by Monte Carlo.
    Verify(VerifyArgs),
    /// Serve labeling sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectStrategy {
    Galaxy,
    Confidence,
    Mlp,
    Random,
}

#[derive(Debug, clap::Args)]
pub struct SelectArgs {
    /// GXSM score file.
    #[arg(long, required_unless_present = "scores_csv", conflicts_with = "scores_csv")]
    pub scores: Option<PathBuf>,
    /// Score matrix as CSV, one row per example.
    #[arg(long)]
    pub scores_csv: Option<PathBuf>,
    /// Labels collected so far (`index,label`); none when omitted.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub batch: usize,
    #[arg(long, value_enum)]
    pub strategy: SelectStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth labels (`index,label`) answering GALAXY's sequential queries.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// JSON config; see [`SimConfig`].
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Thm51,
    Cor52,
    Prop53,
    Thm54,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Region size for the noise suite.
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    /// Also write the grid as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory for session event logs; sessions are kept in memory only when omitted.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

/// Simulation config. Keys are flat: the model-quality keys of [`Quality`]
/// sit next to the run keys.
///
/// ```json
/// {"preset": "cifar100-2", "strategies": ["galaxy", "confidence", "random"],
///  "batch_size": 100, "rounds": 20, "seed": 0, "repeats": 4, "skew": 0.3}
/// ```
///
/// Without `preset`, `n`, `k` and `epsilon` are required.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub strategies: Vec<Strategy>,
    pub batch_size: usize,
    pub rounds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repeats: usize,
    /// Neighbors per example in the static graph used by `s2`.
    #[serde(default = "default_knn")]
    pub knn: usize,
    #[serde(flatten)]
    pub quality: Quality,
}

fn one() -> usize {
    1
}

fn default_knn() -> usize {
    10
}

impl SimConfig {
    pub fn pool(&self, seed: u64) -> Result<SimPool> {
        match (&self.preset, self.n, self.k, self.epsilon) {
            (Some(name), None, None, None) => preset(name)?.pool(self.quality.clone(), seed),
            (None, Some(n), Some(k), Some(eps)) => make_imbalanced_pool(n, k, eps, self.quality.clone(), seed),
            _ => Err(Error::input("config needs either preset or all of n, k, epsilon")),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::input("config lists no strategies"));
        }
        if self.batch_size == 0 || self.rounds == 0 || self.repeats == 0 {
            return Err(Error::input("batch_size, rounds and repeats must be >= 1"));
        }
        Ok(())
    }
}

/// Per-round aggregate across repeats.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub round: usize,
    pub labels_used: usize,
    pub acc_bal_mean: f64,
    pub acc_bal_se: Option<f64>,
    pub id_labels_mean: f64,
    pub id_labels_se: Option<f64>,
    pub repeats: usize,
}

#[derive(Debug, Serialize)]
struct RunRow<'a> {
    repeat: usize,
    round: usize,
    labels_used: usize,
    acc_bal: f64,
    id_labels: usize,
    strategy: &'a str,
}

impl<'a> RunRow<'a> {
    fn new(repeat: usize, r: &'a MetricsRow) -> Self {
        Self {
            repeat,
            round: r.round,
            labels_used: r.labels_used,
            acc_bal: r.acc_bal,
            id_labels: r.id_labels,
            strategy: &r.strategy,
        }
    }
}

#[derive(Debug, Serialize)]
struct MeanRow<'a> {
    round: usize,
    labels_used: usize,
    acc_bal: f64,
    id_labels: f64,
    strategy: &'a str,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::PoolExhausted => EXIT_EXHAUSTED,
        _ => EXIT_INPUT,
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Select(a) => cmd_select(&a),
        Command::Simulate(a) => cmd_simulate(&a.config, &a.out_dir).map(|_| EXIT_OK),
        Command::Verify(a) => cmd_verify(&a),
        Command::Serve(a) => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
            rt.block_on(crate::server::serve(a.port, a.data_dir.as_deref()))?;
            Ok(EXIT_OK)
        }
    }
}

fn load_scores(a: &SelectArgs) -> Result<ScoreMatrix> {
    match (&a.scores, &a.scores_csv) {
        (Some(p), _) => formats::read_gxsm(p),
        (None, Some(p)) => formats::read_scores_csv(p),
        (None, None) => Err(Error::input("either --scores or --scores-csv is required")),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

pub fn cmd_select(a: &SelectArgs) -> Result<i32> {
    if a.strategy == SelectStrategy::Galaxy && a.oracle.is_none() {
        eprintln!("error: --strategy galaxy queries sequentially and needs --oracle");
        return Ok(EXIT_NO_ORACLE);
    }
    if a.batch == 0 {
        return Err(Error::input("--batch must be >= 1"));
    }
    let s = load_scores(a)?;
    let labeled = match &a.labels {
        Some(p) => formats::read_labels_csv(p)?,
        None => LabeledSet::new(),
    };
    labeled.validate(s.n(), s.k())?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let batch = match a.strategy {
        SelectStrategy::Galaxy => {
            let truth: HashMap<ExampleId, ClassId> = formats::read_labels_csv(a.oracle.as_ref().expect("checked"))?
                .iter()
                .collect();
            let mut oracle = |id: ExampleId| {
                truth
                    .get(&id)
                    .copied()
                    .ok_or_else(|| Error::format(format!("oracle file has no label for example {id}")))
            };
            let (batch, updated) = galaxy_select_batch(&s, &labeled, &mut oracle, a.batch, &mut rng)?;
            let mut w = create(&a.out)?;
            formats::write_executed_batch_csv(&mut w, &batch, &updated)?;
            w.flush().map_err(|e| Error::io(&a.out, e))?;
            return Ok(EXIT_OK);
        }
        SelectStrategy::Confidence => confidence_sampling_batch(&s, &labeled, a.batch)?,
        SelectStrategy::Mlp => {
            let ids: Vec<ClassId> = (0..s.k() - 1).map(ClassId).collect();
            most_likely_positive_batch(&s, &labeled, a.batch, &ids)?
        }
        SelectStrategy::Random => random_batch(&labeled, s.n(), a.batch, &mut rng)?,
    };
    let mut w = create(&a.out)?;
    formats::write_ids_csv(&mut w, &batch.ids)?;
    w.flush().map_err(|e| Error::io(&a.out, e))?;
    Ok(EXIT_OK)
}

pub fn read_sim_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: SimConfig = serde_json::from_str(&text).map_err(|e| Error::input(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every strategy `repeats` times (repeat `r` uses seed `seed + r` for
/// both the pool and the run) and writes `<strategy>.csv` (per-round means),
/// `runs.csv` (every row) and `summary.csv` (means with standard errors).
pub fn cmd_simulate(config: &Path, out_dir: &Path) -> Result<Vec<SummaryRow>> {
    let cfg = read_sim_config(config)?;
    let shape = cfg.pool(cfg.seed)?;
    if cfg.rounds * cfg.batch_size > shape.n {
        return Err(Error::input(format!(
            "label budget T*B = {}*{} = {} exceeds pool size {}",
            cfg.rounds,
            cfg.batch_size,
            cfg.rounds * cfg.batch_size,
            shape.n
        )));
    }
    drop(shape);
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let results: Vec<(usize, Vec<Vec<MetricsRow>>)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let pool = cfg.pool(seed)?;
            let graph = if cfg.strategies.contains(&Strategy::S2) {
                Some(StaticGraph::knn(&pool.latent_features(), cfg.knn)?)
            } else {
                None
            };
            let per_strategy = cfg
                .strategies
                .par_iter()
                .map(|&strategy| {
                    let run = RunConfig {
                        strategy,
                        rounds: cfg.rounds,
                        batch_size: cfg.batch_size,
                        seed,
                    };
                    let mut provider = pool.provider();
                    let mut oracle = TruthOracle(&pool.true_labels);
                    run_rounds(&run, &mut provider, &mut oracle, Some(&pool.true_labels), graph.as_ref())
                        .map(|o| o.metrics)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((r, per_strategy))
        })
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    let mut runs = csv_writer(&out_dir.join("runs.csv"))?;
    for (j, strategy) in cfg.strategies.iter().enumerate() {
        let name = strategy.name();
        let mut w = csv_writer(&out_dir.join(format!("{name}.csv")))?;
        for round in 0..cfg.rounds {
            let rows: Vec<&MetricsRow> = results.iter().map(|(_, m)| &m[j][round]).collect();
            let acc: Vec<f64> = rows.iter().map(|m| m.acc_bal).collect();
            let ids: Vec<f64> = rows.iter().map(|m| m.id_labels as f64).collect();
            let (acc_mean, acc_se) = mean_se(&acc);
            let (id_mean, id_se) = mean_se(&ids);
            w.serialize(MeanRow {
                round,
                labels_used: rows[0].labels_used,
                acc_bal: acc_mean,
                id_labels: id_mean,
                strategy: name,
            })
            .map_err(csv_err)?;
            summary.push(SummaryRow {
                strategy: name.to_string(),
                round,
                labels_used: rows[0].labels_used,
                acc_bal_mean: acc_mean,
                acc_bal_se: acc_se,
                id_labels_mean: id_mean,
                id_labels_se: id_se,
                repeats: rows.len(),
            });
        }
        w.flush().map_err(|e| Error::io(out_dir, e))?;
        for (r, m) in &results {
            for row in &m[j] {
                runs.serialize(RunRow::new(*r, row)).map_err(csv_err)?;
            }
        }
    }
    runs.flush().map_err(|e| Error::io(out_dir, e))?;
    let mut w = csv_writer(&out_dir.join("summary.csv"))?;
    for row in &summary {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(out_dir, e))?;
    Ok(summary)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> Error {
    Error::format(e.to_string())
}

/// Mean and standard error of the mean; no standard error for one value.
fn mean_se(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

pub fn run_suite(suite: Suite, trials: u64, seed: u64, n: usize) -> Result<Vec<BoundCheck>> {
    if suite != Suite::Prop53 && trials < MIN_TRIALS {
        return Err(Error::input(format!(
            "statistical suites need --trials >= {MIN_TRIALS}, got {trials}"
        )));
    }
    let trials = trials as usize;
    match suite {
        Suite::Thm51 => thm51_grid(trials, seed),
        Suite::Cor52 => cor52_grid(trials, seed),
        Suite::Prop53 => prop53_check(200, 50, seed),
        Suite::Thm54 => thm54_grid(n, trials, seed),
    }
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let checks = run_suite(a.suite, a.trials, a.seed, a.n)?;
    for c in &checks {
        println!(
            "{} {:<28} estimate={:.4} se={:.4} bound={:.4} {}",
            c.suite,
            c.cell,
            c.estimate,
            c.se,
            c.bound,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    if let Some(path) = &a.out {
        let mut w = csv_writer(path)?;
        for c in &checks {
            w.serialize(c).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let failed: Vec<&BoundCheck> = checks.iter().filter(|c| !c.pass).collect();
    for c in &failed {
        eprintln!("bound violated: {} {}", c.suite, c.cell);
    }
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_BOUND })
}
