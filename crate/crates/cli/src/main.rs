use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nnss::baseline::baseline_fit;
use nnss::checkpoint::{Checkpoint, CheckpointModel};
use nnss::data::{load_csv, normalized_split, save_csv, InputSignal, Normalizer, RawSeries, Split, TwoTankConfig};
use nnss::eval::{evaluate_split, report_csv, simulate_and_report, sweep, sweep_csv, EvalReport, PredictionTable};
use nnss::gradcheck::run_suite;
use nnss::linalg::spectral_radius;
use nnss::model::{LpvModel, MatrixSource};
use nnss::schur::{build_transition, fit_to_target, random_factors, SchurFactors};
use nnss::train::{fit, make_windows, LossNormalization, TrainConfig, TrainReport};
use nnss::{Error, Mat};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const SPLIT: [f64; 3] = [0.6, 0.2, 0.2];
const GRAD_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "nnss", version, about = "Stable-by-design neural LPV state-space identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-tank CSV (header `y1,u1`).
    GenData(GenDataArgs),
    /// Train an NN-SS model; writes a checkpoint and a per-epoch report.
    Train(TrainArgs),
    /// Train the constant-matrix baseline with the same pipeline.
    BaselineTrain(BaselineArgs),
    /// Evaluate a checkpoint on the train/val/test splits of a CSV.
    Eval(EvalArgs),
    /// Free-run a checkpoint over a whole CSV.
    Simulate(SimulateArgs),
    /// Train one NN-SS model per (order, seed) and write the grid CSV.
    Sweep(SweepArgs),
    /// Finite-difference check of the end-to-end loss gradient.
    GradCheck(GradCheckArgs),
    /// Sample random transition factors and count unstable draws.
    StabilityCheck(StabilityArgs),
    /// Fit stable factors to a target matrix given as a headerless CSV.
    FitInit(FitInitArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 4000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    /// `levels` (random piecewise-constant) or `multisine`.
    #[arg(long, default_value = "levels")]
    input: String,
}

/// Training flags. Unset flags fall back to the config file, then to defaults.
#[derive(Args, Default)]
struct TrainFlags {
    /// Flat TOML file with `TrainConfig` field names.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long = "L", alias = "window-len")]
    window_len: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long = "batch")]
    batch_size: Option<usize>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    /// `as-printed` or `mean`.
    #[arg(long)]
    loss_norm: Option<LossNormalization>,
}

impl TrainFlags {
    fn resolve(&self) -> Result<TrainConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                toml::from_str::<TrainConfig>(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => TrainConfig::default(),
        };
        macro_rules! overlay {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { cfg.$f = v; } )* };
        }
        overlay!(order, window_len, stride, batch_size, learning_rate, epochs, lambda, seed, gamma, patience);
        if let Some(n) = self.loss_norm {
            cfg.loss_normalization = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Per-epoch CSV: epoch, train loss, validation RMSE, audited radius.
    #[arg(long, default_value = "train_report.csv")]
    report: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Headerless CSV holding an initial transition matrix.
    #[arg(long)]
    init_a: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// `order,seed,split,channel,rmse` report.
    #[arg(long, default_value = "eval_report.csv")]
    out: PathBuf,
    /// Test-split predictions CSV.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Test-split SVG plot.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Report RMSE in physical units instead of normalised ones.
    #[arg(long)]
    physical: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "predictions.csv")]
    out: PathBuf,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long)]
    physical: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    orders: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 20)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitInitArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional JSON dump of the fitted factors.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else if e.is_numeric_error() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message());
        return ExitCode::from(e.code());
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn configure_threads() -> CliResult {
    let Ok(value) = std::env::var("LPV_SSID_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("LPV_SSID_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(command: Command) -> CliResult {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::BaselineTrain(a) => baseline_train(a),
        Command::Eval(a) => eval(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::GradCheck(a) => grad_check(a),
        Command::StabilityCheck(a) => stability_check(a),
        Command::FitInit(a) => fit_init(a),
    }
}

fn gen_data(a: GenDataArgs) -> CliResult {
    let input = match a.input.as_str() {
        "levels" => InputSignal::default(),
        "multisine" => InputSignal::Multisine {
            offset: 0.55,
            amplitude: 0.45,
            periods: vec![50.0, 130.0, 370.0],
        },
        other => return Err(CliError::Usage(format!("unknown input signal {other:?}; use levels or multisine"))),
    };
    let cfg = TwoTankConfig {
        steps: a.steps,
        seed: a.seed,
        noise_std: a.noise,
        input,
        ..TwoTankConfig::default()
    };
    let series = nnss::data::synth_two_tank(&cfg)?;
    save_csv(&series, &a.out)?;
    println!("wrote {} rows to {}", series.len(), a.out.display());
    Ok(())
}

fn read_series(path: &Path) -> Result<RawSeries, CliError> {
    load_csv(path).map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_split(data: &Path, window_len: usize) -> Result<(Normalizer, Split), CliError> {
    let raw = read_series(data)?;
    Ok(normalized_split(&raw, SPLIT, window_len)?)
}

fn write_train_report(report: &TrainReport, path: &Path) -> CliResult {
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn print_summary(kind: &str, report: &TrainReport, eval: &EvalReport) {
    println!(
        "{kind}: epochs {} best {} stopped_early {}",
        report.epochs_run(),
        report.best_epoch.map_or("-".into(), |e| e.to_string()),
        report.stopped_early
    );
    for s in &eval.splits {
        println!(
            "{}: rmse {} spectral radius [{}, {}]",
            s.split,
            nnss::data::format_f64(s.rmse.mean),
            nnss::data::format_f64(s.spectral_radius_min),
            nnss::data::format_f64(s.spectral_radius_max)
        );
    }
}

fn train(a: TrainArgs) -> CliResult {
    let cfg = a.flags.resolve()?;
    let (norm, split) = load_split(&a.data, cfg.window_len)?;
    cfg.validate_for_len(split.train.len())?;
    let mut model = cfg.init_model(split.train.output_dim(), split.train.input_dim())?;
    let windows = make_windows(&split.train, cfg.window_len, cfg.stride)?;
    info!("training on {} windows", windows.len());
    let report = fit(&mut model, &windows, &split.val, &cfg)?;
    let (eval, _) = evaluate_split(&model, &split, cfg.seed, None)?;
    Checkpoint::new(CheckpointModel::Nnss(model), Some(norm), cfg.seed, Some(cfg)).save(&a.out)?;
    write_train_report(&report, &a.report)?;
    print_summary("nnss", &report, &eval);
    Ok(())
}

fn baseline_train(a: BaselineArgs) -> CliResult {
    let cfg = a.train.flags.resolve()?;
    let init_a = a.init_a.as_deref().map(read_matrix).transpose()?;
    let (norm, split) = load_split(&a.train.data, cfg.window_len)?;
    cfg.validate_for_len(split.train.len())?;
    let windows = make_windows(&split.train, cfg.window_len, cfg.stride)?;
    let (model, report) = baseline_fit(&windows, &split.val, &cfg, init_a.as_ref())?;
    let (eval, _) = evaluate_split(&model, &split, cfg.seed, None)?;
    Checkpoint::new(CheckpointModel::Baseline(model), Some(norm), cfg.seed, Some(cfg)).save(&a.train.out)?;
    write_train_report(&report, &a.train.report)?;
    print_summary("baseline", &report, &eval);
    Ok(())
}

/// Loads a checkpoint and a CSV, normalising the data with the stored statistics.
fn load_pair(checkpoint: &Path, data: &Path) -> Result<(Checkpoint, Normalizer, RawSeries), CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let raw = read_series(data)?;
    let (n, m, r) = ckpt.model.dims();
    if raw.output_dim() != m || raw.input_dim() != r {
        return Err(CliError::Data(format!(
            "data has {} outputs and {} inputs; the order-{n} model expects {m} and {r}",
            raw.output_dim(),
            raw.input_dim()
        )));
    }
    let norm = match &ckpt.normalizer {
        Some(n) => n.clone(),
        None => Normalizer {
            mean: vec![0.0; m + r],
            std: vec![1.0; m + r],
            output_dim: m,
        },
    };
    let series = norm.apply(&raw)?;
    Ok((ckpt, norm, series))
}

fn write_predictions(table: &PredictionTable, csv: &Path, plot: Option<&Path>, title: &str) -> CliResult {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    fs::write(csv, buf)?;
    if let Some(p) = plot {
        fs::write(p, table.to_svg(title))?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let (ckpt, norm, series) = load_pair(&a.checkpoint, &a.data)?;
    let min_len = ckpt.config.as_ref().map_or(1, |c| c.window_len);
    let split = nnss::data::chrono_split(&series, SPLIT, min_len)?;
    let denorm = a.physical.then_some(&norm);
    let (report, tables) = match &ckpt.model {
        CheckpointModel::Nnss(m) => evaluate_split(m, &split, ckpt.seed, denorm)?,
        CheckpointModel::Baseline(m) => evaluate_split(m, &split, ckpt.seed, denorm)?,
    };
    fs::write(&a.out, report_csv(&report))?;
    if let Some(p) = &a.predictions {
        write_predictions(&tables[2], p, a.plot.as_deref(), "test split")?;
    } else if let Some(p) = &a.plot {
        fs::write(p, tables[2].to_svg("test split"))?;
    }
    for s in &report.splits {
        println!("{}: rmse {}", s.split, nnss::data::format_f64(s.rmse.mean));
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> CliResult {
    let (ckpt, norm, series) = load_pair(&a.checkpoint, &a.data)?;
    let denorm = a.physical.then_some(&norm);
    fn go<G: MatrixSource>(
        m: &LpvModel<G>,
        s: &RawSeries,
        d: Option<&Normalizer>,
    ) -> nnss::Result<(nnss::eval::SplitMetrics, PredictionTable)> {
        simulate_and_report(m, s, "all", d)
    }
    let (metrics, table) = match &ckpt.model {
        CheckpointModel::Nnss(m) => go(m, &series, denorm)?,
        CheckpointModel::Baseline(m) => go(m, &series, denorm)?,
    };
    write_predictions(&table, &a.out, a.plot.as_deref(), "simulation")?;
    println!(
        "rmse {} spectral radius [{}, {}]",
        nnss::data::format_f64(metrics.rmse.mean),
        nnss::data::format_f64(metrics.spectral_radius_min),
        nnss::data::format_f64(metrics.spectral_radius_max)
    );
    Ok(())
}

fn run_sweep(a: SweepArgs) -> CliResult {
    let cfg = a.flags.resolve()?;
    if a.orders.is_empty() || a.seeds.is_empty() {
        return Err(CliError::Usage("sweep needs at least one order and one seed".into()));
    }
    let (_, split) = load_split(&a.data, cfg.window_len)?;
    let cells = sweep(&a.orders, &a.seeds, &split, &cfg);
    fs::write(&a.out, sweep_csv(&cells))?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    println!("{} cells, {failed} failed; wrote {}", cells.len(), a.out.display());
    Ok(())
}

fn grad_check(a: GradCheckArgs) -> CliResult {
    let cases = run_suite(a.cases, a.seed)?;
    let worst = cases.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    println!("max relative error: {worst:e}");
    if worst < GRAD_TOLERANCE {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("gradient check failed: {worst:e} ≥ {GRAD_TOLERANCE:e}")))
    }
}

fn stability_check(a: StabilityArgs) -> CliResult {
    if a.n == 0 || a.samples == 0 {
        return Err(CliError::Usage("--n and --samples must be positive".into()));
    }
    nnss::schur::validate_gamma(a.gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut violations = 0usize;
    let mut worst: f64 = 0.0;
    for _ in 0..a.samples {
        let scale = rng.random_range(0.1..3.0);
        let mut f: SchurFactors = random_factors(a.n, a.gamma, scale, &mut rng);
        f.eps_tilde = rng.random_range(-6.0..2.0);
        let radius = match build_transition(&f).and_then(|m| spectral_radius(&m)) {
            Ok(r) => r.spectral_radius,
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(radius);
        if !(radius < a.gamma) {
            violations += 1;
        }
    }
    println!("max spectral radius: {}", nnss::data::format_f64(worst));
    println!("violations: {violations}");
    if violations == 0 {
        Ok(())
    } else {
        Err(CliError::Numeric(format!("{violations} of {} draws were not Schur stable", a.samples)))
    }
}

/// Headerless comma-separated square matrix, one row per line.
fn read_matrix(path: &Path) -> Result<Mat, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Data(format!("{} must hold a non-empty square matrix", path.display())));
    }
    Ok(Mat::from_vec(n, n, rows.concat())?)
}

fn fit_init(a: FitInitArgs) -> CliResult {
    let target = read_matrix(&a.matrix)?;
    let result = fit_to_target(&target, a.gamma, a.seed)?;
    let a_fit = build_transition(&result.factors)?;
    let rel = result.residual / target.frobenius_norm().max(f64::MIN_POSITIVE);
    println!("iterations: {}", result.iterations);
    println!("residual: {}", nnss::data::format_f64(result.residual));
    println!("relative residual: {}", nnss::data::format_f64(rel));
    println!("spectral radius: {}", nnss::data::format_f64(spectral_radius(&a_fit)?.spectral_radius));
    if let Some(out) = &a.out {
        let text = serde_json::to_string_pretty(&result.factors).map_err(|e| CliError::Data(e.to_string()))?;
        fs::write(out, text)?;
    }
    Ok(())
}
