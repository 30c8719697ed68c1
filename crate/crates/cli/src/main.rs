use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lgcs::cache::ResultCache;
use lgcs::config::{figure_config, percentile_to_point, BandSettings, RunConfig, Source};
use lgcs::diagnostics::{clt_rate_diagnostic, finite_difference_check, gaussian_coincidence_check, grid_oracle_p1};
use lgcs::export::write_panels;
use lgcs::inference::estimate_correlations;
use lgcs::local_gaussian::fit_local_gaussian;
use lgcs::pipeline::{load_series, run, ResultRecord, RunMode};
use lgcs::simulate::ModelSpec;
use lgcs::timeseries::{lag_pairs, pseudo_normalize, write_csv};
use lgcs::{Bandwidth, Order, Point, Transform};
use lgcs_server::{AppState, Dataset};

type CliResult<T = ()> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "lgcs", version, about = "Local Gaussian cross-spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated series as CSV
    Simulate(SimulateArgs),
    /// Fit local correlations and write them as JSON
    Estimate(RunArgs),
    /// Local and global spectra of the series (result record JSON)
    Spectra(RunArgs),
    /// Spectra with replicate or bootstrap bands (result record JSON)
    Bands(RunArgs),
    /// Write per-panel plot data (CSV) for a figure or config
    Export(RunArgs),
    /// Run a diagnostic and print its JSON report
    Diagnose(DiagnoseArgs),
    /// Start the HTTP API
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration
    #[arg(long, conflicts_with = "figure")]
    config: Option<PathBuf>,
    /// Built-in figure configuration
    #[arg(long)]
    figure: Option<String>,
    /// Replace the configured points, e.g. `--point 10::90` (repeatable)
    #[arg(long = "point")]
    points: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    block_length: Option<usize>,
    #[arg(long)]
    truncation: Option<usize>,
    /// Output file (records) or directory (export)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Always recompute, ignoring the result cache
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model preset: gaussian-wn, cosine, local-trig-common, local-trig-individual
    #[arg(long, default_value = "gaussian-wn")]
    model: String,
    #[arg(long, default_value_t = 1859)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Coincidence,
    Rate,
    Gradient,
    Oracle,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(value_enum)]
    check: Check,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    replicates: Option<usize>,
    /// Sample sizes for the rate check
    #[arg(long, value_delimiter = ',', default_value = "500,2000,8000")]
    sizes: Vec<usize>,
    /// Pass/fail tolerance (gap for coincidence, slope for rate)
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Extra CSV dataset `name=path` (repeatable); all columns are used
    #[arg(long = "data")]
    data: Vec<String>,
    /// Apply log returns to the CSV datasets
    #[arg(long)]
    log_returns: bool,
    /// Band runs with more replicates than this become background jobs
    #[arg(long, default_value_t = 20)]
    inline_replicates: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Spectra(a) => record(a, RunMode::Spectra),
        Command::Bands(a) => record(a, RunMode::Bands),
        Command::Export(a) => export(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Serve(a) => serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(a: &RunArgs) -> CliResult<RunConfig> {
    let mut c = match (&a.config, &a.figure) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => figure_config(name)?,
        (None, None) => return Err("one of --config or --figure is required".into()),
    };
    if !a.points.is_empty() {
        c.points = a.points.clone();
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(m) = a.truncation {
        c.truncation = m;
    }
    if a.replicates.is_some() || a.block_length.is_some() {
        let bands = c.bands.get_or_insert(BandSettings {
            replicates: 100,
            probs: (0.05, 0.95),
            block_length: None,
        });
        if let Some(r) = a.replicates {
            bands.replicates = r;
        }
        if a.block_length.is_some() {
            bands.block_length = a.block_length;
        }
    }
    if a.out.is_some() {
        c.output = a.out.clone();
    }
    c.validate()?;
    Ok(c)
}

fn emit(out: Option<&PathBuf>, text: &str) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()).into()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.write_all(b"\n")?;
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs) -> CliResult {
    let mut c = figure_config(&a.model)?;
    c.source = match c.source {
        Source::Model { spec, .. } => Source::Model { n: a.n, spec },
        other => other,
    };
    c.seed = a.seed;
    let series = load_series(&c)?;
    let mut buf = Vec::new();
    write_csv(&series, &mut buf)?;
    emit(a.out.as_ref(), String::from_utf8(buf)?.trim_end())
}

fn estimate(a: RunArgs) -> CliResult {
    let c = load_config(&a)?;
    let series = load_series(&c)?;
    let corr = estimate_correlations(&pseudo_normalize(&series), &c.estimation()?)?;
    for (label, set) in c.points.iter().zip(&corr.local) {
        eprintln!(
            "{label} -> v = ({:.4}, {:.4}), {} non-converged fits",
            set.point.v1,
            set.point.v2,
            set.failed_fits()
        );
    }
    let body = serde_json::json!({
        "points": c.points,
        "local": corr.local,
        "global": corr.global,
    });
    emit(a.out.as_ref(), &serde_json::to_string_pretty(&body)?)
}

/// Result record for `c`, through the cache unless disabled.
fn cached_record(c: &RunConfig, mode: RunMode, no_cache: bool) -> CliResult<String> {
    if no_cache {
        return Ok(run(c, mode, None)?.to_json());
    }
    let cache = ResultCache::from_env()?;
    let (text, hit) = cache.get_or_insert_with(&c.hash(mode.tag()), || run(c, mode, None).map(|r| r.to_json()))?;
    eprintln!("{}", if hit { "cache hit" } else { "computed" });
    Ok(text)
}

fn record(a: RunArgs, mode: RunMode) -> CliResult {
    let c = load_config(&a)?;
    if mode == RunMode::Bands && c.bands.is_none() {
        return Err("bands: the configuration has no [bands] section (or pass --replicates)".into());
    }
    let text = cached_record(&c, mode, a.no_cache)?;
    emit(a.out.as_ref(), &text)
}

fn export(a: RunArgs) -> CliResult {
    let c = load_config(&a)?;
    let text = cached_record(&c, RunMode::Bands, a.no_cache)?;
    let record = ResultRecord::from_json(&text)?;
    let dir = a.out.clone().unwrap_or_else(|| PathBuf::from("export"));
    let prefix = a.figure.clone().unwrap_or_else(|| "run".into());
    for path in write_panels(&record, &dir, &prefix)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn diagnose(a: DiagnoseArgs) -> CliResult {
    let b = Bandwidth::uniform(0.6)?;
    let report = match a.check {
        Check::Coincidence => {
            let c = figure_config("gaussian-wn")?;
            let r = gaussian_coincidence_check(
                1859,
                0.35,
                &c.estimation()?,
                a.replicates.unwrap_or(100),
                a.seed,
                (0.05, 0.95),
                a.tolerance.unwrap_or(0.1),
            )?;
            serde_json::to_string(&r)?
        }
        Check::Rate => {
            let r = clt_rate_diagnostic(
                &ModelSpec::GaussianWn { rho: 0.35 },
                Point::new(0.0, 0.0),
                1,
                Order::One,
                b,
                &a.sizes,
                a.replicates.unwrap_or(200),
                a.seed,
                a.tolerance.unwrap_or(0.3),
            )?;
            serde_json::to_string(&r)?
        }
        Check::Gradient => {
            let series = lgcs::simulate::gaussian_wn::<f64>(500, 0.35, a.seed)?;
            let z = pseudo_normalize(&series);
            let pairs = lag_pairs(z.column(0), z.column(1), 1)?;
            let v = percentile_to_point("30::60")?;
            let reports = [Order::One, Order::Five]
                .into_iter()
                .map(|o| finite_difference_check(&pairs, v, b, o, a.replicates.unwrap_or(20), a.seed))
                .collect::<Result<Vec<_>, _>>()?;
            serde_json::to_string(&reports)?
        }
        Check::Oracle => {
            let count = a.replicates.unwrap_or(100);
            let mut worst: f64 = 0.0;
            for i in 0..count as u64 {
                let series = lgcs::simulate::gaussian_wn::<f64>(1000, 0.35, a.seed.wrapping_add(i))?;
                let z = pseudo_normalize(&series);
                let pairs = lag_pairs(z.column(0), z.column(1), 0)?;
                let v = Point::new(0.0, 0.0);
                let fit = fit_local_gaussian(&pairs, v, b, Order::One, None)?;
                worst = worst.max((fit.theta.rho() - grid_oracle_p1(&pairs, v, b, 1e-4)).abs());
            }
            let tolerance = a.tolerance.unwrap_or(1e-4);
            serde_json::json!({
                "instances": count,
                "max_abs_difference": worst,
                "tolerance": tolerance,
                "pass": worst <= tolerance,
            })
            .to_string()
        }
    };
    println!("{report}");
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    let mut datasets = Dataset::demos();
    let transform = if a.log_returns { Transform::LogReturn } else { Transform::Raw };
    for spec in &a.data {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| format!("--data expects name=path, got '{spec}'"))?;
        datasets.push(Dataset::csv(name, path, transform));
    }
    let state = AppState::new(ResultCache::from_env()?, datasets, a.inline_replicates);
    eprintln!("listening on http://{}", a.addr);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(lgcs_server::serve(a.addr, state))?;
    Ok(())
}
