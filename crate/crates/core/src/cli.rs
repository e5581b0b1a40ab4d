//! `mfbs` command-line front end.
//!
//! ```bash
//! mfbs price --spot 100 --strike 100 --rate 0.05 --sigma 0.2 --maturity-days 252 --hurst const:0.5
//! mfbs simulate --spot 100 --strike 100 --rate 0.05 --sigma 0.2 --maturity 1 --hurst sin:0.1,0,0.5 --seed 7
//! mfbs density --x0 0 --sigma 0.2 --hurst const:0.5 --t 1 --out pdf.csv
//! mfbs calibrate --quotes q.csv --spot 3970.99 --rate 0.045013 --model multifractional
//! mfbs compare --quotes q.csv --spot 3970.99 --rate 0.045013 --plot-csv fit.csv
//! mfbs sample-paths --hurst sin:0.1,0,0.5 --times 0.25,0.5,0.75,1 --paths 1000 --out paths.csv
//! ```
//!
//! Hurst functions are written `const:<H>`, `sin:<A>,<B>,<C>[,<f>]` (default
//! `f = 252/30`) or `table:<path>` for a `t_years,h` CSV. Exit status is 0 on
//! success, 2 for invalid input and 1 for numerical failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::calibration::{
    calibrate, compare_models, CalibrationConfig, CalibrationResult, ModelKind, OptionQuote,
    QuoteSet, DEFAULT_FREQUENCY, TRADING_DAYS_PER_YEAR,
};
use crate::density::{mean_price, variance_price, DensityParams};
use crate::error::{Error, Result};
use crate::hurst::HurstFunction;
use crate::mbm::{CovarianceKernel, PathGrid};
use crate::monte_carlo::{
    call_estimate, moments_estimate, simulate_terminal_log_price, MarketParams, McConfig,
};
use crate::pricer::{call_price, PricingInput};

/// Version stamped into every JSON report.
pub const SCHEMA_VERSION: u32 = 1;

pub const QUOTE_HEADER: [&str; 3] = ["maturity_days", "strike", "mid_price"];

#[derive(Debug, Parser)]
#[command(
    name = "mfbs",
    version,
    about = "Multifractional Black-Scholes pricing, simulation and calibration"
)]
struct Cli {
    /// Worker threads for simulation and calibration (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the report or CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form European call price.
    Price(PriceArgs),
    /// Monte Carlo call price and terminal moments.
    Simulate(SimulateArgs),
    /// Log-price transition density as `x,density` CSV.
    Density(DensityArgs),
    /// Fit one model to a quote file.
    Calibrate(CalibrateArgs),
    /// Fit all three models and rank them by mse.
    Compare(CompareArgs),
    /// Exact mBm paths as CSV, one row per path.
    SamplePaths(SamplePathsArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "horizon")]
struct MaturityArgs {
    /// Maturity in trading days (252 per year).
    #[arg(long, group = "horizon")]
    maturity_days: Option<f64>,
    /// Maturity in years.
    #[arg(long, group = "horizon")]
    maturity: Option<f64>,
}

impl MaturityArgs {
    fn years(&self) -> f64 {
        match (self.maturity_days, self.maturity) {
            (Some(d), _) => d / TRADING_DAYS_PER_YEAR,
            (None, Some(y)) => y,
            (None, None) => unreachable!("clap enforces one maturity flag"),
        }
    }
}

#[derive(Debug, Args)]
struct PriceArgs {
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    strike: f64,
    #[arg(long)]
    rate: f64,
    #[arg(long)]
    sigma: f64,
    #[command(flatten)]
    maturity: MaturityArgs,
    /// Hurst function, e.g. `const:0.5` or `sin:0.1,0,0.5`.
    #[arg(long)]
    hurst: String,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    spot: f64,
    /// Strike of the priced call (default: spot).
    #[arg(long)]
    strike: Option<f64>,
    #[arg(long)]
    rate: f64,
    /// Physical drift of the asset.
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long)]
    sigma: f64,
    #[command(flatten)]
    maturity: MaturityArgs,
    #[arg(long)]
    hurst: String,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 128)]
    steps: usize,
    /// Also write terminal values `path,x_t,s_t` to this CSV.
    #[arg(long)]
    terminal_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x0: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    hurst: String,
    /// Time in years.
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 801)]
    points: usize,
    /// Half-width of the x range in standard deviations.
    #[arg(long, default_value_t = 12.0)]
    width: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Multifractional,
    Fractional,
    Classical,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Multifractional => ModelKind::Multifractional,
            ModelArg::Fractional => ModelKind::Fractional,
            ModelArg::Classical => ModelKind::Classical,
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Quote CSV with header `maturity_days,strike,mid_price`.
    #[arg(long)]
    quotes: PathBuf,
    #[arg(long)]
    spot: f64,
    #[arg(long)]
    rate: f64,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Sinusoid frequency in cycles per year.
    #[arg(long, default_value_t = DEFAULT_FREQUENCY)]
    frequency: f64,
    #[arg(long, default_value_t = 0.05)]
    hurst_lower: f64,
    #[arg(long, default_value_t = 0.95)]
    hurst_upper: f64,
    /// Plot-ready CSV of market and model prices per maturity.
    #[arg(long)]
    plot_csv: Option<PathBuf>,
}

impl FitArgs {
    fn config(&self, seed: u64) -> CalibrationConfig {
        CalibrationConfig {
            hurst_lower: self.hurst_lower,
            hurst_upper: self.hurst_upper,
            restarts: self.restarts,
            max_iterations: self.max_iter,
            tolerance: self.tol,
            frequency: self.frequency,
            seed,
            ..CalibrationConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    fit: FitArgs,
}

#[derive(Debug, Args)]
struct SamplePathsArgs {
    #[arg(long)]
    hurst: String,
    /// Comma-separated sampling times in years.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["horizon", "n_times"])]
    times: Option<Vec<f64>>,
    /// Uniform grid end (years), used with `--n-times`.
    #[arg(long, requires = "n_times")]
    horizon: Option<f64>,
    #[arg(long, requires = "horizon")]
    n_times: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let common = Common {
        seed: cli.seed,
        out: cli.out,
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command, &common)),
            Err(e) => Err(Error::domain(format!("cannot build thread pool: {e}"))),
        },
        None => dispatch(cli.command, &common),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

struct Common {
    seed: u64,
    out: Option<PathBuf>,
}

fn dispatch(command: Command, c: &Common) -> Result<()> {
    match command {
        Command::Price(a) => cmd_price(a, c),
        Command::Simulate(a) => cmd_simulate(a, c),
        Command::Density(a) => cmd_density(a, c),
        Command::Calibrate(a) => cmd_calibrate(a, c),
        Command::Compare(a) => cmd_compare(a, c),
        Command::SamplePaths(a) => cmd_sample_paths(a, c),
    }
}

/// Parses the `const:` / `sin:` / `table:` Hurst mini-grammar.
pub fn parse_hurst_spec(spec: &str) -> Result<HurstFunction> {
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| Error::domain(format!("Hurst spec `{spec}` must look like kind:params")))?;
    let numbers = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::domain(format!("bad number `{v}` in Hurst spec `{spec}`")))
            })
            .collect()
    };
    match kind {
        "const" => match numbers(body)?.as_slice() {
            [h] => HurstFunction::constant(*h),
            _ => Err(Error::domain("const: takes exactly one value")),
        },
        "sin" => match numbers(body)?.as_slice() {
            [a, b, c] => HurstFunction::sinusoidal(*a, *b, *c, DEFAULT_FREQUENCY),
            [a, b, c, f] => HurstFunction::sinusoidal(*a, *b, *c, *f),
            _ => Err(Error::domain("sin: takes A,B,C[,f]")),
        },
        "table" => read_hurst_table(Path::new(body)),
        other => Err(Error::domain(format!("unknown Hurst kind `{other}`"))),
    }
}

/// Reads a two-column `t_years,h` CSV into a tabulated Hurst function.
pub fn read_hurst_table(path: &Path) -> Result<HurstFunction> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_error)?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_years", "h"] {
        return Err(Error::Parse {
            line: 1,
            message: "expected header `t_years,h`".into(),
        });
    }
    let mut knots = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!("column {} is not a number", i + 1),
                })
        };
        knots.push((field(0)?, field(1)?));
    }
    if knots.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no knots",
            path.display()
        )));
    }
    HurstFunction::tabulated(knots)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a quote CSV (`maturity_days,strike,mid_price`). Rows may come in
/// any order; duplicate `(maturity, strike)` pairs are rejected.
pub fn parse_quotes(path: &Path, spot: f64, rate: f64) -> Result<QuoteSet> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(csv_error)?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyInput(format!("{} is empty", path.display())));
    }
    if headers.iter().collect::<Vec<_>>() != QUOTE_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`", QUOTE_HEADER.join(",")),
        });
    }
    let mut quotes: Vec<OptionQuote> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("invalid {what}"),
        };
        if record.len() != 3 {
            return Err(bad("row: expected 3 columns"));
        }
        let maturity_days: u32 = record[0].parse().map_err(|_| bad("maturity_days"))?;
        let strike: f64 = record[1].parse().map_err(|_| bad("strike"))?;
        let mid_price: f64 = record[2].parse().map_err(|_| bad("mid_price"))?;
        if maturity_days == 0 {
            return Err(Error::domain(format!(
                "line {line}: maturity_days must be > 0"
            )));
        }
        if !(strike > 0.0 && strike.is_finite()) || !(mid_price > 0.0 && mid_price.is_finite()) {
            return Err(Error::domain(format!(
                "line {line}: strike and mid_price must be positive"
            )));
        }
        if quotes
            .iter()
            .any(|q| q.maturity_days == maturity_days && q.strike == strike)
        {
            return Err(Error::domain(format!(
                "line {line}: duplicate quote for maturity {maturity_days}, strike {strike}"
            )));
        }
        quotes.push(OptionQuote {
            maturity_days,
            strike,
            mid_price,
        });
    }
    if quotes.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no quote rows",
            path.display()
        )));
    }
    QuoteSet::new(quotes, spot, rate)
}

/// Writes quotes in the format read by [`parse_quotes`].
pub fn write_quotes(quotes: &QuoteSet, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", QUOTE_HEADER.join(","))?;
    for q in quotes.quotes() {
        writeln!(out, "{},{},{}", q.maturity_days, q.strike, q.mid_price)?;
    }
    out.flush()?;
    Ok(())
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(io::Error::other(e)))?;
    emit_text(&(text + "\n"), out)
}

fn emit_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_price(a: PriceArgs, c: &Common) -> Result<()> {
    let hurst = parse_hurst_spec(&a.hurst)?;
    let result = call_price(&PricingInput {
        spot: a.spot,
        strike: a.strike,
        rate: a.rate,
        sigma: a.sigma,
        maturity: a.maturity.years(),
        hurst: &hurst,
    })?;
    let mut report = serde_json::to_value(result).map_err(|e| Error::Io(io::Error::other(e)))?;
    report["schema_version"] = json!(SCHEMA_VERSION);
    emit_json(&report, c.out.as_deref())
}

fn cmd_simulate(a: SimulateArgs, c: &Common) -> Result<()> {
    let hurst = parse_hurst_spec(&a.hurst)?;
    let maturity = a.maturity.years();
    let strike = a.strike.unwrap_or(a.spot);
    let cfg = McConfig {
        n_paths: a.paths,
        n_steps: a.steps,
        seed: c.seed,
        maturity,
        market: MarketParams {
            spot: a.spot,
            mu: a.mu,
            rate: a.rate,
            sigma: a.sigma,
        },
        hurst: hurst.clone(),
    };
    let closed = call_price(&PricingInput {
        spot: a.spot,
        strike,
        rate: a.rate,
        sigma: a.sigma,
        maturity,
        hurst: &hurst,
    })?;
    let terminal = simulate_terminal_log_price(&cfg)?;
    let call = call_estimate(&cfg, &terminal, strike);
    let moments = moments_estimate(&cfg, &terminal);
    if let Some(path) = &a.terminal_csv {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "path,x_t,s_t")?;
        for (i, x) in terminal.iter().enumerate() {
            writeln!(w, "{i},{x},{}", (x + a.mu * maturity).exp())?;
        }
        w.flush()?;
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "maturity_years": maturity,
        "strike": strike,
        "n_paths": a.paths,
        "n_steps": a.steps,
        "seed": c.seed,
        "hurst": hurst,
        "market": cfg.market,
        "call": call,
        "closed_form_call": closed.price,
        "mean_s_t": moments.mean_s_t,
        "var_s_t": moments.var_s_t,
        "closed_form_mean_s_t": mean_price(a.spot, a.mu, maturity),
        "closed_form_var_s_t": variance_price(a.spot, a.mu, a.sigma, &hurst, maturity)?,
    });
    emit_json(&report, c.out.as_deref())
}

fn cmd_density(a: DensityArgs, c: &Common) -> Result<()> {
    if a.points < 2 || !(a.width > 0.0) {
        return Err(Error::domain("density needs --points >= 2 and --width > 0"));
    }
    let params = DensityParams::new(a.x0, a.sigma, parse_hurst_spec(&a.hurst)?)?;
    let mean = params.log_mean(a.t)?;
    let sd = params.log_variance(a.t)?.sqrt();
    // validates t > 0 before any output
    params.pdf(mean, a.t)?;
    let mut text = String::from("x,density\n");
    let (lo, hi) = (mean - a.width * sd, mean + a.width * sd);
    for i in 0..a.points {
        let x = lo + (hi - lo) * i as f64 / (a.points - 1) as f64;
        text.push_str(&format!("{x},{}\n", params.pdf(x, a.t)?));
    }
    emit_text(&text, c.out.as_deref())
}

#[derive(Serialize)]
struct QuoteFit {
    maturity_days: u32,
    strike: f64,
    market_mid: f64,
    model_price: f64,
}

fn model_report(result: &CalibrationResult, quotes: &QuoteSet) -> serde_json::Value {
    let per_quote: Vec<QuoteFit> = quotes
        .quotes()
        .iter()
        .zip(&result.model_prices)
        .map(|(q, p)| QuoteFit {
            maturity_days: q.maturity_days,
            strike: q.strike,
            market_mid: q.mid_price,
            model_price: *p,
        })
        .collect();
    json!({
        "model": result.kind().name(),
        "params": result.model,
        "mse": result.mse,
        "per_quote": per_quote,
        "iterations": result.iterations,
        "evaluations": result.evaluations,
        "restarts_used": result.restarts_used,
        "converged": result.converged,
    })
}

fn write_plot_csv(
    path: &Path,
    quotes: &QuoteSet,
    columns: &[Option<&CalibrationResult>],
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "maturity_days,market_mid,mf_price,f_price,bs_price")?;
    for (i, q) in quotes.quotes().iter().enumerate() {
        let cells: Vec<String> = columns
            .iter()
            .map(|c| c.map_or(String::new(), |r| r.model_prices[i].to_string()))
            .collect();
        writeln!(w, "{},{},{}", q.maturity_days, q.mid_price, cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs, c: &Common) -> Result<()> {
    let quotes = parse_quotes(&a.fit.quotes, a.fit.spot, a.fit.rate)?;
    let kind = ModelKind::from(a.model);
    let (result, failure) = match calibrate(&quotes, kind, &a.fit.config(c.seed)) {
        Ok(r) => (r, None),
        Err(Error::NonConvergence(best)) => (*best, Some("did not converge")),
        Err(e) => return Err(e),
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "spot": quotes.spot(),
        "rate": quotes.rate(),
        "n_quotes": quotes.len(),
        "config": a.fit.config(c.seed),
        "result": model_report(&result, &quotes),
    });
    emit_json(&report, c.out.as_deref())?;
    if let Some(path) = &a.fit.plot_csv {
        let mut cols = [None, None, None];
        let slot = match kind {
            ModelKind::Multifractional => 0,
            ModelKind::Fractional => 1,
            ModelKind::Classical => 2,
        };
        cols[slot] = Some(&result);
        write_plot_csv(path, &quotes, &cols)?;
    }
    match failure {
        Some(_) => Err(Error::NonConvergence(Box::new(result))),
        None => Ok(()),
    }
}

fn cmd_compare(a: CompareArgs, c: &Common) -> Result<()> {
    let quotes = parse_quotes(&a.fit.quotes, a.fit.spot, a.fit.rate)?;
    let comparison = compare_models(&quotes, &a.fit.config(c.seed))?;
    let mut models = serde_json::Map::new();
    for r in &comparison.ranked {
        models.insert(r.kind().name().to_string(), model_report(r, &quotes));
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "spot": quotes.spot(),
        "rate": quotes.rate(),
        "n_quotes": quotes.len(),
        "config": a.fit.config(c.seed),
        "ranking": comparison.ranked.iter().map(|r| r.kind().name()).collect::<Vec<_>>(),
        "models": models,
        "failures": comparison.failures,
    });
    emit_json(&report, c.out.as_deref())?;
    if let Some(path) = &a.fit.plot_csv {
        let cols = [
            comparison.get(ModelKind::Multifractional),
            comparison.get(ModelKind::Fractional),
            comparison.get(ModelKind::Classical),
        ];
        write_plot_csv(path, &quotes, &cols)?;
    }
    Ok(())
}

fn cmd_sample_paths(a: SamplePathsArgs, c: &Common) -> Result<()> {
    let hurst = parse_hurst_spec(&a.hurst)?;
    let grid = match (a.times, a.horizon, a.n_times) {
        (Some(times), _, _) => PathGrid::new(times, a.paths, c.seed)?,
        (None, Some(h), Some(n)) => PathGrid::uniform(h, n, a.paths, c.seed)?,
        _ => return Err(Error::domain("give --times or --horizon with --n-times")),
    };
    let paths = CovarianceKernel::new(hurst).sample_paths(&grid)?;
    let mut text = paths
        .times()
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",");
    text.push('\n');
    for p in paths.paths().take(paths.n_paths()) {
        text.push_str(
            &p.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        text.push('\n');
    }
    emit_text(&text, c.out.as_deref())
}
