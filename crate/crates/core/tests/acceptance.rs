//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfbs::calibration::{
    calibrate, compare_models, generate_synthetic_quotes, maturity_ladder, CalibrationConfig,
    ModelKind, ModelSpec, OptionQuote, QuoteSet, DEFAULT_FREQUENCY, TRADING_DAYS_PER_YEAR,
};
use mfbs::cli::{parse_quotes, write_quotes};
use mfbs::density::{
    fpe_residual, mean_price, quadrature_price_moments, variance_price, DensityParams,
};
use mfbs::mbm::{CovarianceKernel, PathGrid};
use mfbs::monte_carlo::{mc_call_price, mc_moments, MarketParams, McConfig};
use mfbs::pricer::{call_price, classical_bs_price, fractional_bs_price, PricingInput};
use mfbs::HurstFunction;

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check, Duration);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// (spot, sigma, maturity) over moneyness [0.8, 1.2], sigma [0.1, 0.4], T [1/252, 2].
fn reduction_grid() -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for m in linspace(0.8, 1.2, 5) {
        for s in linspace(0.1, 0.4, 5) {
            for t in linspace(1.0 / 252.0, 2.0, 5) {
                out.push((100.0 * m, s, t));
            }
        }
    }
    out
}

const STRIKE: f64 = 100.0;
const RATE: f64 = 0.05;

fn price(h: &HurstFunction, spot: f64, strike: f64, rate: f64, sigma: f64, t: f64) -> f64 {
    call_price(&PricingInput {
        spot,
        strike,
        rate,
        sigma,
        maturity: t,
        hurst: h,
    })
    .unwrap()
    .price
}

fn classical_reduction() -> Check {
    let h = HurstFunction::constant(0.5).unwrap();
    let mut worst: f64 = 0.0;
    for (s, sig, t) in reduction_grid() {
        let bs = classical_bs_price(s, STRIKE, RATE, sig, t).map_err(|e| e.to_string())?;
        worst = worst.max((price(&h, s, STRIKE, RATE, sig, t) - bs).abs());
    }
    ensure(worst < 1e-12, || format!("max |diff| {worst:e}"))?;
    Ok(format!("125 points, max |diff| {worst:.1e}"))
}

fn fractional_reduction() -> Check {
    let mut worst: f64 = 0.0;
    for hurst in [0.3, 0.6, 0.8] {
        let h = HurstFunction::constant(hurst).unwrap();
        for (s, sig, t) in reduction_grid() {
            let f =
                fractional_bs_price(s, STRIKE, RATE, sig, hurst, t).map_err(|e| e.to_string())?;
            worst = worst.max((price(&h, s, STRIKE, RATE, sig, t) - f).abs());
        }
    }
    ensure(worst < 1e-12, || format!("max |diff| {worst:e}"))?;
    Ok(format!("375 points, max |diff| {worst:.1e}"))
}

fn mc_variants() -> Vec<(&'static str, HurstFunction)> {
    vec![
        ("const 0.5", HurstFunction::constant(0.5).unwrap()),
        ("const 0.7", HurstFunction::constant(0.7).unwrap()),
        (
            "sin 0.1,0,0.5",
            HurstFunction::sinusoidal(0.1, 0.0, 0.5, DEFAULT_FREQUENCY).unwrap(),
        ),
    ]
}

fn mc_config(hurst: &HurstFunction, maturity: f64, seed: u64) -> McConfig {
    McConfig {
        n_paths: 1_000_000,
        n_steps: 128,
        seed,
        maturity,
        market: MarketParams {
            spot: 100.0,
            mu: 0.03,
            rate: RATE,
            sigma: 0.2,
        },
        hurst: hurst.clone(),
    }
}

fn monte_carlo_agreement() -> Check {
    let mut worst_z: f64 = 0.0;
    let mut worst_se: f64 = 0.0;
    for (name, h) in mc_variants() {
        for (i, t) in [0.25, 1.0, 2.0].into_iter().enumerate() {
            let cfg = mc_config(&h, t, 100 + i as u64);
            let mc = mc_call_price(&cfg, STRIKE).map_err(|e| e.to_string())?;
            let exact = price(&h, 100.0, STRIKE, RATE, 0.2, t);
            let z = (mc.value - exact).abs() / mc.standard_error;
            ensure(z < 4.0, || {
                format!("{name} T={t}: mc {} vs {exact}, {z:.2} SE", mc.value)
            })?;
            ensure(mc.standard_error < 0.1, || {
                format!("{name} T={t}: SE {}", mc.standard_error)
            })?;
            worst_z = worst_z.max(z);
            worst_se = worst_se.max(mc.standard_error);
        }
    }
    Ok(format!(
        "9 configs, max {worst_z:.2} SE, max SE {worst_se:.4}"
    ))
}

fn moment_laws() -> Check {
    let mut worst_z: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for (name, h) in mc_variants() {
        for (i, t) in [0.25, 1.0, 2.0].into_iter().enumerate() {
            let cfg = mc_config(&h, t, 200 + i as u64);
            let m = &cfg.market;
            let mean = mean_price(m.spot, m.mu, t);
            let var = variance_price(m.spot, m.mu, m.sigma, &h, t).map_err(|e| e.to_string())?;
            let mc = mc_moments(&cfg).map_err(|e| e.to_string())?;
            let z_mean = (mc.mean_s_t.value - mean).abs() / mc.mean_s_t.standard_error;
            let z_var = (mc.var_s_t.value - var).abs() / mc.var_s_t.standard_error;
            ensure(z_mean < 4.0 && z_var < 4.0, || {
                format!("{name} T={t}: mean {z_mean:.2} SE, variance {z_var:.2} SE")
            })?;
            worst_z = worst_z.max(z_mean).max(z_var);

            let p =
                DensityParams::new(m.spot.ln(), m.sigma, h.clone()).map_err(|e| e.to_string())?;
            let (qm, qv) = quadrature_price_moments(&p, m.mu, t).map_err(|e| e.to_string())?;
            let rel = ((qm - mean) / mean).abs().max(((qv - var) / var).abs());
            ensure(rel < 1e-6, || {
                format!("{name} T={t}: quadrature rel err {rel:e}")
            })?;
            worst_rel = worst_rel.max(rel);
        }
    }
    Ok(format!(
        "9 configs, max {worst_z:.2} SE, quadrature max rel {worst_rel:.1e}"
    ))
}

fn fokker_planck() -> Check {
    let h = HurstFunction::sinusoidal(0.1, 0.0, 0.5, DEFAULT_FREQUENCY).unwrap();
    let p = DensityParams::new(0.0, 0.2, h).unwrap();
    let mut points = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        let m = p.log_mean(t).unwrap();
        let sd = p.log_variance(t).unwrap().sqrt();
        for k in [-1.0, 0.0, 1.0] {
            points.push((m + k * sd, t));
        }
    }
    let residual =
        |x: f64, t: f64, step: f64| fpe_residual(&p, x, t, step, step).map_err(|e| e.to_string());
    let mut max_small: f64 = 0.0;
    for &(x, t) in &points {
        max_small = max_small.max(residual(x, t, 1e-4)?.abs());
    }
    ensure(max_small < 1e-4, || {
        format!("max |residual| at step 1e-4 = {max_small:e}")
    })?;
    // halving the step should quarter the residual
    let steps = [4e-3, 2e-3, 1e-3];
    let mut orders = Vec::new();
    for &(x, t) in &points {
        let r: Vec<f64> = steps
            .iter()
            .map(|&s| residual(x, t, s))
            .collect::<Result<_, _>>()?;
        for w in r.windows(2) {
            orders.push((w[0].abs() / w[1].abs()).log2());
        }
    }
    let (lo, hi) = orders
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| {
            (a.min(o), b.max(o))
        });
    ensure(lo > 1.8 && hi < 2.2, || {
        format!("observed orders in [{lo:.3}, {hi:.3}]")
    })?;
    Ok(format!(
        "max |residual| {max_small:.1e} at step 1e-4, observed order [{lo:.3}, {hi:.3}]"
    ))
}

fn covariance_sampling() -> Check {
    let kernel =
        CovarianceKernel::new(HurstFunction::sinusoidal(0.1, 0.0, 0.5, DEFAULT_FREQUENCY).unwrap());
    let times = vec![0.25, 0.5, 1.0, 1.5];
    let n = 100_000;
    let paths = kernel
        .sample_paths(&PathGrid::new(times.clone(), n, 11).unwrap())
        .map_err(|e| e.to_string())?;
    let unit = kernel.covariance(1.0, 1.0).unwrap();
    ensure(unit == 1.0, || format!("R(1, 1) = {unit}"))?;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in i..4 {
            let r_ij = kernel.covariance(times[i], times[j]).unwrap();
            let r_ii = kernel.covariance(times[i], times[i]).unwrap();
            let r_jj = kernel.covariance(times[j], times[j]).unwrap();
            let products: Vec<f64> = paths.paths().map(|p| p[i] * p[j]).collect();
            let emp = mfbs::numerics::pairwise_sum(&products) / n as f64;
            // Gaussian: Var[X Y] = R_ii R_jj + R_ij^2
            let se = ((r_ii * r_jj + r_ij * r_ij) / n as f64).sqrt();
            let z = (emp - r_ij).abs() / se;
            ensure(z < 4.0, || {
                format!("entry ({i},{j}): {emp} vs {r_ij}, {z:.2} SE")
            })?;
            worst = worst.max(z);
        }
    }
    Ok(format!("10 entries, max {worst:.2} SE, R(1,1) = 1"))
}

fn truth() -> ModelSpec {
    ModelSpec::Multifractional {
        amplitude: 0.08,
        phase: 1.0,
        level: 0.55,
        sigma: 0.18,
        frequency: DEFAULT_FREQUENCY,
    }
}

const SPOT: f64 = 3970.99;
const FIXTURE_STRIKE: f64 = 3970.0;
const FIXTURE_RATE: f64 = 0.045013;

fn calibration_recovery() -> Check {
    let days = maturity_ladder(1, 105, 20);
    let cfg = CalibrationConfig::default();
    let clean =
        generate_synthetic_quotes(&truth(), SPOT, FIXTURE_RATE, FIXTURE_STRIKE, &days, 0.0, 0)
            .map_err(|e| e.to_string())?;
    let fit = calibrate(&clean, ModelKind::Multifractional, &cfg).map_err(|e| e.to_string())?;
    let sigma_err = (fit.model.sigma() - truth().sigma()).abs();
    let (h_fit, h_true) = (
        fit.model.hurst_function().unwrap(),
        truth().hurst_function().unwrap(),
    );
    let h_err = clean
        .quotes()
        .iter()
        .map(|q| {
            (h_fit.evaluate(q.maturity_years()).unwrap()
                - h_true.evaluate(q.maturity_years()).unwrap())
            .abs()
        })
        .fold(0.0, f64::max);
    ensure(sigma_err < 1e-3 && h_err < 5e-3, || {
        format!(
            "sigma err {sigma_err:e}, max h(T_i) err {h_err:e}, fit {:?}",
            fit.model
        )
    })?;

    let noisy =
        generate_synthetic_quotes(&truth(), SPOT, FIXTURE_RATE, FIXTURE_STRIKE, &days, 0.5, 1)
            .map_err(|e| e.to_string())?;
    let cmp = compare_models(&noisy, &cfg).map_err(|e| e.to_string())?;
    let mse = |k| cmp.get(k).map(|r| r.mse).ok_or(format!("{k:?} missing"));
    let (mf, f, bs) = (
        mse(ModelKind::Multifractional)?,
        mse(ModelKind::Fractional)?,
        mse(ModelKind::Classical)?,
    );
    ensure(mf <= f && f <= bs, || {
        format!("mse ordering violated: {mf} / {f} / {bs}")
    })?;
    Ok(format!(
        "sigma err {sigma_err:.1e}, h err {h_err:.1e}; noisy mse {mf:.4} <= {f:.4} <= {bs:.4}"
    ))
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfbs"))
}

fn run_cli(args: &[&str]) -> std::result::Result<String, String> {
    let out = cli().args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "mfbs {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn experiment_fixture() -> Check {
    ensure(
        TRADING_DAYS_PER_YEAR == 252.0 && DEFAULT_FREQUENCY == 252.0 / 30.0,
        || "day-count constants changed".into(),
    )?;
    let q = OptionQuote {
        maturity_days: 63,
        strike: FIXTURE_STRIKE,
        mid_price: 100.0,
    };
    ensure(q.maturity_years() == 0.25, || {
        format!("63 days -> {} years", q.maturity_years())
    })?;
    // one sinusoid cycle every 30 trading days
    let h = truth().hurst_function().unwrap();
    for d in [1.0, 17.0, 40.0] {
        let (a, b) = (
            h.evaluate(d / 252.0).unwrap(),
            h.evaluate((d + 30.0) / 252.0).unwrap(),
        );
        ensure((a - b).abs() < 1e-12, || {
            format!("h not 30-day periodic at day {d}")
        })?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let quotes_path = dir.path().join("quotes.csv");
    let quotes = generate_synthetic_quotes(
        &truth(),
        SPOT,
        FIXTURE_RATE,
        FIXTURE_STRIKE,
        &maturity_ladder(1, 105, 20),
        0.5,
        4,
    )
    .map_err(|e| e.to_string())?;
    write_quotes(&quotes, &quotes_path).map_err(|e| e.to_string())?;
    let plot = dir.path().join("fit.csv");
    let report: serde_json::Value = serde_json::from_str(&run_cli(&[
        "compare",
        "--quotes",
        quotes_path.to_str().unwrap(),
        "--spot",
        "3970.99",
        "--rate",
        "0.045013",
        "--plot-csv",
        plot.to_str().unwrap(),
    ])?)
    .map_err(|e| e.to_string())?;
    ensure(
        report["spot"] == 3970.99 && report["rate"] == 0.045013,
        || "spot/rate not echoed".into(),
    )?;
    ensure(report["config"]["frequency"] == DEFAULT_FREQUENCY, || {
        "frequency not 252/30".into()
    })?;
    let mses: Vec<f64> = ["multifractional", "fractional", "classical"]
        .iter()
        .map(|m| report["models"][m]["mse"].as_f64().unwrap_or(f64::NAN))
        .collect();
    ensure(mses[0] <= mses[1] && mses[1] <= mses[2], || {
        format!("mse ordering {mses:?}")
    })?;
    let header = std::fs::read_to_string(&plot).map_err(|e| e.to_string())?;
    ensure(
        header.starts_with("maturity_days,market_mid,mf_price,f_price,bs_price\n"),
        || "plot CSV header".into(),
    )?;
    ensure(header.lines().count() == 21, || "plot CSV rows".into())?;
    Ok(format!(
        "S0 {SPOT}, K {FIXTURE_STRIKE}, r {FIXTURE_RATE}, f 252/30 wired; absolute mse triplet not reproducible (no quote table), ordering {:.3} <= {:.3} <= {:.3}",
        mses[0], mses[1], mses[2]
    ))
}

fn chain_rule_sweep() -> std::result::Result<f64, String> {
    let variants = [
        HurstFunction::constant(0.3).unwrap(),
        HurstFunction::constant(0.8).unwrap(),
        HurstFunction::sinusoidal(0.1, 0.0, 0.5, DEFAULT_FREQUENCY).unwrap(),
        truth().hurst_function().unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for h in &variants {
        let tau = |t: f64| h.time_change(t).unwrap();
        for i in 0..=5000 {
            let t = 0.01 + i as f64 * (5.0 - 0.01) / 5000.0;
            let s = 1e-4;
            let fd = (8.0 * (tau(t + s) - tau(t - s)) - (tau(t + 2.0 * s) - tau(t - 2.0 * s)))
                / (12.0 * s);
            let r = (2.0 * h.drift_factor(t).unwrap() - fd).abs();
            ensure(r < 1e-6, || {
                format!("chain rule residual {r:e} at t={t} for {h:?}")
            })?;
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

fn pricer_sweep() -> std::result::Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    for _ in 0..n {
        let spot = rng.random_range(10.0..500.0);
        let strike = spot * rng.random_range(0.5..1.5);
        let rate = rng.random_range(0.0..0.1);
        let sigma = rng.random_range(0.05..0.8);
        let t = rng.random_range(0.01..3.0);
        let hurst = rng.random_range(0.1..0.9);
        let h = HurstFunction::constant(hurst).unwrap();
        let sin =
            HurstFunction::sinusoidal(0.1, rng.random_range(0.0..6.0), 0.5, DEFAULT_FREQUENCY)
                .unwrap();
        for hf in [&h, &sin] {
            let p = price(hf, spot, strike, rate, sigma, t);
            let lower = (spot - strike * (-rate * t).exp()).max(0.0);
            ensure(p >= lower && p <= spot, || {
                format!("bounds violated: {p} not in [{lower}, {spot}]")
            })?;
            let tol = 1e-12 * spot;
            let bump = 1.0 + 1e-3;
            let checks = [
                (
                    "spot",
                    price(hf, spot * bump, strike, rate, sigma, t) >= p - tol,
                ),
                (
                    "strike",
                    price(hf, spot, strike * bump, rate, sigma, t) <= p + tol,
                ),
                (
                    "sigma",
                    price(hf, spot, strike, rate, sigma * bump, t) >= p - tol,
                ),
                (
                    "rate",
                    price(hf, spot, strike, rate + 1e-3, sigma, t) >= p - tol,
                ),
            ];
            for (what, ok) in checks {
                ensure(ok, || {
                    format!("monotonicity in {what} violated at S={spot} K={strike} r={rate} s={sigma} T={t}")
                })?;
            }
        }
        // v = sigma^2 T^{2H} grows with T for a constant Hurst exponent
        let later = price(&h, spot, strike, rate, sigma, t * 1.001);
        ensure(
            later >= price(&h, spot, strike, rate, sigma, t) - 1e-12 * spot,
            || format!("monotonicity in T violated at S={spot} K={strike} T={t} H={hurst}"),
        )?;
    }
    Ok(n)
}

fn cli_round_trip(dir: &Path) -> std::result::Result<(), String> {
    let price_args = [
        "price",
        "--spot",
        "100",
        "--strike",
        "95",
        "--rate",
        "0.05",
        "--sigma",
        "0.2",
        "--maturity-days",
        "126",
        "--hurst",
        "sin:0.1,0,0.5",
    ];
    let a = run_cli(&price_args)?;
    ensure(a == run_cli(&price_args)?, || {
        "price output not deterministic".into()
    })?;
    let v: serde_json::Value = serde_json::from_str(&a).map_err(|e| e.to_string())?;
    for field in [
        "price",
        "d1",
        "d2",
        "effective_variance",
        "degenerate_flag",
        "schema_version",
    ] {
        ensure(v.get(field).is_some(), || {
            format!("price JSON lacks {field}")
        })?;
    }

    let sim = |threads: &str| {
        run_cli(&[
            "--threads",
            threads,
            "simulate",
            "--spot",
            "100",
            "--rate",
            "0.05",
            "--sigma",
            "0.2",
            "--maturity",
            "1",
            "--hurst",
            "sin:0.1,0,0.5",
            "--paths",
            "20000",
            "--steps",
            "32",
            "--seed",
            "7",
        ])
    };
    let one = sim("1")?;
    ensure(one == sim("3")?, || {
        "simulate output depends on thread count".into()
    })?;

    let quotes = QuoteSet::new(
        vec![
            OptionQuote {
                maturity_days: 30,
                strike: 3970.0,
                mid_price: 81.25,
            },
            OptionQuote {
                maturity_days: 5,
                strike: 3970.0,
                mid_price: 37.123456789,
            },
            OptionQuote {
                maturity_days: 5,
                strike: 4000.0,
                mid_price: 0.1 + 0.2,
            },
        ],
        SPOT,
        FIXTURE_RATE,
    )
    .map_err(|e| e.to_string())?;
    let path = dir.join("q.csv");
    write_quotes(&quotes, &path).map_err(|e| e.to_string())?;
    let back = parse_quotes(&path, SPOT, FIXTURE_RATE).map_err(|e| e.to_string())?;
    ensure(back == quotes, || {
        "quote CSV round trip changed values".into()
    })?;

    let pdf = dir.join("pdf.csv");
    run_cli(&[
        "density",
        "--x0",
        "0",
        "--sigma",
        "0.2",
        "--hurst",
        "sin:0.1,0,0.5",
        "--t",
        "1",
        "--out",
        pdf.to_str().unwrap(),
    ])?;
    let rows: Vec<(f64, f64)> = std::fs::read_to_string(&pdf)
        .map_err(|e| e.to_string())?
        .lines()
        .skip(1)
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    let mass: f64 = rows
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    ensure((mass - 1.0).abs() < 1e-6, || {
        format!("density CSV integrates to {mass}")
    })?;
    Ok(())
}

fn invariant_suites() -> Check {
    let worst = chain_rule_sweep()?;
    let n = pricer_sweep()?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    cli_round_trip(dir.path())?;
    Ok(format!(
        "chain rule max {worst:.1e}; {n} random pricer inputs, 0 violations; CLI round trips deterministic"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "classical reduction",
            classical_reduction,
            Duration::from_secs(1),
        ),
        (
            "fractional reduction",
            fractional_reduction,
            Duration::from_secs(1),
        ),
        (
            "Monte Carlo agreement",
            monte_carlo_agreement,
            Duration::from_secs(300),
        ),
        ("moment laws", moment_laws, Duration::from_secs(300)),
        (
            "Fokker-Planck certificate",
            fokker_planck,
            Duration::from_secs(10),
        ),
        (
            "covariance sampling",
            covariance_sampling,
            Duration::from_secs(60),
        ),
        (
            "calibration recovery",
            calibration_recovery,
            Duration::from_secs(120),
        ),
        (
            "experiment fixture",
            experiment_fixture,
            Duration::from_secs(120),
        ),
        (
            "invariant suites",
            invariant_suites,
            Duration::from_secs(30),
        ),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {budget:?}")),
            Err(e) => (false, e),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.2}s): {detail}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
