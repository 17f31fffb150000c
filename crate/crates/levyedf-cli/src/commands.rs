//! Implementations of the five subcommands.

use std::path::{Path, PathBuf};

use serde::Serialize;

use levyedf::conditions;
use levyedf::estimator::{self, confidence_band};
use levyedf::limitlaw::{self, BiasMethod, BiasStudyConfig, CltReport, ExperimentConfig};
use levyedf::models::{ModelSpec, RhoSpec};
use levyedf::pathsim::{
    CoeffFn, CoefficientSpec, IncrementPath, ObservationScheme, RngStream, SimOptions, Simulator,
};

use crate::error::CliError;
use crate::io::{self, fmt17, InputFormat};
use crate::spec_parse;

pub fn check_conditions(
    beta: f64,
    zeta: f64,
    tau: f64,
    y: Option<f64>,
    json: bool,
) -> Result<(), CliError> {
    let report = conditions::constants_report(beta, zeta, tau, y)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{report}");
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SimulateConfig {
    model: ModelSpec,
    drift: CoeffFn,
    vol: CoeffFn,
    n: usize,
    delta_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<f64>,
    gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_cut: Option<f64>,
    seed: u64,
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    model_spec: &str,
    b_spec: &str,
    sigma_spec: &str,
    n: usize,
    delta: Option<f64>,
    y: Option<f64>,
    gamma: f64,
    u_cut: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let model_spec = spec_parse::parse_model(model_spec)?;
    let drift = spec_parse::parse_coeff(b_spec)?;
    let vol = spec_parse::parse_coeff(sigma_spec)?;
    let scheme = resolve_scheme(n, delta, y, gamma)?;

    let config = SimulateConfig {
        model: model_spec.clone(),
        drift,
        vol,
        n,
        delta_n: scheme.delta_n(),
        y: scheme.y(),
        gamma,
        u_cut,
        seed,
    };
    io::write_manifest(out, "simulate", &config, Some(seed))?;

    let model = model_spec.build()?;
    let coeffs = CoefficientSpec::new(drift, vol)?;
    let sim = Simulator::new(
        &model,
        coeffs,
        scheme,
        SimOptions { u_cut, gaussian_small_jumps: true },
    )?;
    let path = sim.simulate(RngStream::root(seed))?;

    let counts = path.large_jump_counts();
    let rows: Vec<Vec<String>> = path
        .increments()
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (inc, c))| vec![i.to_string(), fmt17(*inc), c.to_string()])
        .collect();
    io::write_csv(&out.join("increments.csv"), &["index", "increment", "n_large_jumps"], &rows)?;

    let meta = serde_json::json!({
        "scheme": path.scheme(),
        "seed": seed,
        "model_hash": io::config_hash(&model_spec)?.1,
        "meta": path.meta(),
    });
    io::write_json(&out.join("increments.meta.json"), &meta)?;
    println!(
        "wrote {} increments ({} large jumps) to {}",
        path.n(),
        path.jumps().len(),
        out.display()
    );
    Ok(())
}

fn resolve_scheme(
    n: usize,
    delta: Option<f64>,
    y: Option<f64>,
    gamma: f64,
) -> Result<ObservationScheme, CliError> {
    match (delta, y) {
        (Some(d), None) => Ok(ObservationScheme::new(n, d, gamma)?),
        (None, Some(y)) => Ok(ObservationScheme::from_rate(n, y, gamma)?),
        (Some(_), Some(_)) => {
            Err(CliError::Config("give either --delta or --y, not both".into()))
        }
        (None, None) => Err(CliError::Config("one of --delta or --y is required".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
struct EstimateConfig {
    input: PathBuf,
    format: String,
    rho: RhoSpec,
    gamma: f64,
    delta_n: f64,
    n: usize,
    grid: Vec<f64>,
    level: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn estimate(
    input: &Path,
    format: InputFormat,
    delta_flag: Option<f64>,
    rho_spec: &str,
    gamma: f64,
    grid_spec: &str,
    level: f64,
    out: &Path,
) -> Result<(), CliError> {
    let rho_spec = spec_parse::parse_rho(rho_spec)?;
    let grid = spec_parse::parse_grid_points(grid_spec)?;
    let (increments, inferred) = io::ingest_csv(input, format)?;
    let delta_n = match (format, delta_flag, inferred) {
        (InputFormat::Prices, Some(_), _) => {
            return Err(CliError::Config(
                "--delta conflicts with prices input (inferred from timestamps)".into(),
            ))
        }
        (InputFormat::Prices, None, Some(dt)) => dt,
        (InputFormat::Increments, Some(d), _) => d,
        (InputFormat::Increments, None, _) => {
            return Err(CliError::Config("--delta is required for increments input".into()))
        }
        (InputFormat::Prices, None, None) => unreachable!("prices always infer the mesh"),
    };

    let n = increments.len();
    let config = EstimateConfig {
        input: input.to_path_buf(),
        format: format!("{format:?}").to_lowercase(),
        rho: rho_spec.clone(),
        gamma,
        delta_n,
        n,
        grid: grid.clone(),
        level,
    };
    io::write_manifest(out, "estimate", &config, None)?;

    let scheme = ObservationScheme::new(n, delta_n, gamma)?;
    let path = IncrementPath::from_observations(increments, scheme)?;
    let rho = rho_spec.build()?;
    let ldf = estimator::estimate(&path, &rho);

    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        let (lo, hi) = confidence_band(&ldf, &rho, t, level)?;
        rows.push(vec![fmt17(t), fmt17(ldf.evaluate(t)), fmt17(lo), fmt17(hi)]);
    }
    io::write_csv(&out.join("estimate.csv"), &["t", "n_bar", "lo", "hi"], &rows)?;
    println!(
        "estimated on {} increments ({} kept above v_n = {}) -> {}",
        n,
        ldf.kept().len(),
        ldf.v_n(),
        out.join("estimate.csv").display()
    );
    Ok(())
}

pub fn verify_clt(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config_path)?;
    let config: ExperimentConfig = serde_json::from_str(&text)?;
    io::write_manifest(out, "verify-clt", &config, Some(config.seed))?;

    let report = limitlaw::run_clt_experiment(&config)?;
    write_clt_outputs(out, &report)?;

    if let Some(check) = &report.scheme_check {
        if !check.passed {
            eprintln!(
                "warning: observation scheme is NOT conforming (y = {:.6}, window ({:.6}, {:.6}))",
                check.y, check.t1, check.t2
            );
        }
    }
    println!(
        "replications: {}  grid points: {}  mean kept: {:.1}",
        report.config.replications,
        report.grid.len(),
        report.mean_kept
    );
    println!(
        "sup-statistic two-sample KS: D = {:.5}, p = {:.5}{}",
        report.sup_ks.statistic,
        report.sup_ks.p_value,
        if report.degenerate { "  (degenerate)" } else { "" }
    );
    println!("report written to {}", out.display());
    Ok(())
}

fn write_clt_outputs(out: &Path, report: &CltReport) -> Result<(), CliError> {
    io::write_json(&out.join("report.json"), report)?;

    let marginal_rows: Vec<Vec<String>> = report
        .marginals
        .iter()
        .map(|s| {
            vec![
                fmt17(s.t),
                fmt17(s.n_rho),
                fmt17(s.h),
                fmt17(s.mean),
                fmt17(s.variance),
                if s.h > 0.0 { fmt17(s.variance / s.h) } else { String::new() },
                s.normality_p.map(fmt17).unwrap_or_default(),
            ]
        })
        .collect();
    io::write_csv(
        &out.join("marginals.csv"),
        &["t", "n_rho", "h", "mean", "variance", "var_ratio", "normality_p"],
        &marginal_rows,
    )?;

    let m = report.config.replications as f64;
    let mut cov_rows = Vec::new();
    let t_count = report.grid.len();
    for i in 0..t_count {
        for j in i..t_count {
            let emp = report.covariance.empirical[i][j];
            let theo = report.covariance.theoretical[i][j];
            let h_ii = report.covariance.theoretical[i][i];
            let h_jj = report.covariance.theoretical[j][j];
            let se = ((h_ii * h_jj + theo * theo) / (m - 1.0)).sqrt();
            let z = if se > 0.0 { fmt17((emp - theo) / se) } else { String::new() };
            cov_rows.push(vec![
                i.to_string(),
                j.to_string(),
                fmt17(report.grid[i]),
                fmt17(report.grid[j]),
                fmt17(emp),
                fmt17(theo),
                fmt17(se),
                z,
            ]);
        }
    }
    io::write_csv(
        &out.join("covariance.csv"),
        &["i", "j", "t_i", "t_j", "empirical", "theoretical", "se", "z"],
        &cov_rows,
    )?;

    let mut sup_rows: Vec<Vec<String>> = Vec::new();
    for v in &report.sup_finite {
        sup_rows.push(vec!["finite".into(), fmt17(*v)]);
    }
    for v in &report.sup_limit {
        sup_rows.push(vec!["limit".into(), fmt17(*v)]);
    }
    io::write_csv(&out.join("sup_stats.csv"), &["kind", "value"], &sup_rows)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct BiasCliConfig {
    model: ModelSpec,
    f: RhoSpec,
    study: BiasStudyConfig,
}

#[allow(clippy::too_many_arguments)]
pub fn bias_study(
    model_spec: &str,
    f_spec: &str,
    gamma: f64,
    dyadic: Option<&str>,
    deltas: Option<&str>,
    grid_spec: &str,
    method: &str,
    samples: u64,
    target_se: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let model_spec = spec_parse::parse_model(model_spec)?;
    let f_spec = spec_parse::parse_rho(f_spec)?;
    let t_grid = spec_parse::parse_grid_points(grid_spec)?;
    let deltas = parse_deltas(dyadic, deltas)?;
    let method = match method {
        "exact" => BiasMethod::ExactOneJump,
        "mc" => BiasMethod::MonteCarlo { samples, target_se },
        other => {
            return Err(CliError::Config(format!(
                "unknown method '{other}' (expected exact or mc)"
            )))
        }
    };
    let study = BiasStudyConfig { gamma, deltas, t_grid, method, seed };
    let config = BiasCliConfig { model: model_spec.clone(), f: f_spec.clone(), study: study.clone() };
    io::write_manifest(out, "bias-study", &config, Some(seed))?;

    let model = model_spec.build()?;
    let f = f_spec.build()?;
    let rows = limitlaw::bias_study(&model, |x| f.eval(x), f.bound(), &study)?;

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt17(r.delta_n),
                fmt17(r.v_n),
                fmt17(r.sup_error),
                fmt17(r.ratio),
                r.max_se.map(fmt17).unwrap_or_default(),
            ]
        })
        .collect();
    io::write_csv(
        &out.join("bias.csv"),
        &["delta_n", "v_n", "sup_error", "ratio", "max_se"],
        &csv_rows,
    )?;
    for r in &rows {
        println!(
            "delta = {:<12.6e} v_n = {:<10.5} sup_error = {:<12.6e} ratio = {:.6e}",
            r.delta_n, r.v_n, r.sup_error, r.ratio
        );
    }
    println!("table written to {}", out.join("bias.csv").display());
    Ok(())
}

fn parse_deltas(dyadic: Option<&str>, list: Option<&str>) -> Result<Vec<f64>, CliError> {
    match (dyadic, list) {
        (Some(spec), None) => {
            let (lo, hi) = spec
                .split_once(':')
                .ok_or_else(|| CliError::Config(format!("--dyadic expects lo:hi, got '{spec}'")))?;
            let lo: u32 = lo
                .parse()
                .map_err(|_| CliError::Config(format!("--dyadic: '{lo}' is not an exponent")))?;
            let hi: u32 = hi
                .parse()
                .map_err(|_| CliError::Config(format!("--dyadic: '{hi}' is not an exponent")))?;
            if lo > hi {
                return Err(CliError::Config("--dyadic expects lo <= hi".into()));
            }
            Ok((lo..=hi).map(|k| 2f64.powi(-(k as i32))).collect())
        }
        (None, Some(spec)) => spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("--deltas: '{s}' is not a number")))
            })
            .collect(),
        (Some(_), Some(_)) => Err(CliError::Config("give --dyadic or --deltas, not both".into())),
        (None, None) => Err(CliError::Config("one of --dyadic or --deltas is required".into())),
    }
}
