//! Subcommand implementations. Every file written embeds the run
//! configuration and toolkit version: JSON files in a `run` object, CSV
//! files in a leading `#` comment line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use fou2_core::fpe::{analytic_density, diffusion_coeff, evolve_with, DriftSpec, EvolveOptions, HarmonicVariance};
use fou2_core::kernel::{
    covariance_quadrature, covariance_series, u_of_t, variance, variance_quadrature, variance_series,
};
use fou2_core::langevin::{build_kernel_table, sample_covariance, simulate_with_table, SimulateOptions, DEFAULT_MAX_CELLS};
use fou2_core::verify::run_all;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{EnsembleFormat, RunConfig};
use crate::CliError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn run_record(cfg: &RunConfig) -> Value {
    json!({ "toolkit": "fou2", "version": VERSION, "config": cfg })
}

fn csv_writer(path: &Path, cfg: &RunConfig) -> Result<BufWriter<File>, CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {}", serde_json::to_string(&run_record(cfg)).expect("config serializes"))?;
    Ok(w)
}

fn write_json<T: Serialize>(path: &Path, cfg: &RunConfig, body: &T) -> Result<(), CliError> {
    let doc = json!({ "run": run_record(cfg), "result": body });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// 17 significant digits.
fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn numeric(what: String) -> impl FnOnce(fou2_core::Error) -> CliError {
    move |e| CliError::Numeric(format!("{what}: {e}"))
}

pub fn eval(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let e = cfg
        .eval
        .as_ref()
        .ok_or_else(|| CliError::Usage("configuration has no eval block".into()))?;
    let p = &cfg.params;
    let ctl = &cfg.series;
    if !e.times.is_empty() {
        let beta = e.beta.unwrap_or_else(|| e.times.iter().copied().fold(0.0, f64::max));
        let mut w = csv_writer(&out.join("eval.csv"), cfg)?;
        writeln!(w, "t,sigma2_series,sigma2_quadrature,U_t,D_t")?;
        for &t in &e.times {
            let s = variance_series(p, t, ctl).map_err(numeric(format!("sigma2_series at t = {t}")))?;
            let q = variance_quadrature(p, t, e.n_nodes).map_err(numeric(format!("sigma2_quadrature at t = {t}")))?;
            let u = u_of_t(p, t, beta, ctl).map_err(numeric(format!("U at t = {t}, beta = {beta}")))?;
            let d = diffusion_coeff(p, t, ctl).map_err(numeric(format!("D at t = {t}")))?;
            writeln!(w, "{},{},{},{},{}", f(t), f(s), f(q), f(u), f(d))?;
        }
        w.flush()?;
    }
    if !e.pairs.is_empty() {
        let mut w = csv_writer(&out.join("covariance.csv"), cfg)?;
        writeln!(w, "t,s,C_series,C_quadrature")?;
        for &[t, s] in &e.pairs {
            let cs = covariance_series(p, t, s, ctl).map_err(numeric(format!("C_series at (t, s) = ({t}, {s})")))?;
            let cq = covariance_quadrature(p, t, s, e.n_nodes)
                .map_err(numeric(format!("C_quadrature at (t, s) = ({t}, {s})")))?;
            writeln!(w, "{},{},{},{}", f(t), f(s), f(cs), f(cq))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn max_cells() -> Result<usize, CliError> {
    match std::env::var("FOU2_MAX_CELLS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("FOU2_MAX_CELLS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(DEFAULT_MAX_CELLS),
    }
}

#[derive(Serialize)]
struct VarianceRow {
    index: usize,
    t: f64,
    sample_variance: f64,
    /// Absent when fewer than two paths make it undefined.
    std_error: Option<f64>,
    sigma2: f64,
    sigma2_discrete: f64,
    pass: Option<bool>,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Usage("configuration has no simulate block".into()))?;
    let p = &cfg.params;
    let table = build_kernel_table(p, s.dt, s.n_steps, s.scheme)?;
    let opts = SimulateOptions {
        max_cells: max_cells()?,
        force_fft: None,
    };
    let ens = simulate_with_table(p, &table, s.n_steps, s.n_paths, s.seed, &opts)?;
    let file = match s.format {
        EnsembleFormat::Binary => {
            let path = out.join("ensemble.bin");
            let mut w = BufWriter::new(File::create(&path)?);
            ens.write_binary(&mut w)?;
            w.flush()?;
            path
        }
        EnsembleFormat::Csv => {
            let path = out.join("ensemble.csv");
            let mut w = csv_writer(&path, cfg)?;
            ens.write_csv(&mut w)?;
            w.flush()?;
            path
        }
    };
    let indices: Vec<usize> = if s.report_indices.is_empty() {
        let mut v: Vec<usize> = (1..=10).map(|j| (s.n_steps * j).div_ceil(10)).collect();
        v.dedup();
        v
    } else {
        s.report_indices.clone()
    };
    let mut rows = Vec::with_capacity(indices.len());
    for &k in &indices {
        let t = k as f64 * s.dt;
        let sigma2 = if k == 0 {
            0.0
        } else {
            variance(p, t, &cfg.series).map_err(numeric(format!("sigma2 at t = {t}")))?
        };
        let (value, se) = if s.n_paths >= 2 {
            let e = sample_covariance(&ens, k, k)?;
            (e.value, Some(e.std_error))
        } else {
            (ens.path(0)[k].powi(2), None)
        };
        rows.push(VarianceRow {
            index: k,
            t,
            sample_variance: value,
            std_error: se,
            sigma2,
            sigma2_discrete: table.discrete_variance(k),
            pass: se.map(|se| (value - sigma2).abs() <= 3.0 * se),
        });
    }
    let summary = json!({
        "ensemble_file": file.file_name().map(|n| n.to_string_lossy().into_owned()),
        "n_paths": s.n_paths,
        "n_steps": s.n_steps,
        "dt": s.dt,
        "seed": s.seed,
        "variance": rows,
    });
    write_json(&out.join("summary.json"), cfg, &summary)
}

#[derive(Serialize)]
struct MomentRow {
    t: f64,
    mass: f64,
    mean: f64,
    variance: f64,
    expected_mean: f64,
    expected_variance: f64,
    l1_to_analytic: Option<f64>,
}

pub fn fpe(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let c = cfg
        .fpe
        .as_ref()
        .ok_or_else(|| CliError::Usage("configuration has no fpe block".into()))?;
    let p = &cfg.params;
    let mut opts = EvolveOptions {
        snapshot_times: c.snapshot_times.clone(),
        ..Default::default()
    };
    if let Some(tol) = c.local_tol {
        opts.local_tol = tol;
    }
    let ev = evolve_with(p, &c.grid, &c.drift, c.x0, &opts)?;
    let harmonic = match c.drift {
        DriftSpec::Harmonic { omega } => Some(HarmonicVariance::new(p, omega, c.grid.t0, c.grid.t1, 256)?),
        _ => None,
    };
    let mut rows = Vec::new();
    for (i, field) in ev.snapshots.iter().chain(std::iter::once(&ev.field)).enumerate() {
        let t = field.t;
        let (expected_mean, expected_variance) = match c.drift {
            DriftSpec::Free => (c.x0, variance(p, t, &cfg.series)?),
            DriftSpec::Linear { g } => (c.x0 + g * (t - c.grid.t0), variance(p, t, &cfg.series)?),
            DriftSpec::Harmonic { omega } => (c.x0 * (-omega * t).exp(), harmonic.as_ref().expect("built above").v(t)),
        };
        let l1 = match c.drift {
            DriftSpec::Free => {
                // Surfaces any evaluation error before the closure swallows it.
                analytic_density(p, t, c.x0, c.x0)?;
                Some(field.l1_distance(|x| analytic_density(p, t, c.x0, x).unwrap_or(f64::NAN)))
            }
            _ => None,
        };
        rows.push(MomentRow {
            t,
            mass: field.mass(),
            mean: field.mean(),
            variance: field.variance(),
            expected_mean,
            expected_variance,
            l1_to_analytic: l1,
        });
        let mut w = csv_writer(&out.join(format!("density_{i:03}.csv")), cfg)?;
        field.write_csv(&mut w)?;
        w.flush()?;
    }
    let report = json!({
        "solver": ev.report,
        "mass_drift": ev.report.max_mass_error,
        "dx": c.grid.dx(),
        "moments": rows,
    });
    write_json(&out.join("fpe_report.json"), cfg, &report)
}

pub fn verify(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let v = cfg.verify.clone().unwrap_or_default();
    let checks = run_all(v.tier, v.seed)?;
    for c in &checks {
        println!("{c}");
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| format!("{} ({})", c.id, c.name)).collect();
    write_json(
        &out.join("verify.json"),
        cfg,
        &json!({ "tier": v.tier, "seed": v.seed, "pass": failed.is_empty(), "checks": checks }),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(format!("checks {}", failed.join(", "))))
    }
}
