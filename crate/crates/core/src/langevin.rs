//! Monte Carlo sampling of the process and the discrete fractional operator
//! that inverts it.
//!
//! Paths are generated in convolution form `x_k = √dt Σ_{j<k} w_{k-1-j} ξ_j`
//! from a table of kernel weights. Path `i` draws its noise from ChaCha8
//! stream `i` of the master seed, so ensembles are bit-identical for any
//! thread count.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{GreenFn, ProcessParams};
use crate::quad::{graded_integral, GaussLegendre};
use crate::specfun::{rgamma, SeriesControl};

/// How the kernel G is reduced to one weight per time cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelScheme {
    /// `w_k = G((k+½)dt)`.
    Midpoint,
    /// `w_k = (1/dt) ∫_cell G`.
    CellIntegrated,
    /// `w_k = ((1/dt) ∫_cell G²)^{1/2}`: reproduces the variance exactly at
    /// every grid time (G is positive, so no sign is lost).
    #[default]
    VarianceMatched,
}

/// Kernel weights on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTable {
    pub dt: f64,
    pub weights: Vec<f64>,
    pub scheme: KernelScheme,
}

impl KernelTable {
    /// Variance of the discrete process after `k` steps, dt·Σ_{j<k} w_j².
    pub fn discrete_variance(&self, k: usize) -> f64 {
        self.dt * self.weights[..k].iter().map(|w| w * w).sum::<f64>()
    }
}

pub fn build_kernel_table(p: &ProcessParams, dt: f64, n_steps: usize, scheme: KernelScheme) -> Result<KernelTable> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidParams("n_steps must be at least 1".into()));
    }
    let g = GreenFn::new(*p, SeriesControl::default())?;
    let ag = p.ag();
    let first = GaussLegendre::new(20);
    let cell = GaussLegendre::new(16);
    let weights: Result<Vec<f64>> = (0..n_steps)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let a = k as f64 * dt;
            match scheme {
                KernelScheme::Midpoint => g.g_auto(a + 0.5 * dt),
                KernelScheme::CellIntegrated | KernelScheme::VarianceMatched => {
                    let sq = scheme == KernelScheme::VarianceMatched;
                    let pow = if sq { 2 } else { 1 };
                    let mut err = None;
                    let mut f = |u: f64| match g.g_auto(u) {
                        Ok(v) => v.powi(pow),
                        Err(e) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    };
                    let integral = if k == 0 {
                        let exponent = if sq { 2.0 * ag - 2.0 } else { ag - 1.0 };
                        graded_integral("build_kernel_table", &mut f, dt, exponent, None, &first)?
                    } else if k < 8 {
                        cell.composite(&mut f, a, a + dt, 4)
                    } else {
                        cell.panel(&mut f, a, a + dt)
                    };
                    if let Some(e) = err {
                        return Err(e);
                    }
                    let mean = integral / dt;
                    Ok(if sq { mean.sqrt() } else { mean })
                }
            }
        })
        .collect();
    let weights = weights?;
    if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::Quadrature {
            op: "build_kernel_table",
            detail: format!("non-finite weight at k = {k}"),
        });
    }
    Ok(KernelTable { dt, weights, scheme })
}

/// Sampled trajectories, row-major `n_paths × (n_steps + 1)`, with x(0) = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub paths: Vec<f64>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub params: ProcessParams,
}

const MAGIC: &[u8; 8] = b"FOU2ENS1";

impl PathEnsemble {
    pub fn path(&self, i: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.paths[i * w..(i + 1) * w]
    }

    /// All samples at grid index k.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n_paths).map(|i| self.path(i)[k]).collect()
    }

    /// Binary layout: 8-byte magic `FOU2ENS1`, then little-endian
    /// `dt: f64, n_paths: u64, n_steps: u64, seed: u64`, then
    /// `n_paths × (n_steps + 1)` little-endian f64 values, row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        w.write_all(&(self.n_steps as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in &self.paths {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary layout; parameters are not part of the file.
    pub fn read_binary<R: Read>(mut r: R, params: ProcessParams) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidParams("not a path-ensemble file".into()));
        }
        let mut b = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let dt = f64::from_le_bytes(next(&mut r)?);
        let n_paths = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let seed = u64::from_le_bytes(next(&mut r)?);
        let len = n_paths
            .checked_mul(n_steps + 1)
            .ok_or_else(|| Error::Capacity("ensemble header overflows".into()))?;
        let mut paths = Vec::with_capacity(len);
        for _ in 0..len {
            paths.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(PathEnsemble {
            paths,
            n_paths,
            n_steps,
            dt,
            seed,
            params,
        })
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        self.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// CSV with a time column followed by one column per path.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for i in 0..self.n_paths {
            write!(w, ",path{i}")?;
        }
        writeln!(w)?;
        for k in 0..=self.n_steps {
            write!(w, "{:.16e}", k as f64 * self.dt)?;
            for i in 0..self.n_paths {
                write!(w, ",{:.16e}", self.path(i)[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Default cap on n_paths·(n_steps+1).
pub const DEFAULT_MAX_CELLS: usize = 1 << 27;

/// Above this many steps paths are convolved by FFT.
pub const DIRECT_CONVOLUTION_MAX: usize = 4096;

/// Simulation settings beyond the kernel table.
#[derive(Clone, Copy, Debug)]
pub struct SimulateOptions {
    pub max_cells: usize,
    /// Override of the direct/FFT switch, for testing.
    pub force_fft: Option<bool>,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            max_cells: DEFAULT_MAX_CELLS,
            force_fft: None,
        }
    }
}

fn noise(seed: u64, path: usize, n: usize, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    for v in out.iter_mut().take(n) {
        *v = rng.sample(StandardNormal);
    }
}

/// Direct triangular sum: out[k] = Σ_{j<k} w[k-1-j] xi[j], k = 0..=n.
pub(crate) fn convolve_direct(w: &[f64], xi: &[f64], out: &mut [f64]) {
    let n = xi.len();
    out[0] = 0.0;
    for k in 1..=n {
        let mut s = 0.0;
        for j in 0..k {
            s += w[k - 1 - j] * xi[j];
        }
        out[k] = s;
    }
}

struct FftConv {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    w_hat: Vec<Complex64>,
}

impl FftConv {
    fn new(w: &[f64], n: usize) -> Self {
        let size = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut w_hat: Vec<Complex64> = (0..size)
            .map(|i| Complex64::new(if i < n { w[i] } else { 0.0 }, 0.0))
            .collect();
        fwd.process(&mut w_hat);
        FftConv { size, fwd, inv, w_hat }
    }

    fn apply(&self, xi: &[f64], out: &mut [f64]) {
        let n = xi.len();
        let mut buf: Vec<Complex64> = (0..self.size)
            .map(|i| Complex64::new(if i < n { xi[i] } else { 0.0 }, 0.0))
            .collect();
        self.fwd.process(&mut buf);
        for (b, w) in buf.iter_mut().zip(&self.w_hat) {
            *b *= w;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        out[0] = 0.0;
        for k in 1..=n {
            out[k] = buf[k - 1].re * scale;
        }
    }
}

/// Convolution by FFT with the same indexing as [`convolve_direct`].
#[cfg(test)]
pub(crate) fn convolve_fft(w: &[f64], xi: &[f64], out: &mut [f64]) {
    FftConv::new(w, xi.len()).apply(xi, out)
}

fn check_capacity(n_paths: usize, n_steps: usize, max_cells: usize) -> Result<usize> {
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::InvalidParams("n_paths and n_steps must be positive".into()));
    }
    let cells = n_paths
        .checked_mul(n_steps + 1)
        .filter(|&c| c <= max_cells)
        .ok_or_else(|| Error::Capacity(format!("{n_paths} paths × {} points exceeds the cap of {max_cells}", n_steps + 1)))?;
    Ok(cells)
}

/// Samples `n_paths` trajectories of `n_steps` steps from a kernel table.
pub fn simulate_with_table(
    p: &ProcessParams,
    table: &KernelTable,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    opts: &SimulateOptions,
) -> Result<PathEnsemble> {
    let cells = check_capacity(n_paths, n_steps, opts.max_cells)?;
    if table.weights.len() < n_steps {
        return Err(Error::InvalidParams(format!(
            "kernel table has {} weights, {n_steps} needed",
            table.weights.len()
        )));
    }
    let w = &table.weights[..n_steps];
    let sq = table.dt.sqrt();
    let use_fft = opts.force_fft.unwrap_or(n_steps > DIRECT_CONVOLUTION_MAX);
    let fft = use_fft.then(|| FftConv::new(w, n_steps));
    let mut paths = vec![0.0; cells];
    paths
        .par_chunks_mut(n_steps + 1)
        .enumerate()
        .for_each_init(
            || vec![0.0; n_steps],
            |xi, (i, row)| {
                noise(seed, i, n_steps, xi);
                match &fft {
                    Some(f) => f.apply(xi, row),
                    None => convolve_direct(w, xi, row),
                }
                for v in row.iter_mut() {
                    *v *= sq;
                }
            },
        );
    Ok(PathEnsemble {
        paths,
        n_paths,
        n_steps,
        dt: table.dt,
        seed,
        params: *p,
    })
}

/// Samples trajectories with the default kernel scheme.
pub fn simulate(p: &ProcessParams, dt: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let table = build_kernel_table(p, dt, n_steps, KernelScheme::default())?;
    simulate_with_table(p, &table, n_steps, n_paths, seed, &SimulateOptions::default())
}

/// Terminal values x(n_steps·dt) only, at O(n_steps) cost per path; equal to
/// the last column of the corresponding full ensemble.
pub fn simulate_terminal(table: &KernelTable, n_steps: usize, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    if n_paths == 0 || n_steps == 0 || table.weights.len() < n_steps {
        return Err(Error::InvalidParams("need n_paths, n_steps ≥ 1 and a long enough table".into()));
    }
    let w = &table.weights[..n_steps];
    let sq = table.dt.sqrt();
    Ok((0..n_paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; n_steps],
            |xi, i| {
                noise(seed, i, n_steps, xi);
                let mut s = 0.0;
                for j in 0..n_steps {
                    s += w[n_steps - 1 - j] * xi[j];
                }
                s * sq
            },
        )
        .collect())
}

/// Estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Mean and jackknife standard error of a sample.
pub fn mean_with_jackknife(xs: &[f64]) -> Result<Estimate> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::Statistics(format!("need at least 2 samples, got {n}")));
    }
    let nf = n as f64;
    let total: f64 = xs.iter().sum();
    let mean = total / nf;
    // Leave-one-out means θ_(i) = (total - x_i)/(n-1).
    let mut acc = 0.0;
    for x in xs {
        let loo = (total - x) / (nf - 1.0);
        acc += (loo - mean) * (loo - mean);
    }
    Ok(Estimate {
        value: mean,
        std_error: ((nf - 1.0) / nf * acc).sqrt(),
    })
}

/// E[x(t_i) x(t_j)] from the ensemble; the mean is known to be zero.
pub fn sample_covariance(ens: &PathEnsemble, i: usize, j: usize) -> Result<Estimate> {
    if i > ens.n_steps || j > ens.n_steps {
        return Err(Error::InvalidParams(format!("index out of range: ({i}, {j}) with {} steps", ens.n_steps)));
    }
    let prods: Vec<f64> = (0..ens.n_paths).map(|k| ens.path(k)[i] * ens.path(k)[j]).collect();
    mean_with_jackknife(&prods)
}

/// Coefficients of (1 - z)^μ, the Grünwald-Letnikov weights of order μ.
pub fn gl_weights(mu: f64, n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(n);
    let mut c = 1.0;
    for k in 0..n {
        g.push(c);
        c *= 1.0 - (mu + 1.0) / (k as f64 + 1.0);
    }
    g
}

/// binom(γ, j) for real γ.
fn binom_real(gamma: f64, j: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..j {
        b *= (gamma - i as f64) / (i as f64 + 1.0);
    }
    b
}

/// Discrete `(D^α + λ^α)^γ` on a uniform grid, expanded binomially into
/// Grünwald-Letnikov operators of orders α(γ - j).
#[derive(Clone, Debug)]
pub struct GrunwaldOperator {
    pub params: ProcessParams,
    pub dt: f64,
    pub j_max: usize,
    /// Weights of each binomial term j, already scaled by binom(γ,j) λ^{αj} dt^{-α(γ-j)}.
    pub coeffs: Vec<Vec<f64>>,
    /// Their sum, the composite convolution weights.
    pub composite: Vec<f64>,
    /// Bound on the first omitted binomial term relative to the leading one.
    pub truncation_bound: f64,
}

/// Hard cap on the binomial order.
pub const J_MAX_CAP: usize = 64;

impl GrunwaldOperator {
    /// Builds weights for series of up to `n` points. With `j_max = None`
    /// the order is the smallest j whose tail bound drops below `rel_tol`;
    /// an explicit order whose bound exceeds `rel_tol` is an error.
    pub fn new(p: &ProcessParams, dt: f64, n: usize, j_max: Option<usize>, rel_tol: f64) -> Result<Self> {
        if !(dt > 0.0) || n == 0 {
            return Err(Error::InvalidParams("need dt > 0 and n ≥ 1".into()));
        }
        let (a, g) = (p.alpha(), p.gamma());
        let la = p.lambda_alpha();
        let horizon = n as f64 * dt;
        // Operator-norm bound of term j on a horizon T: dt^{-μ}Σ|g^{(μ)}| is at
        // most (2/dt)^μ for μ ≥ 0 and T^{-μ}/Γ(1-μ) for μ < 0.
        let norm = |j: usize| {
            let mu = a * (g - j as f64);
            let op = if mu >= 0.0 {
                (2.0 / dt).powf(mu)
            } else {
                horizon.powf(-mu) * rgamma(1.0 - mu)
            };
            binom_real(g, j).abs() * la.powi(j as i32) * op
        };
        let lead = norm(0);
        let exact = g == 1.0 || la == 0.0;
        let auto_j = || {
            if exact {
                return Ok(if la == 0.0 { 0 } else { 1 });
            }
            (1..=J_MAX_CAP)
                .find(|&j| norm(j + 1) < rel_tol * lead)
                .ok_or_else(|| {
                    Error::Truncation(format!(
                        "binomial expansion needs more than {J_MAX_CAP} terms (tail bound {:.3e})",
                        norm(J_MAX_CAP + 1) / lead
                    ))
                })
        };
        let j_max = match j_max {
            Some(j) => j.min(J_MAX_CAP),
            None => auto_j()?,
        };
        let truncation_bound = if exact { 0.0 } else { norm(j_max + 1) / lead };
        if truncation_bound > rel_tol {
            return Err(Error::Truncation(format!(
                "j_max = {j_max} leaves a tail bound {truncation_bound:.3e} above tolerance {rel_tol:.1e}"
            )));
        }
        let mut coeffs = Vec::with_capacity(j_max + 1);
        let mut composite = vec![0.0; n];
        for j in 0..=j_max {
            let mu = a * (g - j as f64);
            let scale = binom_real(g, j) * la.powi(j as i32) * dt.powf(-mu);
            let row: Vec<f64> = gl_weights(mu, n).into_iter().map(|c| c * scale).collect();
            for (c, r) in composite.iter_mut().zip(&row) {
                *c += r;
            }
            coeffs.push(row);
        }
        Ok(GrunwaldOperator {
            params: *p,
            dt,
            j_max,
            coeffs,
            composite,
            truncation_bound,
        })
    }
}

/// Applies the operator: out[n] = Σ_{k≤n} c_k x_{n-k}.
pub fn grunwald_apply(op: &GrunwaldOperator, series: &[f64]) -> Result<Vec<f64>> {
    if series.len() > op.composite.len() {
        return Err(Error::InvalidParams(format!(
            "operator built for {} points, series has {}",
            op.composite.len(),
            series.len()
        )));
    }
    Ok(apply_weights(&op.composite, series))
}

fn apply_weights(c: &[f64], x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| (0..=n).map(|k| c[k] * x[n - k]).sum())
        .collect()
}

/// Grünwald-Letnikov derivative of order μ (an integral when μ < 0).
pub fn gl_derivative(mu: f64, series: &[f64], dt: f64) -> Vec<f64> {
    let s = dt.powf(-mu);
    let c: Vec<f64> = gl_weights(mu, series.len()).into_iter().map(|v| v * s).collect();
    apply_weights(&c, series)
}

/// Riemann-Liouville integral I^α by product integration, holding f at its
/// cell average ½(f_k + f_{k+1}) on each cell.
pub fn fractional_integral(alpha: f64, series: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("need alpha in (0, 1] and dt > 0, got {alpha}, {dt}")));
    }
    let n = series.len();
    let rg = rgamma(alpha + 1.0);
    // b_m = ((m+1)^α - m^α) dt^α / Γ(α+1): weight of the cell m steps back.
    let b: Vec<f64> = (0..n)
        .map(|m| (((m + 1) as f64).powf(alpha) - (m as f64).powf(alpha)) * dt.powf(alpha) * rg)
        .collect();
    Ok((0..n)
        .map(|i| {
            (0..i)
                .map(|k| b[i - 1 - k] * 0.5 * (series[k] + series[k + 1]))
                .sum()
        })
        .collect())
}

/// Sample autocorrelations at lags 1..=max_lag.
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (1..=max_lag)
        .map(|l| {
            let c: f64 = (0..n - l).map(|i| (xs[i] - mean) * (xs[i + l] - mean)).sum();
            c / c0
        })
        .collect()
}

/// Two-sided Bartlett band for white-noise autocorrelations (z/√n).
pub fn bartlett_band(n: usize, z: f64) -> f64 {
    z / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pp(a: f64, g: f64, l: f64) -> ProcessParams {
        ProcessParams::new(a, g, l).unwrap()
    }

    #[test]
    fn kernel_table_examples() {
        let t = build_kernel_table(&pp(1.0, 1.0, 1.0), 0.1, 5, KernelScheme::Midpoint).unwrap();
        assert!((t.weights[0] - (-0.05f64).exp()).abs() < 1e-15);
        let p = pp(1.0, 0.75, 0.0);
        let dt = 0.01;
        let t = build_kernel_table(&p, dt, 3, KernelScheme::CellIntegrated).unwrap();
        let expected = dt.powf(-0.25) * rgamma(1.75);
        assert!(((t.weights[0] - expected) / expected).abs() < 1e-12);
        let t = build_kernel_table(&pp(0.9, 0.9, 1.0), 0.05, 400, KernelScheme::Midpoint).unwrap();
        assert!(t.weights[399] < 0.05 * t.weights[0]);
    }

    #[test]
    fn variance_matched_reproduces_variance() {
        let p = pp(0.8, 0.9, 0.7);
        let t = build_kernel_table(&p, 0.01, 100, KernelScheme::VarianceMatched).unwrap();
        let v = crate::kernel::variance_series(&p, 1.0, &SeriesControl::default()).unwrap();
        assert!(((t.discrete_variance(100) - v) / v).abs() < 1e-9);
    }

    #[test]
    fn direct_and_fft_convolution_agree() {
        let p = pp(0.8, 0.9, 0.7);
        let n = 5000;
        let t = build_kernel_table(&p, 1e-3, n, KernelScheme::Midpoint).unwrap();
        let mut xi = vec![0.0; n];
        noise(7, 3, n, &mut xi);
        let mut a = vec![0.0; n + 1];
        let mut b = vec![0.0; n + 1];
        convolve_direct(&t.weights, &xi, &mut a);
        convolve_fft(&t.weights, &xi, &mut b);
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-10 * scale, "diff {diff}");
    }

    #[test]
    fn terminal_matches_last_column() {
        let p = pp(0.9, 0.9, 0.5);
        let t = build_kernel_table(&p, 0.01, 50, KernelScheme::VarianceMatched).unwrap();
        let ens = simulate_with_table(&p, &t, 50, 20, 11, &SimulateOptions::default()).unwrap();
        let term = simulate_terminal(&t, 50, 20, 11).unwrap();
        for (i, v) in term.iter().enumerate() {
            assert!((ens.path(i)[50] - v).abs() <= 1e-12 * v.abs().max(1.0));
            assert_eq!(ens.path(i)[0], 0.0);
        }
    }

    #[test]
    fn capacity_guard() {
        let p = pp(0.9, 0.9, 0.5);
        let t = build_kernel_table(&p, 0.01, 10, KernelScheme::Midpoint).unwrap();
        let opts = SimulateOptions {
            max_cells: 100,
            force_fft: None,
        };
        assert!(matches!(simulate_with_table(&p, &t, 10, 20, 1, &opts), Err(Error::Capacity(_))));
    }

    #[test]
    fn binary_round_trip() {
        let p = pp(0.9, 0.9, 0.5);
        let ens = simulate(&p, 0.01, 8, 3, 5).unwrap();
        let mut buf = Vec::new();
        ens.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 32 + 8 * 3 * 9);
        let back = PathEnsemble::read_binary(&buf[..], p).unwrap();
        assert_eq!(back, ens);
    }

    #[test]
    fn gamma_one_is_two_term_operator() {
        let p = pp(0.8, 1.0, 0.7);
        let dt = 0.01;
        let op = GrunwaldOperator::new(&p, dt, 50, None, 1e-12).unwrap();
        assert_eq!(op.j_max, 1);
        let x: Vec<f64> = (0..50).map(|k| (k as f64 * dt).sin()).collect();
        let y = grunwald_apply(&op, &x).unwrap();
        let d = gl_derivative(0.8, &x, dt);
        let la = 0.7f64.powf(0.8);
        for k in 0..50 {
            assert!((y[k] - (d[k] + la * x[k])).abs() < 1e-10);
        }
        assert!(grunwald_apply(&op, &vec![0.0; 50]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn composite_weights_match_power_series() {
        // Coefficients of dt^{-αγ}[(1-z)^α + (λdt)^α]^γ by the J.C.P. Miller
        // recurrence for powers of a power series.
        let p = pp(0.9, 0.8, 0.6);
        let dt = 1e-2;
        let n = 200;
        let op = GrunwaldOperator::new(&p, dt, n, None, 1e-14).unwrap();
        let (a, g) = (0.9, 0.8);
        let mut base = gl_weights(a, n);
        base[0] += (0.6f64 * dt).powf(a);
        let mut b = vec![0.0; n];
        b[0] = base[0].powf(g);
        for k in 1..n {
            let mut s = 0.0;
            for i in 1..=k {
                s += ((g + 1.0) * i as f64 - k as f64) * base[i] * b[k - i];
            }
            b[k] = s / (k as f64 * base[0]);
        }
        let s = dt.powf(-a * g);
        for k in 0..n {
            let want = b[k] * s;
            assert!((op.composite[k] - want).abs() <= 1e-10 * want.abs().max(1e-3 * s), "k = {k}");
        }
    }

    #[test]
    fn explicit_small_j_max_is_rejected() {
        let p = pp(0.9, 0.8, 5.0);
        assert!(matches!(
            GrunwaldOperator::new(&p, 0.01, 1000, Some(1), 1e-12),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn fractional_integral_examples() {
        let dt = 1e-3;
        let ones = vec![1.0; 1001];
        let i1 = fractional_integral(1.0, &ones, dt).unwrap();
        assert!((i1[1000] - 1.0).abs() <= dt);
        for &a in &[0.5, 0.8] {
            let ia = fractional_integral(a, &ones, dt).unwrap();
            let want = rgamma(a + 1.0);
            assert!(((ia[1000] - want) / want).abs() < 0.02);
        }
        let f: Vec<f64> = (0..1001).map(|k| (k as f64 * dt).sin()).collect();
        for &a in &[0.5, 0.9] {
            let back = gl_derivative(a, &fractional_integral(a, &f, dt).unwrap(), dt);
            let err = (1..1000).fold(0.0f64, |m, k| m.max((back[k] - f[k]).abs()));
            assert!(err <= 5.0 * dt, "α = {a}: {err}");
        }
    }

    #[test]
    fn jackknife_of_constant_is_exact() {
        let e = mean_with_jackknife(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.value, 2.0);
        assert_eq!(e.std_error, 0.0);
        assert!(mean_with_jackknife(&[1.0]).is_err());
    }
}
