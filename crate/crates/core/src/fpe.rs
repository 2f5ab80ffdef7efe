//! Effective Fokker-Planck equation for the density of the process.
//!
//! The force-free equation `∂ₜP = D(t) ∂²ₓP` with `D = ½ dσ²/dt` is solved
//! exactly by a Gaussian of variance σ²(t). The linear and harmonic potentials
//! add `-g ∂ₓP` and `ω ∂ₓ(xP)` respectively; in the harmonic case the diffusion
//! coefficient is the noise-correlation integral `D_h(t)`.
//!
//! [`evolve`] integrates these equations with Crank-Nicolson on a uniform grid.
//! Each step uses the exact integral of the diffusion coefficient over the
//! step rather than a point value, which makes the step exact in time for the
//! pure diffusion part however singular D is near t = 0. A step-doubling
//! controller keeps the local error below a target.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, GreenFn, ProcessParams};
use crate::quad::{graded_integral, GaussLegendre};
use crate::specfun::SeriesControl;

/// Space-time grid of a Fokker-Planck solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub t0: f64,
    pub t1: f64,
    pub n_t: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, t0: f64, t1: f64, n_t: usize) -> Result<Self> {
        let g = Grid1D {
            x_min,
            x_max,
            n_x,
            t0,
            t1,
            n_t,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(Error::Grid(format!("need x_min < x_max, got [{}, {}]", self.x_min, self.x_max)));
        }
        if self.n_x < 3 {
            return Err(Error::Grid(format!("n_x must be at least 3, got {}", self.n_x)));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::Grid(format!(
                "t0 must be positive (the diffusion coefficient is singular at 0), got {}",
                self.t0
            )));
        }
        if !(self.t1 > self.t0) || !self.t1.is_finite() {
            return Err(Error::Grid(format!("need t1 > t0, got t0 = {}, t1 = {}", self.t0, self.t1)));
        }
        if self.n_t < 1 {
            return Err(Error::Grid("n_t must be at least 1".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    /// Symmetric grid spanning `half_width` either side of `center`.
    pub fn centered(center: f64, half_width: f64, n_x: usize, t0: f64, t1: f64, n_t: usize) -> Result<Self> {
        Grid1D::new(center - half_width, center + half_width, n_x, t0, t1, n_t)
    }
}

/// Probability density sampled on the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    pub values: Vec<f64>,
    pub t: f64,
    pub x_min: f64,
    pub dx: f64,
}

impl DensityField {
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Trapezoid mass.
    pub fn mass(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        (inner + 0.5 * (self.values[0] + self.values[n - 1])) * self.dx
    }

    pub fn mean(&self) -> f64 {
        self.moment(|x| x) / self.mass()
    }

    /// ∫ (x - c)² P dx.
    pub fn second_moment(&self, c: f64) -> f64 {
        self.moment(|x| (x - c) * (x - c))
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment(m) / self.mass()
    }

    fn moment<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let n = self.values.len();
        let mut s = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            s += w * f(self.x(i)) * v;
        }
        s * self.dx
    }

    /// ∫ |P - f| dx on the grid (trapezoid).
    pub fn l1_distance<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let n = self.values.len();
        let mut s = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            s += w * (v - f(self.x(i))).abs();
        }
        s * self.dx
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,P")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", self.x(i), v)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }
}

/// External force of the Langevin equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    /// Constant potential.
    Free,
    /// Potential `g x`: the density drifts with velocity `g`.
    Linear { g: f64 },
    /// Potential `½ ω x²`.
    Harmonic { omega: f64 },
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DriftSpec::Harmonic { omega } if !(omega > 0.0 && omega.is_finite()) => {
                Err(Error::InvalidParams(format!("harmonic omega must be positive, got {omega}")))
            }
            DriftSpec::Linear { g } if !g.is_finite() => Err(Error::InvalidParams("linear g must be finite".into())),
            _ => Ok(()),
        }
    }
}

/// D(t) = ½ dσ²/dt by its power series.
pub fn diffusion_coeff(p: &ProcessParams, t: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain("diffusion_coeff", format!("time must be positive, got {t}")));
    }
    Ok(0.5 * kernel::diagonal_power_series("diffusion_coeff", p, t, ctl, true)?)
}

/// Gaussian density of x(t) started at x0.
pub fn analytic_density(p: &ProcessParams, t: f64, x0: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain("analytic_density", format!("time must be positive, got {t}")));
    }
    let v = kernel::variance(p, t, &SeriesControl::default())?;
    Ok(gaussian(x - x0, v))
}

fn gaussian(d: f64, var: f64) -> f64 {
    (-d * d / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// H(r) = ∫₀^r e^{-ω(r-w)} G(w) dw.
fn relaxed_kernel_integral(g: &GreenFn, omega: f64, r: f64, gl: &GaussLegendre) -> Result<f64> {
    let mut err = None;
    let v = graded_integral(
        "harmonic_diffusion_coeff",
        |w| match g.g_auto(w) {
            Ok(x) => (-omega * (r - w)).exp() * x,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        r,
        g.params().ag() - 1.0,
        None,
        gl,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Diffusion coefficient of the harmonic case,
/// `D_h(t) = ∫₀ᵗ C_ζ(t,τ) e^{-ω(t-τ)} dτ` with `C_ζ = ∂ₜ∂_τ C`.
///
/// The noise correlation is too singular on the diagonal to integrate
/// directly when αγ < 1. Splitting `e^{-ω(t-τ)} = 1 + (e^{-ω(t-τ)} - 1)`,
/// the first part is D(t) = ½G(t)² and the second can be integrated by parts
/// once; exchanging the order of integration leaves
/// `D_h(t) = ½G(t)² - ω ∫₀ᵗ G'(r) H(r) dr` with H as above, whose only
/// singularity is the integrable r^{2αγ-2} at the origin.
pub fn harmonic_diffusion_coeff(p: &ProcessParams, omega: f64, t: f64, n_nodes: usize) -> Result<f64> {
    const OP: &str = "harmonic_diffusion_coeff";
    if !(t > 0.0) || !(omega > 0.0) {
        return Err(Error::domain(OP, format!("need t > 0 and omega > 0, got t = {t}, omega = {omega}")));
    }
    if n_nodes < 16 {
        return Err(Error::quadrature(OP, format!("n_nodes must be at least 16, got {n_nodes}")));
    }
    let g = GreenFn::new(*p, SeriesControl::default())?;
    let gl = GaussLegendre::new(n_nodes);
    let gt = g.g_auto(t)?;
    let mut err = None;
    let tail = graded_integral(
        OP,
        |r| {
            let v = g.dg_auto(r).and_then(|d| Ok(d * relaxed_kernel_integral(&g, omega, r, &gl)?));
            match v {
                Ok(x) => x,
                Err(e) => {
                    err.get_or_insert(Error::quadrature(OP, format!("at (t = {t}, r = {r}): {e}")));
                    0.0
                }
            }
        },
        t,
        2.0 * p.ag() - 2.0,
        None,
        &gl,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(0.5 * gt * gt - omega * tail)
}

/// Variance v(t) of the harmonic-case solution, tabulated for interpolation.
///
/// With `K(r) = G(r) - ω H(r)` the harmonic coordinate is `∫₀ᵗ K(t-u) dB(u)`,
/// so `v(t) = ∫₀ᵗ K²`, and `D_h = ½K(t)² + ω v(t)`; the step integral of D_h
/// is then `½Δv + ω∫v`.
#[derive(Clone, Debug)]
pub struct HarmonicVariance {
    omega: f64,
    t: Vec<f64>,
    v: Vec<f64>,
    dv: Vec<f64>,
}

impl HarmonicVariance {
    pub fn new(p: &ProcessParams, omega: f64, t0: f64, t1: f64, intervals: usize) -> Result<Self> {
        let g = GreenFn::new(*p, SeriesControl::default())?;
        let gl = GaussLegendre::new(20);
        let local = GaussLegendre::new(10);
        let k_of = |r: f64, h: f64| -> Result<f64> { Ok(g.g_auto(r)? - omega * h) };

        // Start value by graded quadrature from the origin.
        let mut err = None;
        let v0 = graded_integral(
            "harmonic_variance",
            |r| match relaxed_kernel_integral(&g, omega, r, &gl).and_then(|h| k_of(r, h)) {
                Ok(k) => k * k,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            t0,
            2.0 * p.ag() - 2.0,
            None,
            &gl,
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        let n = intervals.max(1);
        let h = (t1 - t0) / n as f64;
        let mut ts = Vec::with_capacity(n + 1);
        let mut vs = Vec::with_capacity(n + 1);
        let mut dvs = Vec::with_capacity(n + 1);
        let mut h_a = relaxed_kernel_integral(&g, omega, t0, &gl)?;
        let mut v = v0;
        let k0 = k_of(t0, h_a)?;
        ts.push(t0);
        vs.push(v);
        dvs.push(k0 * k0);
        for i in 0..n {
            let a = t0 + i as f64 * h;
            let b = if i + 1 == n { t1 } else { a + h };
            // H at any r in [a, b] from H(a) and a local smooth integral.
            let h_at = |r: f64| -> Result<f64> {
                let mut s = 0.0;
                let mut e = None;
                let part = local.panel(
                    &mut |w| match g.g_auto(w) {
                        Ok(x) => (-omega * (r - w)).exp() * x,
                        Err(er) => {
                            e.get_or_insert(er);
                            0.0
                        }
                    },
                    a,
                    r,
                );
                if let Some(er) = e {
                    return Err(er);
                }
                s += part + (-omega * (r - a)).exp() * h_a;
                Ok(s)
            };
            let mut e = None;
            let inc = local.panel(
                &mut |r| match h_at(r).and_then(|hr| k_of(r, hr)) {
                    Ok(k) => k * k,
                    Err(er) => {
                        e.get_or_insert(er);
                        0.0
                    }
                },
                a,
                b,
            );
            if let Some(er) = e {
                return Err(er);
            }
            v += inc;
            h_a = h_at(b)?;
            let kb = k_of(b, h_a)?;
            ts.push(b);
            vs.push(v);
            dvs.push(kb * kb);
        }
        Ok(HarmonicVariance {
            omega,
            t: ts,
            v: vs,
            dv: dvs,
        })
    }

    /// v(t) by cubic Hermite interpolation.
    pub fn v(&self, t: f64) -> f64 {
        let n = self.t.len();
        if n == 1 {
            return self.v[0];
        }
        let h = self.t[1] - self.t[0];
        let i = (((t - self.t[0]) / h).floor().max(0.0) as usize).min(n - 2);
        let (a, b) = (self.t[i], self.t[i + 1]);
        let hh = b - a;
        let s = (t - a) / hh;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.v[i] + h10 * hh * self.dv[i] + h01 * self.v[i + 1] + h11 * hh * self.dv[i + 1]
    }

    /// D_h(t) = ½ v'(t) + ω v(t) at a tabulation node range point.
    pub fn d_h(&self, t: f64) -> f64 {
        let e = 1e-6 * (self.t[self.t.len() - 1] - self.t[0]);
        let lo = (t - e).max(self.t[0]);
        let hi = (t + e).min(self.t[self.t.len() - 1]);
        0.5 * (self.v(hi) - self.v(lo)) / (hi - lo) + self.omega * self.v(t)
    }

    /// ∫_a^b D_h dt.
    pub fn integrated(&self, a: f64, b: f64) -> f64 {
        let m = 0.5 * (a + b);
        let simpson = (b - a) / 6.0 * (self.v(a) + 4.0 * self.v(m) + self.v(b));
        0.5 * (self.v(b) - self.v(a)) + self.omega * simpson
    }
}

/// Solver settings of [`evolve_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveOptions {
    /// Local error target of a step, relative to max P.
    pub local_tol: f64,
    /// Extra output times in (t0, t1].
    pub snapshot_times: Vec<f64>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            local_tol: 1e-6,
            snapshot_times: Vec::new(),
        }
    }
}

/// Diagnostics collected during a solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvolveReport {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub max_mass_error: f64,
    pub min_value: f64,
    pub clipped_nodes: usize,
    /// Density at the outermost interior nodes at the end of the solve.
    pub boundary_leakage: f64,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub field: DensityField,
    pub snapshots: Vec<DensityField>,
    pub report: EvolveReport,
}

/// P(·, t1) for the given drift, started from the exact Gaussian at t0.
pub fn evolve(p: &ProcessParams, grid: &Grid1D, drift: &DriftSpec, x0: f64) -> Result<DensityField> {
    Ok(evolve_with(p, grid, drift, x0, &EvolveOptions::default())?.field)
}

/// Solves on a pre-validated step; returns the new interior state.
struct CnSystem {
    n: usize,
    dx: f64,
    x: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
    rhs: Vec<f64>,
}

impl CnSystem {
    fn new(grid: &Grid1D) -> Self {
        let n = grid.n_x;
        CnSystem {
            n,
            dx: grid.dx(),
            x: (0..n).map(|i| grid.x(i)).collect(),
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }

    /// One Crank-Nicolson step with step-integrated diffusion `id`, and
    /// drift weight `c` (g·Δt or ω·Δt).
    fn step(&mut self, p: &[f64], id: f64, c: f64, drift: &DriftSpec, out: &mut Vec<f64>) -> Result<()> {
        let n = self.n;
        let r = id / (self.dx * self.dx);
        let k = c / (2.0 * self.dx);
        // Row i of the operator A: a_i P_{i-1} + b_i P_i + c_i P_{i+1}.
        let coeffs = |i: usize| -> (f64, f64, f64) {
            match drift {
                DriftSpec::Free => (r, -2.0 * r, r),
                DriftSpec::Linear { .. } => (r + k, -2.0 * r, r - k),
                DriftSpec::Harmonic { .. } => (r - k * self.x[i - 1], -2.0 * r, r + k * self.x[i + 1]),
            }
        };
        for i in 1..n - 1 {
            let (a, b, cc) = coeffs(i);
            self.sub[i] = -0.5 * a;
            self.diag[i] = 1.0 - 0.5 * b;
            self.sup[i] = -0.5 * cc;
            self.rhs[i] = p[i] + 0.5 * (a * p[i - 1] + b * p[i] + cc * p[i + 1]);
        }
        // Thomas algorithm on interior rows with zero Dirichlet values.
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        for i in 1..n - 1 {
            let m = self.diag[i] - if i > 1 { self.sub[i] * cp[i - 1] } else { 0.0 };
            if m == 0.0 || !m.is_finite() {
                return Err(Error::Solver(format!("singular tridiagonal pivot at row {i}")));
            }
            cp[i] = self.sup[i] / m;
            dp[i] = (self.rhs[i] - if i > 1 { self.sub[i] * dp[i - 1] } else { 0.0 }) / m;
        }
        out.clear();
        out.resize(n, 0.0);
        for i in (1..n - 1).rev() {
            out[i] = dp[i] - if i + 2 < n { cp[i] * out[i + 1] } else { 0.0 };
        }
        Ok(())
    }
}

/// Full solve with snapshots and diagnostics.
pub fn evolve_with(
    p: &ProcessParams,
    grid: &Grid1D,
    drift: &DriftSpec,
    x0: f64,
    opts: &EvolveOptions,
) -> Result<Evolution> {
    grid.validate()?;
    drift.validate()?;
    if !(opts.local_tol > 0.0) {
        return Err(Error::InvalidParams("local_tol must be positive".into()));
    }
    let ctl = SeriesControl::default();
    let (t0, t1) = (grid.t0, grid.t1);

    // Variance path: σ² for free/linear, v for harmonic.
    let harmonic = match *drift {
        DriftSpec::Harmonic { omega } => Some((omega, HarmonicVariance::new(p, omega, t0, t1, 4 * grid.n_t.max(64))?)),
        _ => None,
    };
    let var_at = |t: f64| -> Result<f64> {
        match &harmonic {
            Some((_, hv)) => Ok(hv.v(t)),
            None => kernel::variance(p, t, &ctl),
        }
    };
    let mean_at = |t: f64| match *drift {
        DriftSpec::Free => x0,
        DriftSpec::Linear { g } => x0 + g * (t - t0),
        DriftSpec::Harmonic { omega } => x0 * (-omega * t).exp(),
    };

    // Boundaries must sit 8σ(t1) away from every position of the mean.
    let s1 = var_at(t1)?.sqrt();
    for m in [x0, mean_at(t0), mean_at(t1)] {
        if m - 8.0 * s1 < grid.x_min || m + 8.0 * s1 > grid.x_max {
            return Err(Error::Grid(format!(
                "domain [{}, {}] does not reach 8σ(t1) = {} around {}",
                grid.x_min,
                grid.x_max,
                8.0 * s1,
                m
            )));
        }
    }

    let v0 = var_at(t0)?;
    let m0 = mean_at(t0);
    let mut cur: Vec<f64> = (0..grid.n_x).map(|i| gaussian(grid.x(i) - m0, v0)).collect();
    cur[0] = 0.0;
    cur[grid.n_x - 1] = 0.0;

    let step_integral = |a: f64, b: f64| -> Result<f64> {
        match &harmonic {
            Some((_, hv)) => Ok(hv.integrated(a, b)),
            None => Ok(0.5 * (kernel::variance(p, b, &ctl)? - kernel::variance(p, a, &ctl)?)),
        }
    };
    let drift_weight = |dt: f64| match *drift {
        DriftSpec::Free => 0.0,
        DriftSpec::Linear { g } => g * dt,
        DriftSpec::Harmonic { omega } => omega * dt,
    };

    let mut targets: Vec<f64> = opts.snapshot_times.iter().copied().filter(|&s| s > t0 && s < t1).collect();
    targets.sort_by(f64::total_cmp);
    targets.push(t1);

    let mut sys = CnSystem::new(grid);
    let mut report = EvolveReport {
        min_value: f64::INFINITY,
        ..Default::default()
    };
    let mut snapshots = Vec::new();
    let dt_nominal = (t1 - t0) / grid.n_t as f64;
    let budget = 16 * grid.n_t;
    let mut dt = dt_nominal;
    let mut t = t0;
    let dxv = grid.dx();
    let (mut full, mut half, mut two) = (Vec::new(), Vec::new(), Vec::new());
    let mut ti = 0;
    while ti < targets.len() {
        let target = targets[ti];
        let h = dt.min(target - t);
        let tm = t + 0.5 * h;
        let i_full = step_integral(t, t + h)?;
        sys.step(&cur, i_full, drift_weight(h), drift, &mut full)?;
        sys.step(&cur, step_integral(t, tm)?, drift_weight(0.5 * h), drift, &mut half)?;
        sys.step(&half, step_integral(tm, t + h)?, drift_weight(0.5 * h), drift, &mut two)?;
        let peak = two.iter().fold(0.0f64, |a, &b| a.max(b));
        let err = full.iter().zip(&two).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        if report.accepted_steps + report.rejected_steps >= budget {
            return Err(Error::Solver(format!(
                "step controller exhausted its budget of {budget} steps at t = {t} (local error {err:.3e})"
            )));
        }
        if err > opts.local_tol * peak {
            report.rejected_steps += 1;
            dt = 0.5 * h;
            continue;
        }
        report.accepted_steps += 1;
        std::mem::swap(&mut cur, &mut two);
        t += h;
        let mut min = f64::INFINITY;
        for v in cur.iter_mut() {
            min = min.min(*v);
            if *v < -1e-12 {
                *v = 0.0;
                report.clipped_nodes += 1;
            }
        }
        report.min_value = report.min_value.min(min);
        let field = DensityField {
            values: cur.clone(),
            t,
            x_min: grid.x_min,
            dx: dxv,
        };
        let mass_err = (field.mass() - 1.0).abs();
        report.max_mass_error = report.max_mass_error.max(mass_err);
        // CN local error is O(h³): grow cautiously when well inside the target.
        if err < 0.1 * opts.local_tol * peak {
            dt = (h * 1.5).min(dt_nominal);
        } else {
            dt = h;
        }
        if t >= target {
            t = target;
            if ti + 1 < targets.len() {
                snapshots.push(DensityField { t, ..field });
            }
            ti += 1;
        }
    }
    report.boundary_leakage = cur[1].abs().max(cur[grid.n_x - 2].abs());
    Ok(Evolution {
        field: DensityField {
            values: cur,
            t: t1,
            x_min: grid.x_min,
            dx: dxv,
        },
        snapshots,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // 50-digit reference (mpmath).
    const D_08_09_07_T05: f64 = 0.156_429_246_013_186_061_39;

    fn pp(a: f64, g: f64, l: f64) -> ProcessParams {
        ProcessParams::new(a, g, l).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn diffusion_examples() {
        let ctl = SeriesControl::default();
        assert!(rel(diffusion_coeff(&pp(1.0, 1.0, 1.0), 1.0, &ctl).unwrap(), 0.5 * (-2.0f64).exp()) < 1e-14);
        let g = 1.225_416_702_465_177_7f64;
        assert!(rel(diffusion_coeff(&pp(1.0, 0.75, 0.0), 1.0, &ctl).unwrap(), 0.5 / (g * g)) < 1e-14);
        let p = pp(0.8, 0.9, 0.7);
        let d = diffusion_coeff(&p, 0.5, &ctl).unwrap();
        assert!(rel(d, D_08_09_07_T05) < 1e-12);
        let h = 1e-5 * 0.5;
        let fd = (kernel::variance_series(&p, 0.5 + h, &ctl).unwrap() - kernel::variance_series(&p, 0.5 - h, &ctl).unwrap())
            / (2.0 * h);
        assert!(rel(d, 0.5 * fd) < 1e-6);
        // D = ½ G², an identity of the convolution form.
        let g = kernel::green_g(&p, 0.5, &ctl).unwrap();
        assert!(rel(d, 0.5 * g * g) < 1e-12);
    }

    #[test]
    fn analytic_density_examples() {
        let p = pp(1.0, 1.0, 1.0);
        let v = (1.0 - (-2.0f64).exp()) / 2.0;
        let d = analytic_density(&p, 1.0, 0.3, 1.3).unwrap();
        assert!(rel(d, (-0.5 / v).exp() / (2.0 * std::f64::consts::PI * v).sqrt()) < 1e-14);
        assert!((d - 0.190_867_490_877_722_6).abs() < 1e-14);
    }

    #[test]
    fn harmonic_brownian_limit() {
        // G ≡ 1: white noise, D_h = ½ and v = (1 - e^{-2ωt}) / 2ω.
        let p = pp(1.0, 1.0, 0.0);
        let dh = harmonic_diffusion_coeff(&p, 1.0, 1.0, 20).unwrap();
        assert!((dh - 0.5).abs() < 1e-12);
        let hv = HarmonicVariance::new(&p, 1.0, 0.1, 2.0, 64).unwrap();
        for &t in &[0.1, 0.77, 2.0] {
            assert!(rel(hv.v(t), (1.0 - (-2.0 * t).exp()) / 2.0) < 1e-7);
        }
    }

    #[test]
    fn harmonic_routes_agree() {
        for &(a, g, l, w) in &[(0.9, 0.9, 0.3, 0.5), (1.0, 1.0, 1.0, 2.0), (0.8, 0.9, 0.7, 1.0)] {
            let p = pp(a, g, l);
            let hv = HarmonicVariance::new(&p, w, 0.2, 1.5, 256).unwrap();
            for &t in &[0.5, 1.0, 1.4] {
                let direct = harmonic_diffusion_coeff(&p, w, t, 20).unwrap();
                assert!(rel(hv.d_h(t), direct) < 1e-6, "({a},{g},{l},{w}) t={t}: {} vs {direct}", hv.d_h(t));
            }
        }
    }

    #[test]
    fn harmonic_small_omega_recovers_free() {
        let p = pp(0.9, 0.9, 0.3);
        let dh = harmonic_diffusion_coeff(&p, 1e-8, 1.0, 20).unwrap();
        let d = diffusion_coeff(&p, 1.0, &SeriesControl::default()).unwrap();
        assert!(rel(dh, d) < 1e-7);
    }

    #[test]
    fn harmonic_node_refinement_is_stable() {
        let p = pp(0.9, 0.9, 0.3);
        let a = harmonic_diffusion_coeff(&p, 0.5, 1.0, 16).unwrap();
        let b = harmonic_diffusion_coeff(&p, 0.5, 1.0, 32).unwrap();
        assert!(a > 0.0 && rel(a, b) < 1e-3);
    }

    #[test]
    fn grid_and_drift_validation() {
        assert!(Grid1D::new(1.0, 0.0, 10, 0.1, 1.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 2, 0.1, 1.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 10, 0.0, 1.0, 10).is_err());
        assert!(DriftSpec::Harmonic { omega: 0.0 }.validate().is_err());
        let d: DriftSpec = serde_json::from_str(r#"{"kind":"linear","g":0.5}"#).unwrap();
        assert_eq!(d, DriftSpec::Linear { g: 0.5 });
    }

    #[test]
    fn rejects_narrow_domain() {
        let p = pp(1.0, 1.0, 1.0);
        let grid = Grid1D::new(-1.0, 1.0, 101, 0.01, 1.0, 50).unwrap();
        assert!(matches!(evolve(&p, &grid, &DriftSpec::Free, 0.0), Err(Error::Grid(_))));
    }
}
