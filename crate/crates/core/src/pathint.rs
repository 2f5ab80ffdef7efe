//! Path-integral quantities: pinned classical path, its W kernel, the
//! Gaussian propagator, partition function and the discretized action.
//!
//! Paths are measured from their starting point (x̄ = x - x₀), so the
//! fractional operator acts on series that start at zero.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernel::{covariance_quadrature, u_of_beta, u_of_t, u_of_t_quadrature, variance_quadrature, GreenFn, ProcessParams, DEFAULT_NODES};
use crate::langevin::{grunwald_apply, GrunwaldOperator};
use crate::quad::{graded_integral, GaussHermite, GaussLegendre};
use crate::specfun::SeriesControl;

/// Endpoints of a pinned path on [0, β].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryData {
    pub x0: f64,
    pub x_beta: f64,
    pub beta: f64,
}

impl BoundaryData {
    pub fn new(x0: f64, x_beta: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() || !x0.is_finite() || !x_beta.is_finite() {
            return Err(Error::InvalidParams(format!(
                "need finite endpoints and beta > 0, got ({x0}, {x_beta}, {beta})"
            )));
        }
        Ok(BoundaryData { x0, x_beta, beta })
    }

    pub fn dx(&self) -> f64 {
        self.x_beta - self.x0
    }
}

/// Path values on the uniform grid t_k = k·dt, k = 0..=n.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl DiscretePath {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if values.len() < 2 || !(dt > 0.0) {
            return Err(Error::Grid(format!("need at least 2 points and dt > 0, got {} and {dt}", values.len())));
        }
        Ok(DiscretePath { values, dt })
    }

    /// Samples `f` at the grid points of [0, β] split into `n` steps.
    pub fn sample<F: FnMut(f64) -> Result<f64>>(beta: f64, n: usize, mut f: F) -> Result<Self> {
        let dt = beta / n as f64;
        let values = (0..=n).map(|k| f(if k == n { beta } else { k as f64 * dt })).collect::<Result<_>>()?;
        Self::new(values, dt)
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn is_pinned(&self, b: &BoundaryData, tol: f64) -> bool {
        (self.values[0] - b.x0).abs() <= tol && (self.values[self.n_steps()] - b.x_beta).abs() <= tol
    }
}

fn u_beta(p: &ProcessParams, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    match u_of_beta(p, beta, ctl) {
        Err(e) if e.is_series_failure() => variance_quadrature(p, beta, DEFAULT_NODES),
        r => r,
    }
}

fn u_profile(p: &ProcessParams, t: f64, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    match u_of_t(p, t, beta, ctl) {
        Err(e) if e.is_series_failure() => u_of_t_quadrature(p, t, beta, DEFAULT_NODES),
        r => r,
    }
}

/// x_c(t) = x₀ + Δx·U(t)/U(β).
pub fn classical_path(p: &ProcessParams, b: &BoundaryData, t: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(0.0..=b.beta).contains(&t) {
        return Err(Error::domain("classical_path", format!("t must lie in [0, {}], got {t}", b.beta)));
    }
    if t == 0.0 {
        return Ok(b.x0);
    }
    if t == b.beta {
        return Ok(b.x_beta);
    }
    Ok(b.x0 + b.dx() * u_profile(p, t, b.beta, ctl)? / u_beta(p, b.beta, ctl)?)
}

/// W(β - t) = G(β - t)/U(β); singular at t = β when αγ < 1.
pub fn w_kernel(p: &ProcessParams, beta: f64, t: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(beta > 0.0) || !(0.0..beta).contains(&t) {
        return Err(Error::domain("w_kernel", format!("need 0 ≤ t < beta, got t = {t}, beta = {beta}")));
    }
    let g = GreenFn::new(*p, *ctl)?;
    Ok(g.g_auto(beta - t)? / u_beta(p, beta, ctl)?)
}

/// U(β)·∫₀^β W(β - t)² dt, which equals one. The integral is taken by graded
/// quadrature towards the singular end; U(β) comes from the series.
pub fn w_normalization(p: &ProcessParams, beta: f64, ctl: &SeriesControl, n_nodes: usize) -> Result<f64> {
    const OP: &str = "w_normalization";
    let u = u_beta(p, beta, ctl)?;
    let g = GreenFn::new(*p, *ctl)?;
    let gl = GaussLegendre::new(n_nodes.max(16));
    let mut err = None;
    // v = β - t puts the singularity at the left end.
    let integral = graded_integral(
        OP,
        |v| match g.g_auto(v) {
            Ok(x) => (x / u) * (x / u),
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        beta,
        2.0 * p.ag() - 2.0,
        None,
        &gl,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(u * integral),
    }
}

fn check_window(p: &ProcessParams, op: &'static str) -> Result<()> {
    if p.ag() <= 0.5 {
        return Err(Error::domain(op, format!("requires alpha·gamma > 1/2, got {}", p.ag())));
    }
    Ok(())
}

fn gaussian(dx: f64, var: f64) -> f64 {
    (-dx * dx / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// (2πU(β))^{-1/2} exp(-(x_β - x₀)²/(2U(β))).
pub fn propagator(p: &ProcessParams, b: &BoundaryData, ctl: &SeriesControl) -> Result<f64> {
    check_window(p, "propagator")?;
    Ok(gaussian(b.dx(), u_beta(p, b.beta, ctl)?))
}

/// Zeroth and second moments of the propagator over x_β, by Gauss-Hermite
/// quadrature of the propagator itself.
pub fn propagator_moments(p: &ProcessParams, x0: f64, beta: f64, ctl: &SeriesControl, n: usize) -> Result<(f64, f64)> {
    check_window(p, "propagator_moments")?;
    let u = u_beta(p, beta, ctl)?;
    let gh = GaussHermite::new(n);
    let scale = (2.0 * u).sqrt();
    let (mut m0, mut m2) = (0.0, 0.0);
    for (y, w) in gh.nodes.iter().zip(&gh.weights) {
        let x = x0 + scale * y;
        let k = propagator(p, &BoundaryData::new(x0, x, beta)?, ctl)? * scale * (y * y).exp() * w;
        m0 += k;
        m2 += k * (x - x0) * (x - x0);
    }
    Ok((m0, m2))
}

/// S[x_c] = (x_β - x₀)²/(2U(β)).
pub fn classical_action(p: &ProcessParams, b: &BoundaryData, ctl: &SeriesControl) -> Result<f64> {
    check_window(p, "classical_action")?;
    Ok(b.dx() * b.dx() / (2.0 * u_beta(p, b.beta, ctl)?))
}

fn check_grid(op: &GrunwaldOperator, path: &DiscretePath) -> Result<()> {
    let rel = ((op.dt - path.dt) / path.dt).abs();
    if rel > 1e-12 || op.composite.len() < path.values.len() {
        return Err(Error::Grid(format!(
            "operator built for dt = {} and {} points, path has dt = {} and {} points",
            op.dt,
            op.composite.len(),
            path.dt,
            path.values.len()
        )));
    }
    Ok(())
}

/// ½ dt Σ_{k=1}^{n} [(D^α+λ^α)^γ x̄]_k², with x̄ = x - x₀ and zero history.
pub fn discrete_action(path: &DiscretePath, op: &GrunwaldOperator) -> Result<f64> {
    check_grid(op, path)?;
    let x0 = path.values[0];
    let bar: Vec<f64> = path.values.iter().map(|v| v - x0).collect();
    let r = grunwald_apply(op, &bar)?;
    Ok(0.5 * path.dt * r[1..].iter().map(|v| v * v).sum::<f64>())
}

/// Exact minimizer of [`discrete_action`] among paths pinned at both ends,
/// together with its action. Its profile is the discrete analogue of U(t)/U(β).
pub fn discrete_classical_path(op: &GrunwaldOperator, b: &BoundaryData, n: usize) -> Result<(DiscretePath, f64)> {
    let dt = b.beta / n as f64;
    if ((op.dt - dt) / dt).abs() > 1e-12 || op.composite.len() < n + 1 {
        return Err(Error::Grid(format!("operator does not match a {n}-step grid on [0, {}]", b.beta)));
    }
    let c = &op.composite;
    // Unknowns x̄_1..x̄_n; A is lower-triangular Toeplitz with A[k][j] = c[k-j].
    // The minimizer is x̄ = Δx·A⁻¹y/|y|² with Aᵀy = e_n.
    let mut y = vec![0.0; n + 1];
    for j in (1..=n).rev() {
        let rhs = if j == n { 1.0 } else { 0.0 };
        let s: f64 = (j + 1..=n).map(|k| c[k - j] * y[k]).sum();
        y[j] = (rhs - s) / c[0];
    }
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let mut z = vec![0.0; n + 1];
    for k in 1..=n {
        let s: f64 = (1..k).map(|j| c[k - j] * z[j]).sum();
        z[k] = (y[k] - s) / c[0];
    }
    let values: Vec<f64> = z.iter().map(|v| b.x0 + b.dx() * v / yy).collect();
    let action = 0.5 * dt * b.dx() * b.dx() / yy;
    Ok((DiscretePath::new(values, dt)?, action))
}

/// Z(β) = V/√(2πU(β)).
pub fn partition_function(p: &ProcessParams, beta: f64, volume: f64, ctl: &SeriesControl) -> Result<f64> {
    check_window(p, "partition_function")?;
    if !(volume > 0.0) {
        return Err(Error::domain("partition_function", format!("volume must be positive, got {volume}")));
    }
    Ok(volume / (2.0 * PI * u_beta(p, beta, ctl)?).sqrt())
}

/// C(t, s) = ∫₀^{min(t,s)} G(t-u)G(s-u) du, the second functional derivative
/// of the generating function. The mean functional vanishes.
pub fn generating_covariance(p: &ProcessParams, t: f64, s: f64, n_nodes: usize) -> Result<f64> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::domain("generating_covariance", format!("need t, s ≥ 0, got ({t}, {s})")));
    }
    if t == 0.0 || s == 0.0 {
        return Ok(0.0);
    }
    covariance_quadrature(p, t.max(s), t.min(s), n_nodes)
}

/// Transition density of the ordinary OU process (α = γ = 1) from x at time
/// 0 to y at time τ.
pub fn ou_transition(p: &ProcessParams, tau: f64, x: f64, y: f64, ctl: &SeriesControl) -> Result<f64> {
    if !p.is_ordinary() {
        return Err(Error::domain("ou_transition", "only the Markov case alpha = gamma = 1 has a transition density"));
    }
    Ok(gaussian(y - x * (-p.lambda() * tau).exp(), u_beta(p, tau, ctl)?))
}

/// Composes two half-horizon OU transitions through the midpoint with
/// Gauss-Hermite quadrature; returns (composed, direct).
pub fn ou_chaining(p: &ProcessParams, b: &BoundaryData, ctl: &SeriesControl, n: usize) -> Result<(f64, f64)> {
    let h = 0.5 * b.beta;
    let u = u_beta(p, h, ctl)?;
    let mean = b.x0 * (-p.lambda() * h).exp();
    let gh = GaussHermite::new(n);
    let mut composed = 0.0;
    for (z, w) in gh.nodes.iter().zip(&gh.weights) {
        // The first factor is the Gaussian weight itself.
        let m = mean + (2.0 * u).sqrt() * z;
        composed += w / PI.sqrt() * ou_transition(p, h, m, b.x_beta, ctl)?;
    }
    Ok((composed, ou_transition(p, b.beta, b.x0, b.x_beta, ctl)?))
}
