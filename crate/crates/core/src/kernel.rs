//! Green's function, covariance, variance and the pinned-path profile U(t)
//! of the two-index fractional Ornstein-Uhlenbeck process
//!
//! ```text
//! x(t) = ∫₀ᵗ G(t-u) dB(u),   G(t) = t^{αγ-1} E^γ_{α,αγ}(-λ^α t^α).
//! ```
//!
//! Every second-order statistic is available through two independent routes:
//! the closed-form power series (summed along anti-diagonals `q = m + n` of the
//! double series) and direct quadrature of the defining convolution integral.
//! The series are exact in double-double arithmetic when α = 1; otherwise
//! their rounding is tracked and an explicit error is raised once the
//! alternating terms lose too many digits, at which point the quadrature
//! route is the one to use.

use std::cell::Cell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::quad::{graded_integral, GaussLegendre};
use crate::specfun::{
    hyp2f1_unit_b_dd, ln_gamma_pos, prabhakar_terms_needed, rgamma, PrabhakarSeries, SeriesAccumulator,
    SeriesControl, SeriesFailure, DD_EPS, PRABHAKAR_WINDOW, QUADRATURE_HINT,
};

/// Validated process parameters (α, γ, λ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ProcessParams {
    alpha: f64,
    gamma: f64,
    lambda: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    alpha: f64,
    gamma: f64,
    lambda: f64,
}

impl TryFrom<RawParams> for ProcessParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ProcessParams::new(r.alpha, r.gamma, r.lambda)
    }
}

impl ProcessParams {
    /// Requires 0 < α ≤ 1, 0 < γ ≤ 1, αγ > 1/2 and λ ≥ 0.
    pub fn new(alpha: f64, gamma: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParams(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParams(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if !(alpha * gamma > 0.5) {
            return Err(Error::InvalidParams(format!(
                "alpha*gamma must exceed 1/2 for a finite variance, got {}",
                alpha * gamma
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        Ok(ProcessParams { alpha, gamma, lambda })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Product αγ, the leading power of the kernel.
    pub fn ag(&self) -> f64 {
        self.alpha * self.gamma
    }

    /// Hurst exponent H = αγ - 1/2 of the local fractional-Brownian behaviour.
    pub fn hurst(&self) -> f64 {
        self.ag() - 0.5
    }

    /// λ^α (zero when λ = 0).
    pub fn lambda_alpha(&self) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda.powf(self.alpha)
        }
    }

    /// True for α = γ = 1, the ordinary Ornstein-Uhlenbeck process.
    pub fn is_ordinary(&self) -> bool {
        self.alpha == 1.0 && self.gamma == 1.0
    }

    /// Exponent `a_m = α(γ + m)`.
    fn a(&self, m: usize) -> f64 {
        self.alpha * (self.gamma + m as f64)
    }

    /// Scaled argument λ^α t^α, exact in double-double when α = 1.
    fn scaled(&self, t: f64) -> Dd {
        if self.alpha == 1.0 {
            Dd::new(self.lambda) * t
        } else {
            Dd::new((self.lambda * t).powf(self.alpha))
        }
    }
}

/// Number of Talbot nodes used by the Laplace-inversion route.
pub const TALBOT_NODES: usize = 24;

/// Fixed-Talbot inversion of a Laplace transform at t > 0.
fn talbot<F: Fn(Complex64) -> Complex64>(f: F, t: f64, m: usize) -> f64 {
    let mf = m as f64;
    let r = 2.0 * mf / (5.0 * t);
    let mut acc = 0.5 * f(Complex64::new(r, 0.0)).re * (r * t).exp();
    for k in 1..m {
        let th = k as f64 * PI / mf;
        let cot = 1.0 / th.tan();
        let s = Complex64::new(r * th * cot, r * th);
        let sig = th + (th * cot - 1.0) * cot;
        acc += ((s * t).exp() * f(s) * Complex64::new(1.0, sig)).re;
    }
    acc * r / mf
}

/// Green's function G and its derivative with cached series coefficients.
///
/// `g` and `dg` use the power series only and fail honestly outside its
/// reliable range; the `_auto` variants fall back to Laplace inversion of
/// `(s^α + λ^α)^{-γ}` on such failures.
#[derive(Clone, Debug)]
pub struct GreenFn {
    p: ProcessParams,
    ctl: SeriesControl,
    la: f64,
    g: PrabhakarSeries,
    dg: PrabhakarSeries,
}

impl GreenFn {
    pub fn new(p: ProcessParams, ctl: SeriesControl) -> Result<Self> {
        ctl.validate()?;
        let n = prabhakar_terms_needed(p.alpha, PRABHAKAR_WINDOW).min(ctl.max_terms);
        Ok(GreenFn {
            p,
            ctl,
            la: p.lambda_alpha(),
            g: PrabhakarSeries::new(p.alpha, p.ag(), p.gamma, n),
            dg: PrabhakarSeries::new(p.alpha, p.ag() - 1.0, p.gamma, n),
        })
    }

    pub fn params(&self) -> &ProcessParams {
        &self.p
    }

    fn check_t(t: f64, op: &'static str) -> Result<()> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(op, format!("time must be positive and finite, got {t}")));
        }
        Ok(())
    }

    /// G(t) by series.
    pub fn g(&self, t: f64) -> Result<f64> {
        Self::check_t(t, "green_g")?;
        let pre = t.powf(self.p.ag() - 1.0);
        if self.la == 0.0 {
            return Ok(pre * rgamma(self.p.ag()));
        }
        let z = -self.p.scaled(t).to_f64();
        Ok(pre * self.g.eval(z, &self.ctl).value()?)
    }

    /// G'(t) by series.
    pub fn dg(&self, t: f64) -> Result<f64> {
        Self::check_t(t, "green_g_prime")?;
        let pre = t.powf(self.p.ag() - 2.0);
        if self.la == 0.0 {
            return Ok(pre * rgamma(self.p.ag() - 1.0));
        }
        let z = -self.p.scaled(t).to_f64();
        Ok(pre * self.dg.eval(z, &self.ctl).value()?)
    }

    /// G(t) by Laplace inversion.
    pub fn g_laplace(&self, t: f64) -> Result<f64> {
        Self::check_t(t, "green_g_laplace")?;
        let (a, g, la) = (self.p.alpha, self.p.gamma, self.la);
        Ok(talbot(|s| (s.powf(a) + la).powf(-g), t, TALBOT_NODES))
    }

    /// G'(t) by Laplace inversion.
    pub fn dg_laplace(&self, t: f64) -> Result<f64> {
        Self::check_t(t, "green_g_prime")?;
        let (a, g, la) = (self.p.alpha, self.p.gamma, self.la);
        Ok(talbot(|s| s * (s.powf(a) + la).powf(-g), t, TALBOT_NODES))
    }

    pub fn g_auto(&self, t: f64) -> Result<f64> {
        match self.g(t) {
            Err(e) if e.is_series_failure() => self.g_laplace(t),
            r => r,
        }
    }

    pub fn dg_auto(&self, t: f64) -> Result<f64> {
        match self.dg(t) {
            Err(e) if e.is_series_failure() => self.dg_laplace(t),
            r => r,
        }
    }
}

/// Green's function G(t) by series.
pub fn green_g(p: &ProcessParams, t: f64, ctl: &SeriesControl) -> Result<f64> {
    GreenFn::new(*p, *ctl)?.g(t)
}

/// Green's function G(t) by fixed-Talbot Laplace inversion.
pub fn green_g_laplace(p: &ProcessParams, t: f64) -> Result<f64> {
    GreenFn::new(*p, SeriesControl::default())?.g_laplace(t)
}

/// G(t) by series, falling back to Laplace inversion where the series fails.
pub fn green_g_auto(p: &ProcessParams, t: f64, ctl: &SeriesControl) -> Result<f64> {
    GreenFn::new(*p, *ctl)?.g_auto(t)
}

/// Coefficients of the anti-diagonal variance series.
///
/// `c_m = binom(γ+m-1, m) / Γ(α(γ+m))`; `Λ_q = Ω_q = Σ_{m+n=q} c_m c_n`.
#[derive(Clone, Debug)]
pub struct CoeffTable {
    pub lambda_q: Vec<f64>,
    pub omega_q: Vec<f64>,
    pub q_max: usize,
    c: Vec<Dd>,
}

/// Builds `c_m` for m < n; exact in double-double when α = 1.
fn c_coeffs(p: &ProcessParams, n: usize) -> (Vec<Dd>, Vec<f64>) {
    let mut c = Vec::with_capacity(n);
    let mut ln_max = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    if p.alpha == 1.0 {
        // c_{m+1} = c_m / (m+1) since Γ(γ+m+1) = (γ+m)Γ(γ+m).
        let mut cm = Dd::new(rgamma(p.gamma));
        for m in 0..n {
            c.push(cm);
            ln_max.push(0.0);
            cm = cm / (m as f64 + 1.0);
        }
    } else {
        let mut ln_b = 0.0f64;
        for m in 0..n {
            let mf = m as f64;
            if m > 0 {
                ln_b += ((p.gamma + mf - 1.0) / mf).ln();
            }
            let l = ln_b - ln_gamma_pos(p.a(m));
            worst = worst.max(l.abs());
            c.push(Dd::new(l.exp()));
            ln_max.push(worst);
        }
    }
    (c, ln_max)
}

/// Σ_{m=0}^{q} c_m c_{q-m} in a fixed summation order.
fn anti_diagonal(c: &[Dd], q: usize) -> Dd {
    let mut s = Dd::ZERO;
    for m in 0..=q {
        s = s + c[m] * c[q - m];
    }
    s
}

impl CoeffTable {
    /// Table for q = 0..=q_max (shortened if entries underflow).
    pub fn new(p: &ProcessParams, q_max: usize) -> Self {
        let (c, _) = c_coeffs(p, q_max + 1);
        let mut lambda_q = Vec::with_capacity(q_max + 1);
        let mut omega_q = Vec::with_capacity(q_max + 1);
        for q in 0..=q_max {
            let l = anti_diagonal(&c, q).to_f64();
            let o = Self::omega_entry(&c, q);
            assert_eq!(l.to_bits(), o.to_bits(), "Λ_q and Ω_q must coincide at q = {q}");
            if !(l >= f64::MIN_POSITIVE) {
                break;
            }
            lambda_q.push(l);
            omega_q.push(o);
        }
        let q_max = lambda_q.len().saturating_sub(1);
        CoeffTable {
            lambda_q,
            omega_q,
            q_max,
            c,
        }
    }

    /// Ω_q as it arises from U(β): the same pair sum over m + n = q.
    fn omega_entry(c: &[Dd], q: usize) -> f64 {
        anti_diagonal(c, q).to_f64()
    }

    /// Coefficient c_m.
    pub fn c(&self, m: usize) -> f64 {
        self.c[m].to_f64()
    }
}

/// Relative rounding of diagonal q for the current coefficient source.
fn diag_rel_err(exact: bool, q: usize, ln_c_max: f64) -> f64 {
    if exact {
        DD_EPS * (q as f64 + 8.0)
    } else {
        f64::EPSILON * (8.0 + 2.0 * q as f64 + ln_c_max)
    }
}

/// Diagonals needed for a double series at scaled argument x.
fn diagonals_needed(alpha: f64, x: f64, ctl: &SeriesControl) -> usize {
    prabhakar_terms_needed(alpha, 2.0 * x).min(ctl.max_terms)
}

fn window_check(op: &'static str, x: f64) -> Result<()> {
    if x > PRABHAKAR_WINDOW {
        return Err(Error::OutsideWindow {
            op,
            arg: x,
            limit: PRABHAKAR_WINDOW,
            hint: QUADRATURE_HINT,
        });
    }
    Ok(())
}

fn cancelled(op: &'static str, acc: &SeriesAccumulator, pre: f64) -> Error {
    Error::Cancellation {
        op,
        estimate: acc.rounding() * pre,
        value: acc.sum().to_f64() * pre,
        hint: QUADRATURE_HINT,
    }
}

/// Σ_q (-x)^q Λ_q / (α(2γ+q) - 1), times t^{2αγ-1}; with `deriv` the
/// t-derivative Σ_q (-x)^q Λ_q t^{2αγ-2} instead.
pub(crate) fn diagonal_power_series(
    op: &'static str,
    p: &ProcessParams,
    t: f64,
    ctl: &SeriesControl,
    deriv: bool,
) -> Result<f64> {
    ctl.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(op, format!("time must be non-negative and finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let ag = p.ag();
    let pre = t.powf(2.0 * ag - if deriv { 2.0 } else { 1.0 });
    if p.lambda == 0.0 {
        let r = rgamma(ag);
        let den = if deriv { 1.0 } else { 2.0 * ag - 1.0 };
        return Ok(pre * r * r / den);
    }
    let xd = p.scaled(t);
    let x = xd.to_f64();
    window_check(op, x)?;
    let qn = diagonals_needed(p.alpha, x, ctl);
    let (c, ln_c_max) = c_coeffs(p, qn + 1);
    let exact = p.alpha == 1.0;
    let mut acc = SeriesAccumulator::new(ctl.rel_tol);
    let mut pow = Dd::ONE;
    let mut stopped = false;
    let mut bound = 0.0;
    for q in 0..=qn {
        let lam = anti_diagonal(&c, q);
        let den = if deriv {
            Dd::ONE
        } else if exact {
            Dd::new(2.0 * p.gamma) + (q as f64 - 1.0)
        } else {
            Dd::new(p.alpha * (2.0 * p.gamma + q as f64) - 1.0)
        };
        let term = pow * lam / den;
        if q == 0 {
            bound = term.to_f64().abs();
        }
        if acc.push(term, diag_rel_err(exact, q, ln_c_max[q])) {
            stopped = true;
            break;
        }
        // The result never exceeds its λ = 0 value, the first term.
        if acc.rounding() > ctl.rel_tol * bound {
            return Err(cancelled(op, &acc, pre));
        }
        pow = -(pow * xd);
    }
    let r = acc.finish(op, stopped);
    Ok(pre * r.value()?)
}

/// Variance σ²(t) by the closed-form series.
pub fn variance_series(p: &ProcessParams, t: f64, ctl: &SeriesControl) -> Result<f64> {
    diagonal_power_series("variance_series", p, t, ctl, false)
}

/// U(β), the endpoint value of the pinned-path profile. Identical to σ²(β).
pub fn u_of_beta(p: &ProcessParams, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain("u_of_beta", format!("beta must be positive, got {beta}")));
    }
    diagonal_power_series("u_of_beta", p, beta, ctl, false)
}

/// Covariance C(t, s) by the hypergeometric double series.
///
/// Arguments are symmetrized. On the diagonal the ₂F₁ factor is summed in
/// closed form, which reduces the double series to the variance series.
/// Near the diagonal the ₂F₁ series converge slowly and may exhaust the term
/// cap; the quadrature route is authoritative there.
pub fn covariance_series(p: &ProcessParams, t: f64, s: f64, ctl: &SeriesControl) -> Result<f64> {
    const OP: &str = "covariance_series";
    ctl.validate()?;
    if !(t >= 0.0 && s >= 0.0) || !t.is_finite() || !s.is_finite() {
        return Err(Error::domain(OP, format!("times must be non-negative and finite, got ({t}, {s})")));
    }
    let (t, s) = if s > t { (s, t) } else { (t, s) };
    if s == 0.0 {
        return Ok(0.0);
    }
    if s == t {
        return variance_series(p, t, ctl);
    }
    let rho = s / t;
    let ag = p.ag();
    let exact = p.alpha == 1.0;
    let xd = p.scaled(t);
    let x = xd.to_f64();
    window_check(OP, x)?;
    let qn = if p.lambda == 0.0 { 0 } else { diagonals_needed(p.alpha, x, ctl) };
    let (c, ln_c_max) = c_coeffs(p, qn + 1);
    // Inner ₂F₁ tolerance scaled so its tail, ~ tol·ρ/(1-ρ), stays below rel_tol.
    let inner = SeriesControl {
        rel_tol: (ctl.rel_tol * (1.0 - rho)).max(1e-18),
        max_terms: ctl.max_terms,
    };
    // ρ^{a_m}: for α = 1 the common factor ρ^γ is pulled out front.
    let (pre, rho_pow): (f64, Box<dyn Fn(usize) -> Dd>) = if exact {
        (
            t.powf(2.0 * ag - 1.0) * rho.powf(p.gamma),
            Box::new(move |m| Dd::new(rho).powi(m as u32)),
        )
    } else {
        let p2 = *p;
        (t.powf(2.0 * ag - 1.0), Box::new(move |m| Dd::new(rho.powf(p2.a(m)))))
    };
    let a_dd = |m: usize| {
        if exact {
            Dd::new(p.gamma) + m as f64
        } else {
            Dd::new(p.a(m))
        }
    };
    let mut acc = SeriesAccumulator::new(ctl.rel_tol);
    let mut pow = Dd::ONE;
    let mut stopped = false;
    let mut bound = 0.0;
    for q in 0..=qn {
        let mut diag = Dd::ZERO;
        let mut err = 0.0;
        let base = diag_rel_err(exact, q, ln_c_max[q]);
        for m in 0..=q {
            let n = q - m;
            let am = a_dd(m);
            let an = a_dd(n);
            let (a_in, c_in) = (Dd::ONE - an, Dd::ONE + am);
            let (f, fdd, summed) = hyp2f1_unit_b_dd(a_in.to_f64(), c_in.to_f64(), rho, &inner);
            // Cancellation inside ₂F₁ is tolerated: its rounding is carried
            // into the outer estimate, which decides.
            let fv = match f.failure {
                Some(SeriesFailure::Cancellation) => f.partial_sum(),
                _ => f.value()?,
            };
            let piece = c[m] / am * c[n] * rho_pow(m) * fdd;
            let mag = piece.to_f64().abs();
            // Parameters that are exact in double precision leave only the
            // summation rounding.
            let inner_err = if a_in.lo == 0.0 && c_in.lo == 0.0 { summed } else { f.rounding_estimate };
            err += mag * (base + inner_err / fv.abs().max(f64::MIN_POSITIVE));
            if !exact {
                err += mag * f64::EPSILON * (1.0 + (p.a(m) * rho.ln()).abs());
            }
            diag = diag + piece;
        }
        let term = pow * diag;
        let term_err = err * pow.to_f64().abs();
        if q == 0 {
            bound = term.to_f64().abs();
        }
        if acc.push_abs(term, term_err) {
            stopped = true;
            break;
        }
        if acc.rounding() > ctl.rel_tol * bound {
            return Err(cancelled(OP, &acc, pre));
        }
        pow = -(pow * xd);
    }
    if p.lambda == 0.0 {
        stopped = true;
    }
    let r = acc.finish(OP, stopped);
    Ok(pre * r.value()?)
}

/// U(t) = C(β, t) for 0 ≤ t ≤ β, the profile of the classical path.
pub fn u_of_t(p: &ProcessParams, t: f64, beta: f64, ctl: &SeriesControl) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain("u_of_t", format!("beta must be positive, got {beta}")));
    }
    if !(0.0..=beta).contains(&t) {
        return Err(Error::domain("u_of_t", format!("t must lie in [0, beta], got {t}")));
    }
    if t == beta {
        return u_of_beta(p, beta, ctl);
    }
    covariance_series(p, beta, t, ctl)
}

/// Default Gauss-Legendre order per panel of the graded quadrature.
pub const DEFAULT_NODES: usize = 20;

fn quad_setup(op: &'static str, p: &ProcessParams, n_nodes: usize) -> Result<(GreenFn, GaussLegendre)> {
    if n_nodes < 16 {
        return Err(Error::quadrature(op, format!("n_nodes must be at least 16, got {n_nodes}")));
    }
    Ok((GreenFn::new(*p, SeriesControl::default())?, GaussLegendre::new(n_nodes)))
}

/// Runs a graded integral whose integrand may fail, surfacing the first error.
fn guarded<F: FnMut(f64) -> Result<f64>>(
    op: &'static str,
    mut f: F,
    len: f64,
    exponent: f64,
    near: Option<f64>,
    gl: &GaussLegendre,
) -> Result<f64> {
    let failed: Cell<Option<Error>> = Cell::new(None);
    let v = graded_integral(
        op,
        |v| match f(v) {
            Ok(x) => x,
            Err(e) => {
                let prev = failed.take();
                failed.set(Some(prev.unwrap_or(e)));
                0.0
            }
        },
        len,
        exponent,
        near,
        gl,
    );
    if let Some(e) = failed.take() {
        return Err(e);
    }
    v
}

/// σ²(t) = ∫₀ᵗ G(v)² dv by graded quadrature; `n_nodes` is the Gauss order per panel.
pub fn variance_quadrature(p: &ProcessParams, t: f64, n_nodes: usize) -> Result<f64> {
    const OP: &str = "variance_quadrature";
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(OP, format!("time must be positive, got {t}")));
    }
    let (g, gl) = quad_setup(OP, p, n_nodes)?;
    guarded(OP, |v| g.g_auto(v).map(|x| x * x), t, 2.0 * p.ag() - 2.0, None, &gl)
}

/// C(t, s) = ∫₀^{min} G(t-u) G(s-u) du by graded quadrature.
pub fn covariance_quadrature(p: &ProcessParams, t: f64, s: f64, n_nodes: usize) -> Result<f64> {
    const OP: &str = "covariance_quadrature";
    if !(t > 0.0 && s > 0.0) || !t.is_finite() || !s.is_finite() {
        return Err(Error::domain(OP, format!("times must be positive, got ({t}, {s})")));
    }
    let (t, s) = if s > t { (s, t) } else { (t, s) };
    let d = t - s;
    if d == 0.0 {
        return variance_quadrature(p, t, n_nodes);
    }
    let (g, gl) = quad_setup(OP, p, n_nodes)?;
    // v = s - u; the integrand is singular at v = 0 and near-singular at v = -d.
    guarded(OP, |v| Ok(g.g_auto(v + d)? * g.g_auto(v)?), s, p.ag() - 1.0, Some(d), &gl)
}

/// U(t) = C(β, t) by quadrature.
pub fn u_of_t_quadrature(p: &ProcessParams, t: f64, beta: f64, n_nodes: usize) -> Result<f64> {
    if !(0.0..=beta).contains(&t) {
        return Err(Error::domain("u_of_t", format!("t must lie in [0, beta], got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    covariance_quadrature(p, beta, t, n_nodes)
}

/// Var[x(t+τ) - x(t)], assembled without subtracting covariances:
/// ∫₀ᵗ [G(v+τ) - G(v)]² dv + ∫₀^τ G(v)² dv.
pub fn increment_variance(p: &ProcessParams, t: f64, tau: f64, n_nodes: usize) -> Result<f64> {
    const OP: &str = "increment_variance";
    if !(t >= 0.0 && tau > 0.0) {
        return Err(Error::domain(OP, format!("need t ≥ 0 and tau > 0, got ({t}, {tau})")));
    }
    let fresh = variance_quadrature(p, tau, n_nodes)?;
    if t == 0.0 {
        return Ok(fresh);
    }
    let (g, gl) = quad_setup(OP, p, n_nodes)?;
    let old = guarded(
        OP,
        |v| {
            let d = g.g_auto(v + tau)? - g.g_auto(v)?;
            Ok(d * d)
        },
        t,
        2.0 * p.ag() - 2.0,
        Some(tau),
        &gl,
    )?;
    Ok(old + fresh)
}

/// Covariance by series, falling back to quadrature where the series fails.
pub fn covariance(p: &ProcessParams, t: f64, s: f64, ctl: &SeriesControl) -> Result<f64> {
    match covariance_series(p, t, s, ctl) {
        Err(e) if e.is_series_failure() => covariance_quadrature(p, t, s, DEFAULT_NODES),
        r => r,
    }
}

/// Variance by series, falling back to quadrature where the series fails.
pub fn variance(p: &ProcessParams, t: f64, ctl: &SeriesControl) -> Result<f64> {
    match variance_series(p, t, ctl) {
        Err(e) if e.is_series_failure() => variance_quadrature(p, t, DEFAULT_NODES),
        r => r,
    }
}
