//! Gauss rules and the graded integrator used for the weakly singular
//! convolution integrals of the kernel.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss-Legendre rule mapped to [0, 1].
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map [-1, 1] → [0, 1].
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// ∫_a^b f with a single panel.
    pub fn panel<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let h = b - a;
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(a + h * x);
        }
        s * h
    }

    /// Composite rule with `panels` equal panels on [a, b].
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == panels { b } else { lo + h };
                self.panel(&mut f, lo, hi)
            })
            .sum()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Hermite rule for ∫ f(x) e^{-x²} dx.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 1.0;
            for _ in 0..100 {
                // Orthonormal recurrence keeps values bounded for large n.
                let mut p1 = PI.powf(-0.25);
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        GaussHermite { nodes, weights }
    }

    /// E[f(X)] for X ~ N(mean, var).
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, mean: f64, var: f64) -> f64 {
        let s = (2.0 * var).sqrt();
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mean + s * x);
        }
        acc / PI.sqrt()
    }
}

/// Ratio between consecutive panel breakpoints in the graded mesh.
const GRADING: f64 = 0.2;
/// Innermost panel size, relative to the interval, in the stretched variable.
const INNER: f64 = 1e-14;
const MAX_PANELS: usize = 400;

/// ∫₀^L f(v) dv for an integrand behaving like v^p at the left end (p > -1).
///
/// The substitution v = L·w^{1/(p+1)} removes the leading singularity; the
/// stretched interval is then split into geometrically shrinking panels so
/// that sub-leading non-analytic terms and a possible nearby singularity at
/// v = -`near` are resolved. Each panel uses the supplied Gauss rule.
pub fn graded_integral<F: FnMut(f64) -> f64>(
    op: &'static str,
    mut f: F,
    len: f64,
    p: f64,
    near: Option<f64>,
    gl: &GaussLegendre,
) -> Result<f64> {
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::quadrature(op, format!("interval length must be positive, got {len}")));
    }
    if !(p > -1.0) {
        return Err(Error::quadrature(op, format!("endpoint exponent {p} is not integrable")));
    }
    let q = 1.0 / (p + 1.0);
    let mut w_min = INNER;
    if let Some(d) = near {
        if d > 0.0 && d < len {
            // Panels in v must reach well below the distance to the neighbour.
            w_min = w_min.min((0.05 * d / len).powf(1.0 / q));
        }
    }
    let panels = ((w_min.ln() / GRADING.ln()).ceil() as usize).clamp(1, MAX_PANELS);
    let mut bad: Option<(f64, f64)> = None;
    let mut g = |w: f64| {
        let v = len * w.powf(q);
        let val = f(v) * len * q * w.powf(q - 1.0);
        if !val.is_finite() && bad.is_none() {
            bad = Some((v, val));
        }
        val
    };
    let mut total = 0.0;
    let mut hi = 1.0;
    for _ in 0..panels {
        let lo = hi * GRADING;
        total += gl.panel(&mut g, lo, hi);
        hi = lo;
    }
    total += gl.panel(&mut g, 0.0, hi);
    if let Some((v, val)) = bad {
        return Err(Error::quadrature(op, format!("non-finite integrand {val} at distance {v} from the singular end")));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        let v = gl.composite(|x| x.powi(15), 0.0, 2.0, 1);
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-10);
    }

    #[test]
    fn hermite_moments() {
        let gh = GaussHermite::new(40);
        assert!((gh.expect(|_| 1.0, 0.3, 2.0) - 1.0).abs() < 1e-13);
        assert!((gh.expect(|x| (x - 0.3).powi(2), 0.3, 2.0) - 2.0).abs() < 1e-12);
        assert!((gh.expect(|x| (x - 0.3).powi(4), 0.3, 2.0) - 12.0).abs() < 1e-11);
    }

    #[test]
    fn graded_handles_endpoint_power() {
        let gl = GaussLegendre::new(20);
        for &p in &[-0.9, -0.5, -0.28, 0.0, 0.4] {
            let v = graded_integral("t", |v: f64| v.powf(p) * (1.0 + v.powf(0.8)), 2.0, p, None, &gl).unwrap();
            let exact = 2f64.powf(p + 1.0) / (p + 1.0) + 2f64.powf(p + 1.8) / (p + 1.8);
            assert!(((v - exact) / exact).abs() < 1e-12, "p = {p}: {v} vs {exact}");
        }
    }

    #[test]
    fn graded_resolves_nearby_singularity() {
        let gl = GaussLegendre::new(20);
        let d = 1e-7;
        let p = -0.3;
        let v = graded_integral("t", |v: f64| v.powf(p) * (v + d).powf(p), 1.0, p, Some(d), &gl).unwrap();
        // Reference from splitting by hand with the same rule.
        let a = graded_integral("t", |v: f64| v.powf(p) * (v + d).powf(p), d, p, None, &gl).unwrap();
        let b = graded_integral("t", |u: f64| (u + d).powf(p) * (u + 2.0 * d).powf(p), 1.0 - d, 2.0 * p, Some(d), &gl)
            .unwrap();
        assert!(((v - (a + b)) / v).abs() < 1e-10, "{v} vs {}", a + b);
    }
}
