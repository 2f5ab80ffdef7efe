use fou2_core::kernel::{
    covariance, covariance_quadrature, covariance_series, increment_variance, u_of_beta, u_of_t,
    variance_quadrature, variance_series, CoeffTable, ProcessParams,
};
use fou2_core::SeriesControl;
use nalgebra::DMatrix;

fn pp(a: f64, g: f64, l: f64) -> ProcessParams {
    ProcessParams::new(a, g, l).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

const GRID: [(f64, f64, f64); 6] = [
    (1.0, 1.0, 1.0),
    (0.8, 0.9, 0.7),
    (0.9, 0.8, 0.5),
    (0.95, 0.95, 0.5),
    (0.75, 0.8, 1.2),
    (1.0, 0.7, 0.4),
];

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn diagonal_consistency() {
    let ctl = SeriesControl::default();
    let mut checked = 0;
    for &(a, g, l) in &GRID {
        let p = pp(a, g, l);
        for &t in &[0.1, 0.7, 1.5, 3.0] {
            let v = match variance_series(&p, t, &ctl) {
                Ok(v) => v,
                Err(e) if e.is_series_failure() => continue,
                Err(e) => panic!("{e}"),
            };
            checked += 1;
            // Approach the diagonal from below through the double series.
            let c = covariance_series(&p, t, t * (1.0 - 1e-9), &ctl);
            let d = covariance_series(&p, t, t, &ctl).unwrap();
            assert!(rel(d, v) < 1e-10);
            if let Ok(c) = c {
                assert!(rel(c, v) < 1e-6, "{a} {g} {l} t={t}");
            }
        }
    }
    assert!(checked >= 20, "only {checked} grid points converged");
}

#[test]
fn route_agreement() {
    let ctl = SeriesControl::default();
    let mut checked = 0;
    for &(a, g, l) in &GRID {
        let p = pp(a, g, l);
        for &t in &[0.3, 1.0, 2.5] {
            if let Ok(vs) = variance_series(&p, t, &ctl) {
                let vq = variance_quadrature(&p, t, 20).unwrap();
                assert!(rel(vs, vq) < 1e-6, "variance {a} {g} {l} t={t}: {vs} vs {vq}");
                checked += 1;
            }
            for &f in &[0.2, 0.6, 0.9] {
                let s = f * t;
                let Ok(cs) = covariance_series(&p, t, s, &ctl) else { continue };
                let cq = covariance_quadrature(&p, t, s, 20).unwrap();
                assert!(rel(cs, cq) < 1e-6, "cov {a} {g} {l} ({t},{s}): {cs} vs {cq}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 50, "only {checked} points converged");
}

#[test]
fn ordinary_ou_reduction() {
    let ctl = SeriesControl::default();
    for &l in &[0.3, 1.0, 2.0] {
        let p = pp(1.0, 1.0, l);
        for i in 1..=10 {
            for j in 1..=i {
                let t = 0.5 * i as f64;
                let s = 0.5 * j as f64;
                let exact = ((-l * (t - s)).exp() - (-l * (t + s)).exp()) / (2.0 * l);
                let c = covariance(&p, t, s, &ctl).unwrap();
                assert!(rel(c, exact) < 1e-8, "λ={l} ({t},{s}): {c} vs {exact}");
            }
        }
    }
}

#[test]
fn fbm_limit_scaling() {
    let ctl = SeriesControl::default();
    let p = pp(0.9, 0.85, 0.0);
    let ts: Vec<f64> = (0..12).map(|k| 0.1 * 1.6f64.powi(k)).collect();
    let vs: Vec<f64> = ts.iter().map(|&t| variance_series(&p, t, &ctl).unwrap()).collect();
    assert!((slope(&ts, &vs) - (2.0 * p.ag() - 1.0)).abs() < 1e-3);
    // Riemann-Liouville fBm variance with H = αγ - 1/2 and Γ(H + 1/2)².
    let h = p.hurst();
    let g = fou2_core::specfun::gamma(h + 0.5).unwrap();
    let expected = 1.0 / (2.0 * h * g * g);
    assert!(rel(vs[0] / ts[0].powf(2.0 * h), expected) < 1e-12);
    let cq = covariance_quadrature(&p, 2.0, 1.0, 20).unwrap();
    let cs = covariance_series(&p, 2.0, 1.0, &ctl).unwrap();
    assert!(rel(cq, cs) < 1e-8);
}

#[test]
fn local_self_similarity() {
    for &(a, g, l) in &[(0.8, 0.9, 0.7), (0.95, 0.95, 0.5)] {
        let p = pp(a, g, l);
        let t = 1.0;
        let taus: Vec<f64> = (0..9).map(|k| 1e-4 * 10f64.powf(k as f64 / 4.0)).collect();
        let iv: Vec<f64> = taus.iter().map(|&tau| increment_variance(&p, t, tau, 20).unwrap()).collect();
        let sl = slope(&taus, &iv);
        assert!((sl - (2.0 * p.ag() - 1.0)).abs() < 0.05, "slope {sl}");
    }
}

#[test]
fn large_time_decay() {
    let p = pp(0.8, 0.9, 1.0);
    let t = 1000.0;
    let taus: Vec<f64> = (0..6).map(|k| 100.0 * 10f64.powf(k as f64 / 5.0)).collect();
    let cs: Vec<f64> = taus.iter().map(|&tau| covariance_quadrature(&p, t + tau, t, 20).unwrap()).collect();
    let sl = slope(&taus, &cs);
    assert!((sl + 1.8).abs() < 0.15, "slope {sl}");
}

#[test]
fn covariance_matrix_is_psd() {
    let ctl = SeriesControl::default();
    for &(a, g, l) in &[(0.8, 0.9, 0.7), (0.75, 0.8, 1.2)] {
        let p = pp(a, g, l);
        let ts: Vec<f64> = (1..=32).map(|k| 0.1 * k as f64).collect();
        let n = ts.len();
        let m = DMatrix::from_fn(n, n, |i, j| covariance(&p, ts[i], ts[j], &ctl).unwrap());
        let eig = m.symmetric_eigenvalues();
        let max = eig.max();
        let min = eig.min();
        assert!(min >= -1e-8 * max, "min eigenvalue {min}, max {max}");
    }
}

#[test]
fn u_profile_monotone_and_consistent() {
    let ctl = SeriesControl::default();
    for &(a, g, l) in &GRID {
        let p = pp(a, g, l);
        let beta = 1.5;
        let ub = u_of_beta(&p, beta, &ctl).unwrap();
        assert!(rel(ub, variance_series(&p, beta, &ctl).unwrap()) < 1e-14);
        let mut prev = 0.0;
        for k in 1..=40 {
            let t = beta * k as f64 / 40.0;
            let u = u_of_t(&p, t, beta, &ctl).or_else(|_| covariance(&p, beta, t, &ctl)).unwrap();
            assert!(u > prev, "U not increasing at t={t}");
            prev = u;
        }
        assert!(rel(prev, ub) < 1e-10);
    }
}

#[test]
fn coefficient_table_is_positive_and_identical() {
    let tab = CoeffTable::new(&pp(0.8, 0.9, 0.7), 200);
    assert_eq!(tab.lambda_q.len(), tab.q_max + 1);
    for (l, o) in tab.lambda_q.iter().zip(&tab.omega_q) {
        assert!(*l > 0.0);
        assert_eq!(l.to_bits(), o.to_bits());
    }
}

#[test]
fn variance_series_errors_beyond_window() {
    let p = pp(0.8, 0.9, 1.0);
    let err = variance_series(&p, 500.0, &SeriesControl::default()).unwrap_err();
    assert!(err.is_series_failure());
    assert!(err.to_string().contains("quadrature"));
    let v = variance_quadrature(&p, 500.0, 20).unwrap();
    assert!(v.is_finite() && v > 0.0);
}
