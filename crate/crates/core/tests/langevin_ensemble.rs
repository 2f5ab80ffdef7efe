use fou2_core::kernel::{covariance, variance_series, ProcessParams};
use fou2_core::langevin::{
    autocorrelation, bartlett_band, build_kernel_table, grunwald_apply, mean_with_jackknife, sample_covariance,
    simulate, simulate_terminal, simulate_with_table, GrunwaldOperator, KernelScheme, SimulateOptions,
};
use fou2_core::SeriesControl;

fn pp(a: f64, g: f64, l: f64) -> ProcessParams {
    ProcessParams::new(a, g, l).unwrap()
}

#[test]
fn single_step_variance() {
    let p = pp(0.8, 0.9, 0.7);
    let dt = 0.01;
    let t = build_kernel_table(&p, dt, 1, KernelScheme::Midpoint).unwrap();
    let xs = simulate_terminal(&t, 1, 40_000, 9).unwrap();
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let e = mean_with_jackknife(&sq).unwrap();
    let want = t.weights[0] * t.weights[0] * dt;
    assert!((e.value - want).abs() < 3.0 * e.std_error);
}

#[test]
fn ordinary_ou_variance_at_one() {
    let p = pp(1.0, 1.0, 1.0);
    let t = build_kernel_table(&p, 1e-3, 1000, KernelScheme::default()).unwrap();
    let xs = simulate_terminal(&t, 1000, 100_000, 17).unwrap();
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let e = mean_with_jackknife(&sq).unwrap();
    assert!((e.value - 0.4323).abs() < 3.0 * e.std_error + 5e-5, "{} ± {}", e.value, e.std_error);
}

#[test]
fn fbm_limit_variance_slope() {
    // λ = 0, αγ = 0.75: variance ~ t^{0.5}.
    let p = pp(1.0, 0.75, 0.0);
    let dt = 1e-3;
    let n = 1000;
    let t = build_kernel_table(&p, dt, n, KernelScheme::default()).unwrap();
    let ens = simulate_with_table(&p, &t, n, 4000, 21, &SimulateOptions::default()).unwrap();
    let ks = [50usize, 100, 200, 400, 800];
    let lx: Vec<f64> = ks.iter().map(|&k| (k as f64 * dt).ln()).collect();
    let ly: Vec<f64> = ks.iter().map(|&k| sample_covariance(&ens, k, k).unwrap().value.ln()).collect();
    let mx = lx.iter().sum::<f64>() / 5.0;
    let my = ly.iter().sum::<f64>() / 5.0;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    assert!((sxy / sxx - 0.5).abs() < 0.03, "slope {}", sxy / sxx);
}

#[test]
fn ensemble_covariances_match_analytic() {
    let ctl = SeriesControl::default();
    let dt = 5e-3;
    let n = 200;
    for &(a, g, l) in &[(0.8, 0.9, 0.7), (1.0, 1.0, 1.0)] {
        let p = pp(a, g, l);
        let ens = simulate(&p, dt, n, 20_000, 5).unwrap();
        assert_eq!(sample_covariance(&ens, 0, 150).unwrap().value, 0.0);
        let d = sample_covariance(&ens, n, n).unwrap();
        let v = variance_series(&p, n as f64 * dt, &ctl).unwrap();
        assert!((d.value - v).abs() < 3.0 * d.std_error);
        let c = sample_covariance(&ens, n, 80).unwrap();
        let want = covariance(&p, 1.0, 0.4, &ctl).unwrap();
        assert!((c.value - want).abs() < 3.0 * c.std_error + 2e-3 * want, "({a},{g},{l}): {} vs {want}", c.value);
    }
}

#[test]
fn schemes_converge_to_each_other() {
    let p = pp(0.9, 0.9, 0.5);
    let var_at_one = |scheme, dt: f64| {
        let n = (1.0 / dt).round() as usize;
        build_kernel_table(&p, dt, n, scheme).unwrap().discrete_variance(n)
    };
    let gap = |dt| (var_at_one(KernelScheme::Midpoint, dt) / var_at_one(KernelScheme::CellIntegrated, dt) - 1.0).abs();
    let (coarse, fine) = (gap(1e-2), gap(1e-3));
    assert!(fine < coarse && fine < 0.02, "{coarse} {fine}");
}

#[test]
fn determinism_and_thread_independence() {
    let p = pp(0.8, 0.9, 0.7);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&p, 1e-2, 100, 64, 77).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert!(a.paths.iter().zip(&b.paths).all(|(x, y)| x.to_bits() == y.to_bits()));
    let c = simulate(&p, 1e-2, 100, 64, 78).unwrap();
    assert_ne!(a.paths, c.paths);
}

#[test]
fn fft_route_matches_direct() {
    let p = pp(0.8, 0.9, 0.7);
    let t = build_kernel_table(&p, 2e-4, 5000, KernelScheme::default()).unwrap();
    let direct = SimulateOptions {
        force_fft: Some(false),
        ..Default::default()
    };
    let fft = SimulateOptions {
        force_fft: Some(true),
        ..Default::default()
    };
    let a = simulate_with_table(&p, &t, 5000, 3, 1, &direct).unwrap();
    let b = simulate_with_table(&p, &t, 5000, 3, 1, &fft).unwrap();
    let scale = a.paths.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.paths.iter().zip(&b.paths).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff <= 1e-10 * scale);
}

#[test]
fn operator_residuals_are_white() {
    let p = pp(0.9, 0.9, 0.5);
    let dt = 1e-3;
    let n = 2000;
    let table = build_kernel_table(&p, dt, n, KernelScheme::Midpoint).unwrap();
    let op = GrunwaldOperator::new(&p, dt, n + 1, None, 1e-12).unwrap();
    let ens = simulate_with_table(&p, &table, n, 4, 123, &SimulateOptions::default()).unwrap();
    for i in 0..4 {
        let r = grunwald_apply(&op, ens.path(i)).unwrap();
        let acf = autocorrelation(&r[1..], 10);
        let band = 5.0 / (n as f64).sqrt();
        assert!(acf.iter().all(|v| v.abs() < band), "path {i}: {acf:?}");
        assert!(band > bartlett_band(n, 2.576));
    }
}
