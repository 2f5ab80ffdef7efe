use fou2_core::fpe::analytic_density;
use fou2_core::kernel::ProcessParams;
use fou2_core::langevin::GrunwaldOperator;
use fou2_core::pathint::{discrete_action, discrete_classical_path, propagator, BoundaryData, DiscretePath};
use fou2_core::SeriesControl;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pp(a: f64, g: f64, l: f64) -> ProcessParams {
    ProcessParams::new(a, g, l).unwrap()
}

fn pinned_noise(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut q: Vec<f64> = (0..=n).map(|_| rng.random::<f64>() - 0.5).collect();
    q[0] = 0.0;
    q[n] = 0.0;
    q
}

#[test]
fn action_is_quadratic_around_the_minimizer() {
    let p = pp(0.85, 0.9, 0.6);
    let b = BoundaryData::new(0.3, -0.4, 1.0).unwrap();
    let n = 256;
    let dt = 1.0 / n as f64;
    let op = GrunwaldOperator::new(&p, dt, n + 1, None, 1e-12).unwrap();
    let (xc, s_min) = discrete_classical_path(&op, &b, n).unwrap();
    assert!(xc.is_pinned(&b, 1e-12));
    let s_c = discrete_action(&xc, &op).unwrap();
    assert!(((s_c - s_min) / s_min).abs() < 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let q = pinned_noise(&mut rng, n);
        let act = |eps: f64| {
            let v = xc.values.iter().zip(&q).map(|(x, d)| x + eps * d).collect();
            discrete_action(&DiscretePath::new(v, dt).unwrap(), &op).unwrap()
        };
        let s_q = discrete_action(&DiscretePath::new(q.clone(), dt).unwrap(), &op).unwrap();
        let (d1, d2) = (act(1e-2) - s_c, act(2e-2) - s_c);
        assert!(d1 >= 0.0);
        assert!((d2 / d1 - 4.0).abs() < 0.05);
        assert!((act(1.0) - s_c - s_q).abs() <= 1e-8 * (1.0 + s_q));
    }
}

#[test]
fn propagator_equals_one_time_density() {
    let ctl = SeriesControl::default();
    let p = pp(0.8, 0.9, 0.7);
    let beta = 1.3;
    let mut worst = 0.0f64;
    for k in -40..=40 {
        let x = 0.1 * k as f64;
        let prop = propagator(&p, &BoundaryData::new(0.0, x, beta).unwrap(), &ctl).unwrap();
        worst = worst.max((prop - analytic_density(&p, beta, 0.0, x).unwrap()).abs());
    }
    assert!(worst <= 1e-12);
}
