use proptest::prelude::*;
use sdde::inference::{
    delay_integral, drift_integrand, local_quadratic, loglik_ratio, loglik_ratio_noise_form, mle,
};
use sdde::rng;
use sdde::simul::{simulate_path, simulate_path_with, DelayModel, DriftRule, InitialSegment, SimOptions};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn zero_noise_identifies_drift() {
    let model = DelayModel::new(-1.0, InitialSegment::Constant(1.0));
    for rule in [DriftRule::HalfStep, DriftRule::LeftPoint] {
        let opts = SimOptions { seed: 0, rule, zero_noise: true };
        let p = simulate_path_with(&model, 20.0, 0.01, opts).unwrap();
        let e = mle(&p).unwrap();
        assert!((e.a_hat + 1.0).abs() < 1e-6, "{rule}: {}", e.a_hat);
    }
}

#[test]
fn constant_initial_zero_drift_average_is_one() {
    let model = DelayModel::new(0.0, InitialSegment::Constant(1.0));
    let opts = SimOptions { seed: 0, rule: DriftRule::HalfStep, zero_noise: true };
    let p = simulate_path_with(&model, 3.0, 0.01, opts).unwrap();
    assert!(delay_integral(&p).iter().all(|&q| (q - 1.0).abs() < 1e-13));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimator_error_identity(a in -7.0f64..1.5, seed in any::<u64>(), left in any::<bool>()) {
        let rule = if left { DriftRule::LeftPoint } else { DriftRule::HalfStep };
        let model = DelayModel::new(a, InitialSegment::Constant(1.0));
        let p = simulate_path_with(&model, 10.0, 0.01, SimOptions { seed, rule, zero_noise: false }).unwrap();
        let e = mle(&p).unwrap();
        let g = drift_integrand(&p);
        let noise: f64 = g.iter().zip(p.increments().unwrap()).map(|(x, y)| x * y).sum();
        let lhs = e.a_hat - a;
        let rhs = noise / e.denominator;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn quadratic_form_is_exact(h in -3.0f64..3.0, seed in any::<u64>()) {
        let model = DelayModel::new(-1.0, InitialSegment::Constant(0.0));
        let p = simulate_path(&model, 20.0, 0.02, seed).unwrap();
        let lq = local_quadratic(&p, -1.0, h).unwrap();
        prop_assert_eq!(lq.loglik, h * lq.delta - h * h * lq.j / 2.0);
        let flip = local_quadratic(&p, -1.0, -h).unwrap();
        prop_assert!((lq.loglik + flip.loglik + h * h * lq.j).abs() < 1e-12 * (1.0 + h * h * lq.j));
    }

    #[test]
    fn two_forms_of_likelihood_ratio(a in -7.0f64..2.0, shift in -1.0f64..1.0, seed in any::<u64>()) {
        let model = DelayModel::new(a, InitialSegment::Constant(1.0));
        let p = simulate_path(&model, 8.0, 0.01, seed).unwrap();
        let obs = loglik_ratio(&p, a, a + shift);
        let noise = loglik_ratio_noise_form(&p, a, a + shift).unwrap();
        prop_assert!(rel(obs, noise) < 1e-10 || (obs - noise).abs() < 1e-12, "{} vs {}", obs, noise);
    }
}

#[test]
fn likelihood_ratio_trivial_and_antisymmetric() {
    let model = DelayModel::new(-2.0, InitialSegment::Constant(1.0));
    let p = simulate_path(&model, 10.0, 0.01, 3).unwrap();
    assert_eq!(loglik_ratio(&p, -2.0, -2.0), 0.0);
    let fwd = loglik_ratio(&p, -2.0, -1.3);
    let back = loglik_ratio(&p, -1.3, -2.0);
    assert!((fwd + back).abs() < 1e-12 * fwd.abs().max(1.0));
}

#[test]
fn local_quadratic_matches_likelihood_ratio() {
    let model = DelayModel::new(-1.0, InitialSegment::Constant(0.0));
    let p = simulate_path(&model, 100.0, 0.01, 17).unwrap();
    let lq = local_quadratic(&p, -1.0, 1.0).unwrap();
    let lr = loglik_ratio(&p, -1.0, -1.0 + lq.r);
    assert!(rel(lq.loglik, lr) < 1e-10, "{} vs {lr}", lq.loglik);
    // r⁻¹(â − a) = Δ/J
    let e = mle(&p).unwrap();
    assert!(rel((e.a_hat + 1.0) / lq.r, lq.delta / lq.j) < 1e-12);
}

#[test]
fn rms_error_shrinks_like_root_t() {
    let a = -1.0;
    let model = DelayModel::new(a, InitialSegment::Constant(0.0));
    let rms = |t: f64| {
        let s: f64 = (0..200u64)
            .map(|i| {
                let p = simulate_path(&model, t, 0.01, rng::mix(555, i)).unwrap();
                (mle(&p).unwrap().a_hat - a).powi(2)
            })
            .sum();
        (s / 200.0).sqrt()
    };
    let (r25, r50, r100) = (rms(25.0), rms(50.0), rms(100.0));
    for (coarse, fine) in [(r25, r50), (r50, r100)] {
        let ratio = coarse / fine;
        let target = 2f64.sqrt();
        assert!(ratio > target / 1.3 && ratio < target * 1.3, "ratio {ratio}");
    }
}
