use gammareg::error::Error;
use gammareg::gamma::TimeGrid;
use gammareg::heat::*;
use gammareg::linalg::C64;
use proptest::prelude::*;

fn grid(t: f64, n: usize) -> TimeGrid {
    TimeGrid::uniform(0.0, t, n).unwrap()
}

fn cos_field(k_max: usize) -> SpectralField {
    SpectralField::from_fn(1, k_max, 2.0, 0.0, |x| x[0].cos()).unwrap()
}

#[test]
fn zero_noise_mode_decays_exactly() {
    let mut u = SpectralField::zeros(2, 4, 2.0, 0.0).unwrap();
    u.set_mode(&[1, 2], C64::new(0.3, -0.4)).unwrap();
    let ens = simulate(&u, &NoisePreset::zero(), &grid(0.7, 70), 2, 1).unwrap();
    let got = ens.terminal(1).mode(&[1, 2]);
    let want = C64::new(0.3, -0.4) * (-5.0 * 0.7f64).exp();
    assert!((got - want).norm() < 1e-14, "{got} vs {want}");
    assert!(ens.parabolic && ens.warnings.is_empty());
}

fn growth(b: f64, samples: usize) -> (GrowthEstimate, HeatEnsemble) {
    let u0 = cos_field(2);
    let ens = simulate(&u0, &NoisePreset::constant_gradient([b, 0.0]), &grid(1.0, 256), samples, 11).unwrap();
    (second_moment_growth(&ens, &[1]).unwrap(), ens)
}

#[test]
fn gradient_noise_second_moment_matches_mode_oracle() {
    for b in [1.0, 1.8] {
        let (g, ens) = growth(b, 2048);
        let oracle = discrete_growth_rate([b, 0.0], [1, 0], 1.0 / 256.0);
        assert!((g.rate - oracle).abs() <= 3.0 * g.stderr, "b={b}: {} ± {} vs {oracle}", g.rate, g.stderr);
        let sign = continuum_growth_rate([b, 0.0], [1, 0]).signum();
        assert_eq!(g.rate.signum(), sign);
        assert!(g.rate.abs() > 3.0 * g.stderr, "b={b}: sign is not resolved");
        assert_eq!(ens.parabolic, b * b < 2.0);
        assert_eq!(ens.warnings.is_empty(), b * b < 2.0);
    }
}

#[test]
fn single_step_flags_parabolicity() {
    let u0 = cos_field(4);
    let ok = spectral_heat_step(&u0, &NoisePreset::constant_gradient([1.0, 0.0]), 0.01, &[0.1]).unwrap();
    assert!(ok.parabolic);
    let bad = spectral_heat_step(&u0, &NoisePreset::constant_gradient([1.5, 0.0]), 0.01, &[0.1]).unwrap();
    assert!(!bad.parabolic);
    // û_1 ← e^{−dt}(1 + i b dw) û_1
    let want = C64::new(0.5, 0.0) * C64::new(1.0, 0.15) * (-0.01f64).exp();
    assert!((bad.field.mode(&[1]) - want).norm() < 1e-14);
}

#[test]
fn invalid_configurations() {
    assert!(matches!(SpectralField::with_points(1, 8, 24, 2.0, 0.0), Err(Error::InvalidConfig(_))));
    assert!(SpectralField::with_points(1, 8, 25, 2.0, 0.0).is_ok());
    assert!(matches!(SpectralField::zeros(3, 4, 2.0, 0.0), Err(Error::InvalidConfig(_))));
    let u0 = cos_field(16);
    let noise = NoisePreset::constant_gradient([1.0, 0.0]);
    assert!(matches!(spectral_heat_step(&u0, &noise, 0.1, &[0.0]), Err(Error::InvalidConfig(_))));
    assert!(matches!(simulate(&u0, &noise, &grid(1.0, 10), 1, 0), Err(Error::InvalidConfig(_))));
    assert!(matches!(NoisePreset::sequence(|_, _| [0.0; MAX_SEQUENCE], 9, 1.0, 0.0), Err(Error::InvalidConfig(_))));
    let mut z = SpectralField::zeros(1, 4, 2.0, 0.0).unwrap();
    assert!(z.set_mode(&[0], C64::new(1.0, 1.0)).is_err());
    assert!(z.set_mode(&[5], C64::new(1.0, 0.0)).is_err());
}

#[test]
fn divergence_free_gradient_noise_conserves_mean() {
    let u0 = SpectralField::from_fn(2, 6, 2.0, 0.0, |x| 0.7 + x[0].cos() * x[1].sin() + 0.3 * (2.0 * x[1]).cos()).unwrap();
    let noise = NoisePreset::gradient(|x| [0.8 * x[1].sin(), 0.8 * x[0].sin()]);
    let ens = simulate(&u0, &noise, &grid(0.5, 64), 16, 3).unwrap();
    for p in &ens.paths {
        for u in p {
            assert!((u.mode(&[0, 0]).re - 0.7).abs() < 1e-12);
        }
    }
    let one_d = simulate(&cos_field(8).clone(), &NoisePreset::constant_gradient([1.2, 0.0]), &grid(0.5, 64), 16, 3).unwrap();
    assert!(one_d.paths.iter().flatten().all(|u| u.mode(&[0]).norm() < 1e-14));
}

#[test]
fn heat_flow_of_analytic_data_converges_super_algebraically() {
    // 1/(a − cos x) = Σ_k r^{|k|} e^{ikx} / √(a² − 1), r = a − √(a² − 1).
    let a: f64 = 1.05;
    let r = a - (a * a - 1.0).sqrt();
    let c = 1.0 / (a * a - 1.0).sqrt();
    let t = 0.002;
    let exact = |k: i64| c * r.powi(k.abs() as i32) * (-(k * k) as f64 * t).exp();
    let errs: Vec<f64> = [8usize, 16, 32]
        .iter()
        .map(|&kmax| {
            let u0 = SpectralField::from_fn(1, kmax, 2.0, 0.0, |x| 1.0 / (a - x[0].cos())).unwrap();
            let u = spectral_heat_step(&u0, &NoisePreset::zero(), t, &[0.0]).unwrap().field;
            let inside: f64 = (-(kmax as i64)..=kmax as i64).map(|k| (u.mode(&[k]) - exact(k)).norm_sqr()).sum();
            let tail: f64 = (kmax as i64 + 1..200).map(|k| 2.0 * exact(k).powi(2)).sum();
            (inside + tail).sqrt()
        })
        .collect();
    let o1 = (errs[0] / errs[1]).log2();
    let o2 = (errs[1] / errs[2]).log2();
    assert!(o1 > 3.0 && o2 > o1 + 2.0, "errors {errs:?}, orders {o1} {o2}");
}

#[test]
fn zero_field_has_zero_square_function() {
    let u0 = SpectralField::zeros(1, 4, 2.0, 0.0).unwrap();
    let ens = simulate(&u0, &NoisePreset::constant_gradient([1.0, 0.0]), &grid(1.0, 16), 4, 0).unwrap();
    for r in 0..3 {
        let s = measure_sqfn_norm(&ens, r, 1.5).unwrap();
        assert_eq!(s.max, 0.0);
    }
}

#[test]
fn deterministic_square_function_matches_closed_form() {
    // u = e^{−t} cos x, ∫_0^T |u_x|² dt = sin²x (1 − e^{−2T})/2.
    let ens = simulate(&cos_field(4), &NoisePreset::zero(), &grid(1.0, 1024), 1, 0).unwrap();
    let c = (1.0 - (-2.0f64).exp()) / 2.0;
    for (q, moment) in [(2.0, 0.5), (4.0, 0.375)] {
        let want = c.sqrt() * f64::powf(moment, 1.0 / q);
        let got = measure_sqfn_norm(&ens, 1, q).unwrap().median;
        assert!((got - want).abs() < 1e-4 * want, "q={q}: {got} vs {want}");
    }
}

fn rough_run(k_max: usize, steps: usize) -> HeatEnsemble {
    let u0 = SpectralField::from_fn(1, k_max, 2.0, 0.0, |x| x[0].cos() + 0.5 * (2.0 * x[0]).sin()).unwrap();
    let noise = NoisePreset::gradient(|x| [0.6 + 0.3 * x[0].sin(), 0.0]);
    simulate(&u0, &noise, &grid(0.5, steps), 64, 21).unwrap()
}

#[test]
fn square_function_is_refinement_stable() {
    let base = rough_run(16, 256);
    let finer_k = rough_run(32, 256);
    let finer_t = rough_run(16, 512);
    for q in [1.5, 2.0, 4.0] {
        let s0 = measure_sqfn_norm(&base, 1, q).unwrap();
        assert!(s0.median.is_finite() && s0.max.is_finite() && s0.median > 0.0);
        for other in [&finer_k, &finer_t] {
            let s1 = measure_sqfn_norm(other, 1, q).unwrap();
            for (a, b) in [(s0.median, s1.median), (s0.mean, s1.mean)] {
                assert!((a - b).abs() <= 0.05 * a, "q={q}: {a} vs {b}");
            }
        }
    }
    let tr0 = quantile(&trace_norms(&base), 0.5);
    for other in [&finer_k, &finer_t] {
        let tr1 = quantile(&trace_norms(other), 0.5);
        assert!(tr0.is_finite() && (tr0 - tr1).abs() <= 0.05 * tr0, "{tr0} vs {tr1}");
    }
}

#[test]
fn sequence_noise_checks_and_runs() {
    let g = |u: f64, du: [f64; 2]| {
        let mut out = [0.0; MAX_SEQUENCE];
        out[0] = 0.3 * u.sin();
        out[1] = 0.4 * u.cos();
        out[2] = 0.5 * (0.5 * du[0]).tanh();
        out
    };
    let good = NoisePreset::sequence(g, 3, 0.5, 0.25).unwrap();
    let chk = check_sequence(&good, 1, 500, 3.0, 5).unwrap();
    assert!(chk.worst_ratio <= 1.0 && chk.worst_ratio > 0.3);
    let bad = NoisePreset::sequence(g, 3, 0.1, 0.1).unwrap();
    assert!(matches!(check_sequence(&bad, 1, 500, 3.0, 5), Err(Error::SpecViolation(_))));
    let ens = simulate(&cos_field(8), &good, &grid(0.5, 128), 8, 2).unwrap();
    assert!(ens.parabolic);
    let s = measure_sqfn_norm(&ens, 0, 2.0).unwrap();
    assert!(s.max.is_finite() && s.max > 0.0);
}

#[test]
fn nemytskii_inequality() {
    let template = SpectralField::zeros(1, 8, 2.0, 0.0).unwrap();
    let g = grid(1.0, 32);

    let linear = NemytskiiMap::new(|u, _, _| 2.0 * u, 2.0, 0.0, 0.0).unwrap();
    let rep = lipschitz_check(&linear, &template, &g, 10, 1).unwrap();
    for (l, r) in rep.lhs.iter().zip(&rep.rhs) {
        assert!((l - r).abs() <= 1e-12 * r, "{l} vs {r}");
    }

    let sine = NemytskiiMap::new(|u, _, _| u.sin(), 1.0, 0.0, 0.0).unwrap();
    let rep = lipschitz_check(&sine, &template.clone().with_exponents(1.5, 0.0).unwrap(), &g, 50, 2).unwrap();
    assert_eq!(rep.margins.len(), 50);
    assert!(rep.min_margin >= 0.0);

    let top = NemytskiiMap::new(|_, _, h| 0.05 * h[0][0].tanh(), 0.0, 0.0, 0.05).unwrap();
    let rep = lipschitz_check(&top, &template, &g, 20, 3).unwrap();
    assert!(rep.min_margin >= 0.0 && top.l3 < 0.1);

    let plane = SpectralField::zeros(2, 4, 3.0, 0.0).unwrap();
    let mixed = NemytskiiMap::new(|u, du, _| (u + du[0] - du[1]).sin(), 1.0, 2f64.sqrt(), 0.0).unwrap();
    assert!(lipschitz_check(&mixed, &plane, &g, 10, 4).unwrap().min_margin >= 0.0);

    let liar = NemytskiiMap::new(|u, _, _| 2.0 * u.sin(), 1.0, 0.0, 0.0).unwrap();
    assert!(matches!(lipschitz_check(&liar, &template, &g, 10, 5), Err(Error::SpecViolation(_))));
}

#[test]
fn nemytskii_applies_pointwise() {
    let u = cos_field(4);
    let t = u.transform();
    let f = NemytskiiMap::new(|u, du, h| u * u + du[0] + h[0][0], 1.0, 1.0, 1.0).unwrap();
    let vals = f.apply(&u, &t);
    let n = u.points_per_axis();
    for (j, v) in vals.iter().enumerate() {
        let x = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        assert!((v - (x.cos().powi(2) - x.sin() - x.cos())).abs() < 1e-12);
    }
    let ens = simulate(&u, &NoisePreset::zero(), &grid(0.1, 4), 2, 0).unwrap();
    let out = f.apply_ensemble(&ens);
    assert_eq!((out.len(), out[0].len(), out[0][0].len()), (2, 5, n));
}

#[test]
fn deterministic_exponent_rows() {
    let rows = DeterministicExponents::default().rows(&[0.625, 0.75, 0.875, 1.0]).unwrap();
    for r in &rows {
        assert!((r.time_measured - r.time_predicted).abs() <= 0.05, "{r:?}");
        assert!((r.space_measured - r.space_predicted).abs() <= 0.1, "{r:?}");
        assert!(r.r2 >= MIN_R2 && r.conclusive());
    }
    let csv = exponent_table(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], EXPONENT_HEADER);
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[1].split(',').count(), 6);
    assert_eq!(csv, exponent_table(&DeterministicExponents::default().rows(&[0.625, 0.75, 0.875, 1.0]).unwrap()));

    let short = DeterministicExponents { levels: vec![6, 7], ..Default::default() };
    assert!(matches!(short.rows(&[0.75]), Err(Error::InvalidConfig(_))));
    assert!(matches!(DeterministicExponents::default().rows(&[0.4]), Err(Error::InvalidConfig(_))));
}

#[test]
fn stochastic_exponent_rows() {
    let cfg = StochasticExponents { seed: 9, ..Default::default() };
    let rows = cfg.rows(&[0.125, 0.25, 0.375]).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].time_measured > w[0].time_measured);
        assert!(w[1].space_measured < w[0].space_measured);
    }
    for r in &rows {
        assert!((r.time_measured - r.time_predicted).abs() < 0.15, "{r:?}");
        assert!((r.space_measured - r.space_predicted).abs() < 0.15, "{r:?}");
    }
    let coarse = StochasticExponents { k_max: 16, horizon: 0.125, steps_per_unit: 32, ..Default::default() };
    assert!(matches!(coarse.rows(&[0.25]), Err(Error::InvalidConfig(_))));
    assert!(matches!(cfg.rows(&[0.5]), Err(Error::InvalidConfig(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn collocation_round_trip(coefs in prop::collection::vec(-1.0f64..1.0, 18)) {
        let mut u = SpectralField::zeros(1, 8, 2.0, 0.0).unwrap();
        u.set_mode(&[0], C64::new(coefs[0], 0.0)).unwrap();
        for k in 1..=8i64 {
            u.set_mode(&[k], C64::new(coefs[2 * k as usize - 1], coefs[2 * k as usize])).unwrap();
        }
        let t = u.transform();
        let mut v = u.clone();
        v.set_collocation(&t, &u.collocation(&t));
        prop_assert!(u.max_abs_diff(&v) < 1e-14);
    }

    #[test]
    fn steps_keep_fields_real(b0 in -1.0f64..1.0, b1 in -0.4f64..0.4, dw in -0.3f64..0.3) {
        let u = SpectralField::from_fn(2, 4, 2.0, 0.0, |x| (x[0] + 2.0 * x[1]).sin() + x[1].cos()).unwrap();
        let noise = NoisePreset::gradient(move |x| [b0 + b1 * x[1].cos(), b1 * x[0].sin()]);
        let out = spectral_heat_step(&u, &noise, 0.01, &[dw]).unwrap().field;
        for i in 0..out.modes().len() {
            let k = out.wavevector(i);
            prop_assert!((out.mode(&k[..2]) - out.mode(&[-k[0], -k[1]]).conj()).norm() < 1e-15);
        }
        prop_assert!(out.l2_norm() <= u.l2_norm() * (1.0 + (b0.abs() + b1.abs()) * 8.0 * dw.abs()));
    }
}
