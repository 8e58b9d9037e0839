mod common;

use std::f64::consts::PI;

use approx::assert_relative_eq;
use common::*;
use gammareg::gamma::*;
use gammareg::linalg::{to_complex, C64};
use gammareg::space::SpaceModel;
use gammareg::textio;
use gammareg::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn e(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

fn two_step_l1() -> StepFunction {
    let g = TimeGrid::new(vec![0.0, 1.0, 2.0], Weight::Lebesgue).unwrap();
    StepFunction::from_vectors(g, vec![e(2, 0), e(2, 1)], SpaceModel::new(2, 1.0).unwrap()).unwrap()
}

#[test]
fn hilbert_examples() {
    let f = StepFunction::indicator(0.0, 1.0, e(3, 0), SpaceModel::hilbert(3)).unwrap();
    assert_eq!(gamma_norm_hilbert(&f).unwrap().value, 1.0);
    let f = StepFunction::indicator(0.0, 4.0, e(3, 0), SpaceModel::hilbert(3)).unwrap();
    assert_eq!(gamma_norm_hilbert(&f).unwrap().value, 2.0);

    let mut r = rng(1);
    let f = rstep(&mut r, 8, 0.0, SpaceModel::hilbert(4), 1);
    let mut s = 0.0;
    for i in 0..8 {
        let (a, b) = f.grid().interval(i);
        for k in 0..4 {
            s += (b - a) * f.value(i)[(k, 0)].powi(2);
        }
    }
    assert_relative_eq!(gamma_norm_hilbert(&f).unwrap().value, s.sqrt(), max_relative = 1e-14);

    let g = StepFunction::indicator(0.0, 1.0, e(2, 0), SpaceModel::new(2, 1.0).unwrap()).unwrap();
    assert!(matches!(gamma_norm_hilbert(&g), Err(Error::MethodMismatch(_))));
}

#[test]
fn monte_carlo_examples() {
    let z = StepFunction::zero(TimeGrid::uniform(0.0, 1.0, 4).unwrap(), SpaceModel::hilbert(2), 1);
    let est = gamma_norm_mc(&z, 100, 3).unwrap();
    assert_eq!((est.value, est.stderr), (0.0, 0.0));
    assert!(matches!(gamma_norm_mc(&z, 1, 3), Err(Error::InvalidInput(_))));

    let f = two_step_l1();
    let exact = (2.0 + 4.0 / PI).sqrt();
    let est = gamma_norm_mc(&f, 20000, 11).unwrap();
    assert_eq!(est.method, Method::MonteCarlo);
    assert!(est.stderr > 0.0);
    assert!((est.value - exact).abs() <= 3.0 * est.stderr, "{est:?} vs {exact}");

    // Independent high-sample estimate with a plain loop.
    let mut r = rng(99);
    let mut acc = 0.0;
    let m = 400_000;
    for _ in 0..m {
        let a: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
        let b: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut r);
        acc += (a.abs() + b.abs()).powi(2);
    }
    assert!(((acc / m as f64).sqrt() - exact).abs() < 5e-3);
}

#[test]
fn monte_carlo_is_deterministic() {
    let f = two_step_l1();
    assert_eq!(gamma_norm_mc(&f, 512, 5).unwrap(), gamma_norm_mc(&f, 512, 5).unwrap());
    assert_ne!(gamma_norm_mc(&f, 512, 5).unwrap().value, gamma_norm_mc(&f, 512, 6).unwrap().value);
}

#[test]
fn square_function_examples() {
    assert_eq!(gamma_norm_sqfn(&two_step_l1()).unwrap().value, 2.0);
    for q in [1.0, 1.5, 2.0, 4.0] {
        let f = StepFunction::indicator(0.0, 1.0, e(3, 0), SpaceModel::new(3, q).unwrap()).unwrap();
        assert_eq!(gamma_norm_sqfn(&f).unwrap().value, 1.0);
    }
    let mut r = rng(2);
    let f = rstep(&mut r, 6, 0.0, SpaceModel::hilbert(5), 2);
    assert_relative_eq!(gamma_norm_sqfn(&f).unwrap().value, gamma_norm_hilbert(&f).unwrap().value, max_relative = 1e-14);
    let inf = f.with_space(SpaceModel::new(5, f64::INFINITY).unwrap()).unwrap();
    assert!(matches!(gamma_norm_sqfn(&inf), Err(Error::Unsupported(_))));
}

#[test]
fn khintchine_brackets() {
    // q = 1: [sqrt(2/π), 1]; q = 4: [1, 3^{1/4}].
    let brackets = [(1.0, (2.0 / PI).sqrt(), 1.0), (4.0, 1.0, 3f64.powf(0.25))];
    let mut r = rng(3);
    for seed in 0..100u64 {
        for (q, lo, hi) in brackets {
            let n = r.random_range(1..6usize);
            let f = rstep(&mut r, 5, 0.0, SpaceModel::new(n, q).unwrap(), 1);
            let mc = gamma_norm_mc(&f, 4096, seed).unwrap();
            let sq = gamma_norm_sqfn(&f).unwrap().value;
            let ratio = mc.value / sq;
            let slack = 3.0 * mc.stderr / sq;
            assert!(ratio >= lo - slack && ratio <= hi + slack, "q={q} ratio={ratio} slack={slack}");
        }
    }
}

#[test]
fn ideal_property() {
    let mut r = rng(4);
    for seed in 0..50u64 {
        let n = r.random_range(2..6usize);
        let q = [1.0, 2.0, 4.0, f64::INFINITY][seed as usize % 4];
        let grid = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
        let s = random_step(&mut r, grid, SpaceModel::new(n, q).unwrap(), 1);
        let t = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        // Equal-measure interval permutation is an isometry of L²(0,1).
        let mut perm: Vec<usize> = (0..8).collect();
        for i in (1..8).rev() {
            perm.swap(i, r.random_range(0..=i));
        }
        let vals: Vec<DMatrix<f64>> = perm.iter().map(|p| &t * s.value(*p)).collect();
        let ts = StepFunction::new(s.grid().clone(), vals, s.space().clone()).unwrap();
        let lhs = gamma_norm_mc(&ts, 4096, seed).unwrap();
        let rhs = gamma_norm_mc(&s, 4096, seed).unwrap();
        let tn = lq_operator_norm(&t, q);
        assert!(lhs.value <= tn * rhs.value + 3.0 * (lhs.stderr + tn * rhs.stderr), "seed {seed}");
    }
}

/// Upper bound for ‖T‖ on ℓ^q: exact for q ∈ {1, 2, ∞}, Riesz-Thorin
/// interpolation otherwise.
fn lq_operator_norm(t: &DMatrix<f64>, q: f64) -> f64 {
    let n1 = (0..t.ncols()).map(|c| t.column(c).abs().sum()).fold(0.0, f64::max);
    let ninf = (0..t.nrows()).map(|r| t.row(r).abs().sum()).fold(0.0, f64::max);
    let n2 = t.clone().singular_values().max();
    if q == 1.0 {
        n1
    } else if q == 2.0 {
        n2
    } else if q.is_infinite() {
        ninf
    } else {
        // 1/q = (1-θ)/2 + θ/∞.
        let th = 1.0 - 2.0 / q;
        n2.powf(1.0 - th) * ninf.powf(th)
    }
}

#[test]
fn multiplier_examples() {
    let mut r = rng(5);
    let f = rstep(&mut r, 6, 0.0, SpaceModel::hilbert(3), 1);
    let id = DMatrix::identity(3, 3);
    assert_eq!(apply_multiplier(Multiplier::Constant(&id), &f).unwrap(), f);

    let cut = |a: f64, _b: f64| if a < 1.0 { 1.0 } else { 0.0 };
    let g = apply_multiplier(Multiplier::Scalar(&cut), &f).unwrap();
    assert!(gamma_norm_hilbert(&g).unwrap().value <= gamma_norm_hilbert(&f).unwrap().value);

    let signs: Vec<DMatrix<f64>> = (0..6)
        .map(|_| DMatrix::from_diagonal(&DVector::from_fn(3, |_, _| if r.random_bool(0.5) { 1.0 } else { -1.0 })))
        .collect();
    let g = apply_multiplier(Multiplier::Operators(&signs), &f).unwrap();
    assert_relative_eq!(gamma_norm_hilbert(&g).unwrap().value, gamma_norm_hilbert(&f).unwrap().value, max_relative = 1e-14);

    let bad = DMatrix::identity(2, 2);
    assert!(apply_multiplier(Multiplier::Constant(&bad), &f).is_err());
}

#[test]
fn multiplier_bound_hilbert() {
    let mut r = rng(6);
    for _ in 0..20 {
        let f = rstep(&mut r, 5, 0.0, SpaceModel::hilbert(3), 1);
        let ops: Vec<DMatrix<f64>> = (0..5).map(|_| DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0))).collect();
        let g = apply_multiplier(Multiplier::Operators(&ops), &f).unwrap();
        let bound = gamma_bound_real(&ops, &SpaceModel::hilbert(3), 10, 1).unwrap().value;
        let sup = ops.iter().map(|o| o.clone().singular_values().max()).fold(0.0, f64::max);
        assert_relative_eq!(bound, sup, max_relative = 1e-12);
        assert!(gamma_norm_hilbert(&g).unwrap().value <= bound * gamma_norm_hilbert(&f).unwrap().value * (1.0 + 1e-12));
    }
}

#[test]
fn restrict_and_integrate() {
    let f = StepFunction::indicator(0.0, 1.0, e(2, 0), SpaceModel::hilbert(2)).unwrap();
    assert_eq!(integrate(&f, &[(0.0, 1.0)]).unwrap().column(0).clone_owned(), e(2, 0));
    assert!(restrict(&f, &[]).unwrap().is_zero());
    assert!(restrict(&f, &[(1.0, 0.5)]).is_err());

    let mut r = rng(7);
    let f = rstep(&mut r, 10, 0.0, SpaceModel::hilbert(3), 1);
    let t = f.grid().end();
    let mut last = f64::INFINITY;
    for k in 1..=30 {
        let fk = restrict(&f, &[(t * 0.5f64.powi(k), t * (1.0 - 0.5f64.powi(k)))]).unwrap();
        let d = gamma_norm_hilbert(&fk.sub(&f.refine(fk.grid().knots())).unwrap()).unwrap().value;
        assert!(d <= last + 1e-15);
        last = d;
    }
    assert!(last < 1e-3 * gamma_norm_hilbert(&f).unwrap().value);
}

#[test]
fn fourier_examples() {
    let f = StepFunction::indicator(0.0, 1.0, DVector::from_vec(vec![1.0]), SpaceModel::hilbert(1)).unwrap();
    assert_relative_eq!(transform_at(&f, 0.0)[(0, 0)].re, 1.0, epsilon = 1e-15);
    for xi in [-7.3, -0.01, 1e-4, 0.5, 3.0, 40.0] {
        let want = (C64::new(1.0, 0.0) - C64::new(0.0, -xi).exp()) / C64::new(0.0, xi);
        let got = transform_at(&f, xi)[(0, 0)];
        assert!((got - want).norm() < 1e-12, "xi={xi}");
    }
    assert!((transform_at(&f, 1e-9)[(0, 0)] - 1.0).norm() < 1e-8);
}

#[test]
fn plancherel_and_round_trip() {
    let mut r = rng(8);
    for _ in 0..3 {
        let f = rstep(&mut r, 6, 0.0, SpaceModel::hilbert(2), 1);
        let grid = FreqGrid::for_function(&f).unwrap();
        let spec = fourier(&f, &grid).unwrap();
        let norm = gamma_norm_hilbert(&f).unwrap().value;
        assert_relative_eq!(spec.l2_norm(), (2.0 * PI).sqrt() * norm, max_relative = 1e-6);
        let back = spec.inverse(f.grid(), f.space()).unwrap();
        let err = gamma_norm_hilbert(&back.sub(&f).unwrap()).unwrap().value;
        assert!(err <= 1e-6 * norm, "round trip error {err}");
    }
}

fn gaussian_bump(n: usize) -> StepFunction {
    let grid = TimeGrid::uniform(0.0, 10.0, n).unwrap();
    let h = 10.0 / n as f64;
    let vals = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * h - 5.0;
            DVector::from_vec(vec![(-t * t).exp()])
        })
        .collect();
    StepFunction::from_vectors(grid, vals, SpaceModel::hilbert(1)).unwrap()
}

#[test]
fn sobolev_norms() {
    let f = gaussian_bump(200);
    let g0 = gamma_s_norm(&f, 0.0).unwrap().value;
    assert_relative_eq!(g0, gamma_norm_hilbert(&f).unwrap().value, max_relative = 1e-14);
    let g1 = gamma_s_norm(&f, 1.0).unwrap().value;
    assert!(g1 >= g0);

    // ‖f‖² plus a direct quadrature of (1/2π) ∫_{|ξ|<π/h} ξ²|f̂|² with closed-form f̂.
    let h = 10.0 / 200.0;
    let xmax = PI / h;
    let m = 200_000;
    let dx = xmax / m as f64;
    let mut acc = 0.0;
    for k in 0..m {
        let xi = (k as f64 + 0.5) * dx;
        acc += xi * xi * transform_at(&f, xi)[(0, 0)].norm_sqr() * dx;
    }
    let direct = (g0 * g0 + acc / PI).sqrt();
    assert_relative_eq!(g1, direct, max_relative = 1e-6);

    // Smooth H¹ norm of e^{-t²}: ‖g‖² + ‖g'‖² = √(π/2) (1 + 1).
    let smooth = (2.0 * (PI / 2.0).sqrt()).sqrt();
    assert_relative_eq!(g1, smooth, max_relative = 1e-2);

    assert!(gamma_s_norm(&f, 2.5).is_err());
}

#[test]
fn hardy_examples() {
    let z = StepFunction::zero(TimeGrid::uniform(0.0, 1.0, 3).unwrap(), SpaceModel::hilbert(1), 1);
    assert_eq!(hardy_check(&z, 0.5).unwrap(), HardyPair { lhs: 0.0, rhs: 0.0 });
    let f = StepFunction::indicator(0.0, 1.0, DVector::from_vec(vec![1.0]), SpaceModel::hilbert(1)).unwrap();
    let p = hardy_check(&f, 0.5).unwrap();
    assert!((p.lhs - 2f64.sqrt()).abs() < 1e-12);
    assert!((p.rhs - 2.0).abs() < 1e-12);
    assert!(hardy_check(&f, 0.0).is_err());
    assert!(hardy_check(&f, -1.0).is_err());
    assert_eq!(hardy_check(&f, 1.0).unwrap().rhs, f64::INFINITY);
}

#[test]
fn hardy_against_quadrature() {
    // Independent oracle: midpoint rule on a fine log grid plus the tail.
    let mut r = rng(9);
    let f = rstep(&mut r, 4, 0.2, SpaceModel::hilbert(2), 1);
    let alpha = 0.75;
    let p = hardy_check(&f, alpha).unwrap();
    let t_end = f.grid().end();
    let mut acc = 0.0;
    let m = 400_000;
    let (lo, hi) = (0.2f64.ln(), (t_end * 1e6).ln());
    let dx = (hi - lo) / m as f64;
    let mut prim = DVector::<f64>::zeros(2);
    let mut last = 0.2;
    for k in 0..m {
        let s = (lo + (k as f64 + 0.5) * dx).exp();
        prim += f.eval(0.5 * (last + s)).column(0) * (s - last);
        last = s;
        acc += s.powf(-2.0 * alpha - 1.0) * prim.norm_squared() * s * dx;
    }
    assert_relative_eq!(p.lhs, acc.sqrt(), max_relative = 1e-4);
}

#[test]
fn gamma_bound_examples() {
    let h = SpaceModel::hilbert(2);
    let id = vec![DMatrix::identity(2, 2)];
    assert_relative_eq!(gamma_bound_real(&id, &h, 5, 1).unwrap().value, 1.0, max_relative = 1e-12);
    let fam = vec![
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
        DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])),
    ];
    let b = gamma_bound_real(&fam, &h, 50, 2).unwrap().value;
    assert!(b <= 1.0 + 1e-12 && b > 0.999);

    let mut r = rng(10);
    let a0 = DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0));
    let fam: Vec<DMatrix<f64>> = (0..=10).map(|k| &a0 * (k as f64 / 10.0)).collect();
    let b = gamma_bound_real(&fam, &SpaceModel::hilbert(3), 30, 3).unwrap().value;
    assert_relative_eq!(b, a0.clone().singular_values().max(), max_relative = 1e-10);
    assert!(gamma_bound_real(&[], &h, 5, 1).is_err());

    // ℓ^1 target: the identity still has bound 1.
    let l1 = SpaceModel::new(2, 1.0).unwrap();
    let c = vec![to_complex(&DMatrix::identity(2, 2))];
    assert_relative_eq!(gamma_bound_estimate(&c, &l1, 5, 1).unwrap().value, 1.0, max_relative = 1e-12);
}

#[test]
fn text_round_trip() {
    let mut r = rng(11);
    let f = rstep(&mut r, 5, 0.0, SpaceModel::new(3, 4.0).unwrap(), 2);
    let s = textio::write_step(&f);
    assert!(s.starts_with("# gamma-step v1; dim=3; q=4; weight=lebesgue; m=2\n"));
    assert_eq!(textio::read_step(&s).unwrap(), f);

    let bad = s.replacen("e-1", "x", 1);
    assert!(matches!(textio::read_step(&bad), Err(Error::Parse { .. })));

    let a = DMatrix::from_fn(3, 3, |_, _| r.random_range(-1.0..1.0));
    assert_eq!(textio::read_matrix(&textio::write_matrix(&a)).unwrap(), a);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hardy_inequality(seed in 0u64..10_000, ai in 0usize..4) {
        let alpha = [0.25, 0.5, 1.0, 1.5][ai];
        let mut r = rng(seed);
        let t0 = if alpha >= 1.0 { 0.1 } else { 0.0 };
        let q = [1.0, 2.0, 4.0][seed as usize % 3];
        let f = rstep(&mut r, 6, t0, SpaceModel::new(3, q).unwrap(), 1);
        let p = hardy_check(&f, alpha).unwrap();
        prop_assert!(p.lhs <= p.rhs * (1.0 + 1e-3));
    }

    #[test]
    fn mc_matches_hilbert(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let f = rstep(&mut r, 5, 0.0, SpaceModel::hilbert(4), 1);
        let exact = gamma_norm_hilbert(&f).unwrap().value;
        let mc = gamma_norm_mc(&f, 4096, seed).unwrap();
        prop_assert!((mc.value - exact).abs() <= 4.0 * mc.stderr);
    }
}
