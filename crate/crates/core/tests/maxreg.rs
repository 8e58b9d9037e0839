mod common;

use approx::assert_relative_eq;
use common::*;
use gammareg::gamma::{gamma_norm, gamma_norm_hilbert, NormChoice, StepFunction, TimeGrid, Weight};
use gammareg::linalg::gauss_legendre;
use gammareg::maxreg::*;
use gammareg::sectorial::SectorialOp;
use gammareg::space::SpaceModel;
use gammareg::Error;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn diag(d: &[f64]) -> SectorialOp {
    SectorialOp::diagonal(d).unwrap()
}

fn hnorm(f: &StepFunction) -> f64 {
    gamma_norm_hilbert(f).unwrap().value
}

/// Forcing grid with steps in [0.1, 0.4] and a few tail knots after it.
fn forcing_and_output(r: &mut rand_chacha::ChaCha8Rng, n: usize, pieces: usize) -> (StepFunction, TimeGrid) {
    let mut knots = vec![0.0];
    for _ in 0..pieces {
        let last = *knots.last().unwrap();
        knots.push(last + r.random_range(0.1..0.4));
    }
    let g = TimeGrid::new(knots.clone(), Weight::Lebesgue).unwrap();
    let f = random_step(r, g, SpaceModel::hilbert(n), 1);
    let end = *knots.last().unwrap();
    knots.extend([end + 0.25, end + 0.5, end + 1.0, end + 2.0]);
    (f, TimeGrid::new(knots, Weight::Lebesgue).unwrap())
}

#[test]
fn convolve_examples() {
    let a = diag(&[2.0]);
    let g = TimeGrid::uniform(0.0, 3.0, 7).unwrap();
    let zero = StepFunction::zero(g.clone(), SpaceModel::hilbert(1), 1);
    let u = convolve(&a, &zero, &g).unwrap();
    assert!(u.values().iter().all(|v| v.norm() == 0.0));

    let one = StepFunction::indicator(0.0, 3.0, DVector::from_element(1, 1.0), SpaceModel::hilbert(1)).unwrap();
    let u = convolve(&a, &one, &g).unwrap();
    for (t, v) in g.knots().iter().zip(u.values()) {
        assert_relative_eq!(v[0], (1.0 - (-2.0 * t).exp()) / 2.0, epsilon = 1e-14);
    }
    for t in [0.013, 0.77, 2.9] {
        assert_relative_eq!(u.eval(t).unwrap()[0], (1.0 - (-2.0 * t).exp()) / 2.0, epsilon = 1e-14);
    }
    // After the forcing stops the solution decays freely.
    let u3 = (1.0 - (-6.0f64).exp()) / 2.0;
    assert_relative_eq!(u.eval(4.0).unwrap()[0], u3 * (-2.0f64).exp(), epsilon = 1e-14);

    let rot = DMatrix::from_row_slice(2, 2, &[-0.1, -3.0, 3.0, -0.1]);
    let err = convolve(&SectorialOp::new(rot).unwrap(), &StepFunction::zero(g.clone(), SpaceModel::hilbert(2), 1), &g);
    assert!(matches!(err, Err(Error::NotAnalytic(_))));
}

#[test]
fn balance_identity_holds_at_every_knot() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let n = r.random_range(1..5);
        let a = SectorialOp::new(random_sectorial(&mut r, n)).unwrap();
        let f = rstep(&mut r, 10, 0.0, SpaceModel::hilbert(n), 1);
        let out = random_grid(&mut r, 12, 0.0);
        let u = convolve(&a, &f, &out).unwrap();
        assert_eq!(u.value(0).norm(), 0.0);
        assert!(u.balance_residual().unwrap() <= 1e-8, "seed {seed}");
    }
}

/// `∫_0^∞ g gᵀ` by Gauss-Legendre on every piece plus a graded tail.
fn quadrature_cov(u: &MildSolution, g: impl Fn(f64) -> DVector<f64>) -> DMatrix<f64> {
    let (x, w) = gauss_legendre(20);
    let n = u.operator().dim();
    let mut c = DMatrix::zeros(n, n);
    let mut edges: Vec<f64> = u.knots().to_vec();
    let end = u.horizon();
    for k in 0..60 {
        edges.push(end + 0.5 * 1.25f64.powi(k));
    }
    for e in edges.windows(2) {
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * (e[0] + e[1]) + 0.5 * (e[1] - e[0]) * xi;
            let v = g(t);
            c += &v * v.transpose() * (0.5 * (e[1] - e[0]) * wi);
        }
    }
    c
}

#[test]
fn exact_covariances_match_quadrature() {
    for seed in 0..6 {
        let mut r = rng(100 + seed);
        let n = r.random_range(1..4);
        let a = SectorialOp::new(random_sectorial(&mut r, n)).unwrap();
        let f = rstep(&mut r, 6, 0.0, SpaceModel::hilbert(n), 1);
        let u = convolve(&a, &f, f.grid()).unwrap();
        let am = a.matrix().clone();
        let au = quadrature_cov(&u, |t| &am * u.eval(t).unwrap());
        assert_relative_eq!(u.au_covariance().unwrap(), au, max_relative = 1e-9, epsilon = 1e-12);
        let du = quadrature_cov(&u, |t| f.eval(t).column(0) - &am * u.eval(t).unwrap());
        assert_relative_eq!(u.du_covariance().unwrap(), du, max_relative = 1e-9, epsilon = 1e-12);
    }
}

#[test]
fn multiplier_route_matches_time_domain() {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut r = rng(200 + seed);
        let n = r.random_range(1..5);
        let a = if seed % 2 == 0 {
            diag(&(0..n).map(|_| r.random_range(0.5..4.0)).collect::<Vec<_>>())
        } else {
            SectorialOp::new(random_sectorial(&mut r, n)).unwrap()
        };
        let (f, out) = forcing_and_output(&mut r, n, 8);
        let u = convolve(&a, &f, &out).unwrap();
        let time = u.au_bin_averages(&out).unwrap();
        let freq = dtheta_a1mtheta(&a, &f, 0.0, &out).unwrap();
        let rel = hnorm(&time.sub(&freq).unwrap()) / hnorm(&f);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-5, "worst relative route gap {worst:e}");
}

#[test]
fn derivative_route_matches_the_equation() {
    let mut r = rng(7);
    let a = diag(&[1.0, 1.0]);
    let (f, out) = forcing_and_output(&mut r, 2, 8);
    let u = convolve(&a, &f, &out).unwrap();
    let du = dtheta_a1mtheta(&a, &f, 1.0, &out).unwrap();
    // u' = f − Au, averaged per bin.
    let au = u.au_bin_averages(&out).unwrap();
    let fr = f.refine(out.knots());
    let mut expect = Vec::new();
    for (i, (lo, hi)) in out.intervals().enumerate() {
        let fv = fr.eval(0.5 * (lo + hi)).column(0).clone_owned();
        expect.push(fv - au.vector(i));
    }
    let expect = StepFunction::from_vectors(out.clone(), expect, f.space().clone()).unwrap();
    let res = hnorm(&expect.sub(&du).unwrap()) / hnorm(&f);
    assert!(res <= 1e-6, "residual {res:e}");
    let non_inv = SectorialOp::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
    assert!(matches!(dtheta_a1mtheta(&non_inv, &f, 0.5, &out), Err(Error::Precondition(_))));
    assert!(dtheta_a1mtheta(&non_inv, &f, 1.0, &out).is_ok());
}

#[test]
fn multiplier_norm_bounded_by_forcing_and_stable() {
    // |ξ|^θ λ^{1−θ} / |iξ + λ| ≤ 1, so every ratio lies in (0, 1].
    let mut r = rng(11);
    let a = diag(&[0.7, 2.0, 5.0]);
    let (f, out) = forcing_and_output(&mut r, 3, 10);
    let fine = out.refine(&out.intervals().map(|(p, q)| 0.5 * (p + q)).collect::<Vec<_>>()).0;
    for theta in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let coarse = hnorm(&dtheta_a1mtheta(&a, &f, theta, &out).unwrap()) / hnorm(&f);
        let refined = hnorm(&dtheta_a1mtheta(&a, &f, theta, &fine).unwrap()) / hnorm(&f);
        assert!(coarse > 0.05 && refined <= 1.0 + 1e-6, "θ = {theta}: {coarse} {refined}");
        assert!((refined - coarse).abs() <= 0.15 * refined, "θ = {theta}: {coarse} {refined}");
    }
}

#[test]
fn constant_examples() {
    let space1 = SpaceModel::hilbert(1);
    let c = maxreg_constant(&diag(&[1.0]), &space1, 20, 3).unwrap();
    assert!(c.constant <= 1.0 && c.constant > 0.3);
    assert_eq!(c.ratios.len(), 20);
    let a = diag(&[0.5, 1.0, 3.0, 10.0]);
    let space = SpaceModel::hilbert(4);
    let c = maxreg_constant(&a, &space, 40, 5).unwrap();
    assert!(c.constant <= 1.05);
    let scaled = maxreg_constant(&a.scaled(7.5).unwrap(), &space, 40, 5).unwrap();
    assert_relative_eq!(c.constant, scaled.constant, max_relative = 1e-8);
    // Deterministic in the seed, independent of the thread count.
    assert_eq!(c, maxreg_constant(&a, &space, 40, 5).unwrap());
}

#[test]
fn holder_and_trace_norms() {
    let a = diag(&[0.5, 2.0, 6.0]);
    let space = SpaceModel::hilbert(3);
    let g = TimeGrid::uniform(0.0, 4.0, 16).unwrap();
    let u = convolve(&a, &StepFunction::zero(g.clone(), space.clone(), 1), &g).unwrap();
    let h = holder_trace_norms(&u, 1.0).unwrap();
    assert_eq!((h.holder, h.sup_half), (0.0, 0.0));
    assert!(matches!(holder_trace_norms(&u, 0.5), Err(Error::InvalidInput(_))));

    let c = maxreg_constant(&a, &space, 20, 1).unwrap().constant;
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let f = random_step(&mut r, g.clone(), space.clone(), 1);
        let u = convolve(&a, &f, &g).unwrap();
        let h = holder_trace_norms(&u, 1.0).unwrap();
        let fn_ = hnorm(&f);
        assert!(h.holder.is_finite() && h.holder <= 10.0 * c * fn_, "seed {seed}");
        assert!(h.sup_half <= fn_, "seed {seed}: {} > {}", h.sup_half, fn_);
        let h34 = holder_trace_norms(&u, 0.75).unwrap();
        assert!(h34.holder.is_finite());
    }
}

#[test]
fn sup_bound_on_finite_horizons() {
    let a = diag(&[0.3, 1.0, 4.0]);
    let space = SpaceModel::hilbert(3);
    let c = 1.0;
    for t in [0.25, 1.0, 4.0] {
        for seed in 0..10 {
            let mut r = rng(400 + seed);
            let g = TimeGrid::uniform(0.0, t, 12).unwrap();
            let f = random_step(&mut r, g.clone(), space.clone(), 1);
            let u = convolve(&a, &f, &g).unwrap();
            assert!(sup_norm(&u).unwrap() <= (c + 1.0) * t.sqrt() * hnorm(&f));
        }
    }
}

#[test]
fn scaling_covariance() {
    let a = diag(&[0.5, 3.0]);
    let space = SpaceModel::hilbert(2);
    let mut r = rng(9);
    let f = rstep(&mut r, 8, 0.0, space.clone(), 1);
    let u = convolve(&a, &f, f.grid()).unwrap();
    for c in [0.25, 3.0] {
        let knots: Vec<f64> = f.grid().knots().iter().map(|t| t / c).collect();
        let g = TimeGrid::new(knots, Weight::Lebesgue).unwrap();
        let fc = StepFunction::new(g.clone(), f.values().iter().map(|v| v * c).collect(), space.clone()).unwrap();
        let uc = convolve(&a.scaled(c).unwrap(), &fc, &g).unwrap();
        for j in 0..g.knots().len() {
            assert_relative_eq!(uc.value(j), u.value(j), max_relative = 1e-12, epsilon = 1e-14);
        }
    }
}

#[test]
fn trace_of_extension_is_identity() {
    let grid = TimeGrid::log_spaced(1e-12, 10.0, 8, Weight::Lebesgue).unwrap();
    for seed in 0..5 {
        let mut r = rng(500 + seed);
        let n = r.random_range(1..5);
        let a = SectorialOp::new(random_sectorial(&mut r, n)).unwrap();
        let x = random_vec(&mut r, n);
        let vals = extension(&a, &x, &grid).unwrap();
        let tr = trace_zero(grid.knots(), &vals).unwrap();
        assert!((tr - &x).norm() <= 1e-8 * x.norm());
    }
    let coarse = TimeGrid::uniform(0.1, 2.0, 10).unwrap();
    let a = diag(&[1.0]);
    let x = DVector::from_element(1, 1.0);
    let vals = extension(&a, &x, &coarse).unwrap();
    assert!(matches!(trace_zero(coarse.knots(), &vals), Err(Error::InsufficientGrid(_))));
    assert!(matches!(trace_zero(&coarse.knots()[..2], &vals[..2]), Err(Error::InsufficientGrid(_))));
}

#[test]
fn trace_formula_recovers_value_at_zero() {
    // The formula holds for every σ; on a dense grid it returns u(0).
    let u = ExpSum::new(vec![1.0, 3.0], vec![DVector::from_vec(vec![1.0, -2.0]), DVector::from_vec(vec![0.5, 0.25])]).unwrap();
    let grid = TimeGrid::log_spaced(1e-9, 5.0, 400, Weight::Lebesgue).unwrap();
    let vals: Vec<DVector<f64>> = grid.knots().iter().map(|t| u.eval(*t)).collect();
    for sigma in [0.01, 0.3, 2.0] {
        let e = trace_formula(grid.knots(), &vals, sigma).unwrap();
        assert!((e - u.trace()).norm() <= 1e-4, "σ = {sigma}");
    }
}

#[test]
fn extension_norm_equals_half_power() {
    let a = diag(&[0.2, 1.0, 9.0]);
    let space = SpaceModel::hilbert(3);
    let x = DVector::from_vec(vec![1.0, -0.5, 2.0]);
    let expect = (0.2 * 1.0 + 1.0 * 0.25 + 9.0 * 4.0f64).sqrt();
    assert_relative_eq!(extension_norm(&a, &x, &space).unwrap().value, expect, max_relative = 1e-10);
    for lam in [0.01, 1.0, 100.0] {
        let v = extension_norm(&diag(&[lam]), &DVector::from_element(1, 1.0), &SpaceModel::hilbert(1)).unwrap();
        assert_relative_eq!(v.value, lam.sqrt(), max_relative = 1e-10);
    }
}

#[test]
fn trace_chain_inequalities() {
    for seed in 0..20 {
        let mut r = rng(600 + seed);
        let n = r.random_range(1..5);
        let b = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let a = SectorialOp::new(&b * b.transpose() + DMatrix::identity(n, n) * 0.3).unwrap();
        let terms = r.random_range(1..4);
        let rates = (0..terms).map(|_| r.random_range(0.2..5.0)).collect();
        let coeffs = (0..terms).map(|_| random_vec(&mut r, n)).collect();
        let u = ExpSum::new(rates, coeffs).unwrap();
        let chain = trace_chain(&a, &u, &SpaceModel::hilbert(n)).unwrap();
        assert!(chain.holds(1.0, 1e-9), "seed {seed}: {chain:?}");
        let ext = extension_norm(&a, &u.trace(), &SpaceModel::hilbert(n)).unwrap().value;
        assert_relative_eq!(ext, chain.trace, max_relative = 1e-9);
    }
}

#[test]
fn expsum_covariances_match_quadrature() {
    let u = ExpSum::new(vec![0.5, 2.0], vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![-1.0, 3.0])]).unwrap();
    let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
    let (x, w) = gauss_legendre(30);
    let mut c = DMatrix::zeros(2, 2);
    for k in 0..80 {
        let (lo, hi) = (0.5 * k as f64, 0.5 * (k + 1) as f64);
        for (xi, wi) in x.iter().zip(&w) {
            let t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
            let v = &b * u.eval(t);
            c += &v * v.transpose() * (0.5 * (hi - lo) * wi);
        }
    }
    assert_relative_eq!(u.covariance(Some(&b)), c, max_relative = 1e-12);
}

#[test]
fn sectoriality_profile() {
    let space1 = SpaceModel::hilbert(1);
    let rep = gamma_sectoriality_from_maxreg(&diag(&[1.0]), &space1, 1.0, 10, 2).unwrap();
    for (s, v) in &rep.profile {
        assert_relative_eq!(*v, s.abs() / (1.0 + s * s).sqrt(), max_relative = 1e-12);
    }
    assert!(rep.bound.value <= 1.0 + 1e-12 && rep.consistent);

    let a = diag(&[0.5, 2.0, 8.0]);
    let space = SpaceModel::hilbert(3);
    let c = maxreg_constant(&a, &space, 20, 4).unwrap().constant;
    let rep = gamma_sectoriality_from_maxreg(&a, &space, c, 50, 4).unwrap();
    assert!(rep.bound.value <= 1.0 + 1e-12 && rep.bound.value > 0.99);
    assert!(rep.consistent);

    let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.5, 3.0, 0.0, 0.0, 2.0]);
    let a = SectorialOp::new(m).unwrap();
    let rep = gamma_sectoriality_from_maxreg(&a, &space, 1.0, 20, 4).unwrap();
    assert!(rep.bound.value.is_finite() && rep.bound.value >= 1.0);
    let lp = SpaceModel::new(3, 1.5).unwrap();
    assert!(gamma_sectoriality_from_maxreg(&a, &lp, 1.0, 5, 4).unwrap().bound.value.is_finite());
    let _ = gamma_norm(&StepFunction::zero(TimeGrid::uniform(0.0, 1.0, 1).unwrap(), lp, 1), NormChoice::Auto);
}
