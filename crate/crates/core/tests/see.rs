mod common;

use std::sync::Arc;

use common::*;
use gammareg::gamma::{StepFunction, TimeGrid};
use gammareg::maxreg::convolve;
use gammareg::sectorial::SectorialOp;
use gammareg::see::*;
use gammareg::space::SpaceModel;
use gammareg::stochastic::{CylindricalBM, PathEnsemble};
use gammareg::Error;
use nalgebra::{DMatrix, DVector};

fn scalar_linear(lambda: f64, beta: f64, steps: usize) -> SEEProblem {
    let spec = LipschitzSpec::zero(1)
        .unwrap()
        .with_diffusion(move |_, x| DMatrix::from_element(1, 1, beta * x[0]), beta / lambda.sqrt(), 0.0, 0.0)
        .unwrap();
    SEEProblem::new(
        SectorialOp::diagonal(&[lambda]).unwrap(),
        spec,
        InitialData::Deterministic(DVector::from_element(1, 1.0)),
        TimeGrid::uniform(0.0, 1.0, steps).unwrap(),
        SpaceModel::hilbert(1),
    )
    .unwrap()
}

fn hilbert_constants() -> RegularityConstants {
    RegularityConstants { k_star: 1.0, k_diamond: std::f64::consts::FRAC_1_SQRT_2 }
}

/// `(E‖U − V‖²_{γ(0,T;X₁)})^{1/2}` with the trapezoid rule.
fn x1_distance(a: &DMatrix<f64>, u: &PathEnsemble, v: &PathEnsemble) -> f64 {
    let k = u.grid().knots();
    let mut acc = 0.0;
    for s in 0..u.samples() {
        let d: Vec<f64> = (0..k.len()).map(|i| (a * (u.value(s, i) - v.value(s, i))).norm_squared()).collect();
        acc += k.windows(2).enumerate().map(|(i, w)| 0.5 * (w[1] - w[0]) * (d[i] + d[i + 1])).sum::<f64>();
    }
    (acc / u.samples() as f64).sqrt()
}

#[test]
fn zero_nonlinearity_reproduces_the_deterministic_convolution() {
    let mut r = rng(3);
    let a = SectorialOp::new(random_sectorial(&mut r, 3)).unwrap();
    let grid = TimeGrid::uniform(0.0, 2.0, 64).unwrap();
    let space = SpaceModel::hilbert(3);
    let f = random_step(&mut r, grid.clone(), space.clone(), 1);
    let problem = SEEProblem::new(
        a.clone(),
        LipschitzSpec::zero(1).unwrap(),
        InitialData::Deterministic(DVector::zeros(3)),
        grid.clone(),
        space,
    )
    .unwrap()
    .with_forcing(f.clone())
    .unwrap();
    assert_eq!(problem.shift(), 0.0);
    let w = CylindricalBM::new(&grid, 1, 2, 5).unwrap();
    let (u, report) = picard_solve(&problem, &hilbert_constants(), &w, &PicardOptions::default()).unwrap();
    assert!(report.converged && report.iterations <= 2);
    let exact = convolve(&a, &f, &grid).unwrap();
    for j in 0..=grid.len() {
        let d = (u.value(0, j) - exact.value(j)).norm();
        assert!(d <= 1e-8 * (1.0 + exact.value(j).norm()), "knot {j}: {d}");
    }
    let res = mild_strong_check(&u, &problem, &w).unwrap();
    assert!(res.max <= 1e-8, "{}", res.max);
}

#[test]
fn linear_scalar_second_moment_matches_the_moment_ode() {
    let (lambda, beta) = (1.0, 0.5);
    let problem = scalar_linear(lambda, beta, 256);
    let k = measure_constants(&problem, 4, 11).unwrap();
    assert!((k.k_star - 1.0).abs() <= 0.05, "{}", k.k_star);
    let factor = problem.contraction_factor(&k);
    let w = CylindricalBM::new(problem.grid(), 1, 4000, 21).unwrap();
    let (u, report) = picard_solve(&problem, &k, &w, &PicardOptions::default()).unwrap();
    assert!(report.converged);
    for r in &report.ratios {
        assert!(*r <= factor + 0.05, "ratio {r} vs factor {factor}");
    }
    let space = SpaceModel::hilbert(1);
    for j in [64, 128, 192, 256] {
        let t = problem.grid().knots()[j];
        let m = u.second_moment(j, &space);
        let exact = ((beta * beta - 2.0 * lambda) * t).exp();
        assert!((m.mean - exact).abs() <= 3.0 * m.stderr, "t={t}: {} ± {} vs {exact}", m.mean, m.stderr);
    }
}

#[test]
fn smallness_violation_is_refused() {
    let problem = scalar_linear(1.0, 1.6, 64);
    let k = measure_constants(&problem, 4, 11).unwrap();
    assert!(problem.contraction_factor(&k) >= 1.0);
    let w = CylindricalBM::new(problem.grid(), 1, 8, 1).unwrap();
    match picard_solve(&problem, &k, &w, &PicardOptions::default()) {
        Err(Error::SmallnessViolation { factor }) => assert!(factor >= 1.0),
        other => panic!("expected a smallness violation, got {other:?}"),
    }
}

#[test]
fn strong_drift_without_the_smallness_gate_diverges() {
    let a = SectorialOp::diagonal(&[1.0, 2.0]).unwrap();
    let am = a.matrix().clone();
    let spec = LipschitzSpec::zero(1).unwrap().with_drift(move |_, x| &am * x * 3.0, 3.0, 0.0, 0.0).unwrap();
    let grid = TimeGrid::uniform(0.0, 8.0, 256).unwrap();
    let problem = SEEProblem::new(
        a,
        spec,
        InitialData::Deterministic(DVector::from_vec(vec![1.0, -1.0])),
        grid.clone(),
        SpaceModel::hilbert(2),
    )
    .unwrap();
    let w = CylindricalBM::new(&grid, 1, 1, 1).unwrap();
    let opts = PicardOptions { enforce_smallness: false, ..Default::default() };
    match picard_solve(&problem, &hilbert_constants(), &w, &opts) {
        Err(Error::Divergence { iter }) => assert!(iter >= 1 + DIVERGENCE_RUN),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn strong_residual_is_small_and_first_order() {
    let coarse = scalar_linear(1.0, 0.5, 512);
    let fine = scalar_linear(1.0, 0.5, 1024);
    let k = hilbert_constants();
    let samples = 400;
    let wf = CylindricalBM::new(fine.grid(), 1, samples, 8).unwrap();
    let wc = CylindricalBM::new(coarse.grid(), 1, samples, 8).unwrap();
    let (uf, _) = picard_solve(&fine, &k, &wf, &PicardOptions::default()).unwrap();
    let (uc, _) = picard_solve(&coarse, &k, &wc, &PicardOptions::default()).unwrap();
    let rf = mild_strong_check(&uf, &fine, &wf).unwrap();
    let rc = mild_strong_check(&uc, &coarse, &wc).unwrap();
    assert!(rf.median <= 1e-3, "{}", rf.median);
    let mean = |r: &ResidualReport| r.per_sample.iter().sum::<f64>() / r.per_sample.len() as f64;
    let ratio = mean(&rf) / mean(&rc);
    assert!((0.35..=0.65).contains(&ratio), "halving ratio {ratio}");
}

fn sine_problem(u0: DVector<f64>, beta: f64) -> SEEProblem {
    let spec = LipschitzSpec::zero(1)
        .unwrap()
        .with_drift(|_, x| x.map(|v| 0.3 * v.sin()), 0.0, 0.3, 0.0)
        .unwrap()
        .with_diffusion(
            move |_, x| DMatrix::from_column_slice(2, 1, &[beta * x[0], beta * x[1]]),
            beta,
            0.0,
            0.0,
        )
        .unwrap();
    SEEProblem::new(
        SectorialOp::diagonal(&[1.0, 3.0]).unwrap(),
        spec,
        InitialData::Deterministic(u0),
        TimeGrid::uniform(0.0, 2.0, 128).unwrap(),
        SpaceModel::hilbert(2),
    )
    .unwrap()
}

#[test]
fn declared_lipschitz_bounds_are_checked() {
    let p = sine_problem(DVector::from_vec(vec![1.0, 0.5]), 0.4);
    let rep = lipschitz_check(&p, 20, 4).unwrap();
    assert!(rep.drift_ratio <= 1.0 && rep.drift_ratio > 0.5, "{}", rep.drift_ratio);
    assert!(rep.diffusion_ratio <= 1.0 + LIPSCHITZ_SLACK, "{}", rep.diffusion_ratio);
    let spec = LipschitzSpec::zero(1).unwrap().with_drift(|_, x| x.map(|v| 0.3 * v.sin()), 0.0, 0.1, 0.0).unwrap();
    let bad = SEEProblem::new(
        SectorialOp::diagonal(&[1.0, 3.0]).unwrap(),
        spec,
        InitialData::Deterministic(DVector::zeros(2)),
        TimeGrid::uniform(0.0, 2.0, 16).unwrap(),
        SpaceModel::hilbert(2),
    )
    .unwrap();
    assert!(matches!(lipschitz_check(&bad, 20, 4), Err(Error::SpecViolation(_))));
}

#[test]
fn picard_initializations_agree() {
    let p = sine_problem(DVector::from_vec(vec![1.0, 0.5]), 0.4);
    let w = CylindricalBM::new(p.grid(), 1, 64, 2).unwrap();
    let tol = 1e-9;
    let mut opts = PicardOptions { tol, ..Default::default() };
    let (u1, r1) = picard_solve(&p, &hilbert_constants(), &w, &opts).unwrap();
    opts.init = PicardInit::Constant;
    let (u2, r2) = picard_solve(&p, &hilbert_constants(), &w, &opts).unwrap();
    assert!(r1.converged && r2.converged);
    let a = p.shifted_operator().matrix().clone();
    for s in 0..u1.samples() {
        let k = u1.grid().knots();
        let d: Vec<f64> = (0..k.len()).map(|i| (&a * (u1.value(s, i) - u2.value(s, i))).norm_squared()).collect();
        let g = k.windows(2).enumerate().map(|(i, w)| 0.5 * (w[1] - w[0]) * (d[i] + d[i + 1])).sum::<f64>().sqrt();
        assert!(g <= 2.0 * tol, "sample {s}: {g}");
    }
}

#[test]
fn solutions_depend_linearly_on_small_initial_perturbations() {
    let base = DVector::from_vec(vec![1.0, 0.5]);
    let dir = DVector::from_vec(vec![0.6, -0.8]);
    let p0 = sine_problem(base.clone(), 0.4);
    let w = CylindricalBM::new(p0.grid(), 1, 64, 9).unwrap();
    let k = hilbert_constants();
    let (u0, _) = picard_solve(&p0, &k, &w, &PicardOptions::default()).unwrap();
    let a = p0.shifted_operator().matrix().clone();
    let half = p0.shifted_operator().frac_power(0.5).unwrap();
    let mut gamma = Vec::new();
    let mut sup = Vec::new();
    for delta in [1e-4, 1e-3, 1e-2] {
        let p = sine_problem(&base + &dir * delta, 0.4);
        let (u, _) = picard_solve(&p, &k, &w, &PicardOptions::default()).unwrap();
        let norm0 = (&half * &dir).norm() * delta;
        gamma.push(x1_distance(&a, &u, &u0) / norm0);
        let mut s = 0.0f64;
        for smp in 0..u.samples() {
            for i in 0..=p.grid().len() {
                s = s.max((&half * (u.value(smp, i) - u0.value(smp, i))).norm());
            }
        }
        sup.push(s / norm0);
    }
    for v in [&gamma, &sup] {
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(l, h), x| (l.min(*x), h.max(*x)));
        assert!(hi / lo <= 1.1, "{v:?}");
    }
}

#[test]
fn solution_norm_grows_at_most_affinely() {
    let dir = DVector::from_vec(vec![1.0, 0.5]);
    let mut pts = Vec::new();
    for scale in [1.0, 3.0, 10.0] {
        let p = sine_problem(&dir * scale, 0.4);
        let w = CylindricalBM::new(p.grid(), 1, 64, 9).unwrap();
        let (u, _) = picard_solve(&p, &hilbert_constants(), &w, &PicardOptions::default()).unwrap();
        let zero = PathEnsemble::new(
            u.grid().clone(),
            (0..u.samples()).map(|_| vec![DVector::zeros(2); u.grid().len() + 1]).collect(),
            None,
        )
        .unwrap();
        let n = x1_distance(p.shifted_operator().matrix(), &u, &zero);
        pts.push(((p.shifted_operator().frac_power(0.5).unwrap() * &dir * scale).norm(), n));
    }
    let slope = |i: usize| (pts[i + 1].1 - pts[i].1) / (pts[i + 1].0 - pts[i].0);
    assert!(slope(1) <= 1.1 * slope(0), "{pts:?}");
    assert!(pts[0].1 <= pts[0].0 * slope(0) * 1.5, "{pts:?}");
}

#[test]
fn measured_constants_for_the_identity() {
    let p = SEEProblem::new(
        SectorialOp::diagonal(&[1.0, 1.0]).unwrap(),
        LipschitzSpec::zero(2).unwrap(),
        InitialData::Deterministic(DVector::zeros(2)),
        TimeGrid::uniform(0.0, 1.0, 8).unwrap(),
        SpaceModel::hilbert(2),
    )
    .unwrap();
    let k = measure_constants(&p, 6, 2).unwrap();
    assert!(k.k_star <= 1.0 + 1e-9 && k.k_star >= 0.95, "{}", k.k_star);
    assert!((k.k_diamond - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.05, "{}", k.k_diamond);
}

#[test]
fn singular_operator_gets_a_shift() {
    let a = SectorialOp::diagonal(&[0.0, 2.0]).unwrap();
    assert_eq!(default_shift(&a), 1.0);
    let p = SEEProblem::new(
        a,
        LipschitzSpec::zero(1).unwrap(),
        InitialData::Deterministic(DVector::from_vec(vec![1.0, 1.0])),
        TimeGrid::uniform(0.0, 1.0, 512).unwrap(),
        SpaceModel::hilbert(2),
    )
    .unwrap();
    assert!(p.shifted_operator().invertible());
    let w = CylindricalBM::new(p.grid(), 1, 1, 0).unwrap();
    let (u, _) = picard_solve(&p, &hilbert_constants(), &w, &PicardOptions::default()).unwrap();
    // u' + Au = 0 keeps the kernel direction fixed; the shift term is
    // explicit, so agreement is first order in the step.
    assert!((u.value(0, 512)[0] - 1.0).abs() <= 2e-3, "{}", u.value(0, 512)[0]);
    assert!((u.value(0, 512)[1] - (-2.0f64).exp()).abs() <= 2e-3, "{}", u.value(0, 512)[1]);
}

fn linear_family(a0: DMatrix<f64>) -> OperatorFamily {
    Arc::new(move |t| SectorialOp::new(&a0 * (1.0 + t)))
}

#[test]
fn split_count_for_a_linear_family() {
    let a0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
    let fam = linear_family(a0);
    let grid = TimeGrid::uniform(0.0, 1.0, 2048).unwrap();
    let space = SpaceModel::hilbert(2);
    for eps in [0.5, 0.25, 0.1, 0.05] {
        let pieces = split_horizon(&fam, &grid, eps, &space, 1).unwrap();
        let expected = (2.0 / eps).ceil() as i64;
        assert!((pieces.len() as i64 - expected).abs() <= 1, "eps {eps}: {} pieces", pieces.len());
        assert!(pieces.iter().all(|p| p.bound < eps));
        assert_eq!(pieces[0].start, 0.0);
        assert_eq!(pieces.last().unwrap().end, 1.0);
    }
}

#[test]
fn rough_family_is_not_splittable() {
    let fam: OperatorFamily =
        Arc::new(|t| SectorialOp::diagonal(&[if t < 0.5 { 1.0 } else { 5.0 }]));
    let grid = TimeGrid::uniform(0.0, 1.0, 100).unwrap();
    let r = split_horizon(&fam, &grid, 0.5, &SpaceModel::hilbert(1), 1);
    assert!(matches!(r, Err(Error::NonSplittable { depth: SPLIT_DEPTH })), "{r:?}");
}

fn diffusive(a: SectorialOp, grid: TimeGrid) -> SEEProblem {
    let spec = LipschitzSpec::zero(1)
        .unwrap()
        .with_diffusion(|_, x| DMatrix::from_column_slice(2, 1, &[0.3 * x[0], 0.3 * x[1]]), 0.3, 0.0, 0.0)
        .unwrap();
    SEEProblem::new(a, spec, InitialData::Deterministic(DVector::from_vec(vec![1.0, -0.5])), grid, SpaceModel::hilbert(2))
        .unwrap()
}

#[test]
fn constant_family_is_one_piece_and_matches_picard() {
    let a = SectorialOp::diagonal(&[1.0, 2.0]).unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, 64).unwrap();
    let p = diffusive(a.clone(), grid.clone());
    let am = a.clone();
    let fam: OperatorFamily = Arc::new(move |_| Ok(am.clone()));
    let w = CylindricalBM::new(&grid, 1, 32, 4).unwrap();
    let k = hilbert_constants();
    let sol = solve_nonautonomous(&p, &fam, 0.1, &k, &w, &PicardOptions::default(), 1).unwrap();
    assert_eq!(sol.pieces.len(), 1);
    let (u, _) = picard_solve(&p, &k, &w, &PicardOptions::default()).unwrap();
    for s in 0..32 {
        for i in 0..=64 {
            assert_eq!(sol.ensemble.value(s, i), u.value(s, i));
        }
    }
}

#[test]
fn frozen_scheme_is_cauchy_as_the_tolerance_shrinks() {
    let a0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
    let fam = linear_family(a0.clone());
    let grid = TimeGrid::uniform(0.0, 1.0, 512).unwrap();
    let p = diffusive(SectorialOp::new(a0.clone()).unwrap(), grid.clone());
    let w = CylindricalBM::new(&grid, 1, 64, 6).unwrap();
    let k = hilbert_constants();
    let sols: Vec<PathEnsemble> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|e| solve_nonautonomous(&p, &fam, *e, &k, &w, &PicardOptions::default(), 1).unwrap().ensemble)
        .collect();
    let d: Vec<f64> = sols.windows(2).map(|s| x1_distance(&a0, &s[0], &s[1])).collect();
    assert!(d[1] < d[0] && d[2] < d[1], "{d:?}");
    assert!(d[2] <= 0.7 * d[0], "{d:?}");
}

#[test]
fn problem_validation() {
    let a = SectorialOp::diagonal(&[1.0]).unwrap();
    let spec = LipschitzSpec::zero(1).unwrap();
    let grid = TimeGrid::uniform(0.5, 1.0, 4).unwrap();
    assert!(SEEProblem::new(
        a.clone(),
        spec.clone(),
        InitialData::Deterministic(DVector::zeros(1)),
        grid,
        SpaceModel::hilbert(1)
    )
    .is_err());
    let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
    assert!(SEEProblem::new(
        a.clone(),
        spec.clone(),
        InitialData::Deterministic(DVector::from_element(1, f64::NAN)),
        grid.clone(),
        SpaceModel::hilbert(1)
    )
    .is_err());
    assert!(LipschitzSpec::zero(1).unwrap().with_drift(|_, x| x.clone(), -1.0, 0.0, 0.0).is_err());
    let p = SEEProblem::new(a, spec, InitialData::Deterministic(DVector::zeros(1)), grid, SpaceModel::hilbert(1)).unwrap();
    let other = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
    let w = CylindricalBM::new(&other, 1, 2, 0).unwrap();
    assert!(picard_solve(&p, &hilbert_constants(), &w, &PicardOptions::default()).is_err());
    let f = StepFunction::zero(TimeGrid::uniform(0.0, 1.0, 2).unwrap(), SpaceModel::hilbert(1), 2);
    assert!(p.with_forcing(f).is_err());
}
