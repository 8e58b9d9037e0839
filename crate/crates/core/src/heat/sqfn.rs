use super::field::mean_lq;
use super::step::HeatEnsemble;
use crate::error::{Error, Result};
use crate::space::Exponent;

/// `(mean_x (∫ |v(t,x)|² dt)^{q/2})^{1/q}` for collocation values `v[i][x]`
/// at the knots `t_i`, trapezoid rule in time.
pub fn sqfn_values(values: &[Vec<f64>], knots: &[f64], q: Exponent) -> Result<f64> {
    if values.len() != knots.len() || values.is_empty() {
        return Err(Error::InvalidInput("one value row per knot is required".into()));
    }
    let points = values[0].len();
    if values.iter().any(|v| v.len() != points) {
        return Err(Error::InvalidInput("value rows differ in length".into()));
    }
    let mut acc = vec![0.0; points];
    for i in 0..knots.len().saturating_sub(1) {
        let h = 0.5 * (knots[i + 1] - knots[i]);
        for (a, (x, y)) in acc.iter_mut().zip(values[i].iter().zip(&values[i + 1])) {
            *a += h * (x * x + y * y);
        }
    }
    let root: Vec<f64> = acc.iter().map(|v| v.sqrt()).collect();
    Ok(mean_lq(&root, q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqfnStats {
    pub per_sample: Vec<f64>,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear interpolation between order statistics.
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

impl SqfnStats {
    pub fn from_samples(per_sample: Vec<f64>) -> Self {
        let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        SqfnStats {
            median: quantile(&per_sample, 0.5),
            q90: quantile(&per_sample, 0.9),
            max: per_sample.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            per_sample,
        }
    }
}

/// Square-function norm `‖(∫_0^T |D^r u|² dt)^{1/2}‖_{L^q}` of every sample.
pub fn measure_sqfn_norm(ens: &HeatEnsemble, r: usize, q: f64) -> Result<SqfnStats> {
    let q = Exponent::from_f64(q)?;
    if ens.paths.is_empty() {
        return Err(Error::InvalidInput("empty ensemble".into()));
    }
    let t = ens.paths[0][0].transform();
    let knots = ens.grid.knots();
    let per_sample = ens
        .paths
        .iter()
        .map(|path| {
            let rows: Vec<Vec<f64>> = path
                .iter()
                .map(|u| u.derivative_energy(&t, r).map(|e| e.into_iter().map(f64::sqrt).collect()))
                .collect::<Result<_>>()?;
            sqfn_values(&rows, knots, q)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SqfnStats::from_samples(per_sample))
}

/// `sup_t ‖u(t)‖_{H^{s,q}}` of every sample.
pub fn trace_norms(ens: &HeatEnsemble) -> Vec<f64> {
    let t = ens.paths[0][0].transform();
    ens.paths.iter().map(|p| p.iter().map(|u| u.hsq_norm(&t)).fold(0.0, f64::max)).collect()
}
