use nalgebra::{DMatrix, DMatrixView, DVector};
use rayon::prelude::*;

use super::brownian::CylindricalBM;
use crate::error::{invalid, Error, Result};
use crate::gamma::{gamma_norm, NormChoice, StepFunction, TimeGrid};
use crate::rng::{self, MeanEstimate};
use crate::space::SpaceModel;
use crate::textio::{data_rows, header_field, num, parse_header};

#[derive(Debug, Clone, PartialEq)]
enum Values {
    Deterministic(Vec<DMatrix<f64>>),
    Random(Vec<Vec<DMatrix<f64>>>),
}

/// Step process with n×m values `G_i(ω)` on the intervals of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    grid: TimeGrid,
    dim: usize,
    noise_dim: usize,
    values: Values,
    /// Seed of the Brownian motion the values were built from.
    lineage: Option<u64>,
    adapted: bool,
}

impl AdaptedProcess {
    /// The same deterministic step function on every sample.
    pub fn deterministic(f: &StepFunction) -> Self {
        AdaptedProcess {
            grid: f.grid().clone(),
            dim: f.dim(),
            noise_dim: f.width(),
            values: Values::Deterministic(f.values().to_vec()),
            lineage: None,
            adapted: true,
        }
    }

    /// Builds `G_i(ω)` from the increments strictly before `t_i`; the
    /// closure sees an m×i view and nothing later.
    pub fn adapted(
        w: &CylindricalBM,
        dim: usize,
        g: impl Fn(usize, usize, DMatrixView<'_, f64>) -> DMatrix<f64> + Sync,
    ) -> Result<Self> {
        let n = w.grid().len();
        let m = w.noise_dim();
        let values = (0..w.samples())
            .into_par_iter()
            .map(|s| {
                let inc = w.increments(s);
                (0..n)
                    .map(|i| {
                        let v = g(s, i, inc.columns(0, i));
                        if v.nrows() != dim || v.ncols() != m {
                            return invalid(format!("value is {}×{}, expected {dim}×{m}", v.nrows(), v.ncols()));
                        }
                        Ok(v)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AdaptedProcess {
            grid: w.grid().clone(),
            dim,
            noise_dim: m,
            values: Values::Random(values),
            lineage: Some(w.seed()),
            adapted: true,
        })
    }

    /// Arbitrary per-sample values; `adapted` is the caller's claim.
    pub fn from_samples(
        grid: TimeGrid,
        values: Vec<Vec<DMatrix<f64>>>,
        lineage: Option<u64>,
        adapted: bool,
    ) -> Result<Self> {
        let first = values.first().and_then(|v| v.first()).ok_or(Error::InvalidInput("no values".into()))?;
        let (dim, noise_dim) = first.shape();
        for v in &values {
            if v.len() != grid.len() || v.iter().any(|g| g.shape() != (dim, noise_dim)) {
                return invalid("every sample needs one value of equal shape per interval");
            }
        }
        Ok(AdaptedProcess { grid, dim, noise_dim, values: Values::Random(values), lineage, adapted })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn is_adapted(&self) -> bool {
        self.adapted
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.values, Values::Deterministic(_))
    }

    /// `None` for deterministic processes, which fit any sample count.
    pub fn samples(&self) -> Option<usize> {
        match &self.values {
            Values::Deterministic(_) => None,
            Values::Random(v) => Some(v.len()),
        }
    }

    pub fn value(&self, sample: usize, i: usize) -> &DMatrix<f64> {
        match &self.values {
            Values::Deterministic(v) => &v[i],
            Values::Random(v) => &v[sample][i],
        }
    }

    pub fn sample_step(&self, sample: usize, space: &SpaceModel) -> Result<StepFunction> {
        let vals = (0..self.grid.len()).map(|i| self.value(sample, i).clone()).collect();
        StepFunction::new(self.grid.clone(), vals, space.clone())
    }

    /// Checks grid, sample count, lineage and adaptedness against `w`.
    pub fn check_against(&self, w: &CylindricalBM) -> Result<()> {
        if self.grid != *w.grid() {
            return invalid("process and Brownian motion live on different grids");
        }
        if self.noise_dim != w.noise_dim() {
            return invalid("process width differs from the noise dimension");
        }
        if let Some(s) = self.samples() {
            if s != w.samples() {
                return invalid(format!("{s} process samples against {} Brownian samples", w.samples()));
            }
        }
        if let Some(l) = self.lineage {
            if l != w.seed() {
                return invalid("process was built from a different Brownian motion");
            }
        }
        if !self.adapted {
            return Err(Error::ContractViolation("integrand is not adapted".into()));
        }
        Ok(())
    }
}

/// Per-sample trajectories on the knots of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    paths: Vec<Vec<DVector<f64>>>,
    seed: Option<u64>,
}

impl PathEnsemble {
    pub fn new(grid: TimeGrid, paths: Vec<Vec<DVector<f64>>>, seed: Option<u64>) -> Result<Self> {
        let k = grid.knots().len();
        let dim = paths.first().and_then(|p| p.first()).map(|v| v.len()).ok_or(Error::InvalidInput("empty ensemble".into()))?;
        if paths.iter().any(|p| p.len() != k || p.iter().any(|v| v.len() != dim)) {
            return invalid("every path needs one vector of equal length per knot");
        }
        Ok(PathEnsemble { grid, paths, seed })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> usize {
        self.paths.len()
    }

    pub fn dim(&self) -> usize {
        self.paths[0][0].len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn path(&self, sample: usize) -> &[DVector<f64>] {
        &self.paths[sample]
    }

    pub fn value(&self, sample: usize, knot: usize) -> &DVector<f64> {
        &self.paths[sample][knot]
    }

    /// `E‖U(t_k)‖²` in the given space.
    pub fn second_moment(&self, knot: usize, space: &SpaceModel) -> MeanEstimate {
        let xs: Vec<f64> = self.paths.iter().map(|p| space.norm_vec(&p[knot]).powi(2)).collect();
        rng::batch_mean(&xs)
    }

    /// `E f(U(t_k))` with a batch-means error.
    pub fn expectation(&self, knot: usize, f: impl Fn(&DVector<f64>) -> f64) -> MeanEstimate {
        let xs: Vec<f64> = self.paths.iter().map(|p| f(&p[knot])).collect();
        rng::batch_mean(&xs)
    }

    /// Pathwise sum or difference of ensembles with equal shape.
    pub fn combine(&self, other: &PathEnsemble, c: f64) -> Result<PathEnsemble> {
        if self.grid != other.grid || self.samples() != other.samples() || self.dim() != other.dim() {
            return invalid("ensembles differ in grid, sample count or dimension");
        }
        let paths = self
            .paths
            .iter()
            .zip(&other.paths)
            .map(|(p, q)| p.iter().zip(q).map(|(a, b)| a + b * c).collect())
            .collect();
        Ok(PathEnsemble { grid: self.grid.clone(), paths, seed: self.seed })
    }

    pub fn map(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> PathEnsemble {
        let paths = self.paths.iter().map(|p| p.iter().map(&f).collect()).collect();
        PathEnsemble { grid: self.grid.clone(), paths, seed: self.seed }
    }

    /// `# ensemble v1; samples=S; dim=n; m=K` then one row `sample t u…`
    /// per sample and knot.
    pub fn to_text(&self) -> String {
        let k = self.grid.knots();
        let mut s = format!("# ensemble v1; samples={}; dim={}; m={}\n", self.samples(), self.dim(), k.len());
        for (i, p) in self.paths.iter().enumerate() {
            for (t, v) in k.iter().zip(p) {
                s.push_str(&i.to_string());
                s.push(' ');
                s.push_str(&num(*t));
                for x in v.iter() {
                    s.push(' ');
                    s.push_str(&num(*x));
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<PathEnsemble> {
        let h = parse_header(text.lines().next().unwrap_or(""), "ensemble")?;
        let samples: usize = header_field(&h, "samples")?;
        let dim: usize = header_field(&h, "dim")?;
        let m: usize = header_field(&h, "m")?;
        let rows = data_rows(text)?;
        if rows.len() != samples * m {
            return Err(Error::Parse { line: 1, msg: format!("expected {} rows, found {}", samples * m, rows.len()) });
        }
        let mut knots = Vec::with_capacity(m);
        let mut paths = vec![Vec::with_capacity(m); samples];
        for (j, (line, row)) in rows.iter().enumerate() {
            let (s, k) = (j / m, j % m);
            if row.len() != 2 + dim {
                return Err(Error::Parse { line: *line, msg: format!("expected {} columns", 2 + dim) });
            }
            if row[0] != s as f64 {
                return Err(Error::Parse { line: *line, msg: "rows must be grouped by sample in order".into() });
            }
            if s == 0 {
                knots.push(row[1]);
            } else if row[1] != knots[k] {
                return Err(Error::Parse { line: *line, msg: "knots differ between samples".into() });
            }
            paths[s].push(DVector::from_column_slice(&row[2..]));
        }
        let grid = TimeGrid::new(knots, crate::gamma::Weight::Lebesgue)
            .map_err(|e| Error::Parse { line: 2, msg: e.to_string() })?;
        PathEnsemble::new(grid, paths, None)
    }
}

/// Running left-endpoint Itô sums `Σ_{i<k} G_i ΔW_i`.
pub fn ito_integral(g: &AdaptedProcess, w: &CylindricalBM) -> Result<PathEnsemble> {
    g.check_against(w)?;
    let n = g.dim();
    let paths = (0..w.samples())
        .into_par_iter()
        .map(|s| {
            let inc = w.increments(s);
            let mut acc = DVector::zeros(n);
            let mut p = Vec::with_capacity(inc.ncols() + 1);
            p.push(acc.clone());
            for i in 0..inc.ncols() {
                acc += g.value(s, i) * inc.column(i);
                p.push(acc.clone());
            }
            p
        })
        .collect();
    PathEnsemble::new(w.grid().clone(), paths, Some(w.seed()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoReport {
    /// `E sup_k ‖∫_0^{t_k} G dW‖^p`.
    pub lhs: MeanEstimate,
    /// `E ‖G‖^p_{γ(ℝ₊;H,X)}`.
    pub rhs: MeanEstimate,
    /// `lhs / rhs`; `None` when both vanish.
    pub ratio: Option<f64>,
}

pub fn ito_isomorphism_check(g: &AdaptedProcess, w: &CylindricalBM, p: f64, space: &SpaceModel) -> Result<IsoReport> {
    if !(p > 0.0 && p.is_finite()) {
        return invalid(format!("p must be a positive real, got {p}"));
    }
    if space.dim != g.dim() {
        return invalid("space and process dimensions differ");
    }
    let ens = ito_integral(g, w)?;
    let lhs: Vec<f64> = (0..ens.samples())
        .map(|s| ens.path(s).iter().map(|v| space.norm_vec(v)).fold(0.0, f64::max).powf(p))
        .collect();
    let rhs: Vec<f64> = match g.samples() {
        None => {
            let v = gamma_norm(&g.sample_step(0, space)?, NormChoice::Auto)?.value.powf(p);
            vec![v; w.samples()]
        }
        Some(k) => (0..k)
            .into_par_iter()
            .map(|s| Ok(gamma_norm(&g.sample_step(s, space)?, NormChoice::Auto)?.value.powf(p)))
            .collect::<Result<Vec<_>>>()?,
    };
    let (lhs, rhs) = (rng::batch_mean(&lhs), rng::batch_mean(&rhs));
    let ratio = if lhs.mean == 0.0 && rhs.mean == 0.0 { None } else { Some(lhs.mean / rhs.mean) };
    Ok(IsoReport { lhs, rhs, ratio })
}
