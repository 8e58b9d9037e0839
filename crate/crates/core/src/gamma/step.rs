use nalgebra::{DMatrix, DVector};

use super::grid::TimeGrid;
use crate::error::{invalid, Result};
use crate::space::SpaceModel;

/// Piecewise-constant function on a grid with n×m matrix values
/// (m = 1 for X-valued functions).
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    grid: TimeGrid,
    values: Vec<DMatrix<f64>>,
    space: SpaceModel,
}

impl StepFunction {
    pub fn new(grid: TimeGrid, values: Vec<DMatrix<f64>>, space: SpaceModel) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!("{} values for {} intervals", values.len(), grid.len()));
        }
        let m = values[0].ncols();
        if m == 0 {
            return invalid("matrix width must be positive");
        }
        for v in &values {
            if v.nrows() != space.dim {
                return invalid(format!("value has {} rows, space has dimension {}", v.nrows(), space.dim));
            }
            if v.ncols() != m {
                return invalid("matrix width must be constant across intervals");
            }
            if v.iter().any(|x| !x.is_finite()) {
                return invalid("non-finite value");
            }
        }
        Ok(StepFunction { grid, values, space })
    }

    pub fn from_vectors(grid: TimeGrid, values: Vec<DVector<f64>>, space: SpaceModel) -> Result<Self> {
        let vals = values.into_iter().map(|v| DMatrix::from_column_slice(v.len(), 1, v.as_slice())).collect();
        StepFunction::new(grid, vals, space)
    }

    pub fn zero(grid: TimeGrid, space: SpaceModel, width: usize) -> Self {
        let values = vec![DMatrix::zeros(space.dim, width.max(1)); grid.len()];
        StepFunction { grid, values, space }
    }

    /// Single step `1_{(a,b)} x`.
    pub fn indicator(a: f64, b: f64, x: DVector<f64>, space: SpaceModel) -> Result<Self> {
        let g = TimeGrid::new(vec![a, b], super::Weight::Lebesgue)?;
        StepFunction::from_vectors(g, vec![x], space)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &DMatrix<f64> {
        &self.values[i]
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn width(&self) -> usize {
        self.values[0].ncols()
    }

    pub fn intervals(&self) -> usize {
        self.grid.len()
    }

    /// Column `0` of interval `i`.
    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.values[i].column(0).into_owned()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| *x == 0.0))
    }

    /// `Σ μ(I_i) G_i G_iᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut c = DMatrix::zeros(n, n);
        for (i, g) in self.values.iter().enumerate() {
            let mu = self.grid.measure(i);
            c.gemm(mu, g, &g.transpose(), 1.0);
        }
        c
    }

    /// Columns `√μ_i G_i e_j` whose Gaussian sum realizes the γ-norm.
    pub fn gaussian_columns(&self) -> DMatrix<f64> {
        let n = self.dim();
        let m = self.width();
        let mut v = DMatrix::zeros(n, m * self.intervals());
        for (i, g) in self.values.iter().enumerate() {
            let s = self.grid.measure(i).sqrt();
            v.columns_mut(i * m, m).copy_from(&(g * s));
        }
        v
    }

    pub fn map_values(&self, f: impl Fn(usize, &DMatrix<f64>) -> DMatrix<f64>) -> Result<Self> {
        let vals: Vec<DMatrix<f64>> = self.values.iter().enumerate().map(|(i, v)| f(i, v)).collect();
        let rows = vals[0].nrows();
        let space = if rows == self.space.dim {
            self.space.clone()
        } else {
            SpaceModel { dim: rows, exponent: self.space.exponent, label: self.space.label.clone() }
        };
        StepFunction::new(self.grid.clone(), vals, space)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= c;
        }
        out
    }

    /// `self - other` on a common grid.
    pub fn sub(&self, other: &StepFunction) -> Result<Self> {
        if self.grid != other.grid || self.dim() != other.dim() || self.width() != other.width() {
            return invalid("step functions live on different grids or spaces");
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(StepFunction { grid: self.grid.clone(), values, space: self.space.clone() })
    }

    pub fn with_space(&self, space: SpaceModel) -> Result<Self> {
        StepFunction::new(self.grid.clone(), self.values.clone(), space)
    }

    /// Same function on a grid with extra knots.
    pub fn refine(&self, points: &[f64]) -> Self {
        let (grid, owner) = self.grid.refine(points);
        let values = owner.iter().map(|i| self.values[*i].clone()).collect();
        StepFunction { grid, values, space: self.space.clone() }
    }

    /// Value at t (zero outside the grid).
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match self.grid.locate(t) {
            Some(i) => self.values[i].clone(),
            None => DMatrix::zeros(self.dim(), self.width()),
        }
    }

    /// Knots at which the value jumps, with `value after − value before`.
    /// The function is taken as zero outside its grid.
    pub fn jumps(&self) -> Vec<(f64, DMatrix<f64>)> {
        let z = DMatrix::zeros(self.dim(), self.width());
        let k = self.grid.knots();
        let mut out = Vec::with_capacity(k.len());
        for (j, t) in k.iter().enumerate() {
            let before = if j == 0 { &z } else { &self.values[j - 1] };
            let after = if j == self.intervals() { &z } else { &self.values[j] };
            let d = after - before;
            if d.iter().any(|x| *x != 0.0) {
                out.push((*t, d));
            }
        }
        out
    }
}

fn check_pieces(pieces: &[(f64, f64)]) -> Result<()> {
    for (a, b) in pieces {
        if !a.is_finite() || !b.is_finite() {
            return invalid("non-finite interval endpoint");
        }
        if b < a {
            return invalid(format!("interval ({a}, {b}) is reversed"));
        }
    }
    Ok(())
}

fn inside(pieces: &[(f64, f64)], a: f64, b: f64) -> bool {
    pieces.iter().any(|(p, q)| *p <= a && b <= *q)
}

/// `1_F f` for F a finite union of intervals; the grid is split at the
/// endpoints of F first.
pub fn restrict(f: &StepFunction, pieces: &[(f64, f64)]) -> Result<StepFunction> {
    check_pieces(pieces)?;
    let pts: Vec<f64> = pieces.iter().flat_map(|(a, b)| [*a, *b]).collect();
    let mut r = f.refine(&pts);
    let grid = r.grid.clone();
    for (i, v) in r.values.iter_mut().enumerate() {
        let (a, b) = grid.interval(i);
        if !inside(pieces, a, b) {
            v.fill(0.0);
        }
    }
    Ok(r)
}

/// `∫_F f dμ = Σ_{I_i ⊆ F} μ(I_i) G_i`.
pub fn integrate(f: &StepFunction, pieces: &[(f64, f64)]) -> Result<DMatrix<f64>> {
    check_pieces(pieces)?;
    let pts: Vec<f64> = pieces.iter().flat_map(|(a, b)| [*a, *b]).collect();
    let r = f.refine(&pts);
    let mut acc = DMatrix::zeros(f.dim(), f.width());
    for i in 0..r.intervals() {
        let (a, b) = r.grid.interval(i);
        if inside(pieces, a, b) {
            acc += &r.values[i] * r.grid.measure(i);
        }
    }
    Ok(acc)
}

/// Interval-wise operator family or scalar symbol.
pub enum Multiplier<'a> {
    /// One matrix per interval.
    Operators(&'a [DMatrix<f64>]),
    /// A single matrix applied on every interval.
    Constant(&'a DMatrix<f64>),
    /// Scalar m(a, b) evaluated on each interval (a, b).
    Scalar(&'a dyn Fn(f64, f64) -> f64),
}

pub fn apply_multiplier(m: Multiplier<'_>, f: &StepFunction) -> Result<StepFunction> {
    match m {
        Multiplier::Operators(ops) => {
            if ops.len() != f.intervals() {
                return invalid(format!("{} operators for {} intervals", ops.len(), f.intervals()));
            }
            let rows = ops[0].nrows();
            if ops.iter().any(|o| o.ncols() != f.dim() || o.nrows() != rows) {
                return invalid("operator dimensions do not match the function");
            }
            f.map_values(|i, v| &ops[i] * v)
        }
        Multiplier::Constant(op) => {
            if op.ncols() != f.dim() {
                return invalid("operator dimensions do not match the function");
            }
            f.map_values(|_, v| op * v)
        }
        Multiplier::Scalar(s) => {
            let g = f.grid().clone();
            f.map_values(|i, v| {
                let (a, b) = g.interval(i);
                v * s(a, b)
            })
        }
    }
}
