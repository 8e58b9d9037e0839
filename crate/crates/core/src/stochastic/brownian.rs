use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::gamma::{TimeGrid, Weight};
use crate::rng::{self, tag};

/// Dyadic depth below which knots are placed by linear interpolation.
pub const MAX_DEPTH: u32 = 48;
const WORDS_PER_NORMAL: u128 = 4;

/// Box-Muller from two 53-bit uniforms; a fixed word count per draw keeps
/// word positions addressable.
fn box_muller(r: &mut ChaCha8Rng) -> f64 {
    let u1 = ((r.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
    let u2 = (r.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Standard normals addressed by `(sample, node, component)`.
struct NodeNormals {
    rng: ChaCha8Rng,
    m: usize,
}

impl NodeNormals {
    fn new(seed: u64, sample: u64, m: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng::mix(seed, tag::BROWNIAN));
        rng.set_stream(sample);
        NodeNormals { rng, m }
    }

    fn draw(&mut self, node: u64, out: &mut [f64]) {
        self.rng.set_word_pos(node as u128 * self.m as u128 * WORDS_PER_NORMAL);
        for v in out.iter_mut() {
            *v = box_muller(&mut self.rng);
        }
    }
}

/// Cylindrical Brownian motion on `H = ℝ^m`, sampled at the knots of a grid
/// by Lévy's midpoint construction on `[0, T]`. The normal attached to a
/// dyadic node depends only on `(seed, sample, node)`, so grids that share
/// knots share paths.
#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalBM {
    grid: TimeGrid,
    noise_dim: usize,
    seed: u64,
    /// Per sample, an m×N matrix of increments over the grid intervals.
    increments: Vec<DMatrix<f64>>,
}

struct Tree<'a> {
    knots: &'a [f64],
    horizon: f64,
    normals: NodeNormals,
    out: Vec<Option<Vec<f64>>>,
    tol: f64,
}

impl Tree<'_> {
    /// Fills knots in `(a, b)` where the interval is node `(level, pos)`.
    fn fill(&mut self, range: (usize, usize), level: u32, pos: u64, wa: &[f64], wb: &[f64]) {
        let (lo, hi) = range;
        if lo >= hi {
            return;
        }
        let scale = (1u64 << level) as f64;
        let a = self.horizon * pos as f64 / scale;
        let b = self.horizon * (pos + 1) as f64 / scale;
        let m = wa.len();
        if level >= MAX_DEPTH {
            for k in lo..hi {
                let s = (self.knots[k] - a) / (b - a);
                self.out[k] = Some((0..m).map(|j| wa[j] + s * (wb[j] - wa[j])).collect());
            }
            return;
        }
        let mid = self.horizon * (2 * pos + 1) as f64 / (2.0 * scale);
        let node = (1u64 << (level + 1)) + 2 * pos + 1;
        let mut z = vec![0.0; m];
        self.normals.draw(node, &mut z);
        let sd = (0.25 * (b - a)).sqrt();
        let wm: Vec<f64> = (0..m).map(|j| 0.5 * (wa[j] + wb[j]) + sd * z[j]).collect();
        let split = lo + self.knots[lo..hi].partition_point(|t| *t < mid - self.tol);
        let mut right = split;
        while right < hi && (self.knots[right] - mid).abs() <= self.tol {
            self.out[right] = Some(wm.clone());
            right += 1;
        }
        self.fill((lo, split), level + 1, 2 * pos, wa, &wm);
        self.fill((right, hi), level + 1, 2 * pos + 1, &wm, wb);
    }
}

fn path(knots: &[f64], m: usize, seed: u64, sample: u64) -> Vec<Vec<f64>> {
    let horizon = *knots.last().expect("non-empty grid");
    let tol = 1e-12 * horizon;
    let mut normals = NodeNormals::new(seed, sample, m);
    let mut end = vec![0.0; m];
    normals.draw(1, &mut end);
    for v in end.iter_mut() {
        *v *= horizon.sqrt();
    }
    let mut out = vec![None; knots.len()];
    let mut lo = 0;
    while lo < knots.len() && knots[lo] <= tol {
        out[lo] = Some(vec![0.0; m]);
        lo += 1;
    }
    let last = knots.len() - 1;
    out[last] = Some(end.clone());
    let mut tree = Tree { knots, horizon, normals, out, tol };
    tree.fill((lo, last), 0, 0, &vec![0.0; m], &end);
    tree.out.into_iter().map(|v| v.expect("every knot visited")).collect()
}

impl CylindricalBM {
    pub fn new(grid: &TimeGrid, noise_dim: usize, samples: usize, seed: u64) -> Result<Self> {
        if noise_dim == 0 || samples == 0 {
            return invalid("noise dimension and sample count must be positive");
        }
        if grid.weight() != Weight::Lebesgue || grid.start() < 0.0 {
            return invalid("Brownian grids carry Lebesgue measure and start at t ≥ 0");
        }
        let knots = grid.knots();
        let n = grid.len();
        let increments = (0..samples)
            .into_par_iter()
            .map(|s| {
                let w = path(knots, noise_dim, seed, s as u64);
                DMatrix::from_fn(noise_dim, n, |j, i| w[i + 1][j] - w[i][j])
            })
            .collect();
        Ok(CylindricalBM { grid: grid.clone(), noise_dim, seed, increments })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn samples(&self) -> usize {
        self.increments.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// m×N increments of one sample.
    pub fn increments(&self, sample: usize) -> &DMatrix<f64> {
        &self.increments[sample]
    }

    /// `W(t_k) − W(t_0)` at every knot of one sample, as m×(N+1).
    pub fn path(&self, sample: usize) -> DMatrix<f64> {
        let inc = &self.increments[sample];
        let mut p = DMatrix::zeros(self.noise_dim, inc.ncols() + 1);
        for i in 0..inc.ncols() {
            let next = p.column(i) + inc.column(i);
            p.set_column(i + 1, &next);
        }
        p
    }
}

/// Extra normals for the exact Ornstein-Uhlenbeck update, keyed by
/// `(seed, sample, interval)`.
pub(crate) fn ou_normals(seed: u64, sample: usize, interval: usize, out: &mut [f64]) {
    let mut r = rng::stream(seed, tag::OU_EXTRA, sample as u64);
    r.set_word_pos(interval as u128 * out.len() as u128 * WORDS_PER_NORMAL);
    for v in out.iter_mut() {
        *v = box_muller(&mut r);
    }
}
