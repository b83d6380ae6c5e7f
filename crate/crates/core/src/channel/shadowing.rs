use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::{PositionGrid, ReceiverConfig};
use crate::error::{invalid, Error, Result};
use crate::rng::seeded_rng;

/// Largest grid the exact Cholesky sampler accepts.
pub const MAX_EXACT_POSITIONS: usize = 6400;

const PIVOT_TOL: f64 = 1e-10;
const JITTER: f64 = 1e-10;

/// Shadowing covariance in dB^2 between every pair of grid positions:
/// `sigma^2 * exp(-|p_i - p_j| / d_ref)`.
pub fn shadowing_covariance(grid: &PositionGrid, receiver: &ReceiverConfig) -> DMatrix<f64> {
    let pts = grid.positions();
    let var = receiver.sigma_sh_db * receiver.sigma_sh_db;
    let n = pts.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            var
        } else {
            var * (-super::distance(&pts[i], &pts[j]) / receiver.d_ref).exp()
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldMethod {
    /// Dense Cholesky factor of the full correlation matrix.
    Exact,
    /// Sequential conditional sampling on the `neighbors` nearest previously
    /// drawn grid points. Approximate; meant for grids too large for `Exact`.
    NearestNeighbor { neighbors: usize },
}

/// One draw of the shadowing attenuation (dB) at every grid position.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowingField {
    pub receiver: ReceiverConfig,
    pub values: Vec<f64>,
    pub seed: u64,
}

struct ConditionalStep {
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    std: f64,
}

enum Factor {
    /// Row-packed lower triangle: row `i` occupies `i*(i+1)/2 .. i*(i+1)/2 + i + 1`.
    Exact(Vec<f64>),
    NearestNeighbor(Vec<ConditionalStep>),
}

/// Reusable sampler of unit-variance exponentially correlated fields over a
/// fixed set of positions. Fields for different receivers share the factor
/// and differ only in scale and seed.
pub struct FieldSampler {
    len: usize,
    d_ref: f64,
    factor: Factor,
}

impl std::fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let method = match &self.factor {
            Factor::Exact(_) => "exact",
            Factor::NearestNeighbor(_) => "nearest-neighbor",
        };
        f.debug_struct("FieldSampler")
            .field("len", &self.len)
            .field("d_ref", &self.d_ref)
            .field("method", &method)
            .finish()
    }
}

impl FieldSampler {
    pub fn new(grid: &PositionGrid, d_ref: f64, method: FieldMethod) -> Result<Self> {
        match method {
            FieldMethod::Exact => Self::exact(&grid.positions(), d_ref),
            FieldMethod::NearestNeighbor { neighbors } => Self::nearest_neighbor(grid, d_ref, neighbors),
        }
    }

    /// Exact sampler over arbitrary positions.
    pub fn exact(points: &[[f64; 3]], d_ref: f64) -> Result<Self> {
        if !(d_ref > 0.0) {
            return Err(invalid("d_ref", format!("must be positive, got {d_ref}")));
        }
        if points.is_empty() {
            return Err(invalid("positions", "at least one position is required"));
        }
        if points.len() > MAX_EXACT_POSITIONS {
            return Err(Error::GridTooLarge {
                positions: points.len(),
                limit: MAX_EXACT_POSITIONS,
            });
        }
        let corr = |i: usize, j: usize| {
            if i == j {
                1.0
            } else {
                (-super::distance(&points[i], &points[j]) / d_ref).exp()
            }
        };
        let lower = match cholesky_packed(points.len(), &corr, 0.0) {
            Ok(l) => l,
            Err(_) => cholesky_packed(points.len(), &corr, JITTER).map_err(|_| {
                let m = DMatrix::from_fn(points.len(), points.len(), corr);
                let min_eigenvalue = m.symmetric_eigenvalues().min();
                Error::Factorization { min_eigenvalue }
            })?,
        };
        Ok(Self {
            len: points.len(),
            d_ref,
            factor: Factor::Exact(lower),
        })
    }

    fn nearest_neighbor(grid: &PositionGrid, d_ref: f64, k: usize) -> Result<Self> {
        if !(d_ref > 0.0) {
            return Err(invalid("d_ref", format!("must be positive, got {d_ref}")));
        }
        if k == 0 {
            return Err(invalid("neighbors", "must be at least 1"));
        }
        let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
        let s = grid.spacing();
        let w = (k as f64).sqrt().ceil() as isize + 1;
        let mut cache: HashMap<Vec<(isize, isize)>, (Vec<f64>, f64)> = HashMap::new();
        let mut steps = Vec::with_capacity(grid.len());
        for i in 0..grid.len() as isize {
            let (r, c) = (i / nx, i % nx);
            let mut cand: Vec<(isize, isize)> = Vec::new();
            for dr in -w..=0 {
                for dc in -w..=w {
                    let (rr, cc) = (r + dr, c + dc);
                    if rr < 0 || rr >= ny || cc < 0 || cc >= nx {
                        continue;
                    }
                    if rr * nx + cc >= i {
                        continue;
                    }
                    cand.push((dr, dc));
                }
            }
            cand.sort_by(|a, b| {
                let da = a.0 * a.0 + a.1 * a.1;
                let db = b.0 * b.0 + b.1 * b.1;
                da.cmp(&db).then(a.cmp(b))
            });
            cand.truncate(k);
            let (weights, std) = cache
                .entry(cand.clone())
                .or_insert_with(|| conditional_weights(&cand, s, d_ref))
                .clone();
            let neighbors = cand
                .iter()
                .map(|&(dr, dc)| ((r + dr) * nx + (c + dc)) as usize)
                .collect();
            steps.push(ConditionalStep {
                neighbors,
                weights,
                std,
            });
        }
        Ok(Self {
            len: grid.len(),
            d_ref,
            factor: Factor::NearestNeighbor(steps),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn d_ref(&self) -> f64 {
        self.d_ref
    }

    /// Unit-variance field drawn from `rng`.
    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.len).map(|_| rng.sample(StandardNormal)).collect();
        match &self.factor {
            Factor::Exact(lower) => (0..self.len)
                .map(|i| {
                    let start = i * (i + 1) / 2;
                    dot(&lower[start..start + i + 1], &z[..i + 1])
                })
                .collect(),
            Factor::NearestNeighbor(steps) => {
                let mut x = vec![0.0; self.len];
                for (i, step) in steps.iter().enumerate() {
                    let mean: f64 = step
                        .neighbors
                        .iter()
                        .zip(&step.weights)
                        .map(|(&j, &w)| w * x[j])
                        .sum();
                    x[i] = mean + step.std * z[i];
                }
                x
            }
        }
    }

    /// Field for `receiver`, deterministic in `seed`.
    pub fn field(&self, receiver: &ReceiverConfig, seed: u64) -> Result<ShadowingField> {
        if receiver.d_ref != self.d_ref {
            return Err(invalid(
                "d_ref",
                format!("receiver uses {} m but sampler was built for {} m", receiver.d_ref, self.d_ref),
            ));
        }
        let mut rng = seeded_rng(seed);
        let values = self
            .sample_unit(&mut rng)
            .into_iter()
            .map(|v| v * receiver.sigma_sh_db)
            .collect();
        Ok(ShadowingField {
            receiver: receiver.clone(),
            values,
            seed,
        })
    }
}

/// One exact draw of the shadowing field for `receiver` over `grid`.
pub fn sample_shadowing_field(grid: &PositionGrid, receiver: &ReceiverConfig, seed: u64) -> Result<ShadowingField> {
    FieldSampler::new(grid, receiver.d_ref, FieldMethod::Exact)?.field(receiver, seed)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Packed lower Cholesky factor of a positive semi-definite matrix given by
/// `entry`. Pivots within `PIVOT_TOL` of zero produce zero columns, so exactly
/// duplicated positions yield identical rows. Returns the offending pivot on
/// failure.
fn cholesky_packed(n: usize, entry: &dyn Fn(usize, usize) -> f64, jitter: f64) -> std::result::Result<Vec<f64>, f64> {
    let mut l = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        let ri = i * (i + 1) / 2;
        for j in 0..=i {
            let rj = j * (j + 1) / 2;
            let mut s = entry(i, j);
            if i == j {
                s += jitter;
            }
            s -= dot(&l[ri..ri + j], &l[rj..rj + j]);
            if i == j {
                l[ri + j] = if s > PIVOT_TOL {
                    s.sqrt()
                } else if s >= -PIVOT_TOL {
                    0.0
                } else {
                    return Err(s);
                };
            } else {
                let d = l[rj + j];
                l[ri + j] = if d == 0.0 { 0.0 } else { s / d };
            }
        }
    }
    Ok(l)
}

fn conditional_weights(offsets: &[(isize, isize)], spacing: f64, d_ref: f64) -> (Vec<f64>, f64) {
    if offsets.is_empty() {
        return (Vec::new(), 1.0);
    }
    let k = offsets.len();
    let corr = |a: (isize, isize), b: (isize, isize)| {
        let dr = (a.0 - b.0) as f64 * spacing;
        let dc = (a.1 - b.1) as f64 * spacing;
        (-(dr * dr + dc * dc).sqrt() / d_ref).exp()
    };
    let cnn = DMatrix::from_fn(k, k, |i, j| corr(offsets[i], offsets[j]));
    let c = DVector::from_fn(k, |i, _| corr(offsets[i], (0, 0)));
    let w = match cnn.clone().cholesky() {
        Some(ch) => ch.solve(&c),
        None => cnn.pseudo_inverse(1e-12).expect("pseudo-inverse of a symmetric matrix") * &c,
    };
    let var = (1.0 - c.dot(&w)).max(0.0);
    (w.iter().copied().collect(), var.sqrt())
}
