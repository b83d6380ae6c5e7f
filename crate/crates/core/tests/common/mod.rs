#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use skg_core::capacity::ChannelMatrix;

/// Mutual information in bits, computed from scratch.
pub fn mi_bits(w: &[Vec<f64>], p: &[f64]) -> f64 {
    let m = w[0].len();
    let mut q = vec![0.0; m];
    for (row, &px) in w.iter().zip(p) {
        for (qy, &wy) in q.iter_mut().zip(row) {
            *qy += px * wy;
        }
    }
    let mut total = 0.0;
    for (row, &px) in w.iter().zip(p) {
        if px <= 0.0 {
            continue;
        }
        for (&wy, &qy) in row.iter().zip(&q) {
            if wy > 0.0 {
                total += px * wy * (wy / qy).log2();
            }
        }
    }
    total
}

/// Per-input divergences D(W_x || q) in bits.
fn divergences(w: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    let m = w[0].len();
    let mut q = vec![0.0; m];
    for (row, &px) in w.iter().zip(p) {
        for (qy, &wy) in q.iter_mut().zip(row) {
            *qy += px * wy;
        }
    }
    w.iter()
        .map(|row| {
            row.iter()
                .zip(&q)
                .filter(|(&wy, _)| wy > 0.0)
                .map(|(&wy, &qy)| wy * (wy / qy).log2())
                .sum()
        })
        .collect()
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projected gradient ascent on I(p) with Armijo backtracking. Stops when the
/// duality bracket `max_x D_x - I` drops below `tol` bits.
pub fn projected_gradient_capacity(w: &[Vec<f64>], tol: f64, max_iter: usize) -> (f64, Vec<f64>) {
    let n = w.len();
    let mut p = vec![1.0 / n as f64; n];
    let mut f = mi_bits(w, &p);
    let mut step = 1.0;
    for _ in 0..max_iter {
        let d = divergences(w, &p);
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper - f < tol {
            break;
        }
        // dI/dp_x = D_x - 1/ln2; D_x is infinite when x alone feeds some output
        let grad: Vec<f64> = d.iter().map(|&dx| dx.min(64.0) - std::f64::consts::LOG2_E).collect();
        step *= 2.0;
        loop {
            let cand: Vec<f64> = p.iter().zip(&grad).map(|(&px, &g)| px + step * g).collect();
            let cand = project_simplex(&cand);
            let fc = mi_bits(w, &cand);
            let moved: f64 = cand.iter().zip(&p).zip(&grad).map(|((c, p), g)| g * (c - p)).sum();
            if fc >= f + 1e-4 * moved || step < 1e-14 {
                if fc >= f {
                    p = cand;
                    f = fc;
                }
                break;
            }
            step *= 0.5;
        }
    }
    (f, p)
}

/// Best mutual information over `samples` uniform Dirichlet draws.
pub fn dirichlet_search(w: &[Vec<f64>], samples: usize, rng: &mut impl Rng) -> f64 {
    let n = w.len();
    let mut best: f64 = 0.0;
    let mut p = vec![0.0; n];
    for _ in 0..samples {
        for x in p.iter_mut() {
            *x = Exp1.sample(rng);
        }
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        best = best.max(mi_bits(w, &p));
    }
    best
}

/// A random channel with up to 8 inputs and 16 outputs; about a fifth of the
/// entries are zero.
pub fn random_channel(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rng.random_range(2..=8);
    let m = rng.random_range(2..=16);
    (0..n)
        .map(|_| loop {
            let row: Vec<f64> = (0..m)
                .map(|_| {
                    if rng.random::<f64>() < 0.2 {
                        0.0
                    } else {
                        Exp1.sample(rng)
                    }
                })
                .collect();
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                break row.into_iter().map(|v| v / s).collect();
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(w: &[Vec<f64>]) -> ChannelMatrix {
    ChannelMatrix::from_rows(w).unwrap()
}

pub fn binary_entropy(p: f64) -> f64 {
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}
