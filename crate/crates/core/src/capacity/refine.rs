//! Interior-point refinement of a capacity estimate.
//!
//! Works on the dual `C = min_q max_x D(W_x || q)` in log-output coordinates
//! `u = ln q`, where every divergence `D_x = -H(W_x) - W_x . u` is linear and
//! the simplex becomes the single convex constraint `logsumexp(u) <= 0`. The
//! barrier multipliers of the divergence constraints converge to a
//! capacity-achieving input distribution.

use nalgebra::{DMatrix, DVector};

use super::matrix::ChannelMatrix;

/// Output cells whose largest entry is below this are left out of the barrier
/// problem. Their contribution to any divergence is far below solver tolerance.
const NEGLIGIBLE_COLUMN: f64 = 1e-15;

struct Problem {
    /// Reduced channel, rows x kept columns.
    w: Vec<Vec<f64>>,
    /// Row entropies in nats over the full row.
    h: Vec<f64>,
    cols: usize,
}

impl Problem {
    fn s(&self, u: &[f64], t: f64) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.h)
            .map(|(row, h)| t + h + row.iter().zip(u).map(|(w, u)| w * u).sum::<f64>())
            .collect()
    }

}

fn log_sum_exp(u: &[f64]) -> f64 {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + u.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Refines `start` towards a capacity-achieving distribution of `channel`.
/// `gap_hint` is the current capacity bracket width in nats. `certify` returns
/// true once a candidate is good enough, which stops the refinement; the
/// number of Newton steps taken is returned in that case.
pub(crate) fn refine(
    channel: &ChannelMatrix,
    start: &[f64],
    gap_hint: f64,
    max_steps: usize,
    mut certify: impl FnMut(&[f64]) -> bool,
) -> Option<usize> {
    let n = channel.inputs();
    let keep: Vec<usize> = (0..channel.outputs())
        .filter(|&y| channel.rows().any(|r| r[y] > NEGLIGIBLE_COLUMN))
        .collect();
    let prob = Problem {
        w: channel.rows().map(|r| keep.iter().map(|&y| r[y]).collect()).collect(),
        h: channel
            .rows()
            .map(|r| -r.iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum::<f64>())
            .collect(),
        cols: keep.len(),
    };
    let dim = prob.cols + 1;

    // strictly feasible start from the output law of `start`
    let mut q: Vec<f64> = vec![0.0; prob.cols];
    for (row, &p) in prob.w.iter().zip(start) {
        for (qy, w) in q.iter_mut().zip(row) {
            *qy += p * w;
        }
    }
    let total: f64 = q.iter().sum();
    let mut u: Vec<f64> = q.iter().map(|v| (v / total).max(1e-300).ln() - 1e-3).collect();
    let slack = gap_hint.max(1e-6);
    let d_max = prob
        .w
        .iter()
        .zip(&prob.h)
        .map(|(row, h)| -h - row.iter().zip(&u).map(|(w, u)| w * u).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let t = d_max + slack;
    let mut tau = (n + 1) as f64 / slack;
    let mut steps = 0;

    let mut s = prob.s(&u, t);
    if s.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mut r = -log_sum_exp(&u);
    let mut grad = DVector::<f64>::zeros(dim);
    let mut hess = DMatrix::<f64>::zeros(dim, dim);
    for _outer in 0..40 {
        // centering; slacks are updated incrementally because at large tau
        // they are far smaller than the rounding error of recomputing them
        while steps < max_steps {
            let lse = log_sum_exp(&u);
            let sm: Vec<f64> = u.iter().map(|v| (v - lse).exp()).collect();
            grad.fill(0.0);
            hess.fill(0.0);
            grad[prob.cols] = tau;
            for (row, &sx) in prob.w.iter().zip(&s) {
                let inv = 1.0 / sx;
                let inv2 = inv * inv;
                for a in 0..prob.cols {
                    let wa = row[a];
                    if wa == 0.0 {
                        continue;
                    }
                    grad[a] -= wa * inv;
                    for b in a..prob.cols {
                        hess[(a, b)] += wa * row[b] * inv2;
                    }
                    hess[(a, prob.cols)] += wa * inv2;
                }
                grad[prob.cols] -= inv;
                hess[(prob.cols, prob.cols)] += inv2;
            }
            for a in 0..prob.cols {
                grad[a] += sm[a] / r;
                for b in a..prob.cols {
                    let lse_h = if a == b { sm[a] } else { 0.0 } - sm[a] * sm[b];
                    hess[(a, b)] += lse_h / r + sm[a] * sm[b] / (r * r);
                }
            }
            for a in 0..dim {
                for b in 0..a {
                    hess[(a, b)] = hess[(b, a)];
                }
            }
            let step = solve_spd(&hess, &grad)?;
            steps += 1;
            let decrement = grad.dot(&step);
            if !(decrement >= 0.0) {
                return None;
            }
            if decrement < 1e-10 {
                break;
            }
            // moving along -step
            let du: Vec<f64> = (0..prob.cols).map(|i| -step[i]).collect();
            let dt = -step[prob.cols];
            let ds: Vec<f64> =
                prob.w.iter().map(|row| dt + row.iter().zip(&du).map(|(w, d)| w * d).sum::<f64>()).collect();
            let mut alpha = 1.0;
            let accepted = loop {
                let dlse = sm.iter().zip(&du).map(|(p, d)| p * (alpha * d).exp_m1()).sum::<f64>().ln_1p();
                let feasible = r - dlse > 0.0 && s.iter().zip(&ds).all(|(s, d)| s + alpha * d > 0.0);
                if feasible {
                    let change = tau * alpha * dt
                        - s.iter().zip(&ds).map(|(s, d)| (alpha * d / s).ln_1p()).sum::<f64>()
                        - (-dlse / r).ln_1p();
                    if change <= -0.25 * alpha * decrement {
                        u.iter_mut().zip(&du).for_each(|(u, d)| *u += alpha * d);
                        s.iter_mut().zip(&ds).for_each(|(s, d)| *s += alpha * d);
                        r -= dlse;
                        break true;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    break false;
                }
            };
            if !accepted {
                break;
            }
        }
        if steps >= max_steps {
            return None;
        }
        let mut lambda: Vec<f64> = s.iter().map(|sx| 1.0 / (tau * sx)).collect();
        let sum: f64 = lambda.iter().sum();
        lambda.iter_mut().for_each(|l| *l /= sum);
        if certify(&lambda) {
            return Some(steps);
        }
        tau *= 10.0;
    }
    None
}

fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut m = h.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            let x = ch.solve(g);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        ridge = if ridge == 0.0 { scale * 1e-14 } else { ridge * 100.0 };
    }
    None
}
