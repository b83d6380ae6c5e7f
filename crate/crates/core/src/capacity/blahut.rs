//! Alternating maximization (Blahut-Arimoto) for the capacity of a discrete
//! memoryless channel.
//!
//! Each iteration evaluates `D_x = KL(W_x || q)` against the current output
//! law `q`. The pair `sum_x p_x D_x <= C <= max_x D_x` brackets the capacity;
//! the loop stops once the bracket is narrower than the tolerance. Plain
//! alternation closes the upper side of the bracket slowly when many inputs
//! are nearly equivalent, so after a warm-up the estimate is handed to an
//! interior-point refinement and certified against the same bracket.

use std::f64::consts::LN_2;

use super::matrix::{mix, ChannelMatrix};
use super::refine::refine;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Bracket width at which to stop, in bits.
    pub tol_bits: f64,
    pub max_iter: usize,
    /// Alternating-maximization sweeps before switching to interior-point
    /// refinement. `None` runs alternating maximization alone.
    pub refine_after: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_bits: 1e-9,
            max_iter: 100_000,
            refine_after: Some(200),
        }
    }
}

impl SolverOptions {
    /// Plain alternating maximization.
    pub fn alternating(tol_bits: f64, max_iter: usize) -> Self {
        Self {
            tol_bits,
            max_iter,
            refine_after: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub distribution: Vec<f64>,
    /// Mutual information of `distribution`, in bits.
    pub capacity_bits: f64,
    /// Final `upper - lower` capacity bracket, in bits.
    pub gap_bits: f64,
    /// Alternating-maximization sweeps plus Newton steps.
    pub iterations: usize,
    /// False when `max_iter` ran out before the bracket closed.
    pub converged: bool,
}

struct Bracket {
    d: Vec<f64>,
    ln_q: Vec<f64>,
    neg_h: Vec<f64>,
}

impl Bracket {
    fn new(channel: &ChannelMatrix) -> Self {
        Self {
            d: vec![0.0; channel.inputs()],
            ln_q: vec![0.0; channel.outputs()],
            // -H(W_x) in nats, so that D_x = neg_h[x] - sum_y W_xy ln q_y
            neg_h: channel
                .rows()
                .map(|r| r.iter().filter(|&&w| w > 0.0).map(|&w| w * w.ln()).sum())
                .collect(),
        }
    }

    /// `(lower, upper)` in nats; leaves `D_x` in `self.d`.
    fn eval(&mut self, channel: &ChannelMatrix, p: &[f64]) -> (f64, f64) {
        let q = mix(channel, p);
        for (l, &v) in self.ln_q.iter_mut().zip(&q) {
            *l = if v > 0.0 { v.ln() } else { 0.0 };
        }
        for (x, row) in channel.rows().enumerate() {
            let cross: f64 = row
                .iter()
                .zip(&self.ln_q)
                .filter(|(&w, _)| w > 0.0)
                .map(|(&w, &l)| w * l)
                .sum();
            self.d[x] = (self.neg_h[x] - cross).max(0.0);
        }
        let lower: f64 = p.iter().zip(&self.d).map(|(p, d)| p * d).sum();
        let upper = self.d.iter().copied().fold(0.0, f64::max);
        (lower, upper.max(lower))
    }
}

/// Capacity-achieving input distribution of `channel`.
pub fn optimize_distribution(channel: &ChannelMatrix, opts: &SolverOptions) -> Optimum {
    let n = channel.inputs();
    let mut p = vec![1.0 / n as f64; n];
    let mut bracket = Bracket::new(channel);
    let tol = opts.tol_bits * LN_2;
    let mut iterations = 0;
    let mut refine_at = opts.refine_after;
    let done = |p: Vec<f64>, lower: f64, upper: f64, iterations| Optimum {
        distribution: p,
        capacity_bits: lower / LN_2,
        gap_bits: (upper - lower) / LN_2,
        iterations,
        converged: upper - lower < tol,
    };
    loop {
        let (lower, upper) = bracket.eval(channel, &p);
        if upper - lower < tol || iterations >= opts.max_iter {
            return done(p, lower, upper, iterations);
        }
        if refine_at == Some(iterations) {
            refine_at = None;
            let mut best = (lower, upper, None);
            let mut check = Bracket::new(channel);
            let refined = refine(channel, &p, upper - lower, opts.max_iter - iterations, |cand| {
                let (lo, up) = check.eval(channel, cand);
                if up - lo < best.1 - best.0 {
                    best = (lo, up, Some(cand.to_vec()));
                }
                up - lo < tol
            });
            if let (Some(steps), (lo, up, Some(cand))) = (refined, best) {
                return done(cand, lo, up, iterations + steps);
            }
            // numerical trouble in the barrier: carry on alternating
            continue;
        }
        let d = &bracket.d;
        let mut total = 0.0;
        for (p, &dx) in p.iter_mut().zip(d) {
            *p *= (dx - upper).exp();
            total += *p;
        }
        p.iter_mut().for_each(|v| *v /= total);
        iterations += 1;
    }
}
