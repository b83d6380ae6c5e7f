use std::f64::consts::{LN_2, SQRT_2};

use statrs::function::erf::erfc;

use super::quantizer::Quantizer;
use crate::channel::{ChannelParams, GainMap};
use crate::error::{invalid, Error, Result};
use crate::estimation::estimation_sigma;

/// Row-stochastic matrix of a discrete memoryless channel, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelMatrix {
    inputs: usize,
    outputs: usize,
    data: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-9;

impl ChannelMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let inputs = rows.len();
        if inputs == 0 {
            return Err(invalid("channel", "at least one input row is required"));
        }
        let outputs = rows[0].len();
        if outputs == 0 {
            return Err(invalid("channel", "at least one output column is required"));
        }
        let mut data = Vec::with_capacity(inputs * outputs);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != outputs {
                return Err(Error::DimensionMismatch {
                    what: "channel row length",
                    expected: outputs,
                    got: r.len(),
                });
            }
            if r.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(invalid("channel", format!("row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(invalid("channel", format!("row {i} sums to {s}")));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { inputs, outputs, data })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.outputs..(i + 1) * self.outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.outputs)
    }
}

/// Channel from the positions of one isohypse to Bob's quantized levels.
///
/// Positions whose Bob expected gains agree to within `step / 1000` share one
/// row; `groups[r]` lists the positions behind row `r`.
#[derive(Clone, Debug)]
pub struct ClassChannel {
    pub matrix: ChannelMatrix,
    pub groups: Vec<Vec<usize>>,
    /// Estimation noise standard deviation of each row.
    pub sigma: Vec<f64>,
    pub quantizer: Quantizer,
    /// Positions folded into another row because of colliding Bob gains.
    pub collisions: usize,
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Gaussian tail probability `Q(z) = P(Z > z)`.
pub fn q_function(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Probability of each quantizer cell for an estimate `N(mean, sigma^2)`.
pub fn quantized_gaussian_row(mean: f64, sigma: f64, quantizer: &Quantizer) -> Vec<f64> {
    let levels = quantizer.levels();
    let mut row = vec![0.0; levels];
    if levels == 1 {
        row[0] = 1.0;
        return row;
    }
    if sigma == 0.0 || quantizer.step() == 0.0 {
        row[quantizer.quantize(mean)] = 1.0;
        return row;
    }
    let z: Vec<f64> = (0..levels - 1)
        .map(|i| (quantizer.boundary(i) - mean) / sigma)
        .collect();
    for (i, p) in row.iter_mut().enumerate() {
        let lo = if i == 0 { f64::NEG_INFINITY } else { z[i - 1] };
        let hi = if i == levels - 1 { f64::INFINITY } else { z[i] };
        // Evaluate on the side of the mean where the tails do not cancel.
        let v = if lo >= 0.0 {
            q_function(lo) - q_function(hi)
        } else if hi <= 0.0 {
            std_normal_cdf(hi) - std_normal_cdf(lo)
        } else {
            1.0 - std_normal_cdf(lo) - q_function(hi)
        };
        *p = v.max(0.0);
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= s);
    row
}

/// Builds the quantized-gain channel for `members` under `quantizer`.
pub fn channel_matrix(
    members: &[usize],
    bob_map: &GainMap,
    quantizer: &Quantizer,
    ch: &ChannelParams,
    pilots: u32,
) -> Result<ClassChannel> {
    if members.is_empty() {
        return Err(invalid("class", "isohypse has no positions"));
    }
    if let Some(&bad) = members.iter().find(|&&p| p >= bob_map.len()) {
        return Err(invalid("class", format!("position {bad} outside the Bob map")));
    }
    let mut sorted = members.to_vec();
    sorted.sort_by(|&a, &b| bob_map.m[a].total_cmp(&bob_map.m[b]).then(a.cmp(&b)));
    let resolution = quantizer.step() / 1000.0;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for p in sorted {
        match groups.last_mut() {
            Some(g) if bob_map.m[p] - bob_map.m[*g.last().unwrap()] <= resolution => g.push(p),
            _ => groups.push(vec![p]),
        }
    }
    let collisions = members.len() - groups.len();
    let mut rows = Vec::with_capacity(groups.len());
    let mut sigma = Vec::with_capacity(groups.len());
    for g in &groups {
        let n = g.len() as f64;
        let mean = g.iter().map(|&p| bob_map.m[p]).sum::<f64>() / n;
        let s = g
            .iter()
            .map(|&p| estimation_sigma(bob_map.g[p], ch.kappa, ch.noise_var, pilots))
            .sum::<f64>()
            / n;
        rows.push(quantized_gaussian_row(mean, s, quantizer));
        sigma.push(s);
    }
    Ok(ClassChannel {
        matrix: ChannelMatrix::from_rows(&rows)?,
        groups,
        sigma,
        quantizer: *quantizer,
        collisions,
    })
}

fn check_dist(channel: &ChannelMatrix, dist: &[f64]) -> Result<()> {
    if dist.len() != channel.inputs() {
        return Err(Error::DimensionMismatch {
            what: "distribution length vs channel inputs",
            expected: channel.inputs(),
            got: dist.len(),
        });
    }
    Ok(())
}

/// Output distribution `P(q) = sum_p P(q|p) P(p)`.
pub fn output_pmd(channel: &ChannelMatrix, dist: &[f64]) -> Result<Vec<f64>> {
    check_dist(channel, dist)?;
    Ok(mix(channel, dist))
}

pub(crate) fn mix(channel: &ChannelMatrix, dist: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; channel.outputs()];
    for (row, &p) in channel.rows().zip(dist) {
        if p == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(row) {
            *o += p * w;
        }
    }
    out
}

/// Entropy in bits, with `0 log 0 = 0`.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>() / LN_2
}

/// `I(p; q) = H(q) - H(q | p)` in bits.
pub fn mutual_information(channel: &ChannelMatrix, dist: &[f64]) -> Result<f64> {
    check_dist(channel, dist)?;
    let h_out = entropy_bits(&mix(channel, dist));
    let h_cond: f64 = channel
        .rows()
        .zip(dist)
        .filter(|(_, &p)| p > 0.0)
        .map(|(row, &p)| p * entropy_bits(row))
        .sum();
    Ok((h_out - h_cond).max(0.0))
}
