//! Secret-key capacity of movement restricted to one isohypse, and the
//! outer search over isohypses.

mod blahut;
mod matrix;
mod quantizer;
mod refine;

use rayon::prelude::*;

pub use blahut::{optimize_distribution, Optimum, SolverOptions};
pub use matrix::{
    channel_matrix, entropy_bits, mutual_information, output_pmd, q_function, quantized_gaussian_row, ChannelMatrix,
    ClassChannel,
};
pub use quantizer::Quantizer;

use crate::channel::{ChannelParams, GainMap};
use crate::error::{invalid, Result};
use crate::partition::{largest_classes, IsohypsePartition};

/// Probability of each position of one isohypse.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionDistribution {
    pub support: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl PositionDistribution {
    pub fn new(support: Vec<usize>, probabilities: Vec<f64>) -> Result<Self> {
        if support.len() != probabilities.len() || support.is_empty() {
            return Err(invalid("distribution", "support and probabilities must be non-empty and equally long"));
        }
        if probabilities.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p)) {
            return Err(invalid("distribution", "probabilities must lie in [0, 1]"));
        }
        let s: f64 = probabilities.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(invalid("distribution", format!("probabilities sum to {s}")));
        }
        Ok(Self { support, probabilities })
    }

    pub fn uniform(support: Vec<usize>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn point(position: usize) -> Self {
        Self {
            support: vec![position],
            probabilities: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Spreads each row weight evenly over the positions behind the row.
    pub fn from_groups(groups: &[Vec<usize>], row_weights: &[f64]) -> Self {
        let mut pairs: Vec<(usize, f64)> = groups
            .iter()
            .zip(row_weights)
            .flat_map(|(g, &w)| g.iter().map(move |&p| (p, w / g.len() as f64)))
            .collect();
        pairs.sort_by_key(|&(p, _)| p);
        let (support, probabilities) = pairs.into_iter().unzip();
        Self { support, probabilities }
    }

    /// Row weights of a class channel induced by this distribution.
    pub fn row_weights(&self, groups: &[Vec<usize>]) -> Result<Vec<f64>> {
        let lookup: std::collections::HashMap<usize, f64> =
            self.support.iter().copied().zip(self.probabilities.iter().copied()).collect();
        let mut used = 0;
        let w = groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|p| {
                        lookup.get(p).map_or(0.0, |&v| {
                            used += 1;
                            v
                        })
                    })
                    .sum()
            })
            .collect();
        if used != self.support.len() {
            return Err(crate::error::Error::DimensionMismatch {
                what: "distribution support vs channel rows",
                expected: groups.iter().map(Vec::len).sum(),
                got: self.support.len(),
            });
        }
        Ok(w)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassCapacity {
    pub class_index: usize,
    pub class_size: usize,
    pub capacity_bits: f64,
    pub iterations: usize,
    pub gap_bits: f64,
    pub converged: bool,
    pub collisions: usize,
}

#[derive(Clone, Debug)]
pub struct ClassOptimum {
    pub summary: ClassCapacity,
    pub distribution: PositionDistribution,
    pub quantizer: Quantizer,
}

#[derive(Clone, Debug)]
pub struct CapacityResult {
    pub best_class: usize,
    pub distribution: PositionDistribution,
    pub quantizer: Quantizer,
    pub capacity_bits: f64,
    /// `max_l log2 |I_l|` over the whole partition.
    pub upper_bound_bits: f64,
    /// Evaluated classes, largest first.
    pub per_class: Vec<ClassCapacity>,
}

impl CapacityResult {
    pub fn best(&self) -> &ClassCapacity {
        self.per_class
            .iter()
            .find(|c| c.class_index == self.best_class)
            .expect("best class is among the evaluated classes")
    }
}

/// `max_l log2 |I_l|`.
pub fn upper_bound(partition: &IsohypsePartition) -> f64 {
    (partition.max_class_size().max(1) as f64).log2()
}

/// Optimal position distribution within a single isohypse.
pub fn optimize_class(
    class_index: usize,
    members: &[usize],
    bob_map: &GainMap,
    levels: usize,
    ch: &ChannelParams,
    pilots: u32,
    opts: &SolverOptions,
) -> Result<ClassOptimum> {
    let quantizer = Quantizer::over_values(members.iter().map(|&p| bob_map.m[p]), levels)?;
    let trivial = |distribution: PositionDistribution| ClassOptimum {
        summary: ClassCapacity {
            class_index,
            class_size: members.len(),
            capacity_bits: 0.0,
            iterations: 0,
            gap_bits: 0.0,
            converged: true,
            collisions: 0,
        },
        distribution,
        quantizer,
    };
    if members.len() == 1 {
        return Ok(trivial(PositionDistribution::point(members[0])));
    }
    if levels == 1 {
        let mut support = members.to_vec();
        support.sort_unstable();
        return Ok(trivial(PositionDistribution::uniform(support)?));
    }
    let cc = channel_matrix(members, bob_map, &quantizer, ch, pilots)?;
    let opt = optimize_distribution(&cc.matrix, opts);
    let bound = (members.len() as f64).log2();
    assert!(
        opt.capacity_bits <= bound + 1e-12,
        "class {class_index}: capacity {} exceeds log2|I| = {bound}",
        opt.capacity_bits
    );
    Ok(ClassOptimum {
        summary: ClassCapacity {
            class_index,
            class_size: members.len(),
            capacity_bits: opt.capacity_bits.min(bound),
            iterations: opt.iterations,
            gap_bits: opt.gap_bits,
            converged: opt.converged,
            collisions: cc.collisions,
        },
        distribution: PositionDistribution::from_groups(&cc.groups, &opt.distribution),
        quantizer,
    })
}

/// Optimizes the `class_limit` largest isohypses and keeps the best.
/// Ties go to the smaller class index.
pub fn optimize_over_isohypses(
    partition: &IsohypsePartition,
    bob_map: &GainMap,
    levels: usize,
    ch: &ChannelParams,
    pilots: u32,
    class_limit: usize,
    opts: &SolverOptions,
) -> Result<CapacityResult> {
    if partition.is_empty() {
        return Err(invalid("partition", "no isohypses"));
    }
    let selected = largest_classes(partition, class_limit);
    let optima = selected
        .par_iter()
        .map(|&l| optimize_class(l, &partition.classes[l].members, bob_map, levels, ch, pilots, opts))
        .collect::<Result<Vec<_>>>()?;
    let best = optima
        .iter()
        .max_by(|a, b| {
            a.summary
                .capacity_bits
                .total_cmp(&b.summary.capacity_bits)
                .then(b.summary.class_index.cmp(&a.summary.class_index))
        })
        .expect("at least one class is evaluated");
    Ok(CapacityResult {
        best_class: best.summary.class_index,
        distribution: best.distribution.clone(),
        quantizer: best.quantizer,
        capacity_bits: best.summary.capacity_bits,
        upper_bound_bits: upper_bound(partition),
        per_class: optima.iter().map(|o| o.summary.clone()).collect(),
    })
}
