//! Monte Carlo run of the key generation protocol: training, trajectory
//! sampling, pilot transmissions, key distillation and leakage measurement.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::LN_2;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use rayon::prelude::*;

use crate::capacity::{CapacityResult, PositionDistribution, Quantizer};
use crate::channel::{build_gain_map, sample_received_gain, ChannelParams, GainMap, PathlossParams, PositionGrid};
use crate::channel::{ReceiverConfig, ShadowingField};
use crate::error::{invalid, Error, Result};
use crate::experiment::{build_scenario, evaluate_capacity, ExperimentConfig, FieldCache};
use crate::rng::{seeded_rng, stream_seed, Stream};

/// Fewest samples `estimate_leakage` accepts.
pub const MIN_LEAKAGE_SAMPLES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPlan {
    pub positions: Vec<usize>,
    pub seed: u64,
}

impl TrajectoryPlan {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyMaterial {
    /// Expected gains `m(p_n, p_B)` known to Alice.
    pub alice_values: Vec<f64>,
    pub alice_levels: Vec<usize>,
    pub bob_levels: Vec<usize>,
    /// Eve's raw gain estimates.
    pub eve_values: Vec<f64>,
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
}

impl KeyMaterial {
    pub fn len(&self) -> usize {
        self.bob_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bob_levels.is_empty()
    }

    pub fn symbol_disagreement(&self) -> f64 {
        disagreement(&self.alice_levels, &self.bob_levels)
    }

    pub fn bit_disagreement(&self) -> f64 {
        disagreement(&self.alice_bits, &self.bob_bits)
    }
}

fn disagreement<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
}

/// Alice's training maps. Training is exact, so Eve, who can run the same
/// measurement campaign, ends up with the identical Eve map.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMaps {
    pub bob: GainMap,
    pub eve: GainMap,
    /// Eve's own knowledge of her map.
    pub eve_self: GainMap,
}

pub fn run_training(
    grid: &PositionGrid,
    bob: &ReceiverConfig,
    bob_field: &ShadowingField,
    eve: &ReceiverConfig,
    eve_field: &ShadowingField,
    pl: &PathlossParams,
    ch: &ChannelParams,
) -> Result<TrainingMaps> {
    let bob = build_gain_map(grid, bob, bob_field, pl, ch)?;
    let eve = build_gain_map(grid, eve, eve_field, pl, ch)?;
    Ok(TrainingMaps {
        bob,
        eve_self: eve.clone(),
        eve,
    })
}

/// Replaces every expected gain in `map` with a single `pilots`-symbol
/// estimate, for runs where training itself is noisy.
pub fn noisy_training(map: &GainMap, ch: &ChannelParams, pilots: u32, seed: u64) -> GainMap {
    let mut rng = seeded_rng(seed);
    GainMap {
        m: map.g.iter().map(|&g| sample_received_gain(g, ch, pilots, &mut rng)).collect(),
        ..map.clone()
    }
}

/// `n` independent positions drawn from `dist`.
pub fn sample_trajectory(dist: &PositionDistribution, n: usize, seed: u64) -> Result<TrajectoryPlan> {
    let index = WeightedIndex::new(&dist.probabilities).map_err(|e| invalid("distribution", e.to_string()))?;
    let mut rng = seeded_rng(seed);
    Ok(TrajectoryPlan {
        positions: (0..n).map(|_| dist.support[index.sample(&mut rng)]).collect(),
        seed,
    })
}

/// Binary-reflected Gray code of `level`, most significant bit first.
pub fn gray_bits(level: usize, width: usize) -> Vec<bool> {
    let g = level ^ (level >> 1);
    (0..width).rev().map(|b| (g >> b) & 1 == 1).collect()
}

pub fn levels_to_bits(levels: &[usize], width: usize) -> Vec<bool> {
    levels.iter().flat_map(|&l| gray_bits(l, width)).collect()
}

pub struct TransmissionSeeds {
    pub bob: u64,
    pub eve: u64,
}

/// One pilot burst per planned position, with independent fading at Bob and
/// Eve.
pub fn execute_transmissions(
    plan: &TrajectoryPlan,
    bob_map: &GainMap,
    eve_map: &GainMap,
    ch: &ChannelParams,
    pilots: u32,
    quantizer: &Quantizer,
    seeds: &TransmissionSeeds,
) -> Result<KeyMaterial> {
    if let Some(&p) = plan.positions.iter().find(|&&p| p >= bob_map.len() || p >= eve_map.len()) {
        return Err(invalid("trajectory", format!("position {p} is outside the maps")));
    }
    let mut bob_rng = seeded_rng(seeds.bob);
    let mut eve_rng = seeded_rng(seeds.eve);
    let n = plan.len();
    let mut km = KeyMaterial {
        alice_values: Vec::with_capacity(n),
        alice_levels: Vec::with_capacity(n),
        bob_levels: Vec::with_capacity(n),
        eve_values: Vec::with_capacity(n),
        alice_bits: Vec::new(),
        bob_bits: Vec::new(),
    };
    for &p in &plan.positions {
        let m = bob_map.m[p];
        km.alice_values.push(m);
        km.alice_levels.push(quantizer.quantize(m));
        let y = sample_received_gain(bob_map.g[p], ch, pilots, &mut bob_rng);
        km.bob_levels.push(quantizer.quantize(y));
        km.eve_values.push(sample_received_gain(eve_map.g[p], ch, pilots, &mut eve_rng));
    }
    let width = quantizer.bits_per_level();
    km.alice_bits = levels_to_bits(&km.alice_levels, width);
    km.bob_bits = levels_to_bits(&km.bob_levels, width);
    Ok(km)
}

/// Dense ids for the distinct values of `values`, in ascending value order.
pub fn symbol_ids(values: &[f64]) -> Vec<usize> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let ids: HashMap<u64, usize> = distinct.iter().enumerate().map(|(i, v)| (v.to_bits(), i)).collect();
    values.iter().map(|v| ids[&v.to_bits()]).collect()
}

/// Index of each value in `bins` equal-width bins over the observed range.
pub fn uniform_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    values
        .iter()
        .map(|&v| {
            if width > 0.0 {
                (((v - lo) / width) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Plug-in mutual information of two discrete sequences with the
/// Miller-Madow correction, in bits. Not floored.
pub fn corrected_mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "leakage sequences",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pa: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0;
        *pa.entry(x).or_default() += 1.0;
        *pb.entry(y).or_default() += 1.0;
    }
    let plug_in: f64 = joint.iter().map(|(&(x, y), &c)| c / n * (c * n / (pa[&x] * pb[&y])).log2()).sum();
    Ok(plug_in - miller_madow_bias(pa.len(), pb.len(), a.len()))
}

/// `(Ka - 1)(Kb - 1) / (2 N ln 2)`: first-order bias of the plug-in estimate
/// between independent variables.
pub fn miller_madow_bias(ka: usize, kb: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (ka.saturating_sub(1) * kb.saturating_sub(1)) as f64 / (2.0 * n as f64 * LN_2)
}

/// Leakage between a discrete sequence and a continuous one binned into
/// `bins_b` cells, floored at zero.
pub fn estimate_leakage(values_a: &[usize], values_b: &[f64], bins_b: usize) -> Result<f64> {
    if values_a.len() != values_b.len() {
        return Err(Error::DimensionMismatch {
            what: "leakage sequences",
            expected: values_a.len(),
            got: values_b.len(),
        });
    }
    if values_a.len() < MIN_LEAKAGE_SAMPLES {
        return Err(invalid(
            "leakage",
            format!("need at least {MIN_LEAKAGE_SAMPLES} samples, got {}", values_a.len()),
        ));
    }
    if bins_b == 0 {
        return Err(invalid("bins", "must be positive"));
    }
    let b = uniform_bins(values_b, bins_b);
    Ok(corrected_mutual_information(values_a, &b)?.max(0.0))
}

/// Acceptance threshold for a leakage estimate: the independence bias plus
/// three standard errors.
pub fn leakage_threshold(ka: usize, kb: usize, n: usize) -> f64 {
    miller_madow_bias(ka, kb, n) + 3.0 / (n as f64).sqrt()
}

fn distinct(v: &[usize]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s.len()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeakageReport {
    pub q_t_bits: f64,
    pub m_t_bits: f64,
    pub q_t_threshold: f64,
    pub m_t_threshold: f64,
}

/// Measures `I(q;t)` and `I(m;t)`, binning Eve's estimates into as many cells
/// as the quantizer has levels.
pub fn measure_leakage(km: &KeyMaterial, levels: usize) -> Result<LeakageReport> {
    let m_ids = symbol_ids(&km.alice_values);
    let t_bins = uniform_bins(&km.eve_values, levels);
    let kt = distinct(&t_bins);
    let n = km.len();
    Ok(LeakageReport {
        q_t_bits: estimate_leakage(&km.bob_levels, &km.eve_values, levels)?,
        m_t_bits: estimate_leakage(&m_ids, &km.eve_values, levels)?,
        q_t_threshold: leakage_threshold(distinct(&km.bob_levels), kt, n),
        m_t_threshold: leakage_threshold(distinct(&m_ids), kt, n),
    })
}

/// Empirical `max(0, I(q;m) - I(q;t))` in bits per position.
pub fn effective_key_rate(km: &KeyMaterial, leak_q_t: f64) -> Result<f64> {
    let shared = corrected_mutual_information(&symbol_ids(&km.alice_values), &km.bob_levels)?;
    Ok((shared - leak_q_t).max(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolReport {
    pub seed: u64,
    pub transmissions: usize,
    pub pilots: u32,
    pub levels: usize,
    pub snr_min_db: f64,
    pub rho_db: f64,
    pub delta_e: f64,
    pub class_index: usize,
    pub capacity_bits: f64,
    pub upper_bound_bits: f64,
    pub sym_disagreement: f64,
    pub bit_disagreement: f64,
    pub leakage: LeakageReport,
    /// Bits per position.
    pub key_rate_bits: f64,
}

#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub report: ProtocolReport,
    pub keys: KeyMaterial,
    pub capacity: CapacityResult,
}

/// One repetition: training, capacity optimization, trajectory,
/// transmissions, disagreement and leakage.
pub fn run_protocol(cfg: &ExperimentConfig, repetition: usize, cache: &FieldCache) -> Result<ProtocolRun> {
    cfg.validate()?;
    let sc = build_scenario(cfg, repetition, cache)?;
    let capacity = evaluate_capacity(cfg, &sc)?;
    let plan = sample_trajectory(&capacity.distribution, cfg.transmissions, stream_seed(sc.seed, Stream::Trajectory))?;
    let keys = execute_transmissions(
        &plan,
        &sc.bob_map,
        &sc.eve_map,
        &sc.channel,
        cfg.pilots,
        &capacity.quantizer,
        &TransmissionSeeds {
            bob: stream_seed(sc.seed, Stream::FadingBob),
            eve: stream_seed(sc.seed, Stream::FadingEve),
        },
    )?;
    let leakage = measure_leakage(&keys, cfg.levels)?;
    let key_rate_bits = effective_key_rate(&keys, leakage.q_t_bits)?;
    let report = ProtocolReport {
        seed: sc.seed,
        transmissions: cfg.transmissions,
        pilots: cfg.pilots,
        levels: cfg.levels,
        snr_min_db: cfg.snr_min_db,
        rho_db: cfg.rho_db,
        delta_e: sc.partition.delta_e,
        class_index: capacity.best_class,
        capacity_bits: capacity.capacity_bits,
        upper_bound_bits: capacity.upper_bound_bits,
        sym_disagreement: keys.symbol_disagreement(),
        bit_disagreement: keys.bit_disagreement(),
        leakage,
        key_rate_bits,
    };
    Ok(ProtocolRun {
        report,
        keys,
        capacity,
    })
}

/// All configured repetitions, in repetition order.
pub fn run_protocol_reps(cfg: &ExperimentConfig, cache: &FieldCache) -> Result<Vec<ProtocolRun>> {
    (0..cfg.reps).into_par_iter().map(|r| run_protocol(cfg, r, cache)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ReceiverConfig, Role};
    use rand::Rng;

    fn map(role: Role, g: Vec<f64>) -> GainMap {
        let n = g.len();
        GainMap {
            receiver: ReceiverConfig::new(role, [0.0; 3], 0.0, 1.0).unwrap(),
            positions: vec![[0.0; 3]; n],
            a_pl_db: vec![0.0; n],
            a_sh_db: vec![0.0; n],
            m: g.clone(),
            g,
        }
    }

    #[test]
    fn empty_and_point_trajectories() {
        let d = PositionDistribution::uniform(vec![3, 4]).unwrap();
        assert!(sample_trajectory(&d, 0, 1).unwrap().is_empty());
        let plan = sample_trajectory(&PositionDistribution::point(7), 50, 1).unwrap();
        assert!(plan.positions.iter().all(|&p| p == 7));
    }

    #[test]
    fn trajectory_frequencies_concentrate() {
        let probs = vec![0.5, 0.3, 0.15, 0.05];
        let d = PositionDistribution::new(vec![10, 11, 12, 13], probs.clone()).unwrap();
        let n = 1_000_000;
        let plan = sample_trajectory(&d, n, 42).unwrap();
        for (i, p) in probs.iter().enumerate() {
            let f = plan.positions.iter().filter(|&&x| x == 10 + i).count() as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{f} vs {p}");
        }
    }

    #[test]
    fn gray_code_is_injective_and_adjacent() {
        for width in 1..=7 {
            let codes: Vec<Vec<bool>> = (0..1usize << width).map(|l| gray_bits(l, width)).collect();
            for i in 0..codes.len() {
                for j in i + 1..codes.len() {
                    assert_ne!(codes[i], codes[j]);
                }
                if i + 1 < codes.len() {
                    let diff = codes[i].iter().zip(&codes[i + 1]).filter(|(a, b)| a != b).count();
                    assert_eq!(diff, 1);
                }
            }
        }
    }

    #[test]
    fn noiseless_transmissions_agree() {
        let ch = ChannelParams::new(f64::INFINITY, 0.0).unwrap();
        let q = Quantizer::new(0.0, 1.0, 4).unwrap();
        let bob = map(Role::Bob, vec![0.5, 1.5, 2.5, 3.5]);
        let eve = map(Role::Eve, vec![1.0; 4]);
        let d = PositionDistribution::uniform(vec![0, 1, 2, 3]).unwrap();
        let plan = sample_trajectory(&d, 1000, 3).unwrap();
        let km = execute_transmissions(&plan, &bob, &eve, &ch, 10, &q, &TransmissionSeeds { bob: 1, eve: 2 }).unwrap();
        assert_eq!(km.symbol_disagreement(), 0.0);
        assert_eq!(km.bit_disagreement(), 0.0);
        assert_eq!(km.alice_bits.len(), 2000);
        let rate = effective_key_rate(&km, 0.0).unwrap();
        assert!((rate - 2.0).abs() < 0.02, "{rate}");
    }

    #[test]
    fn one_bit_per_symbol_at_two_levels() {
        let ch = ChannelParams::new(10.0, 1.0).unwrap();
        let q = Quantizer::new(0.0, 1.0, 2).unwrap();
        let bob = map(Role::Bob, vec![0.5, 1.5]);
        let plan = sample_trajectory(&PositionDistribution::uniform(vec![0, 1]).unwrap(), 321, 3).unwrap();
        let km =
            execute_transmissions(&plan, &bob, &bob.clone(), &ch, 4, &q, &TransmissionSeeds { bob: 1, eve: 2 }).unwrap();
        assert_eq!(km.bob_bits.len(), 321);
        let again =
            execute_transmissions(&plan, &bob, &bob.clone(), &ch, 4, &q, &TransmissionSeeds { bob: 1, eve: 2 }).unwrap();
        assert_eq!(km.bob_levels, again.bob_levels);
    }

    #[test]
    fn out_of_map_positions_rejected() {
        let ch = ChannelParams::new(10.0, 1.0).unwrap();
        let q = Quantizer::new(0.0, 1.0, 2).unwrap();
        let bob = map(Role::Bob, vec![0.5, 1.5]);
        let plan = TrajectoryPlan { positions: vec![0, 2], seed: 0 };
        assert!(execute_transmissions(&plan, &bob, &bob, &ch, 4, &q, &TransmissionSeeds { bob: 1, eve: 2 }).is_err());
    }

    #[test]
    fn leakage_of_independent_streams_is_small() {
        let mut rng = seeded_rng(9);
        let n = 10_000;
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..8)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        assert!(estimate_leakage(&a, &b, 8).unwrap() <= 0.01);
    }

    #[test]
    fn leakage_of_identical_streams_is_entropy() {
        let n = 10_000;
        let a: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let b: Vec<f64> = a.iter().map(|&x| x as f64).collect();
        let est = estimate_leakage(&a, &b, 4).unwrap();
        assert!((est - 2.0).abs() < 0.01, "{est}");
    }

    #[test]
    fn leakage_of_constant_is_zero() {
        let a: Vec<usize> = (0..500).map(|i| i % 5).collect();
        assert_eq!(estimate_leakage(&a, &[2.5; 500], 8).unwrap(), 0.0);
    }

    #[test]
    fn leakage_input_validation() {
        assert!(matches!(
            estimate_leakage(&[0; 200], &[0.0; 199], 4),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(estimate_leakage(&[0; 99], &[0.0; 99], 4).is_err());
    }

    #[test]
    fn symbol_ids_are_dense_and_ordered() {
        assert_eq!(symbol_ids(&[3.0, 1.0, 3.0, 2.0]), vec![2, 0, 2, 1]);
    }
}
