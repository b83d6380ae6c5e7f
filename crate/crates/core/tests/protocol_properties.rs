use std::collections::HashSet;

use proptest::prelude::*;
use skg_core::capacity::{channel_matrix, output_pmd};
use skg_core::experiment::{build_scenario, evaluate_capacity, FieldCache};
use skg_core::protocol::{
    execute_transmissions, gray_bits, measure_leakage, run_protocol, sample_trajectory, TransmissionSeeds,
};
use skg_core::ExperimentConfig;

fn desk(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.nx = 25;
    cfg.ny = 25;
    cfg.area_m = 250.0;
    cfg.seed = seed;
    cfg.transmissions = 4000;
    cfg
}

fn disagreement_trend(vary: impl Fn(&mut ExperimentConfig, f64), values: &[f64]) -> usize {
    let cache = FieldCache::new();
    (0..20)
        .filter(|&seed| {
            let rates: Vec<f64> = values
                .iter()
                .map(|&v| {
                    let mut cfg = desk(seed);
                    vary(&mut cfg, v);
                    run_protocol(&cfg, 0, &cache).unwrap().report.sym_disagreement
                })
                .collect();
            rates.windows(2).all(|w| w[1] <= w[0])
        })
        .count()
}

#[test]
fn disagreement_falls_with_more_pilots() {
    let ok = disagreement_trend(|c, v| c.pilots = v as u32, &[1.0, 10.0, 100.0]);
    assert!(ok > 10, "non-increasing in K for only {ok} of 20 seeds");
}

#[test]
fn disagreement_falls_with_higher_snr() {
    let ok = disagreement_trend(|c, v| c.snr_min_db = v, &[-10.0, 0.0, 10.0]);
    assert!(ok > 10, "non-increasing in SNR_min for only {ok} of 20 seeds");
}

#[test]
fn bob_level_frequencies_follow_output_pmd() {
    let cfg = desk(3);
    let cache = FieldCache::new();
    let sc = build_scenario(&cfg, 0, &cache).unwrap();
    let cap = evaluate_capacity(&cfg, &sc).unwrap();
    let members = &sc.partition.classes[cap.best_class].members;
    let cc = channel_matrix(members, &sc.bob_map, &cap.quantizer, &sc.channel, cfg.pilots).unwrap();
    let pmd = output_pmd(&cc.matrix, &cap.distribution.row_weights(&cc.groups).unwrap()).unwrap();

    let n = 100_000;
    let plan = sample_trajectory(&cap.distribution, n, 17).unwrap();
    let seeds = TransmissionSeeds { bob: 18, eve: 19 };
    let km = execute_transmissions(&plan, &sc.bob_map, &sc.eve_map, &sc.channel, cfg.pilots, &cap.quantizer, &seeds)
        .unwrap();
    let mut freq = vec![0.0; pmd.len()];
    for &l in &km.bob_levels {
        freq[l] += 1.0 / n as f64;
    }
    let tv: f64 = 0.5 * freq.iter().zip(&pmd).map(|(a, b)| (a - b).abs()).sum::<f64>();
    assert!(tv <= 0.02, "total variation {tv}");
}

#[test]
fn isohypse_trajectories_leak_nothing_measurable() {
    let cache = FieldCache::new();
    for seed in 0..3 {
        let mut cfg = desk(seed);
        cfg.transmissions = 10_000;
        let run = run_protocol(&cfg, 0, &cache).unwrap();
        let leak = measure_leakage(&run.keys, cfg.levels).unwrap();
        assert!(leak.q_t_bits <= leak.q_t_threshold, "seed {seed}: {leak:?}");
        assert!(leak.m_t_bits <= leak.m_t_threshold, "seed {seed}: {leak:?}");
    }
}

#[test]
fn protocol_runs_are_reproducible() {
    let cache = FieldCache::new();
    let cfg = desk(12);
    let a = run_protocol(&cfg, 1, &cache).unwrap();
    let b = run_protocol(&cfg, 1, &FieldCache::new()).unwrap();
    assert_eq!(a.keys, b.keys);
    assert_eq!(a.report, b.report);
}

proptest! {
    #[test]
    fn gray_mapping_is_injective_and_adjacent(width in 1usize..10) {
        let n = 1usize << width;
        let codes: Vec<Vec<bool>> = (0..n).map(|l| gray_bits(l, width)).collect();
        prop_assert_eq!(codes.iter().collect::<HashSet<_>>().len(), n);
        for w in codes.windows(2) {
            prop_assert_eq!(w[0].iter().zip(&w[1]).filter(|(a, b)| a != b).count(), 1);
        }
    }
}
