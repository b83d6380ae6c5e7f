use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::config::{DeltaE, ExperimentConfig, SweepAxis, AUTO_DELTA_E_BINS, AUTO_DELTA_E_FRACTION};
use crate::capacity::{optimize_over_isohypses, CapacityResult, SolverOptions};
use crate::channel::{
    ChannelParams, FieldMethod, FieldSampler, GainMap, PathlossParams, PositionGrid, ReceiverConfig,
};
use crate::error::Result;
use crate::estimation::{calibrate, db_to_linear, CalibrationParams};
use crate::partition::{build_partition, IsohypsePartition};
use crate::protocol::{noisy_training, run_training};
use crate::rng::{repetition_seed, stream_seed, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct SamplerKey {
    nx: usize,
    ny: usize,
    spacing: u64,
    altitude: u64,
    d_ref: u64,
    method: Option<usize>,
}

/// Shadowing samplers shared between repetitions and sweep points that use the
/// same grid.
#[derive(Default)]
pub struct FieldCache {
    samplers: Mutex<HashMap<SamplerKey, Arc<FieldSampler>>>,
}

impl FieldCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sampler(&self, grid: &PositionGrid, d_ref: f64, method: FieldMethod) -> Result<Arc<FieldSampler>> {
        let key = SamplerKey {
            nx: grid.nx(),
            ny: grid.ny(),
            spacing: grid.spacing().to_bits(),
            altitude: grid.altitude().to_bits(),
            d_ref: d_ref.to_bits(),
            method: match method {
                FieldMethod::Exact => None,
                FieldMethod::NearestNeighbor { neighbors } => Some(neighbors),
            },
        };
        // held across the build so concurrent callers wait instead of
        // factorizing the same covariance twice
        let mut map = self.samplers.lock().expect("sampler cache poisoned");
        if let Some(s) = map.get(&key) {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(FieldSampler::new(grid, d_ref, method)?);
        map.insert(key, Arc::clone(&s));
        Ok(s)
    }
}

/// Everything one repetition needs: geometry, calibrated channel, Alice's maps
/// and the isohypse partition.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub repetition: usize,
    pub seed: u64,
    pub grid: PositionGrid,
    pub pathloss: PathlossParams,
    pub channel: ChannelParams,
    /// True expected-gain maps.
    pub bob_true: GainMap,
    pub eve_true: GainMap,
    /// Maps as learned by Alice during training.
    pub bob_map: GainMap,
    pub eve_map: GainMap,
    /// Isohypse bin width in path-gain units.
    pub gain_width: f64,
    pub partition: IsohypsePartition,
}

/// Bin width in path-gain units (`g`, before the Rician factor). `Auto` is a
/// fraction of Eve's estimation-noise floor `g_min(Bob) / sqrt(S_min K)`,
/// capped at 1/256 of Eve's gain range; it does not depend on the Rician
/// factor, so runs that differ only in `rho` share their isohypses.
pub fn resolve_delta_e(
    setting: DeltaE,
    eve_map: &GainMap,
    bob_map: &GainMap,
    ch: &ChannelParams,
    cfg: &ExperimentConfig,
) -> f64 {
    match setting {
        DeltaE::Fixed(v) => v / ch.los_factor(),
        DeltaE::Auto => {
            let (lo, hi) = eve_map
                .g
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
            let cap = (hi - lo) / AUTO_DELTA_E_BINS as f64;
            let floor = bob_map.g_min() / (db_to_linear(cfg.snr_min_db) * cfg.pilots as f64).sqrt();
            let w = AUTO_DELTA_E_FRACTION * floor;
            if cap > 0.0 {
                w.min(cap)
            } else {
                w
            }
        }
    }
}

pub fn build_scenario(cfg: &ExperimentConfig, repetition: usize, cache: &FieldCache) -> Result<Scenario> {
    build_scenario_pinned(cfg, repetition, cache, None)
}

/// Like `build_scenario`, with the isohypse bin width fixed to `gain_width`
/// path-gain units instead of being resolved from `cfg`.
pub fn build_scenario_pinned(
    cfg: &ExperimentConfig,
    repetition: usize,
    cache: &FieldCache,
    gain_width: Option<f64>,
) -> Result<Scenario> {
    let seed = repetition_seed(cfg.seed, repetition as u64);
    let grid = PositionGrid::over_area(cfg.nx, cfg.ny, cfg.area_m, cfg.altitude_m)?;
    let bob_rx = ReceiverConfig::bob(&grid, cfg.sigma_sh_a_db, cfg.dref_m)?;
    let eve_rx = ReceiverConfig::eve(&grid, cfg.eve_dist_m, cfg.sigma_sh_e_db, cfg.dref_m)?;
    let sampler = cache.sampler(&grid, cfg.dref_m, cfg.field_method())?;
    let bob_field = sampler.field(&bob_rx, stream_seed(seed, Stream::FieldBob))?;
    let eve_field = sampler.field(&eve_rx, stream_seed(seed, Stream::FieldEve))?;
    let pathloss = PathlossParams::new(cfg.fc_mhz, cfg.atx_db, cfg.arx_db)?;

    let raw = run_training(
        &grid,
        &bob_rx,
        &bob_field,
        &eve_rx,
        &eve_field,
        &pathloss,
        &ChannelParams::new(f64::INFINITY, 0.0)?,
    )?;
    let channel = calibrate(&CalibrationParams::new(cfg.snr_min_db, cfg.rho_db, cfg.pilots)?, &raw.bob)?;
    let bob_true = raw.bob.with_channel(&channel);
    let eve_true = raw.eve.with_channel(&channel);
    let (bob_map, eve_map) = match cfg.training_pilots {
        None => (bob_true.clone(), eve_true.clone()),
        Some(k) => (
            noisy_training(&bob_true, &channel, k, stream_seed(seed, Stream::TrainingBob)),
            noisy_training(&eve_true, &channel, k, stream_seed(seed, Stream::TrainingEve)),
        ),
    };
    let f = channel.los_factor();
    let (gain_width, delta_e) = match (gain_width, cfg.delta_e) {
        (Some(w), _) => (w, w * f),
        (None, DeltaE::Fixed(v)) => (v / f, v),
        (None, DeltaE::Auto) => {
            let w = resolve_delta_e(DeltaE::Auto, &eve_true, &bob_true, &channel, cfg);
            (w, w * f)
        }
    };
    let partition = build_partition(&eve_map, delta_e)?;
    Ok(Scenario {
        repetition,
        seed,
        grid,
        pathloss,
        channel,
        bob_true,
        eve_true,
        bob_map,
        eve_map,
        gain_width,
        partition,
    })
}

pub fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions {
        tol_bits: cfg.tol_bits,
        max_iter: cfg.max_iter,
        ..SolverOptions::default()
    }
}

pub fn evaluate_capacity(cfg: &ExperimentConfig, scenario: &Scenario) -> Result<CapacityResult> {
    optimize_over_isohypses(
        &scenario.partition,
        &scenario.bob_map,
        cfg.levels,
        &scenario.channel,
        cfg.pilots,
        cfg.class_limit,
        &solver_options(cfg),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub axis: Option<SweepAxis>,
    pub value: f64,
    pub repetition: usize,
    pub seed: u64,
    pub capacity_bits: f64,
    pub upper_bound_bits: f64,
    pub class_index: usize,
    pub class_size: usize,
    pub classes: usize,
    pub delta_e: f64,
    /// Every evaluated class met the solver tolerance.
    pub converged: bool,
}

/// Capacity at every (sweep value, repetition) pair, in that order. Without a
/// sweep the single configured point is evaluated. Each repetition keeps its
/// shadowing draws and its isohypse bin width (resolved at the unswept
/// configuration) across all sweep values.
pub fn run_capacity_sweep(cfg: &ExperimentConfig, cache: &FieldCache) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let (axis, values) = match &cfg.sweep {
        Some(s) => (Some(s.axis), s.values.clone()),
        None => (None, vec![f64::NAN]),
    };
    let widths = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| match axis {
            Some(_) => build_scenario(cfg, rep, cache).map(|sc| Some(sc.gain_width)),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..values.len()).flat_map(|v| (0..cfg.reps).map(move |r| (v, r))).collect();
    jobs.par_iter()
        .map(|&(v, rep)| {
            let point_cfg = match axis {
                Some(a) => cfg.with_axis(a, values[v])?,
                None => cfg.clone(),
            };
            let sc = build_scenario_pinned(&point_cfg, rep, cache, widths[rep])?;
            let res = evaluate_capacity(&point_cfg, &sc)?;
            let best = res.best();
            Ok(SweepPoint {
                axis,
                value: values[v],
                repetition: rep,
                seed: sc.seed,
                capacity_bits: res.capacity_bits,
                upper_bound_bits: res.upper_bound_bits,
                class_index: res.best_class,
                class_size: best.class_size,
                classes: sc.partition.len(),
                delta_e: sc.partition.delta_e,
                converged: res.per_class.iter().all(|c| c.converged),
            })
        })
        .collect()
}
