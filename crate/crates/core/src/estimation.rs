//! Operating-point calibration: Rician factor from the fading/pathloss
//! tradeoff, thermal noise from the minimum SNR over the grid, and the
//! standard deviation of the pilot-averaged gain estimate.

use crate::channel::{ChannelParams, GainMap};
use crate::error::{invalid, Error, Result};

/// Operating point. SNR and rho are given in dB.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationParams {
    pub snr_min_db: f64,
    pub rho_db: f64,
    pub pilots: u32,
}

impl CalibrationParams {
    pub fn new(snr_min_db: f64, rho_db: f64, pilots: u32) -> Result<Self> {
        if pilots == 0 {
            return Err(invalid("pilots", "K must be at least 1"));
        }
        if !snr_min_db.is_finite() || !rho_db.is_finite() {
            return Err(invalid("snr_min_db/rho_db", "must be finite"));
        }
        Ok(Self {
            snr_min_db,
            rho_db,
            pilots,
        })
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `kappa = g_max * 10^(rho_db / 10)`.
pub fn kappa_from_rho(rho_db: f64, g_max: f64) -> f64 {
    g_max * db_to_linear(rho_db)
}

pub fn rho_from_kappa(kappa: f64, g_max: f64) -> f64 {
    linear_to_db(kappa / g_max)
}

/// Per-position SNR of the gain estimate (single pilot).
pub fn snr_at(g: f64, kappa: f64, noise_var: f64) -> f64 {
    if kappa.is_infinite() {
        return 2.0 * g * g / noise_var;
    }
    2.0 * g * g * kappa / (g * g + noise_var * (1.0 + kappa))
}

/// Noise variance that puts the minimum SNR over the Bob map at `snr_min_db`.
///
/// The SNR is increasing in `g`, so the minimum sits at the weakest position.
pub fn noise_from_snr_min(snr_min_db: f64, kappa: f64, bob_map: &GainMap) -> Result<f64> {
    if bob_map.is_empty() {
        return Err(invalid("bob_map", "gain map is empty"));
    }
    let snr = db_to_linear(snr_min_db);
    let g_min = bob_map.g_min();
    if kappa.is_infinite() {
        return Ok(2.0 * g_min * g_min / snr);
    }
    if snr >= 2.0 * kappa {
        return Err(Error::InfeasibleSnr {
            snr_min: snr,
            limit: 2.0 * kappa,
        });
    }
    Ok(g_min * g_min * (2.0 * kappa / snr - 1.0) / (1.0 + kappa))
}

/// Standard deviation of the real-part gain estimate averaged over `pilots`.
pub fn estimation_sigma(g: f64, kappa: f64, noise_var: f64, pilots: u32) -> f64 {
    let scatter = if kappa.is_infinite() { 0.0 } else { g * g / (1.0 + kappa) };
    ((scatter + noise_var) / (2.0 * pilots as f64)).sqrt()
}

/// Rician factor and noise variance for `cal` on a given Bob map.
///
/// `g_max` and `g_min` come from the Bob map only.
pub fn calibrate(cal: &CalibrationParams, bob_map: &GainMap) -> Result<ChannelParams> {
    let kappa = kappa_from_rho(cal.rho_db, bob_map.g_max());
    let noise_var = noise_from_snr_min(cal.snr_min_db, kappa, bob_map)?;
    ChannelParams::new(kappa, noise_var)
}
