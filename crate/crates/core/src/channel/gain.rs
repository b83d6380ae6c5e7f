use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::{PositionGrid, ReceiverConfig};
use super::shadowing::ShadowingField;
use crate::error::{invalid, Error, Result};
use crate::estimation::estimation_sigma;

/// Friis link-budget parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathlossParams {
    pub fc_mhz: f64,
    pub atx_db: f64,
    pub arx_db: f64,
}

impl PathlossParams {
    pub fn new(fc_mhz: f64, atx_db: f64, arx_db: f64) -> Result<Self> {
        if !(fc_mhz > 0.0 && fc_mhz.is_finite()) {
            return Err(invalid("fc_mhz", format!("must be positive, got {fc_mhz}")));
        }
        Ok(Self { fc_mhz, atx_db, arx_db })
    }
}

/// Rician fading and receiver noise. Fading power is fixed to one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    /// Rician factor; `f64::INFINITY` gives a deterministic line-of-sight channel.
    pub kappa: f64,
    /// Thermal noise variance (linear).
    pub noise_var: f64,
}

impl ChannelParams {
    pub const FADING_POWER: f64 = 1.0;

    pub fn new(kappa: f64, noise_var: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(invalid("kappa", format!("must be non-negative, got {kappa}")));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(invalid("noise_var", format!("must be non-negative, got {noise_var}")));
        }
        Ok(Self { kappa, noise_var })
    }

    /// `sqrt(kappa / (1 + kappa))`, the line-of-sight amplitude share.
    pub fn los_factor(&self) -> f64 {
        if self.kappa.is_infinite() {
            1.0
        } else {
            (self.kappa / (1.0 + self.kappa)).sqrt()
        }
    }

    /// `1 / (1 + kappa)`, the scattered power share.
    pub fn scatter_share(&self) -> f64 {
        if self.kappa.is_infinite() {
            0.0
        } else {
            Self::FADING_POWER / (1.0 + self.kappa)
        }
    }
}

/// Friis path loss in dB between two points given in meters.
pub fn pathloss_db(pa: &[f64; 3], pr: &[f64; 3], params: &PathlossParams) -> Result<f64> {
    let d_km = super::distance(pa, pr) / 1000.0;
    if d_km == 0.0 {
        return Err(Error::CoincidentPositions {
            x: pa[0],
            y: pa[1],
            z: pa[2],
        });
    }
    Ok(32.4 + 20.0 * d_km.log10() + 20.0 * params.fc_mhz.log10() - params.atx_db - params.arx_db)
}

/// Deterministic channel description from every grid position to one receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct GainMap {
    pub receiver: ReceiverConfig,
    pub positions: Vec<[f64; 3]>,
    pub a_pl_db: Vec<f64>,
    pub a_sh_db: Vec<f64>,
    /// Total linear gain.
    pub g: Vec<f64>,
    /// Expected estimated gain `sqrt(kappa/(1+kappa)) * g`.
    pub m: Vec<f64>,
}

impl GainMap {
    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn g_max(&self) -> f64 {
        self.g.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn g_min(&self) -> f64 {
        self.g.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same map under a different Rician factor.
    pub fn with_channel(&self, ch: &ChannelParams) -> GainMap {
        let f = ch.los_factor();
        GainMap {
            m: self.g.iter().map(|g| f * g).collect(),
            ..self.clone()
        }
    }
}

pub fn build_gain_map(
    grid: &PositionGrid,
    receiver: &ReceiverConfig,
    field: &ShadowingField,
    pl: &PathlossParams,
    ch: &ChannelParams,
) -> Result<GainMap> {
    if field.values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "shadowing field length vs grid size",
            expected: grid.len(),
            got: field.values.len(),
        });
    }
    let positions = grid.positions();
    let a_pl_db = positions
        .iter()
        .map(|p| pathloss_db(p, &receiver.position, pl))
        .collect::<Result<Vec<_>>>()?;
    let a_sh_db = field.values.clone();
    let g: Vec<f64> = a_pl_db
        .iter()
        .zip(&a_sh_db)
        .map(|(pl, sh)| 10f64.powf(-(pl + sh) / 20.0))
        .collect();
    let f = ch.los_factor();
    let m = g.iter().map(|g| f * g).collect();
    Ok(GainMap {
        receiver: receiver.clone(),
        positions,
        a_pl_db,
        a_sh_db,
        g,
        m,
    })
}

/// One pilot-averaged gain estimate for true gain `g` with `pilots` symbols.
///
/// Draws directly from the Gaussian law of the averaged, real-part estimator
/// instead of simulating each pilot.
pub fn sample_received_gain<R: Rng + ?Sized>(g: f64, ch: &ChannelParams, pilots: u32, rng: &mut R) -> f64 {
    let m = ch.los_factor() * g;
    let sigma = estimation_sigma(g, ch.kappa, ch.noise_var, pilots);
    if sigma == 0.0 {
        return m;
    }
    let z: f64 = rng.sample(StandardNormal);
    m + sigma * z
}
