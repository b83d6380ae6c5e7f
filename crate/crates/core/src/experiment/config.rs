//! Experiment configuration: defaults, flat `key = value` files and
//! per-key overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::channel::FieldMethod;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaE {
    /// A fraction of Eve's estimation-noise floor, capped at 1/256 of her
    /// gain range.
    Auto,
    Fixed(f64),
}

/// Fraction of Eve's estimation-noise floor used by `DeltaE::Auto`.
pub const AUTO_DELTA_E_FRACTION: f64 = 0.25;
/// Range divisor used by `DeltaE::Auto` as an upper cap.
pub const AUTO_DELTA_E_BINS: usize = 256;

impl fmt::Display for DeltaE {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaE::Auto => f.write_str("auto"),
            DeltaE::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for DeltaE {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(DeltaE::Auto);
        }
        let v: f64 = parse_num("delta_e", s)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid("delta_e", "must be positive or `auto`"));
        }
        Ok(DeltaE::Fixed(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Levels,
    /// Grid side, `M = n x n` positions.
    Positions,
    SnrMin,
    RhoDb,
    Pilots,
    SigmaShA,
    EveDistance,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 7] = [
        SweepAxis::Levels,
        SweepAxis::Positions,
        SweepAxis::SnrMin,
        SweepAxis::RhoDb,
        SweepAxis::Pilots,
        SweepAxis::SigmaShA,
        SweepAxis::EveDistance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Levels => "Q",
            SweepAxis::Positions => "M",
            SweepAxis::SnrMin => "SNR_min",
            SweepAxis::RhoDb => "rho_dB",
            SweepAxis::Pilots => "K",
            SweepAxis::SigmaShA => "sigma_sh_A",
            SweepAxis::EveDistance => "d",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownAxis(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("sweep", "needs at least one value"));
        }
        Ok(Self { axis, values })
    }

    /// Parses `"AXIS v1,v2,..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let axis: SweepAxis = parts.next().ok_or_else(|| invalid("sweep", "missing axis"))?.parse()?;
        let list = parts.collect::<Vec<_>>().join("");
        let values = list
            .split(',')
            .filter(|v| !v.is_empty())
            .map(|v| parse_num("sweep", v))
            .collect::<Result<Vec<f64>>>()?;
        Self::new(axis, values)
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        write!(f, "{} {}", self.axis, values.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub nx: usize,
    pub ny: usize,
    pub area_m: f64,
    pub altitude_m: f64,
    pub fc_mhz: f64,
    pub atx_db: f64,
    pub arx_db: f64,
    pub sigma_sh_a_db: f64,
    pub sigma_sh_e_db: f64,
    pub dref_m: f64,
    pub eve_dist_m: f64,
    pub snr_min_db: f64,
    pub rho_db: f64,
    pub pilots: u32,
    pub levels: usize,
    pub delta_e: DeltaE,
    /// Transmissions per protocol run.
    pub transmissions: usize,
    pub class_limit: usize,
    pub seed: u64,
    pub reps: usize,
    pub sweep: Option<Sweep>,
    /// Nearest-neighbour count for approximate shadowing fields; exact when
    /// `None`.
    pub field_neighbors: Option<usize>,
    /// Pilots per position during training; exact training when `None`.
    pub training_pilots: Option<u32>,
    pub tol_bits: f64,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nx: 50,
            ny: 50,
            area_m: 500.0,
            altitude_m: 10.0,
            fc_mhz: 2400.0,
            atx_db: 60.0,
            arx_db: 60.0,
            sigma_sh_a_db: 5.0,
            sigma_sh_e_db: 3.0,
            dref_m: 20.0,
            eve_dist_m: 119.0,
            snr_min_db: 10.0,
            rho_db: 10.0,
            pilots: 10,
            levels: 16,
            delta_e: DeltaE::Auto,
            transmissions: 10_000,
            class_limit: 8,
            seed: 1,
            reps: 10,
            sweep: None,
            field_neighbors: None,
            training_pilots: None,
            tol_bits: 1e-9,
            max_iter: 100_000,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e: T::Err| invalid("config", format!("{key}: cannot parse `{v}`: {e}")))
}

fn parse_opt<T: FromStr>(key: &str, v: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    if v.trim().eq_ignore_ascii_case("none") || v.trim().eq_ignore_ascii_case("exact") {
        Ok(None)
    } else {
        parse_num(key, v).map(Some)
    }
}

impl ExperimentConfig {
    /// Sets one key. Keys match the long command-line flags, with `-` and `_`
    /// interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('-', "_").to_ascii_lowercase();
        let value = value.trim();
        match key.as_str() {
            "grid" => {
                let parts: Vec<&str> = value.split(|c: char| c.is_whitespace() || c == ',' || c == 'x').collect();
                let parts: Vec<&str> = parts.into_iter().filter(|p| !p.is_empty()).collect();
                if parts.len() != 2 {
                    return Err(invalid("grid", "expects two sizes, `NX NY`"));
                }
                self.nx = parse_num("grid", parts[0])?;
                self.ny = parse_num("grid", parts[1])?;
            }
            "m" => {
                let side: usize = parse_num("m", value)?;
                self.nx = side;
                self.ny = side;
            }
            "area_m" => self.area_m = parse_num(&key, value)?,
            "altitude_m" => self.altitude_m = parse_num(&key, value)?,
            "fc_mhz" => self.fc_mhz = parse_num(&key, value)?,
            "atx_db" => self.atx_db = parse_num(&key, value)?,
            "arx_db" => self.arx_db = parse_num(&key, value)?,
            "sigma_sh_a_db" => self.sigma_sh_a_db = parse_num(&key, value)?,
            "sigma_sh_e_db" => self.sigma_sh_e_db = parse_num(&key, value)?,
            "dref_m" => self.dref_m = parse_num(&key, value)?,
            "eve_dist_m" => self.eve_dist_m = parse_num(&key, value)?,
            "snr_min_db" => self.snr_min_db = parse_num(&key, value)?,
            "rho_db" => self.rho_db = parse_num(&key, value)?,
            "pilots" => self.pilots = parse_num(&key, value)?,
            "levels" => self.levels = parse_num(&key, value)?,
            "delta_e" => self.delta_e = value.parse()?,
            "transmissions" | "n" => self.transmissions = parse_num(&key, value)?,
            "class_limit" => self.class_limit = parse_num(&key, value)?,
            "seed" => self.seed = parse_num(&key, value)?,
            "reps" => self.reps = parse_num(&key, value)?,
            "sweep" => self.sweep = Some(Sweep::parse(value)?),
            "field_neighbors" => self.field_neighbors = parse_opt(&key, value)?,
            "training_pilots" => self.training_pilots = parse_opt(&key, value)?,
            "tol_bits" => self.tol_bits = parse_num(&key, value)?,
            "max_iter" => self.max_iter = parse_num(&key, value)?,
            _ => return Err(invalid("config", format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k, v).map_err(|e| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_m", self.area_m),
            ("altitude_m", self.altitude_m),
            ("fc_mhz", self.fc_mhz),
            ("dref_m", self.dref_m),
            ("eve_dist_m", self.eve_dist_m),
            ("tol_bits", self.tol_bits),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("sigma_sh_a_db", self.sigma_sh_a_db),
            ("sigma_sh_e_db", self.sigma_sh_e_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        for (name, v) in [
            ("atx_db", self.atx_db),
            ("arx_db", self.arx_db),
            ("snr_min_db", self.snr_min_db),
            ("rho_db", self.rho_db),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(invalid("grid", "sizes must be positive"));
        }
        if self.pilots == 0 || self.training_pilots == Some(0) {
            return Err(invalid("pilots", "must be positive"));
        }
        if self.levels == 0 {
            return Err(invalid("levels", "must be positive"));
        }
        if self.class_limit == 0 {
            return Err(invalid("class_limit", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be positive"));
        }
        if self.field_neighbors == Some(0) {
            return Err(invalid("field_neighbors", "must be positive"));
        }
        if let Some(s) = &self.sweep {
            for &v in &s.values {
                let mut c = self.clone();
                c.sweep = None;
                c.apply_axis(s.axis, v)?;
                c.validate()?;
            }
        }
        Ok(())
    }

    /// Copy with `axis` set to `value`.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let mut c = self.clone();
        c.apply_axis(axis, value)?;
        Ok(c)
    }

    fn apply_axis(&mut self, axis: SweepAxis, value: f64) -> Result<()> {
        let whole = |v: f64| -> Result<u64> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(invalid(axis.name(), format!("expects a positive integer, got {v}")))
            }
        };
        match axis {
            SweepAxis::Levels => self.levels = whole(value)? as usize,
            SweepAxis::Positions => {
                // a perfect square gives that many positions, anything else is a side length
                let n = whole(value)?;
                let side = (n as f64).sqrt().round() as u64;
                let side = if side * side == n && n > 1 { side } else { n };
                self.nx = side as usize;
                self.ny = side as usize;
            }
            SweepAxis::SnrMin => self.snr_min_db = value,
            SweepAxis::RhoDb => self.rho_db = value,
            SweepAxis::Pilots => self.pilots = whole(value)? as u32,
            SweepAxis::SigmaShA => self.sigma_sh_a_db = value,
            SweepAxis::EveDistance => self.eve_dist_m = value,
        }
        Ok(())
    }

    pub fn field_method(&self) -> FieldMethod {
        match self.field_neighbors {
            None => FieldMethod::Exact,
            Some(neighbors) => FieldMethod::NearestNeighbor { neighbors },
        }
    }

    /// One-line `key=value` rendering of every setting.
    pub fn manifest(&self) -> String {
        let opt = |o: Option<String>| o.unwrap_or_else(|| "none".into());
        let fields = [
            ("grid", format!("{}x{}", self.nx, self.ny)),
            ("area_m", self.area_m.to_string()),
            ("altitude_m", self.altitude_m.to_string()),
            ("fc_mhz", self.fc_mhz.to_string()),
            ("atx_db", self.atx_db.to_string()),
            ("arx_db", self.arx_db.to_string()),
            ("sigma_sh_a_db", self.sigma_sh_a_db.to_string()),
            ("sigma_sh_e_db", self.sigma_sh_e_db.to_string()),
            ("dref_m", self.dref_m.to_string()),
            ("eve_dist_m", self.eve_dist_m.to_string()),
            ("snr_min_db", self.snr_min_db.to_string()),
            ("rho_db", self.rho_db.to_string()),
            ("pilots", self.pilots.to_string()),
            ("levels", self.levels.to_string()),
            ("delta_e", self.delta_e.to_string()),
            ("transmissions", self.transmissions.to_string()),
            ("class_limit", self.class_limit.to_string()),
            ("seed", self.seed.to_string()),
            ("reps", self.reps.to_string()),
            ("sweep", opt(self.sweep.as_ref().map(|s| format!("\"{s}\"")))),
            ("field_neighbors", opt(self.field_neighbors.map(|v| v.to_string()))),
            ("training_pilots", opt(self.training_pilots.map(|v| v.to_string()))),
            ("tol_bits", self.tol_bits.to_string()),
            ("max_iter", self.max_iter.to_string()),
        ];
        fields.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    }
}
