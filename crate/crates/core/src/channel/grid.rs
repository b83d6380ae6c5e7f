use crate::error::{invalid, Result};

/// Regular horizontal grid of drone positions at a fixed altitude.
///
/// Positions are enumerated row-major: index `i` maps to column `i % nx` and
/// row `i / nx`. Indices are zero-based.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionGrid {
    nx: usize,
    ny: usize,
    spacing: f64,
    altitude: f64,
    origin: [f64; 2],
}

impl PositionGrid {
    pub fn new(nx: usize, ny: usize, spacing: f64, altitude: f64, origin: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(invalid("grid", format!("dimensions must be positive, got {nx}x{ny}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid("spacing", format!("must be positive, got {spacing}")));
        }
        if !(altitude > 0.0 && altitude.is_finite()) {
            return Err(invalid("altitude", format!("must be positive, got {altitude}")));
        }
        Ok(Self {
            nx,
            ny,
            spacing,
            altitude,
            origin,
        })
    }

    /// Grid of `nx` x `ny` cell centres covering a square of side `side_m`
    /// along x, starting at the coordinate origin.
    pub fn over_area(nx: usize, ny: usize, side_m: f64, altitude: f64) -> Result<Self> {
        if nx == 0 {
            return Err(invalid("grid", "dimensions must be positive"));
        }
        let spacing = side_m / nx as f64;
        Self::new(nx, ny, spacing, altitude, [spacing / 2.0, spacing / 2.0])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn altitude(&self) -> f64 {
        self.altitude
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Position of index `i` in meters.
    ///
    /// # Panics
    ///
    /// Panics if `i >= self.len()`.
    pub fn position(&self, i: usize) -> [f64; 3] {
        assert!(i < self.len(), "position index {i} out of range for {} positions", self.len());
        let col = i % self.nx;
        let row = i / self.nx;
        [
            self.origin[0] + col as f64 * self.spacing,
            self.origin[1] + row as f64 * self.spacing,
            self.altitude,
        ]
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }

    /// Ground point below the geometric centre of the grid.
    pub fn ground_center(&self) -> [f64; 3] {
        [
            self.origin[0] + (self.nx - 1) as f64 * self.spacing / 2.0,
            self.origin[1] + (self.ny - 1) as f64 * self.spacing / 2.0,
            0.0,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Bob,
    Eve,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Role::Bob => f.write_str("bob"),
            Role::Eve => f.write_str("eve"),
        }
    }
}

/// A fixed ground receiver together with the statistics of its shadowing.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverConfig {
    pub role: Role,
    pub position: [f64; 3],
    /// Shadowing standard deviation in dB.
    pub sigma_sh_db: f64,
    /// Shadowing coherence distance in meters.
    pub d_ref: f64,
}

impl ReceiverConfig {
    pub fn new(role: Role, position: [f64; 3], sigma_sh_db: f64, d_ref: f64) -> Result<Self> {
        if !(sigma_sh_db >= 0.0 && sigma_sh_db.is_finite()) {
            return Err(invalid("sigma_sh_db", format!("must be non-negative, got {sigma_sh_db}")));
        }
        if !(d_ref > 0.0 && d_ref.is_finite()) {
            return Err(invalid("d_ref", format!("must be positive, got {d_ref}")));
        }
        Ok(Self {
            role,
            position,
            sigma_sh_db,
            d_ref,
        })
    }

    /// Bob at the ground centre of `grid`.
    pub fn bob(grid: &PositionGrid, sigma_sh_db: f64, d_ref: f64) -> Result<Self> {
        Self::new(Role::Bob, grid.ground_center(), sigma_sh_db, d_ref)
    }

    /// Eve on the ground, `distance_m` from Bob along +x.
    pub fn eve(grid: &PositionGrid, distance_m: f64, sigma_sh_db: f64, d_ref: f64) -> Result<Self> {
        if !(distance_m >= 0.0 && distance_m.is_finite()) {
            return Err(invalid("eve_dist_m", format!("must be non-negative, got {distance_m}")));
        }
        let mut p = grid.ground_center();
        p[0] += distance_m;
        Self::new(Role::Eve, p, sigma_sh_db, d_ref)
    }
}
