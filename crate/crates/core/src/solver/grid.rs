use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    /// Nodes are fixed in y.
    FixedY,
    /// Nodes are fixed in zeta = y / sqrt(s); the physical spacing grows with s.
    ScaledZ,
}

/// Uniform symmetric grid in the frame coordinate `zeta`, with
/// `y = zeta * kappa(s)` (`kappa = 1` or `sqrt(s)`).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub kind: GridKind,
    pub half_width: f64,
    pub points: usize,
    pub zeta: Vec<f64>,
    pub h: f64,
}

pub const MIN_POINTS: usize = 256;

impl Grid {
    pub fn new(kind: GridKind, half_width: f64, points: usize) -> Result<Self> {
        if points < MIN_POINTS {
            return Err(Error::InvalidParameter(format!("grid points {points} < {MIN_POINTS}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid half width {half_width}")));
        }
        let h = 2.0 * half_width / (points - 1) as f64;
        // symmetric by construction: node i and n-1-i are exact negatives
        let mid = (points - 1) as f64 / 2.0;
        let zeta = (0..points).map(|i| (i as f64 - mid) * h).collect();
        Ok(Grid { kind, half_width, points, zeta, h })
    }

    pub fn kappa(&self, s: f64) -> f64 {
        match self.kind {
            GridKind::FixedY => 1.0,
            GridKind::ScaledZ => s.sqrt(),
        }
    }

    /// `kappa'(s) / kappa(s)`.
    pub fn frame_rate(&self, s: f64) -> f64 {
        match self.kind {
            GridKind::FixedY => 0.0,
            GridKind::ScaledZ => 0.5 / s,
        }
    }

    pub fn y(&self, i: usize, s: f64) -> f64 {
        self.zeta[i] * self.kappa(s)
    }

    pub fn ys(&self, s: f64) -> Vec<f64> {
        let k = self.kappa(s);
        self.zeta.iter().map(|z| z * k).collect()
    }

    /// Physical spacing at time s.
    pub fn dy(&self, s: f64) -> f64 {
        self.h * self.kappa(s)
    }

    pub fn y_max(&self, s: f64) -> f64 {
        self.half_width * self.kappa(s)
    }
}
