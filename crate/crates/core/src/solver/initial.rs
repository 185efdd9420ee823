use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::physical::PhysGrid;
use super::similarity::SimilarityState;
use crate::error::{Error, Result};
use crate::model::{approx_profile, chi0, hat_star, Params};

/// Prepared initial data at `s0`, parameterized by the shooting pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub d0: f64,
    pub d1: f64,
    #[serde(rename = "A")]
    pub amp: f64,
    pub s0: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub eps0: f64,
    /// Far-field parameter of `-ln(1 + a x^2)`.
    pub a: f64,
    /// The bump is cut off by `chi(y / bump_width, s0)`.
    #[serde(default = "one")]
    pub bump_width: f64,
}

fn one() -> f64 {
    1.0
}

impl InitialDataSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp >= 1.0) {
            return Err(Error::InvalidParameter(format!("A = {} must be >= 1", self.amp)));
        }
        if !(self.k0 >= 1.0) {
            return Err(Error::InvalidParameter(format!("K0 = {} must be >= 1", self.k0)));
        }
        if !(self.a > 0.0 && self.eps0 > 0.0 && self.bump_width > 0.0) {
            return Err(Error::InvalidParameter("a, eps0 and bump_width must be positive".into()));
        }
        // the profile core must cover the decomposition region
        if !(2.0 * self.k0 * self.s0.sqrt() < self.s0) {
            return Err(Error::InvalidParameter(format!(
                "2 K0 sqrt(s0) = {} must be below s0 = {}",
                2.0 * self.k0 * self.s0.sqrt(),
                self.s0
            )));
        }
        Ok(())
    }
}

/// `(d0 f0 + d1 f1)(y) (A / s^2) chi(y / width, s)` for both components.
pub fn bump(y: f64, s: f64, d0: f64, d1: f64, amp: f64, k0: f64, width: f64, params: &Params) -> (f64, f64) {
    let c = amp / (s * s) * chi0(y / (width * k0 * s.sqrt()));
    let l = d0 + d1 * y;
    (params.q * l * c, params.p * l * c)
}

/// `(ln Phi, ln Psi)` of the prepared data at `(y, s0)`: the log-profile core
/// (plus bump) blended into the prepared far field through `chi0(|y| / s0)`.
pub fn initial_log_values(y: f64, spec: &InitialDataSpec, params: &Params) -> Result<(f64, f64)> {
    let s0 = spec.s0;
    let blend = chi0(y / s0);
    let x = y * (-0.5 * s0).exp();
    let (mut lphi, mut lpsi) = (0.0, 0.0);
    if blend > 0.0 {
        let core = approx_profile(y, s0, params)?;
        let (bp, bq) = bump(y, s0, spec.d0, spec.d1, spec.amp, spec.k0, spec.bump_width, params);
        let (a, b) = (core.phi + bp, core.psi + bq);
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::LogArgument { x });
        }
        lphi = blend * a.ln();
        lpsi = blend * b.ln();
    }
    if blend < 1.0 {
        let (u, v) = hat_star(x, spec.a, params)?;
        lphi += (1.0 - blend) * (params.q * u - s0);
        lpsi += (1.0 - blend) * (params.p * v - s0);
    }
    Ok((lphi, lpsi))
}

pub fn build_initial_data(spec: &InitialDataSpec, params: &Params, grid: Arc<Grid>) -> Result<SimilarityState> {
    spec.validate()?;
    params.validate()?;
    let n = grid.points;
    let mut phi = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    for y in grid.ys(spec.s0) {
        let (a, b) = initial_log_values(y, spec, params)?;
        phi.push(a.exp());
        psi.push(b.exp());
    }
    Ok(SimilarityState { s: spec.s0, phi, psi, params: *params, grid })
}

/// The same data as `(u, v)(x)` at `t0 = T - e^{-s0}`.
pub fn initial_physical(spec: &InitialDataSpec, params: &Params, grid: &PhysGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    params.validate()?;
    let s0 = spec.s0;
    let scale = (0.5 * s0).exp();
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for &x in &grid.x {
        let (a, b) = initial_log_values(x * scale, spec, params)?;
        u.push((a + s0) / params.q);
        v.push((b + s0) / params.p);
    }
    Ok((u, v))
}

/// Adds the bump at the state's current time (used to restart a shot).
pub fn perturb(state: &SimilarityState, d0: f64, d1: f64, amp: f64, k0: f64, width: f64) -> Result<SimilarityState> {
    let mut out = state.clone();
    for (i, y) in state.ys().into_iter().enumerate() {
        let (bp, bq) = bump(y, state.s, d0, d1, amp, k0, width, &state.params);
        out.phi[i] += bp;
        out.psi[i] += bq;
        if !(out.phi[i] > 0.0 && out.psi[i] > 0.0) {
            return Err(Error::LogArgument { x: y * (-0.5 * state.s).exp() });
        }
    }
    Ok(out)
}

/// The approximate profile sampled on the grid at time s.
pub fn profile_state(params: &Params, grid: Arc<Grid>, s: f64) -> Result<SimilarityState> {
    let mut phi = Vec::with_capacity(grid.points);
    let mut psi = Vec::with_capacity(grid.points);
    for y in grid.ys(s) {
        let v = approx_profile(y, s, params)?;
        phi.push(v.phi);
        psi.push(v.psi);
    }
    Ok(SimilarityState { s, phi, psi, params: *params, grid })
}
