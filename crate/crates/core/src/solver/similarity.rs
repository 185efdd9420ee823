//! Semi-implicit integration of the (Phi, Psi) system in the frame
//! coordinate `zeta`:
//!
//! ```text
//! d_s Phi = (1/k^2) Phi_zz - zeta (1/2 - k'/k) Phi_z - Phi + q Phi Psi - (1/k^2) Phi_z^2 / Phi
//! d_s Psi = (mu/k^2) Psi_zz - zeta (1/2 - k'/k) Psi_z - Psi + p Phi Psi - (mu/k^2) Psi_z^2 / Psi
//! ```
//!
//! Diffusion, drift and the `-Phi` term are taken implicitly, the reaction and
//! gradient quotient explicitly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::linalg::solve_tridiagonal;
use crate::error::{Error, Result};
use crate::model::{hat_star, Params};

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityState {
    pub s: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub params: Params,
    pub grid: Arc<Grid>,
}

impl SimilarityState {
    pub fn ys(&self) -> Vec<f64> {
        self.grid.ys(self.s)
    }

    pub fn center(&self) -> usize {
        self.grid.points / 2
    }

    pub fn sup_scaled(&self) -> f64 {
        let a = self.phi.iter().fold(0.0f64, |m, v| m.max(v.abs())) * self.params.p;
        let b = self.psi.iter().fold(0.0f64, |m, v| m.max(v.abs())) * self.params.q;
        a.max(b)
    }
}

/// Dirichlet data at both ends of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Boundary {
    Fixed {
        phi: f64,
        psi: f64,
    },
    /// The prepared far field held at its initial physical value:
    /// `Phi_b(s) = e^{-s} exp(q hat u_*(x_b))`, `x_b = y_b e^{-s/2}`.
    FarField {
        a: f64,
    },
}

impl Boundary {
    pub fn values(&self, y: f64, s: f64, params: &Params) -> Result<(f64, f64)> {
        match *self {
            Boundary::Fixed { phi, psi } => Ok((phi, psi)),
            Boundary::FarField { a } => {
                let x = y * (-0.5 * s).exp();
                let (u, v) = hat_star(x, a, params)?;
                Ok(((params.q * u - s).exp(), (params.p * v - s).exp()))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    pub boundary: Boundary,
    /// Positivity floor relative to `1/p` (resp. `1/q`).
    pub floor: f64,
}

impl StepOptions {
    pub fn new(boundary: Boundary) -> Self {
        StepOptions { boundary, floor: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub floor_hits: usize,
    /// Largest |y| at which the floor was applied (0 when none).
    pub floor_max_y: f64,
    /// `ds / min(dy^2, 1 / sup|q Phi Psi|)`.
    pub cfl: f64,
}

impl StepReport {
    pub fn cfl_violation(&self) -> bool {
        self.cfl > 1.0
    }
}

/// Largest step allowed by the stability heuristic `c min(dy^2, 1/|q Phi Psi|)`.
pub fn stable_ds(state: &SimilarityState, c: f64) -> f64 {
    let dy = state.grid.dy(state.s);
    let r = reaction_sup(state);
    c * (dy * dy).min(if r > 0.0 { 1.0 / r } else { f64::INFINITY })
}

fn reaction_sup(state: &SimilarityState) -> f64 {
    let pq = state.params.p.max(state.params.q);
    state.phi.iter().zip(&state.psi).fold(0.0f64, |m, (a, b)| m.max((pq * a * b).abs()))
}

struct Component<'a> {
    u: &'a [f64],
    other: &'a [f64],
    eta: f64,
    coupling: f64,
    floor: f64,
    boundary: f64,
    source: Vec<f64>,
}

/// Advance one component; returns the new values and the floor statistics.
fn advance(c: Component, grid: &Grid, s: f64, ds: f64, ys: &[f64]) -> (Vec<f64>, usize, f64) {
    let n = grid.points;
    let h = grid.h;
    let k_old = grid.kappa(s);
    let s1 = s + ds;
    let k_new = grid.kappa(s1);
    let d_old = c.eta / (k_old * k_old);
    let d_new = c.eta / (k_new * k_new);
    let w_new = 0.5 - grid.frame_rate(s1);

    let mut a = vec![0.0; n];
    let mut b = vec![1.0; n];
    let mut cc = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    rhs[0] = c.boundary;
    rhs[n - 1] = c.boundary;
    for i in 1..n - 1 {
        let u = c.u[i];
        let grad = (c.u[i + 1] - c.u[i - 1]) / (2.0 * h);
        let explicit = c.coupling * u * c.other[i] - d_old * grad * grad / u.max(c.floor);
        rhs[i] = u + ds * (explicit + c.source[i]);

        let v = grid.zeta[i] * w_new;
        // central where the cell Peclet number is at most 1, otherwise the
        // smallest added diffusion that keeps the matrix monotone
        let d = d_new.max(0.5 * v.abs() * h);
        let lo = d / (h * h) + v / (2.0 * h);
        let hi = d / (h * h) - v / (2.0 * h);
        a[i] = -ds * lo;
        cc[i] = -ds * hi;
        b[i] = 1.0 + ds * (lo + hi + 1.0);
    }
    let mut work = Vec::with_capacity(n);
    solve_tridiagonal(&a, &b, &cc, &mut rhs, &mut work);

    let mut hits = 0;
    let mut ymax = 0.0f64;
    for (i, x) in rhs.iter_mut().enumerate() {
        if !(*x > c.floor) {
            *x = c.floor;
            hits += 1;
            ymax = ymax.max(ys[i].abs());
        }
    }
    (rhs, hits, ymax)
}

/// One semi-implicit step of size `ds`.
pub fn step(state: &SimilarityState, ds: f64, opts: &StepOptions) -> Result<(SimilarityState, StepReport)> {
    step_with_source(state, ds, opts, None)
}

/// Additive forcing `(F, G)(y, s)`, taken explicitly at the old time.
pub type Source<'a> = &'a dyn Fn(f64, f64) -> (f64, f64);

pub fn step_with_source(
    state: &SimilarityState,
    ds: f64,
    opts: &StepOptions,
    source: Option<Source>,
) -> Result<(SimilarityState, StepReport)> {
    if !(ds > 0.0 && ds.is_finite()) {
        return Err(Error::Domain { what: "ds (must be > 0)", value: ds });
    }
    let grid = &*state.grid;
    let Params { p, q, mu, .. } = state.params;
    let s1 = state.s + ds;
    let y_end = grid.y(grid.points - 1, s1);
    let (bphi, bpsi) = opts.boundary.values(y_end, s1, &state.params)?;
    let ys = grid.ys(s1);
    let cfl = ds / stable_ds(state, 1.0);
    let n = grid.points;
    let (mut f_src, mut g_src) = (vec![0.0; n], vec![0.0; n]);
    if let Some(src) = source {
        for (i, y) in grid.ys(state.s).into_iter().enumerate() {
            (f_src[i], g_src[i]) = src(y, state.s);
        }
    }

    let phi_c = Component {
        u: &state.phi,
        other: &state.psi,
        eta: 1.0,
        coupling: q,
        floor: opts.floor / p,
        boundary: bphi,
        source: f_src,
    };
    let psi_c = Component {
        u: &state.psi,
        other: &state.phi,
        eta: mu,
        coupling: p,
        floor: opts.floor / q,
        boundary: bpsi,
        source: g_src,
    };
    let (phi, h1, y1) = advance(phi_c, grid, state.s, ds, &ys);
    let (psi, h2, y2) = advance(psi_c, grid, state.s, ds, &ys);
    if let Some(i) = phi.iter().chain(&psi).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i % grid.points));
    }
    let report = StepReport { floor_hits: h1 + h2, floor_max_y: y1.max(y2), cfl };
    Ok((SimilarityState { s: s1, phi, psi, params: state.params, grid: state.grid.clone() }, report))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub step: StepOptions,
    pub ds_max: f64,
    /// Safety factor `c` in `ds <= c min(dy^2, 1/|q Phi Psi|)`.
    pub cfl: f64,
    /// Callback cadence in s; steps are shortened to land on it.
    pub record_every: f64,
    /// Stop with an error once `max(p Phi, q Psi)` exceeds this.
    pub ceiling: f64,
}

impl RunOptions {
    pub fn new(boundary: Boundary) -> Self {
        RunOptions { step: StepOptions::new(boundary), ds_max: 0.02, cfl: 0.5, record_every: 0.05, ceiling: 4.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub records: usize,
    pub floor_hits: usize,
    pub floor_max_y: f64,
    pub max_cfl: f64,
    pub stopped: bool,
}

/// Integrate to `s_end`, calling `on_record` at `s0 + k * record_every`
/// (including s0 and the final time).
pub fn run(
    state0: SimilarityState,
    s_end: f64,
    opts: &RunOptions,
    mut on_record: impl FnMut(&SimilarityState) -> Result<Control>,
) -> Result<(SimilarityState, RunSummary)> {
    let mut sum = RunSummary::default();
    let mut state = state0;
    let s0 = state.s;
    sum.records += 1;
    if on_record(&state)? == Control::Stop {
        sum.stopped = true;
        return Ok((state, sum));
    }
    if !(s_end > s0) {
        return Ok((state, sum));
    }
    let mut k = 1u64;
    loop {
        let target = (s0 + k as f64 * opts.record_every).min(s_end);
        while state.s < target {
            let ds = stable_ds(&state, opts.cfl).min(opts.ds_max);
            let (next, rep) = if state.s + ds >= target - 1e-9 * opts.record_every {
                let (mut st, rep) = step(&state, target - state.s, &opts.step)?;
                st.s = target;
                (st, rep)
            } else {
                step(&state, ds, &opts.step)?
            };
            state = next;
            sum.steps += 1;
            sum.floor_hits += rep.floor_hits;
            sum.floor_max_y = sum.floor_max_y.max(rep.floor_max_y);
            sum.max_cfl = sum.max_cfl.max(rep.cfl);
            let sup = state.sup_scaled();
            if sup > opts.ceiling {
                return Err(Error::Ceiling { s: state.s, sup });
            }
        }
        sum.records += 1;
        if on_record(&state)? == Control::Stop {
            sum.stopped = true;
            return Ok((state, sum));
        }
        if state.s >= s_end {
            return Ok((state, sum));
        }
        k += 1;
    }
}
