//! The original system `u_t = u_xx + e^{pv}`, `v_t = mu v_xx + e^{qu}` on a
//! fixed, possibly stretched x-grid with zero-flux ends.
//!
//! Strang splitting: half a reaction step (RK4, nodewise), a backward-Euler
//! diffusion step, another half reaction step. Steps shrink like `1 / sup e^{qu}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::linalg::{cubic_at, solve_tridiagonal};
use crate::error::{Error, Result};
use crate::model::Params;

#[derive(Clone, Debug, PartialEq)]
pub struct PhysGrid {
    pub x: Vec<f64>,
}

impl PhysGrid {
    pub fn uniform(half_width: f64, points: usize) -> Result<Self> {
        check(half_width, points)?;
        let h = 2.0 * half_width / (points - 1) as f64;
        let mid = (points - 1) as f64 / 2.0;
        Ok(PhysGrid { x: (0..points).map(|i| (i as f64 - mid) * h).collect() })
    }

    /// `x = X sinh(beta t) / sinh(beta)` for uniform t in [-1, 1], with beta
    /// chosen so that the spacing at the center is `h_min`.
    pub fn stretched(half_width: f64, points: usize, h_min: f64) -> Result<Self> {
        check(half_width, points)?;
        let dt = 2.0 / (points - 1) as f64;
        let ratio = half_width * dt / h_min;
        if !(ratio > 1.0) {
            return Self::uniform(half_width, points);
        }
        // solve sinh(b)/b = ratio
        let mut beta = (2.0 * ratio).ln().max(1.0);
        for _ in 0..100 {
            let f = beta.sinh() / beta - ratio;
            let df = (beta * beta.cosh() - beta.sinh()) / (beta * beta);
            let step = f / df;
            beta -= step;
            if step.abs() < 1e-14 * beta {
                break;
            }
        }
        let mid = (points - 1) as f64 / 2.0;
        let x = (0..points).map(|i| half_width * ((i as f64 - mid) * dt * beta).sinh() / beta.sinh()).collect();
        Ok(PhysGrid { x })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn center(&self) -> usize {
        self.x.len() / 2
    }

    /// Control-volume widths (half cells at the ends).
    pub fn widths(&self) -> Vec<f64> {
        let x = &self.x;
        let n = x.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
                0.5 * (l + r)
            })
            .collect()
    }
}

fn check(half_width: f64, points: usize) -> Result<()> {
    if points < 5 || points % 2 == 0 {
        return Err(Error::InvalidParameter(format!("physical grid needs an odd count >= 5, got {points}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidParameter(format!("half width {half_width}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalOptions {
    pub t_end: f64,
    /// `dt = dt_factor / max(p e^{qu}, q e^{pv})`, capped by `dt_max`.
    pub dt_factor: f64,
    pub dt_max: f64,
    /// Normal stop once `max e^{qu}` reaches this level.
    pub stop_level: f64,
    /// Record a snapshot each time `ln max e^{qu}` grows by this much
    /// (or `dt_max * 50` passes).
    pub record_dlog: f64,
    /// Test hook: switch the reaction off.
    pub reaction: bool,
    pub max_steps: usize,
}

impl Default for PhysicalOptions {
    fn default() -> Self {
        PhysicalOptions {
            t_end: f64::INFINITY,
            dt_factor: 0.005,
            dt_max: 1e-3,
            stop_level: 1e10,
            record_dlog: 0.05,
            reaction: true,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TEnd,
    Level,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalTrajectory {
    pub params: Params,
    pub grid: Arc<PhysGrid>,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub stop: StopReason,
    pub steps: usize,
}

fn max_exp(u: &[f64], scale: f64) -> f64 {
    u.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(scale * x))
}

fn reaction(u: &mut [f64], v: &mut [f64], dt: f64, p: f64, q: f64) {
    let f = |a: f64, b: f64| ((p * b).exp(), (q * a).exp());
    for (a, b) in u.iter_mut().zip(v.iter_mut()) {
        let (k1a, k1b) = f(*a, *b);
        let (k2a, k2b) = f(*a + 0.5 * dt * k1a, *b + 0.5 * dt * k1b);
        let (k3a, k3b) = f(*a + 0.5 * dt * k2a, *b + 0.5 * dt * k2b);
        let (k4a, k4b) = f(*a + dt * k3a, *b + dt * k3b);
        *a += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        *b += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    }
}

struct Diffusion {
    lo: Vec<f64>,
    hi: Vec<f64>,
    w: Vec<f64>,
    work: Vec<f64>,
}

impl Diffusion {
    fn new(grid: &PhysGrid) -> Self {
        let x = &grid.x;
        let n = x.len();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for i in 0..n {
            if i > 0 {
                lo[i] = 1.0 / (x[i] - x[i - 1]);
            }
            if i + 1 < n {
                hi[i] = 1.0 / (x[i + 1] - x[i]);
            }
        }
        Diffusion { lo, hi, w: grid.widths(), work: Vec::new() }
    }

    /// Backward Euler for `w_i u_i' = D (flux_{i+1/2} - flux_{i-1/2})`.
    fn apply(&mut self, u: &mut [f64], d: f64, dt: f64) {
        let n = u.len();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            let r = dt * d / self.w[i];
            a[i] = -r * self.lo[i];
            c[i] = -r * self.hi[i];
            b[i] = 1.0 + r * (self.lo[i] + self.hi[i]);
        }
        solve_tridiagonal(&a, &b, &c, u, &mut self.work);
    }
}

/// Integrate from `t0` until `t_end` or the stop level, whichever comes first.
pub fn run_physical(
    params: &Params,
    grid: Arc<PhysGrid>,
    u0: Vec<f64>,
    v0: Vec<f64>,
    t0: f64,
    opts: &PhysicalOptions,
) -> Result<PhysicalTrajectory> {
    params.validate()?;
    if u0.len() != grid.len() || v0.len() != grid.len() {
        return Err(Error::InvalidParameter("initial data length does not match the grid".into()));
    }
    let Params { p, q, mu, .. } = *params;
    let mut diff = Diffusion::new(&grid);
    let (mut u, mut v) = (u0, v0);
    let mut t = t0;
    let mut traj = PhysicalTrajectory {
        params: *params,
        grid: grid.clone(),
        times: vec![t],
        u: vec![u.clone()],
        v: vec![v.clone()],
        stop: StopReason::TEnd,
        steps: 0,
    };
    let mut last_log = max_exp(&u, q);
    let mut last_t = t;
    let stop_log = opts.stop_level.ln();
    while t < opts.t_end {
        let lu = max_exp(&u, q);
        let lv = max_exp(&v, p);
        if lu >= stop_log {
            traj.stop = StopReason::Level;
            break;
        }
        if traj.steps >= opts.max_steps {
            return Err(Error::NoBlowup(format!("step budget exhausted at t = {t}")));
        }
        let rate = if opts.reaction { (p.ln() + lu).max(q.ln() + lv).exp() } else { 0.0 };
        let mut dt = if rate > 0.0 { opts.dt_factor / rate } else { opts.dt_max };
        dt = dt.min(opts.dt_max).min(opts.t_end - t);
        if opts.reaction {
            reaction(&mut u, &mut v, 0.5 * dt, p, q);
        }
        diff.apply(&mut u, 1.0, dt);
        diff.apply(&mut v, mu, dt);
        if opts.reaction {
            reaction(&mut u, &mut v, 0.5 * dt, p, q);
        }
        t += dt;
        traj.steps += 1;
        let lu = max_exp(&u, q);
        if !lu.is_finite() || !max_exp(&v, p).is_finite() || lu > 700.0 {
            return Err(Error::Overflow { t });
        }
        if lu - last_log >= opts.record_dlog || t - last_t >= 50.0 * opts.dt_max || t >= opts.t_end {
            traj.times.push(t);
            traj.u.push(u.clone());
            traj.v.push(v.clone());
            last_log = lu;
            last_t = t;
        }
    }
    if *traj.times.last().unwrap() < t {
        traj.times.push(t);
        traj.u.push(u);
        traj.v.push(v);
    }
    Ok(traj)
}

impl PhysicalTrajectory {
    pub fn t_last(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.grid.x[0], *self.grid.x.last().unwrap())
    }

    /// `(u, v)` at `(x, t)`: cubic in x, linear in t.
    pub fn sample(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        Ok(self.sample_with_dx(x, t)?.0)
    }

    /// Values and x-derivatives at `(x, t)`.
    pub fn sample_with_dx(&self, x: f64, t: f64) -> Result<((f64, f64), (f64, f64))> {
        let (t_lo, t_hi) = (self.times[0], self.t_last());
        // absorb round-off at the ends
        let slack = 1e-12 * (t_hi - t_lo).abs().max(t_hi.abs());
        if !(t >= t_lo - slack && t <= t_hi + slack) {
            return Err(Error::Coverage { y: t, lo: t_lo, hi: t_hi });
        }
        let t = t.clamp(t_lo, t_hi);
        let k = match self.times.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(self.times.len() - 1),
            Err(i) => i - 1,
        };
        let (lo, hi) = self.x_range();
        let at = |j: usize| -> Result<((f64, f64), (f64, f64))> {
            let cov = Error::Coverage { y: x, lo, hi };
            let (a, da) = cubic_at(&self.grid.x, &self.u[j], x).ok_or(cov.clone())?;
            let (b, db) = cubic_at(&self.grid.x, &self.v[j], x).ok_or(cov)?;
            Ok(((a, b), (da, db)))
        };
        if k + 1 >= self.times.len() {
            return at(k);
        }
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        let ((a0, b0), (da0, db0)) = at(k)?;
        let ((a1, b1), (da1, db1)) = at(k + 1)?;
        let mix = |l: f64, r: f64| l + w * (r - l);
        Ok(((mix(a0, a1), mix(b0, b1)), (mix(da0, da1), mix(db0, db1))))
    }

    /// Discrete mass `sum w_i u_i` of a record.
    pub fn mass(&self, record: usize) -> (f64, f64) {
        let w = self.grid.widths();
        let m = |f: &[f64]| f.iter().zip(&w).map(|(a, b)| a * b).sum();
        (m(&self.u[record]), m(&self.v[record]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub t_blowup: f64,
    /// RMS of the fit residual relative to the mean of the fitted quantity.
    pub residual: f64,
    pub slope: f64,
    /// Node index of `argmax u` at the last record.
    pub peak_index: usize,
}

/// Fit `e^{-q u(0, t)} / p ~ alpha + beta t` over the last `window` records
/// and return the root `-alpha / beta`.
pub fn estimate_blowup_time(traj: &PhysicalTrajectory, window: usize) -> Result<BlowupFit> {
    let n = traj.times.len();
    if window < 3 || n < window {
        return Err(Error::NoBlowup(format!("{n} records, window {window}")));
    }
    let Params { p, q, .. } = traj.params;
    let c = traj.grid.center();
    let start = n - window;
    let ts = &traj.times[start..];
    let ys: Vec<f64> = traj.u[start..].iter().map(|u| (-q * u[c]).exp() / p).collect();
    if ys.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::NoBlowup("center value not increasing over the fit window".into()));
    }
    let mt = ts.iter().sum::<f64>() / window as f64;
    let my = ys.iter().sum::<f64>() / window as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(&ys) {
        sxy += (t - mt) * (y - my);
        sxx += (t - mt) * (t - mt);
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mt;
    if !(slope < 0.0) {
        return Err(Error::NoBlowup(format!("fit slope {slope}")));
    }
    let rms = (ts.iter().zip(&ys).map(|(t, y)| (y - icpt - slope * t).powi(2)).sum::<f64>() / window as f64).sqrt();
    let last = traj.u.last().unwrap();
    let peak_index = last
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0;
    Ok(BlowupFit { t_blowup: -icpt / slope, residual: rms / my.abs(), slope, peak_index })
}
