//! Checks of the intermediate and regular regions on a physical trajectory.
//!
//! For each sample point x, `sigma(x)` solves `sigma |ln sigma| = (4|x|/K0)^2`
//! and `t(x) = T - sigma`. The rescaled pair
//! `u~(xi, tau) = (1/q) ln sigma + u(x + xi sqrt(sigma), t(x) + tau sigma)`
//! is compared with the flat ODE solution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ode_hat, Params};
use crate::solver::PhysicalTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescalePoint {
    pub x: f64,
    pub t_of_x: f64,
    pub sigma: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
}

impl RescalePoint {
    /// Relative residual of `|x| = (K0/4) sqrt(sigma |ln sigma|)`.
    pub fn residual(&self) -> f64 {
        let lhs = self.x.abs();
        let rhs = 0.25 * self.k0 * (self.sigma * self.sigma.ln().abs()).sqrt();
        (lhs - rhs).abs() / lhs
    }
}

/// Solves `sigma |ln sigma| = (4|x|/K0)^2` on `(0, 1/e]`.
pub fn solve_tx(x: f64, k0: f64, t_blowup: f64) -> Result<RescalePoint> {
    let c = (4.0 * x.abs() / k0).powi(2);
    let top = (-1.0f64).exp();
    if !(c > 0.0) || c > top * (1.0 + 1e-12) {
        return Err(Error::Domain { what: "|x| (outside the monotone branch of sigma |ln sigma|)", value: x });
    }
    // with sigma = e^{-l}, l >= 1: h(l) = ln l - l - ln c, decreasing
    let target = c.ln();
    let h = |l: f64| l.ln() - l - target;
    let (mut lo, mut hi) = (1.0, 2.0 * (1.0 - target) + 2.0);
    let mut l = if c >= top { 1.0 } else { (-target + (-target).ln()).max(1.0) };
    for _ in 0..200 {
        let v = h(l);
        if v > 0.0 {
            lo = l;
        } else {
            hi = l;
        }
        let slope = 1.0 / l - 1.0;
        let mut next = if slope < -1e-12 { l - v / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - l).abs() <= 1e-15 * l || hi - lo <= 1e-15 * hi {
            l = next;
            break;
        }
        l = next;
    }
    let sigma = (-l).exp();
    Ok(RescalePoint { x, t_of_x: t_blowup - sigma, sigma, k0 })
}

/// `(u~, v~)` at `(xi, tau)` for the point `rp`.
pub fn extract_rescaled(traj: &PhysicalTrajectory, xi: f64, tau: f64, rp: &RescalePoint) -> Result<(f64, f64)> {
    let Params { p, q, .. } = traj.params;
    let root = rp.sigma.sqrt();
    let (u, v) = traj.sample(rp.x + xi * root, rp.t_of_x + tau * rp.sigma)?;
    let l = rp.sigma.ln();
    Ok((l / q + u, l / p + v))
}

/// `(d_xi u~, d_xi v~)` at `(xi, tau)`.
pub fn extract_rescaled_dxi(traj: &PhysicalTrajectory, xi: f64, tau: f64, rp: &RescalePoint) -> Result<(f64, f64)> {
    let root = rp.sigma.sqrt();
    let (_, (du, dv)) = traj.sample_with_dx(rp.x + xi * root, rp.t_of_x + tau * rp.sigma)?;
    Ok((du * root, dv * root))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionThresholds {
    pub delta0: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    pub eta0: f64,
    pub eps0: f64,
    pub alpha0: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
}

impl RegionThresholds {
    /// `(1/2) min(|u^(1)|, |v^(1)|)`.
    pub fn default_delta0(k0: f64, params: &Params) -> Result<f64> {
        let (u, v) = ode_hat(1.0, k0, params)?;
        Ok(0.5 * u.abs().min(v.abs()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub x: f64,
    pub sigma: f64,
    /// `tau(x, t_check)`.
    pub tau_check: f64,
    /// Lower end of the covered tau window (0 unless the run starts later).
    pub tau_lo: f64,
    pub dev_u_point: f64,
    pub dev_v_point: f64,
    pub dev_u_sup: f64,
    pub dev_v_sup: f64,
    /// `sup |d_xi u~| sqrt|ln sigma|` at `tau_check` and over the window.
    pub grad_point: f64,
    pub grad_sup: f64,
    pub pass_point: bool,
    pub pass_sup: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub t_blowup: f64,
    pub t_check: f64,
    pub thresholds: RegionThresholds,
    pub rows: Vec<RegionRow>,
    /// Regular region `|x| >= eps0/4`: sup over records of `|u(x,t) - u(x,t0)|`
    /// and of the x-derivative drift (both components).
    pub drift: f64,
    pub drift_dx: f64,
    pub pass_intermediate_point: bool,
    pub pass_intermediate_sup: bool,
    pub pass_regular: bool,
    pub pass: bool,
    /// Largest change of any row deviation when T moves by `+- dT`.
    pub t_sensitivity: Option<Sensitivity>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub dt: f64,
    pub max_change: f64,
    pub pass_plus: bool,
    pub pass_minus: bool,
}

pub const X_SAMPLES: usize = 32;
pub const XI_SAMPLES: usize = 33;

fn row(traj: &PhysicalTrajectory, x: f64, t_blowup: f64, t_check: f64, th: &RegionThresholds) -> Result<RegionRow> {
    let params = &traj.params;
    let rp = solve_tx(x, th.k0, t_blowup)?;
    let tau_check = (t_check - rp.t_of_x) / rp.sigma;
    let tau_lo = ((traj.times[0] - rp.t_of_x) / rp.sigma).max(0.0).min(tau_check);
    let half = th.alpha0 * rp.sigma.ln().abs().sqrt();
    let xis: Vec<f64> = (0..XI_SAMPLES).map(|k| -half + 2.0 * half * k as f64 / (XI_SAMPLES - 1) as f64).collect();
    // window taus: record times inside [tau_lo, tau_check] plus both ends
    let mut taus = vec![tau_lo];
    for &t in &traj.times {
        let tau = (t - rp.t_of_x) / rp.sigma;
        if tau > tau_lo && tau < tau_check {
            taus.push(tau);
        }
    }
    taus.push(tau_check);
    let lns = rp.sigma.ln().abs().sqrt();
    let mut out = RegionRow {
        x,
        sigma: rp.sigma,
        tau_check,
        tau_lo,
        dev_u_point: 0.0,
        dev_v_point: 0.0,
        dev_u_sup: 0.0,
        dev_v_sup: 0.0,
        grad_point: 0.0,
        grad_sup: 0.0,
        pass_point: false,
        pass_sup: false,
    };
    for (k, &tau) in taus.iter().enumerate() {
        let (uh, vh) = ode_hat(tau, th.k0, params)?;
        let last = k + 1 == taus.len();
        for &xi in &xis {
            let (ut, vt) = extract_rescaled(traj, xi, tau, &rp)?;
            let (gu, gv) = extract_rescaled_dxi(traj, xi, tau, &rp)?;
            let (du, dv) = ((ut - uh).abs(), (vt - vh).abs());
            let g = gu.abs().max(gv.abs()) * lns;
            out.dev_u_sup = out.dev_u_sup.max(du);
            out.dev_v_sup = out.dev_v_sup.max(dv);
            out.grad_sup = out.grad_sup.max(g);
            if last {
                out.dev_u_point = out.dev_u_point.max(du);
                out.dev_v_point = out.dev_v_point.max(dv);
                out.grad_point = out.grad_point.max(g);
            }
        }
    }
    out.pass_point = out.dev_u_point <= th.delta0 && out.dev_v_point <= th.delta0 && out.grad_point <= th.c0;
    out.pass_sup = out.dev_u_sup <= th.delta0 && out.dev_v_sup <= th.delta0 && out.grad_sup <= th.c0;
    Ok(out)
}

/// Log-spaced sample of the intermediate region at `t_check`.
pub fn x_sample(t_blowup: f64, t_check: f64, th: &RegionThresholds) -> Result<Vec<f64>> {
    let rem = t_blowup - t_check;
    if !(rem > 0.0 && rem < 1.0) {
        return Err(Error::Domain { what: "T - t_check", value: rem });
    }
    let lo = 0.25 * th.k0 * (rem * rem.ln().abs()).sqrt();
    let hi = th.eps0;
    if !(lo < hi) {
        return Err(Error::Domain { what: "intermediate-region inner edge (above eps0)", value: lo });
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..X_SAMPLES).map(|k| (a + (b - a) * k as f64 / (X_SAMPLES - 1) as f64).exp()).collect())
}

fn drift(traj: &PhysicalTrajectory, eps0: f64) -> (f64, f64) {
    let x = &traj.grid.x;
    let slope = |f: &[f64], i: usize| -> f64 {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(x.len() - 1));
        (f[b] - f[a]) / (x[b] - x[a])
    };
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for k in 1..traj.times.len() {
        for i in 0..x.len() {
            if x[i].abs() < 0.25 * eps0 {
                continue;
            }
            for (f, f0) in [(&traj.u[k], &traj.u[0]), (&traj.v[k], &traj.v[0])] {
                d0 = d0.max((f[i] - f0[i]).abs());
                d1 = d1.max((slope(f, i) - slope(f0, i)).abs());
            }
        }
    }
    (d0, d1)
}

fn report_at(
    traj: &PhysicalTrajectory,
    t_blowup: f64,
    t_check: f64,
    th: &RegionThresholds,
    xs: &[f64],
) -> Result<RegionReport> {
    let rows: Vec<RegionRow> = xs.par_iter().map(|&x| row(traj, x, t_blowup, t_check, th)).collect::<Result<_>>()?;
    let (d0, d1) = drift(traj, th.eps0);
    let pp = rows.iter().all(|r| r.pass_point);
    let ps = rows.iter().all(|r| r.pass_sup);
    let pr = d0 <= th.eta0 && d1 <= th.eta0;
    Ok(RegionReport {
        t_blowup,
        t_check,
        thresholds: *th,
        rows,
        drift: d0,
        drift_dx: d1,
        pass_intermediate_point: pp,
        pass_intermediate_sup: ps,
        pass_regular: pr,
        pass: pp && pr,
        t_sensitivity: None,
    })
}

/// Full report at `t_check`, with the T-sensitivity block (same x sample). The perturbation is
/// `dT = rel_dt (T - t0)`; when T moves down, `t_check` moves with it so that
/// `T - t_check` is unchanged.
pub fn verify_regions(
    traj: &PhysicalTrajectory,
    t_blowup: f64,
    t_check: f64,
    th: &RegionThresholds,
    rel_dt: f64,
) -> Result<RegionReport> {
    // the xi window spans |x| (4 alpha0 / K0); it must not reach the blow-up point
    if !(4.0 * th.alpha0 < th.k0) {
        return Err(Error::InvalidParameter(format!("alpha0 = {} must be below K0/4", th.alpha0)));
    }
    let xs = x_sample(t_blowup, t_check, th)?;
    let mut rep = report_at(traj, t_blowup, t_check, th, &xs)?;
    if rel_dt > 0.0 {
        let dt = rel_dt * (t_blowup - traj.times[0]);
        let gap = t_blowup - t_check;
        let plus = report_at(traj, t_blowup + dt, t_check, th, &xs)?;
        let minus = report_at(traj, t_blowup - dt, (t_blowup - dt - gap).min(t_check), th, &xs)?;
        let mut change = 0.0f64;
        for other in [&plus, &minus] {
            for (a, b) in rep.rows.iter().zip(&other.rows) {
                for (l, r) in [
                    (a.dev_u_point, b.dev_u_point),
                    (a.dev_v_point, b.dev_v_point),
                    (a.dev_u_sup, b.dev_u_sup),
                    (a.dev_v_sup, b.dev_v_sup),
                ] {
                    change = change.max((l - r).abs());
                }
            }
        }
        rep.t_sensitivity = Some(Sensitivity { dt, max_change: change, pass_plus: plus.pass, pass_minus: minus.pass });
    }
    Ok(rep)
}
