//! Parameters, closed-form profiles and variable changes for
//! `u_t = u_xx + exp(p v)`, `v_t = mu v_xx + exp(q u)`.
//!
//! Everything here is one-dimensional and radial: `y`, `z` and `x` are the
//! scalar coordinate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub p: f64,
    pub q: f64,
    pub mu: f64,
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

impl Params {
    pub fn new(p: f64, q: f64, mu: f64) -> Result<Self> {
        let out = Params { p, q, mu, dim: 1 };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("q", self.q), ("mu", self.mu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.dim != 1 {
            return Err(Error::InvalidParameter(format!("dim = {} (only 1 is supported)", self.dim)));
        }
        Ok(())
    }

    pub fn b(&self) -> f64 {
        1.0 / (2.0 * (self.mu + 1.0))
    }

    /// The pair with p and q exchanged.
    pub fn swapped(&self) -> Params {
        Params { p: self.q, q: self.p, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityFrame {
    pub t_blowup: f64,
    pub s0: f64,
}

impl SimilarityFrame {
    pub fn new(t_blowup: f64, t0: f64) -> Result<Self> {
        if t0 >= t_blowup {
            return Err(Error::Domain { what: "t0 (must be < T)", value: t0 });
        }
        Ok(SimilarityFrame { t_blowup, s0: -(t_blowup - t0).ln() })
    }

    pub fn t0(&self) -> f64 {
        self.t_blowup - (-self.s0).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileValue {
    pub phi: f64,
    pub psi: f64,
}

/// Value and first derivatives of a scalar field in (y, s).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub dy: f64,
    pub dyy: f64,
    pub ds: f64,
}

pub fn profile_star(z: f64, params: &Params) -> ProfileValue {
    let f = 1.0 / (1.0 + params.b() * z * z);
    ProfileValue { phi: f / params.p, psi: f / params.q }
}

/// `d/dz` of the profile pair.
pub fn profile_star_dz(z: f64, params: &Params) -> ProfileValue {
    let b = params.b();
    let f = 1.0 / (1.0 + b * z * z);
    let d = -2.0 * b * z * f * f;
    ProfileValue { phi: d / params.p, psi: d / params.q }
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "similarity time s", value: s })
    }
}

pub fn approx_profile(y: f64, s: f64, params: &Params) -> Result<ProfileValue> {
    let (a, b) = approx_profile_jet(y, s, params)?;
    Ok(ProfileValue { phi: a.v, psi: b.v })
}

/// Closed-form jets of the approximate profile (phi, psi).
pub fn approx_profile_jet(y: f64, s: f64, params: &Params) -> Result<(Jet, Jet)> {
    check_s(s)?;
    let Params { p, q, mu, .. } = *params;
    let b = params.b();
    let w = b * y * y / s;
    let f = 1.0 / (1.0 + w);
    let f_y = -2.0 * b * y / s * f * f;
    let f_yy = -2.0 * b / s * f * f + 8.0 * b * b * y * y / (s * s) * f * f * f;
    let f_s = w / s * f * f;
    let dc = mu / (p * (1.0 + mu));
    let ec = 1.0 / (q * (1.0 + mu));
    let phi = Jet { v: f / p + dc / s, dy: f_y / p, dyy: f_yy / p, ds: f_s / p - dc / (s * s) };
    let psi = Jet { v: f / q + ec / s, dy: f_y / q, dyy: f_yy / q, ds: f_s / q - ec / (s * s) };
    Ok((phi, psi))
}

/// V = [[q psi - 1, q(phi - 1/p)], [p(psi - 1/q), p phi - 1]].
pub fn potential_matrix(y: f64, s: f64, params: &Params) -> Result<[[f64; 2]; 2]> {
    let v = approx_profile(y, s, params)?;
    let Params { p, q, .. } = *params;
    Ok([[q * v.psi - 1.0, q * (v.phi - 1.0 / p)], [p * (v.psi - 1.0 / q), p * v.phi - 1.0]])
}

/// Error (R1, R2) made by the approximate profile in the (Phi, Psi) system.
pub fn residual_pair(y: f64, s: f64, params: &Params) -> Result<(f64, f64)> {
    let (a, b) = approx_profile_jet(y, s, params)?;
    let Params { p, q, mu, .. } = *params;
    let r1 = -a.ds + a.dyy - 0.5 * y * a.dy - a.v + q * a.v * b.v - a.dy * a.dy / a.v;
    let r2 = -b.ds + mu * b.dyy - 0.5 * y * b.dy - b.v + p * a.v * b.v - mu * b.dy * b.dy / b.v;
    Ok((r1, r2))
}

/// Limit of `s^2 (R1, R2)(y, s)` at fixed y.
pub fn residual_limit(y: f64, params: &Params) -> (f64, f64) {
    let Params { p, q, mu, .. } = *params;
    let m1 = 1.0 + mu;
    let r1 = mu * (2.0 + mu) / (p * m1 * m1) + (1.0 - mu * mu) / (p * m1 * m1 * m1) * y * y;
    let r2 = (1.0 + 2.0 * mu) / (q * m1 * m1) + (mu * mu - 1.0) / (q * m1 * m1 * m1) * y * y;
    (r1, r2)
}

/// First tau at which the flat ODE solution ceases to exist.
pub fn ode_hat_singularity(k0: f64, params: &Params) -> f64 {
    1.0 + k0 * k0 / (32.0 * (params.mu + 1.0))
}

/// Spatially flat solution used in the intermediate region.
pub fn ode_hat(tau: f64, k0: f64, params: &Params) -> Result<(f64, f64)> {
    let gap = ode_hat_singularity(k0, params) - tau;
    if !(gap > 0.0) {
        return Err(Error::Domain { what: "tau (past the ODE singularity)", value: tau });
    }
    let Params { p, q, .. } = *params;
    Ok((-(p * gap).ln() / q, -(q * gap).ln() / p))
}

fn check_unit(x: f64) -> Result<f64> {
    let ax = x.abs();
    if ax > 0.0 && ax < 1.0 {
        Ok(ax)
    } else {
        Err(Error::Domain { what: "|x| (needs 0 < |x| < 1)", value: x })
    }
}

/// Asymptotic final profile with the constant `2b`.
pub fn final_profile(x: f64, params: &Params) -> Result<(f64, f64)> {
    let ax = check_unit(x)?;
    let Params { p, q, .. } = *params;
    let core = 2.0 * params.b() * ax.ln().abs() / (ax * ax);
    Ok(((core / p).ln() / q, (core / q).ln() / p))
}

/// Same asymptote with the constant `4(mu+1) = 2/b` carried by the initial data.
pub fn final_profile_matched(x: f64, params: &Params) -> Result<(f64, f64)> {
    let ax = check_unit(x)?;
    let Params { p, q, .. } = *params;
    let core = 2.0 / params.b() * ax.ln().abs() / (ax * ax);
    Ok(((core / p).ln() / q, (core / q).ln() / p))
}

/// Inner edge of the blend in the far-field data.
pub const STAR_INNER: f64 = 0.5;

fn star_inner(x: f64, c: f64) -> (f64, f64) {
    // ln(c |ln x| / x^2) and its derivative, 0 < x < 1
    let l = x.ln();
    ((c * l.abs() / (x * x)).ln(), 1.0 / (x * l) - 2.0 / x)
}

fn star_outer(x: f64, a: f64) -> (f64, f64) {
    (-(1.0 + a * x * x).ln(), -2.0 * a * x / (1.0 + a * x * x))
}

/// Prepared far-field data `(hat u_*, hat v_*)` at |x| > 0.
pub fn hat_star(x: f64, a: f64, params: &Params) -> Result<(f64, f64)> {
    let ax = x.abs();
    if !(ax > 0.0) {
        return Err(Error::Domain { what: "|x| for the prepared far field", value: x });
    }
    let c = 4.0 * (params.mu + 1.0);
    let one = |cp: f64| -> f64 {
        let cc = c / cp;
        if ax <= STAR_INNER {
            star_inner(ax, cc).0
        } else if ax >= 1.0 {
            star_outer(ax, a).0
        } else {
            let (y0, m0) = star_inner(STAR_INNER, cc);
            let (y1, m1) = star_outer(1.0, a);
            let h = 1.0 - STAR_INNER;
            let t = (ax - STAR_INNER) / h;
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * h * m0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * h * m1
        }
    };
    Ok((one(params.p), one(params.q)))
}

/// Smooth non-increasing cutoff: 1 on [0,1], 0 on [2, inf).
pub fn chi0(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let g = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = g(2.0 - r);
    a / (a + g(r - 1.0))
}

/// `chi(y, s) = chi0(|y| / (K0 sqrt s))`.
pub fn chi(y: f64, s: f64, k0: f64) -> f64 {
    chi0(y / (k0 * s.sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityPoint {
    pub phi: f64,
    pub psi: f64,
    pub y: f64,
    pub s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalPoint {
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub t: f64,
}

pub fn similarity_transform(pt: PhysicalPoint, frame: &SimilarityFrame, params: &Params) -> Result<SimilarityPoint> {
    let sigma = frame.t_blowup - pt.t;
    if !(sigma > 0.0) {
        return Err(Error::Domain { what: "t (must be < T)", value: pt.t });
    }
    Ok(SimilarityPoint {
        phi: (sigma.ln() + params.q * pt.u).exp(),
        psi: (sigma.ln() + params.p * pt.v).exp(),
        y: pt.x / sigma.sqrt(),
        s: -sigma.ln(),
    })
}

pub fn inverse_similarity_transform(
    pt: SimilarityPoint,
    frame: &SimilarityFrame,
    params: &Params,
) -> Result<PhysicalPoint> {
    if !(pt.phi > 0.0 && pt.psi > 0.0) {
        return Err(Error::Domain { what: "Phi or Psi (must be positive)", value: pt.phi.min(pt.psi) });
    }
    let sigma = (-pt.s).exp();
    Ok(PhysicalPoint {
        u: (pt.phi.ln() + pt.s) / params.q,
        v: (pt.psi.ln() + pt.s) / params.p,
        x: pt.y * sigma.sqrt(),
        t: frame.t_blowup - sigma,
    })
}
