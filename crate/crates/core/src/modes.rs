//! Mode coordinates of solver states and shrinking-set membership.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{approx_profile_jet, chi, profile_star, Params};
use crate::solver::linalg::cubic_uniform;
use crate::solver::SimilarityState;
use crate::spectral::{build_eigensystem, poly, project_samples, Bases, EigenSystem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkingSetConfig {
    #[serde(rename = "A")]
    pub amp: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "M")]
    pub m: usize,
}

/// Every threshold of the shrinking set at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Bounds {
    pub theta: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    pub remainder: f64,
    pub gradient_remainder: f64,
    pub outer: f64,
}

impl ShrinkingSetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amp >= 1.0 && self.k0 >= 1.0) {
            return Err(Error::InvalidParameter(format!("A = {}, K0 = {} must be >= 1", self.amp, self.k0)));
        }
        if self.m < 4 || self.m % 2 != 0 {
            return Err(Error::InvalidParameter(format!("M = {} must be even and >= 4", self.m)));
        }
        Ok(())
    }

    pub fn bounds(&self, s: f64) -> Result<Bounds> {
        if !(s > std::f64::consts::E) {
            return Err(Error::Domain { what: "s (thresholds need s > e)", value: s });
        }
        let a = self.amp;
        let m = self.m;
        let s2 = s * s;
        let high = |j: usize| a.powi(j as i32) * s.powf(-((j + 1) as f64) / 2.0);
        let theta = (0..=m)
            .map(|j| match j {
                0 | 1 => a / s2,
                2 => a.powi(4) * s.ln() / s2,
                _ => high(j),
            })
            .collect();
        let theta_tilde = (0..=m).map(|j| if j <= 2 { a * a / s2 } else { high(j) }).collect();
        let tail = s.powf(-((m + 2) as f64) / 2.0);
        Ok(Bounds {
            theta,
            theta_tilde,
            remainder: a.powi(m as i32 + 1) * tail,
            gradient_remainder: a.powi(m as i32 + 2) * tail,
            outer: a.powi(m as i32 + 2) / s.sqrt(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coord {
    Theta(usize),
    ThetaTilde(usize),
    Remainder,
    GradientRemainder,
    Outer,
}

impl Coord {
    /// True for the two unstable directions.
    pub fn is_unstable(&self) -> bool {
        matches!(self, Coord::Theta(0) | Coord::Theta(1))
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::Theta(n) => write!(f, "theta_{n}"),
            Coord::ThetaTilde(n) => write!(f, "theta_tilde_{n}"),
            Coord::Remainder => write!(f, "remainder"),
            Coord::GradientRemainder => write!(f, "gradient_remainder"),
            Coord::Outer => write!(f, "outer"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub coord: Coord,
    /// `|value| / bound`; above 1 for a violation.
    pub margin: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub s: f64,
    pub theta: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    /// Modes of `(Phi - 1/p, Psi - 1/q)`, i.e. measured from the constant
    /// state rather than from the approximate profile.
    pub theta_bar: Vec<f64>,
    pub remainder_norm: f64,
    pub gradient_remainder_norm: f64,
    pub outer_norm: f64,
    pub in_set: bool,
    /// The violated coordinate with the largest margin.
    pub first_violation: Option<Violation>,
    pub violations: Vec<Violation>,
}

/// Eigensystem, quadrature and thresholds, built once per configuration.
#[derive(Clone, Debug)]
pub struct Tracker {
    pub params: Params,
    pub sys: EigenSystem,
    pub bases: Bases,
    pub cfg: ShrinkingSetConfig,
}

impl Tracker {
    pub fn new(params: &Params, cfg: ShrinkingSetConfig, quad_order: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Tracker {
            params: *params,
            sys: build_eigensystem(params, cfg.m)?,
            bases: Bases::new(params, cfg.m, quad_order)?,
            cfg,
        })
    }

    pub fn track(&self, state: &SimilarityState) -> Result<ModeRecord> {
        track(state, &self.sys, &self.bases, &self.cfg)
    }
}

fn sample_nodes(y0: f64, dy: f64, vals: &[f64], nodes: &[f64]) -> Result<Vec<f64>> {
    let hi = y0 + dy * (vals.len() - 1) as f64;
    nodes
        .iter()
        .map(|&y| cubic_uniform(y0, dy, vals, y).map(|v| v.0).ok_or(Error::Coverage { y, lo: y0, hi }))
        .collect()
}

pub fn track(
    state: &SimilarityState,
    sys: &EigenSystem,
    bases: &Bases,
    cfg: &ShrinkingSetConfig,
) -> Result<ModeRecord> {
    let params = &state.params;
    let s = state.s;
    let ys = state.ys();
    let n = ys.len();
    let dy = state.grid.dy(s);
    let m = cfg.m;
    if sys.m != m {
        return Err(Error::InvalidParameter(format!("eigensystem M = {} but config M = {m}", sys.m)));
    }

    let mut lam = Vec::with_capacity(n);
    let mut ups = Vec::with_capacity(n);
    for (i, &y) in ys.iter().enumerate() {
        let (a, b) = approx_profile_jet(y, s, params)?;
        lam.push(state.phi[i] - a.v);
        ups.push(state.psi[i] - b.v);
    }
    let ln = sample_nodes(ys[0], dy, &lam, bases.one.nodes())?;
    let un = sample_nodes(ys[0], dy, &ups, bases.hat.nodes())?;
    let (theta, theta_tilde, q, q_hat) = project_samples(&ln, &un, sys, bases)?;

    // the same perturbation measured from (1/p, 1/q)
    let shift = |nodes: &[f64], vals: &[f64], first: bool| -> Result<Vec<f64>> {
        nodes
            .iter()
            .zip(vals)
            .map(|(&y, v)| {
                let (a, b) = approx_profile_jet(y, s, params)?;
                Ok(if first { v + a.v - 1.0 / params.p } else { v + b.v - 1.0 / params.q })
            })
            .collect()
    };
    let lb = shift(bases.one.nodes(), &ln, true)?;
    let ub = shift(bases.hat.nodes(), &un, false)?;
    let (theta_bar, _, _, _) = project_samples(&lb, &ub, sys, bases)?;

    let inner = 2.0 * cfg.k0 * s.sqrt();
    let mut rem = 0.0f64;
    let mut grad = 0.0f64;
    let mut outer = 0.0f64;
    for i in 0..n {
        let y = ys[i];
        let cut = 1.0 - chi(y, s, cfg.k0);
        outer = outer.max((cut * lam[i]).abs()).max((cut * ups[i]).abs());
        if y.abs() > inner || i == 0 || i + 1 == n {
            continue;
        }
        let w = 1.0 + y.abs().powi(m as i32 + 1);
        let h1 = poly::scaled_hermite_all(m, 1.0, y);
        let hm = poly::scaled_hermite_all(m, params.mu, y);
        let (mut a, mut b, mut da, mut db) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..=m {
            a += q[k] * h1[k];
            b += q_hat[k] * hm[k];
            if k > 0 {
                da += q[k] * k as f64 * h1[k - 1];
                db += q_hat[k] * k as f64 * hm[k - 1];
            }
        }
        rem = rem.max((lam[i] - a).abs() / w).max((ups[i] - b).abs() / w);
        let gl = (lam[i + 1] - lam[i - 1]) / (2.0 * dy);
        let gu = (ups[i + 1] - ups[i - 1]) / (2.0 * dy);
        grad = grad.max((gl - da).abs() / w).max((gu - db).abs() / w);
    }

    let bounds = cfg.bounds(s)?;
    let mut violations = Vec::new();
    let mut check = |coord: Coord, value: f64, bound: f64| {
        let margin = value.abs() / bound;
        if !(margin <= 1.0) {
            violations.push(Violation { coord, margin, value });
        }
    };
    for j in 0..=m {
        check(Coord::Theta(j), theta[j], bounds.theta[j]);
        check(Coord::ThetaTilde(j), theta_tilde[j], bounds.theta_tilde[j]);
    }
    check(Coord::Remainder, rem, bounds.remainder);
    check(Coord::GradientRemainder, grad, bounds.gradient_remainder);
    check(Coord::Outer, outer, bounds.outer);
    let first_violation = violations.iter().copied().fold(None, |best: Option<Violation>, v| match best {
        Some(b) if b.margin >= v.margin => Some(b),
        _ => Some(v),
    });
    Ok(ModeRecord {
        s,
        theta,
        theta_tilde,
        theta_bar,
        remainder_norm: rem,
        gradient_remainder_norm: grad,
        outer_norm: outer,
        in_set: violations.is_empty(),
        first_violation,
        violations,
    })
}

/// Finite-difference checks of the mode equations along a record sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub s: Vec<f64>,
    /// `|theta_0' - theta_0| s^2`.
    pub growth0: Vec<f64>,
    /// `|theta_1' - theta_1 / 2| s^2`.
    pub growth1: Vec<f64>,
    /// `|theta_2' + 2 theta_2 / s| s^3`.
    pub null: Vec<f64>,
}

impl ResidualReport {
    pub fn max_growth0(&self) -> f64 {
        self.growth0.iter().fold(0.0, |a: f64, b| a.max(*b))
    }

    pub fn max_growth1(&self) -> f64 {
        self.growth1.iter().fold(0.0, |a: f64, b| a.max(*b))
    }

    pub fn max_null(&self) -> f64 {
        self.null.iter().fold(0.0, |a: f64, b| a.max(*b))
    }
}

/// Derivative at `xs[k]` of the Lagrange interpolant through `xs`.
fn lagrange_slope(xs: &[f64], fs: &[f64], k: usize) -> f64 {
    let mut out = 0.0;
    for j in 0..xs.len() {
        let w = if j == k {
            (0..xs.len()).filter(|&m| m != k).map(|m| 1.0 / (xs[k] - xs[m])).sum()
        } else {
            let num: f64 = (0..xs.len()).filter(|&m| m != j && m != k).map(|m| xs[k] - xs[m]).product();
            let den: f64 = (0..xs.len()).filter(|&m| m != j).map(|m| xs[j] - xs[m]).product();
            num / den
        };
        out += w * fs[j];
    }
    out
}

/// Mode-equation residuals at every record with two neighbours on each side
/// (one at the ends of the sequence).
pub fn ode_residuals(records: &[ModeRecord]) -> Result<ResidualReport> {
    let n = records.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("{n} records; need at least 3")));
    }
    let s: Vec<f64> = records.iter().map(|r| r.s).collect();
    let gaps: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
    let lo = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo > 1.1 {
        return Err(Error::Spacing(hi / lo));
    }
    let series = |j: usize| -> Vec<f64> { records.iter().map(|r| r.theta[j]).collect() };
    let (t0, t1, t2) = (series(0), series(1), series(2));
    let mut out = ResidualReport { s: vec![], growth0: vec![], growth1: vec![], null: vec![] };
    for k in 1..n - 1 {
        let (a, b) = if k >= 2 && k + 2 < n { (k - 2, k + 3) } else { (k - 1, k + 2) };
        let xs = &s[a..b];
        let c = k - a;
        let sk = s[k];
        let d0 = lagrange_slope(xs, &t0[a..b], c);
        let d1 = lagrange_slope(xs, &t1[a..b], c);
        let d2 = lagrange_slope(xs, &t2[a..b], c);
        out.s.push(sk);
        out.growth0.push((d0 - t0[k]).abs() * sk * sk);
        out.growth1.push((d1 - 0.5 * t1[k]).abs() * sk * sk);
        out.null.push((d2 + 2.0 * t2[k] / sk).abs() * sk * sk * sk);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent {
    pub s: f64,
    pub coord: Coord,
    pub sign: i8,
    pub margin: f64,
    pub theta0: f64,
    pub theta1: f64,
}

fn exit_of(r: &ModeRecord) -> Option<ExitEvent> {
    r.first_violation.map(|v| ExitEvent {
        s: r.s,
        coord: v.coord,
        sign: if v.value < 0.0 { -1 } else { 1 },
        margin: v.margin,
        theta0: r.theta[0],
        theta1: r.theta[1],
    })
}

/// First record outside the shrinking set.
pub fn check_exit(records: &[ModeRecord]) -> Option<ExitEvent> {
    records.iter().find_map(exit_of)
}

/// Streaming form of [`check_exit`]: latches the first exit.
#[derive(Clone, Debug, Default)]
pub struct ExitDetector {
    exit: Option<ExitEvent>,
}

impl ExitDetector {
    pub fn push(&mut self, record: &ModeRecord) -> Option<ExitEvent> {
        if self.exit.is_none() {
            self.exit = exit_of(record);
        }
        self.exit
    }

    pub fn exit(&self) -> Option<ExitEvent> {
        self.exit
    }
}

/// `sup |Phi(y, s) - Phi*(y / sqrt s)|` over `|y| <= K0 sqrt s`, taken over
/// both components.
pub fn profile_deviation(state: &SimilarityState, k0: f64) -> f64 {
    let root = state.s.sqrt();
    let mut sup = 0.0f64;
    for (i, y) in state.ys().into_iter().enumerate() {
        if y.abs() > k0 * root {
            continue;
        }
        let star = profile_star(y / root, &state.params);
        sup = sup.max((state.phi[i] - star.phi).abs()).max((state.psi[i] - star.psi).abs());
    }
    sup
}
