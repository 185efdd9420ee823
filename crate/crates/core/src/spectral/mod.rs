//! Hermite bases, the eigensystem of the linearized operator and mode
//! projections.

pub mod eigen;
pub mod poly;
pub mod quadrature;
pub mod scalar;
pub mod tables;
pub mod verify;

pub use eigen::{build_eigensystem, build_eigensystem_exact, EigenSystem};
pub use poly::{basis_change, scaled_hermite};
pub use quadrature::HermiteBasis;
pub use scalar::Scalar;

use crate::error::{Error, Result};
use crate::model::Params;

/// The two weights used for the first and second components.
#[derive(Clone, Debug)]
pub struct Bases {
    pub one: HermiteBasis,
    pub hat: HermiteBasis,
}

impl Bases {
    pub fn new(params: &Params, m: usize, quad_order: usize) -> Result<Self> {
        Ok(Bases { one: HermiteBasis::new(1.0, m, quad_order)?, hat: HermiteBasis::new(params.mu, m, quad_order)? })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeDecomposition {
    pub theta: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    pub q: Vec<f64>,
    pub q_hat: Vec<f64>,
    pub remainder_norm: f64,
}

/// Modes from samples of (Lambda, Upsilon) at the two node sets.
pub fn project_samples(
    lam_nodes: &[f64],
    ups_nodes: &[f64],
    sys: &EigenSystem,
    bases: &Bases,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let q = bases.one.project(lam_nodes)?;
    let qh = bases.hat.project(ups_nodes)?;
    let (th, tt) = sys.modes_from_projections(&q, &qh);
    Ok((th, tt, q, qh))
}

/// Degree-M reconstruction `sum Q_n h_n`, `sum Q^_n hh_n` at y.
pub fn reconstruct(q: &[f64], q_hat: &[f64], mu: f64, y: f64) -> (f64, f64) {
    let m = q.len() - 1;
    let h = poly::scaled_hermite_all(m, 1.0, y);
    let hh = poly::scaled_hermite_all(m, mu, y);
    let a = q.iter().zip(&h).map(|(c, v)| c * v).sum();
    let b = q_hat.iter().zip(&hh).map(|(c, v)| c * v).sum();
    (a, b)
}

/// Weighted sup of the part beyond degree M over the reporting points.
pub fn remainder_norm(
    lam: impl Fn(f64) -> f64,
    ups: impl Fn(f64) -> f64,
    q: &[f64],
    q_hat: &[f64],
    mu: f64,
    report: &[f64],
) -> f64 {
    let m = q.len() - 1;
    let mut sup = 0.0f64;
    for &y in report {
        let (a, b) = reconstruct(q, q_hat, mu, y);
        let w = 1.0 + y.abs().powi(m as i32 + 1);
        sup = sup.max((lam(y) - a).abs() / w).max((ups(y) - b).abs() / w);
    }
    sup
}

pub fn project_modes(
    lam: impl Fn(f64) -> f64,
    ups: impl Fn(f64) -> f64,
    sys: &EigenSystem,
    bases: &Bases,
    report: &[f64],
) -> Result<ModeDecomposition> {
    let ln = bases.one.sample(&lam);
    let un = bases.hat.sample(&ups);
    let (theta, theta_tilde, q, q_hat) = project_samples(&ln, &un, sys, bases)?;
    let remainder_norm = remainder_norm(&lam, &ups, &q, &q_hat, sys.params.mu, report);
    Ok(ModeDecomposition { theta, theta_tilde, q, q_hat, remainder_norm })
}

/// Hermite coordinates of the quadratic null-mode forcing
/// `(q f2 g2 - p f2'^2, p f2 g2 - q mu g2'^2)`, in the h and hh bases.
pub fn quadratic_null_terms<T: Scalar>(sys: &EigenSystem<T>) -> (Vec<T>, Vec<T>) {
    let (f, g) = sys.pair_monomial(2, true);
    let fg = poly::mul(&f, &g);
    let df = poly::deriv(&f);
    let dg = poly::deriv(&g);
    let a = poly::add(&poly::scale(&fg, &sys.q), &poly::scale(&poly::mul(&df, &df), &-sys.p.clone()));
    let b =
        poly::add(&poly::scale(&fg, &sys.p), &poly::scale(&poly::mul(&dg, &dg), &-(sys.q.clone() * sys.mu.clone())));
    (poly::to_hermite(&a, &T::one()), poly::to_hermite(&b, &sys.mu))
}

/// Null-mode projection of the quadratic forcing; equals 2pq(mu+1).
pub fn quadratic_null_constant<T: Scalar>(sys: &EigenSystem<T>) -> Result<T> {
    if sys.m < 4 {
        return Err(Error::InvalidParameter("M >= 4 required".into()));
    }
    let (a, b) = quadratic_null_terms(sys);
    let (th, _) = sys.decompose(&a, &b);
    Ok(th[2].clone())
}

/// `e^{tau L_eta} g` at the points `ys`, by Gaussian convolution with the
/// Mehler kernel (mean `y e^{-tau/2}`, variance `2 eta (1 - e^{-tau})`).
pub fn semigroup_apply(g: impl Fn(f64) -> f64, tau: f64, eta: f64, ys: &[f64]) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Domain { what: "tau (must be > 0)", value: tau });
    }
    let (x, w) = quadrature::gauss_hermite_normal(64);
    let sd = (2.0 * eta * (1.0 - (-tau).exp())).sqrt();
    let decay = (-tau / 2.0).exp();
    Ok(ys
        .iter()
        .map(|&y| {
            let m = y * decay;
            x.iter().zip(&w).map(|(t, wt)| wt * g(m + sd * t)).sum()
        })
        .collect())
}
