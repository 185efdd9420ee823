//! Eigenpairs of H + M, where H = diag(L_1, L_mu) and
//! M = [[0, q/p], [p/q, 0]], in the bases h_n = h~_n^(1), hh_n = h~_n^(mu).

use num_rational::BigRational;

use super::poly;
use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::model::Params;

#[derive(Clone, Debug)]
pub struct EigenSystem<T = f64> {
    pub params: Params,
    pub m: usize,
    pub p: T,
    pub q: T,
    pub mu: T,
    /// `d[n][k]`: coefficient of h_k in f_n (k <= n, same parity).
    pub d: Vec<Vec<T>>,
    /// `e[n][k]`: coefficient of hh_k in g_n.
    pub e: Vec<Vec<T>>,
    pub d_tilde: Vec<Vec<T>>,
    pub e_tilde: Vec<Vec<T>>,
    /// `proj_a[m][n]`: weight of the h_m coordinate in theta_n.
    pub proj_a: Vec<Vec<T>>,
    pub proj_b: Vec<Vec<T>>,
    pub dual_a: Vec<Vec<T>>,
    pub dual_b: Vec<Vec<T>>,
    /// `mu_to_one[k][i]`: coefficient of h_i in hh_k.
    pub mu_to_one: Vec<Vec<T>>,
    pub one_to_mu: Vec<Vec<T>>,
}

pub fn stable_eigenvalue(n: usize) -> f64 {
    1.0 - n as f64 / 2.0
}

pub fn dual_eigenvalue(n: usize) -> f64 {
    -1.0 - n as f64 / 2.0
}

pub fn build_eigensystem(params: &Params, m: usize) -> Result<EigenSystem<f64>> {
    build_generic(params, m, params.p, params.q, params.mu)
}

/// Same construction in exact rational arithmetic; the float parameters are
/// converted exactly.
pub fn build_eigensystem_exact(params: &Params, m: usize) -> Result<EigenSystem<BigRational>> {
    let c = BigRational::from_f64_exact;
    build_generic(params, m, c(params.p), c(params.q), c(params.mu))
}

pub fn build_generic<T: Scalar>(params: &Params, m: usize, p: T, q: T, mu: T) -> Result<EigenSystem<T>> {
    params.validate()?;
    if m % 2 != 0 {
        return Err(Error::InvalidParameter(format!("M = {m} must be even")));
    }
    let one = T::one();
    let mu_to_one: Vec<Vec<T>> = (0..=m).map(|k| poly::basis_change(k, &mu, &one)).collect();
    let one_to_mu: Vec<Vec<T>> = (0..=m).map(|k| poly::basis_change(k, &one, &mu)).collect();
    let mut d = Vec::with_capacity(m + 1);
    let mut e = Vec::with_capacity(m + 1);
    let mut dt = Vec::with_capacity(m + 1);
    let mut et = Vec::with_capacity(m + 1);
    for n in 0..=m {
        let (a, b) = solve_degree(n, true, &p, &q, &mu_to_one, &one_to_mu)?;
        d.push(a);
        e.push(b);
        let (a, b) = solve_degree(n, false, &p, &q, &mu_to_one, &one_to_mu)?;
        dt.push(a);
        et.push(b);
    }
    let mut sys = EigenSystem {
        params: *params,
        m,
        p,
        q,
        mu,
        d,
        e,
        d_tilde: dt,
        e_tilde: et,
        proj_a: vec![],
        proj_b: vec![],
        dual_a: vec![],
        dual_b: vec![],
        mu_to_one,
        one_to_mu,
    };
    let mut pa = vec![vec![T::zero(); m + 1]; m + 1];
    let mut pb = pa.clone();
    let mut da = pa.clone();
    let mut db = pa.clone();
    for k in 0..=m {
        let mut unit = vec![T::zero(); m + 1];
        unit[k] = T::one();
        let zero = vec![T::zero(); m + 1];
        let (th, tt) = sys.decompose(&unit, &zero);
        pa[k] = th;
        da[k] = tt;
        let (th, tt) = sys.decompose(&zero, &unit);
        pb[k] = th;
        db[k] = tt;
    }
    sys.proj_a = pa;
    sys.proj_b = pb;
    sys.dual_a = da;
    sys.dual_b = db;
    Ok(sys)
}

/// Solves one degree level by level, top down. Each level is the 2x2 system
/// `[[c, q/p], [p/q, c]] (d_i, e_i) = rhs` with `c = -i/2 - lambda`.
fn solve_degree<T: Scalar>(
    n: usize,
    stable: bool,
    p: &T,
    q: &T,
    mu_to_one: &[Vec<T>],
    one_to_mu: &[Vec<T>],
) -> Result<(Vec<T>, Vec<T>)> {
    let two = T::from_int(2);
    let lambda = if stable {
        T::one() - T::from_int(n as i64) / two.clone()
    } else {
        -T::one() - T::from_int(n as i64) / two.clone()
    };
    let qp = q.clone() / p.clone();
    let pq = p.clone() / q.clone();
    let mut d = vec![T::zero(); n + 1];
    let mut e = vec![T::zero(); n + 1];
    d[n] = q.clone();
    e[n] = if stable { p.clone() } else { -p.clone() };
    let mut i = n;
    while i >= 2 {
        i -= 2;
        let mut r1 = T::zero();
        let mut r2 = T::zero();
        let mut k = i + 2;
        while k <= n {
            r1 = r1 - qp.clone() * e[k].clone() * mu_to_one[k][i].clone();
            r2 = r2 - pq.clone() * d[k].clone() * one_to_mu[k][i].clone();
            k += 2;
        }
        let c = -T::from_int(i as i64) / two.clone() - lambda.clone();
        let det = c.clone() * c.clone() - T::one();
        let scale = c.clone() * c.clone() + T::one();
        if det.negligible(&scale) {
            // c = 1: consistency requires r2 = (p/q) r1; the free direction
            // (q, -p) is set to zero.
            if !(c.clone() - T::one()).negligible(&T::one()) {
                return Err(Error::Resonance { degree: n, level: i });
            }
            let gap = r2.clone() - pq.clone() * r1.clone();
            let mag = r2.clone() * r2.clone() + r1.clone() * r1.clone() * pq.clone() * pq.clone();
            if !(gap.clone() * gap).negligible(&mag) {
                return Err(Error::Resonance { degree: n, level: i });
            }
            d[i] = r1.clone() / two.clone();
            e[i] = pq.clone() * r1 / two.clone();
        } else {
            d[i] = (c.clone() * r1.clone() - qp.clone() * r2.clone()) / det.clone();
            e[i] = (c * r2 - pq.clone() * r1) / det;
        }
    }
    Ok((d, e))
}

impl<T: Scalar> EigenSystem<T> {
    /// Coordinates (theta, theta_tilde) of the pair whose h- and hh-coordinates
    /// are `w` and `w_hat` (degrees 0..=M).
    pub fn decompose(&self, w: &[T], w_hat: &[T]) -> (Vec<T>, Vec<T>) {
        let m = self.m;
        let mut w = w.to_vec();
        let mut wh = w_hat.to_vec();
        w.resize(m + 1, T::zero());
        wh.resize(m + 1, T::zero());
        let two = T::from_int(2);
        let mut th = vec![T::zero(); m + 1];
        let mut tt = vec![T::zero(); m + 1];
        for n in (0..=m).rev() {
            let a = w[n].clone() / (two.clone() * self.q.clone());
            let b = wh[n].clone() / (two.clone() * self.p.clone());
            let t = a.clone() + b.clone();
            let u = a - b;
            let mut k = n % 2;
            while k <= n {
                w[k] = w[k].clone() - t.clone() * self.d[n][k].clone() - u.clone() * self.d_tilde[n][k].clone();
                wh[k] = wh[k].clone() - t.clone() * self.e[n][k].clone() - u.clone() * self.e_tilde[n][k].clone();
                k += 2;
            }
            th[n] = t;
            tt[n] = u;
        }
        (th, tt)
    }

    /// Inverse of `decompose`: h- and hh-coordinates of a mode combination.
    pub fn embed(&self, theta: &[T], theta_tilde: &[T]) -> (Vec<T>, Vec<T>) {
        let m = self.m;
        let mut w = vec![T::zero(); m + 1];
        let mut wh = vec![T::zero(); m + 1];
        for n in 0..=m {
            let t = theta.get(n).cloned().unwrap_or_else(T::zero);
            let u = theta_tilde.get(n).cloned().unwrap_or_else(T::zero);
            for k in 0..=n {
                w[k] = w[k].clone() + t.clone() * self.d[n][k].clone() + u.clone() * self.d_tilde[n][k].clone();
                wh[k] = wh[k].clone() + t.clone() * self.e[n][k].clone() + u.clone() * self.e_tilde[n][k].clone();
            }
        }
        (w, wh)
    }

    /// Monomial coefficients of (f_n, g_n), or of the dual pair.
    pub fn pair_monomial(&self, n: usize, stable: bool) -> (Vec<T>, Vec<T>) {
        let (d, e) = if stable { (&self.d[n], &self.e[n]) } else { (&self.d_tilde[n], &self.e_tilde[n]) };
        (poly::from_hermite(d, &T::one()), poly::from_hermite(e, &self.mu))
    }

    /// `(H + M)(f, g) - lambda (f, g)` computed by polynomial calculus in the
    /// monomial basis.
    pub fn eigen_residual(&self, n: usize, stable: bool) -> (Vec<T>, Vec<T>) {
        let (f, g) = self.pair_monomial(n, stable);
        let nn = T::from_int(n as i64) / T::from_int(2);
        let lambda = if stable { T::one() - nn } else { -T::one() - nn };
        let qp = self.q.clone() / self.p.clone();
        let pq = self.p.clone() / self.q.clone();
        let r1 = poly::add(
            &poly::add(&poly::apply_l(&f, &T::one()), &poly::scale(&g, &qp)),
            &poly::scale(&f, &-lambda.clone()),
        );
        let r2 = poly::add(&poly::add(&poly::apply_l(&g, &self.mu), &poly::scale(&f, &pq)), &poly::scale(&g, &-lambda));
        (r1, r2)
    }

    pub fn to_f64(&self) -> EigenSystem<f64> {
        let cv = |t: &Vec<Vec<T>>| t.iter().map(|r| r.iter().map(|x| x.to_f64()).collect()).collect();
        EigenSystem {
            params: self.params,
            m: self.m,
            p: self.p.to_f64(),
            q: self.q.to_f64(),
            mu: self.mu.to_f64(),
            d: cv(&self.d),
            e: cv(&self.e),
            d_tilde: cv(&self.d_tilde),
            e_tilde: cv(&self.e_tilde),
            proj_a: cv(&self.proj_a),
            proj_b: cv(&self.proj_b),
            dual_a: cv(&self.dual_a),
            dual_b: cv(&self.dual_b),
            mu_to_one: cv(&self.mu_to_one),
            one_to_mu: cv(&self.one_to_mu),
        }
    }
}

impl EigenSystem<f64> {
    /// theta_n and theta_tilde_n from Hermite projections Q, Q_hat.
    pub fn modes_from_projections(&self, qn: &[f64], qh: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let mut th = vec![0.0; m + 1];
        let mut tt = vec![0.0; m + 1];
        for n in 0..=m {
            let mut k = n;
            while k <= m {
                th[n] += self.proj_a[k][n] * qn[k] + self.proj_b[k][n] * qh[k];
                tt[n] += self.dual_a[k][n] * qn[k] + self.dual_b[k][n] * qh[k];
                k += 2;
            }
        }
        (th, tt)
    }

    /// Sufficient mode count from the remainder estimate:
    /// `4 (p/q + q/p + sum_i sup |V_i|)`, the sup taken over y and s >= 1.
    pub fn mode_count_requirement(&self) -> f64 {
        mode_count_requirement(&self.params)
    }
}

pub fn mode_count_requirement(params: &Params) -> f64 {
    let mut sup = [0.0f64; 4];
    for is in 0..200 {
        let s = 1.0 + is as f64 * 0.5;
        for iy in 0..400 {
            let y = iy as f64 * 0.05 * s.sqrt();
            if let Ok(v) = crate::model::potential_matrix(y, s, params) {
                let flat = [v[0][0], v[0][1], v[1][0], v[1][1]];
                for (a, b) in sup.iter_mut().zip(flat) {
                    *a = a.max(b.abs());
                }
            }
        }
    }
    4.0 * (params.p / params.q + params.q / params.p + sup.iter().sum::<f64>())
}
