use nalgebra::DMatrix;

use super::poly::scaled_hermite_all;
use crate::error::{Error, Result};

/// Gauss rule for the weight `exp(-y^2/(4 eta)) / sqrt(4 pi eta)`, which is a
/// centred normal density of variance `2 eta`.
#[derive(Clone, Debug)]
pub struct HermiteBasis {
    pub eta: f64,
    pub m: usize,
    pub quad_order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Nodes and weights of the n-point rule for the standard normal density.
pub fn gauss_hermite_normal(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let mut x: Vec<f64> = j.symmetric_eigen().eigenvalues.iter().copied().collect();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // symmetrize and polish with Newton on the orthonormal recurrence
    for i in 0..n / 2 {
        let a = 0.5 * (x[n - 1 - i] - x[i]);
        x[i] = -a;
        x[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let orth = |t: f64| -> (f64, f64) {
        // p_n(t) and p_{n-1}(t), orthonormal
        let (mut a, mut b) = (0.0, 1.0);
        for k in 0..n {
            let c = (t * b - (k as f64).sqrt() * a) / ((k + 1) as f64).sqrt();
            a = b;
            b = c;
        }
        (b, a)
    };
    for t in x.iter_mut() {
        for _ in 0..3 {
            let (pn, pm) = orth(*t);
            // p_n' = sqrt(n) p_{n-1}
            let step = pn / ((n as f64).sqrt() * pm);
            if step.is_finite() {
                *t -= step;
            }
        }
    }
    let w: Vec<f64> = x
        .iter()
        .map(|&t| {
            let (mut a, mut b) = (0.0, 1.0);
            let mut sum = 1.0;
            for k in 0..n - 1 {
                let c = (t * b - (k as f64).sqrt() * a) / ((k + 1) as f64).sqrt();
                a = b;
                b = c;
                sum += b * b;
            }
            1.0 / sum
        })
        .collect();
    (x, w)
}

impl HermiteBasis {
    pub fn new(eta: f64, m: usize, quad_order: usize) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidParameter(format!("eta = {eta}")));
        }
        if m % 2 != 0 || m == 0 {
            return Err(Error::InvalidParameter(format!("M = {m} must be even and positive")));
        }
        if quad_order < 2 * m + 2 {
            return Err(Error::InvalidParameter(format!("quad_order {quad_order} < 2M+2")));
        }
        let (x, w) = gauss_hermite_normal(quad_order);
        let sd = (2.0 * eta).sqrt();
        Ok(HermiteBasis { eta, m, quad_order, nodes: x.iter().map(|t| t * sd).collect(), weights: w })
    }

    pub fn with_default_order(eta: f64, m: usize) -> Result<Self> {
        Self::new(eta, m, 2 * m + 2)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&y| f(y)).collect()
    }

    /// `<f, g>` from samples at the nodes.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (i, ((a, b), w)) in f.iter().zip(g).zip(&self.weights).enumerate() {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            acc += a * b * w;
        }
        Ok(acc)
    }

    pub fn weighted_inner(&self, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        self.inner(&self.sample(f), &self.sample(g))
    }

    /// `<h_n, h_n> = n! (2 eta)^n`.
    pub fn norm_sq(&self, n: usize) -> f64 {
        (1..=n).fold(1.0, |acc, k| acc * k as f64 * 2.0 * self.eta)
    }

    /// Projections `<f, h_n> / <h_n, h_n>` for n = 0..=M from node samples.
    pub fn project(&self, f: &[f64]) -> Result<Vec<f64>> {
        let m = self.m;
        let mut out = vec![0.0; m + 1];
        for (i, ((&y, &fy), &w)) in self.nodes.iter().zip(f).zip(&self.weights).enumerate() {
            if !fy.is_finite() {
                return Err(Error::NonFinite(i));
            }
            let h = scaled_hermite_all(m, self.eta, y);
            for n in 0..=m {
                out[n] += w * fy * h[n];
            }
        }
        for (n, o) in out.iter_mut().enumerate() {
            *o /= self.norm_sq(n);
        }
        Ok(out)
    }
}
