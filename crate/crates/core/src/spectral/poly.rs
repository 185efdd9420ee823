//! Dense polynomials in one variable, coefficient `c[k]` on `y^k`.

use super::scalar::Scalar;

pub fn trim<T: Scalar>(mut c: Vec<T>) -> Vec<T> {
    while c.len() > 1 && c.last().map_or(false, |x| x.is_zero()) {
        c.pop();
    }
    c
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|k| {
            let x = a.get(k).cloned().unwrap_or_else(T::zero);
            let y = b.get(k).cloned().unwrap_or_else(T::zero);
            x + y
        })
        .collect()
}

pub fn scale<T: Scalar>(a: &[T], s: &T) -> Vec<T> {
    a.iter().map(|x| x.clone() * s.clone()).collect()
}

pub fn mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

pub fn deriv<T: Scalar>(a: &[T]) -> Vec<T> {
    if a.len() <= 1 {
        return vec![T::zero()];
    }
    a.iter().enumerate().skip(1).map(|(k, x)| x.clone() * T::from_int(k as i64)).collect()
}

/// `L_eta P = eta P'' - (y/2) P'`.
pub fn apply_l<T: Scalar>(a: &[T], eta: &T) -> Vec<T> {
    let d1 = deriv(a);
    let d2 = deriv(&d1);
    let mut out = vec![T::zero(); a.len()];
    for (k, x) in d2.iter().enumerate() {
        out[k] = out[k].clone() + x.clone() * eta.clone();
    }
    let half = T::one() / T::from_int(2);
    for (k, x) in d1.iter().enumerate() {
        // y * y^k term
        if k + 1 < out.len() {
            out[k + 1] = out[k + 1].clone() - x.clone() * half.clone();
        }
    }
    out
}

pub fn eval(a: &[f64], y: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

/// Monomial coefficients of the scaled Hermite polynomial of degree n
/// with parameter eta: `sum_j (-1)^j n!/((n-2j)! j!) eta^j y^(n-2j)`.
pub fn hermite_monomial<T: Scalar>(n: usize, eta: &T) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    // c_{n,j} built incrementally: c_{j+1} = -c_j (n-2j)(n-2j-1)/(j+1)
    let mut c = T::one();
    let mut ej = T::one();
    let mut j = 0usize;
    while 2 * j <= n {
        out[n - 2 * j] = c.clone() * ej.clone();
        let k = (n - 2 * j) as i64;
        if k < 2 {
            break;
        }
        c = -c * T::from_int(k * (k - 1)) / T::from_int(j as i64 + 1);
        ej = ej * eta.clone();
        j += 1;
    }
    out
}

/// Scaled Hermite value via the three-term recurrence
/// `h_{n+1} = y h_n - 2 eta n h_{n-1}`.
pub fn scaled_hermite(n: usize, eta: f64, y: f64) -> f64 {
    let (mut a, mut b) = (1.0, y);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = y * b - 2.0 * eta * k as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// Values of h_0..=h_n at y.
pub fn scaled_hermite_all(n: usize, eta: f64, y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(y);
    }
    for k in 1..n {
        let c = y * out[k] - 2.0 * eta * k as f64 * out[k - 1];
        out.push(c);
    }
    out
}

/// Coordinates of a monomial-basis polynomial in the scaled Hermite basis.
pub fn to_hermite<T: Scalar>(a: &[T], eta: &T) -> Vec<T> {
    let mut rest = a.to_vec();
    let mut out = vec![T::zero(); a.len()];
    for n in (0..a.len()).rev() {
        let c = rest[n].clone();
        if c.is_zero() {
            continue;
        }
        let h = hermite_monomial(n, eta);
        for (k, x) in h.iter().enumerate() {
            rest[k] = rest[k].clone() - c.clone() * x.clone();
        }
        out[n] = c;
    }
    out
}

pub fn from_hermite<T: Scalar>(c: &[T], eta: &T) -> Vec<T> {
    let mut out = vec![T::zero(); c.len()];
    for (n, x) in c.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (k, h) in hermite_monomial(n, eta).iter().enumerate() {
            out[k] = out[k].clone() + x.clone() * h.clone();
        }
    }
    out
}

/// Coefficients of `h_n^(eta_from)` in the basis `h_0..h_n^(eta_to)`.
pub fn basis_change<T: Scalar>(n: usize, eta_from: &T, eta_to: &T) -> Vec<T> {
    to_hermite(&hermite_monomial(n, eta_from), eta_to)
}
