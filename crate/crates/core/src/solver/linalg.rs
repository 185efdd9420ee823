/// Thomas algorithm for `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]`.
/// `a[0]` and `c[n-1]` are ignored.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], work: &mut Vec<f64>) {
    let n = d.len();
    work.clear();
    work.resize(n, 0.0);
    let mut beta = b[0];
    d[0] /= beta;
    for i in 1..n {
        work[i] = c[i - 1] / beta;
        beta = b[i] - a[i] * work[i];
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= work[i + 1] * d[i + 1];
    }
}

/// Four-point Lagrange interpolation on arbitrary increasing nodes; returns
/// the value and first derivative at `x`. `None` outside `[xs[0], xs[n-1]]`.
pub fn cubic_at(xs: &[f64], fs: &[f64], x: f64) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 4 || !(x >= xs[0] && x <= xs[n - 1]) {
        return None;
    }
    let k = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    let lo = k.saturating_sub(1).min(n - 4);
    let px = &xs[lo..lo + 4];
    let pf = &fs[lo..lo + 4];
    let mut val = 0.0;
    let mut der = 0.0;
    for j in 0..4 {
        let mut l = 1.0;
        let mut dl = 0.0;
        for m in 0..4 {
            if m == j {
                continue;
            }
            let den = px[j] - px[m];
            // product rule for the derivative
            dl = dl * (x - px[m]) / den + l / den;
            l *= (x - px[m]) / den;
        }
        val += pf[j] * l;
        der += pf[j] * dl;
    }
    Some((val, der))
}

/// Same on a uniform grid starting at `x0` with spacing `h`.
pub fn cubic_uniform(x0: f64, h: f64, fs: &[f64], x: f64) -> Option<(f64, f64)> {
    let n = fs.len();
    let t = (x - x0) / h;
    if n < 4 || !(t >= 0.0 && t <= (n - 1) as f64) {
        return None;
    }
    let k = (t.floor() as usize).min(n - 2);
    let lo = k.saturating_sub(1).min(n - 4);
    let u = t - lo as f64;
    let f = &fs[lo..lo + 4];
    // Lagrange basis on nodes 0,1,2,3
    let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    let d0 = -((u - 2.0) * (u - 3.0) + (u - 1.0) * (u - 3.0) + (u - 1.0) * (u - 2.0)) / 6.0;
    let d1 = ((u - 2.0) * (u - 3.0) + u * (u - 3.0) + u * (u - 2.0)) / 2.0;
    let d2 = -((u - 1.0) * (u - 3.0) + u * (u - 3.0) + u * (u - 1.0)) / 2.0;
    let d3 = ((u - 1.0) * (u - 2.0) + u * (u - 2.0) + u * (u - 1.0)) / 6.0;
    let v = f[0] * l0 + f[1] * l1 + f[2] * l2 + f[3] * l3;
    let d = (f[0] * d0 + f[1] * d1 + f[2] * d2 + f[3] * d3) / h;
    Some((v, d))
}
