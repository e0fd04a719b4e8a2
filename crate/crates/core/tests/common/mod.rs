//! Brute-force references for small problems: cofactor determinants,
//! Gauss-Jordan inverses and the likelihood written out term by term.
#![allow(dead_code, clippy::needless_range_loop)]

pub type Mat = Vec<Vec<f64>>;

pub fn corr_naive(x: &[Vec<f64>], theta: &[f64], p: f64) -> Mat {
    let n = x.len();
    let mut r = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..theta.len()).map(|k| theta[k] * (x[i][k] - x[j][k]).abs().powf(p)).sum();
            r[i][j] = (-s).exp();
        }
    }
    r
}

pub fn corr_vec_naive(xs: &[f64], x: &[Vec<f64>], theta: &[f64], p: f64) -> Vec<f64> {
    x.iter()
        .map(|row| {
            let s: f64 = (0..theta.len()).map(|k| theta[k] * (xs[k] - row[k]).abs().powf(p)).sum();
            (-s).exp()
        })
        .collect()
}

/// Laplace expansion along the first row.
pub fn det_cofactor(a: &Mat) -> f64 {
    let n = a.len();
    match n {
        0 => 1.0,
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        _ => {
            let mut total = 0.0;
            for c in 0..n {
                let minor: Mat = a[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v).collect())
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * a[0][c] * det_cofactor(&minor);
            }
            total
        }
    }
}

/// Determinant by Gaussian elimination; a cheap screen before the cofactor form.
pub fn det_elim(a: &Mat) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        if piv != col {
            m.swap(col, piv);
            det = -det;
        }
        det *= m[col][col];
        for i in col + 1..n {
            let f = m[i][col] / m[col][col];
            for j in col..n {
                m[i][j] -= f * m[col][j];
            }
        }
    }
    det
}

/// Gauss-Jordan elimination with partial pivoting.
pub fn inverse_gj(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[i][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_vec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub struct OracleFit {
    pub log_det: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub objective: f64,
    pub rinv: Mat,
}

pub fn profile_oracle(x: &[Vec<f64>], y: &[f64], theta: &[f64], p: f64) -> OracleFit {
    let n = y.len();
    let r = corr_naive(x, theta, p);
    let rinv = inverse_gj(&r);
    let ones = vec![1.0; n];
    let rinv_y = mat_vec(&rinv, y);
    let rinv_1 = mat_vec(&rinv, &ones);
    let mu = dot(&ones, &rinv_y) / dot(&ones, &rinv_1);
    let resid: Vec<f64> = y.iter().map(|v| v - mu).collect();
    let qf = dot(&resid, &mat_vec(&rinv, &resid));
    let log_det = det_cofactor(&r).ln();
    OracleFit { log_det, mu, sigma2: qf / n as f64, objective: log_det + n as f64 * qf.ln(), rinv }
}

/// Gaussian log-likelihood with free `mu` and `sigma2` (additive constant dropped).
pub fn unprofiled_loglik(rinv: &Mat, log_det: f64, y: &[f64], mu: f64, sigma2: f64) -> f64 {
    let resid: Vec<f64> = y.iter().map(|v| v - mu).collect();
    let qf = dot(&resid, &mat_vec(rinv, &resid));
    let n = y.len() as f64;
    -0.5 * n * sigma2.ln() - 0.5 * log_det - qf / (2.0 * sigma2)
}

pub fn blup_oracle(xs: &[f64], x: &[Vec<f64>], y: &[f64], theta: &[f64], p: f64) -> f64 {
    let fit = profile_oracle(x, y, theta, p);
    let r = corr_vec_naive(xs, x, theta, p);
    let resid: Vec<f64> = y.iter().map(|v| v - fit.mu).collect();
    fit.mu + dot(&r, &mat_vec(&fit.rinv, &resid))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
