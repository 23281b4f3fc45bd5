//! Ordinary least squares by Householder QR with column pivoting.

use rayon::prelude::*;

use super::{check_len, NumericsError, SquareMatrix};
use crate::design::DesignMatrix;

/// Relative pivot threshold for declaring a column dependent.
const RANK_TOL: f64 = 1e-10;

/// Columns below this many rows are updated serially.
const PAR_MIN_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub n_obs: usize,
    pub n_params: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    /// Residual standard deviation with an `N - K` denominator.
    pub rmse: f64,
    pub rss: f64,
    pub tss: f64,
    /// `(X'X)^-1`, in coefficient order.
    pub xtx_inverse: SquareMatrix,
}

impl FittedModel {
    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.index_of(label).map(|i| self.coefficients[i])
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Homoskedastic covariance `rmse^2 (X'X)^-1`.
    pub fn classical_cov(&self) -> SquareMatrix {
        let mut v = self.xtx_inverse.clone();
        v.scale(self.rmse * self.rmse);
        v
    }
}

/// Fits `y = X b + e` by least squares.
///
/// The design is factored as `X P = Q R`; a column whose remaining norm
/// falls below `1e-10` of the largest column norm is reported as dependent.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<FittedModel, NumericsError> {
    let n = x.nrows();
    let k = x.ncols();
    check_len(n, y.len())?;
    if n <= k || k == 0 {
        return Err(NumericsError::TooFewRows { n_rows: n, n_cols: k });
    }

    let mut a: Vec<Vec<f64>> = x.columns().to_vec();
    let mut qty = y.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut tail_sq: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let largest = tail_sq.iter().cloned().fold(0.0f64, f64::max).sqrt();
    let tol = RANK_TOL * largest;
    let mut rdiag = vec![0.0; k];

    for j in 0..k {
        let p = (j..k)
            .max_by(|&u, &v| tail_sq[u].total_cmp(&tail_sq[v]).then(v.cmp(&u)))
            .unwrap();
        if !(tail_sq[p].sqrt() > tol) {
            let first = perm[j..].iter().copied().min().unwrap();
            return Err(NumericsError::RankDeficient {
                label: x.labels()[first].clone(),
            });
        }
        a.swap(j, p);
        perm.swap(j, p);
        tail_sq.swap(j, p);

        let (done, rest) = a.split_at_mut(j + 1);
        let v = &mut done[j];
        let norm = v[j..].iter().map(|t| t * t).sum::<f64>().sqrt();
        let alpha = if v[j] >= 0.0 { -norm } else { norm };
        v[j] -= alpha;
        let vtv: f64 = v[j..].iter().map(|t| t * t).sum();
        let tau = 2.0 / vtv;
        rdiag[j] = alpha;
        let v: &[f64] = v;

        let reflect = |col: &mut Vec<f64>| -> f64 {
            let s = tau * dot(&v[j..], &col[j..]);
            let mut sq = 0.0;
            col[j] -= s * v[j];
            for i in j + 1..n {
                col[i] -= s * v[i];
                sq += col[i] * col[i];
            }
            sq
        };
        if n >= PAR_MIN_ROWS {
            let new_tails: Vec<f64> = rest.par_iter_mut().map(reflect).collect();
            tail_sq[j + 1..].copy_from_slice(&new_tails);
        } else {
            for (t, col) in tail_sq[j + 1..].iter_mut().zip(rest.iter_mut()) {
                *t = reflect(col);
            }
        }
        reflect(&mut qty);
    }

    // R[i][l] = a[l][i] for i < l, diagonal in rdiag
    let r = |i: usize, l: usize| if i == l { rdiag[i] } else { a[l][i] };
    let mut z = qty[..k].to_vec();
    for i in (0..k).rev() {
        for l in i + 1..k {
            z[i] -= r(i, l) * z[l];
        }
        z[i] /= rdiag[i];
    }
    let mut coefficients = vec![0.0; k];
    for (i, &orig) in perm.iter().enumerate() {
        coefficients[orig] = z[i];
    }

    // R^-1, upper triangular
    let mut rinv = SquareMatrix::zeros(k);
    for c in 0..k {
        rinv.set(c, c, 1.0 / rdiag[c]);
        for i in (0..c).rev() {
            let mut s = 0.0;
            for l in i + 1..=c {
                s += r(i, l) * rinv.get(l, c);
            }
            rinv.set(i, c, -s / rdiag[i]);
        }
    }
    let mut xtx_inverse = SquareMatrix::zeros(k);
    for u in 0..k {
        for w in u..k {
            let s: f64 = (w..k).map(|l| rinv.get(u, l) * rinv.get(w, l)).sum();
            xtx_inverse.set(perm[u], perm[w], s);
            xtx_inverse.set(perm[w], perm[u], s);
        }
    }

    let mut residuals = y.to_vec();
    for (col, &b) in x.columns().iter().zip(&coefficients) {
        for (e, xv) in residuals.iter_mut().zip(col) {
            *e -= b * xv;
        }
    }

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let r_squared = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 0.0 };
    let dof = (n - k) as f64;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / dof;

    Ok(FittedModel {
        labels: x.labels().to_vec(),
        coefficients,
        residuals,
        n_obs: n,
        n_params: k,
        r_squared,
        adj_r_squared,
        rmse: (rss / dof).sqrt(),
        rss,
        tss,
        xtx_inverse,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
