//! Cluster-robust (CR1) sandwich covariance and Wald tests.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{check_len, FittedModel, NumericsError, SquareMatrix};
use crate::design::DesignMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRobustCov {
    pub matrix: SquareMatrix,
    pub n_clusters: usize,
    /// CR1 factor `M/(M-1) * (N-1)/(N-K)`.
    pub correction: f64,
}

impl ClusterRobustCov {
    pub fn standard_errors(&self) -> Vec<f64> {
        self.matrix.diagonal().into_iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// `c (X'X)^-1 (sum_g X_g' e_g e_g' X_g) (X'X)^-1` with the CR1 factor `c`.
pub fn cluster_robust_cov<C: Eq + Hash>(
    fit: &FittedModel,
    x: &DesignMatrix,
    cluster_ids: &[C],
) -> Result<ClusterRobustCov, NumericsError> {
    let n = fit.n_obs;
    let k = fit.n_params;
    check_len(n, x.nrows())?;
    check_len(k, x.ncols())?;
    check_len(n, cluster_ids.len())?;

    // clusters indexed by first appearance
    let mut index: HashMap<&C, usize> = HashMap::new();
    let row_cluster: Vec<usize> = cluster_ids
        .iter()
        .map(|c| {
            let next = index.len();
            *index.entry(c).or_insert(next)
        })
        .collect();
    let m = index.len();
    if m < 2 {
        return Err(NumericsError::SingleCluster);
    }

    let mut scores = vec![0.0; m * k];
    for (j, col) in x.columns().iter().enumerate() {
        for ((&g, &xv), &e) in row_cluster.iter().zip(col).zip(&fit.residuals) {
            if xv != 0.0 {
                scores[g * k + j] += xv * e;
            }
        }
    }
    let mut meat = SquareMatrix::zeros(k);
    for s in scores.chunks_exact(k) {
        for a in 0..k {
            if s[a] == 0.0 {
                continue;
            }
            for b in a..k {
                meat.add(a, b, s[a] * s[b]);
            }
        }
    }
    meat.symmetrize_from_upper();

    let bread = &fit.xtx_inverse;
    let mut matrix = bread.matmul(&meat).matmul(bread);
    matrix.symmetrize();
    let correction = (m as f64 / (m - 1) as f64) * ((n - 1) as f64 / (n - k) as f64);
    matrix.scale(correction);

    Ok(ClusterRobustCov {
        matrix,
        n_clusters: m,
        correction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct WaldTest {
    /// `F = W / df1`.
    pub statistic: f64,
    /// Wald statistic `b' V^-1 b`.
    pub wald: f64,
    pub df1: usize,
    pub df2: usize,
    pub p_value: f64,
}

/// Joint test that the named coefficients are all zero, referred to
/// `F(q, M - 1)`.
pub fn wald_test<S: AsRef<str>>(
    fit: &FittedModel,
    cov: &ClusterRobustCov,
    labels: &[S],
) -> Result<WaldTest, NumericsError> {
    if labels.is_empty() {
        return Err(NumericsError::EmptyInput);
    }
    let idx = labels
        .iter()
        .map(|l| {
            fit.index_of(l.as_ref())
                .ok_or_else(|| NumericsError::UnknownLabel(l.as_ref().to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let b: Vec<f64> = idx.iter().map(|&i| fit.coefficients[i]).collect();
    let v = cov.matrix.submatrix(&idx);
    let solved = v.spd_solve(&b).ok_or(NumericsError::SingularSubmatrix)?;
    let wald: f64 = b.iter().zip(&solved).map(|(x, y)| x * y).sum();
    let df1 = idx.len();
    let df2 = cov.n_clusters - 1;
    let statistic = wald / df1 as f64;
    let p_value = if statistic > 0.0 {
        FisherSnedecor::new(df1 as f64, df2 as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    } else {
        1.0
    };
    Ok(WaldTest {
        statistic,
        wald,
        df1,
        df2,
        p_value,
    })
}

impl SquareMatrix {
    fn symmetrize_from_upper(&mut self) {
        for i in 0..self.dim() {
            for j in 0..i {
                let v = self.get(j, i);
                self.set(i, j, v);
            }
        }
    }
}
