//! Gaussian kernel matrices, their population counterpart, the K-PCA and
//! normalized-Laplacian transforms, and the kernel-level separation `γ`.

use std::io::Write;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::MixtureConfig;
use crate::par;

/// Entries are never allowed below this value.
pub const KERNEL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Empirical,
    Population,
    Centered,
    LaplacianNormalized,
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub k: Mat<f64>,
    pub kind: KernelKind,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.k.as_ref()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.n() {
            w.write_record((0..self.n()).map(|j| format!("{:?}", self.k[(i, j)])))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `f(x) = exp(−ηx)`, floored at [`KERNEL_FLOOR`].
#[inline]
pub fn gaussian_profile(eta: f64, sq_dist: f64) -> f64 {
    (-eta * sq_dist).exp().max(KERNEL_FLOOR)
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("kernel scale eta must be positive, got {eta}")))
    }
}

fn row_major(y: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..y.nrows()).map(|i| (0..y.ncols()).map(|d| y[(i, d)]).collect()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// All pairwise squared distances between rows. Each entry is summed in
/// coordinate order, so `D[i][j]` and `D[j][i]` are bitwise equal.
pub fn pairwise_sq_distances(y: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    let rows = row_major(y);
    let n = rows.len();
    par::map_range(n, |i| (0..n).map(|j| sq_dist(&rows[i], &rows[j])).collect())
}

/// `K_ij = exp(−η‖Y_i − Y_j‖²)`.
pub fn gaussian_kernel(y: MatRef<'_, f64>, eta: f64) -> Result<KernelMatrix> {
    check_eta(eta)?;
    if !linalg::all_finite(y) {
        return Err(Error::InvalidArgument("observations contain non-finite values".into()));
    }
    let d = pairwise_sq_distances(y);
    Ok(kernel_from_distances(&d, eta))
}

pub fn kernel_from_distances(d: &[Vec<f64>], eta: f64) -> KernelMatrix {
    let n = d.len();
    let k = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { gaussian_profile(eta, d[i][j]) });
    KernelMatrix {
        k,
        kind: KernelKind::Empirical,
    }
}

/// Median heuristic: `η = 1 / (2 · median_{i<j} ‖Y_i − Y_j‖²)`.
pub fn median_heuristic_eta(y: MatRef<'_, f64>) -> Result<f64> {
    let d = pairwise_sq_distances(y);
    median_eta_from_distances(&d)
}

pub fn median_eta_from_distances(d: &[Vec<f64>]) -> Result<f64> {
    let mut upper: Vec<f64> = d
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row[i + 1..].iter().copied())
        .collect();
    if upper.is_empty() {
        return Err(Error::InvalidArgument("median heuristic needs at least two points".into()));
    }
    upper.sort_by(f64::total_cmp);
    let mid = upper.len() / 2;
    let med = if upper.len() % 2 == 1 {
        upper[mid]
    } else {
        0.5 * (upper[mid - 1] + upper[mid])
    };
    if !(med > 0.0) {
        return Err(Error::Numerical("median pairwise distance is zero".into()));
    }
    Ok(1.0 / (2.0 * med))
}

/// Blockwise-constant population kernel over the extended clusters:
/// `f(d²_kℓ + σ_k² + σ_ℓ²)` off the diagonal and `f(0) = 1` on it.
pub fn population_kernel(config: &MixtureConfig, eta: f64) -> Result<KernelMatrix> {
    config.validate()?;
    check_eta(eta)?;
    let (labels, _) = config.layout();
    let r = config.r;
    let block: Vec<Vec<f64>> = (0..r)
        .map(|k| {
            (0..r)
                .map(|l| {
                    let s = config.sq_dist(k, l) + config.sigmas[k].powi(2) + config.sigmas[l].powi(2);
                    gaussian_profile(eta, s)
                })
                .collect()
        })
        .collect();
    let n = config.n;
    let k = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { block[labels[i]][labels[j]] });
    Ok(KernelMatrix {
        k,
        kind: KernelKind::Population,
    })
}

/// Double centering `K − K11ᵀ/n − 11ᵀK/n + 11ᵀK11ᵀ/n²`.
pub fn center_kernel(kernel: &KernelMatrix) -> KernelMatrix {
    let k = &kernel.k;
    let n = k.nrows();
    let nf = n as f64;
    let row_mean: Vec<f64> = linalg::row_sums(k.as_ref()).into_iter().map(|s| s / nf).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| (0..n).map(|i| k[(i, j)]).sum::<f64>() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    KernelMatrix {
        k: Mat::from_fn(n, n, |i, j| k[(i, j)] - row_mean[i] - col_mean[j] + grand),
        kind: KernelKind::Centered,
    }
}

/// `D^{-1/2} K D^{-1/2}` with `D = diag(K1)`.
pub fn laplacian_normalize(kernel: &KernelMatrix) -> Result<KernelMatrix> {
    let k = &kernel.k;
    let deg = linalg::row_sums(k.as_ref());
    if let Some((i, d)) = deg.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "row {i} of the kernel sums to {d}; normalization needs positive degrees"
        )));
    }
    let inv: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = k.nrows();
    Ok(KernelMatrix {
        k: Mat::from_fn(n, n, |i, j| k[(i, j)] * inv[i] * inv[j]),
        kind: KernelKind::LaplacianNormalized,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationStats {
    /// `γ_kℓ = f(2σ_k²) − f(d²_kℓ + σ_k² + σ_ℓ²)`; symmetric only when the
    /// σ's agree. The diagonal is zero.
    pub gamma: Vec<Vec<f64>>,
    pub gamma_min: f64,
    /// Lower bound on `λ_r(K̃) − λ_{r+1}(K̃)`.
    pub eigengap_lower_bound: f64,
    /// `λ_min(B)` with `B_kℓ = f(d²_kℓ)`.
    pub b_min_eig: f64,
}

pub fn separation_stats(config: &MixtureConfig, eta: f64) -> Result<SeparationStats> {
    config.validate()?;
    check_eta(eta)?;
    let r = config.r;
    let f = |x: f64| gaussian_profile(eta, x);
    let s2: Vec<f64> = config.sigmas.iter().map(|s| s * s).collect();
    let gamma: Vec<Vec<f64>> = (0..r)
        .map(|k| {
            (0..r)
                .map(|l| {
                    if k == l {
                        0.0
                    } else {
                        f(2.0 * s2[k]) - f(config.sq_dist(k, l) + s2[k] + s2[l])
                    }
                })
                .collect()
        })
        .collect();
    let gamma_min = (0..r)
        .flat_map(|k| (0..r).filter(move |&l| l != k).map(move |l| (k, l)))
        .map(|(k, l)| gamma[k][l])
        .fold(f64::INFINITY, f64::min);

    let b = Mat::from_fn(r, r, |k, l| f(config.sq_dist(k, l)));
    let b_min_eig = linalg::sym_eigenvalues(b.as_ref())?[0];
    let min_f_sigma = s2.iter().map(|&s| f(s)).fold(f64::INFINITY, f64::min);
    let max_diag_gap = s2.iter().map(|&s| 1.0 - f(2.0 * s)).fold(0.0, f64::max);
    let eigengap_lower_bound =
        (config.n as f64 / r as f64) * b_min_eig * min_f_sigma * min_f_sigma - 2.0 * max_diag_gap;

    Ok(SeparationStats {
        gamma,
        gamma_min,
        eigengap_lower_bound,
        b_min_eig,
    })
}

/// `max_{i≠j ∈ I} |K_ij − K̃_ij|`.
pub fn sup_deviation(k: &KernelMatrix, ktilde: &KernelMatrix, inliers: &[usize]) -> Result<f64> {
    sup_deviation_with(k, ktilde, inliers, false)
}

pub fn sup_deviation_with(
    k: &KernelMatrix,
    ktilde: &KernelMatrix,
    inliers: &[usize],
    include_diagonal: bool,
) -> Result<f64> {
    if k.k.shape() != ktilde.k.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", k.k.shape()),
            found: format!("{:?}", ktilde.k.shape()),
        });
    }
    let n = k.n();
    if let Some(&bad) = inliers.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidArgument(format!("inlier index {bad} out of range for n = {n}")));
    }
    let mut worst = 0.0f64;
    for &i in inliers {
        for &j in inliers {
            if i != j || include_diagonal {
                worst = worst.max((k.k[(i, j)] - ktilde.k[(i, j)]).abs());
            }
        }
    }
    Ok(worst)
}
