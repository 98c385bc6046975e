//! Accuracy, matrix distances and numerical checks of the consistency
//! inequalities.

use std::collections::BTreeSet;

use faer::{Mat, MatRef};
use itertools::Itertools;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::kmeans::{self, KMeansResult};
use crate::linalg;
use crate::model::{ClusteringMatrix, MembershipMatrix};
use crate::spectral::{self, EigenBasis};

/// Absolute slack allowed when comparing the two sides of an inequality.
pub const BOUND_SLACK: f64 = 1e-9;
/// Largest label count handled by exhaustive permutation search.
pub const EXHAUSTIVE_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub status: BoundStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundCheck {
    /// `lhs ≤ rhs` up to [`BOUND_SLACK`].
    pub fn compare(name: &str, lhs: f64, rhs: f64) -> Self {
        let status = if lhs <= rhs + BOUND_SLACK {
            BoundStatus::Pass
        } else {
            BoundStatus::Fail
        };
        Self {
            name: name.into(),
            lhs,
            rhs,
            status,
            note: None,
        }
    }

    pub fn not_applicable(name: &str, lhs: f64, rhs: f64, why: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            status: BoundStatus::NotApplicable,
            note: Some(why.into()),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == BoundStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub inlier_accuracy: f64,
    /// Accuracy over all points including outliers (their round-robin labels
    /// serve as truth). Debugging only.
    pub all_points_accuracy: f64,
    /// `‖X₀ − X̂‖₁`, SDP runs only.
    pub l1_error: Option<f64>,
    pub misclustered_count: Option<usize>,
    pub inlier_cluster_count: usize,
    pub bound_checks: Vec<BoundCheck>,
}

impl EvalReport {
    pub fn violations(&self) -> impl Iterator<Item = &BoundCheck> {
        self.bound_checks.iter().filter(|c| c.failed())
    }
}

/// Best agreement over relabelings, as a count. `table[a][b]` counts points
/// with predicted label `a` and true label `b`.
fn best_matching(table: &[Vec<i64>]) -> i64 {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    let s = rows.max(cols);
    let w = |a: usize, b: usize| if a < rows && b < cols { table[a][b] } else { 0 };
    if s <= EXHAUSTIVE_LIMIT {
        (0..s)
            .permutations(s)
            .map(|perm| perm.iter().enumerate().map(|(a, &b)| w(a, b)).sum::<i64>())
            .max()
            .unwrap_or(0)
    } else {
        let m = Matrix::from_fn(s, s, |(a, b)| w(a, b));
        kuhn_munkres(&m).0
    }
}

/// Fraction of the points in `subset` that are correctly labeled under the
/// best one-to-one relabeling of `pred`.
fn matched_accuracy(pred: &[usize], truth: &[usize], subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("accuracy over an empty point set".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} predicted labels", truth.len()),
            found: format!("{}", pred.len()),
        });
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= pred.len()) {
        return Err(Error::InvalidArgument(format!("point index {bad} out of range")));
    }
    let kp = subset.iter().map(|&i| pred[i]).max().unwrap_or(0) + 1;
    let kt = subset.iter().map(|&i| truth[i]).max().unwrap_or(0) + 1;
    let mut table = vec![vec![0i64; kt]; kp];
    for &i in subset {
        table[pred[i]][truth[i]] += 1;
    }
    Ok(best_matching(&table) as f64 / subset.len() as f64)
}

/// Max over label permutations of the fraction of correctly labeled inliers.
/// `pred` may use more labels than `r` (e.g. an extra outlier cluster).
pub fn inlier_accuracy(pred: &[usize], truth: &[usize], inliers: &[usize], r: usize) -> Result<f64> {
    if let Some(&bad) = inliers.iter().find(|&&i| i < truth.len() && truth[i] >= r) {
        return Err(Error::InvalidArgument(format!("true label {} out of range for r = {r}", truth[bad])));
    }
    matched_accuracy(pred, truth, inliers)
}

/// Accuracy over every point.
pub fn all_points_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let all: Vec<usize> = (0..truth.len()).collect();
    matched_accuracy(pred, truth, &all)
}

/// `Σ_ij |A_ij − B_ij|`
pub fn l1_distance(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", a.shape()),
            found: format!("{:?}", b.shape()),
        });
    }
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += (a[(i, j)] - b[(i, j)]).abs();
        }
    }
    Ok(s)
}

/// Number of distinct predicted labels among the inliers.
pub fn inlier_cluster_count(pred: &[usize], inliers: &[usize]) -> usize {
    inliers.iter().map(|&i| pred[i]).collect::<BTreeSet<_>>().len()
}

/// Orthonormal basis `U = Zν` of the column space of `X₀ = ZZᵀ`, with
/// `ν = √(r/n)·I`.
pub fn membership_basis(z: &MembershipMatrix) -> EigenBasis {
    let (n, r) = (z.n(), z.r());
    let scale = (r as f64 / n as f64).sqrt();
    let labels = z.labels();
    EigenBasis {
        u: Mat::from_fn(n, r, |i, j| if labels[i] == j { scale } else { 0.0 }),
        eigenvalues: vec![n as f64 / r as f64; r],
    }
}

/// Per-cluster rows `ν` of a basis that is constant on each cluster
/// (`U = Zν`), or `None` if some row deviates from its cluster mean by more
/// than `tol`.
pub fn block_coefficients(u: MatRef<'_, f64>, z: &MembershipMatrix, tol: f64) -> Option<Mat<f64>> {
    let nu = kmeans::cluster_means(u, z.labels(), z.r());
    for (i, &l) in z.labels().iter().enumerate() {
        for j in 0..u.ncols() {
            if (u[(i, j)] - nu[(l, j)]).abs() > tol {
                return None;
            }
        }
    }
    Some(nu)
}

/// Everything the consistency checks need from one run on synthetic data.
pub struct BoundInputs<'a> {
    /// Kernel the method actually clustered (after any centering/normalizing).
    pub k: &'a KernelMatrix,
    /// The matching population reference.
    pub k_tilde: &'a KernelMatrix,
    /// Truth over all points, outliers carrying their round-robin labels.
    pub z: &'a MembershipMatrix,
    pub gamma_min: f64,
    /// Lower bound on the eigengap of `k_tilde`, when one is available.
    pub eigengap_lower_bound: Option<f64>,
    /// SDP solution, if the method solved one.
    pub x_hat: Option<&'a ClusteringMatrix>,
    /// The basis the k-means step ran on.
    pub basis: &'a EigenBasis,
    /// Whether `basis` holds the largest-magnitude eigenvectors.
    pub magnitude_order: bool,
    pub kmeans: &'a KMeansResult,
}

fn lemma3_check(name: &str, u_hat: &EigenBasis, u: &EigenBasis, z: &MembershipMatrix, km: &KMeansResult) -> Result<BoundCheck> {
    let n = z.n();
    let r = z.r();
    if u_hat.r() != r {
        return Ok(BoundCheck::not_applicable(name, f64::NAN, f64::NAN, "basis rank differs from r"));
    }
    let Some(nu) = block_coefficients(u.u.as_ref(), z, 1e-8) else {
        return Ok(BoundCheck::not_applicable(name, f64::NAN, f64::NAN, "reference basis is not constant on clusters"));
    };
    let rot = spectral::procrustes_align(u_hat, u)?;
    let dist = spectral::aligned_distance(u_hat.u.as_ref(), u.u.as_ref(), &rot);
    let rhs = 8.0 * n as f64 / r as f64 * dist * dist;
    // best of the given run and Lloyd started from the truth
    let k = km.centroids.nrows();
    let seeded = kmeans::lloyd_from_labels(u_hat.u.as_ref(), z.labels(), k)?;
    let best = if seeded.loss < km.loss { &seeded } else { km };
    let m = kmeans::misclustered_set(best, z, nu.as_ref(), &rot)?;
    Ok(BoundCheck::compare(name, m.len() as f64, rhs))
}

/// Evaluate every applicable inequality on one run.
pub fn check_consistency_bounds(inp: &BoundInputs<'_>) -> Result<Vec<BoundCheck>> {
    let n = inp.z.n();
    let r = inp.z.r();
    let c = n as f64 / r as f64;
    if inp.k.n() != n || inp.k_tilde.n() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n} kernels"),
            found: format!("{} and {}", inp.k.n(), inp.k_tilde.n()),
        });
    }
    let mut checks = Vec::new();

    // eigengap of the reference against its lower bound
    let ref_vals = linalg::sym_eigenvalues(inp.k_tilde.as_ref())?;
    let gap = ref_vals[n - r] - ref_vals[n - r - 1];
    if let Some(lb) = inp.eigengap_lower_bound {
        if lb > 0.0 {
            checks.push(BoundCheck::compare("eigengap_lower_bound", lb, gap));
        } else {
            checks.push(BoundCheck::not_applicable("eigengap_lower_bound", lb, gap, "bound is not positive"));
        }
    }

    if let Some(x_hat) = inp.x_hat {
        let x0 = crate::model::clustering_matrix(inp.z);
        let l1 = l1_distance(x0.x.as_ref(), x_hat.x.as_ref())?;
        let diff = linalg::sub(x_hat.x.as_ref(), x0.x.as_ref());
        let fro = linalg::frobenius(diff.as_ref());

        let noise = linalg::sub(inp.k.as_ref(), inp.k_tilde.as_ref());
        let rhs = 2.0 * linalg::inner(noise.as_ref(), diff.as_ref()) / inp.gamma_min;
        if inp.gamma_min > 0.0 {
            checks.push(BoundCheck::compare("l1_recovery", l1, rhs));
        } else {
            checks.push(BoundCheck::not_applicable("l1_recovery", l1, rhs, "separation is not positive"));
        }

        let u0 = membership_basis(inp.z);
        let rot = spectral::procrustes_align(inp.basis, &u0)?;
        let dist = spectral::aligned_distance(inp.basis.u.as_ref(), u0.u.as_ref(), &rot);
        checks.push(BoundCheck::compare("eigvec_l1", dist, (8.0 * l1).sqrt() / c));
        checks.push(BoundCheck::compare("davis_kahan_sdp", dist, spectral::davis_kahan_bound(fro, c, 0.0)?));
        checks.push(lemma3_check("misclustered_sdp", inp.basis, &u0, inp.z, inp.kmeans)?);
    } else {
        let reference = if inp.magnitude_order {
            spectral::top_singular_vectors(inp.k_tilde.as_ref(), r)?
        } else {
            spectral::top_eigenvectors(inp.k_tilde.as_ref(), r)?
        };
        let fro = linalg::frobenius(linalg::sub(inp.k.as_ref(), inp.k_tilde.as_ref()).as_ref());
        let rot = spectral::procrustes_align(inp.basis, &reference)?;
        let dist = spectral::aligned_distance(inp.basis.u.as_ref(), reference.u.as_ref(), &rot);
        // the gap between the kept and discarded parts of the spectrum
        let selected_top = !inp.magnitude_order || {
            let mut top: Vec<f64> = ref_vals[n - r..].to_vec();
            top.sort_by(|a, b| b.total_cmp(a));
            top == reference.eigenvalues
        };
        match (selected_top, spectral::davis_kahan_bound(fro, ref_vals[n - r], ref_vals[n - r - 1])) {
            (true, Ok(bound)) => checks.push(BoundCheck::compare("davis_kahan_kernel", dist, bound)),
            (false, _) => checks.push(BoundCheck::not_applicable(
                "davis_kahan_kernel",
                dist,
                f64::NAN,
                "kept eigenvalues are not the top of the spectrum",
            )),
            (true, Err(_)) => checks.push(BoundCheck::not_applicable("davis_kahan_kernel", dist, f64::INFINITY, "zero eigengap")),
        }
        checks.push(lemma3_check("misclustered_kernel", inp.basis, &reference, inp.z, inp.kmeans)?);
    }
    Ok(checks)
}

/// Size of the misclustered set against the ideal basis, with the pipeline's
/// own k-means result.
pub fn misclustered_count(basis: &EigenBasis, reference: &EigenBasis, z: &MembershipMatrix, km: &KMeansResult) -> Result<Option<usize>> {
    let Some(nu) = block_coefficients(reference.u.as_ref(), z, 1e-8) else {
        return Ok(None);
    };
    if basis.r() != reference.r() {
        return Ok(None);
    }
    let rot = spectral::procrustes_align(basis, reference)?;
    Ok(Some(kmeans::misclustered_set(km, z, nu.as_ref(), &rot)?.len()))
}
