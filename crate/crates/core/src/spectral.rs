//! Top eigenbases, Procrustes alignment and the Davis–Kahan bound.
//!
//! Eigenvectors are only defined up to sign (or rotation inside a repeated
//! eigenvalue), so nothing downstream compares raw eigenvectors; bases are
//! aligned with [`procrustes_align`] first.

use std::io::Write;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg;

/// `n × r` orthonormal columns and their eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub u: Mat<f64>,
    pub eigenvalues: Vec<f64>,
}

impl EigenBasis {
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn r(&self) -> usize {
        self.u.ncols()
    }

    /// Header line holds the eigenvalues; then one line per row of `U`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.eigenvalues.iter().map(|l| format!("{l:?}")))?;
        for i in 0..self.n() {
            w.write_record((0..self.r()).map(|j| format!("{:?}", self.u[(i, j)])))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_rank(n: usize, r: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("need 1 <= r <= n, got r = {r}, n = {n}")));
    }
    Ok(())
}

/// Flip each column so that its largest-magnitude entry is positive.
fn fix_signs(u: &mut Mat<f64>) {
    for j in 0..u.ncols() {
        let mut best = 0usize;
        for i in 0..u.nrows() {
            if u[(i, j)].abs() > u[(best, j)].abs() {
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] = -u[(i, j)];
            }
        }
    }
}

fn select(vals: &[f64], vecs: &Mat<f64>, order: &[usize]) -> EigenBasis {
    let n = vecs.nrows();
    let mut u = Mat::from_fn(n, order.len(), |i, j| vecs[(i, order[j])]);
    fix_signs(&mut u);
    EigenBasis {
        u,
        eigenvalues: order.iter().map(|&k| vals[k]).collect(),
    }
}

/// Eigenvectors of the `r` algebraically largest eigenvalues, descending.
pub fn top_eigenvectors(m: MatRef<'_, f64>, r: usize) -> Result<EigenBasis> {
    check_rank(m.nrows(), r)?;
    let (vals, vecs) = linalg::sym_eigen(m)?;
    let n = vals.len();
    let order: Vec<usize> = (0..r).map(|j| n - 1 - j).collect();
    Ok(select(&vals, &vecs, &order))
}

/// Eigenvectors of the `r` eigenvalues largest in magnitude (the leading
/// singular vectors of a symmetric, possibly indefinite matrix). The
/// returned eigenvalues keep their sign and are ordered by `|λ|` descending.
pub fn top_singular_vectors(m: MatRef<'_, f64>, r: usize) -> Result<EigenBasis> {
    check_rank(m.nrows(), r)?;
    let (vals, vecs) = linalg::sym_eigen(m)?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    // stable: ties keep the algebraically larger one first
    order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(b.cmp(&a)));
    order.truncate(r);
    Ok(select(&vals, &vecs, &order))
}

/// `λ_r − λ_{r+1}` of a symmetric matrix (1-based, descending order).
pub fn eigengap(m: MatRef<'_, f64>, r: usize) -> Result<f64> {
    let n = m.nrows();
    if r == 0 || r >= n {
        return Err(Error::InvalidArgument(format!("eigengap needs 1 <= r < n, got r = {r}, n = {n}")));
    }
    let vals = linalg::sym_eigenvalues(m)?;
    Ok(vals[n - r] - vals[n - r - 1])
}

/// Orthogonal `r × r` matrix aligning one basis to another.
#[derive(Debug, Clone)]
pub struct Rotation {
    pub o: Mat<f64>,
    /// `UᵀÛ` was numerically rank deficient, so the minimizer is not unique.
    pub rank_deficient: bool,
}

/// `argmin_O ‖Û − U·O‖_F` over orthogonal `O`: the polar factor `PQᵀ` of
/// `UᵀÛ = PΣQᵀ`.
pub fn procrustes_align(u_hat: &EigenBasis, u: &EigenBasis) -> Result<Rotation> {
    procrustes(u_hat.u.as_ref(), u.u.as_ref())
}

pub fn procrustes(u_hat: MatRef<'_, f64>, u: MatRef<'_, f64>) -> Result<Rotation> {
    if u_hat.shape() != u.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", u.shape()),
            found: format!("{:?}", u_hat.shape()),
        });
    }
    let cross = linalg::matmul(u.transpose(), u_hat);
    let (p, s, q) = linalg::thin_svd(cross.as_ref())?;
    let o = linalg::matmul(p.as_ref(), q.transpose());
    let rank_deficient = s.last().is_some_and(|&sm| sm < 1e-12 * s[0].max(1.0));
    Ok(Rotation { o, rank_deficient })
}

/// `‖Û − U·O‖_F`
pub fn aligned_distance(u_hat: MatRef<'_, f64>, u: MatRef<'_, f64>, rot: &Rotation) -> f64 {
    let uo = linalg::matmul(u, rot.o.as_ref());
    linalg::frobenius(linalg::sub(u_hat, uo.as_ref()).as_ref())
}

/// `2^{3/2} · ‖M̂ − M‖_F / (λ_r − λ_{r+1})`.
pub fn davis_kahan_bound(fro_dist: f64, lambda_r: f64, lambda_r1: f64) -> Result<f64> {
    if !(fro_dist >= 0.0) {
        return Err(Error::InvalidArgument(format!("perturbation norm must be nonnegative, got {fro_dist}")));
    }
    let gap = lambda_r - lambda_r1;
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("eigengap {gap} is not positive")));
    }
    Ok(2f64.powf(1.5) * fro_dist / gap)
}
