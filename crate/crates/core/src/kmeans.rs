//! Lloyd's k-means over eigenbasis rows, the misclustered set and the
//! spectral lower bound on the k-means loss.

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::MembershipMatrix;
use crate::par;
use crate::spectral::Rotation;

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_LLOYD_ITER: usize = 1000;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// `k × d`
    pub centroids: Mat<f64>,
    /// Within-cluster sum of squares.
    pub loss: f64,
    pub restart_index: usize,
    pub iterations: usize,
    /// Loss after every assignment/update round of the winning restart.
    pub loss_trace: Vec<f64>,
}

impl KMeansResult {
    /// Assigned centroid of point `i`.
    pub fn centroid_of(&self, i: usize) -> Vec<f64> {
        let c = self.labels[i];
        (0..self.centroids.ncols()).map(|j| self.centroids[(c, j)]).collect()
    }
}

fn sq_dist_row_centroid(w: MatRef<'_, f64>, i: usize, c: MatRef<'_, f64>, k: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..w.ncols() {
        let d = w[(i, j)] - c[(k, j)];
        s += d * d;
    }
    s
}

fn sq_dist_rows(w: MatRef<'_, f64>, a: usize, b: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..w.ncols() {
        let d = w[(a, j)] - w[(b, j)];
        s += d * d;
    }
    s
}

/// Nearest centroid, lowest index on ties.
fn nearest(w: MatRef<'_, f64>, i: usize, c: MatRef<'_, f64>) -> (usize, f64) {
    let mut best = (0, sq_dist_row_centroid(w, i, c, 0));
    for k in 1..c.nrows() {
        let d = sq_dist_row_centroid(w, i, c, k);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// `Σ_i ‖w_i − c_{label_i}‖²`
pub fn kmeans_loss(w: MatRef<'_, f64>, labels: &[usize], centroids: MatRef<'_, f64>) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist_row_centroid(w, i, centroids, l))
        .sum()
}

/// Cluster means for a labeling; empty clusters get a zero row.
pub fn cluster_means(w: MatRef<'_, f64>, labels: &[usize], k: usize) -> Mat<f64> {
    let d = w.ncols();
    let mut sums = Mat::<f64>::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for j in 0..d {
            sums[(l, j)] += w[(i, j)];
        }
    }
    for (l, &c) in counts.iter().enumerate() {
        if c > 0 {
            for j in 0..d {
                sums[(l, j)] /= c as f64;
            }
        }
    }
    sums
}

fn check_input(w: MatRef<'_, f64>, k: usize) -> Result<()> {
    let n = w.nrows();
    if n == 0 || w.ncols() == 0 {
        return Err(Error::InvalidArgument("k-means needs a nonempty matrix".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if !linalg::all_finite(w) {
        return Err(Error::Numerical("k-means input has non-finite entries".into()));
    }
    Ok(())
}

/// Distance-weighted seeding: first center uniform, the rest drawn with
/// probability proportional to squared distance to the nearest chosen center.
fn seed_centroids(w: MatRef<'_, f64>, k: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let n = w.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist_rows(w, i, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 && t < d {
                    pick = i;
                    break;
                }
                t -= d;
            }
            // guard against rounding landing on an already chosen point
            if dist[pick] == 0.0 {
                pick = (0..n).find(|&i| dist[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // all remaining points coincide with a center; any unused index
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist_rows(w, i, next));
        }
    }
    Mat::from_fn(k, w.ncols(), |c, j| w[(chosen[c], j)])
}

/// Lloyd iterations from the given centroids until the assignment is stable.
fn lloyd_from(w: MatRef<'_, f64>, mut centroids: Mat<f64>) -> KMeansResult {
    let n = w.nrows();
    let k = centroids.nrows();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for it in 1..=MAX_LLOYD_ITER {
        iterations = it;
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (l, d) = nearest(w, i, centroids.as_ref());
            if labels[i] != l {
                labels[i] = l;
                changed = true;
            }
            dists[i] = d;
        }
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        // empty clusters take the point farthest from its centroid
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = None;
                for i in 0..n {
                    if counts[labels[i]] > 1 && far.is_none_or(|f: usize| dists[i] > dists[f]) {
                        far = Some(i);
                    }
                }
                if let Some(f) = far {
                    counts[labels[f]] -= 1;
                    labels[f] = c;
                    counts[c] = 1;
                    dists[f] = 0.0;
                    changed = true;
                }
            }
        }
        let means = cluster_means(w, &labels, k);
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..w.ncols() {
                    centroids[(c, j)] = means[(c, j)];
                }
            }
        }
        trace.push(kmeans_loss(w, &labels, centroids.as_ref()));
        if !changed {
            break;
        }
    }
    let loss = kmeans_loss(w, &labels, centroids.as_ref());
    KMeansResult {
        labels,
        centroids,
        loss,
        restart_index: 0,
        iterations,
        loss_trace: trace,
    }
}

/// Best of `restarts` Lloyd runs on the rows of `w` (smallest loss, lowest
/// restart index on ties).
pub fn lloyd(w: MatRef<'_, f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    check_input(w, k)?;
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let runs = par::map_range(restarts, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let init = seed_centroids(w, k, &mut rng);
        let mut res = lloyd_from(w, init);
        res.restart_index = t;
        res
    });
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.loss < a.loss { b } else { a })
        .expect("restarts >= 1");
    Ok(best)
}

/// Lloyd started from the means of a given labeling.
pub fn lloyd_from_labels(w: MatRef<'_, f64>, labels: &[usize], k: usize) -> Result<KMeansResult> {
    check_input(w, k)?;
    if labels.len() != w.nrows() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} labels", w.nrows()),
            found: format!("{} labels", labels.len()),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for k = {k}")));
    }
    let mut init = cluster_means(w, labels, k);
    let mut present = vec![false; k];
    for &l in labels {
        present[l] = true;
    }
    // an unused label starts on the first point not yet serving as a center
    for c in 0..k {
        if !present[c] {
            for j in 0..w.ncols() {
                init[(c, j)] = w[(c.min(w.nrows() - 1), j)];
            }
        }
    }
    Ok(lloyd_from(w, init))
}

/// Indices `i` with `‖c_i − Z_i ν O‖ ≥ √(r / (2n))`, where `c_i` is the
/// assigned centroid of point `i`.
pub fn misclustered_set(result: &KMeansResult, z: &MembershipMatrix, nu: MatRef<'_, f64>, o: &Rotation) -> Result<Vec<usize>> {
    let n = z.n();
    let r = z.r();
    if result.labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} labels"),
            found: format!("{} labels", result.labels.len()),
        });
    }
    if nu.nrows() != r || nu.ncols() != o.o.nrows() || result.centroids.ncols() != o.o.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("nu {r}x{}, centroids with {} columns", o.o.nrows(), o.o.ncols()),
            found: format!("nu {}x{}, centroids with {} columns", nu.nrows(), nu.ncols(), result.centroids.ncols()),
        });
    }
    let target = linalg::matmul(nu, o.o.as_ref());
    let threshold = (r as f64 / (2.0 * n as f64)).sqrt();
    let mut out = Vec::new();
    for (i, &t) in z.labels().iter().enumerate() {
        let c = result.labels[i];
        let mut s = 0.0;
        for j in 0..target.ncols() {
            let d = result.centroids[(c, j)] - target[(t, j)];
            s += d * d;
        }
        if s.sqrt() >= threshold {
            out.push(i);
        }
    }
    Ok(out)
}

/// `Σ_{i>k} σ_i(W)²`, a lower bound on the optimal k-means loss of the rows
/// of `W` with `k` clusters.
pub fn kmeans_loss_lower_bound(w: MatRef<'_, f64>, k: usize) -> Result<f64> {
    if k == 0 || k > w.ncols() {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= d, got k = {k}, d = {}", w.ncols())));
    }
    let s = linalg::singular_values(w)?;
    Ok(s.iter().skip(k).map(|v| v * v).sum())
}
