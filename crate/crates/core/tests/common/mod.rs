#![allow(dead_code)]

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every partition of `0..n` into `r` blocks of size `n/r`, as label vectors
/// (block ids in order of first appearance).
pub fn balanced_partitions(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn go(labels: &mut Vec<usize>, sizes: &mut Vec<usize>, n: usize, cap: usize, out: &mut Vec<Vec<usize>>) {
        let i = labels.len();
        if i == n {
            out.push(labels.clone());
            return;
        }
        let used = sizes.iter().filter(|&&s| s > 0).count();
        for b in 0..sizes.len() {
            // only open the next empty block, never skip one
            if b > used {
                break;
            }
            if sizes[b] < cap {
                sizes[b] += 1;
                labels.push(b);
                go(labels, sizes, n, cap, out);
                labels.pop();
                sizes[b] -= 1;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![0; r], n, n / r, &mut out);
    out
}

/// `⟨K, ZZᵀ⟩` for a label vector.
pub fn partition_objective(k: &Mat<f64>, labels: &[usize]) -> f64 {
    let n = labels.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                s += k[(i, j)];
            }
        }
    }
    s
}

/// Exact k-means optimum by trying every assignment to `k` labels.
pub fn brute_kmeans(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let total = (k as u64).pow(n as u32);
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = (c % k as u64) as usize;
            c /= k as u64;
        }
        let mut loss = 0.0;
        for g in 0..k {
            let members: Vec<&Vec<f64>> = (0..n).filter(|&i| labels[i] == g).map(|i| &points[i]).collect();
            if members.is_empty() {
                continue;
            }
            for dim in 0..d {
                let mean = members.iter().map(|p| p[dim]).sum::<f64>() / members.len() as f64;
                loss += members.iter().map(|p| (p[dim] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(loss);
    }
    best
}

/// All permutations of `0..r` (Heap's algorithm).
pub fn permutations(r: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..r).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; r];
    let mut i = 0;
    while i < r {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Best fraction of `inliers` with `perm[pred] == truth`, over all permutations.
pub fn brute_accuracy(pred: &[usize], truth: &[usize], inliers: &[usize], r: usize) -> f64 {
    permutations(r)
        .iter()
        .map(|perm| inliers.iter().filter(|&&i| perm[pred[i]] == truth[i]).count())
        .max()
        .unwrap() as f64
        / inliers.len() as f64
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
}

pub fn to_mat(rows: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> Mat<f64> {
    let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> Mat<f64> {
    let a = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = (0..n).map(|k| a[(i, k)] * a[(j, k)]).sum::<f64>();
        }
    }
    out
}

pub fn max_abs_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

pub fn fro(a: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    s.sqrt()
}

/// Eigenvalues (ascending) by cyclic Jacobi rotations, independent of the
/// crate's eigensolver.
pub fn jacobi_eigenvalues(m: &Mat<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Best matched count via DP over subsets of truth labels, for `r` up to ~16.
pub fn dp_matched(pred: &[usize], truth: &[usize], inliers: &[usize], r: usize) -> usize {
    let mut table = vec![vec![0usize; r]; r];
    for &i in inliers {
        table[pred[i]][truth[i]] += 1;
    }
    let mut best = vec![0usize; 1 << r];
    for mask in 0usize..(1 << r) {
        let a = mask.count_ones() as usize;
        if a >= r {
            continue;
        }
        for b in 0..r {
            if mask & (1 << b) == 0 {
                let next = mask | (1 << b);
                best[next] = best[next].max(best[mask] + table[a][b]);
            }
        }
    }
    best[(1 << r) - 1]
}
