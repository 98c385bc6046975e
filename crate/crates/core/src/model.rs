//! Mixture-with-outliers data model and its deterministic generator.
//!
//! Inliers of cluster `a` are drawn as `μ_a + W/√p` with `W` isotropic with
//! per-coordinate variance `σ_a²`. Outliers are appended after the inliers;
//! the first half come from a wide Gaussian around the centroid of the means
//! and the second half are uniform on an inflated bounding box of the means.
//! For bookkeeping every outlier is also given a cluster label, round-robin,
//! so that each extended cluster holds exactly `n/r` points.

use std::io::Write;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub const DEFAULT_OUTLIER_SCALE: f64 = 3.0;
pub const DEFAULT_BOX_INFLATION: f64 = 1.5;

fn default_outlier_scale() -> f64 {
    DEFAULT_OUTLIER_SCALE
}

fn default_box_inflation() -> f64 {
    DEFAULT_BOX_INFLATION
}

/// Inlier noise law. Both have mean zero and per-coordinate variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Uniform on `[-√3σ, √3σ]` per coordinate.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub p: usize,
    /// One dense vector of length `p` per cluster.
    pub means: Vec<Vec<f64>>,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_outlier_scale")]
    pub outlier_scale: f64,
    #[serde(default = "default_box_inflation")]
    pub box_inflation: f64,
    #[serde(default)]
    pub noise: NoiseKind,
    pub seed: u64,
}

impl MixtureConfig {
    /// Means `c·e_a` with `c = √(d²/2)`, so every pair of centers is at
    /// squared distance `d2`, and a shared noise scale `sigma`.
    pub fn with_separation(
        n: usize,
        m: usize,
        r: usize,
        p: usize,
        d2: f64,
        sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if p < r {
            return Err(Error::InvalidConfig(format!(
                "coordinate-vector means need p >= r (p = {p}, r = {r})"
            )));
        }
        if !(d2 > 0.0) || !d2.is_finite() {
            return Err(Error::InvalidConfig(format!("separation d2 must be positive, got {d2}")));
        }
        let c = (d2 / 2.0).sqrt();
        let means = (0..r)
            .map(|a| {
                let mut v = vec![0.0; p];
                v[a] = c;
                v
            })
            .collect();
        let cfg = Self {
            n,
            m,
            r,
            p,
            means,
            sigmas: vec![sigma; r],
            outlier_scale: DEFAULT_OUTLIER_SCALE,
            box_inflation: DEFAULT_BOX_INFLATION,
            noise: NoiseKind::Gaussian,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.r < 2 {
            return bad(format!("need at least two clusters, got r = {}", self.r));
        }
        if self.n == 0 || self.n % self.r != 0 {
            return bad(format!("r = {} must divide n = {}", self.r, self.n));
        }
        if self.m >= self.n {
            return bad(format!("outlier count m = {} must be below n = {}", self.m, self.n));
        }
        if self.p == 0 {
            return bad("dimension p must be positive".into());
        }
        if self.means.len() != self.r || self.sigmas.len() != self.r {
            return bad(format!(
                "expected {} means and sigmas, got {} and {}",
                self.r,
                self.means.len(),
                self.sigmas.len()
            ));
        }
        if let Some(mu) = self.means.iter().find(|mu| mu.len() != self.p) {
            return bad(format!("mean of length {} in dimension p = {}", mu.len(), self.p));
        }
        if self.means.iter().flatten().any(|x| !x.is_finite()) {
            return bad("means must be finite".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return bad(format!("noise scales must be positive, got {s}"));
        }
        if !(self.outlier_scale >= 0.0) || !(self.box_inflation >= 0.0) {
            return bad("outlier_scale and box_inflation must be nonnegative".into());
        }
        for k in 0..self.r {
            for l in (k + 1)..self.r {
                if self.sq_dist(k, l) == 0.0 {
                    return bad(format!("clusters {k} and {l} share a center"));
                }
            }
        }
        Ok(())
    }

    pub fn cluster_size(&self) -> usize {
        self.n / self.r
    }

    /// `d²_kℓ = ‖μ_k − μ_ℓ‖²`
    pub fn sq_dist(&self, k: usize, l: usize) -> f64 {
        self.means[k]
            .iter()
            .zip(&self.means[l])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Ground-truth extended labels and outlier flags, in generation order.
    pub fn layout(&self) -> (Vec<usize>, Vec<bool>) {
        let (n, m, r) = (self.n, self.m, self.r);
        let size = n / r;
        let mut outliers_in = vec![0usize; r];
        for j in 0..m {
            outliers_in[j % r] += 1;
        }
        let mut labels = Vec::with_capacity(n);
        let mut is_outlier = Vec::with_capacity(n);
        for (k, &o) in outliers_in.iter().enumerate() {
            labels.extend(std::iter::repeat_n(k, size - o));
            is_outlier.extend(std::iter::repeat_n(false, size - o));
        }
        for j in 0..m {
            labels.push(j % r);
            is_outlier.push(true);
        }
        (labels, is_outlier)
    }
}

/// Generated observations plus ground truth.
#[derive(Debug, Clone)]
pub struct DataSet {
    /// `n × p` observations, one row per point.
    pub y: Mat<f64>,
    /// Extended cluster label of every point (outliers included).
    pub labels: Vec<usize>,
    pub inliers: Vec<usize>,
    pub outliers: Vec<usize>,
    pub r: usize,
}

impl DataSet {
    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_outlier(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n()];
        for &i in &self.outliers {
            flags[i] = true;
        }
        flags
    }

    pub fn membership(&self) -> Result<MembershipMatrix> {
        MembershipMatrix::from_labels(self.labels.clone(), self.r)
    }

    /// One row per point: the `p` coordinates, then `label`, then `is_outlier` (0/1).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.p()).map(|d| format!("x{d}")).collect();
        header.push("label".into());
        header.push("is_outlier".into());
        w.write_record(&header)?;
        let flags = self.is_outlier();
        for i in 0..self.n() {
            let mut rec: Vec<String> = (0..self.p()).map(|d| format!("{:?}", self.y[(i, d)])).collect();
            rec.push(self.labels[i].to_string());
            rec.push(u8::from(flags[i]).to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws a data set. Each point reads its own ChaCha stream (stream id =
/// point index), so parallel and serial generation agree bit for bit.
pub fn generate_mixture(config: &MixtureConfig) -> Result<DataSet> {
    config.validate()?;
    let (labels, is_outlier) = config.layout();
    let (n, m, p) = (config.n, config.m, config.p);
    let inv_sqrt_p = 1.0 / (p as f64).sqrt();

    let centroid: Vec<f64> = (0..p)
        .map(|d| config.means.iter().map(|mu| mu[d]).sum::<f64>() / config.r as f64)
        .collect();
    let max_norm = config
        .means
        .iter()
        .map(|mu| mu.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let wide_sd = config.outlier_scale * max_norm;
    let (lo, hi): (Vec<f64>, Vec<f64>) = (0..p)
        .map(|d| {
            let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
            for mu in &config.means {
                a = a.min(mu[d]);
                b = b.max(mu[d]);
            }
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a) * config.box_inflation;
            (mid - half, mid + half)
        })
        .unzip();
    let gaussian_outliers = m.div_ceil(2);
    let first_outlier = n - m;

    let rows: Vec<Vec<f64>> = par::map_range(n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        if !is_outlier[i] {
            let a = labels[i];
            let sigma = config.sigmas[a];
            (0..p)
                .map(|d| config.means[a][d] + sample_noise(&mut rng, config.noise, sigma) * inv_sqrt_p)
                .collect()
        } else if i - first_outlier < gaussian_outliers {
            (0..p)
                .map(|d| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    centroid[d] + wide_sd * g * inv_sqrt_p
                })
                .collect()
        } else {
            (0..p)
                .map(|d| if hi[d] > lo[d] { rng.random_range(lo[d]..hi[d]) } else { lo[d] })
                .collect()
        }
    });

    let y = Mat::from_fn(n, p, |i, d| rows[i][d]);
    let inliers = (0..n).filter(|&i| !is_outlier[i]).collect();
    let outliers = (0..n).filter(|&i| is_outlier[i]).collect();
    Ok(DataSet {
        y,
        labels,
        inliers,
        outliers,
        r: config.r,
    })
}

fn sample_noise<R: Rng>(rng: &mut R, kind: NoiseKind, sigma: f64) -> f64 {
    match kind {
        NoiseKind::Gaussian => {
            let g: f64 = StandardNormal.sample(rng);
            sigma * g
        }
        NoiseKind::Uniform => {
            let half = 3f64.sqrt() * sigma;
            rng.random_range(-half..half)
        }
    }
}

/// `n × r` 0/1 membership matrix, stored by its row labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipMatrix {
    labels: Vec<usize>,
    r: usize,
}

impl MembershipMatrix {
    /// Rejects labels outside `[r]` and unbalanced cluster sizes.
    pub fn from_labels(labels: Vec<usize>, r: usize) -> Result<Self> {
        let n = labels.len();
        if r == 0 || n == 0 || n % r != 0 {
            return Err(Error::InvalidArgument(format!("cannot split {n} points into {r} equal clusters")));
        }
        let mut counts = vec![0usize; r];
        for &l in &labels {
            if l >= r {
                return Err(Error::InvalidArgument(format!("label {l} outside [0, {r})")));
            }
            counts[l] += 1;
        }
        if counts.iter().any(|&c| c != n / r) {
            return Err(Error::InvalidArgument(format!("unbalanced cluster sizes {counts:?}")));
        }
        Ok(Self { labels, r })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn to_matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.n(), self.r, |i, k| if self.labels[i] == k { 1.0 } else { 0.0 })
    }
}

/// `n × n` clustering matrix: `X₀ = ZZᵀ` or a relaxed SDP solution.
#[derive(Debug, Clone)]
pub struct ClusteringMatrix {
    pub x: Mat<f64>,
}

impl ClusteringMatrix {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Largest violation over symmetry, `[0,1]` range, unit diagonal and
    /// the `n/r` row sums (the last scaled by `1/n`).
    pub fn feasibility_violation(&self, r: usize) -> f64 {
        let n = self.n();
        let x = self.x.as_ref();
        let target = n as f64 / r as f64;
        let mut worst = crate::linalg::max_asymmetry(x);
        for i in 0..n {
            worst = worst.max((x[(i, i)] - 1.0).abs());
        }
        for j in 0..n {
            for i in 0..n {
                let v = x[(i, j)];
                worst = worst.max(-v).max(v - 1.0);
            }
        }
        for s in crate::linalg::row_sums(x) {
            worst = worst.max((s - target).abs() / n as f64);
        }
        worst
    }

    /// Entrywise threshold at 1/2.
    pub fn rounded(&self) -> ClusteringMatrix {
        let x = &self.x;
        ClusteringMatrix {
            x: Mat::from_fn(x.nrows(), x.ncols(), |i, j| if x[(i, j)] >= 0.5 { 1.0 } else { 0.0 }),
        }
    }

    /// If this matrix is (up to `tol`) the clustering matrix of some
    /// balanced partition into `r` blocks, return that partition's labels.
    pub fn as_partition(&self, r: usize, tol: f64) -> Option<Vec<usize>> {
        let n = self.n();
        let x = &self.x;
        let mut labels = vec![usize::MAX; n];
        let mut next = 0;
        for i in 0..n {
            if labels[i] != usize::MAX {
                continue;
            }
            if next == r {
                return None;
            }
            for j in i..n {
                if x[(i, j)] > 0.5 {
                    if labels[j] != usize::MAX {
                        return None;
                    }
                    labels[j] = next;
                }
            }
            next += 1;
        }
        let z = MembershipMatrix::from_labels(labels.clone(), r).ok()?;
        let x0 = clustering_matrix(&z);
        let dev = crate::linalg::max_abs(crate::linalg::sub(x.as_ref(), x0.x.as_ref()).as_ref());
        (dev <= tol).then_some(labels)
    }
}

/// `X₀ = ZZᵀ`: one where two points share a cluster, zero elsewhere.
pub fn clustering_matrix(z: &MembershipMatrix) -> ClusteringMatrix {
    let l = z.labels();
    let n = l.len();
    ClusteringMatrix {
        x: Mat::from_fn(n, n, |i, j| if l[i] == l[j] { 1.0 } else { 0.0 }),
    }
}
