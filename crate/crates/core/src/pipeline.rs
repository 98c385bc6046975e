//! End-to-end clustering: SDP (relax, eigenvectors, k-means), the kernel
//! spectral baselines and plain k-means on the raw points.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelKind, KernelMatrix};
use crate::kmeans::{self, KMeansResult};
use crate::metrics::{self, BoundInputs, EvalReport};
use crate::model::{DataSet, MixtureConfig};
use crate::sdp::{self, AdmmParams, SdpSolution};
use crate::spectral::{self, EigenBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sdp,
    Ksvd,
    Kpca,
    Spectral,
    KmeansRaw,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Sdp, Method::Ksvd, Method::Kpca, Method::Spectral, Method::KmeansRaw];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sdp => "sdp",
            Method::Ksvd => "ksvd",
            Method::Kpca => "kpca",
            Method::Spectral => "spectral",
            Method::KmeansRaw => "kmeans_raw",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    pub admm: AdmmParams,
    pub restarts: usize,
    /// Cluster the spectral baselines into `r + 1` groups instead of `r`.
    pub extra_cluster: bool,
}

impl PipelineOptions {
    /// Solver tolerances of 1e-7 and two continuation passes, for runs whose
    /// inequality checks need an accurate optimum.
    pub fn diagnostic() -> Self {
        let mut o = Self::default();
        o.admm.tol_primal = 1e-7;
        o.admm.tol_dual = 1e-7;
        o.admm.continuation = 2;
        o
    }
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            admm: AdmmParams::default(),
            restarts: kmeans::DEFAULT_RESTARTS,
            extra_cluster: false,
        }
    }
}

/// Labels plus every intermediate artifact of one run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub method: Method,
    pub r: usize,
    pub eta: Option<f64>,
    pub labels: Vec<usize>,
    /// The Gaussian kernel of the data.
    pub kernel: Option<KernelMatrix>,
    /// The matrix the baseline took eigenvectors of (centered / normalized
    /// kernel); equal to `kernel` for K-SVD and absent for SDP.
    pub transformed: Option<KernelMatrix>,
    pub sdp: Option<SdpSolution>,
    pub basis: Option<EigenBasis>,
    pub kmeans: KMeansResult,
    pub runtime_ms: f64,
}

impl PipelineRun {
    /// Whether the SDP solve hit its iteration cap.
    pub fn unconverged(&self) -> bool {
        self.sdp.as_ref().is_some_and(|s| !s.converged)
    }
}

/// Run `method` on `data` with `r` clusters. `eta = None` uses the median
/// heuristic.
pub fn run_pipeline(data: &DataSet, method: Method, eta: Option<f64>, r: usize, seed: u64, opts: &PipelineOptions) -> Result<PipelineRun> {
    let start = Instant::now();
    let n = data.n();
    if r < 2 || r > n {
        return Err(Error::InvalidArgument(format!("need 2 <= r <= n, got r = {r}, n = {n}")));
    }
    if method == Method::KmeansRaw {
        let km = kmeans::lloyd(data.y.as_ref(), r, opts.restarts, seed)?;
        return Ok(PipelineRun {
            method,
            r,
            eta: None,
            labels: km.labels.clone(),
            kernel: None,
            transformed: None,
            sdp: None,
            basis: None,
            kmeans: km,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    let d = kernel::pairwise_sq_distances(data.y.as_ref());
    let eta = match eta {
        Some(e) => e,
        None => kernel::median_eta_from_distances(&d)?,
    };
    let k = kernel::kernel_from_distances(&d, eta);
    let mut run = run_with_kernel(k, eta, method, r, seed, opts)?;
    run.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(run)
}

/// The kernel part of a pipeline, starting from a given kernel matrix
/// (built with bandwidth `eta`).
pub fn run_with_kernel(k: KernelMatrix, eta: f64, method: Method, r: usize, seed: u64, opts: &PipelineOptions) -> Result<PipelineRun> {
    let start = Instant::now();
    let n = k.n();
    if r < 2 || r > n {
        return Err(Error::InvalidArgument(format!("need 2 <= r <= n, got r = {r}, n = {n}")));
    }
    let k_clusters = if opts.extra_cluster && method != Method::Sdp { r + 1 } else { r };
    let (transformed, sdp, basis) = match method {
        Method::Sdp => {
            let sol = sdp::solve_sdp1(&k, r, &opts.admm)?;
            let basis = spectral::top_eigenvectors(sol.x_hat.x.as_ref(), r)?;
            (None, Some(sol), basis)
        }
        Method::Ksvd => {
            let basis = spectral::top_eigenvectors(k.as_ref(), r)?;
            (Some(k.clone()), None, basis)
        }
        Method::Kpca => {
            let c = kernel::center_kernel(&k);
            let basis = spectral::top_singular_vectors(c.as_ref(), r)?;
            (Some(c), None, basis)
        }
        Method::Spectral => {
            let l = kernel::laplacian_normalize(&k)?;
            let basis = spectral::top_eigenvectors(l.as_ref(), r)?;
            (Some(l), None, basis)
        }
        Method::KmeansRaw => {
            return Err(Error::InvalidArgument("kmeans_raw works on the data, not a kernel".into()));
        }
    };
    let km = kmeans::lloyd(basis.u.as_ref(), k_clusters, opts.restarts, seed)?;
    Ok(PipelineRun {
        method,
        r,
        eta: Some(eta),
        labels: km.labels.clone(),
        kernel: Some(k),
        transformed,
        sdp,
        basis: Some(basis),
        kmeans: km,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// The population reference matching the matrix a run took eigenvectors of.
pub fn reference_kernel(config: &MixtureConfig, eta: f64, kind: KernelKind) -> Result<KernelMatrix> {
    let kt = kernel::population_kernel(config, eta)?;
    match kind {
        KernelKind::Empirical | KernelKind::Population => Ok(kt),
        KernelKind::Centered => Ok(kernel::center_kernel(&kt)),
        KernelKind::LaplacianNormalized => kernel::laplacian_normalize(&kt),
    }
}

/// Accuracy and, when the generating `config` is supplied, the consistency
/// checks for one run.
pub fn evaluate(run: &PipelineRun, data: &DataSet, config: Option<&MixtureConfig>) -> Result<EvalReport> {
    evaluate_impl(run, data, config, true)
}

/// Like [`evaluate`] but never runs the bound checks; `config` is only used
/// for the baselines' misclustered count.
pub fn summarize(run: &PipelineRun, data: &DataSet, config: Option<&MixtureConfig>) -> Result<EvalReport> {
    evaluate_impl(run, data, config, false)
}

fn evaluate_impl(run: &PipelineRun, data: &DataSet, config: Option<&MixtureConfig>, bounds: bool) -> Result<EvalReport> {
    let inlier_accuracy = metrics::inlier_accuracy(&run.labels, &data.labels, &data.inliers, run.r)?;
    let all_points_accuracy = metrics::all_points_accuracy(&run.labels, &data.labels)?;
    let inlier_cluster_count = metrics::inlier_cluster_count(&run.labels, &data.inliers);
    let z = data.membership()?;

    let l1_error = match &run.sdp {
        Some(sol) => {
            let x0 = crate::model::clustering_matrix(&z);
            Some(metrics::l1_distance(x0.x.as_ref(), sol.x_hat.x.as_ref())?)
        }
        None => None,
    };

    let mut report = EvalReport {
        inlier_accuracy,
        all_points_accuracy,
        l1_error,
        misclustered_count: None,
        inlier_cluster_count,
        bound_checks: Vec::new(),
    };

    let (Some(basis), Some(k), Some(eta)) = (&run.basis, &run.kernel, run.eta) else {
        return Ok(report);
    };

    if run.sdp.is_some() {
        let u0 = metrics::membership_basis(&z);
        report.misclustered_count = metrics::misclustered_count(basis, &u0, &z, &run.kmeans)?;
    }

    let Some(config) = config else {
        return Ok(report);
    };
    let (used, kind) = match &run.transformed {
        Some(t) => (t, t.kind),
        None => (k, KernelKind::Empirical),
    };
    let kt = reference_kernel(config, eta, kind)?;
    let stats = kernel::separation_stats(config, eta)?;
    if run.sdp.is_none() {
        let reference = if run.method == Method::Kpca {
            spectral::top_singular_vectors(kt.as_ref(), run.r)?
        } else {
            spectral::top_eigenvectors(kt.as_ref(), run.r)?
        };
        report.misclustered_count = metrics::misclustered_count(basis, &reference, &z, &run.kmeans)?;
    }
    if !bounds {
        return Ok(report);
    }
    let inputs = BoundInputs {
        k: used,
        k_tilde: &kt,
        z: &z,
        gamma_min: stats.gamma_min,
        eigengap_lower_bound: matches!(kind, KernelKind::Empirical | KernelKind::Population).then_some(stats.eigengap_lower_bound),
        x_hat: run.sdp.as_ref().map(|s| &s.x_hat),
        basis,
        magnitude_order: run.method == Method::Kpca,
        kmeans: &run.kmeans,
    };
    report.bound_checks = metrics::check_consistency_bounds(&inputs)?;
    Ok(report)
}
