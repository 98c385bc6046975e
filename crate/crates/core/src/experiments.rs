//! Parameter sweeps over the mixture model and the theory-diagnostic grid.
//!
//! Both produce plain CSV. Work items run in the `par` pool and rows are
//! sorted before they are written, so output never depends on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, KernelMatrix};
use crate::metrics::{BoundCheck, BoundStatus};
use crate::model::{self, MixtureConfig, NoiseKind};
use crate::par;
use crate::pipeline::{self, Method, PipelineOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Panel {
    Clusters,
    Outliers,
    Separation,
    Custom,
}

impl Panel {
    pub fn name(self) -> &'static str {
        match self {
            Panel::Clusters => "clusters",
            Panel::Outliers => "outliers",
            Panel::Separation => "separation",
            Panel::Custom => "custom",
        }
    }

    /// The parameter a built-in panel varies.
    pub fn default_param(self) -> Option<SweepParam> {
        match self {
            Panel::Clusters => Some(SweepParam::R),
            Panel::Outliers => Some(SweepParam::M),
            Panel::Separation => Some(SweepParam::D2),
            Panel::Custom => None,
        }
    }
}

impl fmt::Display for Panel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    N,
    M,
    R,
    P,
    D2,
    Sigma,
}

/// Mixture with coordinate-vector means `c·e_a`, `‖μ_a − μ_b‖² = d2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub p: usize,
    pub d2: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub noise: NoiseKind,
}

fn one() -> f64 {
    1.0
}

fn as_count(param: SweepParam, value: f64) -> Result<usize> {
    if value < 0.0 || value.fract() != 0.0 || !value.is_finite() {
        return Err(Error::InvalidConfig(format!("{param:?} needs a nonnegative integer, got {value}")));
    }
    Ok(value as usize)
}

impl Template {
    pub fn with(&self, param: SweepParam, value: f64) -> Result<Template> {
        let mut t = self.clone();
        match param {
            SweepParam::N => t.n = as_count(param, value)?,
            SweepParam::M => t.m = as_count(param, value)?,
            SweepParam::R => t.r = as_count(param, value)?,
            SweepParam::P => t.p = as_count(param, value)?,
            SweepParam::D2 => t.d2 = value,
            SweepParam::Sigma => t.sigma = value,
        }
        Ok(t)
    }

    pub fn config(&self, seed: u64) -> Result<MixtureConfig> {
        let mut cfg = MixtureConfig::with_separation(self.n, self.m, self.r, self.p, self.d2, self.sigma, seed)?;
        cfg.noise = self.noise;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub panel: Panel,
    /// Required for `custom`; defaults to the panel's own parameter otherwise.
    #[serde(default)]
    pub sweep_param: Option<SweepParam>,
    pub sweep_values: Vec<f64>,
    pub fixed: Template,
    /// Kernel bandwidth; `None` picks the median heuristic per data set.
    #[serde(default)]
    pub eta: Option<f64>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed_base: u64,
    #[serde(default)]
    pub options: PipelineOptions,
    /// Fill `runtime_ms`. Off by default so raw CSVs are reproducible.
    #[serde(default)]
    pub record_runtime: bool,
}

pub const DEFAULT_METHODS: [Method; 4] = [Method::Sdp, Method::Ksvd, Method::Kpca, Method::KmeansRaw];

impl ExperimentSpec {
    pub fn param(&self) -> Result<SweepParam> {
        self.sweep_param
            .or(self.panel.default_param())
            .ok_or_else(|| Error::InvalidConfig("custom panels need a sweep_param".into()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(Error::InvalidConfig("sweep_values is empty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods given".into()));
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
            }
        }
        let param = self.param()?;
        for &v in &self.sweep_values {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("sweep value {v} is not finite")));
            }
            self.fixed.with(param, v)?;
        }
        self.options.admm.validate()
    }

    /// Clusters panel: `n = p = 1500, m = 10, d² = 0.125, σ = 1`, varying `r`.
    pub fn clusters() -> Self {
        Self::panel_default(
            Panel::Clusters,
            vec![2.0, 3.0, 4.0, 5.0, 6.0, 10.0],
            Template { n: 1500, m: 10, r: 2, p: 1500, d2: 0.125, sigma: 1.0, noise: NoiseKind::Gaussian },
        )
    }

    /// Outliers panel: `n = 1000, r = 5, d² = 0.02, σ = 1, p = 500`, varying `m`.
    pub fn outliers() -> Self {
        Self::panel_default(
            Panel::Outliers,
            vec![0.0, 25.0, 50.0, 75.0, 100.0, 150.0, 200.0],
            Template { n: 1000, m: 0, r: 5, p: 500, d2: 0.02, sigma: 1.0, noise: NoiseKind::Gaussian },
        )
    }

    /// Separation panel: `n = 1000, r = 5, m = 50, σ = 1, p = 1000`, varying `d²`.
    pub fn separation() -> Self {
        Self::panel_default(
            Panel::Separation,
            vec![0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1],
            Template { n: 1000, m: 50, r: 5, p: 1000, d2: 0.02, sigma: 1.0, noise: NoiseKind::Gaussian },
        )
    }

    pub fn for_panel(panel: Panel) -> Result<Self> {
        match panel {
            Panel::Clusters => Ok(Self::clusters()),
            Panel::Outliers => Ok(Self::outliers()),
            Panel::Separation => Ok(Self::separation()),
            Panel::Custom => Err(Error::InvalidArgument("custom panels have no default".into())),
        }
    }

    fn panel_default(panel: Panel, sweep_values: Vec<f64>, fixed: Template) -> Self {
        Self {
            panel,
            sweep_param: None,
            sweep_values,
            fixed,
            eta: None,
            methods: DEFAULT_METHODS.to_vec(),
            replicates: 10,
            seed_base: 2017,
            options: PipelineOptions::default(),
            record_runtime: false,
        }
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one (sweep point, replicate) cell.
pub fn replicate_seed(seed_base: u64, sweep_index: usize, replicate: usize) -> u64 {
    mix(mix(mix(seed_base) ^ sweep_index as u64) ^ (replicate as u64).rotate_left(32))
}

/// One raw CSV row. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub panel: Panel,
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub p: usize,
    pub d2: f64,
    pub sigma: f64,
    pub eta: Option<f64>,
    pub seed: u64,
    pub replicate: usize,
    pub inlier_accuracy: Option<f64>,
    pub l1_error: Option<f64>,
    pub misclustered: Option<usize>,
    pub inlier_clusters: Option<usize>,
    pub sdp_iterations: Option<usize>,
    pub runtime_ms: Option<f64>,
    pub error: String,
}

pub const RAW_COLUMNS: [&str; 18] = [
    "panel",
    "method",
    "n",
    "m",
    "r",
    "p",
    "d2",
    "sigma",
    "eta",
    "seed",
    "replicate",
    "inlier_accuracy",
    "l1_error",
    "misclustered",
    "inlier_clusters",
    "sdp_iterations",
    "runtime_ms",
    "error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub panel: Panel,
    pub method: Method,
    pub sweep_value: f64,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub p: usize,
    pub d2: f64,
    pub sigma: f64,
    /// Runs that produced an accuracy.
    pub runs: usize,
    pub errors: usize,
    pub accuracy_mean: Option<f64>,
    /// Sample standard deviation (n − 1 denominator); empty below two runs.
    pub accuracy_std: Option<f64>,
    pub l1_error_mean: Option<f64>,
    pub misclustered_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepOutput {
    /// Mean accuracy of `method` at the sweep point `value`.
    pub fn mean_accuracy(&self, method: Method, value: f64) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.sweep_value == value)
            .and_then(|a| a.accuracy_mean)
    }
}

fn swept_value(param: SweepParam, t: &Template) -> f64 {
    match param {
        SweepParam::N => t.n as f64,
        SweepParam::M => t.m as f64,
        SweepParam::R => t.r as f64,
        SweepParam::P => t.p as f64,
        SweepParam::D2 => t.d2,
        SweepParam::Sigma => t.sigma,
    }
}

fn run_cell(spec: &ExperimentSpec, param: SweepParam, sweep_index: usize, replicate: usize) -> Vec<SweepRow> {
    let value = spec.sweep_values[sweep_index];
    let seed = replicate_seed(spec.seed_base, sweep_index, replicate);
    let t = spec.fixed.with(param, value).unwrap_or_else(|_| spec.fixed.clone());
    let blank = |method: Method, error: String| SweepRow {
        panel: spec.panel,
        method,
        n: t.n,
        m: t.m,
        r: t.r,
        p: t.p,
        d2: t.d2,
        sigma: t.sigma,
        eta: spec.eta,
        seed,
        replicate,
        inlier_accuracy: None,
        l1_error: None,
        misclustered: None,
        inlier_clusters: None,
        sdp_iterations: None,
        runtime_ms: None,
        error,
    };
    let data = t.config(seed).and_then(|cfg| model::generate_mixture(&cfg).map(|d| (cfg, d)));
    let (cfg, data) = match data {
        Ok(x) => x,
        Err(e) => return spec.methods.iter().map(|&m| blank(m, e.to_string())).collect(),
    };
    spec.methods
        .iter()
        .map(|&method| {
            let outcome = pipeline::run_pipeline(&data, method, spec.eta, t.r, seed, &spec.options)
                .and_then(|run| pipeline::summarize(&run, &data, Some(&cfg)).map(|rep| (run, rep)));
            match outcome {
                Ok((run, rep)) => {
                    let mut row = blank(method, String::new());
                    row.eta = run.eta;
                    row.inlier_accuracy = Some(rep.inlier_accuracy);
                    row.l1_error = rep.l1_error;
                    row.misclustered = rep.misclustered_count;
                    row.inlier_clusters = Some(rep.inlier_cluster_count);
                    row.sdp_iterations = run.sdp.as_ref().map(|s| s.iterations);
                    row.runtime_ms = spec.record_runtime.then_some(run.runtime_ms);
                    if run.unconverged() {
                        row.error = "sdp did not converge".into();
                    }
                    row
                }
                Err(e) => blank(method, e.to_string()),
            }
        })
        .collect()
}

/// Run every (sweep value, replicate, method) cell. Single-run failures
/// become rows with a non-empty `error`.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let param = spec.param()?;
    let cells = spec.sweep_values.len() * spec.replicates;
    let mut rows: Vec<SweepRow> = par::map_range(cells, |c| run_cell(spec, param, c / spec.replicates, c % spec.replicates))
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        let va = swept_value(param, &row_template(a));
        let vb = swept_value(param, &row_template(b));
        va.total_cmp(&vb)
            .then(a.replicate.cmp(&b.replicate))
            .then(a.method.cmp(&b.method))
    });
    let aggregates = aggregate(spec.panel, param, &rows);
    Ok(SweepOutput { rows, aggregates })
}

fn row_template(row: &SweepRow) -> Template {
    Template {
        n: row.n,
        m: row.m,
        r: row.r,
        p: row.p,
        d2: row.d2,
        sigma: row.sigma,
        noise: NoiseKind::Gaussian,
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_std(xs: &[f64]) -> Option<f64> {
    let mu = mean(xs)?;
    (xs.len() >= 2).then(|| (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// Mean and spread per (sweep value, method), recomputed from raw rows.
/// A row counts as a run whenever it has an accuracy, flagged or not.
pub fn aggregate(panel: Panel, param: SweepParam, rows: &[SweepRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(u64, Method), Vec<&SweepRow>> = BTreeMap::new();
    for row in rows {
        let v = swept_value(param, &row_template(row));
        groups.entry((order_key(v), row.method)).or_default().push(row);
    }
    groups
        .into_values()
        .map(|g| {
            let first = g[0];
            let acc: Vec<f64> = g.iter().filter_map(|r| r.inlier_accuracy).collect();
            let l1: Vec<f64> = g.iter().filter_map(|r| r.l1_error).collect();
            let mis: Vec<f64> = g.iter().filter_map(|r| r.misclustered.map(|x| x as f64)).collect();
            AggregateRow {
                panel,
                method: first.method,
                sweep_value: swept_value(param, &row_template(first)),
                n: first.n,
                m: first.m,
                r: first.r,
                p: first.p,
                d2: first.d2,
                sigma: first.sigma,
                runs: acc.len(),
                errors: g.iter().filter(|r| r.inlier_accuracy.is_none()).count(),
                accuracy_mean: mean(&acc),
                accuracy_std: sample_std(&acc),
                l1_error_mean: mean(&l1),
                misclustered_mean: mean(&mis),
            }
        })
        .collect()
}

/// Monotone map from finite f64 to u64 so that sort order matches `<`.
fn order_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 { !bits } else { bits | (1 << 63) }
}

pub fn write_rows<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(RAW_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(input);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_aggregates<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One entry of the diagnostic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticConfig {
    #[serde(flatten)]
    pub template: Template,
    pub seed: u64,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Feed the population kernel itself to the solvers (zero-noise row).
    #[serde(default)]
    pub population: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticGrid {
    pub configs: Vec<DiagnosticConfig>,
    #[serde(default = "PipelineOptions::diagnostic")]
    pub options: PipelineOptions,
}

impl DiagnosticGrid {
    /// Every (p, seed) combination on top of `base`.
    pub fn over_dimension(base: &Template, ps: &[usize], seeds: std::ops::Range<u64>, eta: Option<f64>) -> Self {
        let configs = ps
            .iter()
            .flat_map(|&p| {
                seeds.clone().map(move |seed| DiagnosticConfig {
                    template: Template { p, ..base.clone() },
                    seed,
                    eta,
                    population: false,
                })
            })
            .collect();
        Self { configs, options: PipelineOptions::diagnostic() }
    }

    /// Small desk grid: a noiseless row, a dimension sweep and a few
    /// outlier and separation variations.
    pub fn default_grid() -> Self {
        let base = Template { n: 60, m: 0, r: 3, p: 100, d2: 2.0, sigma: 1.0, noise: NoiseKind::Gaussian };
        let mut configs = vec![DiagnosticConfig { template: base.clone(), seed: 0, eta: None, population: true }];
        for (i, p) in [100usize, 400, 1600].into_iter().enumerate() {
            for seed in 0..3 {
                configs.push(DiagnosticConfig {
                    template: Template { n: 60, r: 2, p, d2: 1.0, ..base.clone() },
                    seed: 10 * i as u64 + seed,
                    eta: Some(1.0),
                    population: false,
                });
            }
        }
        for (m, d2) in [(0usize, 4.0), (3, 2.0), (6, 1.0)] {
            configs.push(DiagnosticConfig { template: Template { m, d2, ..base.clone() }, seed: 100 + m as u64, eta: None, population: false });
        }
        Self { configs, options: PipelineOptions::diagnostic() }
    }
}

/// One diagnostic row. `*_pass` is `pass`, `fail` or `na`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub index: usize,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub p: usize,
    pub d2: f64,
    pub sigma: f64,
    pub seed: u64,
    pub eta: Option<f64>,
    pub kernel: String,
    pub sup_deviation: Option<f64>,
    pub gamma_min: Option<f64>,
    pub eigengap: Option<f64>,
    pub eigengap_bound: Option<f64>,
    pub eigengap_pass: String,
    pub l1_lhs: Option<f64>,
    pub l1_rhs: Option<f64>,
    pub l1_pass: String,
    pub eigvec_lhs: Option<f64>,
    pub eigvec_rhs: Option<f64>,
    pub eigvec_pass: String,
    pub dk_sdp_lhs: Option<f64>,
    pub dk_sdp_rhs: Option<f64>,
    pub dk_sdp_pass: String,
    pub misclustered_sdp_lhs: Option<f64>,
    pub misclustered_sdp_rhs: Option<f64>,
    pub misclustered_sdp_pass: String,
    pub dk_kernel_lhs: Option<f64>,
    pub dk_kernel_rhs: Option<f64>,
    pub dk_kernel_pass: String,
    pub misclustered_kernel_lhs: Option<f64>,
    pub misclustered_kernel_rhs: Option<f64>,
    pub misclustered_kernel_pass: String,
    pub violations: usize,
    pub error: String,
}

fn status_str(s: BoundStatus) -> &'static str {
    match s {
        BoundStatus::Pass => "pass",
        BoundStatus::Fail => "fail",
        BoundStatus::NotApplicable => "na",
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl DiagnosticRow {
    fn put(&mut self, check: &BoundCheck) {
        let (lhs, rhs, pass) = (finite(check.lhs), finite(check.rhs), status_str(check.status).to_string());
        let slot = match check.name.as_str() {
            "eigengap_lower_bound" => {
                self.eigengap_bound = lhs;
                self.eigengap = rhs;
                self.eigengap_pass = pass;
                return;
            }
            "l1_recovery" => (&mut self.l1_lhs, &mut self.l1_rhs, &mut self.l1_pass),
            "eigvec_l1" => (&mut self.eigvec_lhs, &mut self.eigvec_rhs, &mut self.eigvec_pass),
            "davis_kahan_sdp" => (&mut self.dk_sdp_lhs, &mut self.dk_sdp_rhs, &mut self.dk_sdp_pass),
            "misclustered_sdp" => (&mut self.misclustered_sdp_lhs, &mut self.misclustered_sdp_rhs, &mut self.misclustered_sdp_pass),
            "davis_kahan_kernel" => (&mut self.dk_kernel_lhs, &mut self.dk_kernel_rhs, &mut self.dk_kernel_pass),
            "misclustered_kernel" => (&mut self.misclustered_kernel_lhs, &mut self.misclustered_kernel_rhs, &mut self.misclustered_kernel_pass),
            _ => return,
        };
        *slot.0 = lhs;
        *slot.1 = rhs;
        *slot.2 = pass;
    }
}

fn diagnose_one(index: usize, cfg: &DiagnosticConfig, opts: &PipelineOptions) -> Result<DiagnosticRow> {
    let t = &cfg.template;
    let mc = t.config(cfg.seed)?;
    let data = model::generate_mixture(&mc)?;
    let eta = match cfg.eta {
        Some(e) => e,
        None => kernel::median_heuristic_eta(data.y.as_ref())?,
    };
    let kt = kernel::population_kernel(&mc, eta)?;
    let k: KernelMatrix = if cfg.population { kt.clone() } else { kernel::gaussian_kernel(data.y.as_ref(), eta)? };
    let stats = kernel::separation_stats(&mc, eta)?;

    let mut row = DiagnosticRow {
        index,
        n: t.n,
        m: t.m,
        r: t.r,
        p: t.p,
        d2: t.d2,
        sigma: t.sigma,
        seed: cfg.seed,
        eta: Some(eta),
        kernel: if cfg.population { "population" } else { "empirical" }.into(),
        sup_deviation: Some(kernel::sup_deviation(&k, &kt, &data.inliers)?),
        gamma_min: Some(stats.gamma_min),
        ..Default::default()
    };

    for method in [Method::Sdp, Method::Ksvd] {
        let run = pipeline::run_with_kernel(k.clone(), eta, method, t.r, cfg.seed, opts)?;
        let rep = pipeline::evaluate(&run, &data, Some(&mc))?;
        for check in &rep.bound_checks {
            row.put(check);
        }
        row.violations += rep.violations().count();
    }
    Ok(row)
}

/// Evaluate every inequality on every grid entry. Failing entries keep their
/// row with `error` set.
pub fn run_diagnostics(grid: &DiagnosticGrid) -> Result<Vec<DiagnosticRow>> {
    if grid.configs.is_empty() {
        return Err(Error::InvalidConfig("diagnostic grid is empty".into()));
    }
    grid.options.admm.validate()?;
    Ok(par::map_range(grid.configs.len(), |i| {
        let cfg = &grid.configs[i];
        diagnose_one(i, cfg, &grid.options).unwrap_or_else(|e| DiagnosticRow {
            index: i,
            n: cfg.template.n,
            m: cfg.template.m,
            r: cfg.template.r,
            p: cfg.template.p,
            d2: cfg.template.d2,
            sigma: cfg.template.sigma,
            seed: cfg.seed,
            eta: cfg.eta,
            kernel: if cfg.population { "population" } else { "empirical" }.into(),
            error: e.to_string(),
            ..Default::default()
        })
    }))
}

pub fn total_violations(rows: &[DiagnosticRow]) -> usize {
    rows.iter().map(|r| r.violations).sum()
}

pub fn write_diagnostics<W: Write>(rows: &[DiagnosticRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
