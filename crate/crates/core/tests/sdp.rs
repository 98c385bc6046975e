mod common;

use faer::Mat;
use kernclust::kernel::{self, KernelKind, KernelMatrix};
use kernclust::linalg;
use kernclust::model::{self, clustering_matrix, MembershipMatrix, MixtureConfig};
use kernclust::sdp::{self, AdmmParams, IterationRecord, JsonLinesSink};
use proptest::prelude::*;

fn kmat(k: Mat<f64>) -> KernelMatrix {
    KernelMatrix { k, kind: KernelKind::Empirical }
}

fn x0_of(cfg: &MixtureConfig) -> Mat<f64> {
    let (labels, _) = cfg.layout();
    clustering_matrix(&MembershipMatrix::from_labels(labels, cfg.r).unwrap()).x
}

fn assert_feasible(x: &Mat<f64>, r: usize, tol: f64) {
    let n = x.nrows();
    for i in 0..n {
        assert!((x[(i, i)] - 1.0).abs() < tol, "diag {}", x[(i, i)]);
    }
    for s in linalg::row_sums(x.as_ref()) {
        assert!((s - n as f64 / r as f64).abs() < tol * n as f64, "row sum {s}");
    }
    for j in 0..n {
        for i in 0..n {
            assert!(x[(i, j)] > -tol, "entry {}", x[(i, j)]);
        }
    }
    let lam = common::jacobi_eigenvalues(x);
    assert!(lam[0] > -tol, "min eigenvalue {}", lam[0]);
}

#[test]
fn psd_fixed_point_and_clipping() {
    let mut rng = common::rng(1);
    let p = common::random_psd(&mut rng, 6);
    let out = sdp::project_psd(p.as_ref()).unwrap();
    assert!(common::max_abs_diff(&p, &out) < 1e-10);

    let d = Mat::from_fn(2, 2, |i, j| if i == j { [1.0, -1.0][i] } else { 0.0 });
    let out = sdp::project_psd(d.as_ref()).unwrap();
    let expect = Mat::from_fn(2, 2, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
    assert!(common::max_abs_diff(&expect, &out) < 1e-14);
}

#[test]
fn psd_projection_beats_random_psd_matrices() {
    let mut rng = common::rng(2);
    for trial in 0..10 {
        let n = 3 + trial % 5;
        let m = common::random_symmetric(&mut rng, n);
        let out = sdp::project_psd(m.as_ref()).unwrap();
        assert!(common::jacobi_eigenvalues(&out)[0] > -1e-12);
        let best = common::fro(&(&m - &out));
        for _ in 0..100 {
            let mut p = common::random_psd(&mut rng, n);
            let scale: f64 = rand::Rng::random_range(&mut rng, 0.0..1.0);
            p *= faer::Scale(scale);
            assert!(best <= common::fro(&(&m - &p)) + 1e-12);
        }
    }
}

#[test]
fn polytope_fixed_points() {
    let cfg = MixtureConfig::with_separation(12, 0, 3, 4, 1.0, 1.0, 0).unwrap();
    let x0 = x0_of(&cfg);
    let out = sdp::project_polytope(x0.as_ref(), 3).unwrap();
    assert!(common::max_abs_diff(&x0, &out) < 1e-10);

    // mixture of two clustering matrices, still in the polytope
    let other = clustering_matrix(&MembershipMatrix::from_labels((0..12).map(|i| i % 3).collect(), 3).unwrap()).x;
    let mix = Mat::from_fn(12, 12, |i, j| 0.3 * x0[(i, j)] + 0.7 * other[(i, j)]);
    let out = sdp::project_polytope(mix.as_ref(), 3).unwrap();
    assert!(common::max_abs_diff(&mix, &out) < 1e-10);
}

#[test]
fn polytope_from_zeros() {
    let out = sdp::project_polytope(Mat::<f64>::zeros(4, 4).as_ref(), 2).unwrap();
    for i in 0..4 {
        assert!((out[(i, i)] - 1.0).abs() < 1e-8);
    }
    for s in linalg::row_sums(out.as_ref()) {
        assert!((s - 2.0).abs() < 1e-8 * 4.0);
    }
    for j in 0..4 {
        for i in 0..4 {
            assert!(out[(i, j)] >= -1e-12);
        }
    }
}

#[test]
fn population_kernel_recovers_x0_at_n20() {
    let cfg = MixtureConfig::with_separation(20, 0, 2, 5, 1.0, 1.0, 0).unwrap();
    let kt = kernel::population_kernel(&cfg, 1.0).unwrap();
    let sol = sdp::solve_sdp1(&kt, 2, &AdmmParams::default()).unwrap();
    assert!(sol.converged);
    assert!(common::max_abs_diff(&sol.x_hat.x, &x0_of(&cfg)) < 1e-3);
}

#[test]
fn x0_maximizes_population_objective_at_n6() {
    let cfg = MixtureConfig::with_separation(6, 0, 2, 3, 1.0, 1.0, 0).unwrap();
    let kt = kernel::population_kernel(&cfg, 1.0).unwrap();
    let parts = common::balanced_partitions(6, 2);
    assert_eq!(parts.len(), 10);
    let (labels, _) = cfg.layout();
    let truth = common::partition_objective(&kt.k, &labels);
    for p in &parts {
        let v = common::partition_objective(&kt.k, p);
        assert!(v <= truth + 1e-12);
        if *p != labels {
            assert!(v < truth - 1e-9);
        }
    }
}

#[test]
fn constant_kernel_still_feasible() {
    let k = kmat(Mat::from_fn(12, 12, |_, _| 1.0));
    let sol = sdp::solve_sdp1(&k, 3, &AdmmParams::default()).unwrap();
    assert_feasible(&sol.x_hat.x, 3, 1e-5);
}

#[test]
fn well_separated_data_rounds_to_truth() {
    let cfg = MixtureConfig::with_separation(60, 0, 3, 20, 16.0, 0.3, 4).unwrap();
    let data = model::generate_mixture(&cfg).unwrap();
    let k = kernel::gaussian_kernel(data.y.as_ref(), 0.25).unwrap();
    let sol = sdp::solve_sdp1(&k, 3, &AdmmParams::default()).unwrap();
    let rounded = sol.x_hat.rounded();
    assert_eq!(rounded.x, x0_of(&cfg));

    // a 12-point subsample, against the best balanced 3-partition
    let idx: Vec<usize> = (0..3).flat_map(|a| (0..4).map(move |t| a * 20 + t)).collect();
    let sub = kmat(Mat::from_fn(12, 12, |i, j| k.k[(idx[i], idx[j])]));
    let sol = sdp::solve_sdp1(&sub, 3, &AdmmParams::default()).unwrap();
    let best = common::balanced_partitions(12, 3)
        .into_iter()
        .max_by(|a, b| common::partition_objective(&sub.k, a).total_cmp(&common::partition_objective(&sub.k, b)))
        .unwrap();
    let z = MembershipMatrix::from_labels(best, 3).unwrap();
    assert_eq!(sol.x_hat.rounded().x, clustering_matrix(&z).x);
}

#[test]
fn solutions_are_feasible() {
    for (seed, m) in [(0u64, 0usize), (1, 3), (2, 6)] {
        let cfg = MixtureConfig::with_separation(30, m, 3, 10, 0.8, 1.0, seed).unwrap();
        let data = model::generate_mixture(&cfg).unwrap();
        let k = kernel::gaussian_kernel(data.y.as_ref(), 0.5).unwrap();
        let params = AdmmParams { polish: false, ..Default::default() };
        let sol = sdp::solve_sdp1(&k, 3, &params).unwrap();
        assert!(sol.converged);
        assert_feasible(&sol.x_hat.x, 3, params.tol_primal);
        assert!((sol.objective - linalg::inner(k.as_ref(), sol.x_hat.x.as_ref())).abs() < 1e-9 * sol.objective.abs());
    }
}

#[test]
fn residuals_shrink_over_the_run() {
    for (n, r, m, seed) in [(30usize, 3usize, 0usize, 0u64), (40, 4, 4, 1), (24, 2, 2, 2)] {
        let cfg = MixtureConfig::with_separation(n, m, r, 8, 0.6, 1.0, seed).unwrap();
        let data = model::generate_mixture(&cfg).unwrap();
        let k = kernel::gaussian_kernel(data.y.as_ref(), 0.5).unwrap();
        let mut trace: Vec<IterationRecord> = Vec::new();
        let params = AdmmParams { max_iter: 200, ..Default::default() };
        sdp::solve_sdp1_observed(&k, r, &params, |rec| {
            trace.push(*rec);
            Ok(())
        })
        .unwrap();
        let last = trace.last().unwrap();
        let half = &trace[(trace.len() - 1) / 2];
        let combined = |r: &IterationRecord| r.primal_residual + r.dual_residual;
        assert!(combined(last) <= combined(half), "{} > {}", combined(last), combined(half));
    }
}

#[test]
fn telemetry_is_json_lines() {
    let cfg = MixtureConfig::with_separation(12, 0, 2, 4, 1.0, 1.0, 0).unwrap();
    let kt = kernel::population_kernel(&cfg, 1.0).unwrap();
    let mut sink = JsonLinesSink::new(Vec::new(), 1);
    let sol = sdp::solve_sdp1_observed(&kt, 2, &AdmmParams::default(), |rec| sink.record(rec)).unwrap();
    let text = String::from_utf8(sink.into_inner()).unwrap();
    let recs: Vec<IterationRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), sol.iterations);
    assert!(recs.windows(2).all(|w| w[1].iteration == w[0].iteration + 1));
}

#[test]
fn continuation_passes_divide_penalty() {
    let cfg = MixtureConfig::with_separation(30, 2, 3, 8, 0.6, 1.0, 4).unwrap();
    let data = model::generate_mixture(&cfg).unwrap();
    let k = kernel::gaussian_kernel(data.y.as_ref(), 0.5).unwrap();
    let params = AdmmParams { max_iter: 20, continuation: 2, ..Default::default() };
    let mut trace: Vec<IterationRecord> = Vec::new();
    let sol = sdp::solve_sdp1_observed(&k, 3, &params, |rec| {
        trace.push(*rec);
        Ok(())
    })
    .unwrap();
    assert!(!sol.converged);
    assert_eq!(sol.iterations, 60);
    let rho = n_over_fro(&k);
    for rec in &trace {
        let want = rho / 10f64.powi(((rec.iteration - 1) / 20) as i32);
        assert!((rec.penalty - want).abs() < 1e-12 * want, "iteration {}", rec.iteration);
    }

    let plain = sdp::solve_sdp1(&k, 3, &AdmmParams::default()).unwrap();
    assert!(plain.converged);
    let more = sdp::solve_sdp1(&k, 3, &AdmmParams { continuation: 2, ..Default::default() }).unwrap();
    assert_eq!(plain.iterations, more.iterations);
    assert_eq!(plain.objective, more.objective);
}

#[test]
fn relaxation_keeps_the_optimum() {
    for seed in 0..3u64 {
        let cfg = MixtureConfig::with_separation(30, 3, 3, 10, 0.5, 1.0, seed).unwrap();
        let data = model::generate_mixture(&cfg).unwrap();
        let k = kernel::gaussian_kernel(data.y.as_ref(), 0.5).unwrap();
        let objs: Vec<f64> = [1.0, 1.6, 1.9]
            .into_iter()
            .map(|relaxation| {
                let params = AdmmParams { relaxation, polish: false, tol_primal: 1e-8, tol_dual: 1e-8, continuation: 2, ..Default::default() };
                let sol = sdp::solve_sdp1(&k, 3, &params).unwrap();
                assert!(sol.converged);
                sol.objective
            })
            .collect();
        for o in &objs[1..] {
            assert!((o - objs[0]).abs() < 1e-5 * objs[0].abs(), "{objs:?}");
        }
    }
}

fn n_over_fro(k: &KernelMatrix) -> f64 {
    k.k.nrows() as f64 / common::fro(&k.k)
}

#[test]
fn rejects_bad_inputs() {
    let asym = kmat(Mat::from_fn(4, 4, |i, j| if i < j { 1.0 } else { 0.5 }));
    assert!(sdp::solve_sdp1(&asym, 2, &AdmmParams::default()).is_err());
    let k = kmat(Mat::identity(6, 6));
    assert!(sdp::solve_sdp1(&k, 4, &AdmmParams::default()).is_err());
    assert!(sdp::solve_sdp1(&k, 1, &AdmmParams::default()).is_err());
    let bad = AdmmParams { penalty: Some(-1.0), ..Default::default() };
    assert!(sdp::solve_sdp1(&k, 2, &bad).is_err());
    for relaxation in [0.0, 2.0] {
        assert!(sdp::solve_sdp1(&k, 2, &AdmmParams { relaxation, ..Default::default() }).is_err());
    }
}

#[test]
fn lemma2_holds_on_solved_instances() {
    for seed in 0..5u64 {
        let cfg = MixtureConfig::with_separation(30, 0, 3, 40, 1.0, 1.0, seed).unwrap();
        let data = model::generate_mixture(&cfg).unwrap();
        let eta = 0.5;
        let k = kernel::gaussian_kernel(data.y.as_ref(), eta).unwrap();
        let kt = kernel::population_kernel(&cfg, eta).unwrap();
        let gamma = (-2.0 * eta).exp() - (-3.0 * eta).exp();
        let sol = sdp::solve_sdp1(&k, 3, &AdmmParams::default()).unwrap();
        let x0 = x0_of(&cfg);
        let (mut l1, mut rhs) = (0.0, 0.0);
        for i in 0..30 {
            for j in 0..30 {
                let d = sol.x_hat.x[(i, j)] - x0[(i, j)];
                l1 += d.abs();
                rhs += (k.k[(i, j)] - kt.k[(i, j)]) * d;
            }
        }
        assert!(l1 <= 2.0 * rhs / gamma + 1e-9, "seed {seed}: {l1} > {}", 2.0 * rhs / gamma);
    }
}

fn gaussian_kernel_of(seed: u64, n: usize) -> KernelMatrix {
    let mut rng = common::rng(seed);
    let pts = common::random_points(&mut rng, n, 2);
    kernel::gaussian_kernel(common::to_mat(&pts).as_ref(), 0.3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sdp_bounds_every_balanced_partition(seed in any::<u64>(), shape in 0usize..6) {
        let (n, r) = [(4, 2), (6, 2), (6, 3), (8, 2), (8, 4), (12, 3)][shape];
        let k = gaussian_kernel_of(seed, n);
        let sol = sdp::solve_sdp1(&k, r, &AdmmParams { continuation: 2, ..Default::default() }).unwrap();
        let best = common::balanced_partitions(n, r)
            .iter()
            .map(|p| common::partition_objective(&k.k, p))
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(sol.objective >= best - 1e-6 * (n * n) as f64, "{} < {}", sol.objective, best);
    }

    #[test]
    fn polytope_projection_is_feasible(seed in any::<u64>(), shape in 0usize..4) {
        let (n, r) = [(4, 2), (6, 3), (9, 3), (10, 5)][shape];
        let mut rng = common::rng(seed);
        let m = common::random_symmetric(&mut rng, n);
        let out = sdp::project_polytope(m.as_ref(), r).unwrap();
        for i in 0..n {
            prop_assert!((out[(i, i)] - 1.0).abs() < 1e-8);
        }
        for s in linalg::row_sums(out.as_ref()) {
            prop_assert!((s - (n / r) as f64).abs() < 1e-8 * n as f64);
        }
        for j in 0..n {
            for i in 0..n {
                prop_assert!(out[(i, j)] >= -1e-12);
            }
        }
    }
}
