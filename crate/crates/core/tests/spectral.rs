mod common;

use faer::Mat;
use kernclust::linalg;
use kernclust::metrics;
use kernclust::model::{clustering_matrix, MembershipMatrix};
use kernclust::spectral::{self, EigenBasis};
use proptest::prelude::*;
use rand::Rng;

fn x0(labels: Vec<usize>, r: usize) -> (MembershipMatrix, Mat<f64>) {
    let z = MembershipMatrix::from_labels(labels, r).unwrap();
    let x = clustering_matrix(&z).x;
    (z, x)
}

#[test]
fn x0_spectrum_and_block_rows() {
    let (n, r) = (24, 4);
    let (_, x) = x0((0..n).map(|i| (i * 7) % r).collect(), r);
    let basis = spectral::top_eigenvectors(x.as_ref(), r).unwrap();
    for &v in &basis.eigenvalues {
        assert!((v - (n / r) as f64).abs() < 1e-10);
    }
    assert!(spectral::eigengap(x.as_ref(), r).unwrap() - (n / r) as f64 > -1e-10);
    let labels: Vec<usize> = (0..n).map(|i| (i * 7) % r).collect();
    let want = (2.0 * r as f64 / n as f64).sqrt();
    for i in 0..n {
        for j in 0..n {
            let d: f64 = (0..r).map(|c| (basis.u[(i, c)] - basis.u[(j, c)]).powi(2)).sum::<f64>().sqrt();
            if labels[i] == labels[j] {
                assert!(d < 1e-8);
            } else {
                assert!((d - want).abs() < 1e-8, "{d} vs {want}");
            }
        }
    }
}

#[test]
fn block_coefficients_are_scaled_orthogonal() {
    let (n, r) = (30, 3);
    let (z, x) = x0((0..n).map(|i| i % r).collect(), r);
    let basis = spectral::top_eigenvectors(x.as_ref(), r).unwrap();
    let nu = metrics::block_coefficients(basis.u.as_ref(), &z, 1e-8).unwrap();
    let g = linalg::matmul(nu.transpose(), nu.as_ref());
    for a in 0..r {
        for b in 0..r {
            let want = if a == b { r as f64 / n as f64 } else { 0.0 };
            assert!((g[(a, b)] - want).abs() < 1e-10);
        }
    }
}

fn orthonormal<R: Rng>(rng: &mut R, n: usize, r: usize) -> Mat<f64> {
    let a = Mat::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
    let (u, _, _) = linalg::thin_svd(a.as_ref()).unwrap();
    u
}

#[test]
fn procrustes_identity_and_exact_rotation() {
    let mut rng = common::rng(5);
    let u = orthonormal(&mut rng, 10, 3);
    let rot = spectral::procrustes(u.as_ref(), u.as_ref()).unwrap();
    assert!(common::max_abs_diff(&rot.o, &Mat::identity(3, 3)) < 1e-12);

    let q = orthonormal(&mut rng, 3, 3);
    let uq = linalg::matmul(u.as_ref(), q.as_ref());
    let rot = spectral::procrustes(uq.as_ref(), u.as_ref()).unwrap();
    assert!(common::max_abs_diff(&rot.o, &q) < 1e-10);
    assert!(spectral::aligned_distance(uq.as_ref(), u.as_ref(), &rot) < 1e-10);
}

#[test]
fn procrustes_beats_rotation_grid() {
    let mut rng = common::rng(6);
    for _ in 0..20 {
        let u = orthonormal(&mut rng, 8, 2);
        let uh = Mat::from_fn(8, 2, |i, j| u[(i, j)] + rng.random_range(-0.5..0.5));
        let rot = spectral::procrustes(uh.as_ref(), u.as_ref()).unwrap();
        let best = spectral::aligned_distance(uh.as_ref(), u.as_ref(), &rot);
        for step in 0..360 {
            let t = (step as f64).to_radians();
            for flip in [1.0, -1.0] {
                let o = Mat::from_fn(2, 2, |i, j| match (i, j) {
                    (0, 0) => t.cos(),
                    (0, 1) => -flip * t.sin(),
                    (1, 0) => t.sin(),
                    _ => flip * t.cos(),
                });
                let uo = linalg::matmul(u.as_ref(), o.as_ref());
                assert!(best <= common::fro(&(&uh - &uo)) + 1e-12);
            }
        }
    }
}

#[test]
fn davis_kahan_holds_on_random_perturbations() {
    let mut rng = common::rng(7);
    let mut checked = 0;
    for trial in 0..100 {
        let n = 6 + trial % 10;
        let r = 1 + trial % 3;
        let m = common::random_symmetric(&mut rng, n);
        let scale = rng.random_range(0.01..0.5);
        let e = common::random_symmetric(&mut rng, n);
        let mh = Mat::from_fn(n, n, |i, j| m[(i, j)] + scale * e[(i, j)]);
        let vals = common::jacobi_eigenvalues(&m);
        let gap = vals[n - r] - vals[n - r - 1];
        if gap <= 0.0 {
            continue;
        }
        let u = spectral::top_eigenvectors(m.as_ref(), r).unwrap();
        let uh = spectral::top_eigenvectors(mh.as_ref(), r).unwrap();
        let rot = spectral::procrustes_align(&uh, &u).unwrap();
        let dist = spectral::aligned_distance(uh.u.as_ref(), u.u.as_ref(), &rot);
        let bound = spectral::davis_kahan_bound(common::fro(&(&mh - &m)), vals[n - r], vals[n - r - 1]).unwrap();
        assert!(dist <= bound + 1e-12, "trial {trial}: {dist} > {bound}");
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn davis_kahan_arithmetic() {
    assert_eq!(spectral::davis_kahan_bound(0.0, 3.0, 1.0).unwrap(), 0.0);
    assert!((spectral::davis_kahan_bound(1.0, 8f64.sqrt(), 0.0).unwrap() - 1.0).abs() < 1e-15);
    assert!(spectral::davis_kahan_bound(1.0, 1.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn top_eigenvectors_are_orthonormal_eigenpairs(seed in any::<u64>(), n in 3usize..12) {
        let mut rng = common::rng(seed);
        let m = common::random_symmetric(&mut rng, n);
        let r = 1 + (seed as usize) % (n - 1);
        let b: EigenBasis = spectral::top_eigenvectors(m.as_ref(), r).unwrap();
        let g = linalg::matmul(b.u.transpose(), b.u.as_ref());
        prop_assert!(common::max_abs_diff(&g, &Mat::identity(r, r)) < 1e-10);
        let mu = linalg::matmul(m.as_ref(), b.u.as_ref());
        for c in 0..r {
            for i in 0..n {
                prop_assert!((mu[(i, c)] - b.eigenvalues[c] * b.u[(i, c)]).abs() < 1e-10);
            }
        }
        let all = common::jacobi_eigenvalues(&m);
        for c in 0..r {
            prop_assert!((b.eigenvalues[c] - all[n - 1 - c]).abs() < 1e-9);
        }
    }
}
