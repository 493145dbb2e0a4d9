use rtil_core::inversion::layered_ls_vanilla;
use rtil_core::numkit::*;
use rtil_core::supervised::LinearTheoryInstance;
use rtil_core::theory::*;

/// `n1 x n0` selector of the first `n0` coordinates.
fn first_columns(n1: usize, n0: usize) -> Matrix {
    Matrix::diag(n1, n0, &vec![1.0; n0])
}

/// `nd x n1` matrix with orthonormal columns.
fn orthonormal(nd: usize, n1: usize, seed: u64) -> Matrix {
    svd(&gaussian_matrix(nd, n1, &mut RandomStream::new(seed, 0)))
        .unwrap()
        .u
}

#[test]
fn m1_for_orthonormal_product_and_identity_a() {
    let w1 = orthonormal(7, 4, 1);
    let inst = LinearTheoryInstance::from_weights(w1.clone(), first_columns(4, 2)).unwrap();
    let m1 = m1_matrix(&inst, &Matrix::identity(7)).unwrap();
    assert_eq!(m1.shape(), (2, 4));
    let b = w1.matmul(&inst.w0_star);
    assert!(m1.sub(&b.transpose().matmul(&w1)).max_abs() < 1e-12);
}

#[test]
fn m1_formula_reproduces_vanilla_pipeline() {
    for seed in 0..10 {
        let inst = LinearTheoryInstance::new(4, 8, 32, seed).unwrap();
        let a = measurement_matrix(16, 32, seed);
        let m1 = m1_matrix(&inst, &a).unwrap();
        let mut s = RandomStream::new(seed, 3);
        let (z0, z1) = (s.normal_vec(4), s.normal_vec(8));
        let y = a.matvec(&inst.signal(&z0, &z1));
        let est = layered_ls_vanilla(&inst, &a, &y).unwrap().estimate;
        let h = add(
            &inst.w0_star.matvec(&z0),
            &inst.w0_star.matvec(&m1.matvec(&z1)),
        );
        let formula = inst.w1_star.matvec(&h);
        assert!(norm(&sub(&est, &formula)) < 1e-8 * (1.0 + norm(&formula)));
    }
}

#[test]
fn orthogonal_construction_has_unit_bound() {
    let inst =
        LinearTheoryInstance::from_weights(orthonormal(9, 5, 2), first_columns(5, 3)).unwrap();
    assert!((bound_err1(&inst).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn bound_matches_random_search() {
    for seed in 0..3 {
        let inst = LinearTheoryInstance::new(4, 8, 32, seed).unwrap();
        let bound = bound_err1(&inst).unwrap();
        let q = range_complement_basis(&inst.w0_star).unwrap();
        let p = range_projector(&inst.w1_star.matmul(&inst.w0_star)).unwrap();
        let mut s = RandomStream::new(seed, 9);
        let mut best: f64 = 0.0;
        for _ in 0..10_000 {
            let c = s.normal_vec(q.cols());
            let h = scale(&q.matvec(&c), 1.0 / norm(&c));
            let v = inst.w1_star.matvec(&h);
            let r = sub(&v, &p.matvec(&v));
            best = best.max(dot(&r, &r));
        }
        assert!(best <= bound * (1.0 + 1e-12));
        assert!(best >= 0.99 * bound, "search {best} vs bound {bound}");
    }
}

#[test]
fn bound_invariant_under_reparameterized_first_layer() {
    for seed in 0..5 {
        let inst = LinearTheoryInstance::new(3, 6, 12, seed).unwrap();
        let r = gaussian_matrix(3, 3, &mut RandomStream::new(seed, 11));
        let moved =
            LinearTheoryInstance::from_weights(inst.w1_star.clone(), inst.w0_star.matmul(&r))
                .unwrap();
        let (b0, b1) = (bound_err1(&inst).unwrap(), bound_err1(&moved).unwrap());
        assert!((b0 - b1).abs() < 1e-8 * b0.max(1.0));
    }
}

#[test]
fn vanilla_error_positive_and_above_bound() {
    for seed in 0..100 {
        let inst = LinearTheoryInstance::new(4, 8, 32, seed).unwrap();
        let a = measurement_matrix([8, 16, 24][seed as usize % 3], 32, seed);
        let v = vanilla_expected_error(&inst, &a).unwrap();
        let b = bound_err1(&inst).unwrap();
        assert!(b > BOUND_FLOOR);
        assert!(v >= b - BOUND_SLACK, "seed {seed}: {v} < {b}");
        assert!(rtil_expected_error(&inst, &a).unwrap() <= RTIL_ZERO_TOL);
    }
}

#[test]
fn vanilla_closed_form_matches_monte_carlo() {
    for seed in 0..3 {
        let inst = LinearTheoryInstance::new(4, 8, 32, seed).unwrap();
        let a = measurement_matrix(16, 32, seed);
        let mc = vanilla_error_mc(&inst, &a, 100_000, &mut RandomStream::new(seed, 5)).unwrap();
        let closed = vanilla_expected_error(&inst, &a).unwrap();
        assert!(
            mc.z_score(closed) < 3.0,
            "seed {seed}: z = {}",
            mc.z_score(closed)
        );
    }
}

#[test]
fn monte_carlo_is_unbiased_over_repetitions() {
    let inst = LinearTheoryInstance::new(3, 6, 12, 4).unwrap();
    let a = measurement_matrix(8, 12, 4);
    let closed = vanilla_expected_error(&inst, &a).unwrap();
    let inside = (0..200)
        .filter(|&rep| {
            let mc = vanilla_error_mc(&inst, &a, 2000, &mut RandomStream::new(rep, 77)).unwrap();
            mc.z_score(closed) < 3.0
        })
        .count();
    assert!(inside >= 198, "{inside}/200");
}

#[test]
fn rtil_pipeline_error_vanishes_on_every_draw() {
    let inst = LinearTheoryInstance::new(4, 8, 32, 6).unwrap();
    let a = measurement_matrix(8, 32, 6);
    let mc = rtil_error_mc(&inst, &a, 1000, &mut RandomStream::new(6, 1)).unwrap();
    assert!(mc.max <= RTIL_ZERO_TOL);
}

#[test]
fn optimal_m_on_many_instances() {
    for seed in 0..20 {
        let inst = LinearTheoryInstance::new(4, 8, 32, seed).unwrap();
        let r = optimal_m_report(&inst).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(optimal_m_check(&inst).unwrap());
    }
}

#[test]
fn psnr_matches_two_pass_recomputation() {
    let mut s = RandomStream::new(12, 0);
    for _ in 0..50 {
        let x = s.normal_vec(64);
        let y: Vec<f64> = x.iter().map(|v| v + 0.1 * s.normal()).collect();
        let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let mse = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
        let expect = 20.0 * 3.0f64.log10() - 10.0 * mse.log10();
        assert!((psnr(&x, &y, 3.0).unwrap() - expect).abs() < 1e-10);
    }
    assert!(psnr(&[1.0], &[1.0, 2.0], 1.0).is_err());
}

#[test]
fn report_in_regime_passes() {
    let inst = LinearTheoryInstance::new(4, 8, 32, 2).unwrap();
    let opts = ReportOptions {
        mc_samples: 20_000,
        rtil_mc_samples: 200,
        orthogonality_probes: 20,
    };
    let r = theory_report(&inst, 16, &opts).unwrap();
    assert!(r.passed(), "{:?}", r.failed().collect::<Vec<_>>());
    assert!(r.in_exact_regime());
    assert!(theory_report(&inst, 32, &opts).is_err());
}
