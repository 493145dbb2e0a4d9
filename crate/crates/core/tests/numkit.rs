use proptest::prelude::*;
use rtil_core::numkit::*;

fn rand_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    gaussian_matrix(rows, cols, &mut RandomStream::new(seed, 0))
}

/// `rows x cols` matrix of rank at most `r`.
fn low_rank(rows: usize, cols: usize, r: usize, seed: u64) -> Matrix {
    rand_matrix(rows, r, seed).matmul(&rand_matrix(r, cols, seed + 1000))
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm().max(1e-300)
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
fn gauss_jordan_inverse(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = m.row(i).to_vec();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                let pivot = a[c].clone();
                for (v, pv) in a[r].iter_mut().zip(&pivot) {
                    *v -= f * pv;
                }
            }
        }
    }
    Matrix::from_rows(&a.into_iter().map(|r| r[n..].to_vec()).collect::<Vec<_>>())
}

#[test]
fn svd_examples() {
    let s = svd(&Matrix::identity(3)).unwrap();
    assert_eq!(s.s, vec![1.0, 1.0, 1.0]);

    let d = Matrix::diag(2, 3, &[3.0, 2.0]);
    let s = svd(&d).unwrap();
    assert!((s.s[0] - 3.0).abs() < 1e-14 && (s.s[1] - 2.0).abs() < 1e-14);

    let m = rand_matrix(5, 3, 11);
    assert!(rel(&svd(&m).unwrap().reconstruct(), &m) < 1e-10);
}

#[test]
fn pinv_examples() {
    assert!(
        rel(
            &pinv(&Matrix::identity(4), None).unwrap(),
            &Matrix::identity(4)
        ) < 1e-14
    );
    let p = pinv(&Matrix::diag(3, 2, &[1.0, 2.0]), None).unwrap();
    assert!(p.sub(&Matrix::diag(2, 3, &[1.0, 0.5])).max_abs() < 1e-14);
    assert_eq!(
        pinv(&Matrix::zeros(2, 5), None).unwrap(),
        Matrix::zeros(5, 2)
    );
}

#[test]
fn pinv_matches_normal_equations_oracle() {
    for seed in 0..10 {
        let m = rand_matrix(6, 3, seed);
        let mt = m.transpose();
        let oracle = gauss_jordan_inverse(&mt.matmul(&m)).matmul(&mt);
        assert!(rel(&pinv(&m, None).unwrap(), &oracle) < 1e-8);
    }
}

#[test]
fn min_norm_lstsq_examples() {
    let y = vec![1.0, -2.0, 3.0];
    let x = min_norm_lstsq(&Matrix::identity(3), &y).unwrap();
    assert!(sub(&x, &y).iter().all(|v| v.abs() < 1e-14));

    let x = min_norm_lstsq(&Matrix::from_rows(&[vec![1.0, 1.0]]), &[2.0]).unwrap();
    assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);

    // Wide full-rank closed form A^T (A A^T)^-1 y.
    let a = rand_matrix(3, 6, 5);
    let y = RandomStream::new(5, 1).normal_vec(3);
    let oracle = a
        .transpose()
        .matmul(&gauss_jordan_inverse(&a.matmul(&a.transpose())))
        .matvec(&y);
    let x = min_norm_lstsq(&a, &y).unwrap();
    assert!(norm(&sub(&x, &oracle)) < 1e-8 * norm(&oracle));
}

#[test]
fn min_norm_beats_other_minimizers() {
    let a = low_rank(5, 7, 3, 21);
    let y = RandomStream::new(21, 9).normal_vec(5);
    let x = min_norm_lstsq(&a, &y).unwrap();
    let q = range_complement_basis(&a.transpose()).unwrap();
    let mut s = RandomStream::new(21, 10);
    for _ in 0..20 {
        let n = q.matvec(&s.normal_vec(q.cols()));
        let other = add(&x, &n);
        let r0 = norm(&sub(&a.matvec(&x), &y));
        let r1 = norm(&sub(&a.matvec(&other), &y));
        assert!((r0 - r1).abs() < 1e-8);
        assert!(norm(&other) >= norm(&x) - 1e-12);
    }
}

#[test]
fn projector_and_complement_examples() {
    assert!(
        rel(
            &range_projector(&rand_matrix(4, 4, 3)).unwrap(),
            &Matrix::identity(4)
        ) < 1e-10
    );
    let e1 = Matrix::from_columns(3, &[vec![1.0, 0.0, 0.0]]);
    let p = range_projector(&e1).unwrap();
    assert!(p.sub(&Matrix::diag(3, 3, &[1.0, 0.0, 0.0])).max_abs() < 1e-14);

    let q = range_complement_basis(&Matrix::from_columns(2, &[vec![1.0, 0.0]])).unwrap();
    assert_eq!(q.shape(), (2, 1));
    assert!((q[(0, 0)]).abs() < 1e-14 && (q[(1, 0)].abs() - 1.0).abs() < 1e-14);

    assert_eq!(
        range_complement_basis(&rand_matrix(4, 4, 8))
            .unwrap()
            .cols(),
        0
    );

    let m = rand_matrix(8, 3, 4);
    let q = range_complement_basis(&m).unwrap();
    assert_eq!(q.cols(), 5);
    assert!(m.transpose().matmul(&q).max_abs() < 1e-8);
    assert!(q.transpose().matmul(&q).sub(&Matrix::identity(5)).max_abs() < 1e-8);
}

#[test]
fn gaussian_matrix_moments_and_rank() {
    let a = rand_matrix(100, 100, 17);
    let a2 = rand_matrix(100, 100, 17);
    assert_eq!(a, a2);
    let n = a.as_slice().len() as f64;
    let mean = a.as_slice().iter().sum::<f64>() / n;
    let var = a.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 4.0 / n.sqrt());
    assert!((var - 1.0).abs() < 0.1);

    let tall = rand_matrix(200, 100, 18);
    let d = svd(&tall).unwrap();
    assert!(*d.s.last().unwrap() > 0.0);
    assert_eq!(rank(&tall).unwrap(), 100);
}

#[test]
fn dirichlet_examples() {
    let mut s = RandomStream::new(2, 0);
    assert_eq!(dirichlet_flat(1, &mut s), vec![1.0]);
    let mut means = [0.0; 3];
    let trials = 100_000;
    for _ in 0..trials {
        let w = dirichlet_flat(3, &mut s);
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (m, v) in means.iter_mut().zip(&w) {
            *m += v / trials as f64;
        }
    }
    for m in means {
        assert!((m - 1.0 / 3.0).abs() < 0.01);
    }
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let a = RandomStream::new(9, 1).normal_vec(64);
    assert_eq!(a, RandomStream::new(9, 1).normal_vec(64));
    assert_ne!(a, RandomStream::new(9, 2).normal_vec(64));
    assert_ne!(a, RandomStream::new(10, 1).normal_vec(64));
}

#[test]
fn non_finite_svd_input_rejected() {
    let mut m = Matrix::identity(2);
    m.as_mut_slice()[1] = f64::INFINITY;
    assert!(svd(&m).is_err());
    assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
}

fn shape_and_rank() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..8, 1usize..8, any::<u64>())
        .prop_flat_map(|(r, c, seed)| (Just(r), Just(c), 0..=r.min(c), Just(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn penrose_identities((r, c, k, seed) in shape_and_rank()) {
        let m = if k == 0 { Matrix::zeros(r, c) } else { low_rank(r, c, k, seed) };
        let p = pinv(&m, None).unwrap();
        let scale = m.frobenius_norm().max(1.0);
        prop_assert!(m.matmul(&p).matmul(&m).sub(&m).max_abs() < 1e-8 * scale);
        let pscale = p.frobenius_norm().max(1.0);
        prop_assert!(p.matmul(&m).matmul(&p).sub(&p).max_abs() < 1e-8 * pscale);
        let mp = m.matmul(&p);
        prop_assert!(mp.sub(&mp.transpose()).max_abs() < 1e-8);
        let pm = p.matmul(&m);
        prop_assert!(pm.sub(&pm.transpose()).max_abs() < 1e-8);
    }

    #[test]
    fn svd_reconstructs_with_ordered_values((r, c, k, seed) in shape_and_rank()) {
        let m = if k == 0 { Matrix::zeros(r, c) } else { low_rank(r, c, k, seed) };
        let d = svd(&m).unwrap();
        prop_assert!(d.reconstruct().sub(&m).frobenius_norm() <= 1e-10 * m.frobenius_norm().max(1e-300) + 1e-300);
        prop_assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(d.s.iter().all(|&s| s >= 0.0));
        prop_assert_eq!(d.rank(d.default_tol()), k);
    }

    #[test]
    fn projector_properties((r, c, k, seed) in shape_and_rank()) {
        let m = if k == 0 { Matrix::zeros(r, c) } else { low_rank(r, c, k, seed) };
        let p = range_projector(&m).unwrap();
        prop_assert!(p.sub(&p.transpose()).max_abs() < 1e-8);
        prop_assert!(p.matmul(&p).sub(&p).max_abs() < 1e-8);
        prop_assert!(p.matmul(&m).sub(&m).max_abs() < 1e-8 * m.frobenius_norm().max(1.0));
        prop_assert_eq!(rank(&p).unwrap(), k);
        let q = range_complement_basis(&m).unwrap();
        let sum = p.add(&q.matmul(&q.transpose()));
        prop_assert!(sum.sub(&Matrix::identity(r)).max_abs() < 1e-8);
    }

    #[test]
    fn dirichlet_on_simplex(n in 1usize..40, seed in any::<u64>()) {
        let w = dirichlet_flat(n, &mut RandomStream::new(seed, 0));
        prop_assert_eq!(w.len(), n);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
