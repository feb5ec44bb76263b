use multiess::linalg::Lu;
use multiess::{
    batch_size, log_det, mbm, sample_covariance, simulate_var1, BatchPolicy, ChainMatrix, IidGaussianSampler,
    Matrix, Var1Model, ChainSampler,
};
use proptest::prelude::*;

fn iid_chain(n: usize, p: usize, seed: u64) -> ChainMatrix {
    let mut s = IidGaussianSampler::new(p, seed);
    let mut data = Vec::new();
    s.extend(n, &mut data).unwrap();
    ChainMatrix::new(n, p, data).unwrap()
}

/// Textbook two-pass covariance with denominator `n - 1`.
fn two_pass_cov(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let p = rows[0].len();
    let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; p]; p];
    for r in rows {
        for i in 0..p {
            for j in 0..p {
                c[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    c.iter().map(|row| row.iter().map(|v| v / (n - 1) as f64).collect()).collect()
}

/// Batch means computed by hand from the definition.
fn mbm_oracle(rows: &[Vec<f64>], b: usize) -> Vec<Vec<f64>> {
    let a = rows.len() / b;
    let p = rows[0].len();
    let means: Vec<Vec<f64>> = (0..a)
        .map(|k| (0..p).map(|j| rows[k * b..(k + 1) * b].iter().map(|r| r[j]).sum::<f64>() / b as f64).collect())
        .collect();
    let grand: Vec<f64> = (0..p).map(|j| means.iter().map(|m| m[j]).sum::<f64>() / a as f64).collect();
    let mut c = vec![vec![0.0; p]; p];
    for m in &means {
        for i in 0..p {
            for j in 0..p {
                c[i][j] += (m[i] - grand[i]) * (m[j] - grand[j]);
            }
        }
    }
    c.iter()
        .map(|row| row.iter().map(|v| v * b as f64 / (a - 1) as f64).collect())
        .collect()
}

fn close(a: &Matrix, b: &[Vec<f64>], tol: f64) -> bool {
    (0..a.rows()).all(|i| (0..a.cols()).all(|j| (a[(i, j)] - b[i][j]).abs() <= tol * (1.0 + b[i][j].abs())))
}

#[test]
fn matches_two_pass_and_definition() {
    let chain = simulate_var1(&Var1Model::benchmark(), 5_003, 17).unwrap();
    let rows: Vec<Vec<f64>> = chain.rows().map(|r| r.to_vec()).collect();
    let lambda = sample_covariance(&chain).unwrap();
    assert!(close(&lambda.matrix, &two_pass_cov(&rows), 1e-10));
    for b in [1, 7, 70, 1000] {
        let est = mbm(&chain, b).unwrap();
        assert!(close(&est.matrix, &mbm_oracle(&rows, b), 1e-10), "b = {b}");
        assert_eq!(est.batch_count, 5_003 / b);
        assert_eq!(est.n_used, est.batch_count * b);
    }
}

#[test]
fn unit_batches_equal_sample_covariance() {
    let chain = iid_chain(997, 4, 5);
    let a = mbm(&chain, 1).unwrap().matrix;
    let b = sample_covariance(&chain).unwrap().matrix;
    assert!(a.sub(&b).max_abs() <= 1e-12 * b.max_abs());
}

#[test]
fn log_det_matches_lu_determinants() {
    let chain = simulate_var1(&Var1Model::benchmark(), 20_000, 3).unwrap();
    let est = mbm(&chain, 141).unwrap();
    let m = &est.matrix;
    let na = nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice());
    let det_na = na.clone().lu().determinant();
    let ld = est.log_det.unwrap();
    assert!((ld - det_na.ln()).abs() < 1e-10, "{ld} vs {}", det_na.ln());
    let det_lu = Lu::new(m).unwrap().det();
    assert!((ld - det_lu.ln()).abs() < 1e-10);
    assert_eq!(log_det(m).unwrap(), Some(ld));
}

#[test]
fn log_det_flags_singular_and_rejects_asymmetric() {
    let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
    assert_eq!(log_det(&singular).unwrap(), None);
    let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
    assert!(log_det(&asym).is_err());
}

#[test]
fn positive_definite_only_with_more_batches_than_dims() {
    let chain = iid_chain(60, 5, 1);
    // 60 / 12 = 5 batches, p = 5
    let est = mbm(&chain, 12).unwrap();
    assert_eq!(est.batch_count, 5);
    assert!(est.log_det.is_none());
    let est = mbm(&chain, 10).unwrap();
    assert_eq!(est.batch_count, 6);
    assert!(est.log_det.is_some());
}

#[test]
fn iid_identity_is_recovered() {
    let chain = iid_chain(200_000, 3, 8);
    let est = mbm(&chain, batch_size(200_000, BatchPolicy::default())).unwrap();
    let err = est.matrix.sub(&Matrix::identity(3)).max_abs();
    // 447 batches: entries have standard error about 0.07
    assert!(err < 0.25, "{err}");
    let lambda = sample_covariance(&chain).unwrap();
    assert!(lambda.matrix.sub(&Matrix::identity(3)).max_abs() < 0.02);
}

#[test]
fn batch_size_policy_values() {
    assert_eq!(batch_size(100_000, BatchPolicy::Exponent(0.5)), 316);
    assert_eq!(batch_size(10_000, BatchPolicy::Exponent(1.0 / 3.0)), 21);
    assert_eq!(batch_size(1_000_000, BatchPolicy::Exponent(1.0 / 3.0)), 100);
    assert_eq!(batch_size(10, BatchPolicy::Fixed(100)), 5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn affine_equivariance(seed in 0u64..10_000, entries in prop::collection::vec(-2.0f64..2.0, 9), shift in prop::collection::vec(-5.0f64..5.0, 3)) {
        let chain = iid_chain(900, 3, seed);
        let a = Matrix::from_vec(3, 3, entries);
        let moved = {
            let t = chain.transform(&a).unwrap();
            let data: Vec<f64> = t.rows().flat_map(|r| r.iter().zip(&shift).map(|(x, c)| x + c).collect::<Vec<_>>()).collect();
            ChainMatrix::new(900, 3, data).unwrap()
        };
        let base = mbm(&chain, 30).unwrap().matrix;
        let want = a.matmul(&base).matmul(&a.transpose());
        let got = mbm(&moved, 30).unwrap().matrix;
        prop_assert!(got.sub(&want).max_abs() <= 1e-9 * (1.0 + want.max_abs()));
    }

    #[test]
    fn scaling_scales_quadratically(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let chain = iid_chain(500, 2, seed);
        let scaled = chain.transform(&Matrix::identity(2).scale(c)).unwrap();
        let base = mbm(&chain, 10).unwrap();
        let got = mbm(&scaled, 10).unwrap();
        prop_assert!(got.matrix.sub(&base.matrix.scale(c * c)).max_abs() <= 1e-10 * c * c * (1.0 + base.matrix.max_abs()));
        let shift = got.log_det.unwrap() - base.log_det.unwrap();
        prop_assert!((shift - 2.0 * 2.0 * c.ln()).abs() < 1e-9);
    }
}
