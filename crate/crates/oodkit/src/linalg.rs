//! Minimal dense linear algebra shared by the numerical modules.
//!
//! Everything here is deterministic: fixed accumulation order, no
//! parallelism, so identical inputs give bit-identical outputs.

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit reals. Rows are samples, columns are
/// features; this is the currency every module trades in.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite entry at flat index {pos}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("no rows given".into()));
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "row length",
                    expected: cols,
                    got: rows[i].len(),
                });
            }
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Iterator over row slices, in row order.
    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    /// New matrix keeping only the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter("empty column selection".into()));
        }
        for &c in indices {
            if c >= self.cols {
                return Err(Error::InvalidParameter(format!(
                    "column index {c} out of range for {} columns",
                    self.cols
                )));
            }
        }
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for r in 0..self.rows {
            let row = self.row(r);
            for &c in indices {
                data.push(row[c]);
            }
        }
        Self::new(self.rows, indices.len(), data)
    }
}

/// Dense real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector {
    data: Vec<f64>,
}

impl RealVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("empty vector".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite entry at index {pos}"
            )));
        }
        Ok(Self { data })
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Squared Euclidean distance between two equal-length slices.
///
/// Plain difference-and-square accumulation in index order; always >= 0.
pub fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// All squared Euclidean distances between rows of `a` and rows of `b`.
///
/// Uses the expansion |a|^2 + |b|^2 - 2ab for bulk speed; tiny negatives
/// from cancellation are clamped to zero so downstream kernels stay valid.
pub fn pairwise_sq_distances(a: &FeatureMatrix, b: &FeatureMatrix) -> Result<FeatureMatrix> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "pairwise_sq_distances column count",
            expected: a.cols(),
            got: b.cols(),
        });
    }
    let sq_norms = |m: &FeatureMatrix| -> Vec<f64> {
        m.row_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .collect()
    };
    let na = sq_norms(a);
    let nb = sq_norms(b);
    let mut out = FeatureMatrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ra = a.row(i);
        for j in 0..b.rows() {
            let dot: f64 = ra.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
            let d = na[i] + nb[j] - 2.0 * dot;
            out.set(i, j, if d > 0.0 { d } else { 0.0 });
        }
    }
    Ok(out)
}

/// Column-wise arithmetic mean.
pub fn mean_vector(m: &FeatureMatrix) -> RealVector {
    let mut acc = vec![0.0; m.cols()];
    for row in m.row_iter() {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    }
    let n = m.rows() as f64;
    for a in &mut acc {
        *a /= n;
    }
    RealVector { data: acc }
}

/// Population covariance (normalized by the row count, no Bessel correction).
pub fn covariance(m: &FeatureMatrix) -> Result<FeatureMatrix> {
    if m.rows() < 2 {
        return Err(Error::InvalidParameter(format!(
            "covariance needs at least 2 rows, got {}",
            m.rows()
        )));
    }
    let mu = mean_vector(m);
    let d = m.cols();
    let mut cov = FeatureMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in m.row_iter() {
        for ((c, v), mu_j) in centered.iter_mut().zip(row).zip(mu.as_slice()) {
            *c = v - mu_j;
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                let v = cov.get(i, j) + ci * centered[j];
                cov.set(i, j, v);
            }
        }
    }
    let n = m.rows() as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov.get(i, j) / n;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok(cov)
}

const JITTER_LADDER: [f64; 7] = [1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3];
const JITTER_CAP: f64 = 1e-3;

/// Inverse of `m + jitter*I` via Cholesky factorization.
///
/// If the factorization fails the jitter is escalated through a x10 ladder
/// up to 1e-3 before giving up. Pass jitter 0 to get the plain inverse of a
/// well-conditioned matrix.
pub fn regularized_inverse(m: &FeatureMatrix, jitter: f64) -> Result<FeatureMatrix> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch {
            context: "regularized_inverse expects a square matrix",
            expected: m.rows(),
            got: m.cols(),
        });
    }
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "jitter must be finite and >= 0, got {jitter}"
        )));
    }
    let d = m.rows();
    for i in 0..d {
        for j in (i + 1)..d {
            if (m.get(i, j) - m.get(j, i)).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "matrix not symmetric at ({i},{j}): {} vs {}",
                    m.get(i, j),
                    m.get(j, i)
                )));
            }
        }
    }

    let attempts: Vec<f64> = std::iter::once(jitter)
        .chain(JITTER_LADDER.iter().copied().filter(|&j| j > jitter))
        .collect();
    for &j in &attempts {
        if let Some(chol) = cholesky(m, j) {
            return Ok(invert_from_cholesky(&chol));
        }
    }
    Err(Error::SingularMatrix {
        smallest: attempts[0],
        cap: JITTER_CAP,
    })
}

/// Lower-triangular Cholesky factor of `m + jitter*I`, or None if a pivot
/// degenerates.
fn cholesky(m: &FeatureMatrix, jitter: f64) -> Option<FeatureMatrix> {
    let d = m.rows();
    let max_diag = (0..d).fold(0.0f64, |acc, i| acc.max(m.get(i, i).abs()));
    let pivot_floor = 1e-12 * max_diag.max(1.0);
    let mut l = FeatureMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut sum = m.get(i, j) + if i == j { jitter } else { 0.0 };
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= pivot_floor {
                    return None;
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Inverse from a Cholesky factor: solves L L^T X = I column by column.
fn invert_from_cholesky(l: &FeatureMatrix) -> FeatureMatrix {
    let d = l.rows();
    let mut inv = FeatureMatrix::zeros(d, d);
    let mut y = vec![0.0; d];
    for col in 0..d {
        // forward substitution: L y = e_col
        for i in 0..d {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l.get(i, k) * y[k];
            }
            y[i] = sum / l.get(i, i);
        }
        // back substitution: L^T x = y
        for i in (0..d).rev() {
            let mut sum = y[i];
            for k in (i + 1)..d {
                sum -= l.get(k, i) * inv.get(k, col);
            }
            inv.set(i, col, sum / l.get(i, i));
        }
    }
    // symmetrize to kill round-off skew
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (inv.get(i, j) + inv.get(j, i));
            inv.set(i, j, v);
            inv.set(j, i, v);
        }
    }
    inv
}

/// Quadratic form (x - mu)^T A (x - mu) for a symmetric A.
pub fn quadratic_form(x: &[f64], mu: &[f64], a: &FeatureMatrix) -> f64 {
    let d = mu.len();
    let mut diff = vec![0.0; d];
    for i in 0..d {
        diff[i] = x[i] - mu[i];
    }
    let mut acc = 0.0;
    for i in 0..d {
        let mut row_acc = 0.0;
        for j in 0..d {
            row_acc += a.get(i, j) * diff[j];
        }
        acc += diff[i] * row_acc;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FeatureMatrix {
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-2.0..2.0)).collect();
        FeatureMatrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn pairwise_345_triangle() {
        let a = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        let d = pairwise_sq_distances(&a, &a).unwrap();
        assert_eq!(d.row(0), &[0.0, 25.0]);
        assert_eq!(d.row(1), &[25.0, 0.0]);
    }

    #[test]
    fn pairwise_identical_single() {
        let a = FeatureMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let d = pairwise_sq_distances(&a, &a).unwrap();
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn pairwise_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 5, 3);
        let b = random_matrix(&mut rng, 4, 3);
        let d = pairwise_sq_distances(&a, &b).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                let naive = sq_distance(a.row(i), b.row(j));
                assert!((d.get(i, j) - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pairwise_rejects_dim_mismatch() {
        let a = FeatureMatrix::zeros(2, 3);
        let b = FeatureMatrix::zeros(2, 4);
        let err = pairwise_sq_distances(&a, &b).unwrap_err();
        assert!(err.to_string().contains('3') && err.to_string().contains('4'));
    }

    #[test]
    fn mean_of_midpoint() {
        let m = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(mean_vector(&m).as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn mean_of_single_row_is_that_row() {
        let m = FeatureMatrix::from_rows(&[vec![3.5, -1.25, 0.0]]).unwrap();
        assert_eq!(mean_vector(&m).as_slice(), &[3.5, -1.25, 0.0]);
    }

    #[test]
    fn mean_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_matrix(&mut rng, 100, 4);
        let mu = mean_vector(&m);
        for c in 0..4 {
            let mut acc = 0.0;
            for r in 0..100 {
                acc += m.get(r, c);
            }
            assert!((mu.as_slice()[c] - acc / 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn covariance_of_diagonal_pair() {
        let m = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let c = covariance(&m).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn covariance_of_axis_aligned_square() {
        let m = FeatureMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0, 2.0],
        ])
        .unwrap();
        let c = covariance(&m).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn covariance_matches_outer_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = random_matrix(&mut rng, 50, 3);
        let c = covariance(&m).unwrap();
        let mu = mean_vector(&m);
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for r in 0..50 {
                    acc += (m.get(r, i) - mu.as_slice()[i]) * (m.get(r, j) - mu.as_slice()[j]);
                }
                acc /= 50.0;
                assert!((c.get(i, j) - acc).abs() < 1e-12, "entry ({i},{j})");
                assert_eq!(c.get(i, j), c.get(j, i));
            }
        }
    }

    #[test]
    fn covariance_rejects_single_row() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(covariance(&m).is_err());
    }

    #[test]
    fn inverse_of_identity() {
        let id = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let inv = regularized_inverse(&id, 0.0).unwrap();
        assert_eq!(inv.as_slice(), id.as_slice());
    }

    #[test]
    fn inverse_of_diagonal() {
        let m = FeatureMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let inv = regularized_inverse(&m, 0.0).unwrap();
        assert!((inv.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((inv.get(1, 1) - 0.25).abs() < 1e-15);
        assert_eq!(inv.get(0, 1), 0.0);
    }

    #[test]
    fn inverse_of_singular_with_jitter_multiplies_back() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let jitter = 1e-6;
        let inv = regularized_inverse(&m, jitter).unwrap();
        assert!(inv.as_slice().iter().all(|v| v.is_finite()));
        // (m + jitter I) * inv should be close to identity
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    let mk = m.get(i, k) + if i == k { jitter } else { 0.0 };
                    acc += mk * inv.get(k, j);
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((acc - expect).abs() < 1e-6, "({i},{j}) = {acc}");
            }
        }
    }

    #[test]
    fn inverse_escalates_jitter_on_rank_deficiency() {
        // exactly singular: escalation from 0 has to kick in
        let m = FeatureMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let inv = regularized_inverse(&m, 0.0).unwrap();
        assert!(inv.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn inverse_fails_on_indefinite_matrix() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let err = regularized_inverse(&m, 0.0).unwrap_err();
        match err {
            Error::SingularMatrix { smallest, cap } => {
                assert_eq!(smallest, 0.0);
                assert_eq!(cap, 1e-3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn inverse_rejects_asymmetric() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(regularized_inverse(&m, 0.0).is_err());
    }

    #[test]
    fn operations_are_bit_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_matrix(&mut rng, 20, 5);
        let a = covariance(&m).unwrap();
        let b = covariance(&m).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let ia = regularized_inverse(&a, 1e-9).unwrap();
        let ib = regularized_inverse(&b, 1e-9).unwrap();
        assert_eq!(ia.as_slice(), ib.as_slice());
    }

    #[test]
    fn select_columns_orders_and_validates() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = m.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.row(0), &[3.0, 1.0]);
        assert_eq!(s.row(1), &[6.0, 4.0]);
        assert!(m.select_columns(&[]).is_err());
        assert!(m.select_columns(&[3]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = FeatureMatrix> {
            (2..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
                proptest::collection::vec(-100.0f64..100.0, r * c)
                    .prop_map(move |data| FeatureMatrix::new(r, c, data).unwrap())
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn self_distances_symmetric_zero_diag(m in arb_matrix(12, 6)) {
                let d = pairwise_sq_distances(&m, &m).unwrap();
                for i in 0..m.rows() {
                    prop_assert_eq!(d.get(i, i), 0.0);
                    for j in 0..m.rows() {
                        prop_assert_eq!(d.get(i, j), d.get(j, i));
                        prop_assert!(d.get(i, j) >= 0.0);
                    }
                }
            }

            #[test]
            fn covariance_symmetric_nonneg_diag(m in arb_matrix(12, 6)) {
                let c = covariance(&m).unwrap();
                for i in 0..m.cols() {
                    prop_assert!(c.get(i, i) >= 0.0);
                    for j in 0..m.cols() {
                        prop_assert_eq!(c.get(i, j), c.get(j, i));
                    }
                }
            }

            #[test]
            fn inverse_multiplies_back_to_identity(seed in 0u64..500) {
                // well-conditioned SPD: A = B B^T + I
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = 4;
                let b = random_matrix(&mut rng, d, d);
                let mut a = FeatureMatrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        let mut acc = if i == j { 1.0 } else { 0.0 };
                        for k in 0..d {
                            acc += b.get(i, k) * b.get(j, k);
                        }
                        a.set(i, j, acc);
                    }
                }
                let inv = regularized_inverse(&a, 0.0).unwrap();
                for i in 0..d {
                    for j in 0..d {
                        let mut acc = 0.0;
                        for k in 0..d {
                            acc += a.get(i, k) * inv.get(k, j);
                        }
                        let expect = if i == j { 1.0 } else { 0.0 };
                        prop_assert!((acc - expect).abs() < 1e-8);
                    }
                }
            }
        }
    }
}
