//! Dense row-major matrices, numerically stable softmax, and the weighted
//! ridge solver behind the LIME surrogate.
//!
//! Vectors are plain `[f64]` slices; only matrices get a dedicated type.

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. All rows must share one length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "matrix row",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self · v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                context: "matvec",
                expected: self.cols,
                got: v.len(),
            });
        }
        Ok(self.iter_rows().map(|r| dot(r, v)).collect())
    }

    /// `selfᵀ · v`.
    pub fn transpose_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch {
                context: "transpose_matvec",
                expected: self.rows,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &vi) in self.iter_rows().zip(v) {
            axpy(vi, r, &mut out);
        }
        Ok(out)
    }

    /// `self · otherᵀ`, i.e. row `t` of the result is `other · self[t]`.
    ///
    /// This is how a batch of embeddings (rows) is pushed through a
    /// projection stored as `out × in`.
    pub fn mul_transpose(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                context: "mul_transpose",
                expected: other.cols,
                got: self.cols,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for (i, a) in self.iter_rows().enumerate() {
            let dst = out.row_mut(i);
            for (j, b) in other.iter_rows().enumerate() {
                dst[j] = dot(a, b);
            }
        }
        Ok(out)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Free-function form of [`Matrix::matvec`].
pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    m.matvec(v)
}

/// Free-function form of [`Matrix::transpose_matvec`].
pub fn transpose_matvec(m: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    m.transpose_matvec(v)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Softmax with max-subtraction, so that large logits do not overflow.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyLogits);
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Minimizes `Σ_i π_i (y_i − β·z_i)² + λ‖β‖²` through the normal equations
/// `(Zᵀ Π Z + λ I) β = Zᵀ Π y`, solved with a Cholesky factorization.
///
/// `z_aug` carries the intercept as its first column. The intercept is
/// penalized like every other coefficient.
pub fn weighted_ridge(z_aug: &Matrix, y: &[f64], pi: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = z_aug.rows();
    let p = z_aug.cols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "ridge targets",
            expected: n,
            got: y.len(),
        });
    }
    if pi.len() != n {
        return Err(Error::DimensionMismatch {
            context: "ridge weights",
            expected: n,
            got: pi.len(),
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    if pi.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::invalid("ridge weights must be positive and finite"));
    }

    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for ((z, &yi), &wi) in z_aug.iter_rows().zip(y).zip(pi) {
        for a in 0..p {
            let wz = wi * z[a];
            if wz == 0.0 {
                continue;
            }
            rhs[a] += wz * yi;
            let row = gram.row_mut(a);
            for b in a..p {
                row[b] += wz * z[b];
            }
        }
    }
    for a in 0..p {
        gram[(a, a)] += lambda;
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    cholesky_solve(gram, &rhs)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn cholesky_solve(mut a: Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "cholesky_solve",
            expected: n,
            got: b.len(),
        });
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tiny = scale * 1e-13;

    // In-place lower factor L with A = L Lᵀ.
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= a[(j, k)] * a[(j, k)];
        }
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(diag > tiny) {
            return Err(Error::Singular);
        }
        let ljj = diag.sqrt();
        a[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = s / ljj;
        }
    }

    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= a[(i, k)] * x[k];
        }
        x[i] = s / a[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= a[(k, i)] * x[k];
        }
        x[i] = s / a[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_equal_logits_is_uniform() {
        let p = softmax(&[0.0; 4]).unwrap();
        for x in p {
            assert_abs_diff_eq!(x, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_ln2_gap() {
        for c in [-7.5, 0.0, 3.0, 1e5] {
            let p = softmax(&[c, c + std::f64::consts::LN_2]).unwrap();
            assert_abs_diff_eq!(p[0], 1.0 / 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p[1], 2.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn softmax_large_logits_do_not_overflow() {
        let big = softmax(&[1000.0, 1001.0]).unwrap();
        let small = softmax(&[0.0, 1.0]).unwrap();
        assert!(big.iter().all(|x| x.is_finite()));
        assert_abs_diff_eq!(big[0], small[0], epsilon = 1e-15);
        assert_abs_diff_eq!(big[1], small[1], epsilon = 1e-15);
    }

    #[test]
    fn softmax_rejects_empty() {
        let err = softmax(&[]).unwrap_err();
        assert_eq!(err.to_string(), "empty logits");
    }

    proptest! {
        // Logit gaps stay below ~36 so no weight rounds to exactly 0 or 1.
        #[test]
        fn softmax_strictly_inside_unit_interval(logits in prop::collection::vec(-18.0f64..18.0, 2..40)) {
            let p = softmax(&logits).unwrap();
            prop_assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }

        #[test]
        fn softmax_normalized_and_shift_invariant(
            grid in prop::collection::vec(-51_200i64..51_200, 1..40),
            shift in -1_000_000i64..1_000_000,
        ) {
            // Logits on a 1/1024 grid and integer shifts keep `x + c` exact,
            // so any difference comes from the softmax itself.
            let logits: Vec<f64> = grid.iter().map(|&g| g as f64 / 1024.0).collect();
            let shift = shift as f64;
            let p = softmax(&logits).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
            let shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matvec_examples() {
        let id = Matrix::identity(3);
        assert_eq!(id.matvec(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let zero = Matrix::zeros(2, 3);
        assert_eq!(zero.matvec(&[4.0, -1.0, 2.5]).unwrap(), vec![0.0, 0.0]);
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(matvec(&m, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(transpose_matvec(&m, &[1.0, 1.0]).unwrap(), vec![4.0, 6.0]);
    }

    #[test]
    fn matvec_dimension_mismatch() {
        let m = Matrix::zeros(2, 3);
        assert!(matches!(
            m.matvec(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            m.transpose_matvec(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ridge_intercept_only_is_weighted_mean() {
        let z = Matrix::from_vec(4, 1, vec![1.0; 4]).unwrap();
        let y = [1.0, 2.0, 3.0, 10.0];
        let pi = [0.5, 1.0, 0.25, 0.25];
        let beta = weighted_ridge(&z, &y, &pi, 0.0).unwrap();
        let mean = (0.5 + 2.0 + 0.75 + 2.5) / 2.0;
        assert_abs_diff_eq!(beta[0], mean, epsilon = 1e-14);
    }

    #[test]
    fn ridge_zero_target_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut z = Matrix::zeros(20, 5);
        for i in 0..20 {
            z[(i, 0)] = 1.0;
            for j in 1..5 {
                z[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let beta = weighted_ridge(&z, &[0.0; 20], &[1.0; 20], 1.0).unwrap();
        assert!(beta.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn ridge_singular_without_penalty() {
        // duplicated column
        let z = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        let err = weighted_ridge(&z, &[1.0, 2.0, 3.0], &[1.0; 3], 0.0).unwrap_err();
        assert_eq!(err.to_string(), "singular system; increase lambda or samples");
        assert!(weighted_ridge(&z, &[1.0, 2.0, 3.0], &[1.0; 3], 0.1).is_ok());
    }

    fn random_system(seed: u64, n: usize, p: usize) -> (Matrix, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = Matrix::zeros(n, p);
        for i in 0..n {
            z[(i, 0)] = 1.0;
            for j in 1..p {
                z[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let y = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let pi = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        (z, y, pi)
    }

    /// Plain gradient descent on the ridge objective, run to convergence.
    fn ridge_by_gradient_descent(z: &Matrix, y: &[f64], pi: &[f64], lambda: f64) -> Vec<f64> {
        let p = z.cols();
        let mut beta = vec![0.0; p];
        // Step below 2 / L, where L bounds the Hessian 2 (ZᵀΠZ + λI).
        let frob: f64 = z
            .iter_rows()
            .zip(pi)
            .map(|(r, w)| w * dot(r, r))
            .sum();
        let step = 1.0 / (2.0 * (frob + lambda));
        for _ in 0..200_000 {
            let mut grad: Vec<f64> = beta.iter().map(|b| 2.0 * lambda * b).collect();
            for ((r, &yi), &wi) in z.iter_rows().zip(y).zip(pi) {
                let resid = dot(r, &beta) - yi;
                axpy(2.0 * wi * resid, r, &mut grad);
            }
            if norm_inf(&grad) < 1e-13 {
                break;
            }
            axpy(-step, &grad, &mut beta);
        }
        beta
    }

    #[test]
    fn ridge_matches_gradient_descent() {
        let (z, y, pi) = random_system(11, 50, 4);
        let direct = weighted_ridge(&z, &y, &pi, 0.1).unwrap();
        let iterative = ridge_by_gradient_descent(&z, &y, &pi, 0.1);
        for (a, b) in direct.iter().zip(&iterative) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn ridge_stationarity(seed in 0u64..10_000, n in 5usize..60, p in 1usize..8, lambda in 1e-3f64..10.0) {
            let (z, y, pi) = random_system(seed, n, p);
            let beta = weighted_ridge(&z, &y, &pi, lambda).unwrap();
            // Zᵀ Π (y − Zβ) − λβ = 0
            let mut g: Vec<f64> = beta.iter().map(|b| -lambda * b).collect();
            for ((r, &yi), &wi) in z.iter_rows().zip(&y).zip(&pi) {
                axpy(wi * (yi - dot(r, &beta)), r, &mut g);
            }
            prop_assert!(norm_inf(&g) < 1e-8);
        }
    }
}
