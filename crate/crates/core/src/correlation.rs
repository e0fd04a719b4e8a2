//! Power-exponential correlation:
//! `R_ij = exp(-sum_k theta_k |x_ik - x_jk|^p)` with `1 + nugget` on the diagonal.
//!
//! Only the strict lower triangle is evaluated and then mirrored. The sum over
//! `k` is always performed left to right inside one pair, so the sequential and
//! row-parallel paths produce bitwise identical matrices.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{GpError, Result};
use crate::real::Real;
use crate::types::Hyperparameters;

/// Dense symmetric correlation matrix with `1 + nugget` on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix<T> {
    values: Array2<T>,
    nugget: f64,
}

impl<T: Real> CorrelationMatrix<T> {
    /// Wraps an existing square matrix. Intended for tests and for callers
    /// that already hold a correlation matrix; symmetry is checked.
    pub fn from_values(values: Array2<T>, nugget: f64) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(GpError::DimensionMismatch(format!("{r}x{c} matrix is not square")));
        }
        for i in 0..r {
            for j in 0..i {
                if values[[i, j]] != values[[j, i]] {
                    return Err(GpError::DimensionMismatch(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values, nugget })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }
}

/// `|delta|^p` evaluated as `exp(p ln|delta|)`, zero at `delta == 0`.
#[inline]
pub fn abs_pow<T: Real>(delta: T, p: T) -> T {
    if delta == T::zero() {
        T::zero()
    } else {
        (p * delta.abs().ln()).exp()
    }
}

#[inline]
fn pair_correlation<T: Real>(a: &[T], b: &[T], theta: &[T], p: T) -> T {
    let mut s = T::zero();
    for k in 0..theta.len() {
        s = s + theta[k] * abs_pow(a[k] - b[k], p);
    }
    (-s).exp()
}

fn check_shapes(x: ArrayView2<'_, f64>, params: &Hyperparameters) -> Result<()> {
    params.validate()?;
    if x.ncols() != params.dim() {
        return Err(GpError::DimensionMismatch(format!(
            "inputs have {} columns but theta has {} entries",
            x.ncols(),
            params.dim()
        )));
    }
    Ok(())
}

fn cast_rows<T: Real>(x: ArrayView2<'_, f64>) -> Vec<T> {
    x.iter().map(|&v| T::from_f64(v)).collect()
}

fn cast_vec<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&t| T::from_f64(t)).collect()
}

fn finish<T: Real>(mut values: Array2<T>, nugget: f64) -> Result<CorrelationMatrix<T>> {
    let n = values.nrows();
    let diag = T::one() + T::from_f64(nugget);
    for i in 0..n {
        for j in 0..i {
            let v = values[[i, j]];
            if !v.is_finite() {
                return Err(GpError::NonFiniteCorrelation { row: i, col: j });
            }
            values[[j, i]] = v;
        }
        values[[i, i]] = diag;
    }
    Ok(CorrelationMatrix { values, nugget })
}

/// Builds `R` sequentially.
pub fn build_corr_matrix<T: Real>(
    x: ArrayView2<'_, f64>,
    params: &Hyperparameters,
) -> Result<CorrelationMatrix<T>> {
    check_shapes(x, params)?;
    let (n, d) = x.dim();
    let xs = cast_rows::<T>(x);
    let theta = cast_vec::<T>(&params.theta);
    let p = T::from_f64(params.p);
    let mut values = Array2::<T>::zeros((n, n));
    for i in 1..n {
        let xi = &xs[i * d..(i + 1) * d];
        for j in 0..i {
            values[[i, j]] = pair_correlation(xi, &xs[j * d..(j + 1) * d], &theta, p);
        }
    }
    finish(values, params.nugget)
}

/// Builds `R` with the lower-triangle rows distributed across threads.
pub fn build_corr_matrix_par<T: Real>(
    x: ArrayView2<'_, f64>,
    params: &Hyperparameters,
) -> Result<CorrelationMatrix<T>> {
    check_shapes(x, params)?;
    let (n, d) = x.dim();
    let xs = cast_rows::<T>(x);
    let theta = cast_vec::<T>(&params.theta);
    let p = T::from_f64(params.p);
    let mut values = Array2::<T>::zeros((n, n));
    values
        .as_slice_mut()
        .expect("fresh array is contiguous")
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let xi = &xs[i * d..(i + 1) * d];
            for (j, r) in row.iter_mut().take(i).enumerate() {
                *r = pair_correlation(xi, &xs[j * d..(j + 1) * d], &theta, p);
            }
        });
    finish(values, params.nugget)
}

/// Cross-correlations between `x_star` and every row of `x`. No nugget.
pub fn corr_vector<T: Real>(
    x_star: &[f64],
    x: ArrayView2<'_, f64>,
    params: &Hyperparameters,
) -> Result<Vec<T>> {
    check_shapes(x, params)?;
    if x_star.len() != x.ncols() {
        return Err(GpError::DimensionMismatch(format!(
            "test point has {} coordinates, training inputs have {}",
            x_star.len(),
            x.ncols()
        )));
    }
    if let Some(k) = x_star
        .iter()
        .position(|v| !(v.is_finite() && (-1e-12..=1.0 + 1e-12).contains(v)))
    {
        return Err(GpError::OutOfUnitCube { row: 0, col: k, value: x_star[k] });
    }
    let d = x.ncols();
    let xs = cast_rows::<T>(x);
    let star = cast_vec::<T>(x_star);
    let theta = cast_vec::<T>(&params.theta);
    let p = T::from_f64(params.p);
    Ok((0..x.nrows())
        .map(|i| pair_correlation(&star, &xs[i * d..(i + 1) * d], &theta, p))
        .collect())
}

/// The theta-independent part of `R`: `|x_ik - x_jk|^p` for every pair in the
/// strict lower triangle, laid out pair-major. Repeated likelihood
/// evaluations only need one exponential per pair on top of this table.
#[derive(Clone, Debug)]
pub struct PairwisePowers<T> {
    n: usize,
    d: usize,
    p: f64,
    data: Vec<T>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i.saturating_sub(1)) / 2
}

impl<T: Real> PairwisePowers<T> {
    pub fn new(x: ArrayView2<'_, f64>, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(GpError::InvalidHyperparameters(format!(
                "smoothness p = {p} must lie in (0, 2]"
            )));
        }
        let (n, d) = x.dim();
        let xs = cast_rows::<T>(x);
        let pt = T::from_f64(p);
        let mut data = vec![T::zero(); n * n.saturating_sub(1) / 2 * d];
        if n > 1 {
            // Row i owns pairs (i, 0..i): a contiguous block of i*d entries.
            let mut blocks: Vec<&mut [T]> = Vec::with_capacity(n);
            let mut rest = data.as_mut_slice();
            for i in 0..n {
                let (head, tail) = rest.split_at_mut(i * d);
                blocks.push(head);
                rest = tail;
            }
            blocks.into_par_iter().enumerate().for_each(|(i, block)| {
                let xi = &xs[i * d..(i + 1) * d];
                for j in 0..i {
                    let xj = &xs[j * d..(j + 1) * d];
                    for k in 0..d {
                        block[j * d + k] = abs_pow(xi[k] - xj[k], pt);
                    }
                }
            });
        }
        Ok(Self { n, d, p, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    fn row_pairs(&self, i: usize) -> &[T] {
        let start = row_offset(i) * self.d;
        &self.data[start..start + i * self.d]
    }

    #[inline]
    fn fill_row(&self, i: usize, theta: &[T], row: &mut [T]) {
        let pairs = self.row_pairs(i);
        for (j, r) in row.iter_mut().take(i).enumerate() {
            let pw = &pairs[j * self.d..(j + 1) * self.d];
            let mut s = T::zero();
            for k in 0..self.d {
                s = s + theta[k] * pw[k];
            }
            *r = (-s).exp();
        }
    }

    fn prepare(&self, params: &Hyperparameters) -> Result<Vec<T>> {
        params.validate()?;
        if params.dim() != self.d {
            return Err(GpError::DimensionMismatch(format!(
                "theta has {} entries for {} input dimensions",
                params.dim(),
                self.d
            )));
        }
        if params.p != self.p {
            return Err(GpError::InvalidHyperparameters(format!(
                "table was built for p = {} but parameters carry p = {}",
                self.p, params.p
            )));
        }
        Ok(cast_vec(&params.theta))
    }

    /// Same result as [`build_corr_matrix`] on the original inputs.
    pub fn correlation(&self, params: &Hyperparameters) -> Result<CorrelationMatrix<T>> {
        let theta = self.prepare(params)?;
        let mut values = Array2::<T>::zeros((self.n, self.n));
        let slice = values.as_slice_mut().expect("fresh array is contiguous");
        for (i, row) in slice.chunks_mut(self.n.max(1)).enumerate() {
            self.fill_row(i, &theta, row);
        }
        finish(values, params.nugget)
    }

    /// Same result as [`build_corr_matrix_par`] on the original inputs.
    pub fn correlation_par(&self, params: &Hyperparameters) -> Result<CorrelationMatrix<T>> {
        let theta = self.prepare(params)?;
        let mut values = Array2::<T>::zeros((self.n, self.n));
        values
            .as_slice_mut()
            .expect("fresh array is contiguous")
            .par_chunks_mut(self.n.max(1))
            .enumerate()
            .for_each(|(i, row)| self.fill_row(i, &theta, row));
        finish(values, params.nugget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn hp(theta: Vec<f64>, p: f64, nugget: f64) -> Hyperparameters {
        Hyperparameters::new(theta, p, nugget).unwrap()
    }

    #[test]
    fn coincident_points_are_fully_correlated() {
        let x = array![[0.2, 0.7], [0.2, 0.7]];
        let r = build_corr_matrix::<f64>(x.view(), &hp(vec![3.0, 5.0], 1.95, 0.0)).unwrap();
        assert_eq!(r.values(), &array![[1.0, 1.0], [1.0, 1.0]]);
    }

    #[test]
    fn zero_decay_gives_all_ones() {
        let x = array![[0.1, 0.9], [0.5, 0.3], [0.8, 0.0]];
        let r = build_corr_matrix::<f64>(x.view(), &hp(vec![0.0, 0.0], 1.95, 0.0)).unwrap();
        assert!(r.values().iter().all(|&v| v == 1.0));
        let v = corr_vector::<f64>(&[0.4, 0.4], x.view(), &hp(vec![0.0, 0.0], 1.95, 0.0)).unwrap();
        assert_eq!(v, vec![1.0; 3]);
    }

    #[test]
    fn unit_separation_scalar_value() {
        let x = array![[0.0], [1.0]];
        let r = build_corr_matrix::<f64>(x.view(), &hp(vec![2.0], 1.95, 0.0)).unwrap();
        assert!((r.values()[[1, 0]] - 0.1353352832366127).abs() < 1e-15);
        assert_eq!(r.values()[[0, 1]], r.values()[[1, 0]]);
    }

    #[test]
    fn cross_correlation_scalar_value() {
        let x = array![[0.0]];
        let v = corr_vector::<f64>(&[0.5], x.view(), &hp(vec![1.0], 2.0, 0.0)).unwrap();
        assert!((v[0] - 0.7788007830714049).abs() < 1e-15);
    }

    #[test]
    fn nugget_only_on_diagonal() {
        let x = array![[0.1], [0.4]];
        let params = hp(vec![1.0], 1.95, 0.25);
        let r = build_corr_matrix::<f64>(x.view(), &params).unwrap();
        assert_eq!(r.values()[[0, 0]], 1.25);
        let v = corr_vector::<f64>(&[0.1], x.view(), &params).unwrap();
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn corr_vector_rejects_bad_points() {
        let x = array![[0.1, 0.2]];
        let params = hp(vec![1.0, 1.0], 1.95, 0.0);
        assert!(corr_vector::<f64>(&[0.1], x.view(), &params).is_err());
        assert!(corr_vector::<f64>(&[0.1, 1.2], x.view(), &params).is_err());
    }

    #[test]
    fn theta_dimension_checked() {
        let x = array![[0.1, 0.2], [0.3, 0.4]];
        assert!(build_corr_matrix::<f64>(x.view(), &hp(vec![1.0], 1.95, 0.0)).is_err());
    }

    fn design(n: usize, d: usize, seed: u64) -> Array2<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.gen::<f64>())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_with_unit_plus_nugget_diagonal(
            n in 2usize..12, d in 1usize..4, seed in any::<u64>(),
            t in proptest::collection::vec(0.0f64..12.0, 3), nugget in 0.0f64..0.1,
        ) {
            let x = design(n, d, seed);
            let params = hp(t[..d].to_vec(), 1.95, nugget);
            let r = build_corr_matrix::<f64>(x.view(), &params).unwrap();
            for i in 0..n {
                prop_assert_eq!(r.values()[[i, i]], 1.0 + nugget);
                for j in 0..i {
                    let v = r.values()[[i, j]];
                    prop_assert_eq!(v, r.values()[[j, i]]);
                    prop_assert!(v > 0.0 && v <= 1.0);
                }
            }
        }

        #[test]
        fn larger_theta_never_increases_correlation(
            n in 2usize..10, d in 1usize..4, seed in any::<u64>(),
            t in proptest::collection::vec(0.0f64..6.0, 3), k in 0usize..3, bump in 0.0f64..6.0,
        ) {
            let x = design(n, d, seed);
            let k = k % d;
            let base = hp(t[..d].to_vec(), 1.95, 0.0);
            let mut bigger = base.clone();
            bigger.theta[k] += bump;
            let r0 = build_corr_matrix::<f64>(x.view(), &base).unwrap();
            let r1 = build_corr_matrix::<f64>(x.view(), &bigger).unwrap();
            for i in 0..n {
                for j in 0..i {
                    prop_assert!(r1.values()[[i, j]] <= r0.values()[[i, j]]);
                }
            }
        }

        #[test]
        fn permuting_rows_permutes_both_axes(
            n in 2usize..10, d in 1usize..4, seed in any::<u64>(), shift in 1usize..9,
        ) {
            let x = design(n, d, seed);
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let xp = Array2::from_shape_fn((n, d), |(i, k)| x[[perm[i], k]]);
            let params = hp(vec![2.5; d], 1.95, 0.0);
            let r = build_corr_matrix::<f64>(x.view(), &params).unwrap();
            let rp = build_corr_matrix::<f64>(xp.view(), &params).unwrap();
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(rp.values()[[i, j]], r.values()[[perm[i], perm[j]]]);
                }
            }
        }

        #[test]
        fn corr_vector_matches_matrix_row(
            n in 2usize..10, d in 1usize..4, seed in any::<u64>(), nugget in 0.0f64..0.5,
        ) {
            let x = design(n, d, seed);
            let params = hp(vec![4.0; d], 1.95, nugget);
            let r = build_corr_matrix::<f64>(x.view(), &params).unwrap();
            for i in 0..n {
                let row: Vec<f64> = x.row(i).to_vec();
                let v = corr_vector::<f64>(&row, x.view(), &params).unwrap();
                for (j, &vj) in v.iter().enumerate() {
                    if i == j {
                        prop_assert_eq!(vj, 1.0);
                        prop_assert_eq!(r.values()[[i, j]], 1.0 + nugget);
                    } else {
                        prop_assert_eq!(vj, r.values()[[i, j]]);
                    }
                }
            }
        }

        #[test]
        fn all_paths_are_bitwise_identical(
            n in 2usize..40, d in 1usize..5, seed in any::<u64>(),
            t in proptest::collection::vec(1e-6f64..12.0, 4),
        ) {
            let x = design(n, d, seed);
            let params = hp(t[..d].to_vec(), 1.95, 0.0);
            let seq = build_corr_matrix::<f64>(x.view(), &params).unwrap();
            let par = build_corr_matrix_par::<f64>(x.view(), &params).unwrap();
            let table = PairwisePowers::<f64>::new(x.view(), 1.95).unwrap();
            prop_assert_eq!(&seq, &par);
            prop_assert_eq!(&seq, &table.correlation(&params).unwrap());
            prop_assert_eq!(&seq, &table.correlation_par(&params).unwrap());

            let seq32 = build_corr_matrix::<f32>(x.view(), &params).unwrap();
            let table32 = PairwisePowers::<f32>::new(x.view(), 1.95).unwrap();
            prop_assert_eq!(&seq32, &table32.correlation_par(&params).unwrap());
        }
    }
}
