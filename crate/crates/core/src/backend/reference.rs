//! Unblocked row-oriented Cholesky and plain substitution loops.

use crate::real::{dot_seq, Real};

/// Overwrites the lower triangle of the row-major `n x n` matrix `a` with its
/// Cholesky factor. Returns the failing row when a pivot is not above `floor`.
pub fn cholesky_in_place<T: Real>(a: &mut [T], n: usize, floor: T) -> Result<(), usize> {
    for i in 0..n {
        for j in 0..=i {
            let s = a[i * n + j] - dot_seq(&a[i * n..i * n + j], &a[j * n..j * n + j]);
            if i == j {
                if !(s > floor) || !s.is_finite() {
                    return Err(i);
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    Ok(())
}

/// Solves `L u = b` in place.
pub fn forward_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let s = b[i] - dot_seq(&l[i * n..i * n + i], &b[..i]);
        b[i] = s / l[i * n + i];
    }
}

/// Solves `L^T x = b` in place, sweeping rows of `L` from the bottom.
pub fn backward_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in (0..n).rev() {
        let xi = b[i] / l[i * n + i];
        b[i] = xi;
        let row = &l[i * n..i * n + i];
        for (bj, &lij) in b[..i].iter_mut().zip(row) {
            *bj = *bj - lij * xi;
        }
    }
}
