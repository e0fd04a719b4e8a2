//! Right-looking blocked Cholesky and blocked substitutions. The panel solve
//! and the trailing update are split across rows with rayon; each output
//! element is reduced in a fixed order, so results do not depend on the
//! number of threads.

use rayon::prelude::*;

use crate::real::{dot_lanes, Real};

/// Rows per parallel task in the substitution updates.
const ROW_CHUNK: usize = 64;

pub fn cholesky_in_place<T: Real>(
    a: &mut [T],
    n: usize,
    block: usize,
    floor: T,
) -> Result<(), usize> {
    let block = block.max(1);
    let mut panel: Vec<T> = Vec::new();
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + block).min(n);
        let w = k1 - k0;

        // Diagonal block; earlier panels have already been subtracted.
        for i in k0..k1 {
            for j in k0..=i {
                let s = a[i * n + j]
                    - dot_lanes(&a[i * n + k0..i * n + j], &a[j * n + k0..j * n + j]);
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
        if k1 == n {
            break;
        }

        let (top, bottom) = a.split_at_mut(k1 * n);
        let top: &[T] = top;

        // Panel: rows below the diagonal block, columns k0..k1.
        bottom.par_chunks_mut(n).for_each(|row| {
            for j in k0..k1 {
                let s = row[j] - dot_lanes(&row[k0..j], &top[j * n + k0..j * n + j]);
                row[j] = s / top[j * n + j];
            }
        });

        // Trailing update of the lower triangle from a packed copy of the panel.
        let m = n - k1;
        panel.clear();
        panel.reserve(m * w);
        for row in bottom.chunks(n) {
            panel.extend_from_slice(&row[k0..k1]);
        }
        let packed = &panel;
        bottom.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            let pi = &packed[r * w..(r + 1) * w];
            for c in 0..=r {
                let pj = &packed[c * w..(c + 1) * w];
                row[k1 + c] = row[k1 + c] - dot_lanes(pi, pj);
            }
        });

        k0 = k1;
    }
    Ok(())
}

pub fn forward_solve<T: Real>(l: &[T], n: usize, block: usize, b: &mut [T]) {
    let block = block.max(1);
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + block).min(n);
        for i in k0..k1 {
            let s = b[i] - dot_lanes(&l[i * n + k0..i * n + i], &b[k0..i]);
            b[i] = s / l[i * n + i];
        }
        if k1 < n {
            let (solved, rest) = b.split_at_mut(k1);
            let u = &solved[k0..k1];
            rest.par_chunks_mut(ROW_CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    for (off, bi) in chunk.iter_mut().enumerate() {
                        let i = k1 + c * ROW_CHUNK + off;
                        *bi = *bi - dot_lanes(&l[i * n + k0..i * n + k1], u);
                    }
                });
        }
        k0 = k1;
    }
}

pub fn backward_solve<T: Real>(l: &[T], n: usize, block: usize, b: &mut [T]) {
    let block = block.max(1);
    let mut k1 = n;
    while k1 > 0 {
        let k0 = k1.saturating_sub(block);
        for i in (k0..k1).rev() {
            let xi = b[i] / l[i * n + i];
            b[i] = xi;
            for j in k0..i {
                b[j] = b[j] - l[i * n + j] * xi;
            }
        }
        if k0 > 0 {
            let (head, solved) = b.split_at_mut(k0);
            let x = &solved[..k1 - k0];
            head.par_chunks_mut(ROW_CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    let j0 = c * ROW_CHUNK;
                    for (r, &xi) in x.iter().enumerate() {
                        let row = &l[(k0 + r) * n + j0..(k0 + r) * n + j0 + chunk.len()];
                        for (bj, &lij) in chunk.iter_mut().zip(row) {
                            *bj = *bj - lij * xi;
                        }
                    }
                });
        }
        k1 = k0;
    }
}
