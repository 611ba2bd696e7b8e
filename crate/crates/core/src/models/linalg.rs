//! Small dense helpers over row-major slices.

use crate::real::Real;

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += alpha * x`
pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `W x` for `W` of shape `[rows, cols]`.
pub(crate) fn matvec<T: Real>(w: &[T], rows: usize, cols: usize, x: &[T]) -> Vec<T> {
    debug_assert_eq!(w.len(), rows * cols);
    (0..rows).map(|r| dot(&w[r * cols..(r + 1) * cols], x)).collect()
}

/// `Wᵀ y` for `W` of shape `[rows, cols]`.
pub(crate) fn matvec_t<T: Real>(w: &[T], rows: usize, cols: usize, y: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); cols];
    for r in 0..rows {
        axpy(y[r], &w[r * cols..(r + 1) * cols], &mut out);
    }
    out
}

/// `A B` for `A` of shape `[m, k]` and `B` of shape `[k, n]`.
pub(crate) fn matmul<T: Real>(a: &[T], m: usize, k: usize, b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip != T::zero() {
                axpy(aip, &b[p * n..(p + 1) * n], &mut out[i * n..(i + 1) * n]);
            }
        }
    }
    out
}

/// `Aᵀ B` for `A` of shape `[k, m]` and `B` of shape `[k, n]`.
pub(crate) fn matmul_tn<T: Real>(a: &[T], k: usize, m: usize, b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for p in 0..k {
        for i in 0..m {
            let api = a[p * m + i];
            if api != T::zero() {
                axpy(api, &b[p * n..(p + 1) * n], &mut out[i * n..(i + 1) * n]);
            }
        }
    }
    out
}

/// `A Bᵀ` for `A` of shape `[m, k]` and `B` of shape `[n, k]`.
pub(crate) fn matmul_nt<T: Real>(a: &[T], m: usize, k: usize, b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] = dot(&a[i * k..(i + 1) * k], &b[j * k..(j + 1) * k]);
        }
    }
    out
}
