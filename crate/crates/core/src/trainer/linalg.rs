use crate::scalar::{c, Scalar};

/// Solves `A x = b` for symmetric positive definite `A` (row-major, `n x n`)
/// by Cholesky factorization. `None` when a pivot is not safely positive.
pub(crate) fn cholesky_solve<T: Scalar>(a: &[T], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
    let floor = scale * T::epsilon() * c(n as f64 * 16.0);
    let mut low = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= low[i * n + k] * low[j * n + k];
            }
            if i == j {
                if !(s > floor) {
                    return None;
                }
                low[i * n + i] = s.sqrt();
            } else {
                low[i * n + j] = s / low[j * n + j];
            }
        }
    }
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= low[i * n + k] * y[k];
        }
        y[i] = s / low[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= low[k * n + i] * x[k];
        }
        x[i] = s / low[i * n + i];
    }
    Some(x)
}

pub(crate) fn norm<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0f64).abs() < 1e-14);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0f64).abs() < 1e-14);
    }

    #[test]
    fn rejects_singular() {
        assert!(cholesky_solve(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0f64]).is_none());
        assert!(cholesky_solve(&[0.0f64], &[1.0]).is_none());
    }
}
