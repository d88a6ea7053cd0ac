//! Small dense determinants in double-double precision.

use crate::dd::{Dd, DD_EPS};

/// Determinant of a row-major `n x n` matrix with a forward-error bound.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DdDet {
    pub value: Dd,
    /// Bound on the rounding error of the elimination itself.
    pub abs_error: f64,
    /// Hadamard bound `∏ ‖row_i‖₂`, the scale of `|det|` before cancellation.
    pub hadamard: f64,
}

/// Gaussian elimination with full pivoting.
pub(crate) fn det_dd(mut a: Vec<Dd>, n: usize) -> DdDet {
    assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
    if n == 0 {
        return DdDet {
            value: Dd::ONE,
            abs_error: 0.0,
            hadamard: 1.0,
        };
    }
    let hadamard: f64 = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = a[i * n + j].to_f64();
                    v * v
                })
                .sum::<f64>()
                .sqrt()
        })
        .product();

    let mut det = Dd::ONE;
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, -1.0);
        for i in k..n {
            for j in k..n {
                let v = a[i * n + j].hi().abs();
                if v > best {
                    best = v;
                    pr = i;
                    pc = j;
                }
            }
        }
        if best == 0.0 {
            return DdDet {
                value: Dd::ZERO,
                abs_error: 0.0,
                hadamard,
            };
        }
        if pr != k {
            for j in 0..n {
                a.swap(k * n + j, pr * n + j);
            }
            det = -det;
        }
        if pc != k {
            for i in 0..n {
                a.swap(i * n + k, i * n + pc);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        let inv = pivot.recip();
        for i in (k + 1)..n {
            let f = a[i * n + k] * inv;
            if f.is_zero() {
                continue;
            }
            for j in (k + 1)..n {
                let upd = f * a[k * n + j];
                a[i * n + j] -= upd;
            }
        }
    }
    let nf = n as f64;
    DdDet {
        value: det,
        abs_error: 8.0 * nf * nf * nf * DD_EPS * hadamard,
        hadamard,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(v: &[f64]) -> Vec<Dd> {
        v.iter().map(|&x| Dd::from_f64(x)).collect()
    }

    #[test]
    fn small_known_determinants() {
        assert_eq!(det_dd(mat(&[]), 0).value.to_f64(), 1.0);
        assert_eq!(det_dd(mat(&[3.0]), 1).value.to_f64(), 3.0);
        assert_eq!(det_dd(mat(&[1.0, 2.0, 3.0, 4.0]), 2).value.to_f64(), -2.0);
        let d = det_dd(mat(&[2.0, 0.0, 1.0, 1.0, 3.0, 2.0, 1.0, 1.0, 2.0]), 3);
        assert!((d.value.to_f64() - 6.0).abs() < 1e-30);
    }

    #[test]
    fn singular_matrix_gives_zero() {
        let d = det_dd(mat(&[1.0, 2.0, 2.0, 4.0]), 2);
        assert_eq!(d.value.to_f64(), 0.0);
    }

    #[test]
    fn nearly_singular_matrix_keeps_digits() {
        // det [[1, 1], [1, 1+e]] = e, hopeless in plain f64 for e ~ 1e-20
        let e = Dd::from_f64(1e-20);
        let a = vec![Dd::ONE, Dd::ONE, Dd::ONE, Dd::ONE + e];
        let d = det_dd(a, 2);
        assert!((d.value.to_f64() - 1e-20).abs() < 1e-34);
    }

    #[test]
    fn pivoting_sign_is_tracked() {
        // permutation matrix of a 3-cycle has determinant +1
        let d = det_dd(mat(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]), 3);
        assert_eq!(d.value.to_f64(), 1.0);
        let d = det_dd(mat(&[0.0, 1.0, 1.0, 0.0]), 2);
        assert_eq!(d.value.to_f64(), -1.0);
    }
}
