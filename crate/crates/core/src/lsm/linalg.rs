//! Small dense symmetric solves for the regression normal equations.

use crate::scalar::Real;

/// Eigenvalues of a symmetric `N x N` matrix by cyclic Jacobi rotations.
pub(crate) fn sym_eigenvalues<T: Real, const N: usize>(mut a: [[T; N]; N]) -> [T; N] {
    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut diag = T::zero();
        for i in 0..N {
            diag = diag + a[i][i] * a[i][i];
            for j in 0..N {
                if i != j {
                    off = off + a[i][j] * a[i][j];
                }
            }
        }
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut out = [T::zero(); N];
    for i in 0..N {
        out[i] = a[i][i];
    }
    out
}

/// `lambda_max / lambda_min` of a symmetric PSD matrix; infinite when singular.
pub(crate) fn condition_number<T: Real, const N: usize>(a: &[[T; N]; N]) -> T {
    let ev = sym_eigenvalues(*a);
    let max = ev.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let min = ev.iter().fold(T::infinity(), |m, &x| m.min(x));
    if min <= T::zero() {
        T::infinity()
    } else {
        max / min
    }
}

/// Cholesky solve of `a x = b`; `None` when `a` is not positive definite.
pub(crate) fn cholesky_solve<T: Real, const N: usize>(a: &[[T; N]; N], b: &[T; N]) -> Option<[T; N]> {
    let mut l = [[T::zero(); N]; N];
    for i in 0..N {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum = sum - l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > T::zero()) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut y = [T::zero(); N];
    for i in 0..N {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = [T::zero(); N];
    for i in (0..N).rev() {
        let mut sum = y[i];
        for k in (i + 1)..N {
            sum = sum - l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
