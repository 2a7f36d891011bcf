use nalgebra::DMatrix;

use crate::poly::Polynomial;

/// Relative threshold on `|det S(-B, A)|` below which a numerator and
/// denominator are reported as sharing a root.
pub const DEFAULT_RESULTANT_THRESHOLD: f64 = 1e-10;

/// Sylvester matrix `S(-B, A)` of size `n + m + 1`, with `n = deg A` and
/// `m = deg B`.
///
/// Row `j - 1` (`j = 1..n`) holds the coefficients of `p^j (-B)`, row
/// `n + j` (`j = 0..m`) those of `p^j A`; columns are ascending powers
/// `p^0 .. p^{n+m}`. Multiplying by `[1, p, ..., p^{n+m}]^T` yields the
/// numerators of the gradient of `B/A` w.r.t. `[a_1..a_n, b_0..b_m]` over
/// the common denominator `A^2`. For `A(0) != 0` the determinant vanishes
/// exactly when `A` and `B` share a root.
pub fn sylvester_matrix(neg_b: &Polynomial, a: &Polynomial) -> DMatrix<f64> {
    let n = a.degree();
    let m = neg_b.degree();
    let size = n + m + 1;
    let mut s = DMatrix::zeros(size, size);
    for j in 1..=n {
        for k in 0..=m {
            s[(j - 1, j + k)] = neg_b.coeff(k);
        }
    }
    for j in 0..=m {
        for k in 0..=n {
            s[(n + j, j + k)] = a.coeff(k);
        }
    }
    s
}

/// Scale for the determinant threshold: product of coefficient norms raised
/// to the number of rows each polynomial contributes.
pub fn resultant_scale(b: &Polynomial, a: &Polynomial) -> f64 {
    let nb = b.coeffs().iter().map(|c| c * c).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let na = a.coeffs().iter().map(|c| c * c).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    nb.powi(a.degree() as i32) * na.powi(b.degree() as i32 + 1)
}
