use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Pivots smaller than this fraction of the largest entry are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Inverts a square matrix by LU decomposition with partial pivoting.
pub fn invert(m: &Mat) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "cannot invert a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let scale = m.max_abs();
    let tol = PIVOT_TOLERANCE * if scale > 0.0 { scale } else { 1.0 };

    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let (piv_row, piv_val) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_val < tol || !piv_val.is_finite() {
            return Err(Error::SingularMatrix {
                column: col,
                pivot: piv_val,
            });
        }
        if piv_row != col {
            perm.swap(piv_row, col);
            for j in 0..n {
                let a = lu[(piv_row, j)];
                lu[(piv_row, j)] = lu[(col, j)];
                lu[(col, j)] = a;
            }
        }
        let pivot = lu[(col, col)];
        for r in col + 1..n {
            let factor = lu[(r, col)] / pivot;
            lu[(r, col)] = factor;
            if factor != 0.0 {
                for j in col + 1..n {
                    lu[(r, j)] -= factor * lu[(col, j)];
                }
            }
        }
    }

    // Solve L U X = P I column by column.
    let mut inv = Mat::zeros(n, n);
    let mut x = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            let mut acc = if perm[i] == j { 1.0 } else { 0.0 };
            for k in 0..i {
                acc -= lu[(i, k)] * x[k];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= lu[(i, k)] * x[k];
            }
            x[i] = acc / lu[(i, i)];
        }
        for i in 0..n {
            inv[(i, j)] = x[i];
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(m: &Mat, inv: &Mat) -> f64 {
        m.matmul(inv).max_abs_diff(&Mat::identity(m.rows()))
    }

    #[test]
    fn identity_inverts_to_itself() {
        assert_eq!(invert(&Mat::identity(3)).unwrap(), Mat::identity(3));
    }

    #[test]
    fn diagonal_inverse() {
        let inv = invert(&Mat::diag(&[2.0, 4.0])).unwrap();
        assert_eq!(inv, Mat::diag(&[0.5, 0.25]));
    }

    #[test]
    fn random_well_conditioned_multiply_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            // Diagonally dominated so the condition number stays far below 1e6.
            let mut m = Mat::zeros(4, 4);
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] = rng.random_range(-1.0..1.0);
                }
                m[(i, i)] += 5.0 * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            }
            let inv = invert(&m).unwrap();
            assert!(residual(&m, &inv) < 1e-9);
            let back = invert(&inv).unwrap();
            assert!(back.max_abs_diff(&m) < 1e-8);
        }
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = Mat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let inv = invert(&m).unwrap();
        assert!(residual(&m, &inv) < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(invert(&m), Err(Error::SingularMatrix { column: 1, .. })));
        assert!(matches!(invert(&Mat::zeros(2, 2)), Err(Error::SingularMatrix { column: 0, .. })));
    }

    #[test]
    fn non_square_is_rejected() {
        assert!(matches!(invert(&Mat::zeros(2, 3)), Err(Error::ShapeMismatch(_))));
    }
}
