//! Small dense linear-algebra helpers. Matrices here are tiny (at most a few
//! hundred rows), so plain textbook algorithms are adequate.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Largest eigenvalue of a symmetric matrix, by cyclic Jacobi rotations.
pub fn sym_max_eigenvalue(a: ArrayView2<f64>) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut m = a.to_owned();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let scale: f64 = m.iter().map(|v| v * v).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[[i, i]]).fold(f64::NEG_INFINITY, f64::max)
}

/// Squared spectral norm `sigma_max(B)^2`, via the smaller Gram matrix.
pub fn spectral_norm_sq(b: ArrayView2<f64>) -> f64 {
    let gram = if b.nrows() >= b.ncols() {
        b.t().dot(&b)
    } else {
        b.dot(&b.t())
    };
    sym_max_eigenvalue(gram.view()).max(0.0)
}

/// Solve `A x = b` by LU with partial pivoting.
pub fn solve(a: ArrayView2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Shape(format!(
            "cannot solve a {}x{} system with a rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut m: Array2<f64> = a.to_owned();
    let mut x = b.clone();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))
            .unwrap();
        if m[[pivot, col]].abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Singular);
        }
        if pivot != col {
            for k in 0..n {
                m.swap([pivot, k], [col, k]);
            }
            x.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = m[[row, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[[row, k]] -= f * m[[col, k]];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in row + 1..n {
            acc -= m[[row, k]] * x[k];
        }
        x[row] = acc / m[[row, row]];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigenvalue_of_diagonal() {
        let a = array![[1.0, 0.0], [0.0, 3.0]];
        assert!((sym_max_eigenvalue(a.view()) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_of_coupled_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        assert!((sym_max_eigenvalue(a.view()) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        // u v^T has sigma_max = |u| |v|
        let b = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let expected = 14.0 * 5.0;
        assert!((spectral_norm_sq(b.view()) - expected).abs() < 1e-9);
    }

    #[test]
    fn solves_small_system() {
        let a = array![[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x_true = array![1.0, -2.0, 0.5];
        let b = a.dot(&x_true);
        let x = solve(a.view(), &b).unwrap();
        for (u, v) in x.iter().zip(x_true.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_detected() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(solve(a.view(), &array![1.0, 1.0]), Err(Error::Singular)));
    }
}
