//! Thin wrappers over nalgebra's complex SVD and Hermitian eigensolver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Minimum-norm least-squares solution with its effective rank.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: CVector,
    pub rank: usize,
}

impl LeastSquares {
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.solution.len()
    }
}

/// Solves `min ‖A x − b‖` through the SVD pseudo-inverse. Singular values
/// below `rel_tol · σ_max` are dropped.
pub fn pinv_solve(a: &CMatrix, b: &CVector, rel_tol: f64) -> LeastSquares {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return LeastSquares {
            solution: CVector::zeros(n),
            rank: 0,
        };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rel_tol * s_max;
    let ub = u.adjoint() * b;
    let mut scaled = CVector::zeros(svd.singular_values.len());
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            scaled[i] = ub[i] / s;
            rank += 1;
        }
    }
    LeastSquares {
        solution: v_t.adjoint() * scaled,
        rank,
    }
}

/// Eigen-pairs of a Hermitian matrix, eigenvalues ascending, eigenvectors
/// as the matching columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    // Symmetrize to strip round-off asymmetry.
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
