//! Complex-Hermitian to real-symmetric embedding.
//!
//! A Hermitian m x m matrix X is parameterized by m^2 real program variables
//! (m diagonal entries, then Re/Im of each strict upper-triangle entry) and
//! constrained PSD through the real symmetric 2m x 2m matrix
//! M(X) = [[Re X, -Im X], [Im X, Re X]]: X >= 0 iff M(X) >= 0. The factor-2
//! trace bookkeeping (tr M(X) = 2 tr X, Re tr(A^H X) = 1/2 tr(M(A)^T M(X)))
//! stays inside this module so callers work purely in complex quantities.

use super::{svec_index, ConeSpec, ConicProgram, LinExpr};
use crate::linalg::{c, CMat};

/// One embedded Hermitian matrix variable inside a conic program.
#[derive(Debug, Clone)]
pub struct HermitianBlock {
    /// Complex-side dimension m.
    pub dim: usize,
    /// First program-variable index of this block's m^2 parameters.
    pub base: usize,
}

/// Number of real parameters of a Hermitian m x m matrix.
pub fn param_count(m: usize) -> usize {
    m * m
}

/// Dimension of the real symmetric embedding of a Hermitian m x m matrix.
pub fn embedded_side(m: usize) -> usize {
    2 * m
}

impl HermitianBlock {
    /// Register m^2 fresh variables named `prefix` in the program.
    pub fn register(prog: &mut ConicProgram, m: usize, prefix: &str) -> Self {
        let base = prog.add_vars(param_count(m), prefix);
        Self { dim: m, base }
    }

    /// Variable index of the real diagonal entry (i, i).
    pub fn diag(&self, i: usize) -> usize {
        debug_assert!(i < self.dim);
        self.base + i
    }

    /// Variable indices (re, im) of the strict upper-triangle entry (i, j),
    /// i < j.
    pub fn off_diag(&self, i: usize, j: usize) -> (usize, usize) {
        debug_assert!(i < j && j < self.dim);
        // pairs ordered row-major over the strict upper triangle
        let pair_rank = i * self.dim - i * (i + 1) / 2 + (j - i - 1);
        let idx = self.base + self.dim + 2 * pair_rank;
        (idx, idx + 1)
    }

    /// Affine expression for tr(X).
    pub fn trace_expr(&self) -> LinExpr {
        let mut e = LinExpr::default();
        for i in 0..self.dim {
            e.push(self.diag(i), 1.0);
        }
        e
    }

    /// Affine expression for Re tr(A X) with Hermitian coefficient A:
    /// sum_i A_ii X_ii + 2 sum_{i<j} (Re A_ij Re X_ij + Im A_ij Im X_ij).
    pub fn inner_product_expr(&self, a: &CMat) -> LinExpr {
        debug_assert_eq!(a.nrows(), self.dim);
        let mut e = LinExpr::default();
        for i in 0..self.dim {
            e.push(self.diag(i), a[(i, i)].re);
        }
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let (re, im) = self.off_diag(i, j);
                e.push(re, 2.0 * a[(i, j)].re);
                e.push(im, 2.0 * a[(i, j)].im);
            }
        }
        e
    }

    /// svec rows of the embedded real symmetric matrix M(X), suitable for a
    /// PSD-triangle cone of side 2m. Column-major upper triangle;
    /// off-diagonal svec entries carry the sqrt(2) scaling.
    pub fn psd_rows(&self) -> Vec<LinExpr> {
        let m = self.dim;
        let side = embedded_side(m);
        let mut rows = vec![LinExpr::default(); side * (side + 1) / 2];
        let sqrt2 = std::f64::consts::SQRT_2;
        // entry of M(X) at (r, c), r <= c, expressed over the parameters
        for col in 0..side {
            for row in 0..=col {
                let idx = svec_index(row, col);
                let scale = if row == col { 1.0 } else { sqrt2 };
                let e = &mut rows[idx];
                let (br, bc) = (row / m, col / m); // block coordinates
                let (i, j) = (row % m, col % m);
                match (br, bc) {
                    // Re X blocks (top-left, bottom-right)
                    (0, 0) | (1, 1) => {
                        if i == j {
                            e.push(self.diag(i), scale);
                        } else if i > j {
                            let (re, _) = self.off_diag(j, i);
                            e.push(re, scale);
                        } else {
                            let (re, _) = self.off_diag(i, j);
                            e.push(re, scale);
                        }
                    }
                    // -Im X block (top-right): antisymmetric, zero diagonal
                    (0, 1) => {
                        if i < j {
                            let (_, im) = self.off_diag(i, j);
                            e.push(im, -scale);
                        } else if i > j {
                            let (_, im) = self.off_diag(j, i);
                            e.push(im, scale);
                        }
                    }
                    _ => unreachable!("upper triangle never reaches the bottom-left block"),
                }
            }
        }
        rows
    }

    /// Add the PSD constraint M(X) >= 0 to the program.
    pub fn add_psd_constraint(&self, prog: &mut ConicProgram) -> usize {
        prog.add_constraint(self.psd_rows(), ConeSpec::psd_triangle(embedded_side(self.dim)))
            .expect("embedding rows match cone dimension")
    }

    /// Rebuild the complex Hermitian matrix from a primal point.
    pub fn extract(&self, x: &[f64]) -> CMat {
        let m = self.dim;
        let mut out = CMat::zeros(m, m);
        for i in 0..m {
            out[(i, i)] = c(x[self.diag(i)], 0.0);
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let (re, im) = self.off_diag(i, j);
                out[(i, j)] = c(x[re], x[im]);
                out[(j, i)] = c(x[re], -x[im]);
            }
        }
        out
    }

    /// Write the parameters of a concrete Hermitian matrix into a vector
    /// (inverse of [`extract`]; used to seed local points and in tests).
    pub fn store(&self, a: &CMat, x: &mut [f64]) {
        for i in 0..self.dim {
            x[self.diag(i)] = a[(i, i)].re;
        }
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let (re, im) = self.off_diag(i, j);
                x[re] = a[(i, j)].re;
                x[im] = a[(i, j)].im;
            }
        }
    }
}

/// The real symmetric embedding M(X) of a Hermitian matrix, materialized
/// directly (reference path for tests and the CBF dump).
pub fn embed_matrix(x: &CMat) -> nalgebra::DMatrix<f64> {
    let m = x.nrows();
    let mut out = nalgebra::DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let v = x[(i, j)];
            out[(i, j)] = v.re;
            out[(m + i, m + j)] = v.re;
            out[(m + i, j)] = v.im;
            out[(i, m + j)] = -v.im;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hermitize, min_eig, outer, CVec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(m: usize, rng: &mut impl Rng) -> CMat {
        let raw = CMat::from_fn(m, m, |_, _| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        hermitize(&raw)
    }

    #[test]
    fn scalar_case_doubles_trace() {
        let x = CMat::from_element(1, 1, c(3.5, 0.0));
        let m = embed_matrix(&x);
        assert_eq!(m.nrows(), 2);
        assert_relative_eq!(m[(0, 0)], 3.5);
        assert_relative_eq!(m[(1, 1)], 3.5);
        assert_relative_eq!(m.trace(), 2.0 * 3.5);
    }

    #[test]
    fn embedded_eigenvalues_duplicate_complex_ones() {
        // X = [[1, i], [-i, 1]] has complex eigenvalues {0, 2}; the embedding
        // carries {0, 0, 2, 2}.
        let x = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        let m = embed_matrix(&x);
        let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [0.0, 0.0, 2.0, 2.0];
        for (got, want) in eig.iter().zip(expect) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn psd_iff_embedded_psd_over_random_draws() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = random_hermitian(3, &mut rng);
            let complex_min = min_eig(&a);
            let m = embed_matrix(&a);
            let real_min = m.symmetric_eigen().eigenvalues.min();
            assert_relative_eq!(complex_min, real_min, epsilon = 1e-9);
        }
    }

    #[test]
    fn trace_identity_against_real_embedding() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let a = random_hermitian(3, &mut rng);
            let x = random_hermitian(3, &mut rng);
            // Re tr(A^H X) = Re tr(A X) for Hermitian A; embedding halves it.
            let complex_side = crate::linalg::trace_re(&(&a * &x));
            let real_side = 0.5 * (embed_matrix(&a).transpose() * embed_matrix(&x)).trace();
            assert_relative_eq!(complex_side, real_side, epsilon = 1e-10);
        }
    }

    #[test]
    fn block_round_trip_and_psd_rows_consistency() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut prog = ConicProgram::new();
        let block = HermitianBlock::register(&mut prog, 3, "x");
        assert_eq!(prog.n_vars(), 9);

        let a = random_hermitian(3, &mut rng);
        let mut x = vec![0.0; prog.n_vars()];
        block.store(&a, &mut x);
        // extract inverts store
        assert!((block.extract(&x) - &a).norm() < 1e-14);
        // psd_rows evaluate to svec(M(A))
        let rows = block.psd_rows();
        let vals: Vec<f64> = rows.iter().map(|r| r.eval(&x)).collect();
        let recon = super::super::unsvec(&vals, 6);
        let reference = embed_matrix(&a);
        assert!((recon - reference).norm() < 1e-12);
    }

    #[test]
    fn inner_product_expr_matches_trace() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let mut prog = ConicProgram::new();
        let block = HermitianBlock::register(&mut prog, 4, "x");
        for _ in 0..20 {
            let a = random_hermitian(4, &mut rng);
            let xmat = random_hermitian(4, &mut rng);
            let mut x = vec![0.0; prog.n_vars()];
            block.store(&xmat, &mut x);
            let expr = block.inner_product_expr(&a);
            let want = crate::linalg::trace_re(&(&a * &xmat));
            assert_relative_eq!(expr.eval(&x), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn psd_constraint_enforced_by_solver() {
        // min x11 + x22 subject to Re tr(h h^H X) >= 1 with complex h: the
        // optimum is rank-one along h with value 1 / ||h||^2.
        let mut prog = ConicProgram::new();
        let block = HermitianBlock::register(&mut prog, 2, "x");
        for i in 0..2 {
            prog.add_objective(block.diag(i), 1.0);
        }
        let h = CVec::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.8)]);
        let hh = outer(&h);
        let mut row = block.inner_product_expr(&hh);
        row.constant = -1.0;
        prog.add_nonneg(row);
        block.add_psd_constraint(&mut prog);
        let sol = prog.solve(1e-9).unwrap();
        assert_eq!(sol.status, super::super::SolveStatus::Optimal);
        let want = 1.0 / h.norm_squared();
        assert_relative_eq!(sol.objective_value, want, max_relative = 1e-6);
        let x = sol.primal.unwrap();
        let xmat = block.extract(&x);
        assert!(min_eig(&xmat) >= -1e-8);
    }
}
