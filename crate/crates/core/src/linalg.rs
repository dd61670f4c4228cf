//! Small complex-Hermitian linear-algebra helpers shared by the channel,
//! metrics, and follower modules. All matrices are dynamically sized; the
//! arrays in play are tiny (4x4 desk, 25x25 full profile).

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// v v† outer product.
pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Force exact Hermitian symmetry: (A + A†)/2.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// Real part of the trace.
pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// Re(h† A h). Real-valued for Hermitian A.
pub fn quad_form(h: &CVec, a: &CMat) -> f64 {
    (h.adjoint() * a * h)[(0, 0)].re
}

/// Eigenvalues and eigenvectors of a Hermitian matrix, sorted descending.
pub fn herm_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = hermitize(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eig(a: &CMat) -> f64 {
    let (vals, _) = herm_eigen(a);
    *vals.last().unwrap()
}

/// Dominant eigenpair (λ1, u1) plus the λ2/λ1 ratio used by the rank-one
/// tightness check. The eigenvector phase is normalized so its largest-modulus
/// entry is real nonnegative, keeping extraction deterministic.
pub fn dominant_eigpair(a: &CMat) -> (f64, CVec, f64) {
    let (vals, vecs) = herm_eigen(a);
    let l1 = vals[0];
    let l2 = if vals.len() > 1 { vals[1].max(0.0) } else { 0.0 };
    let mut u = CVec::from(vecs.column(0).into_owned());
    let mut best = 0usize;
    for i in 0..u.len() {
        if u[i].norm() > u[best].norm() {
            best = i;
        }
    }
    let phase = u[best] / c(u[best].norm().max(1e-300), 0.0);
    u *= phase.conj();
    let ratio = if l1 > 0.0 { l2 / l1 } else { f64::INFINITY };
    (l1, u, ratio)
}

/// Hermitian square root via eigendecomposition, flooring eigenvalues at zero.
pub fn sqrt_psd(a: &CMat) -> CMat {
    let (vals, vecs) = herm_eigen(a);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0).sqrt(), 0.0)));
    &vecs * CMat::from_diagonal(&d) * vecs.adjoint()
}

/// Hermitian inverse square root with an eigenvalue floor.
pub fn inv_sqrt_psd(a: &CMat, floor: f64) -> CMat {
    let (vals, vecs) = herm_eigen(a);
    let d = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| c(1.0 / v.max(floor).sqrt(), 0.0)),
    );
    &vecs * CMat::from_diagonal(&d) * vecs.adjoint()
}

/// Solve A x = b for Hermitian positive-definite A (dense LU).
pub fn solve_hpd(a: &CMat, b: &CVec) -> Option<CVec> {
    a.clone().lu().solve(b)
}

/// Inverse of a Hermitian positive-definite matrix, re-hermitized.
pub fn inv_hpd(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse().map(|m| hermitize(&m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn test_hermitian() -> CMat {
        // [[2, i], [-i, 3]] with eigenvalues (5±sqrt(5))/2
        CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)])
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let a = test_hermitian();
        let (vals, vecs) = herm_eigen(&a);
        assert!(vals[0] >= vals[1]);
        assert_relative_eq!(vals[0], (5.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], (5.0 - 5f64.sqrt()) / 2.0, max_relative = 1e-12);
        let d = CMat::from_diagonal(&DVector::from_iterator(2, vals.iter().map(|&v| c(v, 0.0))));
        let recon = &vecs * d * vecs.adjoint();
        assert!((recon - a).norm() < 1e-12);
    }

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        let a = test_hermitian();
        let s = inv_sqrt_psd(&a, 1e-12);
        let should_be_eye = &s * &a * &s;
        assert!((should_be_eye - CMat::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn dominant_pair_of_rank_one() {
        let v = CVec::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]);
        let (l1, u, ratio) = dominant_eigpair(&outer(&v));
        assert_relative_eq!(l1, 4.0, max_relative = 1e-12);
        assert!(ratio < 1e-14);
        let recon = &u * u.adjoint() * c(l1, 0.0);
        assert!((recon - outer(&v)).norm() < 1e-10);
    }

    #[test]
    fn quad_form_matches_manual() {
        let a = test_hermitian();
        let h = CVec::from_vec(vec![c(1.0, 1.0), c(0.5, -0.25)]);
        let manual = (h.adjoint() * &a * &h)[(0, 0)];
        assert_relative_eq!(quad_form(&h, &a), manual.re, max_relative = 1e-14);
        assert!(manual.im.abs() < 1e-14);
    }
}
