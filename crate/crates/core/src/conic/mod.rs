//! Solver-agnostic conic-program data model.
//!
//! A program is a linear objective over `n_vars` real variables plus a list
//! of constraints, each an affine map `A x + b` required to lie in one cone
//! (nonnegative, second-order, rotated second-order, exponential, zero, or
//! PSD-triangle). Complex Hermitian matrix variables enter through the
//! real-symmetric embedding in [`embed`]; the solve contract is implemented
//! by lowering onto an interior-point backend in [`solve`]. Cone membership
//! can always be re-verified independently of the backend via
//! [`ConicProgram::membership_residual`].

pub mod embed;
mod solve;

pub use embed::HermitianBlock;
pub use solve::{DEFAULT_TOL, MAX_ITERATIONS};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// All rows equal zero.
    Zero,
    /// All rows nonnegative.
    Nonnegative,
    /// v0 >= ||v_1..||.
    SecondOrder,
    /// 2 v0 v1 >= ||v_2..||^2 with v0, v1 >= 0.
    RotatedSecondOrder,
    /// y exp(x/y) <= z with y > 0, rows ordered (x, y, z).
    Exponential,
    /// Scaled upper-triangle (svec, column-major) of a symmetric PSD matrix;
    /// off-diagonal entries carry a sqrt(2) factor. dim = m(m+1)/2.
    PsdTriangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub dim: usize,
}

impl ConeSpec {
    pub fn zero(dim: usize) -> Self {
        Self { kind: ConeKind::Zero, dim }
    }
    pub fn nonnegative(dim: usize) -> Self {
        Self { kind: ConeKind::Nonnegative, dim }
    }
    pub fn second_order(dim: usize) -> Self {
        Self { kind: ConeKind::SecondOrder, dim }
    }
    pub fn rotated_second_order(dim: usize) -> Self {
        Self { kind: ConeKind::RotatedSecondOrder, dim }
    }
    pub fn exponential() -> Self {
        Self { kind: ConeKind::Exponential, dim: 3 }
    }
    pub fn psd_triangle(side: usize) -> Self {
        Self { kind: ConeKind::PsdTriangle, dim: side * (side + 1) / 2 }
    }

    /// Side length m of a PSD-triangle block, if dim = m(m+1)/2.
    pub fn psd_side(&self) -> Option<usize> {
        let m = ((-1.0 + (1.0 + 8.0 * self.dim as f64).sqrt()) / 2.0).round() as usize;
        (m * (m + 1) / 2 == self.dim).then_some(m)
    }
}

/// Sparse affine scalar expression over program variables.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: vec![], constant: c }
    }

    pub fn term(var: usize, coeff: f64) -> Self {
        Self { terms: vec![(var, coeff)], constant: 0.0 }
    }

    pub fn push(&mut self, var: usize, coeff: f64) -> &mut Self {
        if coeff != 0.0 {
            self.terms.push((var, coeff));
        }
        self
    }

    pub fn add(&mut self, other: &LinExpr) -> &mut Self {
        self.terms.extend(other.terms.iter().cloned());
        self.constant += other.constant;
        self
    }

    pub fn scaled(&self, factor: f64) -> LinExpr {
        LinExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * factor)).collect(),
            constant: self.constant * factor,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub rows: Vec<LinExpr>,
    pub cone: ConeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
    IterationLimit,
}

#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub iterations: u32,
    pub solve_time_s: f64,
    /// Backend reported reduced accuracy (treated as optimal).
    pub reduced_accuracy: bool,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Present iff status is `Optimal`.
    pub primal: Option<Vec<f64>>,
    pub objective_value: f64,
    pub stats: SolveStats,
}

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("constraint rows ({rows}) do not match cone dimension ({dim})")]
    DimensionMismatch { rows: usize, dim: usize },
    #[error("PSD-triangle dimension {0} is not of the form m(m+1)/2")]
    BadTriangleDim(usize),
    #[error("exponential cone blocks must have dimension 3, got {0}")]
    BadExponentialDim(usize),
    #[error("variable index {0} out of range ({1} variables)")]
    BadVariable(usize, usize),
    #[error("no conic backend is registered for this build")]
    BackendUnavailable,
}

/// Linear conic program: min c^T x s.t. each affine block lies in its cone.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    objective: Vec<f64>,
    var_names: Vec<String>,
    var_scale: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn var_name(&self, i: usize) -> &str {
        &self.var_names[i]
    }

    /// Add one scalar variable with zero objective coefficient.
    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.objective.push(0.0);
        self.var_names.push(name.into());
        self.var_scale.push(1.0);
        self.objective.len() - 1
    }

    /// Attach a positive magnitude hint to a variable. The solve path
    /// substitutes x = scale * y so the backend works on O(1) quantities;
    /// results are reported in original units. Purely a conditioning aid.
    pub fn set_var_scale(&mut self, var: usize, scale: f64) {
        debug_assert!(scale.is_finite() && scale > 0.0);
        self.var_scale[var] = scale;
    }

    pub fn var_scale(&self, var: usize) -> f64 {
        self.var_scale[var]
    }

    /// Add `count` variables named `prefix_0..`, returning the first index.
    pub fn add_vars(&mut self, count: usize, prefix: &str) -> usize {
        let base = self.objective.len();
        for i in 0..count {
            self.add_var(format!("{prefix}_{i}"));
        }
        base
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn add_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] += coeff;
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    /// Append a constraint `rows in cone`; returns its id.
    pub fn add_constraint(&mut self, rows: Vec<LinExpr>, cone: ConeSpec) -> Result<usize, ConicError> {
        if rows.len() != cone.dim {
            return Err(ConicError::DimensionMismatch { rows: rows.len(), dim: cone.dim });
        }
        match cone.kind {
            ConeKind::PsdTriangle if cone.psd_side().is_none() => {
                return Err(ConicError::BadTriangleDim(cone.dim));
            }
            ConeKind::Exponential if cone.dim != 3 => {
                return Err(ConicError::BadExponentialDim(cone.dim));
            }
            _ => {}
        }
        let n = self.n_vars();
        for r in &rows {
            for &(v, _) in &r.terms {
                if v >= n {
                    return Err(ConicError::BadVariable(v, n));
                }
            }
        }
        self.constraints.push(Constraint { rows, cone });
        Ok(self.constraints.len() - 1)
    }

    /// Shorthand: affine expression >= 0.
    pub fn add_nonneg(&mut self, row: LinExpr) -> usize {
        self.add_constraint(vec![row], ConeSpec::nonnegative(1)).unwrap()
    }

    /// Worst cone-membership violation of a candidate point, evaluated
    /// directly from the cone definitions (independent of any backend).
    /// Residuals are absolute, with quadratic cones checked on their natural
    /// scale.
    pub fn membership_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for con in &self.constraints {
            let v: Vec<f64> = con.rows.iter().map(|r| r.eval(x)).collect();
            let res = cone_residual(&v, con.cone);
            worst = worst.max(res);
        }
        worst
    }

    /// Count constraints of a given cone kind (structure tests).
    pub fn count_cones(&self, kind: ConeKind) -> usize {
        self.constraints.iter().filter(|c| c.cone.kind == kind).count()
    }
}

/// How far `v` sits outside `cone`, normalized by the block's own magnitude
/// (so a residual of 1e-8 means the same thing on watt-scale and
/// gain-scale rows). Zero when inside.
pub fn cone_residual(v: &[f64], cone: ConeSpec) -> f64 {
    let scale_of = |vals: &[f64]| vals.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    match cone.kind {
        ConeKind::Zero => v.iter().fold(0.0f64, |m, &x| m.max(x.abs())) / scale_of(v),
        ConeKind::Nonnegative => v.iter().fold(0.0f64, |m, &x| m.max(-x / x.abs().max(1.0))),
        ConeKind::SecondOrder => {
            let tail: f64 = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            (tail - v[0]).max(0.0) / tail.max(1.0)
        }
        ConeKind::RotatedSecondOrder => {
            let tail_sq: f64 = v[2..].iter().map(|x| x * x).sum();
            let prod = 2.0 * v[0].max(0.0) * v[1].max(0.0);
            let sign_res = (-v[0]).max(-v[1]).max(0.0) / scale_of(&v[..2]);
            let quad_res = (tail_sq - prod).max(0.0) / tail_sq.max(prod).max(1.0);
            sign_res.max(quad_res)
        }
        ConeKind::Exponential => {
            let (x, y, z) = (v[0], v[1], v[2]);
            if y > 0.0 {
                (y * (x / y).exp() - z).max(0.0) / z.abs().max(1.0)
            } else if y >= -1e-12 {
                // closure: y = 0 requires x <= 0 and z >= 0
                x.max(-z).max(0.0) / scale_of(v)
            } else {
                -y / y.abs().max(1.0)
            }
        }
        ConeKind::PsdTriangle => {
            let m = cone.psd_side().expect("validated on insert");
            let mat = unsvec(v, m);
            let sym = nalgebra::DMatrix::<f64>::from_fn(m, m, |i, j| mat[(i, j)]);
            let eig = sym.symmetric_eigen();
            let scale = eig.eigenvalues.amax().max(1.0);
            (-eig.eigenvalues.min()).max(0.0) / scale
        }
    }
}

/// Expand a scaled upper-triangle (svec) vector into the full symmetric
/// matrix. Column-major upper triangle; off-diagonals divided by sqrt(2).
pub fn unsvec(v: &[f64], m: usize) -> nalgebra::DMatrix<f64> {
    let mut mat = nalgebra::DMatrix::zeros(m, m);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut idx = 0;
    for j in 0..m {
        for i in 0..=j {
            let val = if i == j { v[idx] } else { v[idx] * inv_sqrt2 };
            mat[(i, j)] = val;
            mat[(j, i)] = val;
            idx += 1;
        }
    }
    mat
}

/// Index of entry (i, j), i <= j, inside a column-major upper-triangle svec.
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}
