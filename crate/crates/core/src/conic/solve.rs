//! Interior-point solve contract, lowered onto Clarabel, plus a CBF-format
//! dump for cross-checking programs against external solvers.
//!
//! The lowering is mechanical: our convention `A x + b in K` becomes the
//! backend's `-A x + s = b, s in K`; rotated second-order blocks are rotated
//! into plain second-order cones by the orthogonal map
//! (v0, v1, rest) -> ((v0+v1)/sqrt2, (v0-v1)/sqrt2, rest).

use super::{ConeKind, ConicError, ConicProgram, ConicSolution, SolveStats, SolveStatus};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, ExponentialConeT, IPSolver, NonnegativeConeT,
    PSDTriangleConeT, SecondOrderConeT, SolverStatus, SupportedConeT, ZeroConeT,
};

/// Upper bound on interior-point iterations per solve.
pub const MAX_ITERATIONS: u32 = 200;

/// Default feasibility / duality-gap tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

struct TripletMat {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMat {
    fn new(cols: usize) -> Self {
        Self { rows: 0, cols, entries: Vec::new() }
    }

    fn push_row(&mut self, terms: &[(usize, f64)]) -> usize {
        let r = self.rows;
        for &(cidx, v) in terms {
            if v != 0.0 {
                self.entries.push((r, cidx, v));
            }
        }
        self.rows += 1;
        r
    }

    fn to_csc(&self) -> CscMatrix<f64> {
        let mut sorted = self.entries.clone();
        sorted.sort_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0usize; self.cols + 1];
        let mut rowval = Vec::with_capacity(sorted.len());
        let mut nzval = Vec::with_capacity(sorted.len());
        let mut k = 0usize;
        for col in 0..self.cols {
            colptr[col] = rowval.len();
            while k < sorted.len() && sorted[k].1 == col {
                // merge duplicates within a column
                let (r, _, mut v) = sorted[k];
                k += 1;
                while k < sorted.len() && sorted[k].1 == col && sorted[k].0 == r {
                    v += sorted[k].2;
                    k += 1;
                }
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr[self.cols] = rowval.len();
        CscMatrix::new(self.rows, self.cols, colptr, rowval, nzval)
    }
}

impl ConicProgram {
    /// Solve the program to `tol` feasibility/gap accuracy. Returns a
    /// definitive status; the primal point is present iff `Optimal`.
    pub fn solve(&self, tol: f64) -> Result<ConicSolution, ConicError> {
        let n = self.n_vars();
        let mut a = TripletMat::new(n);
        let mut b: Vec<f64> = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let scale = |terms: &[(usize, f64)]| -> Vec<(usize, f64)> {
            terms.iter().map(|&(v, c)| (v, c * self.var_scale(v))).collect()
        };

        for con in self.constraints() {
            match con.cone.kind {
                ConeKind::Zero => cones.push(ZeroConeT(con.cone.dim)),
                ConeKind::Nonnegative => cones.push(NonnegativeConeT(con.cone.dim)),
                ConeKind::SecondOrder => cones.push(SecondOrderConeT(con.cone.dim)),
                ConeKind::RotatedSecondOrder => cones.push(SecondOrderConeT(con.cone.dim)),
                ConeKind::Exponential => cones.push(ExponentialConeT()),
                ConeKind::PsdTriangle => {
                    let side = con.cone.psd_side().expect("validated on insert");
                    cones.push(PSDTriangleConeT(side));
                }
            }
            if con.cone.kind == ConeKind::RotatedSecondOrder {
                let r0 = &con.rows[0];
                let r1 = &con.rows[1];
                let mut sum = r0.scaled(inv_sqrt2);
                sum.add(&r1.scaled(inv_sqrt2));
                let mut diff = r0.scaled(inv_sqrt2);
                diff.add(&r1.scaled(-inv_sqrt2));
                for row in [&sum, &diff] {
                    let neg: Vec<(usize, f64)> =
                        scale(&row.terms).into_iter().map(|(v, c)| (v, -c)).collect();
                    a.push_row(&neg);
                    b.push(row.constant);
                }
                for row in &con.rows[2..] {
                    let neg: Vec<(usize, f64)> =
                        scale(&row.terms).into_iter().map(|(v, c)| (v, -c)).collect();
                    a.push_row(&neg);
                    b.push(row.constant);
                }
            } else {
                for row in &con.rows {
                    let neg: Vec<(usize, f64)> =
                        scale(&row.terms).into_iter().map(|(v, c)| (v, -c)).collect();
                    a.push_row(&neg);
                    b.push(row.constant);
                }
            }
        }

        let p = CscMatrix::<f64>::zeros((n, n));
        let q: Vec<f64> = self
            .objective()
            .iter()
            .enumerate()
            .map(|(j, &c)| c * self.var_scale(j))
            .collect();
        let a_csc = a.to_csc();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(MAX_ITERATIONS)
            .tol_feas(tol)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .build()
            .expect("static settings are valid");
        let mut solver = DefaultSolver::new(&p, &q, &a_csc, &b, &cones, settings)
            .expect("validated program lowers to consistent dimensions");
        solver.solve();

        let (status, reduced_accuracy) = match solver.solution.status {
            SolverStatus::Solved => (SolveStatus::Optimal, false),
            SolverStatus::AlmostSolved => (SolveStatus::Optimal, true),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                (SolveStatus::Infeasible, false)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                (SolveStatus::Unbounded, false)
            }
            SolverStatus::MaxIterations => (SolveStatus::IterationLimit, false),
            _ => (SolveStatus::NumericalTrouble, false),
        };
        let primal = (status == SolveStatus::Optimal).then(|| {
            solver
                .solution
                .x
                .iter()
                .enumerate()
                .map(|(j, &y)| y * self.var_scale(j))
                .collect::<Vec<f64>>()
        });
        Ok(ConicSolution {
            status,
            primal,
            objective_value: solver.solution.obj_val,
            stats: SolveStats {
                iterations: solver.solution.iterations,
                solve_time_s: solver.solution.solve_time,
                reduced_accuracy,
            },
        })
    }

    /// Dump the program in Conic Benchmark Format (CBF). Scalar cones are
    /// emitted as CON blocks in construction order, PSD-triangle blocks as
    /// PSDCON constraints; exponential rows are reversed to CBF's (z, y, x)
    /// ordering.
    pub fn write_cbf(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let mut scalar_rows: Vec<(&super::LinExpr, usize)> = Vec::new(); // (expr, row idx)
        let mut scalar_blocks: Vec<(&str, usize)> = Vec::new();
        let mut psd_blocks: Vec<(&super::Constraint, usize)> = Vec::new(); // (con, side)

        for con in self.constraints() {
            match con.cone.kind {
                ConeKind::PsdTriangle => {
                    let side = con.cone.psd_side().expect("validated");
                    psd_blocks.push((con, side));
                }
                kind => {
                    let name = match kind {
                        ConeKind::Zero => "L=",
                        ConeKind::Nonnegative => "L+",
                        ConeKind::SecondOrder => "Q",
                        ConeKind::RotatedSecondOrder => "QR",
                        ConeKind::Exponential => "EXP",
                        ConeKind::PsdTriangle => unreachable!(),
                    };
                    scalar_blocks.push((name, con.cone.dim));
                    let base = scalar_rows.len();
                    if kind == ConeKind::Exponential {
                        for (i, row) in con.rows.iter().rev().enumerate() {
                            scalar_rows.push((row, base + i));
                        }
                    } else {
                        for (i, row) in con.rows.iter().enumerate() {
                            scalar_rows.push((row, base + i));
                        }
                    }
                }
            }
        }

        writeln!(w, "VER\n3\n")?;
        writeln!(w, "OBJSENSE\nMIN\n")?;
        writeln!(w, "VAR\n{} 1\nF {}\n", self.n_vars(), self.n_vars())?;

        if !scalar_blocks.is_empty() {
            writeln!(w, "CON\n{} {}", scalar_rows.len(), scalar_blocks.len())?;
            for (name, dim) in &scalar_blocks {
                writeln!(w, "{name} {dim}")?;
            }
            writeln!(w)?;
        }

        if !psd_blocks.is_empty() {
            writeln!(w, "PSDCON\n{}", psd_blocks.len())?;
            for (_, side) in &psd_blocks {
                writeln!(w, "{side}")?;
            }
            writeln!(w)?;
        }

        let obj_nnz: Vec<(usize, f64)> = self
            .objective()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        writeln!(w, "OBJACOORD\n{}", obj_nnz.len())?;
        for (j, v) in obj_nnz {
            writeln!(w, "{j} {v:.17e}")?;
        }
        writeln!(w)?;

        let mut acoord = Vec::new();
        let mut bcoord = Vec::new();
        for (expr, row) in &scalar_rows {
            for &(var, coeff) in &expr.terms {
                acoord.push((*row, var, coeff));
            }
            if expr.constant != 0.0 {
                bcoord.push((*row, expr.constant));
            }
        }
        writeln!(w, "ACOORD\n{}", acoord.len())?;
        for (i, j, v) in acoord {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        writeln!(w)?;
        writeln!(w, "BCOORD\n{}", bcoord.len())?;
        for (i, v) in bcoord {
            writeln!(w, "{i} {v:.17e}")?;
        }
        writeln!(w)?;

        // PSD constraints carry per-matrix-entry coefficients; undo the svec
        // sqrt(2) scaling when translating rows back to (r, c) entries.
        let mut hcoord = Vec::new();
        let mut dcoord = Vec::new();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for (block_idx, (con, side)) in psd_blocks.iter().enumerate() {
            let mut idx = 0usize;
            for col in 0..*side {
                for row in 0..=col {
                    let scale = if row == col { 1.0 } else { inv_sqrt2 };
                    let expr = &con.rows[idx];
                    for &(var, coeff) in &expr.terms {
                        hcoord.push((block_idx, var, row, col, coeff * scale));
                    }
                    if expr.constant != 0.0 {
                        dcoord.push((block_idx, row, col, expr.constant * scale));
                    }
                    idx += 1;
                }
            }
        }
        if !psd_blocks.is_empty() {
            writeln!(w, "HCOORD\n{}", hcoord.len())?;
            for (i, j, r, c_, v) in hcoord {
                writeln!(w, "{i} {j} {r} {c_} {v:.17e}")?;
            }
            writeln!(w)?;
            writeln!(w, "DCOORD\n{}", dcoord.len())?;
            for (i, r, c_, v) in dcoord {
                writeln!(w, "{i} {r} {c_} {v:.17e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{ConeSpec, ConicProgram, LinExpr, SolveStatus};

    #[test]
    fn cbf_dump_contains_expected_sections() {
        let mut prog = ConicProgram::new();
        let t = prog.add_var("t");
        let x11 = prog.add_var("x11");
        let x21 = prog.add_var("x21");
        let x22 = prog.add_var("x22");
        prog.set_objective(t, 1.0);
        prog.add_nonneg(LinExpr::term(t, 1.0));
        prog.add_constraint(
            vec![LinExpr::term(t, 1.0), LinExpr::constant(1.0), LinExpr::constant(2.0)],
            ConeSpec::rotated_second_order(3),
        )
        .unwrap();
        prog.add_constraint(
            vec![
                LinExpr::term(x11, 1.0),
                LinExpr::term(x21, std::f64::consts::SQRT_2),
                LinExpr::term(x22, 1.0),
            ],
            ConeSpec::psd_triangle(2),
        )
        .unwrap();
        let mut buf = Vec::new();
        prog.write_cbf(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for section in ["VER", "OBJSENSE", "VAR", "CON", "QR", "PSDCON", "ACOORD", "HCOORD"] {
            assert!(text.contains(section), "missing {section} in:\n{text}");
        }
    }

    #[test]
    fn solve_reports_iteration_stats() {
        let mut prog = ConicProgram::new();
        let x = prog.add_var("x");
        prog.set_objective(x, 1.0);
        let mut row = LinExpr::constant(-1.0);
        row.push(x, 1.0);
        prog.add_nonneg(row);
        let sol = prog.solve(1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.stats.iterations > 0);
    }
}
