use isac_core::conic::{ConicProgram, HermitianBlock, LinExpr};
use isac_core::linalg::{c, outer, CVec};
use clarabel::algebra::CscMatrix;
use clarabel::solver::*;

fn main() {
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

    // check feasibility of the hand-constructed point
    let norm4 = h.norm_squared() * h.norm_squared();
    let xmat = &hh * c(1.0 / norm4, 0.0);
    let mut x = vec![0.0; prog.n_vars()];
    block.store(&xmat, &mut x);
    println!("hand point residual: {}", prog.membership_residual(&x));

    // dense construction of the same program
    let n = prog.n_vars();
    let mut rows_dense: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    for con in prog.constraints() {
        for r in &con.rows {
            let mut dense = vec![0.0; n];
            for &(v, cf) in &r.terms {
                dense[v] -= cf;
            }
            rows_dense.push(dense);
            b.push(r.constant);
        }
    }
    let nrows = rows_dense.len();
    let mut colptr = vec![0usize];
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    for col in 0..n {
        for (r, row) in rows_dense.iter().enumerate() {
            if row[col] != 0.0 {
                rowval.push(r);
                nzval.push(row[col]);
            }
        }
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(nrows, n, colptr, rowval, nzval);
    let p = CscMatrix::<f64>::zeros((n, n));
    let q = prog.objective().to_vec();
    let cones = [NonnegativeConeT(1), PSDTriangleConeT(4)];
    let settings = DefaultSettingsBuilder::default().verbose(false).build().unwrap();
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings).unwrap();
    solver.solve();
    println!("dense-built: {:?} obj={} want={}", solver.solution.status, solver.solution.obj_val, 1.0/h.norm_squared());
}
