use isac_core::channel::build_channels;
use isac_core::config::{default_scenario, derive_stream, ChannelMode, Profile};
use isac_core::follower::{build_subproblem, LocalPoint, SubproblemOptions};
use isac_core::linalg::{c, outer, CMat};

fn main() {
    let mut cfg = default_scenario(Profile::Desk);
    cfg.thresholds.rho_dl = 0.01;
    cfg.thresholds.rho_ul = 0.01;
    let mut rng = derive_stream(cfg.seed, "channel");
    let ch = build_channels([20.0, 20.0, 50.0], &cfg, ChannelMode::Expected, &mut rng).unwrap();
    println!("|h_ak[0]|^2 = {:.3e}", ch.h_ak[0].norm_squared());
    println!("|h_le[0]|^2 = {:.3e}", ch.h_le[0].norm_sqr());
    println!("zeta0_sq = {:.3e}", ch.zeta0_sq);
    println!("d_ae = {:.2}", ch.d_ae);

    let v0: Vec<CMat> = ch.h_ak.iter().map(|h| {
        let u = h / c(h.norm(), 0.0);
        outer(&u) * c(1e-2, 0.0)
    }).collect();
    let w0 = CMat::identity(4, 4) * c(2.5e-3, 0.0);
    let p0 = vec![1e-2; 2];
    let lo = LocalPoint::from_allocation(&ch, v0, w0, p0).unwrap();
    println!("mu = {:?}", lo.mu);
    println!("omega = {:?}", lo.omega);
    println!("t = {:?}", lo.t);
    println!("s = {:?}", lo.s);
    println!("iota = {:?}", lo.iota);
    println!("p_tilde = {:?}", lo.p_tilde);

    let (prog, vars) = build_subproblem(&ch, &lo, &cfg, SubproblemOptions::elastic(true, 1.0));
    // coefficient magnitude stats
    let mut min_c = f64::INFINITY;
    let mut max_c: f64 = 0.0;
    for con in prog.constraints() {
        for r in &con.rows {
            for &(_, v) in &r.terms {
                let a = v.abs();
                if a > 0.0 { min_c = min_c.min(a); max_c = max_c.max(a); }
            }
        }
    }
    println!("coeff range: [{min_c:.3e}, {max_c:.3e}]  n_vars={} n_cons={}", prog.n_vars(), prog.n_constraints());
    let sol = prog.solve(1e-8).unwrap();
    println!("status {:?} obj {:.6e} iters {}", sol.status, sol.objective_value, sol.stats.iterations);
    if let Some(x) = &sol.primal {
        let ex = vars.extract(x);
        println!("e = {:?}", ex.elastic);
    }
}
