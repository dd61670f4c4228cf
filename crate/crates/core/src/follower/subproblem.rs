//! Assembly of the convex per-iteration subproblem.
//!
//! Given a local point, the nonconvex resource-optimization problem is
//! replaced by a conic program over the Hermitian-embedded covariances
//! (V_1..V_K, W), uplink powers p, and the slack families (mu, omega, t, s,
//! iota). Quadratic-over-linear terms become rotated second-order cones, the
//! exact rate logs become exponential cones, the first-order surrogates
//! (f1, linearized squares, the matrix-fractional bound) are affine rows,
//! and the sensing constraint is a single linear row in S = sum V_k + W.
//!
//! With `elastic` set, a single nonnegative infeasibility variable relaxes
//! the two secrecy-rate thresholds and the sensing requirement, and the
//! objective becomes (min e) plus a small power regularizer; this is the
//! phase-1 program used to certify feasibility and seed the local point.

use super::LocalPoint;
use crate::channel::NetworkChannels;
use crate::config::ScenarioConfig;
use crate::conic::{ConeSpec, ConicProgram, HermitianBlock, LinExpr};
use crate::linalg::{c, hermitize, inv_sqrt_psd, outer, trace_re, CMat};

/// Weight of the power term in the phase-1 objective; keeps the elastic
/// solution lean without competing with the infeasibility variable.
pub const ELASTIC_POWER_REG: f64 = 1e-4;

/// Eigenvalue floor used when forming Sigma_n^(-1/2).
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct SubproblemOptions {
    /// Phase-1 elastic feasibility program when true.
    pub elastic: bool,
    /// When false, the W block is omitted entirely (no-AN benchmark).
    pub with_an: bool,
    /// Multiplier on the power-variable magnitude hints. Phase 1 escalates
    /// this when the optimum sits far above the seed allocation (e.g. when
    /// certifying infeasibility of an unreachable threshold).
    pub power_hint_boost: f64,
}

impl SubproblemOptions {
    pub fn main(with_an: bool) -> Self {
        Self { elastic: false, with_an, power_hint_boost: 1.0 }
    }

    pub fn elastic(with_an: bool, power_hint_boost: f64) -> Self {
        Self { elastic: true, with_an, power_hint_boost }
    }
}

/// Variable layout of one subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemVars {
    pub v_blocks: Vec<HermitianBlock>,
    pub w_block: Option<HermitianBlock>,
    pub p_base: usize,
    pub mu_base: usize,
    pub omega_base: usize,
    pub t_base: usize,
    pub s_base: usize,
    pub iota_base: usize,
    pub elastic: Option<usize>,
    pub k_dl: usize,
    pub l_ul: usize,
    pub m_t: usize,
}

/// Raw primal values pulled out of a solved subproblem.
#[derive(Debug, Clone)]
pub struct PrimalExtract {
    pub v: Vec<CMat>,
    pub w: CMat,
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub iota: Vec<f64>,
    pub elastic: Option<f64>,
}

impl SubproblemVars {
    pub fn extract(&self, x: &[f64]) -> PrimalExtract {
        let v: Vec<CMat> = self.v_blocks.iter().map(|b| b.extract(x)).collect();
        let w = match &self.w_block {
            Some(b) => b.extract(x),
            None => CMat::zeros(self.m_t, self.m_t),
        };
        let range = |base: usize, n: usize| -> Vec<f64> { x[base..base + n].to_vec() };
        PrimalExtract {
            v,
            w,
            p: range(self.p_base, self.l_ul).iter().map(|&p| p.max(0.0)).collect(),
            mu: range(self.mu_base, self.k_dl + 1),
            omega: range(self.omega_base, 2 * self.l_ul),
            t: range(self.t_base, self.k_dl + 1),
            s: range(self.s_base, self.l_ul),
            iota: range(self.iota_base, self.l_ul),
            elastic: self.elastic.map(|i| x[i]),
        }
    }
}

/// Affine coefficients of f1(a, b; a_lo, b_lo) = (a_lo/b_lo^2)(2 b_lo a - a_lo b),
/// the tangent lower bound of a^2/b at the local point.
fn f1_coeffs(a_lo: f64, b_lo: f64) -> (f64, f64) {
    let ratio = a_lo / (b_lo * b_lo);
    (2.0 * ratio * b_lo, -ratio * a_lo)
}

struct Builder {
    vars: SubproblemVars,
    /// Local-point values of every program variable, used to balance the
    /// rotated second-order cones and to derive per-variable magnitude
    /// hints for the backend.
    x_lo: Vec<f64>,
}

impl Builder {
    /// Re tr(M S) with S = sum_k V_k (+ W), as an affine expression.
    fn trace_s(&self, m: &CMat) -> LinExpr {
        let mut e = LinExpr::default();
        for b in &self.vars.v_blocks {
            e.add(&b.inner_product_expr(m));
        }
        if let Some(w) = &self.vars.w_block {
            e.add(&w.inner_product_expr(m));
        }
        e
    }

    /// Re tr(M W), empty when the no-AN benchmark removed W.
    fn trace_w(&self, m: &CMat) -> LinExpr {
        match &self.vars.w_block {
            Some(w) => w.inner_product_expr(m),
            None => LinExpr::default(),
        }
    }

    fn p_var(&self, l: usize) -> usize {
        self.vars.p_base + l
    }
    fn mu_var(&self, i: usize) -> usize {
        self.vars.mu_base + i
    }
    fn omega_var(&self, i: usize) -> usize {
        self.vars.omega_base + i
    }
    fn t_var(&self, i: usize) -> usize {
        self.vars.t_base + i
    }
    fn s_var(&self, l: usize) -> usize {
        self.vars.s_base + l
    }
    fn iota_var(&self, l: usize) -> usize {
        self.vars.iota_base + l
    }

    /// sum_{l' != l} |coef_l'|^2 p_l' as an affine expression.
    fn weighted_powers_excluding(&self, skip: Option<usize>, weights: &[f64]) -> LinExpr {
        let mut e = LinExpr::default();
        for l in 0..self.vars.l_ul {
            if Some(l) != skip {
                e.push(self.p_var(l), weights[l]);
            }
        }
        e
    }

    /// Add the rotated second-order constraint 2 a b >= c^2 with the first
    /// two rows rebalanced around their local-point values: 2 a b is
    /// invariant under (a, b) -> (a/sigma, b sigma), so sigma =
    /// sqrt(a_lo/b_lo) equalizes the row magnitudes the backend sees.
    fn add_rsoc(&self, prog: &mut ConicProgram, a: LinExpr, b: LinExpr, c_row: LinExpr) {
        let a_lo = a.eval(&self.x_lo).max(1e-12);
        let b_lo = b.eval(&self.x_lo).max(1e-12);
        let sigma = (a_lo / b_lo).sqrt().clamp(1e-8, 1e8);
        prog.add_constraint(
            vec![a.scaled(1.0 / sigma), b.scaled(sigma), c_row],
            ConeSpec::rotated_second_order(3),
        )
        .expect("rsoc rows");
    }
}

/// Build the conic subproblem at the given local point.
pub fn build_subproblem(
    ch: &NetworkChannels,
    lo: &LocalPoint,
    cfg: &ScenarioConfig,
    opts: SubproblemOptions,
) -> (ConicProgram, SubproblemVars) {
    let k_dl = ch.h_ak.len();
    let l_ul = ch.h_la.len();
    let m_t = ch.h_ae.len();
    let mut prog = ConicProgram::new();

    let v_blocks: Vec<HermitianBlock> = (0..k_dl)
        .map(|k| HermitianBlock::register(&mut prog, m_t, &format!("V{k}")))
        .collect();
    let w_block = opts.with_an.then(|| HermitianBlock::register(&mut prog, m_t, "W"));
    let p_base = prog.add_vars(l_ul, "p");
    let mu_base = prog.add_vars(k_dl + 1, "mu");
    let omega_base = prog.add_vars(2 * l_ul, "omega");
    let t_base = prog.add_vars(k_dl + 1, "t");
    let s_base = prog.add_vars(l_ul, "s");
    let iota_base = prog.add_vars(l_ul, "iota");
    let elastic = opts.elastic.then(|| prog.add_var("e"));

    let vars = SubproblemVars {
        v_blocks,
        w_block,
        p_base,
        mu_base,
        omega_base,
        t_base,
        s_base,
        iota_base,
        elastic,
        k_dl,
        l_ul,
        m_t,
    };

    // materialize the local point over the variable layout
    let mut x_lo = vec![0.0; prog.n_vars()];
    for (k, blk) in vars.v_blocks.iter().enumerate() {
        blk.store(&lo.v[k], &mut x_lo);
    }
    if let Some(w) = &vars.w_block {
        w.store(&lo.w, &mut x_lo);
    }
    let fill = |x: &mut [f64], base: usize, vals: &[f64]| {
        x[base..base + vals.len()].copy_from_slice(vals);
    };
    fill(&mut x_lo, vars.p_base, &lo.p);
    fill(&mut x_lo, vars.mu_base, &lo.mu);
    fill(&mut x_lo, vars.omega_base, &lo.omega);
    fill(&mut x_lo, vars.t_base, &lo.t);
    fill(&mut x_lo, vars.s_base, &lo.s);
    fill(&mut x_lo, vars.iota_base, &lo.iota);
    if let Some(e) = vars.elastic {
        x_lo[e] = 1.0;
    }

    // magnitude hints: covariance blocks share one scale, scalars use their
    // own local value
    let boost = opts.power_hint_boost.max(1.0);
    for (k, blk) in vars.v_blocks.iter().enumerate() {
        let s = (trace_re(&lo.v[k]) / m_t as f64).max(1e-10) * boost;
        for i in blk.base..blk.base + m_t * m_t {
            prog.set_var_scale(i, s);
        }
    }
    if let Some(w) = &vars.w_block {
        let s = (trace_re(&lo.w) / m_t as f64)
            .max(lo.p.iter().copied().fold(0.0, f64::max) * 1e-2)
            .max(1e-10)
            * boost;
        for i in w.base..w.base + m_t * m_t {
            prog.set_var_scale(i, s);
        }
    }
    for (j, &v) in x_lo.iter().enumerate() {
        if j >= vars.p_base {
            prog.set_var_scale(j, v.abs().max(1e-10));
        }
    }
    for l in 0..l_ul {
        prog.set_var_scale(vars.p_base + l, lo.p[l].abs().max(1e-10) * boost);
    }
    if let Some(e) = vars.elastic {
        // the infeasibility variable lives on the scale of the thresholds
        let s = cfg.thresholds.rho_dl.max(cfg.thresholds.rho_ul).max(1.0);
        prog.set_var_scale(e, s);
    }

    let b = Builder { vars, x_lo };

    // objective: network power, or the infeasibility variable (plus a small
    // power regularizer) in the elastic phase
    let power_weight = if opts.elastic { ELASTIC_POWER_REG } else { 1.0 };
    for blk in &b.vars.v_blocks {
        for i in 0..m_t {
            prog.add_objective(blk.diag(i), power_weight);
        }
    }
    if let Some(w) = &b.vars.w_block {
        for i in 0..m_t {
            prog.add_objective(w.diag(i), power_weight);
        }
    }
    for l in 0..l_ul {
        prog.add_objective(b.p_var(l), power_weight);
    }
    if let Some(e) = b.vars.elastic {
        prog.add_objective(e, 1.0);
    }

    let ln2 = std::f64::consts::LN_2;
    let h_lk_sq: Vec<Vec<f64>> = ch
        .h_lk
        .iter()
        .map(|row| row.iter().map(|h| h.norm_sqr()).collect())
        .collect();
    let h_le_sq: Vec<f64> = ch.h_le.iter().map(|h| h.norm_sqr()).collect();

    // --- downlink user SINR floor: gamma_k >= mu_k -------------------------
    for k in 0..k_dl {
        // (a1) interference + noise <= f1(t_k, mu_k)
        let (c_t, c_mu) = f1_coeffs(lo.t[k], lo.mu[k]);
        let mut row = LinExpr::constant(-ch.sigma_dl_sq);
        row.push(b.t_var(k), c_t);
        row.push(b.mu_var(k), c_mu);
        for l in 0..l_ul {
            row.push(b.p_var(l), -h_lk_sq[l][k]);
        }
        for (kp, blk) in b.vars.v_blocks.iter().enumerate() {
            if kp != k {
                row.add(&blk.inner_product_expr(&ch.h_ak_outer[k]).scaled(-1.0));
            }
        }
        row.add(&b.trace_w(&ch.h_ak_outer[k]).scaled(-1.0));
        prog.add_nonneg(row);

        // (a2) t_k^2 <= tr(V_k H_ak): RSOC (tr, 1/2, t_k)
        let tr_vk = b.vars.v_blocks[k].inner_product_expr(&ch.h_ak_outer[k]);
        b.add_rsoc(
            &mut prog,
            tr_vk,
            LinExpr::constant(0.5),
            LinExpr::term(b.t_var(k), 1.0),
        );
    }

    // --- eavesdropper downlink SINR cap: gamma_eve_dl <= mu_{K+1} ----------
    {
        // (b1) t_{K+1}^2 / mu_{K+1} <= sum p |h_le|^2 + tr(W H_ae) + sigma_e^2
        let mut denom = LinExpr::constant(ch.sigma_e_sq);
        for l in 0..l_ul {
            denom.push(b.p_var(l), h_le_sq[l]);
        }
        denom.add(&b.trace_w(&ch.h_ae_outer));
        b.add_rsoc(
            &mut prog,
            denom,
            LinExpr::term(b.mu_var(k_dl), 0.5),
            LinExpr::term(b.t_var(k_dl), 1.0),
        );

        // (b2) sum_k tr(V_k H_ae) <= -t_lo^2 + 2 t_lo t_{K+1}
        let t_lo = lo.t[k_dl];
        let mut row = LinExpr::constant(-t_lo * t_lo);
        row.push(b.t_var(k_dl), 2.0 * t_lo);
        for blk in &b.vars.v_blocks {
            row.add(&blk.inner_product_expr(&ch.h_ae_outer).scaled(-1.0));
        }
        prog.add_nonneg(row);
    }

    // --- downlink secrecy-rate floor (exact log via exponential cone) ------
    // ln(1 + mu_k) >= ln2 rho_DL + ln(1 + mu_lo) + (mu_{K+1} - mu_lo)/(1 + mu_lo) [- ln2 e]
    for k in 0..k_dl {
        let mu_lo = lo.mu[k_dl];
        let mut w_expr = LinExpr::constant(
            ln2 * cfg.thresholds.rho_dl + (1.0 + mu_lo).ln() - mu_lo / (1.0 + mu_lo),
        );
        w_expr.push(b.mu_var(k_dl), 1.0 / (1.0 + mu_lo));
        if let Some(e) = b.vars.elastic {
            w_expr.push(e, -ln2);
        }
        let mut z = LinExpr::constant(1.0);
        z.push(b.mu_var(k), 1.0);
        prog.add_constraint(vec![w_expr, LinExpr::constant(1.0), z], ConeSpec::exponential())
            .expect("exp rows");
    }

    // --- eavesdropper uplink SINR cap: gamma_eve_ul_l <= omega_{L+l} -------
    for l in 0..l_ul {
        // (d1) s_l^2 <= sum_{l' != l} p |h_le|^2 + tr(S H_ae) + sigma_e^2
        let mut denom = LinExpr::constant(ch.sigma_e_sq);
        denom.add(&b.weighted_powers_excluding(Some(l), &h_le_sq));
        denom.add(&b.trace_s(&ch.h_ae_outer));
        b.add_rsoc(
            &mut prog,
            denom,
            LinExpr::constant(0.5),
            LinExpr::term(b.s_var(l), 1.0),
        );

        // (d2) 1/omega_{L+l} <= f1(s_l, p_tilde_l): RSOC (omega, f1/2, 1)
        let (c_s, c_pt) = f1_coeffs(lo.s[l], lo.p_tilde[l]);
        let mut f1_half = LinExpr::default();
        f1_half.push(b.s_var(l), 0.5 * c_s);
        f1_half.push(b.p_var(l), 0.5 * c_pt * h_le_sq[l]);
        b.add_rsoc(
            &mut prog,
            LinExpr::term(b.omega_var(l_ul + l), 1.0),
            f1_half,
            LinExpr::constant(1.0),
        );
    }

    // --- uplink secrecy-rate floor (exact log via exponential cone) --------
    for l in 0..l_ul {
        let om_lo = lo.omega[l_ul + l];
        let mut w_expr = LinExpr::constant(
            ln2 * cfg.thresholds.rho_ul + (1.0 + om_lo).ln() - om_lo / (1.0 + om_lo),
        );
        w_expr.push(b.omega_var(l_ul + l), 1.0 / (1.0 + om_lo));
        if let Some(e) = b.vars.elastic {
            w_expr.push(e, -ln2);
        }
        let mut z = LinExpr::constant(1.0);
        z.push(b.omega_var(l), 1.0);
        prog.add_constraint(vec![w_expr, LinExpr::constant(1.0), z], ConeSpec::exponential())
            .expect("exp rows");
    }

    // --- sensing CRLB: C^2/(8 gamma^2 B^2 rho_est) <= tr(Y S Y^H) ----------
    {
        let sigma_inv_sqrt = inv_sqrt_psd(&ch.sigma_n, SIGMA_FLOOR);
        let y = &sigma_inv_sqrt * &ch.a0 * c(ch.zeta0_sq.sqrt(), 0.0);
        let g_sense = hermitize(&(y.adjoint() * &y));
        let c_light = crate::SPEED_OF_LIGHT;
        let band = cfg.channel.bandwidth_hz;
        let required =
            c_light * c_light / (8.0 * cfg.channel.gamma_shape_sq * band * band * cfg.thresholds.rho_est);
        let mut row = LinExpr::constant(-required);
        row.add(&b.trace_s(&g_sense));
        if let Some(e) = b.vars.elastic {
            // relaxes to tr >= required (1 - e)
            row.push(e, required);
        }
        prog.add_nonneg(row);
    }

    // --- uplink SINR floor via the matrix-fractional bound ------------------
    for l in 0..l_ul {
        // (g1) iota_l^2 / p_l <= 2 h^H Psi_lo^-1 h - b^H Psi(p, S) b
        let b_l = &lo.psi_inv[l] * &ch.h_la[l];
        let two_hb = 2.0 * (ch.h_la[l].adjoint() * &b_l)[(0, 0)].re;
        let noise_term = (b_l.adjoint() * &ch.sigma_n * &b_l)[(0, 0)].re;
        let mut g_expr = LinExpr::constant(two_hb - noise_term);
        let cross: Vec<f64> = (0..l_ul)
            .map(|lp| (b_l.adjoint() * &ch.h_la[lp])[(0, 0)].norm_sqr())
            .collect();
        g_expr.add(&b.weighted_powers_excluding(Some(l), &cross).scaled(-1.0));
        let a0_b = ch.a0.adjoint() * &b_l;
        let m_echo = hermitize(&(outer(&a0_b) * c(ch.zeta0_sq, 0.0)));
        g_expr.add(&b.trace_s(&m_echo).scaled(-1.0));
        b.add_rsoc(
            &mut prog,
            g_expr,
            LinExpr::term(b.p_var(l), 0.5),
            LinExpr::term(b.iota_var(l), 1.0),
        );

        // (g2) omega_l <= -iota_lo^2 + 2 iota_lo iota_l
        let i_lo = lo.iota[l];
        let mut row = LinExpr::constant(-i_lo * i_lo);
        row.push(b.iota_var(l), 2.0 * i_lo);
        row.push(b.omega_var(l), -1.0);
        prog.add_nonneg(row);
    }

    // --- cone memberships of the variables themselves -----------------------
    for blk in &b.vars.v_blocks {
        blk.add_psd_constraint(&mut prog);
    }
    if let Some(w) = &b.vars.w_block {
        w.add_psd_constraint(&mut prog);
    }
    let mut nonneg_rows: Vec<LinExpr> = Vec::new();
    for l in 0..l_ul {
        nonneg_rows.push(LinExpr::term(b.p_var(l), 1.0));
    }
    for i in 0..=k_dl {
        nonneg_rows.push(LinExpr::term(b.mu_var(i), 1.0));
        nonneg_rows.push(LinExpr::term(b.t_var(i), 1.0));
    }
    for i in 0..2 * l_ul {
        nonneg_rows.push(LinExpr::term(b.omega_var(i), 1.0));
    }
    for l in 0..l_ul {
        nonneg_rows.push(LinExpr::term(b.s_var(l), 1.0));
        nonneg_rows.push(LinExpr::term(b.iota_var(l), 1.0));
    }
    if let Some(e) = b.vars.elastic {
        nonneg_rows.push(LinExpr::term(e, 1.0));
    }
    let dim = nonneg_rows.len();
    prog.add_constraint(nonneg_rows, ConeSpec::nonnegative(dim))
        .expect("nonneg rows");

    (prog, b.vars)
}
