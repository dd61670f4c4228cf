//! Player 1's per-timeslot resource optimization.
//!
//! The pipeline mirrors the convex-solution algorithm: a phase-1 elastic
//! feasibility program seeds a strictly positive local point (or certifies
//! infeasibility via the residual infeasibility variable), then the main
//! loop alternates between assembling the convex subproblem at the current
//! local point, solving it, and moving the local point to the new optimum,
//! until the fractional decrease of the network power drops below the
//! convergence threshold. Beams are recovered from the dominant eigenpairs
//! of the returned downlink covariances; the relaxation is tight, so a
//! rank-one violation is a bug signal rather than a recovery path.

mod subproblem;

pub use subproblem::{build_subproblem, PrimalExtract, SubproblemOptions, SubproblemVars};

use crate::channel::NetworkChannels;
use crate::config::ScenarioConfig;
use crate::conic::{ConicError, SolveStatus};
use crate::linalg::{dominant_eigpair, inv_hpd, min_eig, outer, quad_form, trace_re, CMat, CVec};
use crate::metrics::{self, FollowerSolution, MetricsError};
use thiserror::Error;

/// Floor applied to slack local values; keeps the f1 denominators away from
/// zero after a solver returns an exactly-zero slack.
const SLACK_FLOOR: f64 = 1e-9;

/// Initial allocation scale (W) used to seed phase 1.
const INIT_POWER: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum FollowerError {
    #[error("scenario infeasible: phase-1 elastic residual {elastic:.3e} above tolerance")]
    InfeasibleScenario { elastic: f64 },
    #[error("conic backend failed mid-loop with status {status:?}")]
    SolverFailure { status: SolveStatus },
    #[error("downlink covariance {k} is not rank-one: eigenvalue ratio {ratio:.3e}")]
    RankOneViolation { k: usize, ratio: f64 },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Tangent lower bound of t^2/mu at (t_lo, mu_lo):
/// f1 = (t_lo/mu_lo^2)(2 mu_lo t - t_lo mu). Equals t^2/mu at the local
/// point and never exceeds it for mu > 0.
pub fn f1_bound(t: f64, mu: f64, t_lo: f64, mu_lo: f64) -> f64 {
    (t_lo / (mu_lo * mu_lo)) * (2.0 * mu_lo * t - t_lo * mu)
}

/// First-order upper bound of log2(1 + mu) at mu_lo (concavity).
pub fn linearized_log2(mu: f64, mu_lo: f64) -> f64 {
    (1.0 + mu_lo).log2() + (mu - mu_lo) / (std::f64::consts::LN_2 * (1.0 + mu_lo))
}

/// SCA loop controls. Defaults: convergence threshold 1e-3, 30 iterations,
/// rank tolerance 1e-4.
#[derive(Debug, Clone, Copy)]
pub struct ScaSettings {
    /// Fractional-error convergence threshold on U1.
    pub epsilon: f64,
    pub max_iters: u32,
    /// Maximum lambda2/lambda1 accepted when extracting beams.
    pub rank_tol: f64,
    /// Phase-1 exit tolerance on the infeasibility variable.
    pub elastic_tol: f64,
    /// Feasibility/gap tolerance handed to the conic backend.
    pub solver_tol: f64,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iters: 30,
            rank_tol: 1e-4,
            elastic_tol: 1e-6,
            solver_tol: crate::conic::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaStatus {
    Converged,
    IterationLimit,
    /// Backend failed mid-loop; the last accepted iterate was returned.
    Degraded,
}

/// Iteration log of one SCA run.
#[derive(Debug, Clone)]
pub struct ScaTrace {
    /// U1 after phase 1 (index 0) and after each accepted iteration.
    pub u1: Vec<f64>,
    /// Fractional error per accepted iteration.
    pub f_err: Vec<f64>,
    /// Cone-membership residual of each accepted primal.
    pub residuals: Vec<f64>,
    /// Phase-1 infeasibility values per elastic iteration.
    pub phase1_elastic: Vec<f64>,
    pub status: ScaStatus,
    pub iterations: u32,
}

impl ScaTrace {
    pub fn csv_header() -> &'static str {
        "iteration,u1,f_err,max_residual"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = vec![format!("0,{:.12e},,", self.u1[0])];
        for i in 1..self.u1.len() {
            rows.push(format!(
                "{i},{:.12e},{:.12e},{:.12e}",
                self.u1[i],
                self.f_err[i - 1],
                self.residuals[i - 1]
            ));
        }
        rows
    }
}

/// Expansion point of the convex surrogates, with the previous primal and
/// cached Psi inverses.
#[derive(Debug, Clone)]
pub struct LocalPoint {
    pub mu: Vec<f64>,
    pub omega: Vec<f64>,
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub iota: Vec<f64>,
    pub p_tilde: Vec<f64>,
    pub psi: Vec<CMat>,
    pub psi_inv: Vec<CMat>,
    pub v: Vec<CMat>,
    pub w: CMat,
    pub p: Vec<f64>,
}

fn floored(x: f64) -> f64 {
    x.max(SLACK_FLOOR)
}

impl LocalPoint {
    /// Seed every slack from its defining tight relation at the given
    /// allocation: mu_k and omega_l from the four SINR families, t and s
    /// from the square roots of their quadratic forms, iota from omega.
    pub fn from_allocation(
        ch: &NetworkChannels,
        v: Vec<CMat>,
        w: CMat,
        p: Vec<f64>,
    ) -> Result<Self, FollowerError> {
        let k_dl = ch.h_ak.len();
        let l_ul = ch.h_la.len();
        let sol = FollowerSolution {
            v: v.clone(),
            w: w.clone(),
            p: p.clone(),
            u: CMat::zeros(ch.sigma_n.nrows(), l_ul),
            beams: vec![],
            u1: 0.0,
            degraded: false,
        };
        let s_mat = metrics::transmit_covariance(&sol);

        let mut mu = Vec::with_capacity(k_dl + 1);
        for k in 0..k_dl {
            mu.push(floored(metrics::dl_sinr(k, ch, &sol)));
        }
        let (eve_ul, eve_dl) = metrics::eve_sinrs(ch, &sol);
        mu.push(floored(eve_dl));

        let mut omega = Vec::with_capacity(2 * l_ul);
        for l in 0..l_ul {
            omega.push(floored(metrics::ul_sinr_optimal(l, ch, &sol)?));
        }
        for l in 0..l_ul {
            omega.push(floored(eve_ul[l]));
        }

        let mut t = Vec::with_capacity(k_dl + 1);
        for k in 0..k_dl {
            t.push(floored(quad_form(&ch.h_ak[k], &v[k]).max(0.0).sqrt()));
        }
        let eve_sig: f64 = v.iter().map(|vk| quad_form(&ch.h_ae, vk)).sum();
        t.push(floored(eve_sig.max(0.0).sqrt()));

        let p_tilde: Vec<f64> = p
            .iter()
            .zip(&ch.h_le)
            .map(|(&pl, h)| floored(pl * h.norm_sqr()))
            .collect();
        let total_pt: f64 = p_tilde.iter().sum();
        let s = (0..l_ul)
            .map(|l| {
                let denom =
                    total_pt - p_tilde[l] + quad_form(&ch.h_ae, &s_mat) + ch.sigma_e_sq;
                floored(denom.max(0.0).sqrt())
            })
            .collect();
        let iota = omega[..l_ul].iter().map(|&o| floored(o.sqrt())).collect();

        let mut psi = Vec::with_capacity(l_ul);
        let mut psi_inv = Vec::with_capacity(l_ul);
        for l in 0..l_ul {
            let m = metrics::psi_matrix(l, ch, &p, &s_mat);
            let inv = inv_hpd(&m).ok_or(FollowerError::SolverFailure {
                status: SolveStatus::NumericalTrouble,
            })?;
            psi.push(m);
            psi_inv.push(inv);
        }

        Ok(Self { mu, omega, t, s, iota, p_tilde, psi, psi_inv, v, w, p })
    }

    /// Move the expansion point to a solved primal: slacks to their optimal
    /// values, Psi rebuilt from the new (p, S).
    fn update_from(&mut self, ch: &NetworkChannels, ex: &PrimalExtract) -> Result<(), FollowerError> {
        self.mu = ex.mu.iter().map(|&x| floored(x)).collect();
        self.omega = ex.omega.iter().map(|&x| floored(x)).collect();
        self.t = ex.t.iter().map(|&x| floored(x)).collect();
        self.s = ex.s.iter().map(|&x| floored(x)).collect();
        self.iota = ex.iota.iter().map(|&x| floored(x)).collect();
        self.p = ex.p.clone();
        self.v = ex.v.clone();
        self.w = ex.w.clone();
        self.p_tilde = self
            .p
            .iter()
            .zip(&ch.h_le)
            .map(|(&pl, h)| floored(pl * h.norm_sqr()))
            .collect();
        let mut s_mat = self.w.clone();
        for v in &self.v {
            s_mat += v;
        }
        self.psi.clear();
        self.psi_inv.clear();
        for l in 0..self.p.len() {
            let m = metrics::psi_matrix(l, ch, &self.p, &s_mat);
            let inv = inv_hpd(&m).ok_or(FollowerError::SolverFailure {
                status: SolveStatus::NumericalTrouble,
            })?;
            self.psi.push(m);
            self.psi_inv.push(inv);
        }
        Ok(())
    }

    /// All slack locals are strictly positive by construction.
    pub fn strictly_positive(&self) -> bool {
        self.mu
            .iter()
            .chain(&self.omega)
            .chain(&self.t)
            .chain(&self.s)
            .chain(&self.iota)
            .chain(&self.p_tilde)
            .all(|&x| x > 0.0)
    }
}

fn solution_from_extract(
    ch: &NetworkChannels,
    ex: &PrimalExtract,
    degraded: bool,
) -> Result<FollowerSolution, FollowerError> {
    let l_ul = ch.h_la.len();
    let mut sol = FollowerSolution {
        v: ex.v.clone(),
        w: ex.w.clone(),
        p: ex.p.clone(),
        u: CMat::zeros(ch.sigma_n.nrows(), l_ul),
        beams: vec![],
        u1: 0.0,
        degraded,
    };
    for l in 0..l_ul {
        let u_l = metrics::optimal_receive_beamformer(l, ch, &sol)?;
        sol.u.set_column(l, &u_l);
    }
    sol.u1 = sol.network_power();
    Ok(sol)
}

/// Rank-one beam recovery: v_k = sqrt(lambda1) u1 from the dominant
/// eigenpair of each V_k. Fails if any lambda2/lambda1 exceeds `rank_tol`.
pub fn extract_beamformers(v: &[CMat], rank_tol: f64) -> Result<Vec<CVec>, FollowerError> {
    let mut beams = Vec::with_capacity(v.len());
    for (k, vk) in v.iter().enumerate() {
        let (l1, u, ratio) = dominant_eigpair(vk);
        if !ratio.is_finite() || ratio > rank_tol {
            return Err(FollowerError::RankOneViolation { k, ratio });
        }
        beams.push(u * crate::linalg::c(l1.max(0.0).sqrt(), 0.0));
    }
    Ok(beams)
}

/// Phase 1: start from a normalized rank-one/identity allocation and iterate
/// the elastic program until the infeasibility variable clears the
/// tolerance. Returns the seeded local point, the feasible starting
/// solution, and the elastic trace.
pub fn initialize_local_point(
    ch: &NetworkChannels,
    cfg: &ScenarioConfig,
    settings: &ScaSettings,
) -> Result<(LocalPoint, FollowerSolution, Vec<f64>), FollowerError> {
    initialize_with_an(ch, cfg, settings, true)
}

/// Network power budget backing the analytic infeasibility certificate:
/// secrecy thresholds beyond the interference-free capacity at this budget
/// are rejected without invoking the solver.
const PHASE1_POWER_CAP: f64 = 1e3;

/// Sound upper bounds on the achievable secrecy rates: interference-free
/// SNR at the full power budget, eavesdropper rate floored at zero. Returns
/// the worst threshold shortfall when some threshold is unreachable.
fn capacity_shortfall(ch: &NetworkChannels, cfg: &ScenarioConfig) -> Option<f64> {
    let dl_bound = ch
        .h_ak
        .iter()
        .map(|h| (1.0 + h.norm_squared() * PHASE1_POWER_CAP / ch.sigma_dl_sq).log2())
        .fold(f64::INFINITY, f64::min);
    let sigma_inv = inv_hpd(&ch.sigma_n).expect("sigma_n positive definite");
    let ul_bound = ch
        .h_la
        .iter()
        .map(|h| (1.0 + PHASE1_POWER_CAP * quad_form(h, &sigma_inv)).log2())
        .fold(f64::INFINITY, f64::min);
    let shortfall = (cfg.thresholds.rho_dl - dl_bound).max(cfg.thresholds.rho_ul - ul_bound);
    (shortfall > 0.0).then_some(shortfall)
}

fn initialize_with_an(
    ch: &NetworkChannels,
    cfg: &ScenarioConfig,
    settings: &ScaSettings,
    with_an: bool,
) -> Result<(LocalPoint, FollowerSolution, Vec<f64>), FollowerError> {
    let k_dl = ch.h_ak.len();
    let m_t = ch.h_ae.len();

    if let Some(shortfall) = capacity_shortfall(ch, cfg) {
        return Err(FollowerError::InfeasibleScenario { elastic: shortfall });
    }

    // normalized rank-one V along each user channel, scaled-identity W
    let v0: Vec<CMat> = (0..k_dl)
        .map(|k| {
            let h = &ch.h_ak[k];
            let unit = h / crate::linalg::c(h.norm().max(1e-300), 0.0);
            outer(&unit) * crate::linalg::c(INIT_POWER, 0.0)
        })
        .collect();
    let w0 = if with_an {
        CMat::identity(m_t, m_t) * crate::linalg::c(INIT_POWER / m_t as f64, 0.0)
    } else {
        CMat::zeros(m_t, m_t)
    };
    let p0 = vec![INIT_POWER; ch.h_la.len()];

    let mut lo = LocalPoint::from_allocation(ch, v0, w0, p0)?;
    let mut elastic_trace = Vec::new();
    let mut prev_e = f64::INFINITY;

    for iter in 0..settings.max_iters {
        // escalate the power magnitude hints if the optimum sits orders of
        // magnitude above the current local point (certifying infeasibility
        // of an unreachable threshold needs very large trial powers)
        let mut outcome = None;
        for boost in [1.0, 1e3, 1e6, 1e9] {
            let (prog, vars) = build_subproblem(ch, &lo, cfg, SubproblemOptions::elastic(with_an, boost));
            let sol = prog.solve(settings.solver_tol)?;
            if sol.status == SolveStatus::Optimal {
                outcome = Some((sol.primal.expect("optimal has primal"), vars));
                break;
            }
        }
        let (primal, vars) = match outcome {
            Some(x) => x,
            None => {
                return Err(FollowerError::SolverFailure { status: SolveStatus::NumericalTrouble })
            }
        };
        let ex = vars.extract(&primal);
        let e = ex.elastic.unwrap_or(0.0).max(0.0);
        elastic_trace.push(e);
        lo.update_from(ch, &ex)?;

        if e <= settings.elastic_tol {
            let sol = solution_from_extract(ch, &ex, false)?;
            return Ok((lo, sol, elastic_trace));
        }
        // stalled well above tolerance: report infeasible
        if iter >= 2 && prev_e - e <= 1e-3 * prev_e {
            return Err(FollowerError::InfeasibleScenario { elastic: e });
        }
        prev_e = e;
    }
    Err(FollowerError::InfeasibleScenario {
        elastic: elastic_trace.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// Full SCA pipeline: phase-1 initialization, iterated subproblem solves
/// with local-point updates until the fractional power decrease drops below
/// epsilon, closed-form receive beamformers, and rank-one beam extraction.
pub fn sca_solve(
    ch: &NetworkChannels,
    cfg: &ScenarioConfig,
    settings: &ScaSettings,
) -> Result<(FollowerSolution, ScaTrace), FollowerError> {
    solve_pipeline(ch, cfg, settings, true)
}

/// Benchmark variant with the sensing/AN covariance removed (W = 0).
pub fn without_an_solve(
    ch: &NetworkChannels,
    cfg: &ScenarioConfig,
    settings: &ScaSettings,
) -> Result<(FollowerSolution, ScaTrace), FollowerError> {
    solve_pipeline(ch, cfg, settings, false)
}

fn solve_pipeline(
    ch: &NetworkChannels,
    cfg: &ScenarioConfig,
    settings: &ScaSettings,
    with_an: bool,
) -> Result<(FollowerSolution, ScaTrace), FollowerError> {
    let (mut lo, init_sol, phase1_elastic) = initialize_with_an(ch, cfg, settings, with_an)?;
    let opts = SubproblemOptions::main(with_an);

    let mut trace = ScaTrace {
        u1: vec![init_sol.u1],
        f_err: vec![],
        residuals: vec![],
        phase1_elastic,
        status: ScaStatus::IterationLimit,
        iterations: 0,
    };
    let mut best = init_sol;

    for i in 1..=settings.max_iters {
        let (prog, vars) = build_subproblem(ch, &lo, cfg, opts);
        let solved = prog.solve(settings.solver_tol)?;
        let primal = match (solved.status, solved.primal) {
            (SolveStatus::Optimal, Some(x)) => x,
            (_status, _) => {
                // keep the last accepted iterate rather than aborting
                trace.status = ScaStatus::Degraded;
                best.degraded = true;
                break;
            }
        };
        let residual = prog.membership_residual(&primal);
        let ex = vars.extract(&primal);
        let sol = solution_from_extract(ch, &ex, false)?;
        let u1_prev = *trace.u1.last().expect("seeded with phase-1 value");
        let f_err = (u1_prev - sol.u1).abs() / u1_prev.max(1e-300);
        trace.u1.push(sol.u1);
        trace.f_err.push(f_err);
        trace.residuals.push(residual);
        trace.iterations = i;
        lo.update_from(ch, &ex)?;
        best = sol;
        if f_err <= settings.epsilon {
            trace.status = ScaStatus::Converged;
            break;
        }
    }

    best.beams = extract_beamformers(&best.v, settings.rank_tol)?;
    Ok((best, trace))
}

/// One true-constraint check with its achieved value and margin.
#[derive(Debug, Clone)]
pub struct ConstraintCheck {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// Positive margin means satisfied with room.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<ConstraintCheck>,
    pub pass: bool,
}

/// Evaluate the true (nonconvex) constraints of the solution through the
/// metrics module at relative tolerance `tol`: both secrecy rates, the
/// range CRLB, PSD-ness of every covariance, and power nonnegativity.
pub fn verify_solution(
    ch: &NetworkChannels,
    sol: &FollowerSolution,
    cfg: &ScenarioConfig,
    tol: f64,
) -> Result<VerifyReport, FollowerError> {
    let rep = metrics::report(ch, sol, cfg)?;
    let mut checks = Vec::new();

    let lower = |name: &str, value: f64, bound: f64| ConstraintCheck {
        name: name.into(),
        value,
        bound,
        margin: value - bound * (1.0 - tol),
        pass: value >= bound * (1.0 - tol),
    };
    checks.push(lower("secrecy_ul", rep.secrecy_ul, cfg.thresholds.rho_ul));
    checks.push(lower("secrecy_dl", rep.secrecy_dl, cfg.thresholds.rho_dl));
    let crlb_bound = cfg.thresholds.rho_est;
    checks.push(ConstraintCheck {
        name: "crlb".into(),
        value: rep.crlb,
        bound: crlb_bound,
        margin: crlb_bound * (1.0 + tol) - rep.crlb,
        pass: rep.crlb <= crlb_bound * (1.0 + tol),
    });
    for (k, vk) in sol.v.iter().enumerate() {
        let scale = trace_re(vk).max(1e-12);
        let min = min_eig(vk);
        checks.push(ConstraintCheck {
            name: format!("psd_v{k}"),
            value: min,
            bound: 0.0,
            margin: min + tol * scale,
            pass: min >= -tol * scale,
        });
    }
    let w_scale = trace_re(&sol.w).max(1e-12);
    let w_min = min_eig(&sol.w);
    checks.push(ConstraintCheck {
        name: "psd_w".into(),
        value: w_min,
        bound: 0.0,
        margin: w_min + tol * w_scale,
        pass: w_min >= -tol * w_scale,
    });
    let p_min = sol.p.iter().copied().fold(f64::INFINITY, f64::min);
    let p_scale = sol.p.iter().copied().fold(0.0f64, f64::max).max(1e-12);
    checks.push(ConstraintCheck {
        name: "p_nonneg".into(),
        value: p_min,
        bound: 0.0,
        margin: p_min + tol * p_scale,
        pass: p_min >= -tol * p_scale,
    });

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { checks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_channels;
    use crate::config::{default_scenario, derive_stream, ChannelMode, Profile};
    use crate::conic::ConeKind;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn desk_channels() -> (ScenarioConfig, NetworkChannels) {
        let cfg = default_scenario(Profile::Desk);
        let mut rng = derive_stream(cfg.seed, "channel");
        let ch = build_channels([20.0, 20.0, 50.0], &cfg, ChannelMode::Expected, &mut rng).unwrap();
        (cfg, ch)
    }

    #[test]
    fn f1_tangent_and_global_lower_bound() {
        assert_relative_eq!(f1_bound(2.0, 1.0, 2.0, 1.0), 4.0, max_relative = 1e-14);
        assert_eq!(f1_bound(1.0, 2.0, 0.0, 1.0), 0.0);
        let mut rng = derive_stream(1, "f1-test");
        for _ in 0..1000 {
            let t = rng.gen::<f64>() * 10.0 - 5.0;
            let mu = rng.gen::<f64>() * 10.0 + 1e-3;
            let t_lo = rng.gen::<f64>() * 10.0 - 5.0;
            let mu_lo = rng.gen::<f64>() * 10.0 + 1e-3;
            assert!(f1_bound(t, mu, t_lo, mu_lo) <= t * t / mu + 1e-9);
        }
    }

    #[test]
    fn linearized_log_is_upper_bound_with_tangency() {
        let mut rng = derive_stream(2, "log-test");
        for _ in 0..1000 {
            let mu_lo = rng.gen::<f64>() * 20.0;
            let mu = rng.gen::<f64>() * 40.0 - 0.99;
            assert!((1.0 + mu).log2() <= linearized_log2(mu, mu_lo) + 1e-12);
            assert_relative_eq!(
                linearized_log2(mu_lo, mu_lo),
                (1.0 + mu_lo).log2(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn extract_beamformers_reference_cases() {
        let e0 = CVec::from_vec(vec![crate::linalg::c(2.0, 0.0), crate::linalg::c(0.0, 0.0)]);
        let v = vec![outer(&e0)];
        let beams = extract_beamformers(&v, 1e-8).unwrap();
        assert!((beams[0].clone() - e0).norm() < 1e-10);

        let eye = vec![CMat::identity(2, 2)];
        match extract_beamformers(&eye, 1e-4) {
            Err(FollowerError::RankOneViolation { k: 0, ratio }) => {
                assert_relative_eq!(ratio, 1.0, max_relative = 1e-12)
            }
            other => panic!("expected rank violation, got {other:?}"),
        }
    }

    #[test]
    fn desk_subproblem_has_expected_structure() {
        let (cfg, ch) = desk_channels();
        let k = cfg.k_dl();
        let l = cfg.l_ul();
        let v0: Vec<CMat> = ch.h_ak.iter().map(|h| outer(h) * crate::linalg::c(1e-4, 0.0)).collect();
        let w0 = CMat::identity(4, 4) * crate::linalg::c(1e-3, 0.0);
        let lo = LocalPoint::from_allocation(&ch, v0, w0, vec![1e-2; l]).unwrap();
        assert!(lo.strictly_positive());
        let (prog, _) = build_subproblem(
            &ch,
            &lo,
            &cfg,
            SubproblemOptions::main(true),
        );
        // one PSD block per downlink covariance plus the AN covariance
        assert_eq!(prog.count_cones(ConeKind::PsdTriangle), k + 1);
        // one exponential cone per exact rate log
        assert_eq!(prog.count_cones(ConeKind::Exponential), k + l);
        // rotated SOCs: K (a2) + 1 (b1) + 2L (d1, d2) + L (g1)
        assert_eq!(prog.count_cones(ConeKind::RotatedSecondOrder), k + 1 + 3 * l);
    }

    #[test]
    fn loose_thresholds_initialize_feasibly() {
        let (mut cfg, ch) = desk_channels();
        cfg.thresholds.rho_dl = 0.01;
        cfg.thresholds.rho_ul = 0.01;
        let settings = ScaSettings::default();
        let (lo, sol, elastic) = initialize_local_point(&ch, &cfg, &settings).unwrap();
        assert!(elastic.last().copied().unwrap() <= settings.elastic_tol);
        assert!(lo.strictly_positive());
        assert!(sol.u1 > 0.0);
    }

    #[test]
    fn impossible_secrecy_threshold_reports_infeasible() {
        let (mut cfg, ch) = desk_channels();
        cfg.thresholds.rho_dl = 1e6;
        let settings = ScaSettings::default();
        match initialize_local_point(&ch, &cfg, &settings) {
            Err(FollowerError::InfeasibleScenario { elastic }) => assert!(elastic > 1.0),
            other => panic!("expected infeasible, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn desk_sca_converges_and_verifies() {
        let (cfg, ch) = desk_channels();
        let settings = ScaSettings::default();
        let (sol, trace) = sca_solve(&ch, &cfg, &settings).unwrap();
        assert_eq!(trace.status, ScaStatus::Converged);
        // nonincreasing within solver noise
        for w in trace.u1.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "u1 increased: {w:?}");
        }
        assert!(*trace.f_err.last().unwrap() <= settings.epsilon);
        let report = verify_solution(&ch, &sol, &cfg, 1e-4).unwrap();
        assert!(report.pass, "{:#?}", report.checks);
        // u1 field consistent with the covariances
        assert_relative_eq!(sol.u1, sol.network_power(), max_relative = 1e-12);
        assert!(!sol.beams.is_empty());
    }

    #[test]
    fn sca_is_deterministic() {
        let (cfg, ch) = desk_channels();
        let settings = ScaSettings::default();
        let (a, _) = sca_solve(&ch, &cfg, &settings).unwrap();
        let (b, _) = sca_solve(&ch, &cfg, &settings).unwrap();
        assert_eq!(a.u1.to_bits(), b.u1.to_bits());
        assert_eq!(a.p, b.p);
        for (x, y) in a.v[0].iter().zip(b.v[0].iter()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn without_an_costs_at_least_as_much() {
        let (cfg, ch) = desk_channels();
        let settings = ScaSettings::default();
        let (with_an, _) = sca_solve(&ch, &cfg, &settings).unwrap();
        let (no_an, _) = without_an_solve(&ch, &cfg, &settings).unwrap();
        assert_eq!(trace_re(&no_an.w), 0.0);
        assert!(no_an.u1 >= with_an.u1 * (1.0 - 1e-6), "{} vs {}", no_an.u1, with_an.u1);
        let report = verify_solution(&ch, &no_an, &cfg, 1e-4).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn verify_catches_broken_solutions() {
        let (cfg, ch) = desk_channels();
        let settings = ScaSettings::default();
        let (sol, _) = sca_solve(&ch, &cfg, &settings).unwrap();

        let mut halved = sol.clone();
        for p in &mut halved.p {
            *p *= 0.5;
        }
        let report = verify_solution(&ch, &halved, &cfg, 1e-4).unwrap();
        let ul = report.checks.iter().find(|c| c.name == "secrecy_ul").unwrap();
        assert!(!ul.pass, "halving uplink power must break the tight UL constraint");

        let mut stripped = sol.clone();
        stripped.w = CMat::zeros(4, 4);
        let report = verify_solution(&ch, &stripped, &cfg, 1e-4).unwrap();
        let crlb = report.checks.iter().find(|c| c.name == "crlb").unwrap();
        assert!(!crlb.pass, "sensing relied on W; zeroing it must break the CRLB");
    }
}
