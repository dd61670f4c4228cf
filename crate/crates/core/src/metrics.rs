//! Closed-form performance quantities: the four SINR families, worst-case
//! secrecy rates, optimal receive beamformers (generalized Rayleigh
//! quotient), the range-estimation CRLB, and both players' utilities.

use crate::channel::NetworkChannels;
use crate::config::ScenarioConfig;
use crate::kinematics::{flight_power, Velocity3};
use crate::linalg::{c, hermitize, outer, quad_form, solve_hpd, trace_re, CMat, CVec};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("aggregated noise covariance is numerically singular (min eigenvalue {0:.3e})")]
    SingularCovariance(f64),
    #[error("target not illuminated: sensing trace term {0:.3e} is not positive")]
    ZeroIllumination(f64),
}

/// The follower's per-timeslot resource allocation: downlink covariances,
/// sensing/AN covariance, uplink powers, receive beamformers, and the
/// extracted rank-one beams.
#[derive(Debug, Clone)]
pub struct FollowerSolution {
    /// Downlink covariances V_k (Hermitian PSD, M_t x M_t).
    pub v: Vec<CMat>,
    /// Sensing / artificial-noise covariance W (Hermitian PSD, M_t x M_t).
    pub w: CMat,
    /// Uplink transmit powers (W), one per uplink user.
    pub p: Vec<f64>,
    /// Receive beamformers, columns u_l (M_r x L).
    pub u: CMat,
    /// Rank-one beamforming vectors recovered from the dominant eigenpairs.
    pub beams: Vec<CVec>,
    /// Network power consumption sum tr(V_k) + tr(W) + sum p_l.
    pub u1: f64,
    /// Set when the SCA loop had to fall back to the last verified iterate.
    pub degraded: bool,
}

impl FollowerSolution {
    pub fn network_power(&self) -> f64 {
        self.v.iter().map(trace_re).sum::<f64>() + trace_re(&self.w) + self.p.iter().sum::<f64>()
    }

    /// Downlink / uplink / radar-sensing power split (DLP, ULP, RSP).
    pub fn power_split(&self) -> (f64, f64, f64) {
        (
            self.v.iter().map(trace_re).sum::<f64>(),
            self.p.iter().sum::<f64>(),
            trace_re(&self.w),
        )
    }
}

/// Flat per-(timeslot, position) metrics row.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub gamma_dl: Vec<f64>,
    pub gamma_ul: Vec<f64>,
    pub gamma_eve_ul: Vec<f64>,
    pub gamma_eve_dl: f64,
    /// Worst-case downlink secrecy rate (bits/s/Hz).
    pub secrecy_dl: f64,
    /// Worst-case uplink secrecy rate (bits/s/Hz).
    pub secrecy_ul: f64,
    /// Range-estimation CRLB (m^2).
    pub crlb: f64,
    pub u1: f64,
}

impl MetricsReport {
    pub fn csv_header(k: usize, l: usize) -> String {
        let mut cols: Vec<String> = Vec::new();
        cols.extend((0..k).map(|i| format!("gamma_dl_{i}")));
        cols.extend((0..l).map(|i| format!("gamma_ul_{i}")));
        cols.extend((0..l).map(|i| format!("gamma_eve_ul_{i}")));
        cols.push("gamma_eve_dl".into());
        cols.push("secrecy_dl".into());
        cols.push("secrecy_ul".into());
        cols.push("crlb".into());
        cols.push("u1".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut vals: Vec<String> = Vec::new();
        let fmt = |v: f64| format!("{v:.12e}");
        vals.extend(self.gamma_dl.iter().map(|&v| fmt(v)));
        vals.extend(self.gamma_ul.iter().map(|&v| fmt(v)));
        vals.extend(self.gamma_eve_ul.iter().map(|&v| fmt(v)));
        vals.push(fmt(self.gamma_eve_dl));
        vals.push(fmt(self.secrecy_dl));
        vals.push(fmt(self.secrecy_ul));
        vals.push(fmt(self.crlb));
        vals.push(fmt(self.u1));
        vals.join(",")
    }
}

/// Aggregate transmit covariance S = sum_k V_k + W.
pub fn transmit_covariance(sol: &FollowerSolution) -> CMat {
    let mut s = sol.w.clone();
    for v in &sol.v {
        s += v;
    }
    hermitize(&s)
}

/// SINR of downlink user k.
pub fn dl_sinr(k: usize, ch: &NetworkChannels, sol: &FollowerSolution) -> f64 {
    let h = &ch.h_ak[k];
    let num = quad_form(h, &sol.v[k]);
    let mut den = ch.sigma_dl_sq;
    for (l, &p) in sol.p.iter().enumerate() {
        den += p * ch.h_lk[l][k].norm_sqr();
    }
    for (kp, vkp) in sol.v.iter().enumerate() {
        if kp != k {
            den += quad_form(h, vkp);
        }
    }
    den += quad_form(h, &sol.w);
    num / den
}

/// Interference-plus-noise covariance seen by uplink user l's beamformer:
/// Psi_l = sum_{l' != l} p_l' h_l'a h_l'a^H + |zeta0|^2 A0 S A0^H + Sigma_n.
pub fn psi_matrix(l: usize, ch: &NetworkChannels, p: &[f64], s: &CMat) -> CMat {
    let m_r = ch.sigma_n.nrows();
    let mut psi = ch.sigma_n.clone();
    for (lp, &plp) in p.iter().enumerate() {
        if lp != l {
            psi += outer(&ch.h_la[lp]) * c(plp, 0.0);
        }
    }
    let echo = &ch.a0 * s * ch.a0.adjoint() * c(ch.zeta0_sq, 0.0);
    psi += echo;
    debug_assert_eq!(psi.nrows(), m_r);
    hermitize(&psi)
}

fn check_sigma_n(ch: &NetworkChannels) -> Result<(), MetricsError> {
    let min = crate::linalg::min_eig(&ch.sigma_n);
    if min < 1e-12 {
        return Err(MetricsError::SingularCovariance(min));
    }
    Ok(())
}

/// Closed-form receive beamformer u*_l = Psi_l^-1 h_la maximizing the
/// generalized Rayleigh quotient for uplink user l.
pub fn optimal_receive_beamformer(
    l: usize,
    ch: &NetworkChannels,
    sol: &FollowerSolution,
) -> Result<CVec, MetricsError> {
    check_sigma_n(ch)?;
    let s = transmit_covariance(sol);
    let psi = psi_matrix(l, ch, &sol.p, &s);
    solve_hpd(&psi, &ch.h_la[l]).ok_or(MetricsError::SingularCovariance(f64::NAN))
}

/// Uplink SINR of user l at an arbitrary beamformer u (the raw quotient).
pub fn ul_sinr_with(u: &CVec, l: usize, ch: &NetworkChannels, sol: &FollowerSolution) -> f64 {
    let s = transmit_covariance(sol);
    let psi = psi_matrix(l, ch, &sol.p, &s);
    let num = sol.p[l] * (u.adjoint() * &ch.h_la[l])[(0, 0)].norm_sqr();
    let den = quad_form(u, &psi);
    num / den
}

/// Uplink SINR at the optimal beamformer: p_l h_la^H Psi_l^-1 h_la.
pub fn ul_sinr_optimal(l: usize, ch: &NetworkChannels, sol: &FollowerSolution) -> Result<f64, MetricsError> {
    check_sigma_n(ch)?;
    let s = transmit_covariance(sol);
    let psi = psi_matrix(l, ch, &sol.p, &s);
    let x = solve_hpd(&psi, &ch.h_la[l]).ok_or(MetricsError::SingularCovariance(f64::NAN))?;
    Ok(sol.p[l] * (ch.h_la[l].adjoint() * x)[(0, 0)].re)
}

/// Eavesdropper SINRs at the UAV: per-uplink-user interception SINRs and the
/// downlink interception SINR.
pub fn eve_sinrs(ch: &NetworkChannels, sol: &FollowerSolution) -> (Vec<f64>, f64) {
    let s = transmit_covariance(sol);
    let p_tilde: Vec<f64> = sol
        .p
        .iter()
        .zip(&ch.h_le)
        .map(|(&p, h)| p * h.norm_sqr())
        .collect();
    let total_pt: f64 = p_tilde.iter().sum();
    let eve_ul = (0..sol.p.len())
        .map(|l| {
            let den = total_pt - p_tilde[l] + quad_form(&ch.h_ae, &s) + ch.sigma_e_sq;
            p_tilde[l] / den
        })
        .collect();
    let mut v_sum = CMat::zeros(sol.w.nrows(), sol.w.ncols());
    for v in &sol.v {
        v_sum += v;
    }
    let eve_dl = quad_form(&ch.h_ae, &v_sum)
        / (total_pt + quad_form(&ch.h_ae, &sol.w) + ch.sigma_e_sq);
    (eve_ul, eve_dl)
}

fn clip_pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Worst-case secrecy rates: per-user rate gaps against the eavesdropper,
/// clipped at zero and minimized over users. Returns (DL, UL) in bits/s/Hz.
pub fn secrecy_rates(
    gamma_dl: &[f64],
    gamma_ul: &[f64],
    gamma_eve_ul: &[f64],
    gamma_eve_dl: f64,
) -> (f64, f64) {
    let eve_dl_rate = (1.0 + gamma_eve_dl).log2();
    let dl = gamma_dl
        .iter()
        .map(|&g| clip_pos((1.0 + g).log2() - eve_dl_rate))
        .fold(f64::INFINITY, f64::min);
    let ul = gamma_ul
        .iter()
        .zip(gamma_eve_ul)
        .map(|(&g, &ge)| clip_pos((1.0 + g).log2() - (1.0 + ge).log2()))
        .fold(f64::INFINITY, f64::min);
    (dl, ul)
}

/// Range-estimation CRLB
/// C^2 / (8 gamma^2 B^2 |zeta0|^2 tr(A0 S A0^H Sigma_n^-1)) in m^2.
pub fn crlb_range(
    ch: &NetworkChannels,
    sol: &FollowerSolution,
    bandwidth_hz: f64,
    gamma_shape_sq: f64,
) -> Result<f64, MetricsError> {
    check_sigma_n(ch)?;
    let s = transmit_covariance(sol);
    let illum = ch.zeta0_sq * sensing_trace(ch, &s);
    if illum <= 1e-300 {
        return Err(MetricsError::ZeroIllumination(illum));
    }
    let c_light = crate::SPEED_OF_LIGHT;
    Ok(c_light * c_light / (8.0 * gamma_shape_sq * bandwidth_hz * bandwidth_hz * illum))
}

/// tr(A0 S A0^H Sigma_n^-1), evaluated by a dense solve against Sigma_n.
pub fn sensing_trace(ch: &NetworkChannels, s: &CMat) -> f64 {
    let m = &ch.a0 * s * ch.a0.adjoint();
    let x = ch
        .sigma_n
        .clone()
        .lu()
        .solve(&m)
        .expect("sigma_n positive definite");
    trace_re(&x)
}

#[derive(Debug, Clone, Copy)]
pub struct Utilities {
    /// Network power consumption (W).
    pub u1: f64,
    /// Leader utility lambda u1 - (1 - lambda) P_f (raw, in W).
    pub u2: f64,
    /// Normalized leader utility, when denominators are configured.
    pub u2_normalized: Option<f64>,
}

/// Both players' utilities for a follower solution and a leader velocity.
pub fn utilities(sol: &FollowerSolution, v: Velocity3, cfg: &ScenarioConfig) -> Utilities {
    let u1 = sol.network_power();
    let p_f = flight_power(v, &cfg.flight);
    let lambda = cfg.game.lambda;
    let u2 = lambda * u1 - (1.0 - lambda) * p_f;
    let u2_normalized = match (cfg.game.u1_max, cfg.game.pf_max) {
        (Some(u1m), Some(pfm)) if u1m > 0.0 && pfm > 0.0 => {
            Some(lambda * u1 / u1m - (1.0 - lambda) * p_f / pfm)
        }
        _ => None,
    };
    Utilities { u1, u2, u2_normalized }
}

/// Full metrics report for one (channels, solution) pair.
pub fn report(
    ch: &NetworkChannels,
    sol: &FollowerSolution,
    cfg: &ScenarioConfig,
) -> Result<MetricsReport, MetricsError> {
    let k = ch.h_ak.len();
    let gamma_dl: Vec<f64> = (0..k).map(|i| dl_sinr(i, ch, sol)).collect();
    let gamma_ul: Vec<f64> = (0..sol.p.len())
        .map(|l| ul_sinr_optimal(l, ch, sol))
        .collect::<Result<_, _>>()?;
    let (gamma_eve_ul, gamma_eve_dl) = eve_sinrs(ch, sol);
    let (secrecy_dl, secrecy_ul) = secrecy_rates(&gamma_dl, &gamma_ul, &gamma_eve_ul, gamma_eve_dl);
    let crlb = crlb_range(ch, sol, cfg.channel.bandwidth_hz, cfg.channel.gamma_shape_sq)?;
    Ok(MetricsReport {
        gamma_dl,
        gamma_ul,
        gamma_eve_ul,
        gamma_eve_dl,
        secrecy_dl,
        secrecy_ul,
        crlb,
        u1: sol.network_power(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{default_scenario, Profile};
    use crate::linalg::{c, CMat, CVec};
    use approx::assert_relative_eq;

    /// Synthetic two-antenna network with explicit fields, for closed-form
    /// checks that need exact control over every link.
    fn synth_channels(m_t: usize, m_r: usize, l: usize, k: usize) -> NetworkChannels {
        let h_ak: Vec<CVec> = (0..k)
            .map(|i| {
                let mut h = CVec::zeros(m_t);
                h[i % m_t] = c(1.0, 0.0);
                h
            })
            .collect();
        let h_la: Vec<CVec> = (0..l)
            .map(|i| {
                let mut h = CVec::zeros(m_r);
                h[i % m_r] = c(1.0, 0.0);
                h
            })
            .collect();
        NetworkChannels {
            h_ak_outer: h_ak.iter().map(crate::linalg::outer).collect(),
            h_ak,
            h_la,
            h_le: vec![c(1.0, 0.0); l],
            h_lk: vec![vec![c(0.0, 0.0); k]; l],
            h_ae: CVec::zeros(m_t),
            a0: CMat::zeros(m_r, m_t),
            zeta0_sq: 0.0,
            sigma_n: CMat::identity(m_r, m_r),
            h_ae_outer: CMat::zeros(m_t, m_t),
            sigma_dl_sq: 1.0,
            sigma_e_sq: 1.0,
            q_e: [0.0, 0.0, 50.0],
            d_ae: 50.0,
        }
    }

    fn zero_sol(m_t: usize, m_r: usize, l: usize, k: usize) -> FollowerSolution {
        FollowerSolution {
            v: vec![CMat::zeros(m_t, m_t); k],
            w: CMat::zeros(m_t, m_t),
            p: vec![0.0; l],
            u: CMat::zeros(m_r, l),
            beams: vec![],
            u1: 0.0,
            degraded: false,
        }
    }

    #[test]
    fn transmit_covariance_sums() {
        let mut sol = zero_sol(2, 2, 1, 1);
        assert_eq!(trace_re(&transmit_covariance(&sol)), 0.0);
        sol.v[0] = CMat::identity(2, 2);
        sol.w = CMat::identity(2, 2);
        let s = transmit_covariance(&sol);
        assert_relative_eq!(trace_re(&s), 4.0, max_relative = 1e-14);
        assert_relative_eq!(s[(0, 0)].re, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn dl_sinr_single_term_ratio() {
        // K=1, L=0 analog: zero uplink powers, h = e_0, V = diag(4, 0)
        let ch = synth_channels(2, 2, 1, 1);
        let mut sol = zero_sol(2, 2, 1, 1);
        sol.v[0][(0, 0)] = c(4.0, 0.0);
        assert_relative_eq!(dl_sinr(0, &ch, &sol), 4.0, max_relative = 1e-14);
        sol.v[0][(0, 0)] = c(0.0, 0.0);
        assert_eq!(dl_sinr(0, &ch, &sol), 0.0);
    }

    #[test]
    fn dl_sinr_scale_invariant_when_noise_free() {
        let mut ch = synth_channels(2, 2, 2, 2);
        ch.sigma_dl_sq = 0.0;
        ch.h_lk = vec![vec![c(0.3, 0.1); 2]; 2];
        let mut sol = zero_sol(2, 2, 2, 2);
        sol.v[0] = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.2), c(0.5, -0.2), c(1.0, 0.0)]);
        sol.v[1] = CMat::identity(2, 2);
        sol.w = CMat::identity(2, 2) * c(0.25, 0.0);
        sol.p = vec![0.5, 1.5];
        let base = dl_sinr(0, &ch, &sol);
        let mut scaled = sol.clone();
        for v in &mut scaled.v {
            *v *= c(2.0, 0.0);
        }
        scaled.w *= c(2.0, 0.0);
        for p in &mut scaled.p {
            *p *= 2.0;
        }
        assert_relative_eq!(dl_sinr(0, &ch, &scaled), base, max_relative = 1e-12);
    }

    #[test]
    fn receive_beamformer_matched_filter_case() {
        // L=1, zeta0=0, Sigma_n = sigma^2 I: u* collinear with h.
        let mut ch = synth_channels(2, 2, 1, 1);
        ch.h_la[0] = CVec::from_vec(vec![c(1.0, 0.5), c(-0.25, 1.0)]);
        ch.sigma_n = CMat::identity(2, 2) * c(4.0, 0.0);
        let mut sol = zero_sol(2, 2, 1, 1);
        sol.p = vec![2.0];
        let u = optimal_receive_beamformer(0, &ch, &sol).unwrap();
        let expected = &ch.h_la[0] * c(0.25, 0.0);
        assert!((u - expected).norm() < 1e-12);
    }

    #[test]
    fn ul_sinr_scalar_reduction_and_quotient_match() {
        // L=1, zeta0=0, Sigma_n=I, p=2, |h|^2=3 -> 6
        let mut ch = synth_channels(2, 2, 1, 1);
        ch.h_la[0] = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 1.0)]);
        let mut sol = zero_sol(2, 2, 1, 1);
        sol.p = vec![2.0];
        let g = ul_sinr_optimal(0, &ch, &sol).unwrap();
        assert_relative_eq!(g, 6.0, max_relative = 1e-12);
        // substituting u* into the quotient reproduces the closed form
        let u = optimal_receive_beamformer(0, &ch, &sol).unwrap();
        assert_relative_eq!(ul_sinr_with(&u, 0, &ch, &sol), g, max_relative = 1e-10);
        // quotient invariant to scaling of u
        assert_relative_eq!(
            ul_sinr_with(&(&u * c(0.0, -3.7)), 0, &ch, &sol),
            g,
            max_relative = 1e-10
        );
        // monotone nondecreasing in p
        sol.p = vec![3.0];
        assert!(ul_sinr_optimal(0, &ch, &sol).unwrap() >= g);
    }

    #[test]
    fn eve_sinr_reference_cases() {
        let mut ch = synth_channels(2, 2, 1, 1);
        ch.h_ae = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let mut sol = zero_sol(2, 2, 1, 1);
        // p = 0 -> all uplink eavesdropping SINRs zero
        let (eve_ul, _) = eve_sinrs(&ch, &sol);
        assert_eq!(eve_ul, vec![0.0]);
        // single UL user, V = W = 0, p|h|^2 = sigma_e^2 -> 1
        sol.p = vec![1.0];
        let (eve_ul, eve_dl) = eve_sinrs(&ch, &sol);
        assert_relative_eq!(eve_ul[0], 1.0, max_relative = 1e-14);
        assert_eq!(eve_dl, 0.0);
        // growing tr(W) with fixed V, p never raises the DL eavesdropping SINR
        sol.v[0] = CMat::identity(2, 2);
        let (_, base_dl) = eve_sinrs(&ch, &sol);
        sol.w = CMat::identity(2, 2) * c(5.0, 0.0);
        let (_, jammed_dl) = eve_sinrs(&ch, &sol);
        assert!(jammed_dl <= base_dl);
    }

    #[test]
    fn secrecy_rate_reference_cases() {
        let (dl, ul) = secrecy_rates(&[3.0], &[3.0], &[1.0], 1.0);
        assert_relative_eq!(dl, 1.0, max_relative = 1e-14);
        assert_relative_eq!(ul, 1.0, max_relative = 1e-14);
        // clipped at zero
        let (dl, _) = secrecy_rates(&[1.0], &[1.0], &[0.0], 3.0);
        assert_eq!(dl, 0.0);
        // min over users
        // per-user gaps {1.0, 0.2}: 1 + gamma = 2^{1.2} for the weak user
        let weak = 2f64.powf(1.2) - 1.0;
        let gaps = secrecy_rates(&[3.0, weak], &[1.0], &[0.0], 1.0);
        assert_relative_eq!(gaps.0, 0.2, max_relative = 1e-12);
    }

    #[test]
    fn crlb_scalar_reduction_and_bandwidth_law() {
        // A0 = S = Sigma_n = 1, |zeta0|^2 = 1, B = 30 MHz, gamma^2 = pi^2/3
        let mut ch = synth_channels(1, 1, 1, 1);
        ch.a0 = CMat::identity(1, 1);
        ch.zeta0_sq = 1.0;
        let mut sol = zero_sol(1, 1, 1, 1);
        sol.w = CMat::identity(1, 1);
        let g2 = std::f64::consts::PI.powi(2) / 3.0;
        let v = crlb_range(&ch, &sol, 30e6, g2).unwrap();
        assert_relative_eq!(v, 3.7942891047623, max_relative = 1e-12);
        let v2 = crlb_range(&ch, &sol, 60e6, g2).unwrap();
        assert_relative_eq!(v / v2, 4.0, max_relative = 1e-12);
        // zero illumination is an error
        sol.w = CMat::zeros(1, 1);
        assert!(matches!(
            crlb_range(&ch, &sol, 30e6, g2),
            Err(MetricsError::ZeroIllumination(_))
        ));
    }

    #[test]
    fn crlb_monotone_in_added_illumination() {
        let mut ch = synth_channels(2, 2, 1, 1);
        ch.a0 = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]);
        ch.zeta0_sq = 1.0;
        let mut sol = zero_sol(2, 2, 1, 1);
        sol.w = CMat::identity(2, 2);
        let g2 = std::f64::consts::PI.powi(2) / 3.0;
        let base = crlb_range(&ch, &sol, 30e6, g2).unwrap();
        sol.v[0] = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.7), c(0.0, -0.7), c(0.6, 0.0)]);
        let more = crlb_range(&ch, &sol, 30e6, g2).unwrap();
        assert!(more <= base * (1.0 + 1e-12));
    }

    #[test]
    fn utility_reference_cases() {
        let mut cfg = default_scenario(Profile::Desk);
        let mut sol = zero_sol(2, 2, 2, 1);
        sol.v[0] = CMat::identity(2, 2);
        sol.w = CMat::identity(2, 2);
        sol.p = vec![1.0, 1.0];
        let v = Velocity3::zero();
        cfg.game.lambda = 1.0;
        let u = utilities(&sol, v, &cfg);
        assert_relative_eq!(u.u1, 6.0, max_relative = 1e-14);
        assert_relative_eq!(u.u2, 6.0, max_relative = 1e-14);
        cfg.game.lambda = 0.0;
        let u = utilities(&sol, v, &cfg);
        assert_relative_eq!(u.u2, -168.49, max_relative = 1e-12);
        assert!(u.u2_normalized.is_none());
        cfg.game.u1_max = Some(12.0);
        cfg.game.pf_max = Some(336.98);
        cfg.game.lambda = 0.5;
        let u = utilities(&sol, v, &cfg);
        assert_relative_eq!(u.u2_normalized.unwrap(), 0.5 * 0.5 - 0.5 * 0.5, epsilon = 1e-12);
    }
}
