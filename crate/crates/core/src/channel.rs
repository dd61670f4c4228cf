//! Propagation modeling: elevation-dependent LoS probability, distance path
//! loss, Rician small-scale fading, UPA steering vectors, the round-trip
//! radar channel, clutter covariance, and the aggregated receive-noise
//! covariance.
//!
//! In `Expected` mode every link is the deterministic LoS phase geometry
//! scaled by the regularized expected power, which is what makes the
//! follower's best response a pure function of the UAV position. `Sampled`
//! mode draws per-entry Rician small-scale terms from the provided stream;
//! the radar/eavesdropper path keeps its dominant-LoS form in both modes.

use crate::config::{ChannelConfig, ChannelMode, Point3, ScenarioConfig};
use crate::linalg::{c, hermitize, outer, CMat, CVec, C64};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
}

/// Which UPA a steering vector is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArraySide {
    Tx,
    Rx,
}

/// Fixed clutter scatterer directions and strength.
#[derive(Debug, Clone)]
pub struct ClutterModel {
    /// Scatterer (elevation, azimuth) pairs in radians.
    pub angles: Vec<(f64, f64)>,
    /// Clutter-to-noise ratio in dB; `None` means no clutter.
    pub cnr_db: Option<f64>,
}

impl ClutterModel {
    pub fn n_scatterers(&self) -> usize {
        if self.cnr_db.is_some() {
            self.angles.len()
        } else {
            0
        }
    }
}

/// Every complex link vector, radar matrix, and noise covariance at one
/// leader position. Immutable once built.
#[derive(Debug, Clone)]
pub struct NetworkChannels {
    /// R-BS -> downlink user k, length M_t, one per k.
    pub h_ak: Vec<CVec>,
    /// Uplink user l -> R-BS, length M_r, one per l.
    pub h_la: Vec<CVec>,
    /// Uplink user l -> UAV (scalar), one per l.
    pub h_le: Vec<C64>,
    /// Uplink user l -> downlink user k (scalar), indexed [l][k].
    pub h_lk: Vec<Vec<C64>>,
    /// R-BS -> UAV, length M_t.
    pub h_ae: CVec,
    /// Radar round-trip geometry a_r a_t^H (rank one, M_r x M_t).
    pub a0: CMat,
    /// Round-trip power gain |zeta0|^2.
    pub zeta0_sq: f64,
    /// Aggregated receive-noise covariance R_c + (sigma_SI^2 + sigma_a^2) I.
    pub sigma_n: CMat,
    /// Cached rank-one outer products h_ak h_ak^H.
    pub h_ak_outer: Vec<CMat>,
    /// Cached h_ae h_ae^H.
    pub h_ae_outer: CMat,
    /// Noise variance at each downlink user.
    pub sigma_dl_sq: f64,
    /// Noise variance at the UAV.
    pub sigma_e_sq: f64,
    /// UAV position the channels were built for.
    pub q_e: Point3,
    /// R-BS to UAV distance (m).
    pub d_ae: f64,
}

fn dist3(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Elevation angle of `q_i` as seen from `q_j`, in degrees:
/// (180/pi) asin((z_i - z_j) / ||q_i - q_j||).
pub fn elevation_angle(q_i: Point3, q_j: Point3) -> Result<f64, ChannelError> {
    let d = dist3(&q_i, &q_j);
    if d <= 0.0 {
        return Err(ChannelError::DegenerateGeometry(format!(
            "coincident endpoints at {q_i:?}"
        )));
    }
    Ok(((q_i[2] - q_j[2]) / d).asin().to_degrees())
}

/// LoS-path probability as a logistic function of the elevation angle
/// (degrees). Strictly increasing, range (0, 1).
pub fn los_probability(theta_deg: f64, cfg: &ChannelConfig) -> f64 {
    1.0 / (1.0 + cfg.e1 * (-cfg.e2 * (theta_deg - cfg.e1)).exp())
}

/// Regularized LoS probability: varsigma + (1 - varsigma) P_LoS.
pub fn regularized_los(theta_deg: f64, cfg: &ChannelConfig) -> f64 {
    cfg.varsigma + (1.0 - cfg.varsigma) * los_probability(theta_deg, cfg)
}

/// Expected channel power gain over a link of length `d` at elevation
/// `theta_deg`: P_hat * beta0 * d^-alpha.
pub fn expected_gain(d: f64, theta_deg: f64, cfg: &ChannelConfig) -> f64 {
    debug_assert!(d > 0.0);
    regularized_los(theta_deg, cfg) * cfg.beta0() * d.powf(-cfg.alpha)
}

/// UPA steering vector for departure/arrival angles (radians): the Kronecker
/// product of the horizontal phase ramp (argument 2 pi delta/lambda m sin
/// theta cos phi) and the vertical ramp (sin phi in place of cos phi). Every
/// entry has unit modulus; the length is M_h * M_v of the chosen side.
pub fn steering_vector(
    theta: f64,
    phi: f64,
    side: ArraySide,
    geom: &crate::config::ArrayGeometry,
) -> CVec {
    let (m_h, m_v) = match side {
        ArraySide::Tx => (geom.tx[0] as usize, geom.tx[1] as usize),
        ArraySide::Rx => (geom.rx[0] as usize, geom.rx[1] as usize),
    };
    let base = 2.0 * std::f64::consts::PI * geom.spacing_wavelengths * theta.sin();
    let ramp = |count: usize, step: f64| -> Vec<C64> {
        (0..count).map(|m| C64::from_polar(1.0, step * m as f64)).collect()
    };
    let horiz = ramp(m_h, base * phi.cos());
    let vert = ramp(m_v, base * phi.sin());
    let mut v = CVec::zeros(m_h * m_v);
    for (i, h) in horiz.iter().enumerate() {
        for (j, w) in vert.iter().enumerate() {
            v[i * m_v + j] = h * w;
        }
    }
    v
}

/// Round-trip radar power gain |zeta0|^2 = g_rcs * beta0^2 * d^-4
/// (monostatic radar-equation scaling).
pub fn round_trip_gain(d_ae: f64, cfg: &ScenarioConfig) -> f64 {
    debug_assert!(d_ae > 0.0);
    let beta0 = cfg.channel.beta0();
    cfg.channel.g_rcs * beta0 * beta0 * d_ae.powi(-4)
}

/// Clutter covariance R_c = c * sum_i a_r(theta_i, phi_i) a_r^H, with the
/// scalar c normalized so tr(R_c) / (M_r sigma_a^2) equals the linear CNR.
/// No scatterers or no CNR gives the zero matrix.
pub fn clutter_covariance(
    model: &ClutterModel,
    geom: &crate::config::ArrayGeometry,
    sigma_a_sq: f64,
) -> CMat {
    let m_r = geom.m_r();
    let mut r_c = CMat::zeros(m_r, m_r);
    let cnr_db = match model.cnr_db {
        Some(v) => v,
        None => return r_c,
    };
    if model.angles.is_empty() {
        return r_c;
    }
    for &(theta, phi) in &model.angles {
        let a = steering_vector(theta, phi, ArraySide::Rx, geom);
        r_c += outer(&a);
    }
    // tr of the unscaled sum is n_c * m_r (unit-modulus entries)
    let cnr_lin = 10f64.powf(cnr_db / 10.0);
    let scale = cnr_lin * sigma_a_sq / model.angles.len() as f64;
    hermitize(&(r_c * c(scale, 0.0)))
}

/// Clutter directions for a given target direction: configured (azimuth,
/// elevation) offsets applied around the target, elevations clamped to
/// [0, pi/2].
pub fn clutter_model_for(theta_t: f64, phi_t: f64, cfg: &ChannelConfig) -> ClutterModel {
    let angles = cfg
        .clutter
        .offsets_deg
        .iter()
        .map(|off| {
            let phi = phi_t + off[0].to_radians();
            let theta = (theta_t + off[1].to_radians()).clamp(0.0, std::f64::consts::FRAC_PI_2);
            (theta, phi)
        })
        .collect();
    ClutterModel {
        angles,
        cnr_db: cfg.clutter.cnr_db,
    }
}

/// Departure angles (elevation in [0, pi/2], azimuth) from `from` toward
/// `to`, using the vertical offset magnitude.
fn link_angles(from: &Point3, to: &Point3) -> (f64, f64) {
    let dx = to[0] - from[0];
    let dy = to[1] - from[1];
    let dz = to[2] - from[2];
    let d = (dx * dx + dy * dy + dz * dz).sqrt();
    let theta = if d > 0.0 { (dz.abs() / d).asin() } else { 0.0 };
    let phi = dy.atan2(dx);
    (theta, phi)
}

struct LinkBuilder<'a> {
    cfg: &'a ScenarioConfig,
    wavelength: f64,
}

impl<'a> LinkBuilder<'a> {
    /// Deterministic LoS scalar for a link: amplitude from the regularized
    /// expected gain, phase from the path length.
    fn los_scalar(&self, from: &Point3, to: &Point3) -> Result<C64, ChannelError> {
        let d = dist3(from, to);
        if d <= 0.0 {
            return Err(ChannelError::DegenerateGeometry(format!(
                "zero-length link {from:?} -> {to:?}"
            )));
        }
        let theta_deg = elevation_angle(elevated(from, to), grounded(from, to))?;
        let gain = expected_gain(d, theta_deg, &self.cfg.channel);
        let phase = -2.0 * std::f64::consts::PI * d / self.wavelength;
        Ok(C64::from_polar(gain.sqrt(), phase))
    }

    /// Rician small-scale factor applied on top of the LoS scalar in sampled
    /// mode; LoS power already carries the regularized expectation, so
    /// E|factor|^2 = 1.
    fn rician_factor(&self, rng: &mut impl Rng) -> C64 {
        let kappa = self.cfg.channel.rician_k;
        let los_w = (kappa / (kappa + 1.0)).sqrt();
        let nlos_w = (1.0 / (kappa + 1.0)).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let nlos = c(re, im) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        c(los_w, 0.0) + nlos * c(nlos_w, 0.0)
    }

    fn vector_link(
        &self,
        array_node: &Point3,
        other: &Point3,
        side: ArraySide,
        mode: ChannelMode,
        rng: &mut impl Rng,
    ) -> Result<CVec, ChannelError> {
        let scalar = self.los_scalar(array_node, other)?;
        let (theta, phi) = link_angles(array_node, other);
        let mut v = steering_vector(theta, phi, side, &self.cfg.arrays) * scalar;
        if mode == ChannelMode::Sampled {
            for i in 0..v.len() {
                v[i] *= self.rician_factor(rng);
            }
        }
        Ok(v)
    }

    fn scalar_link(
        &self,
        from: &Point3,
        to: &Point3,
        mode: ChannelMode,
        rng: &mut impl Rng,
    ) -> Result<C64, ChannelError> {
        let mut h = self.los_scalar(from, to)?;
        if mode == ChannelMode::Sampled {
            h *= self.rician_factor(rng);
        }
        Ok(h)
    }
}

fn elevated<'p>(a: &'p Point3, b: &'p Point3) -> Point3 {
    if a[2] >= b[2] {
        *a
    } else {
        *b
    }
}

fn grounded<'p>(a: &'p Point3, b: &'p Point3) -> Point3 {
    if a[2] >= b[2] {
        *b
    } else {
        *a
    }
}

/// Build every link, the radar matrix, and the aggregated noise covariance
/// for the UAV at `q_e`. In `Expected` mode the result is a deterministic
/// function of `q_e`; `Sampled` mode consumes the stream.
pub fn build_channels(
    q_e: Point3,
    cfg: &ScenarioConfig,
    mode: ChannelMode,
    rng: &mut impl Rng,
) -> Result<NetworkChannels, ChannelError> {
    if q_e[2] <= 0.0 {
        return Err(ChannelError::DegenerateGeometry(format!(
            "UAV must fly above ground, got z = {}",
            q_e[2]
        )));
    }
    let builder = LinkBuilder {
        cfg,
        wavelength: cfg.channel.wavelength(),
    };
    let q_a = cfg.users.rbs;

    let mut h_ak = Vec::with_capacity(cfg.k_dl());
    for q_k in &cfg.users.downlink {
        h_ak.push(builder.vector_link(&q_a, q_k, ArraySide::Tx, mode, rng)?);
    }
    let mut h_la = Vec::with_capacity(cfg.l_ul());
    for q_l in &cfg.users.uplink {
        h_la.push(builder.vector_link(&q_a, q_l, ArraySide::Rx, mode, rng)?);
    }
    let mut h_le = Vec::with_capacity(cfg.l_ul());
    for q_l in &cfg.users.uplink {
        h_le.push(builder.scalar_link(q_l, &q_e, mode, rng)?);
    }
    let mut h_lk = Vec::with_capacity(cfg.l_ul());
    for q_l in &cfg.users.uplink {
        let mut row = Vec::with_capacity(cfg.k_dl());
        for q_k in &cfg.users.downlink {
            row.push(builder.scalar_link(q_l, q_k, mode, rng)?);
        }
        h_lk.push(row);
    }
    // The R-BS <-> UAV path keeps its dominant-LoS form in both modes.
    let h_ae = builder.vector_link(&q_a, &q_e, ArraySide::Tx, ChannelMode::Expected, rng)?;

    let (theta_t, phi_t) = link_angles(&q_a, &q_e);
    let a_t = steering_vector(theta_t, phi_t, ArraySide::Tx, &cfg.arrays);
    let a_r = steering_vector(theta_t, phi_t, ArraySide::Rx, &cfg.arrays);
    let a0 = &a_r * a_t.adjoint();

    let d_ae = dist3(&q_a, &q_e);
    let zeta0_sq = round_trip_gain(d_ae, cfg);

    let clutter = clutter_model_for(theta_t, phi_t, &cfg.channel);
    let r_c = clutter_covariance(&clutter, &cfg.arrays, cfg.noise.sigma_a_sq);
    let m_r = cfg.arrays.m_r();
    let sigma_n = hermitize(
        &(r_c + CMat::identity(m_r, m_r) * c(cfg.noise.sigma_si_sq + cfg.noise.sigma_a_sq, 0.0)),
    );

    let h_ak_outer = h_ak.iter().map(outer).collect();
    let h_ae_outer = outer(&h_ae);

    Ok(NetworkChannels {
        h_ak,
        h_la,
        h_le,
        h_lk,
        h_ae,
        a0,
        zeta0_sq,
        sigma_n,
        h_ak_outer,
        h_ae_outer,
        sigma_dl_sq: cfg.noise.sigma_dl_sq,
        sigma_e_sq: cfg.noise.sigma_e_sq,
        q_e,
        d_ae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{default_scenario, Profile};
    use crate::linalg::trace_re;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn desk() -> ScenarioConfig {
        default_scenario(Profile::Desk)
    }

    fn rng() -> rand_chacha::ChaCha12Rng {
        rand_chacha::ChaCha12Rng::seed_from_u64(7)
    }

    #[test]
    fn elevation_angles() {
        assert_relative_eq!(
            elevation_angle([0.0, 0.0, 50.0], [0.0, 0.0, 0.0]).unwrap(),
            90.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            elevation_angle([10.0, 0.0, 5.0], [0.0, 0.0, 5.0]).unwrap(),
            0.0,
            max_relative = 1e-12
        );
        // dz = d/2 -> 30 degrees
        let dz = 10.0;
        let dx = (4.0_f64 * dz * dz - dz * dz).sqrt(); // d = 2 dz
        assert_relative_eq!(
            elevation_angle([dx, 0.0, dz], [0.0, 0.0, 0.0]).unwrap(),
            30.0,
            max_relative = 1e-12
        );
        assert!(elevation_angle([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn los_probability_reference_points() {
        let ch = desk().channel;
        // theta = E1 kills the exponent
        assert_relative_eq!(los_probability(9.61, &ch), 1.0 / (1.0 + 9.61), max_relative = 1e-12);
        let overhead = los_probability(90.0, &ch);
        assert!(overhead > 0.9999 && overhead < 1.0, "{overhead}");
        assert!(los_probability(-1e3, &ch) < 1e-6);
    }

    #[test]
    fn los_probability_strictly_increasing() {
        let ch = desk().channel;
        let mut prev = los_probability(-20.0, &ch);
        for deg in -19..=90 {
            let p = los_probability(deg as f64, &ch);
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn expected_gain_limits_and_monotonicity() {
        let ch = desk().channel;
        // At 90 degrees P_hat ~ 1, so the 1 m gain is ~beta0.
        assert_relative_eq!(expected_gain(1.0, 90.0, &ch), ch.beta0(), max_relative = 1e-4);
        let mut prev = expected_gain(1.0, 45.0, &ch);
        for d in 2..100 {
            let g = expected_gain(d as f64, 45.0, &ch);
            assert!(g < prev);
            prev = g;
        }
        // Pure-NLoS floor: P_hat -> varsigma as theta -> -inf
        let floor = expected_gain(10.0, -1e4, &ch);
        assert_relative_eq!(floor, ch.varsigma * ch.beta0() * 10f64.powf(-ch.alpha), max_relative = 1e-9);
    }

    #[test]
    fn steering_vector_reference_cases() {
        let geom = desk().arrays;
        let v = steering_vector(0.0, 1.234, ArraySide::Tx, &geom);
        for e in v.iter() {
            assert_relative_eq!(e.re, 1.0, max_relative = 1e-12);
            assert!(e.im.abs() < 1e-12);
        }
        // theta = pi/2, phi = 0, half-wavelength 2x2: [1, 1, -1, -1]
        let v = steering_vector(std::f64::consts::FRAC_PI_2, 0.0, ArraySide::Tx, &geom);
        let expect = [(1.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (-1.0, 0.0)];
        for (e, (re, im)) in v.iter().zip(expect) {
            assert_relative_eq!(e.re, re, epsilon = 1e-12);
            assert_relative_eq!(e.im, im, epsilon = 1e-12);
        }
    }

    #[test]
    fn steering_vector_unit_modulus_norm() {
        let geom = desk().arrays;
        for (theta, phi) in [(0.3, 0.1), (1.0, 2.0), (1.5, -2.5), (0.7, 3.0)] {
            let v = steering_vector(theta, phi, ArraySide::Rx, &geom);
            for e in v.iter() {
                assert_relative_eq!(e.norm(), 1.0, max_relative = 1e-12);
            }
            assert_relative_eq!(v.norm_squared(), geom.m_r() as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn expected_mode_is_deterministic() {
        let cfg = desk();
        let a = build_channels([20.0, 20.0, 50.0], &cfg, ChannelMode::Expected, &mut rng()).unwrap();
        let b = build_channels([20.0, 20.0, 50.0], &cfg, ChannelMode::Expected, &mut rng()).unwrap();
        assert_eq!(a.h_ak[0], b.h_ak[0]);
        assert_eq!(a.h_le, b.h_le);
        assert_eq!(a.sigma_n, b.sigma_n);
        assert_eq!(a.zeta0_sq, b.zeta0_sq);
    }

    #[test]
    fn rician_limit_recovers_los() {
        let mut cfg = desk();
        cfg.channel.rician_k = 1e18;
        let expected =
            build_channels([20.0, 20.0, 50.0], &cfg, ChannelMode::Expected, &mut rng()).unwrap();
        let sampled =
            build_channels([20.0, 20.0, 50.0], &cfg, ChannelMode::Sampled, &mut rng()).unwrap();
        for (a, b) in expected.h_ak[0].iter().zip(sampled.h_ak[0].iter()) {
            assert_relative_eq!(a.re, b.re, max_relative = 1e-6);
            assert_relative_eq!(a.im, b.im, max_relative = 1e-6);
        }
    }

    #[test]
    fn sampled_power_matches_expected_gain() {
        let cfg = desk();
        let q_l = cfg.users.uplink[0];
        let q_e = [20.0, 20.0, 50.0];
        let d = ((q_l[0] - q_e[0]).powi(2) + (q_l[1] - q_e[1]).powi(2) + (q_l[2] - q_e[2]).powi(2))
            .sqrt();
        let theta = elevation_angle(q_e, q_l).unwrap();
        let want = expected_gain(d, theta, &cfg.channel);
        let mut r = rng();
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let ch = build_channels(q_e, &cfg, ChannelMode::Sampled, &mut r).unwrap();
            acc += ch.h_le[0].norm_sqr();
        }
        let mean = acc / n as f64;
        assert!((mean - want).abs() / want < 0.02, "mean {mean} vs {want}");
    }

    #[test]
    fn round_trip_gain_laws() {
        let cfg = desk();
        let beta0 = cfg.channel.beta0();
        assert_relative_eq!(round_trip_gain(1.0, &cfg), cfg.channel.g_rcs * beta0 * beta0, max_relative = 1e-12);
        let g1 = round_trip_gain(37.0, &cfg);
        let g2 = round_trip_gain(74.0, &cfg);
        assert_relative_eq!(g1 / g2, 16.0, max_relative = 1e-12);
        let mut zero = cfg.clone();
        zero.channel.g_rcs = 0.0;
        assert_eq!(round_trip_gain(10.0, &zero), 0.0);
    }

    #[test]
    fn clutter_covariance_normalization() {
        let cfg = desk();
        let none = ClutterModel { angles: vec![], cnr_db: Some(0.0) };
        let r = clutter_covariance(&none, &cfg.arrays, 1.0);
        assert_eq!(trace_re(&r), 0.0);

        let one = ClutterModel { angles: vec![(0.5, 1.0)], cnr_db: Some(0.0) };
        let r = clutter_covariance(&one, &cfg.arrays, 1.0);
        assert_relative_eq!(trace_re(&r), cfg.arrays.m_r() as f64, max_relative = 1e-12);
        let min = crate::linalg::min_eig(&r);
        assert!(min >= -1e-12 * trace_re(&r));

        let many = ClutterModel {
            angles: vec![(0.5, 1.0), (0.6, -1.0), (0.2, 2.0)],
            cnr_db: Some(13.0),
        };
        let sigma_a_sq = 2.0;
        let r = clutter_covariance(&many, &cfg.arrays, sigma_a_sq);
        let cnr = trace_re(&r) / (cfg.arrays.m_r() as f64 * sigma_a_sq);
        assert_relative_eq!(10.0 * cnr.log10(), 13.0, max_relative = 1e-10);
    }

    #[test]
    fn channels_satisfy_structural_invariants() {
        let cfg = desk();
        let ch = build_channels([20.0, 30.0, 50.0], &cfg, ChannelMode::Expected, &mut rng()).unwrap();
        // A0 is rank one
        let svd = ch.a0.clone().svd(false, false);
        let mut svals: Vec<f64> = svd.singular_values.iter().cloned().collect();
        svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(svals[1] <= 1e-10 * svals[0]);
        // Sigma_n Hermitian PSD with min eigenvalue >= sigma_a^2
        let min = crate::linalg::min_eig(&ch.sigma_n);
        assert!(min >= cfg.noise.sigma_a_sq - 1e-9, "min eig {min}");
        // degenerate geometry rejected
        assert!(build_channels([0.0, 40.0, 20.0], &cfg, ChannelMode::Expected, &mut rng()).is_err());
        assert!(build_channels([5.0, 5.0, 0.0], &cfg, ChannelMode::Expected, &mut rng()).is_err());
    }
}
