//! Rotary-wing flight power, discrete motion, and mobility-constraint checks
//! for the leader UAV. Everything here is a pure function over value types.

use crate::config::{FlightPowerParams, MissionConfig, Point3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity3 {
    pub v_x: f64,
    pub v_y: f64,
    pub v_z: f64,
}

impl Velocity3 {
    pub fn new(v_x: f64, v_y: f64, v_z: f64) -> Self {
        Self { v_x, v_y, v_z }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Norm of the horizontal projection.
    pub fn horizontal_speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }
}

/// Which mobility constraint a candidate move violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// Altitude band (C2).
    Altitude,
    /// Horizontal operating region (C3).
    Region,
    /// Obstacle clearance (C3).
    Obstacle,
    /// Per-axis displacement limits (C5-C7).
    SpeedX,
    SpeedY,
    SpeedZ,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityViolation {
    pub kind: ViolationKind,
    pub detail: String,
}

/// Propulsion power of the rotary-wing UAV at velocity `v`:
/// blade profile + parasitic drag + climb + induced power. Strictly positive;
/// the hover value is exactly p0 + p1.
pub fn flight_power(v: Velocity3, params: &FlightPowerParams) -> f64 {
    let h_sq = v.v_x * v.v_x + v.v_y * v.v_y;
    let h = h_sq.sqrt();
    let blade = params.p0_w * (1.0 + 3.0 * h_sq / (params.u_tip * params.u_tip));
    let drag = params.c0 * h * h * h;
    let climb = params.g0 * v.v_z.abs();
    let nu0_sq = params.nu0 * params.nu0;
    let induced = params.p1_w
        * ((1.0 + h_sq * h_sq / (4.0 * nu0_sq * nu0_sq)).sqrt() - h_sq / (2.0 * nu0_sq)).sqrt();
    blade + drag + climb + induced
}

/// Discrete motion update (C4): q' = q + v * delta_t.
pub fn next_position(q: Point3, v: Velocity3, delta_t: f64) -> Point3 {
    [
        q[0] + v.v_x * delta_t,
        q[1] + v.v_y * delta_t,
        q[2] + v.v_z * delta_t,
    ]
}

fn dist3(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Check a candidate move `q -> q_next` against C2 (altitude), C3 (region and
/// obstacle clearance), and C5-C7 (per-axis speed). Returns every violated
/// constraint; an empty list means the move is legal.
///
/// C2 covers the vertical band (intersected with the grid's z-range); C3's
/// region test covers the horizontal grid bounds, so the two kinds never
/// alias.
pub fn check_mobility(q: Point3, q_next: Point3, mission: &MissionConfig) -> Vec<MobilityViolation> {
    let mut out = Vec::new();
    let z_lo = mission.z_min.max(mission.grid_lower[2]);
    let z_hi = mission.z_max.min(mission.grid_upper[2]);
    let eps = 1e-9;

    if q_next[2] < z_lo - eps || q_next[2] > z_hi + eps {
        out.push(MobilityViolation {
            kind: ViolationKind::Altitude,
            detail: format!("z = {} outside [{z_lo}, {z_hi}]", q_next[2]),
        });
    }
    let in_xy = (0..2).all(|a| q_next[a] >= mission.grid_lower[a] - eps && q_next[a] <= mission.grid_upper[a] + eps);
    if !in_xy {
        out.push(MobilityViolation {
            kind: ViolationKind::Region,
            detail: format!("({}, {}) outside the horizontal operating region", q_next[0], q_next[1]),
        });
    }
    for (i, obs) in mission.obstacles.iter().enumerate() {
        let d = dist3(&q_next, obs);
        if d < mission.d_min - eps {
            out.push(MobilityViolation {
                kind: ViolationKind::Obstacle,
                detail: format!("distance {d:.3} to obstacle {i} below d_min = {}", mission.d_min),
            });
        }
    }
    let limits = [
        (0, ViolationKind::SpeedX, mission.v_max[0]),
        (1, ViolationKind::SpeedY, mission.v_max[1]),
        (2, ViolationKind::SpeedZ, mission.v_max[2]),
    ];
    for (axis, kind, v_max) in limits {
        let step = (q_next[axis] - q[axis]).abs();
        if step > v_max * mission.delta_t + eps {
            out.push(MobilityViolation {
                kind,
                detail: format!("axis-{axis} displacement {step} exceeds {}", v_max * mission.delta_t),
            });
        }
    }
    out
}

/// True iff `q` lies in the terminal region (boundary inclusive).
pub fn in_goal_region(q: Point3, mission: &MissionConfig) -> bool {
    dist3(&q, &mission.q_final) <= mission.r_final
}
