//! Desk-scale simulator and numerical-optimization library for a secure
//! integrated-sensing-and-communication (ISAC) network defending against a
//! mobile eavesdropping UAV.
//!
//! The legitimate network (a full-duplex radar base station serving downlink
//! and uplink users while tracking the UAV) minimizes its transmit power per
//! timeslot under secrecy-rate and range-estimation constraints by solving a
//! successive-convex-approximation (SCA) conic program. The UAV plays the
//! leader of a Stackelberg game, learning a trajectory over a grid MDP with a
//! double deep Q-network (DDQN) to trade its own flight power against the
//! network's power consumption.
//!
//! Module map:
//! - [`config`]: scenario definition, defaults, validation, seeded RNG streams
//! - [`kinematics`]: rotary-wing flight power and mobility constraints
//! - [`channel`]: LoS-probability path loss, steering vectors, radar/clutter
//! - [`metrics`]: SINRs, secrecy rates, receive beamformers, range CRLB
//! - [`conic`]: solver-agnostic conic program model + Hermitian embedding
//! - [`follower`]: the per-timeslot SCA resource optimization (Player 1)
//! - [`leader_env`]: the UAV's grid MDP with cached follower responses
//! - [`ddqn`]: Q-network, replay buffer, and the training loop (Player 2)
//! - [`orchestrator`]: end-to-end game runs, sweeps, baselines, CSV output

// Link the system BLAS/LAPACK used by the PSD cone backend.
extern crate openblas_src;

pub mod channel;
pub mod config;
pub mod conic;
pub mod ddqn;
pub mod follower;
pub mod kinematics;
pub mod leader_env;
pub mod linalg;
pub mod metrics;
pub mod orchestrator;

pub use config::{Profile, ScenarioConfig};
pub use follower::{ScaSettings, ScaTrace};
pub use leader_env::LeaderEnv;

pub use metrics::{FollowerSolution, MetricsReport};

/// Speed of light in m/s, used by the range CRLB.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
