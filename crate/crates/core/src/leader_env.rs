//! The leader's MDP: a position lattice derived from the velocity limits,
//! an 18-entry action table (six directions, three speed levels), the
//! composite reward, and a memoized cache of follower best responses.
//!
//! Transitions are deterministic. Moves that would leave the operating
//! region, violate the altitude band, or enter an obstacle's clearance
//! sphere are rejected: the agent stays in place, pays the failure penalty,
//! and the clock still advances. Episodes end on goal entry or timeout.

use crate::channel::{build_channels, ChannelError};
use crate::config::{derive_stream, ChannelMode, MissionConfig, Point3, ScenarioConfig};
use crate::follower::{self, FollowerError, ScaSettings, ScaStatus};
use crate::kinematics::{self, flight_power, Velocity3};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already finished; reset before stepping")]
    EpisodeFinished,
    #[error("follower failed at cell {cell}: {source}")]
    Follower {
        cell: usize,
        #[source]
        source: FollowerError,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Position lattice induced by the mission: the pitch per axis is half the
/// per-slot displacement limit (the smallest nonzero action step), so every
/// action lands exactly on a lattice point or outside the grid. The lattice
/// is anchored at the initial position: it is precisely the reachable
/// position set.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub lower: Point3,
    pub pitch: [f64; 3],
    pub counts: [usize; 3],
}

impl GridSpec {
    pub fn from_mission(m: &MissionConfig) -> Self {
        let mut lower = [0.0; 3];
        let mut pitch = [0.0; 3];
        let mut counts = [0; 3];
        for a in 0..3 {
            pitch[a] = m.v_max[a] * m.delta_t / 2.0;
            // anchor so q_init lies on the lattice
            let offset = (m.q_init[a] - m.grid_lower[a]).rem_euclid(pitch[a]);
            lower[a] = m.grid_lower[a] + if offset < pitch[a] - 1e-9 { offset } else { 0.0 };
            counts[a] = ((m.grid_upper[a] - lower[a]) / pitch[a] + 1e-9).floor() as usize + 1;
        }
        Self { lower, pitch, counts }
    }

    pub fn n_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn position(&self, cell: usize) -> Point3 {
        let iz = cell % self.counts[2];
        let iy = (cell / self.counts[2]) % self.counts[1];
        let ix = cell / (self.counts[2] * self.counts[1]);
        [
            self.lower[0] + ix as f64 * self.pitch[0],
            self.lower[1] + iy as f64 * self.pitch[1],
            self.lower[2] + iz as f64 * self.pitch[2],
        ]
    }

    /// Index of the nearest lattice point within half a pitch, if `q` lies
    /// inside the lattice extent.
    pub fn cell_of(&self, q: Point3) -> Option<usize> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let rel = (q[a] - self.lower[a]) / self.pitch[a];
            if rel < -0.5 || rel > (self.counts[a] - 1) as f64 + 0.5 {
                return None;
            }
            idx[a] = rel.round().max(0.0).min((self.counts[a] - 1) as f64) as usize;
        }
        Some((idx[0] * self.counts[1] + idx[1]) * self.counts[2] + idx[2])
    }
}

/// MDP state: lattice cell plus remaining timeslots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct State {
    pub cell: usize,
    pub t_rem: u32,
}

/// Motion direction of an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
    Forward,
    Backward,
    Left,
    Right,
}

impl Direction {
    const ALL: [Direction; 6] = [
        Direction::Up,
        Direction::Down,
        Direction::Forward,
        Direction::Backward,
        Direction::Left,
        Direction::Right,
    ];

    /// (axis, sign): up/down move z, forward/backward move x, left/right
    /// move -y/+y.
    fn axis_sign(self) -> (usize, f64) {
        match self {
            Direction::Up => (2, 1.0),
            Direction::Down => (2, -1.0),
            Direction::Forward => (0, 1.0),
            Direction::Backward => (0, -1.0),
            Direction::Left => (1, -1.0),
            Direction::Right => (1, 1.0),
        }
    }
}

pub const N_ACTIONS: usize = 18;

/// One decoded action-table row.
#[derive(Debug, Clone, Copy)]
pub struct ActionSpec {
    pub id: usize,
    pub direction: Direction,
    /// 0, 1, 2 for speed 0, v_max/2, v_max.
    pub speed_level: usize,
    pub velocity: Velocity3,
    pub dq: Point3,
}

/// The 18 actions: direction-major, speed-minor. Zero-speed rows decode to
/// no displacement (the hover duplicates are kept so the action space stays
/// the full direction x speed product).
pub fn action_table(mission: &MissionConfig) -> Vec<ActionSpec> {
    let mut out = Vec::with_capacity(N_ACTIONS);
    for (d, &direction) in Direction::ALL.iter().enumerate() {
        let (axis, sign) = direction.axis_sign();
        for speed_level in 0..3 {
            let frac = [0.0, 0.5, 1.0][speed_level];
            let speed = mission.v_max[axis] * frac * sign;
            let mut v = [0.0; 3];
            v[axis] = speed;
            let velocity = Velocity3::new(v[0], v[1], v[2]);
            let dq = [
                v[0] * mission.delta_t,
                v[1] * mission.delta_t,
                v[2] * mission.delta_t,
            ];
            out.push(ActionSpec { id: d * 3 + speed_level, direction, speed_level, velocity, dq });
        }
    }
    out
}

/// Cached summary of one follower best response.
#[derive(Debug, Clone, Copy)]
pub struct CellResponse {
    /// Network power consumption; for infeasible cells this is the sentinel
    /// (largest feasible u1 seen on the grid).
    pub u1: f64,
    pub dlp: f64,
    pub ulp: f64,
    pub rsp: f64,
    pub sca_iterations: u32,
    pub feasible: bool,
    pub degraded: bool,
}

#[derive(Debug, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
    pub infeasible_cells: usize,
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoneReason {
    Goal,
    Timeout,
    None,
}

#[derive(Debug, Clone, Copy)]
pub struct RewardBreakdown {
    pub r_main: f64,
    pub p_dist: f64,
    /// Goal bonus, failure penalty, or zero.
    pub bonus: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub next: State,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub done: bool,
    pub done_reason: DoneReason,
    /// Follower response at the landing cell (the stay-cell on rejection).
    pub follower: CellResponse,
    /// Flight power spent on the attempted action (W).
    pub flight_power: f64,
    /// True when the move was rejected for a mobility violation.
    pub rejected: bool,
}

/// Normalized distance penalty: -(1 + elapsed/T) ||q_next - q_f|| / ||q_i - q_f||,
/// evaluated at the post-step remaining time.
pub fn distance_penalty(q_next: Point3, t_rem_slots: u32, mission: &MissionConfig) -> f64 {
    let dist = |a: &Point3, b: &Point3| -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    };
    let t_rem = t_rem_slots as f64 * mission.delta_t;
    let elapsed_frac = (mission.t_max - t_rem) / mission.t_max;
    let total = dist(&mission.q_init, &mission.q_final).max(1e-12);
    -(1.0 + elapsed_frac) * dist(&q_next, &mission.q_final) / total
}

/// How the environment answers follower queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ResponseMode {
    /// Solve (and cache) the best response per cell.
    Responsive,
    /// Freeze the phase-1 allocation of the initial cell for every cell.
    FrozenInitial,
}

/// The leader's environment. Construction is cheap; the follower cache fills
/// on demand or via [`LeaderEnv::prewarm`]. Step/reset take `&self`, so one
/// environment can serve sequential training after a parallel prewarm.
pub struct LeaderEnv {
    pub cfg: ScenarioConfig,
    pub grid: GridSpec,
    pub actions: Vec<ActionSpec>,
    settings: ScaSettings,
    mode: ResponseMode,
    cache: RwLock<HashMap<usize, CellResponse>>,
    hits: AtomicU64,
    misses: AtomicU64,
    /// Resolved normalization denominators (u1, flight power).
    norm: RwLock<Option<(f64, f64)>>,
    initial_cell: usize,
}

impl LeaderEnv {
    pub fn new(cfg: ScenarioConfig, settings: ScaSettings) -> Result<Self, EnvError> {
        Self::with_mode(cfg, settings, ResponseMode::Responsive)
    }

    /// Baseline variant: the follower never reacts; every cell reuses the
    /// feasibility-phase allocation computed once at the initial cell.
    pub fn new_baseline(cfg: ScenarioConfig, settings: ScaSettings) -> Result<Self, EnvError> {
        Self::with_mode(cfg, settings, ResponseMode::FrozenInitial)
    }

    fn with_mode(
        cfg: ScenarioConfig,
        settings: ScaSettings,
        mode: ResponseMode,
    ) -> Result<Self, EnvError> {
        let grid = GridSpec::from_mission(&cfg.mission);
        let actions = action_table(&cfg.mission);
        let initial_cell = grid
            .cell_of(cfg.mission.q_init)
            .expect("validated: q_init inside grid");
        Ok(Self {
            cfg,
            grid,
            actions,
            settings,
            mode,
            cache: RwLock::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            norm: RwLock::new(None),
            initial_cell,
        })
    }

    /// Same scenario and solved cache, different leader weight: the
    /// follower's best response does not depend on lambda, so forks share
    /// the cached responses.
    pub fn fork_with_lambda(&self, lambda: f64) -> LeaderEnv {
        let mut cfg = self.cfg.clone();
        cfg.game.lambda = lambda;
        let cache = self.cache.read().expect("cache lock").clone();
        LeaderEnv {
            cfg,
            grid: self.grid.clone(),
            actions: self.actions.clone(),
            settings: self.settings,
            mode: self.mode,
            cache: RwLock::new(cache),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
            norm: RwLock::new(None),
            initial_cell: self.initial_cell,
        }
    }

    pub fn reset(&self) -> State {
        State { cell: self.initial_cell, t_rem: self.cfg.mission.n_slots }
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    /// Feature vector (x, y, z mapped affinely to [-1, 1], t_rem/N).
    pub fn features(&self, state: State) -> [f64; 4] {
        let q = self.grid.position(state.cell);
        let m = &self.cfg.mission;
        let mut f = [0.0; 4];
        for a in 0..3 {
            f[a] = 2.0 * (q[a] - m.grid_lower[a]) / (m.grid_upper[a] - m.grid_lower[a]) - 1.0;
        }
        f[3] = state.t_rem as f64 / m.n_slots as f64;
        f
    }

    fn solve_cell(&self, cell: usize) -> Result<Option<CellResponse>, EnvError> {
        let q = self.grid.position(cell);
        let mut stream = derive_stream(self.cfg.seed, "channel");
        let ch = match build_channels(q, &self.cfg, ChannelMode::Expected, &mut stream) {
            Ok(ch) => ch,
            // a lattice point coinciding with a node is unservable; treat
            // like an infeasible cell
            Err(ChannelError::DegenerateGeometry(_)) => return Ok(None),
        };
        match follower::sca_solve(&ch, &self.cfg, &self.settings) {
            Ok((sol, trace)) => {
                let (dlp, ulp, rsp) = sol.power_split();
                Ok(Some(CellResponse {
                    u1: sol.u1,
                    dlp,
                    ulp,
                    rsp,
                    sca_iterations: trace.iterations,
                    feasible: true,
                    degraded: trace.status == ScaStatus::Degraded,
                }))
            }
            Err(FollowerError::InfeasibleScenario { .. }) => Ok(None),
            Err(source) => Err(EnvError::Follower { cell, source }),
        }
    }

    fn sentinel_u1(cache: &HashMap<usize, CellResponse>) -> f64 {
        cache
            .values()
            .filter(|r| r.feasible)
            .map(|r| r.u1)
            .fold(0.0, f64::max)
    }

    /// Follower best response at a cell: cache hit or solve-and-insert.
    /// Infeasible cells carry the grid-maximum feasible u1 as a sentinel
    /// (the leader gains nothing from driving the follower infeasible).
    pub fn response(&self, cell: usize) -> Result<CellResponse, EnvError> {
        let lookup_cell = match self.mode {
            ResponseMode::Responsive => cell,
            ResponseMode::FrozenInitial => self.initial_cell,
        };
        if let Some(r) = self.cache.read().expect("cache lock").get(&lookup_cell) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(*r);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let response = match self.mode {
            ResponseMode::Responsive => self.solve_cell(lookup_cell)?,
            ResponseMode::FrozenInitial => self.frozen_response()?,
        };
        let mut cache = self.cache.write().expect("cache lock");
        let resolved = match response {
            Some(r) => r,
            None => CellResponse {
                u1: Self::sentinel_u1(&cache),
                dlp: 0.0,
                ulp: 0.0,
                rsp: 0.0,
                sca_iterations: 0,
                feasible: false,
                degraded: false,
            },
        };
        Ok(*cache.entry(lookup_cell).or_insert(resolved))
    }

    /// Phase-1 allocation at the initial cell (baseline mode).
    fn frozen_response(&self) -> Result<Option<CellResponse>, EnvError> {
        let q = self.grid.position(self.initial_cell);
        let mut stream = derive_stream(self.cfg.seed, "channel");
        let ch = build_channels(q, &self.cfg, ChannelMode::Expected, &mut stream)
            .map_err(EnvError::Channel)?;
        match follower::initialize_local_point(&ch, &self.cfg, &self.settings) {
            Ok((_, sol, _)) => {
                let (dlp, ulp, rsp) = sol.power_split();
                Ok(Some(CellResponse {
                    u1: sol.u1,
                    dlp,
                    ulp,
                    rsp,
                    sca_iterations: 0,
                    feasible: true,
                    degraded: false,
                }))
            }
            Err(FollowerError::InfeasibleScenario { .. }) => Ok(None),
            Err(source) => Err(EnvError::Follower { cell: self.initial_cell, source }),
        }
    }

    /// Solve every cell up front. With the `parallel` feature the cells are
    /// distributed over the rayon pool; results are inserted in cell order
    /// so the cache contents do not depend on scheduling.
    pub fn prewarm(&self) -> Result<(), EnvError> {
        if self.mode == ResponseMode::FrozenInitial {
            self.response(self.initial_cell)?;
            return Ok(());
        }
        let todo: Vec<usize> = {
            let cache = self.cache.read().expect("cache lock");
            (0..self.grid.n_cells()).filter(|c| !cache.contains_key(c)).collect()
        };
        let solved = self.solve_cells(&todo)?;
        let mut cache = self.cache.write().expect("cache lock");
        for (cell, response) in todo.iter().zip(&solved) {
            if let Some(r) = response {
                cache.insert(*cell, *r);
            }
        }
        let sentinel = Self::sentinel_u1(&cache);
        for (cell, response) in todo.iter().zip(&solved) {
            if response.is_none() {
                cache.insert(
                    *cell,
                    CellResponse {
                        u1: sentinel,
                        dlp: 0.0,
                        ulp: 0.0,
                        rsp: 0.0,
                        sca_iterations: 0,
                        feasible: false,
                        degraded: false,
                    },
                );
            }
        }
        self.misses.fetch_add(todo.len() as u64, Ordering::Relaxed);
        Ok(())
    }

    #[cfg(feature = "parallel")]
    fn solve_cells(&self, cells: &[usize]) -> Result<Vec<Option<CellResponse>>, EnvError> {
        cells.par_iter().map(|&c| self.solve_cell(c)).collect()
    }

    #[cfg(not(feature = "parallel"))]
    fn solve_cells(&self, cells: &[usize]) -> Result<Vec<Option<CellResponse>>, EnvError> {
        self.solve_cells_seq(cells)
    }

    /// Sequential fallback (also the comparison arm of the bench suite).
    pub fn solve_cells_seq(&self, cells: &[usize]) -> Result<Vec<Option<CellResponse>>, EnvError> {
        cells.iter().map(|&c| self.solve_cell(c)).collect()
    }

    pub fn cache_stats(&self) -> CacheStats {
        let cache = self.cache.read().expect("cache lock");
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: cache.len(),
            infeasible_cells: cache.values().filter(|r| !r.feasible).count(),
        }
    }

    /// Normalization denominators (u1_max, pf_max): configured overrides, or
    /// auto-computed from the prewarmed grid and the action table.
    pub fn normalization(&self) -> Result<(f64, f64), EnvError> {
        if let Some(n) = *self.norm.read().expect("norm lock") {
            return Ok(n);
        }
        let pf_max = self.cfg.game.pf_max.unwrap_or_else(|| {
            self.actions
                .iter()
                .map(|a| flight_power(a.velocity, &self.cfg.flight))
                .fold(0.0, f64::max)
        });
        let u1_max = match self.cfg.game.u1_max {
            Some(v) => v,
            None => {
                self.prewarm()?;
                let cache = self.cache.read().expect("cache lock");
                Self::sentinel_u1(&cache).max(1e-300)
            }
        };
        let mut slot = self.norm.write().expect("norm lock");
        *slot = Some((u1_max, pf_max));
        Ok((u1_max, pf_max))
    }

    /// One deterministic transition. Uses the post-decrement remaining time
    /// in both the main-objective weight and the distance penalty; the goal
    /// bonus takes precedence over the timeout penalty when both trigger.
    pub fn step(&self, state: State, action: usize) -> Result<StepOutcome, EnvError> {
        let q = self.grid.position(state.cell);
        if state.t_rem == 0 || kinematics::in_goal_region(q, &self.cfg.mission) {
            return Err(EnvError::EpisodeFinished);
        }
        let act = self.actions[action];
        let q_next = kinematics::next_position(q, act.velocity, self.cfg.mission.delta_t);
        let t_rem = state.t_rem - 1;
        let p_f = flight_power(act.velocity, &self.cfg.flight);

        let violations = kinematics::check_mobility(q, q_next, &self.cfg.mission);
        if !violations.is_empty() {
            let follower = self.response(state.cell)?;
            let done = t_rem == 0;
            return Ok(StepOutcome {
                next: State { cell: state.cell, t_rem },
                reward: self.cfg.reward.p_fail,
                breakdown: RewardBreakdown { r_main: 0.0, p_dist: 0.0, bonus: self.cfg.reward.p_fail },
                done,
                done_reason: if done { DoneReason::Timeout } else { DoneReason::None },
                follower,
                flight_power: p_f,
                rejected: true,
            });
        }

        let cell_next = self
            .grid
            .cell_of(q_next)
            .expect("legal moves land on the lattice");
        let follower = self.response(cell_next)?;
        let (u1_max, pf_max) = self.normalization()?;
        let lambda = self.cfg.game.lambda;
        let u2_norm = lambda * follower.u1 / u1_max - (1.0 - lambda) * p_f / pf_max;

        let t_frac = (t_rem as f64 * self.cfg.mission.delta_t) / self.cfg.mission.t_max;
        let r_main = t_frac * u2_norm;
        let p_dist = distance_penalty(q_next, t_rem, &self.cfg.mission);

        let in_goal = kinematics::in_goal_region(q_next, &self.cfg.mission);
        let (bonus, done, done_reason) = if in_goal {
            (self.cfg.reward.r_goal, true, DoneReason::Goal)
        } else if t_rem == 0 {
            (self.cfg.reward.p_fail, true, DoneReason::Timeout)
        } else {
            (0.0, false, DoneReason::None)
        };

        let reward = self.cfg.reward.eta1 * r_main + self.cfg.reward.eta2 * p_dist + bonus;
        Ok(StepOutcome {
            next: State { cell: cell_next, t_rem },
            reward,
            breakdown: RewardBreakdown {
                r_main: self.cfg.reward.eta1 * r_main,
                p_dist: self.cfg.reward.eta2 * p_dist,
                bonus,
            },
            done,
            done_reason,
            follower,
            flight_power: p_f,
            rejected: false,
        })
    }
}
