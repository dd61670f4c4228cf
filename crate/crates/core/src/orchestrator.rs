//! End-to-end runs: two-time-scale Stackelberg training, the frozen-follower
//! baseline, an exhaustive leader oracle, CNR and lambda sweeps, and all
//! file output (manifest plus CSV artifacts). Everything is reproducible
//! from (scenario, seed); the manifest records what a rerun needs.

use crate::channel::build_channels;
use crate::config::{derive_stream, ChannelMode, Point3, ScenarioConfig};
use crate::ddqn::{self, Agent, EpisodeStats, TrajectoryStep};
use crate::follower::{self, FollowerError, ScaSettings, ScaTrace};
use crate::leader_env::{CacheStats, DoneReason, EnvError, LeaderEnv, State};
use crate::metrics;
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("oracle horizon {0} exceeds the tractable bound (18^h <= ~2e6, i.e. h <= 5)")]
    HorizonTooLarge(u32),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Follower(#[from] FollowerError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything needed to reproduce a run bitwise, plus cache accounting.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub lambda: f64,
    pub baseline: bool,
    pub timestamp_unix_s: u64,
    pub u1_max: f64,
    pub pf_max: f64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub cache_entries: usize,
    pub infeasible_cells: usize,
}

/// Per-cell follower summary row (the follower_cells.csv shape).
#[derive(Debug, Clone, Serialize)]
pub struct CellRow {
    pub cell: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u1: f64,
    pub dlp: f64,
    pub ulp: f64,
    pub rsp: f64,
    pub sca_iterations: u32,
    pub feasible: bool,
    pub degraded: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub manifest: RunManifest,
    pub stats: Vec<EpisodeStats>,
    pub trajectory: Vec<TrajectoryStep>,
    pub greedy_return: f64,
    pub cells: Vec<CellRow>,
    pub agent: Agent,
    /// Mean network power along the greedy trajectory.
    pub mean_npc: f64,
    /// Mean per-episode summed normalized utility over the final 50
    /// episodes.
    pub final50_mean_u2: f64,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn manifest_for(
    cfg: &ScenarioConfig,
    env: &LeaderEnv,
    baseline: bool,
) -> Result<RunManifest, EnvError> {
    let (u1_max, pf_max) = env.normalization()?;
    let CacheStats { hits, misses, entries, infeasible_cells } = env.cache_stats();
    Ok(RunManifest {
        schema_version: 1,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_digest: cfg.digest(),
        seed: cfg.seed,
        lambda: cfg.game.lambda,
        baseline,
        timestamp_unix_s: now_unix(),
        u1_max,
        pf_max,
        cache_hits: hits,
        cache_misses: misses,
        cache_entries: entries,
        infeasible_cells,
    })
}

fn cell_rows(env: &LeaderEnv) -> Result<Vec<CellRow>, EnvError> {
    let mut rows = Vec::with_capacity(env.grid.n_cells());
    for cell in 0..env.grid.n_cells() {
        let r = env.response(cell)?;
        let q = env.grid.position(cell);
        rows.push(CellRow {
            cell,
            x: q[0],
            y: q[1],
            z: q[2],
            u1: r.u1,
            dlp: r.dlp,
            ulp: r.ulp,
            rsp: r.rsp,
            sca_iterations: r.sca_iterations,
            feasible: r.feasible,
            degraded: r.degraded,
        });
    }
    Ok(rows)
}

fn final50_mean_u2(stats: &[EpisodeStats]) -> f64 {
    let tail = &stats[stats.len().saturating_sub(50)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().map(|s| s.sum_u2_norm).sum::<f64>() / tail.len() as f64
}

fn run_on_env(
    cfg: &ScenarioConfig,
    env: &LeaderEnv,
    baseline: bool,
) -> Result<ExperimentResult, OrchestratorError> {
    let mut rng = derive_stream(cfg.seed, "agent");
    let (agent, stats) = ddqn::train(env, &mut rng)?;
    let (trajectory, greedy_return) = ddqn::greedy_rollout(&agent.online, env)?;
    let mean_npc = if trajectory.is_empty() {
        0.0
    } else {
        trajectory.iter().map(|s| s.u1).sum::<f64>() / trajectory.len() as f64
    };
    let final50 = final50_mean_u2(&stats);
    let cells = cell_rows(env)?;
    let manifest = manifest_for(cfg, env, baseline)?;
    Ok(ExperimentResult {
        manifest,
        stats,
        trajectory,
        greedy_return,
        cells,
        agent,
        mean_npc,
        final50_mean_u2: final50,
    })
}

/// Full two-time-scale game run: prewarm the follower cache over the grid
/// (fast time scale), then train the leader across episodes (slow time
/// scale).
pub fn run_stackelberg(cfg: &ScenarioConfig) -> Result<ExperimentResult, OrchestratorError> {
    cfg.validate()?;
    let env = LeaderEnv::new(cfg.clone(), ScaSettings::default())?;
    env.prewarm()?;
    run_on_env(cfg, &env, false)
}

/// Benchmark run: identical leader training, but the follower response is
/// frozen at the feasibility-phase allocation of the initial cell. The
/// normalized-utility denominators are taken from the responsive grid so
/// both schemes are scored on the same scale.
pub fn run_baseline(cfg: &ScenarioConfig) -> Result<ExperimentResult, OrchestratorError> {
    cfg.validate()?;
    let mut shared = cfg.clone();
    if shared.game.u1_max.is_none() || shared.game.pf_max.is_none() {
        let responsive = LeaderEnv::new(cfg.clone(), ScaSettings::default())?;
        responsive.prewarm()?;
        let (u1_max, pf_max) = responsive.normalization()?;
        shared.game.u1_max = Some(u1_max);
        shared.game.pf_max = Some(pf_max);
    }
    let env = LeaderEnv::new_baseline(shared.clone(), ScaSettings::default())?;
    run_on_env(&shared, &env, true)
}

/// Exhaustive depth-first enumeration of all action sequences up to
/// `horizon`, using the exact environment step and discounting. Returns the
/// maximizing sequence (lexicographically smallest among ties) and its
/// discounted return.
pub fn brute_force_leader(
    env: &LeaderEnv,
    horizon: u32,
) -> Result<(Vec<usize>, f64), OrchestratorError> {
    let n_actions = env.n_actions() as f64;
    if n_actions.powi(horizon as i32) > 2.5e6 {
        return Err(OrchestratorError::HorizonTooLarge(horizon));
    }
    let discount = env.cfg.agent.discount;
    let mut best_return = f64::NEG_INFINITY;
    let mut best_actions: Vec<usize> = Vec::new();
    let mut prefix: Vec<usize> = Vec::new();

    fn dfs(
        env: &LeaderEnv,
        state: State,
        depth_left: u32,
        acc: f64,
        disc: f64,
        discount: f64,
        prefix: &mut Vec<usize>,
        best_return: &mut f64,
        best_actions: &mut Vec<usize>,
    ) -> Result<(), OrchestratorError> {
        if depth_left == 0 {
            if acc > *best_return {
                *best_return = acc;
                *best_actions = prefix.clone();
            }
            return Ok(());
        }
        for a in 0..env.n_actions() {
            let out = env.step(state, a)?;
            prefix.push(a);
            let total = acc + disc * out.reward;
            if out.done {
                if total > *best_return {
                    *best_return = total;
                    *best_actions = prefix.clone();
                }
            } else {
                dfs(
                    env,
                    out.next,
                    depth_left - 1,
                    total,
                    disc * discount,
                    discount,
                    prefix,
                    best_return,
                    best_actions,
                )?;
            }
            prefix.pop();
        }
        Ok(())
    }

    dfs(
        env,
        env.reset(),
        horizon,
        0.0,
        1.0,
        discount,
        &mut prefix,
        &mut best_return,
        &mut best_actions,
    )?;
    Ok((best_actions, best_return))
}

/// Power split of one solve at one CNR point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PowerPoint {
    pub feasible: bool,
    pub dlp: f64,
    pub ulp: f64,
    pub rsp: f64,
    pub npc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CnrPoint {
    /// None encodes no clutter (CNR -> -inf).
    pub cnr_db: Option<f64>,
    pub an: PowerPoint,
    pub no_an: PowerPoint,
}

fn solve_point(
    cfg: &ScenarioConfig,
    q_e: Point3,
    with_an: bool,
) -> Result<PowerPoint, OrchestratorError> {
    let mut rng = derive_stream(cfg.seed, "channel");
    let ch = build_channels(q_e, cfg, ChannelMode::Expected, &mut rng)?;
    let settings = ScaSettings::default();
    let solved = if with_an {
        follower::sca_solve(&ch, cfg, &settings)
    } else {
        follower::without_an_solve(&ch, cfg, &settings)
    };
    match solved {
        Ok((sol, _)) => {
            let (dlp, ulp, rsp) = sol.power_split();
            Ok(PowerPoint { feasible: true, dlp, ulp, rsp, npc: sol.u1 })
        }
        Err(FollowerError::InfeasibleScenario { .. }) => {
            Ok(PowerPoint { feasible: false, dlp: 0.0, ulp: 0.0, rsp: 0.0, npc: f64::NAN })
        }
        Err(e) => Err(e.into()),
    }
}

/// Clutter sweep at a fixed leader position: for each CNR, solve the AN and
/// no-AN pipelines and report the power splits. Points are independent and
/// solved in parallel when the feature is enabled.
pub fn sweep_cnr(
    cfg: &ScenarioConfig,
    q_e: Point3,
    cnr_list: &[Option<f64>],
) -> Result<Vec<CnrPoint>, OrchestratorError> {
    cfg.validate()?;
    let configs: Vec<(Option<f64>, ScenarioConfig)> = cnr_list
        .iter()
        .map(|&cnr| {
            let mut c = cfg.clone();
            c.channel.clutter.cnr_db = cnr;
            (cnr, c)
        })
        .collect();
    let solve_one = |(cnr, c): &(Option<f64>, ScenarioConfig)| -> Result<CnrPoint, OrchestratorError> {
        Ok(CnrPoint {
            cnr_db: *cnr,
            an: solve_point(c, q_e, true)?,
            no_an: solve_point(c, q_e, false)?,
        })
    };
    #[cfg(feature = "parallel")]
    let points: Result<Vec<_>, _> = configs.par_iter().map(solve_one).collect();
    #[cfg(not(feature = "parallel"))]
    let points: Result<Vec<_>, _> = configs.iter().map(solve_one).collect();
    points
}

#[derive(Debug)]
pub struct LambdaOutcome {
    pub lambda: f64,
    pub result: ExperimentResult,
    /// Network power summed along the greedy trajectory.
    pub sum_u1: f64,
    /// Flight power summed along the greedy trajectory.
    pub sum_pf: f64,
}

/// Train one leader per lambda value and collect the greedy-trajectory
/// power usage of both players.
pub fn sweep_lambda(
    cfg: &ScenarioConfig,
    lambdas: &[f64],
) -> Result<Vec<LambdaOutcome>, OrchestratorError> {
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut c = cfg.clone();
        c.game.lambda = lambda;
        let result = run_stackelberg(&c)?;
        let sum_u1 = result.trajectory.iter().map(|s| s.u1).sum();
        let sum_pf = result.trajectory.iter().map(|s| s.flight_power).sum();
        out.push(LambdaOutcome { lambda, result, sum_u1, sum_pf });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// file output
// ---------------------------------------------------------------------------

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path, json)
}

pub fn write_stats_csv(path: &Path, stats: &[EpisodeStats]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", EpisodeStats::csv_header())?;
    for s in stats {
        writeln!(f, "{}", s.csv_row())?;
    }
    Ok(())
}

pub fn write_trajectory_csv(path: &Path, traj: &[TrajectoryStep]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "step,x,y,z,action,reward,r_main,p_dist,u1,p_f,done_reason")?;
    for s in traj {
        let reason = match s.done_reason {
            DoneReason::Goal => "goal",
            DoneReason::Timeout => "timeout",
            DoneReason::None => "",
        };
        writeln!(
            f,
            "{},{:.6},{:.6},{:.6},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            s.step, s.position[0], s.position[1], s.position[2], s.action, s.reward, s.r_main,
            s.p_dist, s.u1, s.flight_power, reason
        )?;
    }
    Ok(())
}

pub fn write_cells_csv(path: &Path, cells: &[CellRow]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "cell,x,y,z,u1,dlp,ulp,rsp,sca_iterations,feasible,degraded")?;
    for c in cells {
        writeln!(
            f,
            "{},{:.6},{:.6},{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{}",
            c.cell,
            c.x,
            c.y,
            c.z,
            c.u1,
            c.dlp,
            c.ulp,
            c.rsp,
            c.sca_iterations,
            c.feasible as u8,
            c.degraded as u8
        )?;
    }
    Ok(())
}

pub fn write_sca_trace_csv(path: &Path, trace: &ScaTrace) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{}", ScaTrace::csv_header())?;
    for row in trace.csv_rows() {
        writeln!(f, "{row}")?;
    }
    Ok(())
}

pub fn write_cnr_csv(path: &Path, points: &[CnrPoint]) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(
        f,
        "cnr_db,an_feasible,an_dlp,an_ulp,an_rsp,an_npc,noan_feasible,noan_dlp,noan_ulp,noan_rsp,noan_npc"
    )?;
    for p in points {
        let cnr = p.cnr_db.map_or("-inf".to_string(), |v| format!("{v}"));
        writeln!(
            f,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e}",
            cnr,
            p.an.feasible as u8,
            p.an.dlp,
            p.an.ulp,
            p.an.rsp,
            p.an.npc,
            p.no_an.feasible as u8,
            p.no_an.dlp,
            p.no_an.ulp,
            p.no_an.rsp,
            p.no_an.npc
        )?;
    }
    Ok(())
}

/// Write the full artifact set of one experiment into a run directory:
/// manifest.json, stats.csv, trajectory.csv, follower_cells.csv, and the
/// agent checkpoint.
pub fn write_experiment(dir: &Path, result: &ExperimentResult) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_manifest(&dir.join("manifest.json"), &result.manifest)?;
    write_stats_csv(&dir.join("stats.csv"), &result.stats)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &result.trajectory)?;
    write_cells_csv(&dir.join("follower_cells.csv"), &result.cells)?;
    result.agent.save(&dir.join("checkpoint.json"))?;
    Ok(())
}

/// One follower solve at an explicit position, with trace and true-metric
/// report (the solve-follower CLI path).
pub struct FollowerRun {
    pub solution: crate::metrics::FollowerSolution,
    pub trace: ScaTrace,
    pub report: crate::metrics::MetricsReport,
    pub verify: follower::VerifyReport,
}

pub fn solve_follower_at(
    cfg: &ScenarioConfig,
    q_e: Point3,
    with_an: bool,
) -> Result<FollowerRun, OrchestratorError> {
    cfg.validate()?;
    let mut rng = derive_stream(cfg.seed, "channel");
    let ch = build_channels(q_e, cfg, ChannelMode::Expected, &mut rng)?;
    let settings = ScaSettings::default();
    let (solution, trace) = if with_an {
        follower::sca_solve(&ch, cfg, &settings)?
    } else {
        follower::without_an_solve(&ch, cfg, &settings)?
    };
    let report = metrics::report(&ch, &solution, cfg)?;
    let verify = follower::verify_solution(&ch, &solution, cfg, 1e-4)?;
    Ok(FollowerRun { solution, trace, report, verify })
}
