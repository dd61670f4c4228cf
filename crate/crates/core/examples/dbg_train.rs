use isac_core::config::{default_scenario, derive_stream, Profile};
use isac_core::ddqn::{greedy_rollout, train};
use isac_core::follower::ScaSettings;
use isac_core::leader_env::LeaderEnv;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    for seed in [1u64, 2, 3, 4, 5] {
        let mut cfg = default_scenario(Profile::Desk);
        cfg.seed = seed;
        let env = LeaderEnv::new(cfg, ScaSettings::default()).unwrap();
        env.prewarm().unwrap();
        let t1 = Instant::now();
        let mut rng = derive_stream(seed, "agent");
        let (agent, stats) = train(&env, &mut rng).unwrap();
        let final50 = &stats[stats.len() - 50..];
        let goal_rate = final50.iter().filter(|s| s.reached_goal).count() as f64 / 50.0;
        let (traj, ret) = greedy_rollout(&agent.online, &env).unwrap();
        println!(
            "seed {seed}: goal_rate(final50)={goal_rate:.2} greedy_return={ret:.2} traj_len={} train_time={:?}",
            traj.len(),
            t1.elapsed()
        );
        let last = traj.last().unwrap();
        println!("  final pos {:?} reason {:?} mean_ret(final50)={:.1}",
            last.position, last.done_reason,
            final50.iter().map(|s| s.ret).sum::<f64>() / 50.0);
    }
    println!("total {:?}", t0.elapsed());
}
