use isac_core::channel::build_channels;
use isac_core::config::{default_scenario, derive_stream, ChannelMode, Profile};
use isac_core::follower::{sca_solve, ScaSettings};

fn main() {
    let cfg = default_scenario(Profile::Desk);
    let settings = ScaSettings::default();
    for pos in [[20.0, 20.0, 50.0], [40.0, 0.0, 45.0]] {
        let mut rng = derive_stream(cfg.seed, "channel");
        let ch = build_channels(pos, &cfg, ChannelMode::Expected, &mut rng).unwrap();
        let (_, trace) = sca_solve(&ch, &cfg, &settings).unwrap();
        println!("pos {:?} status {:?} phase1 iters {}", pos, trace.status, trace.phase1_elastic.len());
        for (i, u) in trace.u1.iter().enumerate() {
            if i == 0 {
                println!("  {i:>2}: u1={u:.8e}");
            } else {
                println!("  {i:>2}: u1={u:.8e} f_err={:.3e} res={:.2e}", trace.f_err[i-1], trace.residuals[i-1]);
            }
        }
    }
}
