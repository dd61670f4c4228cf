use isac_core::channel::build_channels;
use isac_core::config::{default_scenario, derive_stream, ChannelMode, Profile};
use isac_core::follower::{sca_solve, without_an_solve, ScaSettings};
use std::time::Instant;

fn main() {
    let cfg = default_scenario(Profile::Desk);
    let settings = ScaSettings::default();
    let t0 = Instant::now();
    let mut count = 0;
    println!("cell (x,y,z): u1 [dlp ulp rsp] iters time_ms  secrecy(dl ul) crlb");
    for &z in &[45.0, 50.0] {
        for &x in &[0.0, 20.0, 40.0] {
            for &y in &[0.0, 20.0, 40.0] {
                let mut rng = derive_stream(cfg.seed, "channel");
                let ch = build_channels([x, y, z], &cfg, ChannelMode::Expected, &mut rng).unwrap();
                let t = Instant::now();
                match sca_solve(&ch, &cfg, &settings) {
                    Ok((sol, trace)) => {
                        let (dlp, ulp, rsp) = sol.power_split();
                        let rep = isac_core::metrics::report(&ch, &sol, &cfg).unwrap();
                        println!(
                            "({x:>4},{y:>4},{z:>2}): {:.4e} [{:.2e} {:.2e} {:.2e}] it={} {:>5.0}ms  ({:.3} {:.3}) {:.2e}",
                            sol.u1, dlp, ulp, rsp, trace.iterations,
                            t.elapsed().as_secs_f64()*1e3, rep.secrecy_dl, rep.secrecy_ul, rep.crlb
                        );
                        count += 1;
                    }
                    Err(e) => println!("({x:>4},{y:>4},{z:>2}): ERROR {e}"),
                }
            }
        }
    }
    println!("total {:?} for {count} cells", t0.elapsed());
    // no-AN at center
    let mut rng = derive_stream(cfg.seed, "channel");
    let ch = build_channels([20.0, 20.0, 50.0], &cfg, ChannelMode::Expected, &mut rng).unwrap();
    let (no_an, _) = without_an_solve(&ch, &cfg, &settings).unwrap();
    let (an, _) = sca_solve(&ch, &cfg, &settings).unwrap();
    println!("center: an={:.4e} no_an={:.4e} ratio={:.3}", an.u1, no_an.u1, no_an.u1/an.u1);
}
