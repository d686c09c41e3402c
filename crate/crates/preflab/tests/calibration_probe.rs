//! Scratch probe for tuning CEM and environment constants. Ignored by
//! default; run with `cargo test --test calibration_probe -- --ignored --nocapture`.

use preflab::datagen::Policy;
use preflab::envs::{EnvConfig, EnvId};
use preflab::policyopt::{evaluate, optimize, CemConfig, RewardFn};
use std::time::Instant;

#[test]
#[ignore]
fn probe_cem_on_ground_truth() {
    for env in EnvId::ALL {
        let cfg = EnvConfig::defaults(env);
        for seed in 0..3u64 {
            let t0 = Instant::now();
            let cem = CemConfig::for_env(env, seed);
            let (net, result) = optimize(&cfg, RewardFn::GroundTruth, &cem).unwrap();
            let eval = evaluate(&cfg, &Policy::Net(net), RewardFn::GroundTruth, 100, 1000 + seed).unwrap();
            println!(
                "{env} seed {seed}: return {:.2} success {:?} final_dist {:.4} best_score {:.2} discarded {} [{:.1}s]",
                eval.mean_return,
                eval.success_rate,
                eval.mean_final_goal_dist,
                result.best_score,
                result.discarded,
                t0.elapsed().as_secs_f64()
            );
        }
    }
}
