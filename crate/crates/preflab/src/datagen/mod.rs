//! Ranked demonstration generation.
//!
//! Three mechanisms produce quality-graded trajectory sets: expert rollouts
//! perturbed with per-step epsilon noise, blend policies standing in for
//! partially trained checkpoints, and scripted quality tiers standing in
//! for teleoperated demonstrations. Rollouts are embarrassingly parallel;
//! each one derives its RNG from `(seed, trajectory index)`.

mod policy;
mod trajectory;

pub use policy::Policy;
pub use trajectory::{
    store_from_str, store_hash, store_to_string, trajectory_to_line, SourceTag, TrajStep,
    Trajectory,
};

use crate::envs::{self, EnvConfig, EnvId};
use crate::error::{Error, Result};
use crate::exec;
use crate::rng;

pub const DEFAULT_EPS_LEVELS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
pub const DEFAULT_CHECKPOINT_FRACTIONS: [f64; 6] = [0.01, 0.05, 0.1, 0.2, 0.8, 1.0];
pub const DEFAULT_ROLLOUTS_PER_LEVEL: usize = 20;

const TAG_EPSILON: u64 = 0xe15;
const TAG_CHECKPOINT: u64 = 0xc4e;
const TAG_TIER: u64 = 0x71e;
const TAG_RESET: u64 = 1;
const TAG_POLICY: u64 = 2;

/// Runs one seeded episode and records every step.
pub fn rollout(
    cfg: &EnvConfig,
    policy: &Policy,
    id: u32,
    source: SourceTag,
    episode_seed: u64,
) -> Trajectory {
    let mut state = envs::reset(cfg, rng::mix(episode_seed, &[TAG_RESET]));
    let mut policy_rng = rng::stream(episode_seed, &[TAG_POLICY]);
    let mut steps = Vec::with_capacity(cfg.horizon);
    let mut obs = envs::raw_obs(&state);
    for t in 0..cfg.horizon {
        let action = policy.act(cfg, &obs, t, &mut policy_rng);
        let res = envs::step(cfg, &state, &action).expect("action dim fixed by construction");
        steps.push(TrajStep {
            raw: res.raw_obs.clone(),
            privileged: res.priv_obs,
            a: action,
            r: res.gt_reward,
        });
        obs = res.raw_obs;
        state = res.next_state;
    }
    let ret = steps.iter().fold(0.0, |acc, s| acc + s.r);
    let raws: Vec<Vec<f64>> = steps.iter().map(|s| s.raw.clone()).collect();
    let success = envs::success_from_raw_steps(cfg.env, cfg, &raws);
    Trajectory {
        id,
        env: cfg.env,
        source,
        ret,
        success,
        steps,
    }
}

/// Expert rollouts with per-step epsilon noise: with probability `eps` the
/// action is uniform over the action box, otherwise the expert acts.
/// Defaults produce 6 levels x 20 rollouts = 120 trajectories.
pub fn epsilon_rollouts(
    cfg: &EnvConfig,
    eps_levels: &[f64],
    n_per_level: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if eps_levels.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::invalid("epsilon levels must lie in [0, 1]"));
    }
    if eps_levels.is_empty() || n_per_level == 0 {
        return Err(Error::invalid("need at least one level and one rollout"));
    }
    let cfg = cfg.clone();
    let levels = eps_levels.to_vec();
    let total = levels.len() * n_per_level;
    Ok(exec::par_map(total, move |idx| {
        let level = idx / n_per_level;
        let policy = Policy::Blend {
            expert_prob: 1.0 - levels[level],
        };
        let episode_seed = rng::mix(seed, &[TAG_EPSILON, idx as u64]);
        rollout(&cfg, &policy, idx as u32, SourceTag::Epsilon, episode_seed)
    }))
}

/// Skill level of a checkpoint at training fraction `f`: the blend policy
/// acts as the expert with probability `sqrt(f)`, a monotone stand-in for a
/// partially trained policy.
pub fn checkpoint_skill(fraction: f64) -> f64 {
    fraction.sqrt()
}

/// Rollouts from simulated training checkpoints at the given fractions.
pub fn checkpoint_rollouts(
    cfg: &EnvConfig,
    fractions: &[f64],
    n_per_checkpoint: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::invalid("checkpoint fractions must lie in [0, 1]"));
    }
    if fractions.is_empty() || n_per_checkpoint == 0 {
        return Err(Error::invalid("need at least one checkpoint and one rollout"));
    }
    let cfg = cfg.clone();
    let fractions = fractions.to_vec();
    let total = fractions.len() * n_per_checkpoint;
    Ok(exec::par_map(total, move |idx| {
        let level = idx / n_per_checkpoint;
        let policy = Policy::Blend {
            expert_prob: checkpoint_skill(fractions[level]),
        };
        let episode_seed = rng::mix(seed, &[TAG_CHECKPOINT, idx as u64]);
        rollout(&cfg, &policy, idx as u32, SourceTag::Checkpoint, episode_seed)
    }))
}

/// Tier sizes for the scripted demonstration set: success, fail, mixed.
pub const TIER_COUNTS: (usize, usize, usize) = (8, 7, 5);

/// Twenty scripted demonstrations in three quality tiers (8 task
/// completions, 7 failures, 5 mixed). Only defined for tasks with a
/// success criterion.
pub fn tiered_demos(cfg: &EnvConfig, seed: u64) -> Result<Vec<Trajectory>> {
    if !cfg.env.has_success() {
        return Err(Error::invalid(format!(
            "{} has no success definition; tiered demos are unavailable",
            cfg.env
        )));
    }
    let (n_succ, n_fail, n_half) = TIER_COUNTS;
    let cfg = cfg.clone();
    Ok(exec::par_map(n_succ + n_fail + n_half, move |idx| {
        let policy = if idx < n_succ {
            Policy::ScriptedExpert
        } else if idx < n_succ + n_fail {
            Policy::ScriptedFail
        } else {
            Policy::ScriptedHalf {
                level: (idx - n_succ - n_fail) as u32,
            }
        };
        let episode_seed = rng::mix(seed, &[TAG_TIER, idx as u64]);
        rollout(&cfg, &policy, idx as u32, SourceTag::Tier, episode_seed)
    }))
}

/// Mean return per consecutive block of `n_per_level` trajectories.
pub fn mean_return_per_level(trajs: &[Trajectory], n_per_level: usize) -> Vec<f64> {
    trajs
        .chunks(n_per_level)
        .map(|chunk| chunk.iter().map(|t| t.ret).sum::<f64>() / chunk.len() as f64)
        .collect()
}

/// Convenience: the standard 120-trajectory epsilon-noise set.
pub fn default_epsilon_set(env: EnvId, seed: u64) -> Vec<Trajectory> {
    let cfg = EnvConfig::defaults(env);
    epsilon_rollouts(&cfg, &DEFAULT_EPS_LEVELS, DEFAULT_ROLLOUTS_PER_LEVEL, seed)
        .expect("default levels are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::spearman;

    #[test]
    fn default_set_has_120_trajectories() {
        let trajs = default_epsilon_set(EnvId::Reacher, 7);
        assert_eq!(trajs.len(), 120);
        let cfg = EnvConfig::defaults(EnvId::Reacher);
        assert!(trajs.iter().all(|t| t.steps.len() == cfg.horizon));
    }

    #[test]
    fn epsilon_zero_matches_pure_expert_rollout() {
        let cfg = EnvConfig::defaults(EnvId::Feeding);
        let noisy = epsilon_rollouts(&cfg, &[0.0], 3, 99).unwrap();
        for (idx, t) in noisy.iter().enumerate() {
            let episode_seed = rng::mix(99, &[TAG_EPSILON, idx as u64]);
            let pure = rollout(
                &cfg,
                &Policy::ScriptedExpert,
                idx as u32,
                SourceTag::Epsilon,
                episode_seed,
            );
            assert_eq!(trajectory_to_line(t), trajectory_to_line(&pure));
        }
    }

    #[test]
    fn epsilon_set_is_seed_deterministic() {
        let a = store_hash(&default_epsilon_set(EnvId::Itch, 5));
        let b = store_hash(&default_epsilon_set(EnvId::Itch, 5));
        let c = store_hash(&default_epsilon_set(EnvId::Itch, 6));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn epsilon_monotonicity_across_all_envs() {
        for env in EnvId::ALL {
            let trajs = default_epsilon_set(env, 13);
            let means = mean_return_per_level(&trajs, DEFAULT_ROLLOUTS_PER_LEVEL);
            let rho = spearman(&DEFAULT_EPS_LEVELS, &means);
            assert!(
                rho <= -0.9,
                "{env}: spearman(eps, mean return) = {rho}, means {means:?}"
            );
        }
    }

    #[test]
    fn checkpoint_extremes_behave_like_expert_and_random() {
        let cfg = EnvConfig::defaults(EnvId::Feeding);
        // f = 1 is the expert: identical actions to a pure expert rollout.
        let full = checkpoint_rollouts(&cfg, &[1.0], 2, 4).unwrap();
        for (idx, t) in full.iter().enumerate() {
            let episode_seed = rng::mix(4, &[TAG_CHECKPOINT, idx as u64]);
            let pure = rollout(
                &cfg,
                &Policy::ScriptedExpert,
                idx as u32,
                SourceTag::Checkpoint,
                episode_seed,
            );
            assert_eq!(trajectory_to_line(t), trajectory_to_line(&pure));
        }
        // f = 0 is the random policy.
        let none = checkpoint_rollouts(&cfg, &[0.0], 2, 4).unwrap();
        for (idx, t) in none.iter().enumerate() {
            let episode_seed = rng::mix(4, &[TAG_CHECKPOINT, idx as u64]);
            let pure = rollout(
                &cfg,
                &Policy::Random,
                idx as u32,
                SourceTag::Checkpoint,
                episode_seed,
            );
            assert_eq!(trajectory_to_line(t), trajectory_to_line(&pure));
        }
    }

    #[test]
    fn checkpoint_fractions_order_mean_returns() {
        let cfg = EnvConfig::defaults(EnvId::Feeding);
        let trajs = checkpoint_rollouts(&cfg, &[0.01, 1.0], 20, 11).unwrap();
        let means = mean_return_per_level(&trajs, 20);
        assert!(
            means[1] > means[0],
            "expected f=1.0 to beat f=0.01: {means:?}"
        );
    }

    #[test]
    fn tiered_demo_counts_and_quality_ordering() {
        for env in [EnvId::Feeding, EnvId::Itch] {
            let cfg = EnvConfig::defaults(env);
            let demos = tiered_demos(&cfg, 3).unwrap();
            assert_eq!(demos.len(), 20);
            let succ = &demos[0..8];
            let fail = &demos[8..15];
            let half = &demos[15..20];
            assert!(
                succ.iter().all(|t| t.success == Some(true)),
                "{env}: success tier must succeed"
            );
            let m = |xs: &[Trajectory]| xs.iter().map(|t| t.ret).sum::<f64>() / xs.len() as f64;
            let (ms, mh, mf) = (m(succ), m(half), m(fail));
            assert!(ms > mh && mh > mf, "{env}: tier ordering {ms} > {mh} > {mf}");
        }
    }

    #[test]
    fn tiered_demos_reject_reacher() {
        let cfg = EnvConfig::defaults(EnvId::Reacher);
        assert!(tiered_demos(&cfg, 3).is_err());
    }

    #[test]
    fn rollout_returns_resum_exactly() {
        let trajs = default_epsilon_set(EnvId::Feeding, 2);
        for t in &trajs {
            assert_eq!(t.ret.to_bits(), t.resummed_return().to_bits());
        }
    }
}
