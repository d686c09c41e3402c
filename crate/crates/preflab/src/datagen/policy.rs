//! Controllers used for data generation and policy evaluation.
//!
//! Scripted controllers are deterministic functions of the current raw
//! observation (plus the step index for the phased tier controllers), so a
//! rollout is fully determined by the episode seed.

use crate::envs::{feeding, geom, itch, reacher, EnvConfig, EnvId};
use crate::policyopt::PolicyNet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub enum Policy {
    /// Proportional controller that solves the task.
    ScriptedExpert,
    /// Uniform random actions over the action box.
    Random,
    /// Acts as the expert with probability `expert_prob`, random otherwise.
    Blend { expert_prob: f64 },
    /// Parametric controller over raw observations.
    Net(PolicyNet),
    /// Tier controller that actively fails the task.
    ScriptedFail,
    /// Tier controller of intermediate quality; `level` varies how much of
    /// the task it completes.
    ScriptedHalf { level: u32 },
    /// Reward-hacking controller: maximizes contact force without doing the
    /// task (presses the head in feeding, the robot base in itch).
    Adversarial,
}

impl Policy {
    pub fn act(&self, cfg: &EnvConfig, obs: &[f64], t: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Policy::ScriptedExpert => expert_action(cfg, obs),
            Policy::Random => random_action(cfg, rng),
            Policy::Blend { expert_prob } => {
                // The degenerate probabilities skip the gate draw entirely,
                // so blend(0) and blend(1) reduce bitwise to the pure
                // policies.
                if *expert_prob >= 1.0 {
                    expert_action(cfg, obs)
                } else if *expert_prob <= 0.0 {
                    random_action(cfg, rng)
                } else {
                    let u: f64 = rng.random();
                    if u < *expert_prob {
                        expert_action(cfg, obs)
                    } else {
                        random_action(cfg, rng)
                    }
                }
            }
            Policy::Net(net) => net.act(cfg, obs),
            Policy::ScriptedFail => fail_action(cfg, obs),
            Policy::ScriptedHalf { level } => half_action(cfg, obs, t, *level),
            Policy::Adversarial => adversarial_action(cfg, obs),
        }
    }
}

fn random_action(cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = cfg.action_bound;
    vec![rng.random_range(-b..b), rng.random_range(-b..b)]
}

fn expert_action(cfg: &EnvConfig, obs: &[f64]) -> Vec<f64> {
    match cfg.env {
        EnvId::Reacher => reacher_expert(cfg, obs),
        EnvId::Feeding => feeding_expert(cfg, obs),
        EnvId::Itch => itch_expert(cfg, obs),
    }
}

/// Jacobian-transpose reaching with velocity damping.
fn reacher_expert(cfg: &EnvConfig, obs: &[f64]) -> Vec<f64> {
    let (c1, s1, c2, s2) = (obs[0], obs[1], obs[2], obs[3]);
    let s12 = s1 * c2 + c1 * s2;
    let c12 = c1 * c2 - s1 * s2;
    let err = [-obs[8], -obs[9]];
    let (l1, l2) = (reacher::LINK_1, reacher::LINK_2);
    let j = [[-l1 * s1 - l2 * s12, -l2 * s12], [l1 * c1 + l2 * c12, l2 * c12]];
    let gain = 6.0;
    let damp = 0.8;
    let b = cfg.action_bound;
    let tau1 = gain * (j[0][0] * err[0] + j[1][0] * err[1]) - damp * obs[6];
    let tau2 = gain * (j[0][1] * err[0] + j[1][1] * err[1]) - damp * obs[7];
    vec![tau1.clamp(-b, b), tau2.clamp(-b, b)]
}

/// Approach the mouth below the spill speed, then creep in below the feed
/// speed and hover.
fn feeding_expert(cfg: &EnvConfig, obs: &[f64]) -> Vec<f64> {
    let spoon = [obs[0], obs[1]];
    let mouth = [obs[4], obs[5]];
    let to_mouth = geom::sub(mouth, spoon);
    let dist = geom::norm(to_mouth);
    let speed = if dist > cfg.feed_radius * 0.6 {
        (0.9 * cfg.spill_speed).min(0.5 * dist)
    } else {
        (0.9 * cfg.feed_speed).min(dist)
    };
    velocity_to_action(cfg, geom::scale(geom::unit(to_mouth), speed), feeding::SPEED_SCALE)
}

/// Move onto the itch point and stay pressed against the arm.
fn itch_expert(cfg: &EnvConfig, obs: &[f64]) -> Vec<f64> {
    let tool = [obs[0], obs[1]];
    let target = [obs[4], obs[5]];
    let to_target = geom::sub(target, tool);
    let dist = geom::norm(to_target);
    let speed = (0.9 * itch::SPEED_SCALE).min(dist);
    velocity_to_action(cfg, geom::scale(geom::unit(to_target), speed), itch::SPEED_SCALE)
}

fn velocity_to_action(cfg: &EnvConfig, vel: geom::P2, scale: f64) -> Vec<f64> {
    let b = cfg.action_bound;
    vec![(vel[0] / scale).clamp(-b, b), (vel[1] / scale).clamp(-b, b)]
}

fn fail_action(cfg: &EnvConfig, obs: &[f64]) -> Vec<f64> {
    match cfg.env {
        // No fail tier for reacher (no success definition); flail instead.
        EnvId::Reacher => vec![cfg.action_bound, -cfg.action_bound],
        EnvId::Feeding => {
            // Full speed away from the mouth: spills everything, never feeds.
            let away = geom::unit(geom::sub([obs[0], obs[1]], [obs[4], obs[5]]));
            vec![away[0] * cfg.action_bound, away[1] * cfg.action_bound]
        }
        EnvId::Itch => {
            let away = geom::unit(geom::sub([obs[0], obs[1]], [obs[4], obs[5]]));
            vec![away[0] * cfg.action_bound, away[1] * cfg.action_bound]
        }
    }
}

fn half_action(cfg: &EnvConfig, obs: &[f64], t: usize, level: u32) -> Vec<f64> {
    match cfg.env {
        EnvId::Reacher => fail_action(cfg, obs),
        EnvId::Feeding => {
            // Spill a level-dependent number of particles, then feed the rest.
            let spill_quota = 1 + (level % 3);
            let on_floor = obs[20] as u32;
            if on_floor < spill_quota {
                // Shake in place above the spill speed.
                let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                vec![sign * cfg.action_bound, sign * cfg.action_bound]
            } else {
                expert_action(cfg, obs)
            }
        }
        EnvId::Itch => {
            // Dawdle toward the itch, press briefly, then leave.
            let press_until = 30 + 4 * (level as usize % 4);
            if t < press_until {
                let tool = [obs[0], obs[1]];
                let target = [obs[4], obs[5]];
                let to_target = geom::sub(target, tool);
                let dist = geom::norm(to_target);
                let speed = (0.45 * itch::SPEED_SCALE).min(dist);
                velocity_to_action(cfg, geom::scale(geom::unit(to_target), speed), itch::SPEED_SCALE)
            } else {
                fail_action(cfg, obs)
            }
        }
    }
}

/// Presses the largest contact surface that is not the task goal.
fn adversarial_action(cfg: &EnvConfig, obs: &[f64]) -> Vec<f64> {
    match cfg.env {
        EnvId::Reacher => vec![cfg.action_bound, cfg.action_bound],
        EnvId::Feeding => {
            // Drive the spoon into the head disc center.
            let spoon = [obs[0], obs[1]];
            let head = [obs[6], obs[7]];
            let to_head = geom::sub(head, spoon);
            let speed = geom::norm(to_head).min(feeding::SPEED_SCALE);
            velocity_to_action(cfg, geom::scale(geom::unit(to_head), speed), feeding::SPEED_SCALE)
        }
        EnvId::Itch => {
            // Drive the tool into the robot's own base disc.
            let tool = [obs[0], obs[1]];
            let to_base = geom::sub(itch::BASE_CENTER, tool);
            let speed = geom::norm(to_base).min(itch::SPEED_SCALE);
            velocity_to_action(cfg, geom::scale(geom::unit(to_base), speed), itch::SPEED_SCALE)
        }
    }
}
