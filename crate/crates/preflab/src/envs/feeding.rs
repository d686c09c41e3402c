//! Assistive feeding analog. A spoon carrying five food particles moves
//! under velocity control; particles feed when the spoon hovers slowly at
//! the mouth and spill whenever it moves too fast. Contact force accrues
//! against the mouth, head, and torso discs, giving successful trajectories
//! an unavoidable (and hackable) force signature.

use super::geom::{self, P2};
use super::EnvConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SPOON_START: P2 = [-1.4, 0.45];
/// Spoon displacement per step at full action magnitude.
pub const SPEED_SCALE: f64 = 0.08;
pub const N_PARTICLES: u32 = 5;

pub const MOUTH_RADIUS: f64 = 0.12;
pub const HEAD_RADIUS: f64 = 0.25;
pub const TORSO_RADIUS: f64 = 0.4;
/// Mouth sits inside the head disc on the side facing the robot.
pub const MOUTH_OFFSET: P2 = [-0.22, 0.0];
pub const HEAD_OFFSET: P2 = [0.0, 0.7];
pub const HUMAN_JITTER: f64 = 0.15;

/// Anchor of the synthesized robot arm holding the spoon.
pub const ROBOT_BASE: P2 = [-1.7, -0.3];
pub const ROBOT_LINKS: [f64; 3] = [0.8, 0.8, 0.4];

#[derive(Debug, Clone, PartialEq)]
pub struct FeedingState {
    pub spoon: P2,
    pub spoon_vel: P2,
    pub mouth: P2,
    pub head: P2,
    pub torso: P2,
    pub on_spoon: u32,
    pub in_mouth: u32,
    pub on_floor: u32,
    /// Contact force applied to the human this step (all discs).
    pub force_on_human: f64,
    pub force_on_head: f64,
    pub force_on_torso: f64,
    /// Running sum of `force_on_human` over the episode.
    pub cumulative_force: f64,
    pub fed_this_step: u32,
    pub spilled_this_step: u32,
    pub arm_angles: [f64; 3],
    pub arm_vel: [f64; 3],
    pub t: usize,
}

impl FeedingState {
    pub fn dist_to_mouth(&self) -> f64 {
        geom::dist(self.spoon, self.mouth)
    }
}

fn arm_angles_for(spoon: P2) -> [f64; 3] {
    let a = geom::synth_arm_angles(ROBOT_BASE, spoon, ROBOT_LINKS);
    [a[0], a[1], a[2]]
}

pub fn reset(_cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> FeedingState {
    let jitter = [
        rng.random_range(-HUMAN_JITTER..HUMAN_JITTER),
        rng.random_range(-HUMAN_JITTER..HUMAN_JITTER),
    ];
    let torso = jitter;
    let head = geom::add(torso, HEAD_OFFSET);
    let mouth = geom::add(head, MOUTH_OFFSET);
    FeedingState {
        spoon: SPOON_START,
        spoon_vel: [0.0, 0.0],
        mouth,
        head,
        torso,
        on_spoon: N_PARTICLES,
        in_mouth: 0,
        on_floor: 0,
        force_on_human: 0.0,
        force_on_head: 0.0,
        force_on_torso: 0.0,
        cumulative_force: 0.0,
        fed_this_step: 0,
        spilled_this_step: 0,
        arm_angles: arm_angles_for(SPOON_START),
        arm_vel: [0.0, 0.0, 0.0],
        t: 0,
    }
}

pub fn step(cfg: &EnvConfig, state: &FeedingState, action: [f64; 2]) -> (FeedingState, f64) {
    let b = cfg.action_bound;
    let a = [action[0].clamp(-b, b), action[1].clamp(-b, b)];
    let vel = geom::scale(a, SPEED_SCALE);
    let speed = geom::norm(vel);

    let mut next = state.clone();
    next.spoon = geom::add(state.spoon, vel);
    next.spoon_vel = vel;
    next.fed_this_step = 0;
    next.spilled_this_step = 0;

    if speed > cfg.spill_speed && next.on_spoon > 0 {
        next.on_spoon -= 1;
        next.on_floor += 1;
        next.spilled_this_step = 1;
    }
    if next.dist_to_mouth() <= cfg.feed_radius && speed <= cfg.feed_speed && next.on_spoon > 0 {
        next.on_spoon -= 1;
        next.in_mouth += 1;
        next.fed_this_step = 1;
    }

    let f_mouth = cfg.stiffness * geom::disc_overlap(next.spoon, next.mouth, MOUTH_RADIUS);
    let f_head = cfg.stiffness * geom::disc_overlap(next.spoon, next.head, HEAD_RADIUS);
    let f_torso = cfg.stiffness * geom::disc_overlap(next.spoon, next.torso, TORSO_RADIUS);
    next.force_on_human = f_mouth + f_head + f_torso;
    next.force_on_head = f_head;
    next.force_on_torso = f_torso;
    next.cumulative_force = state.cumulative_force + next.force_on_human;

    let angles = arm_angles_for(next.spoon);
    for i in 0..3 {
        next.arm_vel[i] = angles[i] - state.arm_angles[i];
    }
    next.arm_angles = angles;
    next.t = state.t + 1;

    let reward = 10.0 * f64::from(next.fed_this_step) - 5.0 * f64::from(next.spilled_this_step)
        - 0.1 * next.dist_to_mouth();
    (next, reward)
}

pub fn raw_obs(state: &FeedingState) -> Vec<f64> {
    vec![
        state.spoon[0],
        state.spoon[1],
        state.spoon_vel[0],
        state.spoon_vel[1],
        state.mouth[0],
        state.mouth[1],
        state.head[0],
        state.head[1],
        state.torso[0],
        state.torso[1],
        state.arm_angles[0],
        state.arm_angles[1],
        state.arm_angles[2],
        state.arm_vel[0],
        state.arm_vel[1],
        state.arm_vel[2],
        state.spoon[0] - state.mouth[0],
        state.spoon[1] - state.mouth[1],
        f64::from(state.on_spoon),
        f64::from(state.in_mouth),
        f64::from(state.on_floor),
        state.force_on_human,
        state.force_on_head,
        state.force_on_torso,
        state.cumulative_force,
    ]
}

pub fn priv_obs(state: &FeedingState) -> Vec<f64> {
    vec![
        state.dist_to_mouth(),
        f64::from(state.in_mouth),
        f64::from(state.on_floor),
    ]
}

/// Raw index of the particles-in-mouth counter, used by the success check.
pub const IN_MOUTH_IDX: usize = 19;

pub const RAW_NAMES: [&str; 25] = [
    "spoon_x",
    "spoon_y",
    "spoon_vel_x",
    "spoon_vel_y",
    "mouth_x",
    "mouth_y",
    "head_x",
    "head_y",
    "torso_x",
    "torso_y",
    "arm_angle1",
    "arm_angle2",
    "arm_angle3",
    "arm_vel1",
    "arm_vel2",
    "arm_vel3",
    "spoon_minus_mouth_x",
    "spoon_minus_mouth_y",
    "particles_on_spoon",
    "particles_in_mouth",
    "particles_on_floor",
    "force_on_human",
    "force_on_head",
    "force_on_torso",
    "cumulative_force",
];

pub const PRIV_NAMES: [&str; 3] = ["dist_to_mouth", "num_in_mouth", "num_on_floor"];
