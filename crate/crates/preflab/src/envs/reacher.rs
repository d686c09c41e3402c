//! Two-link planar reacher. Torques drive joint velocities through a damped
//! first-order update; the end effector follows from forward kinematics.

use super::geom::{self, P2};
use super::EnvConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LINK_1: f64 = 0.5;
pub const LINK_2: f64 = 0.5;
/// Total reach; distances divided by this are in arm-lengths.
pub const ARM_LENGTH: f64 = LINK_1 + LINK_2;
pub const DT: f64 = 0.2;
pub const DAMPING: f64 = 0.6;
pub const TORQUE_GAIN: f64 = 1.2;
pub const MAX_JOINT_SPEED: f64 = 1.2;
pub const TARGET_RADIUS_RANGE: (f64, f64) = (0.25, 0.75);

#[derive(Debug, Clone, PartialEq)]
pub struct ReacherState {
    pub theta: [f64; 2],
    pub theta_dot: [f64; 2],
    pub target: P2,
    pub t: usize,
}

impl ReacherState {
    pub fn end_effector(&self) -> P2 {
        geom::two_link_fk(LINK_1, LINK_2, self.theta[0], self.theta[1])
    }

    pub fn dist_to_target(&self) -> f64 {
        geom::dist(self.end_effector(), self.target)
    }
}

pub fn reset(_cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> ReacherState {
    let r = rng.random_range(TARGET_RADIUS_RANGE.0..TARGET_RADIUS_RANGE.1);
    let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    ReacherState {
        theta: [0.0, 0.0],
        theta_dot: [0.0, 0.0],
        target: [r * phi.cos(), r * phi.sin()],
        t: 0,
    }
}

pub fn step(cfg: &EnvConfig, state: &ReacherState, action: [f64; 2]) -> (ReacherState, f64) {
    let b = cfg.action_bound;
    let a = [action[0].clamp(-b, b), action[1].clamp(-b, b)];
    let mut next = state.clone();
    for i in 0..2 {
        let v = DAMPING * state.theta_dot[i] + TORQUE_GAIN * a[i];
        next.theta_dot[i] = v.clamp(-MAX_JOINT_SPEED, MAX_JOINT_SPEED);
        next.theta[i] = state.theta[i] + DT * next.theta_dot[i];
    }
    next.t = state.t + 1;
    let reward = -next.dist_to_target() - 0.1 * (a[0] * a[0] + a[1] * a[1]);
    (next, reward)
}

pub fn raw_obs(state: &ReacherState) -> Vec<f64> {
    let ee = state.end_effector();
    vec![
        state.theta[0].cos(),
        state.theta[0].sin(),
        state.theta[1].cos(),
        state.theta[1].sin(),
        state.target[0],
        state.target[1],
        state.theta_dot[0],
        state.theta_dot[1],
        ee[0] - state.target[0],
        ee[1] - state.target[1],
        0.0,
    ]
}

pub fn priv_obs(state: &ReacherState) -> Vec<f64> {
    vec![state.dist_to_target()]
}

pub const RAW_NAMES: [&str; 11] = [
    "cos_theta1",
    "sin_theta1",
    "cos_theta2",
    "sin_theta2",
    "target_x",
    "target_y",
    "theta_dot1",
    "theta_dot2",
    "ee_minus_target_x",
    "ee_minus_target_y",
    "ee_minus_target_z",
];

pub const PRIV_NAMES: [&str; 1] = ["dist_to_target"];
