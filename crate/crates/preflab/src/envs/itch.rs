//! Itch-scratching analog. A scratching tool under velocity control must
//! press against a human arm capsule at the itch location. Contact force is
//! also registered against the robot's own base disc, so total tool force
//! can be driven up without ever touching the itch target.

use super::geom::{self, P2};
use super::EnvConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const TOOL_START: P2 = [-0.8, 0.2];
pub const SPEED_SCALE: f64 = 0.08;

pub const SHOULDER_BASE: P2 = [0.15, 0.55];
pub const UPPER_ARM_LEN: f64 = 0.45;
pub const FOREARM_LEN: f64 = 0.40;
pub const ARM_RADIUS: f64 = 0.10;
pub const HUMAN_JITTER: f64 = 0.10;

pub const BASE_CENTER: P2 = [-1.35, -0.85];
pub const BASE_RADIUS: f64 = 0.35;

pub const ROBOT_LINKS: [f64; 3] = [0.9, 0.9, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct ItchState {
    pub tool: P2,
    pub tool_vel: P2,
    pub shoulder: P2,
    pub elbow: P2,
    pub wrist: P2,
    pub itch: P2,
    /// Contact force this step: arm plus base.
    pub total_force: f64,
    /// Arm contact force this step, counted only near the itch point.
    pub force_at_target: f64,
    /// Running sum of `force_at_target`; drives the success criterion.
    pub cumulative_at_target: f64,
    pub human_angles: [f64; 4],
    pub robot_angles: [f64; 6],
    pub robot_vel: [f64; 6],
    pub t: usize,
}

impl ItchState {
    pub fn dist_to_itch(&self) -> f64 {
        geom::dist(self.tool, self.itch)
    }

    pub fn arm_surface_dist(&self) -> f64 {
        geom::point_segment_dist(self.tool, self.shoulder, self.elbow)
            .min(geom::point_segment_dist(self.tool, self.elbow, self.wrist))
    }
}

pub fn reset(_cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> ItchState {
    let jitter = [
        rng.random_range(-HUMAN_JITTER..HUMAN_JITTER),
        rng.random_range(-HUMAN_JITTER..HUMAN_JITTER),
    ];
    let shoulder = geom::add(SHOULDER_BASE, jitter);
    let alpha1: f64 = rng.random_range(-1.0..-0.4);
    let elbow = geom::add(shoulder, [UPPER_ARM_LEN * alpha1.cos(), UPPER_ARM_LEN * alpha1.sin()]);
    let alpha2 = alpha1 + rng.random_range(-0.6..0.2);
    let wrist = geom::add(elbow, [FOREARM_LEN * alpha2.cos(), FOREARM_LEN * alpha2.sin()]);

    // Itch point on the arm axis, parameterized by arclength.
    let u = rng.random_range(0.25..0.9);
    let total = UPPER_ARM_LEN + FOREARM_LEN;
    let s = u * total;
    let itch = if s <= UPPER_ARM_LEN {
        geom::add(shoulder, geom::scale(geom::unit(geom::sub(elbow, shoulder)), s))
    } else {
        geom::add(elbow, geom::scale(geom::unit(geom::sub(wrist, elbow)), s - UPPER_ARM_LEN))
    };

    let itch_bearing = {
        let d = geom::sub(itch, shoulder);
        d[1].atan2(d[0])
    };
    let robot_angles = geom::synth_arm_angles(BASE_CENTER, TOOL_START, ROBOT_LINKS);
    ItchState {
        tool: TOOL_START,
        tool_vel: [0.0, 0.0],
        shoulder,
        elbow,
        wrist,
        itch,
        total_force: 0.0,
        force_at_target: 0.0,
        cumulative_at_target: 0.0,
        human_angles: [alpha1, alpha2, alpha2 - alpha1, itch_bearing],
        robot_angles,
        robot_vel: [0.0; 6],
        t: 0,
    }
}

pub fn step(cfg: &EnvConfig, state: &ItchState, action: [f64; 2]) -> (ItchState, f64) {
    let b = cfg.action_bound;
    let a = [action[0].clamp(-b, b), action[1].clamp(-b, b)];
    let vel = geom::scale(a, SPEED_SCALE);

    let mut next = state.clone();
    next.tool = geom::add(state.tool, vel);
    next.tool_vel = vel;

    let f_arm = cfg.stiffness * (ARM_RADIUS - next.arm_surface_dist()).max(0.0);
    let f_base = cfg.stiffness * geom::disc_overlap(next.tool, BASE_CENTER, BASE_RADIUS);
    next.total_force = f_arm + f_base;
    next.force_at_target = if next.dist_to_itch() <= cfg.itch_radius { f_arm } else { 0.0 };
    next.cumulative_at_target = state.cumulative_at_target + next.force_at_target;

    let angles = geom::synth_arm_angles(BASE_CENTER, next.tool, ROBOT_LINKS);
    for i in 0..6 {
        next.robot_vel[i] = angles[i] - state.robot_angles[i];
    }
    next.robot_angles = angles;
    next.t = state.t + 1;

    let reward = next.force_at_target - 0.1 * next.dist_to_itch()
        - 0.01 * (next.total_force - next.force_at_target);
    (next, reward)
}

pub fn raw_obs(state: &ItchState) -> Vec<f64> {
    let mut v = Vec::with_capacity(30);
    v.extend_from_slice(&state.tool);
    v.extend_from_slice(&state.tool_vel);
    v.extend_from_slice(&state.itch);
    v.push(state.tool[0] - state.itch[0]);
    v.push(state.tool[1] - state.itch[1]);
    v.extend_from_slice(&state.human_angles);
    v.extend_from_slice(&state.robot_angles);
    v.extend_from_slice(&state.robot_vel);
    v.push(state.total_force);
    v.push(state.force_at_target);
    v.push(f64::from(state.arm_surface_dist() < ARM_RADIUS));
    v.push(f64::from(geom::dist(state.tool, BASE_CENTER) < BASE_RADIUS));
    v.push(f64::from(state.force_at_target > 0.0));
    v.push(geom::dist(state.tool, BASE_CENTER) - BASE_RADIUS);
    v
}

pub fn priv_obs(state: &ItchState) -> Vec<f64> {
    vec![state.dist_to_itch(), state.force_at_target]
}

/// Raw index of the per-step force-at-target reading.
pub const FORCE_AT_TARGET_IDX: usize = 25;

pub const RAW_NAMES: [&str; 30] = [
    "tool_x",
    "tool_y",
    "tool_vel_x",
    "tool_vel_y",
    "itch_x",
    "itch_y",
    "tool_minus_itch_x",
    "tool_minus_itch_y",
    "human_angle1",
    "human_angle2",
    "human_elbow_bend",
    "human_itch_bearing",
    "robot_q1",
    "robot_q2",
    "robot_q3",
    "robot_abs2",
    "robot_abs3",
    "robot_bearing",
    "robot_qvel1",
    "robot_qvel2",
    "robot_qvel3",
    "robot_absvel2",
    "robot_absvel3",
    "robot_bearing_vel",
    "total_tool_force",
    "force_at_target",
    "contact_arm",
    "contact_base",
    "contact_at_target",
    "dist_to_base",
];

pub const PRIV_NAMES: [&str; 2] = ["dist_to_itch", "force_at_target"];
