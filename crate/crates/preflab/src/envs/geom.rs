//! Planar geometry helpers shared by the environments.

pub type P2 = [f64; 2];

#[inline]
pub fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: P2, b: P2) -> P2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: P2, s: f64) -> P2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn norm(a: P2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn dist(a: P2, b: P2) -> f64 {
    norm(sub(a, b))
}

/// Unit vector along `a`, or `(1, 0)` when `a` is (numerically) zero.
pub fn unit(a: P2) -> P2 {
    let n = norm(a);
    if n < 1e-12 {
        [1.0, 0.0]
    } else {
        scale(a, 1.0 / n)
    }
}

/// Distance from point `p` to the segment `a`-`b`.
pub fn point_segment_dist(p: P2, a: P2, b: P2) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 < 1e-24 {
        return dist(p, a);
    }
    let t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2;
    let t = t.clamp(0.0, 1.0);
    dist(p, add(a, scale(ab, t)))
}

/// Penetration depth of point `p` into the disc at `center` with `radius`.
#[inline]
pub fn disc_overlap(p: P2, center: P2, radius: f64) -> f64 {
    (radius - dist(p, center)).max(0.0)
}

/// End effector of a two-link arm anchored at the origin.
pub fn two_link_fk(l1: f64, l2: f64, theta1: f64, theta2: f64) -> P2 {
    [
        l1 * theta1.cos() + l2 * (theta1 + theta2).cos(),
        l1 * theta1.sin() + l2 * (theta1 + theta2).sin(),
    ]
}

/// Joint angles of a synthesized three-link arm from `base` to `tip`.
///
/// The last link is aligned with the base-to-tip direction; the first two
/// links solve the elbow-up two-link problem for the remaining wrist point,
/// with the reach clamped into the feasible annulus. Returns
/// `[q1, q2, q3, abs2, abs3, phi]`: relative joint angles, the absolute
/// orientations of links two and three, and the base-to-tip bearing.
pub fn synth_arm_angles(base: P2, tip: P2, lengths: [f64; 3]) -> [f64; 6] {
    let [l1, l2, l3] = lengths;
    let dir = unit(sub(tip, base));
    let phi = dir[1].atan2(dir[0]);
    let wrist = sub(tip, scale(dir, l3));
    let w = sub(wrist, base);
    let d = norm(w).clamp((l1 - l2).abs() + 1e-9, l1 + l2 - 1e-9);
    let cos_q2 = ((d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let q2 = cos_q2.acos();
    let q1 = w[1].atan2(w[0]) - (l2 * q2.sin()).atan2(l1 + l2 * cos_q2);
    let abs2 = q1 + q2;
    let to_tip = sub(tip, wrist);
    let abs3 = if norm(to_tip) < 1e-12 { abs2 } else { to_tip[1].atan2(to_tip[0]) };
    let q3 = abs3 - abs2;
    [q1, q2, q3, abs2, abs3, phi]
}
