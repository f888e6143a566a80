//! Planar rigid blocks represented by boundary particles.
//!
//! Quantities are per unit out-of-plane length. Boundary particle world
//! positions are always derived from the pose, never integrated.

use crate::error::{Error, Result};
use crate::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBlock {
    pub id: u32,
    pub width: f64,
    pub height: f64,
    pub mass: f64,
    pub inertia: f64,
    pub centroid: Vec2,
    pub velocity: Vec2,
    pub angle: f64,
    pub angular_velocity: f64,
    /// Body-frame boundary particle offsets from the centroid.
    pub offsets: Vec<Vec2>,
    /// Contact smoothing length `h_i` of the boundary particles.
    pub smoothing: f64,
    pub force: Vec2,
    pub torque: f64,
    /// Kinematically held in place (no kick, no drift).
    pub held: bool,
    world: Vec<Vec2>,
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// `Ω ẑ × d`
#[inline]
pub fn spin_cross(omega: f64, d: Vec2) -> Vec2 {
    Vec2::new(-omega * d.y, omega * d.x)
}

#[inline]
fn rotate(angle: f64, v: Vec2) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Builds a `width x height` block of uniform `density`, centered at the
/// origin, with boundary particles about `spacing` apart on a rectangle
/// shrunk by `inset` on every side.
///
/// Corners carry one particle each; every edge is split into
/// `round(length / spacing)` equal intervals.
pub fn make_block(
    width: f64,
    height: f64,
    density: f64,
    spacing: f64,
    inset: f64,
) -> Result<RigidBlock> {
    make_block_with_edges(width, height, density, [spacing; 4], inset)
}

/// Like [`make_block`] with a target spacing per edge, in the order bottom,
/// right, top, left.
pub fn make_block_with_edges(
    width: f64,
    height: f64,
    density: f64,
    edge_spacing: [f64; 4],
    inset: f64,
) -> Result<RigidBlock> {
    for (name, v) in [("width", width), ("height", height), ("density", density)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidInput(format!("block {name} must be positive, got {v}")));
        }
    }
    if edge_spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "block particle spacing must be positive, got {edge_spacing:?}"
        )));
    }
    if !(inset.is_finite() && inset >= 0.0 && 2.0 * inset < width.min(height)) {
        return Err(Error::InvalidInput(format!(
            "block inset {inset} must be non-negative and smaller than half the block"
        )));
    }
    let a = 0.5 * width - inset;
    let b = 0.5 * height - inset;
    let corners = [
        Vec2::new(-a, -b),
        Vec2::new(a, -b),
        Vec2::new(a, b),
        Vec2::new(-a, b),
    ];
    let mut offsets = Vec::new();
    for edge in 0..4 {
        let p0 = corners[edge];
        let p1 = corners[(edge + 1) % 4];
        let n = (((p1 - p0).norm() / edge_spacing[edge]).round() as usize).max(1);
        for k in 0..n {
            offsets.push(p0 + (p1 - p0) * (k as f64 / n as f64));
        }
    }

    let mass = density * width * height;
    let mut block = RigidBlock {
        id: 0,
        width,
        height,
        mass,
        inertia: mass * (width * width + height * height) / 12.0,
        centroid: Vec2::zeros(),
        velocity: Vec2::zeros(),
        angle: 0.0,
        angular_velocity: 0.0,
        offsets,
        smoothing: edge_spacing[0],
        force: Vec2::zeros(),
        torque: 0.0,
        held: false,
        world: Vec::new(),
    };
    block.refresh_world();
    Ok(block)
}

impl RigidBlock {
    pub fn with_pose(mut self, centroid: Vec2, angle: f64) -> Self {
        self.centroid = centroid;
        self.angle = angle;
        self.refresh_world();
        self
    }

    pub fn particle_count(&self) -> usize {
        self.offsets.len()
    }

    /// Mass attributed to one boundary particle for contact damping.
    pub fn particle_mass(&self) -> f64 {
        self.mass / self.offsets.len() as f64
    }

    pub fn world_positions(&self) -> &[Vec2] {
        &self.world
    }

    fn refresh_world(&mut self) {
        let (s, c) = self.angle.sin_cos();
        self.world.clear();
        self.world.extend(
            self.offsets
                .iter()
                .map(|o| self.centroid + Vec2::new(c * o.x - s * o.y, s * o.x + c * o.y)),
        );
    }

    /// Velocity of boundary particle `i`: `V + Ω × (r_i − R)`.
    pub fn particle_velocity(&self, i: usize) -> Vec2 {
        self.velocity + spin_cross(self.angular_velocity, self.world[i] - self.centroid)
    }

    /// Adds a force acting at boundary particle `i`.
    pub fn accumulate(&mut self, i: usize, f: Vec2) {
        self.force += f;
        self.torque += cross(self.world[i] - self.centroid, f);
    }

    pub fn clear_forces(&mut self) {
        self.force = Vec2::zeros();
        self.torque = 0.0;
    }

    /// Velocity update from the accumulated force, torque and gravity.
    pub fn kick(&mut self, gravity: Vec2, dt: f64) {
        if self.held {
            return;
        }
        self.velocity += (self.force / self.mass + gravity) * dt;
        self.angular_velocity += self.torque / self.inertia * dt;
    }

    /// Pose update from the current velocities.
    pub fn drift(&mut self, dt: f64) {
        if self.held {
            return;
        }
        self.centroid += self.velocity * dt;
        self.angle += self.angular_velocity * dt;
        self.refresh_world();
    }

    /// One semi-implicit step: kick, drift, then reset the accumulators.
    pub fn advance(&mut self, gravity: Vec2, dt: f64) {
        self.kick(gravity, dt);
        self.drift(dt);
        self.clear_forces();
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.velocity.norm_squared()
            + 0.5 * self.inertia * self.angular_velocity * self.angular_velocity
    }

    /// Corners of the physical outline in world coordinates.
    pub fn outline(&self) -> [Vec2; 4] {
        let a = 0.5 * self.width;
        let b = 0.5 * self.height;
        [
            Vec2::new(-a, -b),
            Vec2::new(a, -b),
            Vec2::new(a, b),
            Vec2::new(-a, b),
        ]
        .map(|c| self.centroid + rotate(self.angle, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn paper_block_mass_and_inertia() {
        let density = 26.5e3 / 9.81;
        assert_relative_eq!(density, 2701.33, max_relative = 1e-5);
        let b = make_block(0.032, 0.025, density, 0.00125, 0.0).unwrap();
        assert_relative_eq!(b.mass, 2.161_06, max_relative = 1e-5);
        assert_relative_eq!(b.inertia, 2.9696e-4, max_relative = 1e-4);
    }

    #[test]
    fn unit_square_block() {
        let b = make_block(1.0, 1.0, 1.0, 0.1, 0.0).unwrap();
        assert_relative_eq!(b.mass, 1.0);
        assert_relative_eq!(b.inertia, 1.0 / 6.0);
        assert_eq!(b.particle_count(), 40);
    }

    #[test]
    fn corners_present_once_and_equispaced() {
        let b = make_block(0.032, 0.025, 2700.0, 0.00125, 0.0).unwrap();
        let n = b.offsets.len();
        for c in [
            Vec2::new(-0.016, -0.0125),
            Vec2::new(0.016, -0.0125),
            Vec2::new(0.016, 0.0125),
            Vec2::new(-0.016, 0.0125),
        ] {
            let hits = b.offsets.iter().filter(|o| (*o - c).norm() < 1e-12).count();
            assert_eq!(hits, 1);
        }
        for i in 0..n {
            let d = (b.offsets[(i + 1) % n] - b.offsets[i]).norm();
            assert!((d - 0.00125).abs() < 5e-5, "gap {d}");
        }
    }

    #[test]
    fn per_edge_spacing() {
        let b = make_block_with_edges(1.0, 0.5, 1.0, [0.1, 0.1, 0.05, 0.1], 0.0).unwrap();
        assert_eq!(b.particle_count(), 10 + 5 + 20 + 5);
        let top: Vec<_> = b.offsets.iter().filter(|o| (o.y - 0.25).abs() < 1e-12).collect();
        // 20 intervals plus the closing corner of the left edge
        assert_eq!(top.len(), 21);
    }

    #[test]
    fn degenerate_dimensions_rejected() {
        assert!(make_block(0.0, 1.0, 1.0, 0.1, 0.0).is_err());
        assert!(make_block(1.0, 1.0, -1.0, 0.1, 0.0).is_err());
        assert!(make_block(1.0, 1.0, 1.0, 0.1, 0.6).is_err());
    }

    #[test]
    fn torque_bookkeeping() {
        let mut b = make_block(1.0, 1.0, 1.0, 0.5, 0.0).unwrap();
        // particle 0 at (-0.5, -0.5); force through the centroid
        b.accumulate(0, Vec2::new(1.0, 1.0));
        assert!(b.torque.abs() < 1e-15);
        b.clear_forces();
        // opposite corners, opposite forces
        let i2 = b.offsets.iter().position(|o| (*o - Vec2::new(0.5, 0.5)).norm() < 1e-12).unwrap();
        b.accumulate(0, Vec2::new(1.0, 0.0));
        b.accumulate(i2, Vec2::new(-1.0, 0.0));
        assert_eq!(b.force, Vec2::zeros());
        assert_relative_eq!(b.torque, 1.0);
        b.clear_forces();
        // +x force at offset (0, d) gives -d
        let top = b.offsets.iter().position(|o| (*o - Vec2::new(0.0, 0.5)).norm() < 1e-12).unwrap();
        b.accumulate(top, Vec2::new(1.0, 0.0));
        assert_relative_eq!(b.torque, -0.5);
    }

    #[test]
    fn free_fall_keeps_angle() {
        let mut b = make_block(0.032, 0.025, 2700.0, 0.00125, 0.0).unwrap();
        let g = Vec2::new(0.0, -9.81);
        for _ in 0..100 {
            b.advance(g, 1e-3);
        }
        assert_eq!(b.angle, 0.0);
        assert_relative_eq!(b.velocity.y, -0.981, max_relative = 1e-12);
    }

    #[test]
    fn pure_couple_spins_up_linearly() {
        let mut b = make_block(1.0, 0.5, 2.0, 0.05, 0.0).unwrap();
        let t0 = 3.0;
        let dt = 1e-3;
        for _ in 0..500 {
            b.torque = t0;
            b.advance(Vec2::zeros(), dt);
        }
        assert_relative_eq!(b.angular_velocity, t0 * 0.5 / b.inertia, max_relative = 1e-12);
        assert_eq!(b.velocity, Vec2::zeros());
    }

    #[test]
    fn particle_velocity_is_rigid_motion() {
        let mut b = make_block(1.0, 0.5, 2.0, 0.05, 0.0).unwrap();
        b.velocity = Vec2::new(0.3, -0.2);
        b.angular_velocity = 1.7;
        b.advance(Vec2::zeros(), 0.01);
        for i in 0..b.particle_count() {
            let d = b.world_positions()[i] - b.centroid;
            let expected = b.velocity + Vec2::new(-1.7 * d.y, 1.7 * d.x);
            assert!((b.particle_velocity(i) - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn held_block_does_not_move() {
        let mut b = make_block(1.0, 0.5, 2.0, 0.05, 0.0).unwrap();
        b.held = true;
        b.force = Vec2::new(10.0, 0.0);
        b.advance(Vec2::new(0.0, -9.81), 0.1);
        assert_eq!(b.centroid, Vec2::zeros());
        assert_eq!(b.velocity, Vec2::zeros());
    }
}
