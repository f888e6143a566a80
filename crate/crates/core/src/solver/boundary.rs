//! Kinematic constraints on soil particles next to the domain boundaries.

use crate::particles::ParticleSet;
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Both velocity components zeroed.
    Fixed,
    /// Only the velocity component into the boundary is removed.
    FreeSlip,
}

/// A straight boundary with its soil side given by `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLine {
    pub point: Vec2,
    /// Unit normal pointing into the soil.
    pub normal: Vec2,
    pub condition: BoundaryCondition,
    /// Particles closer than this to the line are constrained.
    pub band: f64,
}

impl BoundaryLine {
    pub fn base(y: f64, band: f64) -> Self {
        Self {
            point: Vec2::new(0.0, y),
            normal: Vec2::new(0.0, 1.0),
            condition: BoundaryCondition::Fixed,
            band,
        }
    }

    pub fn left_wall(x: f64, band: f64) -> Self {
        Self {
            point: Vec2::new(x, 0.0),
            normal: Vec2::new(1.0, 0.0),
            condition: BoundaryCondition::FreeSlip,
            band,
        }
    }

    pub fn signed_distance(&self, p: Vec2) -> f64 {
        (p - self.point).dot(&self.normal)
    }

    /// Constrained velocity for a particle at `p`.
    pub fn constrain(&self, p: Vec2, v: Vec2) -> Vec2 {
        if self.signed_distance(p) >= self.band {
            return v;
        }
        match self.condition {
            BoundaryCondition::Fixed => Vec2::zeros(),
            BoundaryCondition::FreeSlip => {
                let vn = v.dot(&self.normal);
                if vn < 0.0 {
                    v - self.normal * vn
                } else {
                    v
                }
            }
        }
    }
}

/// Applies every boundary to every soil particle.
pub fn apply_boundaries(ps: &mut ParticleSet, lines: &[BoundaryLine]) {
    for i in 0..ps.len() {
        if !ps.kind[i].is_soil() {
            continue;
        }
        for line in lines {
            ps.velocity[i] = line.constrain(ps.position[i], ps.velocity[i]);
        }
    }
}
