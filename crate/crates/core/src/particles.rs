//! Soil and static boundary particles, and lattice initialization.

use crate::constitutive::{MaterialParams, StressState};
use crate::error::{Error, Result};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParticleKind {
    Soil,
    /// Base row, fixed in both directions.
    Base,
    /// Lateral free-slip wall.
    Wall,
    /// Temporary support in front of the wall, removed when the run starts.
    Stopper,
}

impl ParticleKind {
    #[inline]
    pub fn is_soil(self) -> bool {
        matches!(self, ParticleKind::Soil)
    }

    #[inline]
    pub fn is_static(self) -> bool {
        !self.is_soil()
    }
}

/// Simple polygon, vertices in order (either orientation).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
            return Err(Error::InvalidInput("polygon vertex is not finite".into()));
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(min: Vec2, max: Vec2) -> Result<Self> {
        Self::new(vec![
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut min = Vec2::repeat(f64::INFINITY);
        let mut max = Vec2::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            min = min.inf(v);
            max = max.sup(v);
        }
        (min, max)
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let twice: f64 = (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum();
        0.5 * twice.abs()
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[j];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Height of the top edge above `x`, i.e. the largest `y` where a vertical
    /// line at `x` leaves the polygon.
    pub fn top_at(&self, x: f64) -> Option<f64> {
        let n = self.vertices.len();
        let mut best: Option<f64> = None;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let (lo, hi) = if a.x <= b.x { (a, b) } else { (b, a) };
            if x < lo.x || x > hi.x {
                continue;
            }
            let y = if hi.x - lo.x > 0.0 {
                lo.y + (x - lo.x) / (hi.x - lo.x) * (hi.y - lo.y)
            } else {
                lo.y.max(hi.y)
            };
            best = Some(best.map_or(y, |b: f64| b.max(y)));
        }
        best
    }
}

/// Structure-of-arrays storage for soil and static boundary particles.
#[derive(Debug, Clone, Default)]
pub struct ParticleSet {
    pub id: Vec<u32>,
    pub kind: Vec<ParticleKind>,
    pub position: Vec<Vec2>,
    pub velocity: Vec<Vec2>,
    pub density: Vec<f64>,
    pub mass: Vec<f64>,
    pub stress: Vec<StressState>,
    /// Contact smoothing length `h_a`.
    pub smoothing: Vec<f64>,
    /// Unit normal pointing into the soil, static particles only.
    pub normal: Vec<Vec2>,
    next_id: u32,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        kind: ParticleKind,
        position: Vec2,
        velocity: Vec2,
        density: f64,
        mass: f64,
        stress: StressState,
        smoothing: f64,
        normal: Vec2,
    ) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        self.id.push(id);
        self.kind.push(kind);
        self.position.push(position);
        self.velocity.push(velocity);
        self.density.push(density);
        self.mass.push(mass);
        self.stress.push(stress);
        self.smoothing.push(smoothing);
        self.normal.push(normal);
        id
    }

    pub fn append(&mut self, mut other: ParticleSet) {
        let offset = self.next_id;
        self.next_id += other.next_id;
        self.id.extend(other.id.drain(..).map(|i| i + offset));
        self.kind.append(&mut other.kind);
        self.position.append(&mut other.position);
        self.velocity.append(&mut other.velocity);
        self.density.append(&mut other.density);
        self.mass.append(&mut other.mass);
        self.stress.append(&mut other.stress);
        self.smoothing.append(&mut other.smoothing);
        self.normal.append(&mut other.normal);
    }

    /// Drops every particle for which `keep` is false, preserving order.
    pub fn retain(&mut self, mut keep: impl FnMut(ParticleKind) -> bool) {
        let mask: Vec<bool> = self.kind.iter().map(|&k| keep(k)).collect();
        fn filter<T>(v: &mut Vec<T>, mask: &[bool]) {
            let mut it = mask.iter();
            v.retain(|_| *it.next().unwrap());
        }
        filter(&mut self.id, &mask);
        filter(&mut self.kind, &mask);
        filter(&mut self.position, &mask);
        filter(&mut self.velocity, &mask);
        filter(&mut self.density, &mask);
        filter(&mut self.mass, &mask);
        filter(&mut self.stress, &mask);
        filter(&mut self.smoothing, &mask);
        filter(&mut self.normal, &mask);
    }

    pub fn soil_count(&self) -> usize {
        self.kind.iter().filter(|k| k.is_soil()).count()
    }

    pub fn soil_mass(&self) -> f64 {
        self.kind
            .iter()
            .zip(&self.mass)
            .filter(|(k, _)| k.is_soil())
            .map(|(_, m)| m)
            .sum()
    }
}

/// Fills `region` with soil particles on a square lattice.
///
/// Lattice points sit at cell centers `min + (i + ½, j + ½)·spacing` of the
/// region's bounding box. Each particle carries mass `ρ₀·spacing²` per unit
/// out-of-plane length with `ρ₀ = γ_s / g`.
pub fn lattice_init(
    region: &Polygon,
    spacing: f64,
    material: &MaterialParams,
    gravity: f64,
    smoothing: f64,
) -> Result<ParticleSet> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lattice spacing must be positive, got {spacing}"
        )));
    }
    if !(gravity.is_finite() && gravity > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gravity magnitude must be positive, got {gravity}"
        )));
    }
    let (min, max) = region.bounding_box();
    let nx = ((max.x - min.x) / spacing).ceil() as usize;
    let ny = ((max.y - min.y) / spacing).ceil() as usize;
    let rho0 = material.reference_density(gravity);
    let mass = rho0 * spacing * spacing;

    let mut set = ParticleSet::default();
    for j in 0..ny {
        for i in 0..nx {
            let p = Vec2::new(
                min.x + (i as f64 + 0.5) * spacing,
                min.y + (j as f64 + 0.5) * spacing,
            );
            if region.contains(p) {
                set.push(
                    ParticleKind::Soil,
                    p,
                    Vec2::zeros(),
                    rho0,
                    mass,
                    StressState::default(),
                    smoothing,
                    Vec2::zeros(),
                );
            }
        }
    }
    if set.is_empty() {
        return Err(Error::InvalidInput(
            "soil region contains no lattice points".into(),
        ));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn soil() -> MaterialParams {
        MaterialParams::new(1.5e6, 0.3, 0.0, 19.8f64.to_radians(), 0.0, 23e3).unwrap()
    }

    #[test]
    fn unit_square_half_spacing() {
        let sq = Polygon::rectangle(Vec2::zeros(), Vec2::new(1.0, 1.0)).unwrap();
        let set = lattice_init(&sq, 0.5, &soil(), 9.81, 0.6).unwrap();
        assert_eq!(set.len(), 4);
        assert!(set.mass.iter().all(|&m| m == set.mass[0]));
        assert_eq!(set.position[0], Vec2::new(0.25, 0.25));
        assert_eq!(set.position[3], Vec2::new(0.75, 0.75));
    }

    #[test]
    fn per_particle_mass_for_paper_soil() {
        let sq = Polygon::rectangle(Vec2::zeros(), Vec2::new(0.01, 0.01)).unwrap();
        let set = lattice_init(&sq, 0.0025, &soil(), 9.81, 0.003).unwrap();
        // 23000 / 9.81 = 2344.546 kg/m³ times 0.0025²
        assert_relative_eq!(set.density[0], 2_344.546_38, max_relative = 1e-8);
        assert_relative_eq!(set.mass[0], 0.014_653_4, max_relative = 1e-5);
    }

    #[test]
    fn empty_region_is_an_error() {
        let tiny = Polygon::rectangle(Vec2::zeros(), Vec2::new(0.001, 0.001)).unwrap();
        // single cell whose center is inside: still one particle
        assert_eq!(lattice_init(&tiny, 0.001, &soil(), 9.81, 1.0).unwrap().len(), 1);
        // lattice point on the edge is not inside
        assert!(lattice_init(&tiny, 0.002, &soil(), 9.81, 1.0).is_err());
        let sliver = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.01),
        ])
        .unwrap();
        assert!(lattice_init(&sliver, 0.5, &soil(), 9.81, 1.0).is_err());
        assert!(lattice_init(&sliver, 0.0, &soil(), 9.81, 1.0).is_err());
    }

    #[test]
    fn polygon_queries() {
        let step = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 2.0),
            Vec2::new(0.0, 2.0),
        ])
        .unwrap();
        assert!(step.contains(Vec2::new(0.5, 1.5)));
        assert!(!step.contains(Vec2::new(1.5, 1.5)));
        assert_relative_eq!(step.area(), 3.0);
        assert_relative_eq!(step.top_at(1.5).unwrap(), 1.0);
        assert_relative_eq!(step.top_at(0.5).unwrap(), 2.0);
        assert!(step.top_at(3.0).is_none());
    }

    #[test]
    fn retain_keeps_ids() {
        let sq = Polygon::rectangle(Vec2::zeros(), Vec2::new(1.0, 1.0)).unwrap();
        let mut set = lattice_init(&sq, 0.5, &soil(), 9.81, 0.6).unwrap();
        set.push(
            ParticleKind::Stopper,
            Vec2::new(2.0, 0.0),
            Vec2::zeros(),
            1.0,
            1.0,
            StressState::default(),
            0.3,
            Vec2::new(-1.0, 0.0),
        );
        assert_eq!(set.id.last(), Some(&4));
        set.retain(|k| k != ParticleKind::Stopper);
        assert_eq!(set.len(), 4);
        assert_eq!(set.id, vec![0, 1, 2, 3]);
    }
}
