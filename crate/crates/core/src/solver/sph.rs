//! SPH operators: velocity gradient, continuity, momentum with artificial
//! viscosity and artificial stress.
//!
//! The per-particle functions here walk a neighbor list and are the
//! readable reference; [`World`](super::World) evaluates the same sums pair
//! by pair.

use crate::constitutive::{MaterialParams, RateInput, StressState};
use crate::error::{Error, Result};
use crate::grid::NeighborGrid;
use crate::kernel::KernelSpec;
use crate::particles::ParticleSet;
use crate::Vec2;

/// Constants of the stabilization term `C_ab` in the momentum sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationParams {
    pub viscosity_alpha: f64,
    pub viscosity_beta: f64,
    pub artificial_stress_eps: f64,
    pub artificial_stress_exponent: f64,
    /// `√((K + 4G/3) / ρ₀)`
    pub sound_speed: f64,
}

impl StabilizationParams {
    pub fn new(
        viscosity_alpha: f64,
        viscosity_beta: f64,
        artificial_stress_eps: f64,
        artificial_stress_exponent: f64,
        material: &MaterialParams,
        rho0: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("viscosity_alpha", viscosity_alpha),
            ("viscosity_beta", viscosity_beta),
            ("artificial_stress_eps", artificial_stress_eps),
            ("artificial_stress_exponent", artificial_stress_exponent),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        let sound_speed = (material.constrained_modulus() / rho0).sqrt();
        if !(sound_speed.is_finite() && sound_speed > 0.0) {
            return Err(Error::Parameter("sound speed must be positive".into()));
        }
        Ok(Self {
            viscosity_alpha,
            viscosity_beta,
            artificial_stress_eps,
            artificial_stress_exponent,
            sound_speed,
        })
    }
}

/// Shared constants for one SPH evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SphContext {
    pub kernel: KernelSpec,
    pub stabilization: StabilizationParams,
    /// `W(Δp)` for the artificial stress weighting.
    pub w_spacing: f64,
}

impl SphContext {
    pub fn new(kernel: KernelSpec, stabilization: StabilizationParams, spacing: f64) -> Self {
        Self {
            kernel,
            stabilization,
            w_spacing: kernel.value(spacing),
        }
    }

    /// Monaghan viscosity `Π_ab`; zero for receding pairs.
    #[inline]
    pub fn viscosity(&self, dv: Vec2, dx: Vec2, r: f64, rho_mean: f64) -> f64 {
        let vr = dv.dot(&dx);
        if vr >= 0.0 {
            return 0.0;
        }
        let h = self.kernel.h();
        let mu = h * vr / (r * r + 0.01 * h * h);
        let st = &self.stabilization;
        (-st.viscosity_alpha * st.sound_speed * mu + st.viscosity_beta * mu * mu) / rho_mean
    }

    /// `(W(r) / W(Δp))^n`
    #[inline]
    pub fn artificial_stress_weight(&self, r: f64) -> f64 {
        (self.kernel.value(r) / self.w_spacing).powf(self.stabilization.artificial_stress_exponent)
    }
}

/// Artificial stress `[Rxx, Ryy, Rxy]` of one particle: `−ε σ'/ρ²` for each
/// tensile in-plane principal stress, rotated back to the lab frame.
pub fn artificial_stress(s: &StressState, rho: f64, eps: f64) -> [f64; 3] {
    if eps == 0.0 {
        return [0.0; 3];
    }
    let (s1, s2, angle) = s.principal_in_plane();
    if s1 <= 0.0 {
        return [0.0; 3];
    }
    let scale = -eps / (rho * rho);
    let r1 = scale * s1;
    let r2 = if s2 > 0.0 { scale * s2 } else { 0.0 };
    let (sin, cos) = angle.sin_cos();
    [
        r1 * cos * cos + r2 * sin * sin,
        r1 * sin * sin + r2 * cos * cos,
        (r1 - r2) * sin * cos,
    ]
}

#[inline]
pub(crate) fn stress_over_rho2(s: &StressState, rho: f64) -> [f64; 3] {
    let inv = 1.0 / (rho * rho);
    [s.sxx * inv, s.syy * inv, s.sxy * inv]
}

/// Velocity gradient `L[α][β] = Σ_b (m_b/ρ_b)(u̇_b − u̇_a)^α ∂_β W_ab`.
pub fn velocity_gradient_tensor(
    ps: &ParticleSet,
    grid: &NeighborGrid,
    kernel: &KernelSpec,
    a: usize,
) -> [[f64; 2]; 2] {
    let mut l = [[0.0; 2]; 2];
    for nb in grid.neighbors(&ps.position, a, kernel.support_radius()) {
        let b = nb.index;
        let g = nb.dx * (kernel.derivative(nb.r) / nb.r);
        let dv = (ps.velocity[b] - ps.velocity[a]) * (ps.mass[b] / ps.density[b]);
        l[0][0] += dv.x * g.x;
        l[0][1] += dv.x * g.y;
        l[1][0] += dv.y * g.x;
        l[1][1] += dv.y * g.y;
    }
    l
}

/// Strain rate and spin at particle `a`.
pub fn velocity_gradient(
    ps: &ParticleSet,
    grid: &NeighborGrid,
    kernel: &KernelSpec,
    a: usize,
) -> RateInput {
    RateInput::from_velocity_gradient(velocity_gradient_tensor(ps, grid, kernel, a))
}

/// Continuity: `dρ_a/dt = Σ_b m_b (u̇_a − u̇_b)·∇_a W_ab`.
pub fn density_rate(ps: &ParticleSet, grid: &NeighborGrid, kernel: &KernelSpec, a: usize) -> f64 {
    grid.neighbors(&ps.position, a, kernel.support_radius())
        .into_iter()
        .map(|nb| {
            let b = nb.index;
            let g = nb.dx * (kernel.derivative(nb.r) / nb.r);
            ps.mass[b] * (ps.velocity[a] - ps.velocity[b]).dot(&g)
        })
        .sum()
}

/// Momentum-equation acceleration of every soil particle, without contact
/// forces. Static particles get zero.
pub fn accelerations(
    ps: &ParticleSet,
    grid: &NeighborGrid,
    ctx: &SphContext,
    gravity: Vec2,
) -> Vec<Vec2> {
    let eps = ctx.stabilization.artificial_stress_eps;
    let art: Vec<[f64; 3]> = (0..ps.len())
        .map(|i| {
            if ps.kind[i].is_soil() {
                artificial_stress(&ps.stress[i], ps.density[i], eps)
            } else {
                [0.0; 3]
            }
        })
        .collect();
    (0..ps.len())
        .map(|a| {
            if !ps.kind[a].is_soil() {
                return Vec2::zeros();
            }
            let sa = stress_over_rho2(&ps.stress[a], ps.density[a]);
            let mut acc = gravity;
            for nb in grid.neighbors(&ps.position, a, ctx.kernel.support_radius()) {
                let b = nb.index;
                let g = nb.dx * (ctx.kernel.derivative(nb.r) / nb.r);
                let sb = stress_over_rho2(&ps.stress[b], ps.density[b]);
                let pi = ctx.viscosity(
                    ps.velocity[a] - ps.velocity[b],
                    nb.dx,
                    nb.r,
                    0.5 * (ps.density[a] + ps.density[b]),
                );
                let mut t = [sa[0] + sb[0] - pi, sa[1] + sb[1] - pi, sa[2] + sb[2]];
                if ps.kind[b].is_soil() && eps > 0.0 {
                    let f = ctx.artificial_stress_weight(nb.r);
                    for k in 0..3 {
                        t[k] += (art[a][k] + art[b][k]) * f;
                    }
                }
                acc.x += ps.mass[b] * (t[0] * g.x + t[2] * g.y);
                acc.y += ps.mass[b] * (t[2] * g.x + t[1] * g.y);
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn artificial_stress_only_in_tension() {
        let comp = StressState::new(-100.0, -50.0, -70.0, 10.0);
        assert_eq!(artificial_stress(&comp, 2000.0, 0.3), [0.0; 3]);
        let ten = StressState::new(100.0, -50.0, 0.0, 0.0);
        let r = artificial_stress(&ten, 10.0, 0.3);
        assert_relative_eq!(r[0], -0.3 * 100.0 / 100.0, max_relative = 1e-12);
        assert!(r[1].abs() < 1e-12 && r[2].abs() < 1e-12);
    }

    #[test]
    fn viscosity_vanishes_for_receding_pairs() {
        let m = MaterialParams::new(1.5e6, 0.3, 0.0, 0.3, 0.0, 23e3).unwrap();
        let st = StabilizationParams::new(0.1, 0.1, 0.3, 2.55, &m, 2344.5).unwrap();
        let ctx = SphContext::new(KernelSpec::new(0.003).unwrap(), st, 0.0025);
        let dx = Vec2::new(0.002, 0.0);
        assert_eq!(ctx.viscosity(Vec2::new(1.0, 0.0), dx, 0.002, 2000.0), 0.0);
        assert!(ctx.viscosity(Vec2::new(-1.0, 0.0), dx, 0.002, 2000.0) > 0.0);
        assert_relative_eq!(ctx.artificial_stress_weight(0.0025), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn paper_sound_speed() {
        let m = MaterialParams::new(1.5e6, 0.3, 0.0, 0.3, 0.0, 23e3).unwrap();
        let rho0 = m.reference_density(9.81);
        let st = StabilizationParams::new(0.1, 0.1, 0.3, 2.55, &m, rho0).unwrap();
        // (K + 4G/3) = 2.0192 MPa
        assert_relative_eq!(st.sound_speed, 29.347, max_relative = 1e-4);
    }

    fn lattice(velocity: impl Fn(Vec2) -> Vec2) -> (ParticleSet, NeighborGrid, KernelSpec) {
        use crate::grid::Bounds;
        use crate::particles::{lattice_init, Polygon};
        let m = MaterialParams::new(1.5e6, 0.3, 0.0, 0.3, 0.0, 23e3).unwrap();
        let dp = 0.0025;
        let region = Polygon::rectangle(Vec2::zeros(), Vec2::new(0.05, 0.05)).unwrap();
        let mut ps = lattice_init(&region, dp, &m, 9.81, 1.2 * dp).unwrap();
        for i in 0..ps.len() {
            ps.velocity[i] = velocity(ps.position[i]);
        }
        let kernel = KernelSpec::new(1.2 * dp).unwrap();
        let mut grid = NeighborGrid::new(kernel.support_radius()).unwrap();
        grid.rebuild(&ps.position, &Bounds::new(Vec2::zeros(), Vec2::new(0.05, 0.05)))
            .unwrap();
        (ps, grid, kernel)
    }

    fn interior(ps: &ParticleSet) -> Vec<usize> {
        (0..ps.len())
            .filter(|&i| {
                let p = ps.position[i];
                p.x > 0.01 && p.x < 0.04 && p.y > 0.01 && p.y < 0.04
            })
            .collect()
    }

    #[test]
    fn linear_field_gradient_in_interior() {
        // u = (a x + b y, c x + d y)
        let (a, b, c, d) = (0.3, -0.2, 0.5, 0.1);
        let (ps, grid, kernel) = lattice(|p| Vec2::new(a * p.x + b * p.y, c * p.x + d * p.y));
        for i in interior(&ps) {
            let l = velocity_gradient_tensor(&ps, &grid, &kernel, i);
            for (got, want) in [(l[0][0], a), (l[0][1], b), (l[1][0], c), (l[1][1], d)] {
                assert!((got - want).abs() <= 0.02 * 0.5, "{got} vs {want}");
            }
            let r = velocity_gradient(&ps, &grid, &kernel, i);
            assert!((r.spin - 0.5 * (b - c)).abs() <= 0.02 * 0.35);
        }
    }

    #[test]
    fn uniform_expansion_density_rate() {
        let k = 0.7;
        let (ps, grid, kernel) = lattice(|p| p * k);
        for i in interior(&ps) {
            let want = -2.0 * k * ps.density[i];
            let got = density_rate(&ps, &grid, &kernel, i);
            assert!((got - want).abs() <= 0.02 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn uniform_motion_has_no_rates() {
        let (ps, grid, kernel) = lattice(|_| Vec2::new(0.4, -1.1));
        for i in 0..ps.len() {
            assert!(density_rate(&ps, &grid, &kernel, i).abs() < 1e-9);
            let l = velocity_gradient_tensor(&ps, &grid, &kernel, i);
            assert!(l.iter().flatten().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn isolated_particle_has_no_rates() {
        use crate::grid::Bounds;
        let mut ps = ParticleSet::default();
        ps.push(
            crate::particles::ParticleKind::Soil,
            Vec2::zeros(),
            Vec2::new(1.0, 2.0),
            2000.0,
            0.01,
            StressState::default(),
            0.003,
            Vec2::zeros(),
        );
        let kernel = KernelSpec::new(0.003).unwrap();
        let mut grid = NeighborGrid::new(kernel.support_radius()).unwrap();
        grid.rebuild(&ps.position, &Bounds::new(Vec2::zeros(), Vec2::new(1.0, 1.0)))
            .unwrap();
        assert_eq!(density_rate(&ps, &grid, &kernel, 0), 0.0);
        assert_eq!(velocity_gradient_tensor(&ps, &grid, &kernel, 0), [[0.0; 2]; 2]);
    }
}
