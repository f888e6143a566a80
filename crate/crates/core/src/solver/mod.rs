//! Explicit time stepping of the coupled soil / rigid block system.
//!
//! A [`World`] owns soil and static boundary particles, the rigid blocks and
//! the per-pair contact history. Every step is a kick-drift-kick leapfrog:
//!
//! 1. half kick of soil velocities and block momenta, boundary constraints;
//! 2. drift of soil positions and block poses;
//! 3. neighbor rebuild over soil, static and block boundary particles;
//! 4. velocity gradients and continuity, then per-particle density and
//!    stress update;
//! 5. momentum sums, contact forces, gravity;
//! 6. second half kick and boundary constraints.
//!
//! Static particles (base, walls, stopper) take part in the SPH sums with
//! values interpolated from nearby soil; block boundary particles only
//! interact through the contact model.

pub mod boundary;
pub mod integrator;
pub mod sph;

use rayon::prelude::*;

use crate::constitutive::{update_stress, MaterialParams, RateInput, StressState};
use crate::contact::{
    pair_params, BodyClass, ContactBook, ContactKey, ContactMaterial, ContactParams, ContactSide,
    FrictionMap, COINCIDENT_DISTANCE,
};
use crate::error::{Error, Result};
use crate::grid::{Bounds, NeighborGrid, Pair};
use crate::kernel::KernelSpec;
use crate::particles::{ParticleKind, ParticleSet};
use crate::rigid::RigidBlock;
use crate::Vec2;

pub use boundary::{apply_boundaries, BoundaryCondition, BoundaryLine};
pub use sph::{SphContext, StabilizationParams};

/// Time stepping and settling controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    pub cfl_factor: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub snapshot_interval: f64,
    /// Length of the damped settling phase that precedes `t = 0`.
    pub damping_phase_duration: f64,
    /// Velocity damping rate during settling (1/s).
    pub damping_coefficient: f64,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self {
            cfl_factor: 0.1,
            dt_max: 1e-4,
            t_end: 1.5,
            snapshot_interval: 0.05,
            damping_phase_duration: 0.2,
            damping_coefficient: 200.0,
        }
    }
}

impl SolverControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 0.5) {
            return Err(Error::Parameter(format!(
                "cfl_factor must be in (0, 0.5], got {}",
                self.cfl_factor
            )));
        }
        if !(self.dt_max.is_finite() && self.dt_max > 0.0) {
            return Err(Error::Parameter(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Parameter(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.snapshot_interval.is_finite() && self.snapshot_interval > 0.0) {
            return Err(Error::Parameter(format!(
                "snapshot interval must be positive, got {}",
                self.snapshot_interval
            )));
        }
        for (name, v) in [
            ("damping phase duration", self.damping_phase_duration),
            ("damping coefficient", self.damping_coefficient),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// `cfl · h / (c_s + v_max)`, capped at `dt_max`.
pub fn stable_dt(h: f64, sound_speed: f64, max_speed: f64, controls: &SolverControls) -> f64 {
    (controls.cfl_factor * h / (sound_speed + max_speed)).min(controls.dt_max)
}

/// Contact materials of the three body classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactMaterials {
    pub soil: ContactMaterial,
    pub block: ContactMaterial,
    pub base: ContactMaterial,
}

/// Everything a [`World`] needs besides its bodies.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSetup {
    pub material: MaterialParams,
    pub stabilization: StabilizationParams,
    /// Initial lattice spacing `Δp`.
    pub spacing: f64,
    /// SPH smoothing length.
    pub smoothing: f64,
    pub gravity: Vec2,
    pub friction: FrictionMap,
    pub contact_materials: ContactMaterials,
    pub boundaries: Vec<BoundaryLine>,
    pub controls: SolverControls,
}

/// Diagnostics of the most recent step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub dt: f64,
    pub kinetic_energy: f64,
    pub max_speed: f64,
    pub active_contacts: usize,
    /// Largest `|f_s| − μ|f_n|` over this step's contacts (≤ 0 when the
    /// Coulomb bound holds).
    pub coulomb_excess: f64,
    /// Largest `|f_s| − μ|f_n|` since the world was built.
    pub worst_coulomb_excess: f64,
}

/// One contact pair in the optional audit trail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow {
    pub step: u64,
    pub a: ContactKey,
    pub i: ContactKey,
    pub delta_n: f64,
    /// Unit vector from `i` towards `a`.
    pub direction: Vec2,
    /// Total contact force on `a`.
    pub force: Vec2,
    pub normal: f64,
    pub shear: f64,
    pub capped: bool,
}

/// `R σ R` with the reflection `R = I − 2 n nᵀ` across the line of normal `n`.
pub fn reflect(s: &StressState, n: Vec2) -> StressState {
    let r = [
        [1.0 - 2.0 * n.x * n.x, -2.0 * n.x * n.y],
        [-2.0 * n.x * n.y, 1.0 - 2.0 * n.y * n.y],
    ];
    let m = [[s.sxx, s.sxy], [s.sxy, s.syy]];
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            for k in 0..2 {
                for l in 0..2 {
                    *v += r[i][k] * m[k][l] * r[l][j];
                }
            }
        }
    }
    StressState {
        sxx: out[0][0],
        syy: out[1][1],
        szz: s.szz,
        sxy: out[0][1],
        eps_p_acc: s.eps_p_acc,
    }
}

#[derive(Debug, Clone, Copy)]
struct SphPair {
    a: u32,
    b: u32,
    /// `∇_a W_ab`
    grad: Vec2,
    dx: Vec2,
    r: f64,
    w: f64,
}

#[derive(Debug, Clone)]
pub struct World {
    pub particles: ParticleSet,
    pub blocks: Vec<RigidBlock>,
    pub material: MaterialParams,
    pub friction: FrictionMap,
    pub contact_materials: ContactMaterials,
    pub ctx: SphContext,
    pub gravity: Vec2,
    pub boundaries: Vec<BoundaryLine>,
    pub controls: SolverControls,
    pub spacing: f64,
    pub rho0: f64,
    pub time: f64,
    pub step_count: u64,
    /// Current velocity damping rate; non-zero only while settling.
    pub damping: f64,
    pub stats: StepStats,
    /// Per-step contact audit, filled only when enabled.
    pub audit: Option<Vec<AuditRow>>,
    contacts: ContactBook,
    grid: NeighborGrid,
    bounds: Bounds,
    acc: Vec<Vec2>,
    combined: Vec<Vec2>,
    /// `(block, index)` of every block boundary particle, block-major.
    owner: Vec<(u32, u32)>,
    raw_pairs: Vec<Pair>,
    sph_pairs: Vec<SphPair>,
    contact_pairs: Vec<Pair>,
    grad_v: Vec<[[f64; 2]; 2]>,
    drho: Vec<f64>,
    art: Vec<[f64; 3]>,
    s_rho2: Vec<[f64; 3]>,
    shepard: Vec<f64>,
}

fn numerical_at(step: u64, time: f64, reason: impl Into<String>) -> Error {
    Error::numerical(step, time, reason)
}

impl World {
    pub fn new(setup: WorldSetup, particles: ParticleSet, blocks: Vec<RigidBlock>) -> Result<Self> {
        setup.controls.validate()?;
        setup.friction.validate()?;
        let kernel = KernelSpec::new(setup.smoothing)?;
        if !(setup.spacing.is_finite() && setup.spacing > 0.0) {
            return Err(Error::Parameter(format!(
                "particle spacing must be positive, got {}",
                setup.spacing
            )));
        }
        let g = setup.gravity.norm();
        let rho0 = if g > 0.0 {
            setup.material.reference_density(g)
        } else {
            particles.density.first().copied().unwrap_or(1.0)
        };
        let ctx = SphContext::new(kernel, setup.stabilization, setup.spacing);
        let mut min = Vec2::repeat(f64::INFINITY);
        let mut max = Vec2::repeat(f64::NEG_INFINITY);
        for p in particles
            .position
            .iter()
            .chain(blocks.iter().flat_map(|b| b.world_positions()))
        {
            min = min.inf(p);
            max = max.sup(p);
        }
        if particles.is_empty() && blocks.is_empty() {
            min = Vec2::zeros();
            max = Vec2::repeat(1.0);
        }
        // a degenerate box would flag every particle as runaway
        let pad = Vec2::repeat(kernel.support_radius());
        let (min, max) = (min - pad, max + pad);
        let owner = blocks
            .iter()
            .enumerate()
            .flat_map(|(bi, b)| (0..b.particle_count() as u32).map(move |k| (bi as u32, k)))
            .collect();
        let n = particles.len();
        let mut world = World {
            particles,
            blocks,
            material: setup.material,
            friction: setup.friction,
            contact_materials: setup.contact_materials,
            ctx,
            gravity: setup.gravity,
            boundaries: setup.boundaries,
            controls: setup.controls,
            spacing: setup.spacing,
            rho0,
            time: 0.0,
            step_count: 0,
            damping: 0.0,
            stats: StepStats::default(),
            audit: None,
            contacts: ContactBook::new(),
            grid: NeighborGrid::new(kernel.support_radius())?,
            bounds: Bounds::new(min, max),
            acc: vec![Vec2::zeros(); n],
            combined: Vec::new(),
            owner,
            raw_pairs: Vec::new(),
            sph_pairs: Vec::new(),
            contact_pairs: Vec::new(),
            grad_v: Vec::new(),
            drho: Vec::new(),
            art: Vec::new(),
            s_rho2: Vec::new(),
            shepard: Vec::new(),
        };
        world.prime()?;
        Ok(world)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.ctx.kernel
    }

    /// Acceleration of every particle from the latest force evaluation.
    pub fn accelerations(&self) -> &[Vec2] {
        &self.acc
    }

    pub fn contact_count(&self) -> usize {
        self.contacts.len()
    }

    /// Recomputes forces at the current state without advancing anything.
    pub fn prime(&mut self) -> Result<()> {
        self.evaluate(0.0, false)?;
        self.update_stats(0.0, 0.0);
        Ok(())
    }

    /// Largest soil particle speed or block boundary particle speed.
    pub fn max_speed(&self) -> f64 {
        let soil = self
            .particles
            .kind
            .iter()
            .zip(&self.particles.velocity)
            .filter(|(k, _)| k.is_soil())
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max);
        self.blocks.iter().fold(soil, |m, b| {
            let reach = 0.5 * (b.width * b.width + b.height * b.height).sqrt();
            m.max(b.velocity.norm() + b.angular_velocity.abs() * reach)
        })
    }

    pub fn stable_dt(&self) -> f64 {
        stable_dt(
            self.ctx.kernel.h(),
            self.ctx.stabilization.sound_speed,
            self.max_speed(),
            &self.controls,
        )
    }

    pub fn soil_kinetic_energy(&self) -> f64 {
        let ps = &self.particles;
        (0..ps.len())
            .filter(|&i| ps.kind[i].is_soil())
            .map(|i| 0.5 * ps.mass[i] * ps.velocity[i].norm_squared())
            .sum()
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.soil_kinetic_energy() + self.blocks.iter().map(|b| b.kinetic_energy()).sum::<f64>()
    }

    /// Largest kinetic energy of a single soil particle or block.
    pub fn max_entity_kinetic_energy(&self) -> f64 {
        let ps = &self.particles;
        let soil = (0..ps.len())
            .filter(|&i| ps.kind[i].is_soil())
            .map(|i| 0.5 * ps.mass[i] * ps.velocity[i].norm_squared())
            .fold(0.0, f64::max);
        self.blocks.iter().map(|b| b.kinetic_energy()).fold(soil, f64::max)
    }

    /// Removes the stopper, releases held blocks and switches damping off.
    pub fn release(&mut self) -> Result<()> {
        let keep: Vec<bool> = self
            .particles
            .kind
            .iter()
            .map(|&k| k != ParticleKind::Stopper)
            .collect();
        let mut it = keep.iter();
        self.acc.retain(|_| *it.next().unwrap());
        self.particles.retain(|k| k != ParticleKind::Stopper);
        for b in &mut self.blocks {
            b.held = false;
        }
        self.damping = 0.0;
        self.prime()
    }

    /// Advances by one stable time step.
    pub fn step(&mut self) -> Result<StepStats> {
        let dt = self.stable_dt();
        self.step_with(dt)
    }

    /// Advances by `dt`.
    pub fn step_with(&mut self, dt: f64) -> Result<StepStats> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(numerical_at(self.step_count, self.time, format!("invalid time step {dt}")));
        }
        self.kick(0.5 * dt);
        apply_boundaries(&mut self.particles, &self.boundaries);
        {
            let ps = &mut self.particles;
            for i in 0..ps.len() {
                if ps.kind[i].is_soil() {
                    let v = ps.velocity[i];
                    ps.position[i] += v * dt;
                }
            }
        }
        for b in &mut self.blocks {
            b.drift(dt);
        }
        self.evaluate(dt, true)?;
        self.kick(0.5 * dt);
        apply_boundaries(&mut self.particles, &self.boundaries);
        if self.damping > 0.0 {
            let f = (-self.damping * dt).exp();
            let ps = &mut self.particles;
            for i in 0..ps.len() {
                if ps.kind[i].is_soil() {
                    ps.velocity[i] *= f;
                }
            }
            for b in &mut self.blocks {
                b.velocity *= f;
                b.angular_velocity *= f;
            }
        }
        self.time += dt;
        self.step_count += 1;
        self.check_finite()?;
        self.update_stats(dt, self.stats.coulomb_excess);
        Ok(self.stats)
    }

    fn kick(&mut self, dt: f64) {
        let ps = &mut self.particles;
        for i in 0..ps.len() {
            if ps.kind[i].is_soil() {
                ps.velocity[i] += self.acc[i] * dt;
            }
        }
        for b in &mut self.blocks {
            b.kick(self.gravity, dt);
        }
    }

    fn update_stats(&mut self, dt: f64, excess: f64) {
        self.stats.dt = dt;
        self.stats.kinetic_energy = self.kinetic_energy();
        self.stats.max_speed = self.max_speed();
        self.stats.active_contacts = self.contacts.len();
        self.stats.coulomb_excess = excess;
    }

    fn check_finite(&self) -> Result<()> {
        let ps = &self.particles;
        for i in 0..ps.len() {
            let p = ps.position[i];
            let v = ps.velocity[i];
            if !(p.x.is_finite() && p.y.is_finite() && v.x.is_finite() && v.y.is_finite()) {
                return Err(numerical_at(
                    self.step_count,
                    self.time,
                    format!("particle {} has a non-finite position or velocity", ps.id[i]),
                ));
            }
        }
        for b in &self.blocks {
            let ok = b.centroid.iter().chain(b.velocity.iter()).all(|x| x.is_finite())
                && b.angle.is_finite()
                && b.angular_velocity.is_finite();
            if !ok {
                return Err(numerical_at(
                    self.step_count,
                    self.time,
                    format!("block {} has a non-finite state", b.id),
                ));
            }
        }
        Ok(())
    }

    fn block_particle_velocity(&self, k: usize) -> Vec2 {
        let (b, i) = self.owner[k];
        self.blocks[b as usize].particle_velocity(i as usize)
    }

    /// Neighbor rebuild, optional state update and force evaluation.
    fn evaluate(&mut self, dt: f64, update: bool) -> Result<()> {
        let n = self.particles.len();
        for b in &mut self.blocks {
            b.clear_forces();
        }
        self.combined.clear();
        self.combined.extend_from_slice(&self.particles.position);
        for b in &self.blocks {
            self.combined.extend_from_slice(b.world_positions());
        }
        self.grid
            .rebuild(&self.combined, &self.bounds)
            .map_err(|e| numerical_at(self.step_count, self.time, e.to_string()))?;
        self.grid.pairs(self.ctx.kernel.support_radius(), &mut self.raw_pairs);
        self.split_pairs(n);

        self.ghost_velocities();
        if update {
            self.velocity_gradients();
            self.update_particles(dt)?;
        }
        self.ghost_stresses();
        self.artificial_stresses();
        self.momentum();
        self.contact_forces(dt)?;
        self.contacts.commit();
        Ok(())
    }

    fn split_pairs(&mut self, n: usize) {
        self.sph_pairs.clear();
        self.contact_pairs.clear();
        let kernel = self.ctx.kernel;
        let kinds = &self.particles.kind;
        for p in &self.raw_pairs {
            let (a, b) = (p.a as usize, p.b as usize);
            if b < n {
                if kinds[a].is_static() && kinds[b].is_static() {
                    continue;
                }
                self.sph_pairs.push(SphPair {
                    a: p.a,
                    b: p.b,
                    grad: p.dx * (kernel.derivative(p.r) / p.r),
                    dx: p.dx,
                    r: p.r,
                    w: kernel.value(p.r),
                });
            } else if a < n || self.owner[a - n].0 != self.owner[b - n].0 {
                self.contact_pairs.push(*p);
            }
        }
    }

    /// Velocities of static particles: zero for the base, the tangential part
    /// of the local soil velocity for free-slip walls.
    fn ghost_velocities(&mut self) {
        let ps = &mut self.particles;
        let n = ps.len();
        let mut sum = vec![Vec2::zeros(); n];
        let mut wsum = vec![0.0; n];
        for p in &self.sph_pairs {
            let (a, b) = (p.a as usize, p.b as usize);
            match (ps.kind[a].is_static(), ps.kind[b].is_static()) {
                (true, false) => {
                    sum[a] += ps.velocity[b] * p.w;
                    wsum[a] += p.w;
                }
                (false, true) => {
                    sum[b] += ps.velocity[a] * p.w;
                    wsum[b] += p.w;
                }
                _ => {}
            }
        }
        for i in 0..n {
            match ps.kind[i] {
                ParticleKind::Soil => {}
                ParticleKind::Base => ps.velocity[i] = Vec2::zeros(),
                ParticleKind::Wall | ParticleKind::Stopper => {
                    let v = if wsum[i] > 0.0 { sum[i] / wsum[i] } else { Vec2::zeros() };
                    let nrm = ps.normal[i];
                    ps.velocity[i] = v - nrm * v.dot(&nrm);
                }
            }
        }
    }

    /// Shepard-interpolated stress and density of static particles.
    fn ghost_stresses(&mut self) {
        let ps = &mut self.particles;
        let n = ps.len();
        let mut stress = vec![[0.0; 4]; n];
        let mut rho = vec![0.0; n];
        self.shepard.clear();
        self.shepard.resize(n, 0.0);
        for p in &self.sph_pairs {
            let (a, b) = (p.a as usize, p.b as usize);
            let (s, d) = match (ps.kind[a].is_static(), ps.kind[b].is_static()) {
                (true, false) => (a, b),
                (false, true) => (b, a),
                _ => continue,
            };
            let w = p.w * ps.mass[d] / ps.density[d];
            let sd = &ps.stress[d];
            for (acc, v) in stress[s].iter_mut().zip([sd.sxx, sd.syy, sd.szz, sd.sxy]) {
                *acc += w * v;
            }
            rho[s] += w * ps.density[d];
            self.shepard[s] += w;
        }
        for i in 0..n {
            if ps.kind[i].is_soil() {
                continue;
            }
            let w = self.shepard[i];
            if w > 0.0 {
                let s = stress[i];
                let mut g = StressState::new(s[0] / w, s[1] / w, s[2] / w, s[3] / w);
                if matches!(ps.kind[i], ParticleKind::Wall | ParticleKind::Stopper) {
                    // mirror image across a frictionless wall: no shear traction
                    g = reflect(&g, ps.normal[i]);
                }
                ps.stress[i] = g;
                ps.density[i] = rho[i] / w;
            } else {
                ps.stress[i] = StressState::default();
                ps.density[i] = self.rho0;
            }
        }
    }

    fn velocity_gradients(&mut self) {
        let ps = &self.particles;
        let n = ps.len();
        self.grad_v.clear();
        self.grad_v.resize(n, [[0.0; 2]; 2]);
        self.drho.clear();
        self.drho.resize(n, 0.0);
        for p in &self.sph_pairs {
            let (a, b) = (p.a as usize, p.b as usize);
            let dv = ps.velocity[b] - ps.velocity[a];
            let g = p.grad;
            if ps.kind[a].is_soil() {
                let f = ps.mass[b] / ps.density[b];
                let l = &mut self.grad_v[a];
                l[0][0] += f * dv.x * g.x;
                l[0][1] += f * dv.x * g.y;
                l[1][0] += f * dv.y * g.x;
                l[1][1] += f * dv.y * g.y;
                self.drho[a] -= ps.mass[b] * dv.dot(&g);
            }
            if ps.kind[b].is_soil() {
                // ∇_b W = −g and (v_a − v_b) = −dv
                let f = ps.mass[a] / ps.density[a];
                let l = &mut self.grad_v[b];
                l[0][0] += f * dv.x * g.x;
                l[0][1] += f * dv.x * g.y;
                l[1][0] += f * dv.y * g.x;
                l[1][1] += f * dv.y * g.y;
                self.drho[b] -= ps.mass[a] * dv.dot(&g);
            }
        }
    }

    fn update_particles(&mut self, dt: f64) -> Result<()> {
        let (step, time, rho0) = (self.step_count, self.time, self.rho0);
        let material = self.material;
        let ps = &mut self.particles;
        let grad_v = &self.grad_v;
        let drho = &self.drho;
        let ids = &ps.id;
        let kinds = &ps.kind;
        ps.density
            .par_iter_mut()
            .zip(ps.stress.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (rho, s))| -> Result<()> {
                if !kinds[i].is_soil() {
                    return Ok(());
                }
                *rho += dt * drho[i];
                if !(*rho > 0.5 * rho0 && *rho < 2.0 * rho0) {
                    return Err(numerical_at(
                        step,
                        time,
                        format!("particle {} density {:.6e} left [0.5, 2]·ρ₀", ids[i], rho),
                    ));
                }
                let rate = RateInput::from_velocity_gradient(grad_v[i]);
                *s = update_stress(s, &rate, &material, dt).map_err(|e| {
                    numerical_at(step, time, format!("particle {}: {e}", ids[i]))
                })?;
                Ok(())
            })
    }

    fn artificial_stresses(&mut self) {
        let eps = self.ctx.stabilization.artificial_stress_eps;
        let ps = &self.particles;
        self.art.clear();
        self.art.extend((0..ps.len()).map(|i| {
            if ps.kind[i].is_soil() {
                sph::artificial_stress(&ps.stress[i], ps.density[i], eps)
            } else {
                [0.0; 3]
            }
        }));
    }

    fn momentum(&mut self) {
        let ps = &self.particles;
        let n = ps.len();
        self.acc.clear();
        self.acc.resize(n, Vec2::zeros());
        self.s_rho2.clear();
        self.s_rho2
            .extend((0..n).map(|i| sph::stress_over_rho2(&ps.stress[i], ps.density[i])));
        let with_art = self.ctx.stabilization.artificial_stress_eps > 0.0;
        for p in &self.sph_pairs {
            let (a, b) = (p.a as usize, p.b as usize);
            let (sa, sb) = (&self.s_rho2[a], &self.s_rho2[b]);
            let pi = self.ctx.viscosity(
                ps.velocity[a] - ps.velocity[b],
                p.dx,
                p.r,
                0.5 * (ps.density[a] + ps.density[b]),
            );
            let mut t = [sa[0] + sb[0] - pi, sa[1] + sb[1] - pi, sa[2] + sb[2]];
            let soil_a = ps.kind[a].is_soil();
            let soil_b = ps.kind[b].is_soil();
            if with_art && soil_a && soil_b {
                let (ra, rb) = (self.art[a], self.art[b]);
                // zero for both particles unless one is in tension
                if ra != [0.0; 3] || rb != [0.0; 3] {
                    let f = self.ctx.artificial_stress_weight(p.r);
                    for (k, tk) in t.iter_mut().enumerate() {
                        *tk += (ra[k] + rb[k]) * f;
                    }
                }
            }
            let g = p.grad;
            let f = Vec2::new(t[0] * g.x + t[2] * g.y, t[2] * g.x + t[1] * g.y);
            if soil_a {
                self.acc[a] += f * ps.mass[b];
            }
            if soil_b {
                self.acc[b] -= f * ps.mass[a];
            }
        }
        for i in 0..n {
            if ps.kind[i].is_soil() {
                self.acc[i] += self.gravity;
            }
        }
    }

    fn side_of(&self, k: usize, n: usize) -> (ContactSide, ContactKey) {
        if k < n {
            let ps = &self.particles;
            if ps.kind[k].is_soil() {
                (
                    ContactSide {
                        class: BodyClass::Soil,
                        material: self.contact_materials.soil,
                        mass: Some(ps.mass[k]),
                        smoothing: ps.smoothing[k],
                    },
                    ContactKey::Particle(ps.id[k]),
                )
            } else {
                (
                    ContactSide {
                        class: BodyClass::Static,
                        material: self.contact_materials.base,
                        mass: None,
                        smoothing: ps.smoothing[k],
                    },
                    ContactKey::Particle(ps.id[k]),
                )
            }
        } else {
            let (bi, i) = self.owner[k - n];
            let b = &self.blocks[bi as usize];
            (
                ContactSide {
                    class: BodyClass::Block,
                    material: self.contact_materials.block,
                    mass: Some(b.particle_mass()),
                    smoothing: b.smoothing,
                },
                ContactKey::Block { block: b.id, index: i },
            )
        }
    }

    fn velocity_of(&self, k: usize, n: usize) -> Vec2 {
        if k < n {
            self.particles.velocity[k]
        } else {
            self.block_particle_velocity(k - n)
        }
    }

    fn contact_forces(&mut self, dt: f64) -> Result<()> {
        let n = self.particles.len();
        let mut excess = f64::NEG_INFINITY;
        let audit = self.audit.is_some();
        if let Some(rows) = self.audit.as_mut() {
            rows.clear();
        }
        let pairs = std::mem::take(&mut self.contact_pairs);
        for p in &pairs {
            let (a, i) = (p.a as usize, p.b as usize);
            let (side_a, key_a) = self.side_of(a, n);
            let (side_i, key_i) = self.side_of(i, n);
            let reach = 0.5 * (side_a.smoothing + side_i.smoothing);
            if p.r >= reach {
                continue;
            }
            if p.r < COINCIDENT_DISTANCE {
                self.contact_pairs = pairs;
                return Err(numerical_at(
                    self.step_count,
                    self.time,
                    format!("contact particles {key_a:?} and {key_i:?} coincide"),
                ));
            }
            let params: ContactParams = pair_params(&side_a, &side_i, &self.friction)?;
            let nrm = p.dx / p.r;
            let v_rel = self.velocity_of(a, n) - self.velocity_of(i, n);
            let f = self
                .contacts
                .evaluate((key_a, key_i), reach - p.r, nrm, v_rel, &params, dt);
            excess = excess.max(f.shear.abs() - params.friction * f.normal.abs());
            if audit {
                if let Some(rows) = self.audit.as_mut() {
                    rows.push(AuditRow {
                        step: self.step_count,
                        a: key_a,
                        i: key_i,
                        delta_n: f.delta_n,
                        direction: nrm,
                        force: f.on_a,
                        normal: f.normal,
                        shear: f.shear,
                        capped: f.capped,
                    });
                }
            }
            self.apply_contact(a, f.on_a, n);
            self.apply_contact(i, -f.on_a, n);
        }
        self.contact_pairs = pairs;
        if excess.is_finite() {
            self.stats.coulomb_excess = excess;
            self.stats.worst_coulomb_excess = self.stats.worst_coulomb_excess.max(excess);
        } else {
            self.stats.coulomb_excess = 0.0;
        }
        Ok(())
    }

    fn apply_contact(&mut self, k: usize, f: Vec2, n: usize) {
        if k < n {
            if self.particles.kind[k].is_soil() {
                self.acc[k] += f / self.particles.mass[k];
            }
        } else {
            let (b, i) = self.owner[k - n];
            self.blocks[b as usize].accumulate(i as usize, f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::invariants_of;
    use crate::contact::FrictionMap;
    use crate::particles::{lattice_init, Polygon};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn material() -> MaterialParams {
        MaterialParams::new(1.5e6, 0.3, 0.0, 19.8f64.to_radians(), 0.0, 23e3).unwrap()
    }

    fn setup(gravity: Vec2) -> WorldSetup {
        let m = material();
        let rho0 = m.reference_density(9.81);
        let dp = 0.0025;
        let al = ContactMaterial::from_young_poisson(69e9, 0.33);
        WorldSetup {
            material: m,
            stabilization: StabilizationParams::new(0.1, 0.1, 0.3, 2.55, &m, rho0).unwrap(),
            spacing: dp,
            smoothing: 1.2 * dp,
            gravity,
            friction: FrictionMap {
                block_block: 0.62,
                block_base: 0.60,
                block_soil: 0.56,
            },
            contact_materials: ContactMaterials {
                soil: ContactMaterial::from_young_poisson(1.5e6, 0.3),
                block: al,
                base: al,
            },
            boundaries: Vec::new(),
            controls: SolverControls::default(),
        }
    }

    fn patch(seed: u64) -> ParticleSet {
        let region = Polygon::rectangle(Vec2::zeros(), Vec2::new(0.03, 0.02)).unwrap();
        let mut ps = lattice_init(&region, 0.0025, &material(), 9.81, 0.003).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..ps.len() {
            ps.velocity[i] = Vec2::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05));
            let p = rng.gen_range(-2e3..-1e3);
            ps.stress[i] = StressState::new(p, p * 1.1, p, rng.gen_range(-50.0..50.0));
        }
        ps
    }

    #[test]
    fn reflection_across_vertical_wall_flips_shear() {
        let s = StressState::new(-3.0, -5.0, -4.0, 1.5);
        let r = reflect(&s, Vec2::new(1.0, 0.0));
        assert_eq!((r.sxx, r.syy, r.szz, r.sxy), (-3.0, -5.0, -4.0, -1.5));
        let r = reflect(&s, Vec2::new(0.0, -1.0));
        assert_eq!(r.sxy, -1.5);
    }

    #[test]
    fn reflection_is_an_involution_preserving_invariants() {
        let s = StressState::new(-3.0, -5.0, -4.0, 1.5);
        let n = Vec2::new(0.6, 0.8);
        let r = reflect(&s, n);
        let (a, b) = (invariants_of(&s), invariants_of(&r));
        assert_relative_eq!(a.i1, b.i1, max_relative = 1e-14);
        assert_relative_eq!(a.j2, b.j2, max_relative = 1e-14);
        let back = reflect(&r, n);
        assert_relative_eq!(back.sxy, s.sxy, max_relative = 1e-14);
        assert_relative_eq!(back.sxx, s.sxx, max_relative = 1e-14);
    }

    #[test]
    fn stable_dt_for_paper_soil() {
        let c = 29.347;
        let ctl = SolverControls::default();
        let dt = stable_dt(0.003, c, 0.0, &ctl);
        assert_relative_eq!(dt, 1.0e-5, max_relative = 0.03);
        let fast = stable_dt(0.003, c, 10.0 * c, &ctl);
        assert_relative_eq!(dt / fast, 11.0, max_relative = 1e-12);
        let capped = SolverControls {
            dt_max: 1e-6,
            ..ctl
        };
        assert_eq!(stable_dt(0.003, c, 0.0, &capped), 1e-6);
    }

    #[test]
    fn pairwise_sums_match_reference() {
        let ps = patch(3);
        let world = World::new(setup(Vec2::new(0.0, -9.81)), ps.clone(), Vec::new()).unwrap();
        let mut grid = NeighborGrid::new(world.kernel().support_radius()).unwrap();
        grid.rebuild(&ps.position, &world.bounds).unwrap();
        let reference = sph::accelerations(&ps, &grid, &world.ctx, world.gravity);
        for (a, b) in world.accelerations().iter().zip(&reference) {
            assert!((a - b).norm() <= 1e-9 * b.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn momentum_is_conserved_without_gravity() {
        let ps = patch(5);
        let mut world = World::new(setup(Vec2::zeros()), ps, Vec::new()).unwrap();
        let momentum = |w: &World| {
            let p = &w.particles;
            (0..p.len()).fold(Vec2::zeros(), |acc, i| acc + p.velocity[i] * p.mass[i])
        };
        let scale: f64 = {
            let p = &world.particles;
            (0..p.len()).map(|i| p.mass[i] * p.velocity[i].norm()).sum()
        };
        let before = momentum(&world);
        for _ in 0..50 {
            world.step().unwrap();
        }
        let after = momentum(&world);
        assert!((after - before).norm() <= 1e-12 * scale, "{before} -> {after}");
    }

    #[test]
    fn free_fall_under_gravity() {
        // a lone particle feels gravity only
        let mut ps = ParticleSet::default();
        ps.push(
            ParticleKind::Soil,
            Vec2::new(0.0, 1.0),
            Vec2::zeros(),
            2344.5,
            0.01,
            StressState::default(),
            0.003,
            Vec2::zeros(),
        );
        let g = Vec2::new(0.0, -9.81);
        let mut world = World::new(setup(g), ps, Vec::new()).unwrap();
        let dt = 1e-4;
        for _ in 0..1000 {
            world.step_with(dt).unwrap();
        }
        let t = world.time;
        assert_relative_eq!(world.particles.position[0].y, 1.0 - 0.5 * 9.81 * t * t, max_relative = 1e-12);
    }

    #[test]
    fn density_abort_is_numerical() {
        let mut ps = patch(9);
        for i in 0..ps.len() {
            ps.velocity[i] = ps.position[i] * -2000.0;
        }
        let mut world = World::new(setup(Vec2::zeros()), ps, Vec::new()).unwrap();
        let err = (0..200).find_map(|_| world.step().err()).expect("compression aborts");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn release_removes_stopper_and_damping() {
        let mut ps = patch(1);
        ps.push(
            ParticleKind::Stopper,
            Vec2::new(0.0325, 0.01),
            Vec2::zeros(),
            2344.5,
            0.01,
            StressState::default(),
            0.0025,
            Vec2::new(-1.0, 0.0),
        );
        let mut world = World::new(setup(Vec2::zeros()), ps, Vec::new()).unwrap();
        world.damping = 200.0;
        let n = world.particles.len();
        world.release().unwrap();
        assert_eq!(world.particles.len(), n - 1);
        assert_eq!(world.damping, 0.0);
        assert_eq!(world.accelerations().len(), n - 1);
    }
}
