//! World assembly from a [`SceneConfig`].

use crate::constitutive::{return_to_surface, MaterialParams, StressState};
use crate::contact::ContactMaterial;
use crate::error::Result;
use crate::particles::{lattice_init, ParticleKind, ParticleSet, Polygon};
use crate::rigid::{make_block_with_edges, RigidBlock};
use crate::solver::{
    BoundaryCondition, BoundaryLine, ContactMaterials, StabilizationParams, World, WorldSetup,
};
use crate::Vec2;

use super::config::SceneConfig;

impl SceneConfig {
    pub fn material(&self) -> Result<MaterialParams> {
        let s = &self.soil;
        MaterialParams::new(
            s.young_modulus,
            s.poisson_ratio,
            s.cohesion,
            s.friction_angle,
            s.dilatancy_angle,
            s.unit_weight,
        )
    }

    pub fn smoothing(&self) -> f64 {
        self.soil.smoothing_ratio * self.soil.spacing
    }

    pub fn polygon(&self) -> Result<Polygon> {
        Polygon::new(self.soil.polygon.clone())
    }

    fn g(&self) -> f64 {
        let g = self.gravity.norm();
        if g > 0.0 {
            g
        } else {
            9.81
        }
    }

    /// Soil particles with the at-rest stress profile.
    pub fn soil_particles(&self) -> Result<ParticleSet> {
        let material = self.material()?;
        let region = self.polygon()?;
        let mut ps = lattice_init(&region, self.soil.spacing, &material, self.g(), self.smoothing())?;
        geostatic_stress(&mut ps, &region, &material);
        Ok(ps)
    }

    /// One block at the origin, unrotated, with the configured edge spacings.
    pub fn block_template(&self) -> Result<Option<RigidBlock>> {
        let Some(b) = &self.blocks else {
            return Ok(None);
        };
        let sp = b.particle_spacing;
        let mut blk = make_block_with_edges(
            b.width,
            b.height,
            b.unit_weight / self.g(),
            [sp, sp, b.top_spacing, sp],
            0.5 * b.smoothing,
        )?;
        blk.smoothing = b.smoothing;
        Ok(Some(blk))
    }

    /// Rigid blocks at their initial positions, bottom course first.
    pub fn make_blocks(&self) -> Result<Vec<RigidBlock>> {
        let Some(template) = self.block_template()? else {
            return Ok(Vec::new());
        };
        Ok(self
            .block_rectangles()
            .into_iter()
            .enumerate()
            .map(|(k, (min, max))| {
                let mut blk = template.clone().with_pose(0.5 * (min + max), 0.0);
                blk.id = k as u32;
                blk
            })
            .collect())
    }

    /// Base row, lateral walls and stopper.
    ///
    /// Static particles sit half a soil spacing outside the boundary line and
    /// carry a contact smoothing length of one soil spacing, so their contact
    /// surface coincides with the line.
    pub fn static_particles(&self) -> Result<ParticleSet> {
        let material = self.material()?;
        let rho0 = material.reference_density(self.g());
        let dp = self.soil.spacing;
        let region = self.polygon()?;
        let (min, max) = region.bounding_box();
        let mut ps = ParticleSet::default();
        let add = |ps: &mut ParticleSet, kind, p, along: f64, normal| {
            ps.push(
                kind,
                p,
                Vec2::zeros(),
                rho0,
                rho0 * dp * along,
                StressState::default(),
                dp,
                normal,
            );
        };

        let bd = &self.boundary;
        let x0 = if bd.left_wall { min.x - 0.5 * dp } else { min.x };
        let x1 = if bd.right_wall {
            max.x + 0.5 * dp
        } else {
            min.x + bd.base_length
        };
        let n = ((x1 - x0) / bd.base_spacing).round().max(1.0) as usize;
        let step = (x1 - x0) / n as f64;
        for k in 0..=n {
            add(
                &mut ps,
                ParticleKind::Base,
                Vec2::new(x0 + k as f64 * step, min.y - 0.5 * dp),
                step,
                Vec2::new(0.0, 1.0),
            );
        }

        let wall_top = max.y + 2.0 * dp;
        let wall_sp = 0.5 * dp;
        let nw = ((wall_top - min.y) / wall_sp).ceil() as usize;
        for (on, x, nx) in [
            (bd.left_wall, min.x - 0.5 * dp, 1.0),
            (bd.right_wall, max.x + 0.5 * dp, -1.0),
        ] {
            if !on {
                continue;
            }
            for k in 0..nw {
                let y = min.y + (k as f64 + 0.5) * wall_sp;
                add(&mut ps, ParticleKind::Wall, Vec2::new(x, y), wall_sp, Vec2::new(nx, 0.0));
            }
        }

        if let Some(st) = &self.stopper {
            let ns = ((st.y_max - st.y_min) / wall_sp).ceil() as usize;
            for k in 0..ns {
                let y = st.y_min + (k as f64 + 0.5) * wall_sp;
                add(
                    &mut ps,
                    ParticleKind::Stopper,
                    Vec2::new(st.x + 0.5 * dp, y),
                    wall_sp,
                    Vec2::new(-1.0, 0.0),
                );
            }
        }
        Ok(ps)
    }

    pub fn boundary_lines(&self) -> Result<Vec<BoundaryLine>> {
        let (min, max) = self.polygon()?.bounding_box();
        let band = self.soil.spacing;
        let mut lines = vec![BoundaryLine::base(min.y, band)];
        if self.boundary.left_wall {
            lines.push(BoundaryLine::left_wall(min.x, band));
        }
        if self.boundary.right_wall {
            lines.push(BoundaryLine {
                point: Vec2::new(max.x, 0.0),
                normal: Vec2::new(-1.0, 0.0),
                condition: BoundaryCondition::FreeSlip,
                band,
            });
        }
        Ok(lines)
    }

    pub fn world_setup(&self) -> Result<WorldSetup> {
        let material = self.material()?;
        let rho0 = material.reference_density(self.g());
        let st = &self.stabilization;
        let block = match &self.blocks {
            Some(b) => ContactMaterial::from_young_poisson(b.young_modulus, b.poisson_ratio),
            None => ContactMaterial::from_young_poisson(
                self.boundary.young_modulus,
                self.boundary.poisson_ratio,
            ),
        };
        Ok(WorldSetup {
            material,
            stabilization: StabilizationParams::new(
                st.viscosity_alpha,
                st.viscosity_beta,
                st.artificial_stress_eps,
                st.artificial_stress_exponent,
                &material,
                rho0,
            )?,
            spacing: self.soil.spacing,
            smoothing: self.smoothing(),
            gravity: self.gravity,
            friction: self.friction,
            contact_materials: ContactMaterials {
                soil: ContactMaterial::from_young_poisson(
                    self.soil.young_modulus,
                    self.soil.poisson_ratio,
                ),
                block,
                base: ContactMaterial::from_young_poisson(
                    self.boundary.young_modulus,
                    self.boundary.poisson_ratio,
                ),
            },
            boundaries: self.boundary_lines()?,
            controls: self.controls,
        })
    }

    /// Settling-phase world: stopper in place, damping on, blocks held if
    /// configured.
    pub fn build_world(&self) -> Result<World> {
        let mut ps = self.soil_particles()?;
        ps.append(self.static_particles()?);
        let mut blocks = self.make_blocks()?;
        for b in &mut blocks {
            b.held = self.hold_blocks;
        }
        let mut world = World::new(self.world_setup()?, ps, blocks)?;
        world.damping = self.controls.damping_coefficient;
        world.time = -self.controls.damping_phase_duration;
        if self.contact_audit {
            world.audit = Some(Vec::new());
        }
        Ok(world)
    }
}

/// `σyy = −γ (H(x) − y)`, `σxx = σzz = K₀ σyy`, projected onto the yield
/// surface where the at-rest state is not admissible.
pub fn geostatic_stress(ps: &mut ParticleSet, region: &Polygon, material: &MaterialParams) {
    let k0 = material.k0();
    for i in 0..ps.len() {
        if ps.kind[i] != ParticleKind::Soil {
            continue;
        }
        let p = ps.position[i];
        let top = region.top_at(p.x).unwrap_or(p.y);
        let syy = -material.unit_weight * (top - p.y).max(0.0);
        let mut s = StressState::new(k0 * syy, syy, k0 * syy, 0.0);
        return_to_surface(&mut s, material);
        ps.stress[i] = s;
    }
}
