//! Drucker–Prager elasto-plasticity with non-associated flow and the Jaumann
//! objective stress rate, evaluated pointwise for one soil particle.
//!
//! Plane strain: the strain rate has no out-of-plane component, but `σzz`
//! is carried because it enters `I1` and `J2`. Compression is negative.

use crate::error::{Error, Result};

/// Below this multiple of `G`, `√J2` is treated as zero and the deviatoric
/// plastic terms are dropped.
pub const SQRT_J2_FLOOR: f64 = 1e-12;

/// Admissible yield overshoot after an update, relative to `max(k_c, G)`.
pub const YIELD_TOLERANCE: f64 = 1e-6;

/// A state with `f` above `-PLASTIC_GATE * max(k_c, G)` is treated as lying on
/// the yield surface.
pub const PLASTIC_GATE: f64 = 1e-10;

/// Drucker–Prager constants `(α, k_c)` for plane strain from Coulomb `c`, `φ`.
pub fn dp_constants(cohesion: f64, friction_angle: f64) -> Result<(f64, f64)> {
    if !(cohesion.is_finite() && cohesion >= 0.0) {
        return Err(Error::Parameter(format!(
            "cohesion must be non-negative, got {cohesion}"
        )));
    }
    if !(friction_angle.is_finite()
        && (0.0..std::f64::consts::FRAC_PI_2).contains(&friction_angle))
    {
        return Err(Error::Parameter(format!(
            "friction angle must lie in [0, π/2), got {friction_angle}"
        )));
    }
    let t = friction_angle.tan();
    let root = (9.0 + 12.0 * t * t).sqrt();
    Ok((t / root, 3.0 * cohesion / root))
}

/// Elastic and Drucker–Prager constants of the soil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    pub cohesion: f64,
    pub friction_angle: f64,
    pub dilatancy_angle: f64,
    /// Total unit weight γ_s (N/m³).
    pub unit_weight: f64,
    pub shear_modulus: f64,
    pub bulk_modulus: f64,
    pub alpha_phi: f64,
    pub k_c: f64,
    pub alpha_psi: f64,
}

impl MaterialParams {
    pub fn new(
        young_modulus: f64,
        poisson_ratio: f64,
        cohesion: f64,
        friction_angle: f64,
        dilatancy_angle: f64,
        unit_weight: f64,
    ) -> Result<Self> {
        if !(young_modulus.is_finite() && young_modulus > 0.0) {
            return Err(Error::Parameter(format!(
                "Young's modulus must be positive, got {young_modulus}"
            )));
        }
        if !(poisson_ratio.is_finite() && (0.0..0.5).contains(&poisson_ratio)) {
            return Err(Error::Parameter(format!(
                "Poisson's ratio must lie in [0, 0.5), got {poisson_ratio}"
            )));
        }
        if !(dilatancy_angle.is_finite()
            && dilatancy_angle >= 0.0
            && dilatancy_angle <= friction_angle)
        {
            return Err(Error::Parameter(format!(
                "dilatancy angle must lie in [0, φ], got {dilatancy_angle}"
            )));
        }
        if !(unit_weight.is_finite() && unit_weight > 0.0) {
            return Err(Error::Parameter(format!(
                "unit weight must be positive, got {unit_weight}"
            )));
        }
        let (alpha_phi, k_c) = dp_constants(cohesion, friction_angle)?;
        let (alpha_psi, _) = dp_constants(0.0, dilatancy_angle)?;
        Ok(Self {
            young_modulus,
            poisson_ratio,
            cohesion,
            friction_angle,
            dilatancy_angle,
            unit_weight,
            shear_modulus: young_modulus / (2.0 * (1.0 + poisson_ratio)),
            bulk_modulus: young_modulus / (3.0 * (1.0 - 2.0 * poisson_ratio)),
            alpha_phi,
            k_c,
            alpha_psi,
        })
    }

    /// Mass density `γ_s / g`.
    pub fn reference_density(&self, gravity: f64) -> f64 {
        self.unit_weight / gravity
    }

    /// P-wave modulus `K + 4G/3`.
    pub fn constrained_modulus(&self) -> f64 {
        self.bulk_modulus + 4.0 * self.shear_modulus / 3.0
    }

    /// At-rest earth pressure coefficient of the elastic model, `ν / (1 - ν)`.
    pub fn k0(&self) -> f64 {
        self.poisson_ratio / (1.0 - self.poisson_ratio)
    }

    fn yield_scale(&self) -> f64 {
        self.k_c.max(self.shear_modulus)
    }

    /// Upper bound on `f` after a completed update.
    pub fn yield_tolerance(&self) -> f64 {
        YIELD_TOLERANCE * self.yield_scale()
    }
}

/// Plane-strain Cauchy stress plus accumulated plastic strain.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StressState {
    pub sxx: f64,
    pub syy: f64,
    pub szz: f64,
    pub sxy: f64,
    pub eps_p_acc: f64,
}

/// Stress invariants and the deviator `[sxx, syy, szz, sxy]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants {
    pub i1: f64,
    pub j2: f64,
    pub deviator: [f64; 4],
}

impl StressState {
    pub fn new(sxx: f64, syy: f64, szz: f64, sxy: f64) -> Self {
        Self {
            sxx,
            syy,
            szz,
            sxy,
            eps_p_acc: 0.0,
        }
    }

    pub fn hydrostatic(p: f64) -> Self {
        Self::new(p, p, p, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.sxx.is_finite()
            && self.syy.is_finite()
            && self.szz.is_finite()
            && self.sxy.is_finite()
            && self.eps_p_acc.is_finite()
    }

    pub fn invariants(&self) -> Invariants {
        invariants_of(self)
    }

    /// Principal stresses of the in-plane 2x2 block with the rotation angle
    /// of the first principal direction.
    pub fn principal_in_plane(&self) -> (f64, f64, f64) {
        let mean = 0.5 * (self.sxx + self.syy);
        let half_diff = 0.5 * (self.sxx - self.syy);
        let radius = half_diff.hypot(self.sxy);
        let angle = 0.5 * self.sxy.atan2(half_diff);
        (mean + radius, mean - radius, angle)
    }
}

pub fn invariants_of(s: &StressState) -> Invariants {
    let i1 = s.sxx + s.syy + s.szz;
    let p = i1 / 3.0;
    let dev = [s.sxx - p, s.syy - p, s.szz - p, s.sxy];
    let j2 = 0.5 * (dev[0] * dev[0] + dev[1] * dev[1] + dev[2] * dev[2]) + dev[3] * dev[3];
    Invariants {
        i1,
        j2,
        deviator: dev,
    }
}

/// `f = α_φ I1 + √J2 − k_c`.
pub fn yield_value(s: &StressState, m: &MaterialParams) -> f64 {
    let inv = invariants_of(s);
    m.alpha_phi * inv.i1 + inv.j2.sqrt() - m.k_c
}

/// Velocity-gradient derived rates at one particle.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateInput {
    /// In-plane strain rate `[ε̇xx, ε̇yy, ε̇xy]`; `ε̇zz = 0`.
    pub strain: [f64; 3],
    /// Spin `ω̇xy = ½(∂u̇x/∂y − ∂u̇y/∂x)`.
    pub spin: f64,
}

impl RateInput {
    pub fn new(strain: [f64; 3], spin: f64) -> Self {
        Self { strain, spin }
    }

    /// From the velocity gradient `L[α][β] = ∂u̇α/∂xβ`.
    pub fn from_velocity_gradient(l: [[f64; 2]; 2]) -> Self {
        Self {
            strain: [l[0][0], l[1][1], 0.5 * (l[0][1] + l[1][0])],
            spin: 0.5 * (l[0][1] - l[1][0]),
        }
    }

    #[inline]
    pub fn volumetric(&self) -> f64 {
        self.strain[0] + self.strain[1]
    }
}

/// `dσ/dt` as `[xx, yy, zz, xy]`.
pub type StressRate = [f64; 4];

/// `s : ε̇` with the out-of-plane strain rate equal to zero.
#[inline]
fn deviator_dot_strain(dev: &[f64; 4], r: &RateInput) -> f64 {
    dev[0] * r.strain[0] + dev[1] * r.strain[1] + 2.0 * dev[3] * r.strain[2]
}

/// Rate of the plastic multiplier from the consistency condition, clamped
/// at zero so that unloading stays elastic.
pub fn plastic_multiplier(s: &StressState, r: &RateInput, m: &MaterialParams) -> f64 {
    let inv = invariants_of(s);
    unclamped_multiplier(&inv, r, m).max(0.0)
}

fn unclamped_multiplier(inv: &Invariants, r: &RateInput, m: &MaterialParams) -> f64 {
    let g = m.shear_modulus;
    let k = m.bulk_modulus;
    let sqrt_j2 = inv.j2.sqrt();
    let mut numerator = 3.0 * m.alpha_phi * k * r.volumetric();
    if sqrt_j2 > SQRT_J2_FLOOR * g {
        numerator += g / sqrt_j2 * deviator_dot_strain(&inv.deviator, r);
    }
    numerator / (9.0 * m.alpha_phi * k * m.alpha_psi + g)
}

/// Elastic-plastic rate without the rotation terms.
fn material_rate(inv: &Invariants, r: &RateInput, m: &MaterialParams, lambda: f64) -> StressRate {
    let g = m.shear_modulus;
    let k = m.bulk_modulus;
    let ev = r.volumetric();
    let third = ev / 3.0;
    // deviatoric strain rate, plane strain (ε̇zz = 0)
    let e = [r.strain[0] - third, r.strain[1] - third, -third, r.strain[2]];
    let mut rate = [
        2.0 * g * e[0] + k * ev,
        2.0 * g * e[1] + k * ev,
        2.0 * g * e[2] + k * ev,
        2.0 * g * e[3],
    ];
    if lambda > 0.0 {
        let vol = 3.0 * k * m.alpha_psi;
        let sqrt_j2 = inv.j2.sqrt();
        let dev_scale = if sqrt_j2 > SQRT_J2_FLOOR * g {
            g / sqrt_j2
        } else {
            0.0
        };
        for (i, slot) in rate.iter_mut().enumerate() {
            let iso = if i < 3 { vol } else { 0.0 };
            *slot -= lambda * (iso + dev_scale * inv.deviator[i]);
        }
    }
    rate
}

/// Full objective stress rate including the Jaumann spin terms.
pub fn stress_rate(
    s: &StressState,
    r: &RateInput,
    m: &MaterialParams,
    plastic: bool,
) -> StressRate {
    let inv = invariants_of(s);
    let lambda = if plastic {
        plastic_multiplier(s, r, m)
    } else {
        0.0
    };
    let mut rate = material_rate(&inv, r, m, lambda);
    let w = r.spin;
    rate[0] += 2.0 * s.sxy * w;
    rate[1] -= 2.0 * s.sxy * w;
    rate[3] += (s.syy - s.sxx) * w;
    rate
}

/// True when the state is on (or numerically above) the yield surface.
pub fn on_yield_surface(s: &StressState, m: &MaterialParams) -> bool {
    yield_value(s, m) >= -PLASTIC_GATE * m.yield_scale()
}

/// Advances the stress by `dt`.
///
/// The spin is applied as an exact rotation of the previous stress, which
/// is the Jaumann rate to first order and keeps invariants unchanged under
/// rigid rotation. The material part is an explicit step; the result is
/// then pulled back onto the yield surface if it overshoots.
pub fn update_stress(
    s: &StressState,
    r: &RateInput,
    m: &MaterialParams,
    dt: f64,
) -> Result<StressState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let inv = invariants_of(s);
    let lambda = if on_yield_surface(s, m) {
        unclamped_multiplier(&inv, r, m).max(0.0)
    } else {
        0.0
    };
    let rate = material_rate(&inv, r, m, lambda);

    let (sin, cos) = (r.spin * dt).sin_cos();
    let (cc, ss, cs) = (cos * cos, sin * sin, cos * sin);
    let rotated_xx = cc * s.sxx + 2.0 * cs * s.sxy + ss * s.syy;
    let rotated_yy = ss * s.sxx - 2.0 * cs * s.sxy + cc * s.syy;
    let rotated_xy = cs * (s.syy - s.sxx) + (cc - ss) * s.sxy;

    let mut next = StressState {
        sxx: rotated_xx + dt * rate[0],
        syy: rotated_yy + dt * rate[1],
        szz: s.szz + dt * rate[2],
        sxy: rotated_xy + dt * rate[3],
        eps_p_acc: s.eps_p_acc + lambda * dt,
    };
    return_to_surface(&mut next, m);
    if !next.is_finite() {
        return Err(Error::InvalidInput("stress update produced a non-finite state".into()));
    }
    Ok(next)
}

/// Drift correction: radial scaling of the deviator at fixed `I1`, or a
/// return to the apex in the tension zone. Returns whether the state moved.
pub fn return_to_surface(s: &mut StressState, m: &MaterialParams) -> bool {
    let inv = invariants_of(s);
    let sqrt_j2 = inv.j2.sqrt();
    let f = m.alpha_phi * inv.i1 + sqrt_j2 - m.k_c;
    if f <= 0.0 {
        return false;
    }
    let allowed = m.k_c - m.alpha_phi * inv.i1;
    let p = inv.i1 / 3.0;
    if allowed >= 0.0 && sqrt_j2 > 0.0 {
        let scale = allowed / sqrt_j2;
        let d = inv.deviator;
        s.sxx = p + d[0] * scale;
        s.syy = p + d[1] * scale;
        s.szz = p + d[2] * scale;
        s.sxy = d[3] * scale;
    } else {
        let apex = if m.alpha_phi > 0.0 {
            m.k_c / (3.0 * m.alpha_phi)
        } else {
            p
        };
        s.sxx = apex;
        s.syy = apex;
        s.szz = apex;
        s.sxy = 0.0;
    }
    true
}
