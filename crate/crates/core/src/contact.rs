//! Spring–dashpot soft contact with a Coulomb cap.
//!
//! Contacts only exist where at least one side is a rigid-body boundary
//! particle; soil–soil interaction goes through the SPH stress sum. A pair
//! is active while the particles overlap, `d < (h_a + h_i) / 2`, and then
//! exerts
//!
//! * a normal force `K δn^{3/2} − c_n v_n` along the center line, never
//!   attractive, with `K = E_eff √h_eff / 3` and `c_n = 2 √(m K √δn)`;
//! * a shear force `−k_s δs − c_s v_s` with `k_s = 4 G_eq √(h_eq δn)`,
//!   `c_s = 2 √(m k_s)`, capped at `μ |f_n|`.
//!
//! `δs` is the tangential displacement integrated over the life of the
//! contact and is kept per pair in a [`ContactBook`].

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::Vec2;

/// Distance below which two contact particles are considered coincident.
pub const COINCIDENT_DISTANCE: f64 = 1e-9;

/// Body category of one contact participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BodyClass {
    Soil,
    Block,
    /// Fixed boundary (base, lateral wall, stopper).
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairClass {
    BlockBlock,
    BlockBase,
    BlockSoil,
}

impl PairClass {
    pub fn of(a: BodyClass, b: BodyClass) -> Option<Self> {
        use BodyClass::*;
        match (a, b) {
            (Block, Block) => Some(PairClass::BlockBlock),
            (Block, Static) | (Static, Block) => Some(PairClass::BlockBase),
            (Block, Soil) | (Soil, Block) => Some(PairClass::BlockSoil),
            _ => None,
        }
    }
}

/// Friction coefficient per pair class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionMap {
    pub block_block: f64,
    pub block_base: f64,
    pub block_soil: f64,
}

impl FrictionMap {
    pub fn get(&self, class: PairClass) -> f64 {
        match class {
            PairClass::BlockBlock => self.block_block,
            PairClass::BlockBase => self.block_base,
            PairClass::BlockSoil => self.block_soil,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [
            ("block_block", self.block_block),
            ("block_base", self.block_base),
            ("block_soil", self.block_soil),
        ] {
            if !(mu.is_finite() && mu >= 0.0) {
                return Err(Error::Parameter(format!(
                    "friction coefficient {name} must be non-negative, got {mu}"
                )));
            }
        }
        Ok(())
    }
}

/// Elastic constants of one body class as seen by the contact model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactMaterial {
    pub young_modulus: f64,
    pub shear_modulus: f64,
}

impl ContactMaterial {
    pub fn from_young_poisson(young_modulus: f64, poisson_ratio: f64) -> Self {
        Self {
            young_modulus,
            shear_modulus: young_modulus / (2.0 * (1.0 + poisson_ratio)),
        }
    }
}

/// One contact participant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSide {
    pub class: BodyClass,
    pub material: ContactMaterial,
    /// `None` for immovable bodies.
    pub mass: Option<f64>,
    pub smoothing: f64,
}

/// Parameters of one contacting pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    pub effective_young: f64,
    pub effective_shear: f64,
    pub effective_mass: f64,
    /// `h_eff = h_eq = (h_a + h_i) / 2`
    pub effective_smoothing: f64,
    pub friction: f64,
}

fn harmonic(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

/// Pair parameters: harmonic combinations of moduli and masses, mean
/// smoothing length and the class friction coefficient.
pub fn pair_params(a: &ContactSide, i: &ContactSide, friction: &FrictionMap) -> Result<ContactParams> {
    let class = PairClass::of(a.class, i.class).ok_or_else(|| {
        Error::Parameter(format!(
            "no contact model for pair {:?}-{:?}",
            a.class, i.class
        ))
    })?;
    let effective_mass = match (a.mass, i.mass) {
        (Some(ma), Some(mi)) => harmonic(ma, mi),
        (Some(m), None) | (None, Some(m)) => m,
        (None, None) => {
            return Err(Error::Parameter(
                "contact between two immovable bodies".into(),
            ))
        }
    };
    Ok(ContactParams {
        effective_young: harmonic(a.material.young_modulus, i.material.young_modulus),
        effective_shear: harmonic(a.material.shear_modulus, i.material.shear_modulus),
        effective_mass,
        effective_smoothing: 0.5 * (a.smoothing + i.smoothing),
        friction: friction.get(class),
    })
}

/// Overlap `δn = (h_a + h_i)/2 − d` if the pair is in contact.
pub fn detect(xa: Vec2, xi: Vec2, ha: f64, hi: f64) -> Result<Option<f64>> {
    let d = (xa - xi).norm();
    overlap(d, ha, hi)
}

fn overlap(d: f64, ha: f64, hi: f64) -> Result<Option<f64>> {
    if !d.is_finite() {
        return Err(Error::InvalidInput("contact distance is not finite".into()));
    }
    if d < COINCIDENT_DISTANCE {
        return Err(Error::InvalidInput(format!(
            "contact particles coincide (d = {d:e} m)"
        )));
    }
    let reach = 0.5 * (ha + hi);
    Ok((d < reach).then_some(reach - d))
}

impl ContactParams {
    /// `K = E_eff √h_eff / 3`
    pub fn normal_stiffness(&self) -> f64 {
        self.effective_young * self.effective_smoothing.sqrt() / 3.0
    }

    /// `k_s = 4 G_eq √(h_eq δn)`
    pub fn shear_stiffness(&self, delta_n: f64) -> f64 {
        4.0 * self.effective_shear * (self.effective_smoothing * delta_n).sqrt()
    }
}

/// Magnitude of the normal force, `v_n` positive when separating.
pub fn normal_force(delta_n: f64, v_n: f64, params: &ContactParams) -> f64 {
    if delta_n <= 0.0 {
        return 0.0;
    }
    let k = params.normal_stiffness();
    let k_lin = k * delta_n.sqrt();
    let c_n = 2.0 * (params.effective_mass * k_lin).sqrt();
    (k * delta_n * delta_n.sqrt() - c_n * v_n).max(0.0)
}

/// Tangential history of one pair.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactState {
    /// Signed tangential displacement along the current tangent.
    pub delta_s: f64,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearOutcome {
    /// Signed force along the tangent.
    pub force: f64,
    pub capped: bool,
}

/// Integrates `δs` by `v_s dt` and returns the Coulomb-limited shear force.
pub fn shear_force(
    state: &mut ContactState,
    delta_n: f64,
    v_s: f64,
    normal_force: f64,
    params: &ContactParams,
    dt: f64,
) -> ShearOutcome {
    state.active = true;
    state.delta_s += v_s * dt;
    let k_s = params.shear_stiffness(delta_n);
    let c_s = 2.0 * (params.effective_mass * k_s).sqrt();
    let trial = -k_s * state.delta_s - c_s * v_s;
    let limit = params.friction * normal_force.abs();
    if trial.abs() <= limit {
        return ShearOutcome {
            force: trial,
            capped: false,
        };
    }
    let force = limit.copysign(trial);
    // spring held at the sliding value
    state.delta_s = if k_s > 0.0 { -force / k_s } else { 0.0 };
    ShearOutcome {
        force,
        capped: true,
    }
}

/// Resolved force of one active pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairForce {
    /// Force on particle `a`; particle `i` receives the negative.
    pub on_a: Vec2,
    pub delta_n: f64,
    pub normal: f64,
    pub shear: f64,
    pub capped: bool,
}

/// Full contact evaluation for a pair already known to overlap by `delta_n`.
/// `n` is the unit vector from `i` to `a`, `v_rel = v_a − v_i`.
pub fn pair_force(
    state: &mut ContactState,
    delta_n: f64,
    n: Vec2,
    v_rel: Vec2,
    params: &ContactParams,
    dt: f64,
) -> PairForce {
    let t = Vec2::new(-n.y, n.x);
    let fn_mag = normal_force(delta_n, v_rel.dot(&n), params);
    let shear = shear_force(state, delta_n, v_rel.dot(&t), fn_mag, params, dt);
    PairForce {
        on_a: n * fn_mag + t * shear.force,
        delta_n,
        normal: fn_mag,
        shear: shear.force,
        capped: shear.capped,
    }
}

/// Stable identity of a contact particle across steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContactKey {
    Particle(u32),
    Block { block: u32, index: u32 },
}

/// Per-pair tangential histories. Pairs not touched during a step are
/// dropped when the step is committed, which resets their `δs`.
#[derive(Debug, Clone, Default)]
pub struct ContactBook {
    current: HashMap<(ContactKey, ContactKey), ContactState>,
    next: HashMap<(ContactKey, ContactKey), ContactState>,
}

impl ContactBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn get(&self, a: ContactKey, i: ContactKey) -> Option<&ContactState> {
        self.current.get(&(a, i))
    }

    /// Evaluates an active pair, carrying over its previous history.
    /// Keys must be passed in a fixed orientation (`a < i`).
    pub fn evaluate(
        &mut self,
        key: (ContactKey, ContactKey),
        delta_n: f64,
        n: Vec2,
        v_rel: Vec2,
        params: &ContactParams,
        dt: f64,
    ) -> PairForce {
        debug_assert!(key.0 < key.1);
        let mut state = self.current.get(&key).copied().unwrap_or_default();
        let force = pair_force(&mut state, delta_n, n, v_rel, params, dt);
        self.next.insert(key, state);
        force
    }

    /// Promotes this step's pairs; everything else is forgotten.
    pub fn commit(&mut self) {
        std::mem::swap(&mut self.current, &mut self.next);
        self.next.clear();
    }

    pub fn clear(&mut self) {
        self.current.clear();
        self.next.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn friction() -> FrictionMap {
        FrictionMap {
            block_block: 0.62,
            block_base: 0.60,
            block_soil: 0.56,
        }
    }

    fn block_side(mass: f64) -> ContactSide {
        ContactSide {
            class: BodyClass::Block,
            material: ContactMaterial::from_young_poisson(69e9, 0.33),
            mass: Some(mass),
            smoothing: 0.0015,
        }
    }

    #[test]
    fn detect_boundaries() {
        let (ha, hi) = (0.003, 0.0015);
        let reach = 0.5 * (ha + hi);
        let xi = Vec2::zeros();
        assert_eq!(detect(Vec2::new(reach, 0.0), xi, ha, hi).unwrap(), None);
        let d = detect(Vec2::new(0.4 * (ha + hi), 0.0), xi, ha, hi).unwrap().unwrap();
        assert_relative_eq!(d, 0.1 * (ha + hi), max_relative = 1e-12);
        assert_eq!(detect(Vec2::new(1.0, 0.0), xi, ha, hi).unwrap(), None);
        assert!(detect(Vec2::new(1e-10, 0.0), xi, ha, hi).is_err());
    }

    #[test]
    fn params_for_identical_materials() {
        let p = pair_params(&block_side(2.0), &block_side(2.0), &friction()).unwrap();
        assert_relative_eq!(p.effective_young, 69e9 / 2.0);
        assert_relative_eq!(p.effective_mass, 1.0);
        assert_eq!(p.friction, 0.62);
        assert_relative_eq!(p.effective_smoothing, 0.0015);
    }

    #[test]
    fn static_partner_uses_mobile_mass() {
        let base = ContactSide {
            class: BodyClass::Static,
            material: ContactMaterial::from_young_poisson(69e9, 0.33),
            mass: None,
            smoothing: 0.0015,
        };
        let p = pair_params(&block_side(0.7), &base, &friction()).unwrap();
        assert_eq!(p.effective_mass, 0.7);
        assert_eq!(p.friction, 0.60);
    }

    #[test]
    fn soil_pairs_need_a_block() {
        let soil = ContactSide {
            class: BodyClass::Soil,
            material: ContactMaterial::from_young_poisson(1.5e6, 0.3),
            mass: Some(0.01),
            smoothing: 0.003,
        };
        assert!(pair_params(&soil, &soil, &friction()).is_err());
        assert_eq!(
            pair_params(&soil, &block_side(1.0), &friction()).unwrap().friction,
            0.56
        );
    }

    #[test]
    fn normal_force_onset_and_exponent() {
        let p = pair_params(&block_side(1.0), &block_side(1.0), &friction()).unwrap();
        assert_eq!(normal_force(0.0, 0.0, &p), 0.0);
        let f1 = normal_force(1e-6, 0.0, &p);
        let f2 = normal_force(2e-6, 0.0, &p);
        assert_relative_eq!(f2 / f1, 2f64.powf(1.5), max_relative = 1e-12);
        // fast separation would pull; clamped to zero instead
        assert_eq!(normal_force(1e-6, 100.0, &p), 0.0);
    }

    #[test]
    fn zero_friction_means_zero_shear() {
        let mut p = pair_params(&block_side(1.0), &block_side(1.0), &friction()).unwrap();
        p.friction = 0.0;
        let mut st = ContactState::default();
        let out = shear_force(&mut st, 1e-6, 0.3, 10.0, &p, 1e-5);
        assert_eq!(out.force, 0.0);
    }

    #[test]
    fn shear_below_cap_is_unchanged() {
        let p = pair_params(&block_side(1.0), &block_side(1.0), &friction()).unwrap();
        let mut st = ContactState::default();
        let (dn, vs, dt) = (1e-6, 1e-4, 1e-5);
        let out = shear_force(&mut st, dn, vs, 1e6, &p, dt);
        let k = p.shear_stiffness(dn);
        let c = 2.0 * (p.effective_mass * k).sqrt();
        assert!(!out.capped);
        assert_relative_eq!(out.force, -k * vs * dt - c * vs, max_relative = 1e-12);
    }

    #[test]
    fn shear_cap_holds_spring_at_sliding_value() {
        let p = pair_params(&block_side(1.0), &block_side(1.0), &friction()).unwrap();
        let mut st = ContactState::default();
        let out = shear_force(&mut st, 1e-6, 1.0, 1.0, &p, 1e-3);
        assert!(out.capped);
        assert_relative_eq!(out.force, -0.62, max_relative = 1e-12);
        assert_relative_eq!(-p.shear_stiffness(1e-6) * st.delta_s, -0.62, max_relative = 1e-12);
    }

    #[test]
    fn book_forgets_released_pairs() {
        let p = pair_params(&block_side(1.0), &block_side(1.0), &friction()).unwrap();
        let key = (
            ContactKey::Block { block: 0, index: 1 },
            ContactKey::Block { block: 1, index: 3 },
        );
        let mut book = ContactBook::new();
        let n = Vec2::new(0.0, 1.0);
        book.evaluate(key, 1e-6, n, Vec2::new(1e-3, 0.0), &p, 1e-5);
        book.commit();
        let ds = book.get(key.0, key.1).unwrap().delta_s;
        assert!(ds != 0.0);
        book.commit();
        assert!(book.get(key.0, key.1).is_none());
    }
}
