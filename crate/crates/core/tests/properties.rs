use proptest::prelude::*;
use segwall_core::constitutive::{update_stress, yield_value};
use segwall_core::contact::{
    normal_force, pair_force, pair_params, BodyClass, ContactMaterial, ContactSide, ContactState,
    FrictionMap,
};
use segwall_core::grid::{Bounds, NeighborGrid};
use segwall_core::{KernelSpec, MaterialParams, RateInput, StressState, Vec2};

fn friction() -> FrictionMap {
    FrictionMap {
        block_block: 0.62,
        block_base: 0.60,
        block_soil: 0.56,
    }
}

fn soil_block_params() -> segwall_core::ContactParams {
    let soil = ContactSide {
        class: BodyClass::Soil,
        material: ContactMaterial::from_young_poisson(1.5e6, 0.3),
        mass: Some(0.0147),
        smoothing: 0.003,
    };
    let block = ContactSide {
        class: BodyClass::Block,
        material: ContactMaterial::from_young_poisson(69e9, 0.33),
        mass: Some(0.23),
        smoothing: 0.0015,
    };
    pair_params(&soil, &block, &friction()).unwrap()
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..0.05f64, 0.0..0.03f64), 0..200)
}

proptest! {
    #[test]
    fn grid_pairs_match_brute_force(pts in points(), radius in 0.001..0.008f64) {
        let pos: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let mut grid = NeighborGrid::new(radius).unwrap();
        grid.rebuild(&pos, &Bounds::new(Vec2::zeros(), Vec2::new(0.05, 0.03))).unwrap();
        let mut pairs = Vec::new();
        grid.pairs(radius, &mut pairs);
        let mut got: Vec<(u32, u32)> = pairs.iter().map(|p| (p.a, p.b)).collect();
        got.sort_unstable();
        let mut want = Vec::new();
        for a in 0..pos.len() {
            for b in a + 1..pos.len() {
                if (pos[a] - pos[b]).norm() < radius {
                    want.push((a as u32, b as u32));
                }
            }
        }
        prop_assert_eq!(got, want);
        for p in &pairs {
            let d = pos[p.a as usize] - pos[p.b as usize];
            prop_assert!((p.dx - d).norm() < 1e-15);
        }
    }

    #[test]
    fn grid_neighbors_are_symmetric(pts in points()) {
        let pos: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let radius = 0.006;
        let mut grid = NeighborGrid::new(radius).unwrap();
        grid.rebuild(&pos, &Bounds::new(Vec2::zeros(), Vec2::new(0.05, 0.03))).unwrap();
        for a in 0..pos.len() {
            for nb in grid.neighbors(&pos, a, radius) {
                let back = grid.neighbors(&pos, nb.index, radius);
                prop_assert!(back.iter().any(|m| m.index == a));
            }
        }
    }

    #[test]
    fn kernel_gradient_is_odd_and_matches_differences(
        r in 0.02..1.98f64,
        phi in 0.0..std::f64::consts::TAU,
    ) {
        let k = KernelSpec::new(0.003).unwrap();
        let x = Vec2::new(phi.cos(), phi.sin()) * (r * k.h());
        let g = k.gradient(x).unwrap();
        prop_assert!((g + k.gradient(-x).unwrap()).norm() <= 1e-12 * g.norm());
        let e = 1e-6 * k.h();
        let fd = (k.value((x * (1.0 + e / x.norm())).norm()) - k.value((x * (1.0 - e / x.norm())).norm()))
            / (2.0 * e);
        prop_assert!((g.dot(&x.normalize()) - fd).abs() <= 1e-6 * fd.abs().max(1e-3));
        prop_assert!(g.dot(&x) <= 0.0);
    }

    #[test]
    fn kernel_vanishes_outside_support(r in 2.0..10.0f64) {
        let k = KernelSpec::new(0.003).unwrap();
        prop_assert_eq!(k.value(r * k.h()), 0.0);
        prop_assert!(k.value(0.999 * r.min(2.0) * k.h()) >= 0.0);
    }

    #[test]
    fn coulomb_bound_holds_along_any_history(
        steps in prop::collection::vec((0.0..2e-4f64, -0.5..0.5f64, -0.5..0.5f64), 1..60),
    ) {
        let params = soil_block_params();
        let mut state = ContactState::default();
        let n = Vec2::new(0.0, 1.0);
        for (dn, vn, vs) in steps {
            let f = pair_force(&mut state, dn, n, Vec2::new(vs, vn), &params, 1e-5);
            prop_assert!(f.shear.abs() <= params.friction * f.normal.abs() + 1e-12);
            prop_assert!(f.normal >= 0.0);
        }
    }

    #[test]
    fn normal_force_is_continuous_at_onset(scale in 1e-12..1e-9f64) {
        let params = soil_block_params();
        let f = normal_force(scale, 0.0, &params);
        let k = params.normal_stiffness();
        prop_assert!((f - k * scale.powf(1.5)).abs() <= 1e-9 * f.max(1e-30));
        prop_assert!(f <= k * 1e-9f64.powf(1.5));
    }

    #[test]
    fn stress_updates_stay_admissible(
        sxx in -3e4..0.0f64,
        syy in -3e4..0.0f64,
        sxy in -5e3..5e3f64,
        rate in prop::array::uniform4(-50.0..50.0f64),
    ) {
        let m = MaterialParams::new(1.5e6, 0.3, 0.0, 19.8f64.to_radians(), 0.0, 23e3).unwrap();
        let s = StressState::new(sxx, syy, 0.5 * (sxx + syy), sxy);
        let r = RateInput::new([rate[0], rate[1], rate[2]], rate[3]);
        let next = update_stress(&s, &r, &m, 1e-5).unwrap();
        prop_assert!(yield_value(&next, &m) <= m.yield_tolerance());
        prop_assert!(next.eps_p_acc >= s.eps_p_acc);
    }
}

/// A particle dropped onto a fixed contact partner never rebounds with more
/// energy than it arrived with.
#[test]
fn contact_cycle_dissipates() {
    let params = soil_block_params();
    let m = params.effective_mass;
    let reach = params.effective_smoothing;
    let mut state = ContactState::default();
    let (mut y, mut v) = (reach, -0.3f64);
    let e0 = 0.5 * m * v * v;
    let dt = 1e-7;
    let mut f_prev = 0.0;
    for _ in 0..200_000 {
        v += 0.5 * dt * f_prev / m;
        y += dt * v;
        let dn = reach - y;
        let f = if dn > 0.0 {
            pair_force(&mut state, dn, Vec2::new(0.0, 1.0), Vec2::new(0.0, v), &params, dt).normal
        } else {
            0.0
        };
        v += 0.5 * dt * f / m;
        f_prev = f;
        if y > reach && v > 0.0 {
            break;
        }
    }
    assert!(v > 0.0, "particle should rebound");
    let e1 = 0.5 * m * v * v;
    assert!(e1 <= e0 * (1.0 + 1e-8), "{e1} > {e0}");
}
