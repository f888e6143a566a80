//! Kick-drift-kick leapfrog building blocks.

use crate::Vec2;

/// `v += a · dt`
pub fn kick(velocity: &mut [Vec2], acceleration: &[Vec2], dt: f64) {
    for (v, a) in velocity.iter_mut().zip(acceleration) {
        *v += a * dt;
    }
}

/// `x += v · dt`
pub fn drift(position: &mut [Vec2], velocity: &[Vec2], dt: f64) {
    for (x, v) in position.iter_mut().zip(velocity) {
        *x += v * dt;
    }
}

/// Integrates a small system with a position/velocity dependent
/// acceleration. Used for integrator studies.
pub fn integrate<F>(x: &mut [Vec2], v: &mut [Vec2], dt: f64, steps: usize, mut accel: F)
where
    F: FnMut(&[Vec2], &[Vec2], &mut [Vec2]),
{
    let mut a = vec![Vec2::zeros(); x.len()];
    accel(x, v, &mut a);
    for _ in 0..steps {
        kick(v, &a, 0.5 * dt);
        drift(x, v, dt);
        accel(x, v, &mut a);
        kick(v, &a, 0.5 * dt);
    }
}
