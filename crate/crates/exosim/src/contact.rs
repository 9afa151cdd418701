//! Tri-directional spring-damper between the finger and the index ring.
//!
//! The element acts in a local frame fixed to the exo ring part: local x
//! slides along the finger axis (radial from the gear axis), local z is the
//! lateral/movement direction (tangential), local y is vertical and carries
//! zero displacement in the planar model. Damping acts on the relative
//! velocity expressed in this rotating frame, taken as the true time
//! derivative of the local displacement.

use crate::error::{Error, Result};
use crate::model::RingStates;
use crate::vec2::Vec2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactElement {
    pub k_x: f64,
    pub k_y: f64,
    pub k_z: f64,
    pub c_x: f64,
    pub c_y: f64,
    pub c_z: f64,
    pub x0: f64,
    pub y0: f64,
    pub z0: f64,
}

impl Default for ContactElement {
    fn default() -> Self {
        // Lateral stiffness is 20x the sliding stiffness.
        ContactElement {
            k_x: 500.0,
            k_y: 10000.0,
            k_z: 10000.0,
            c_x: 80.0,
            c_y: 200.0,
            c_z: 200.0,
            x0: 0.0,
            y0: 0.0,
            z0: 0.0,
        }
    }
}

impl ContactElement {
    pub fn validate(&self, errors: &mut Vec<String>) {
        for (name, v) in [
            ("contact.k_x", self.k_x),
            ("contact.k_y", self.k_y),
            ("contact.k_z", self.k_z),
            ("contact.c_x", self.c_x),
            ("contact.c_y", self.c_y),
            ("contact.c_z", self.c_z),
        ] {
            if !(v >= 0.0) {
                errors.push(format!("{name} must be >= 0 (got {v})"));
            }
        }
    }
}

/// Force on the exo-side point for a given local displacement and velocity.
/// The force on the finger-side point is the exact negation.
pub fn contact_force(
    element: &ContactElement,
    displacement: [f64; 3],
    velocity: [f64; 3],
) -> Result<[f64; 3]> {
    if displacement.iter().chain(velocity.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "non-finite displacement or velocity passed to contact_force".into(),
        ));
    }
    let [x, y, z] = displacement;
    let [vx, vy, vz] = velocity;
    Ok([
        element.k_x * (x - element.x0) + element.c_x * vx,
        element.k_y * (y - element.y0) + element.c_y * vy,
        element.k_z * (z - element.z0) + element.c_z * vz,
    ])
}

/// Moment of an in-plane force about the vertical axis through `origin`.
pub fn ring_torque(force: Vec2, point: Vec2, origin: Vec2) -> f64 {
    (point - origin).cross(force)
}

/// Planar evaluation of the element between the two ring points.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlanarContact {
    /// Displacement (finger minus exo) in the ring-local frame.
    pub disp_local: Vec2,
    /// True time derivative of the local displacement.
    pub vel_local: Vec2,
    /// Force on the exo-side point, local frame (x sliding, z lateral).
    pub force_local: Vec2,
    /// Same force in world coordinates.
    pub force_world: Vec2,
}

impl PlanarContact {
    /// Spring part of the local force (used by the energy ledger).
    pub fn spring_force_local(&self, element: &ContactElement) -> Vec2 {
        Vec2::new(
            element.k_x * (self.disp_local.x - element.x0),
            element.k_z * (self.disp_local.z - element.z0),
        )
    }

    /// Elastic energy stored in the element.
    pub fn potential_energy(&self, element: &ContactElement) -> f64 {
        let dx = self.disp_local.x - element.x0;
        let dz = self.disp_local.z - element.z0;
        0.5 * (element.k_x * dx * dx + element.k_z * dz * dz)
    }

    /// Damper dissipation rate (always >= 0).
    pub fn dissipation_rate(&self, element: &ContactElement) -> f64 {
        element.c_x * self.vel_local.x * self.vel_local.x
            + element.c_z * self.vel_local.z * self.vel_local.z
    }
}

/// Evaluate the element for the current ring kinematics. `theta` orients the
/// local frame; the local velocity includes the frame rotation term
/// `-theta_dot * J * d` so it is the exact derivative of the local
/// displacement.
pub fn evaluate_planar(
    element: &ContactElement,
    rings: &RingStates,
    theta: f64,
    theta_dot: f64,
) -> Result<PlanarContact> {
    let d_world = rings.separation();
    let v_world = rings.relative_velocity();
    let d_local = d_world.rotated(-theta);
    let v_local = (v_world - d_world.perp() * theta_dot).rotated(-theta);

    let f = contact_force(
        element,
        [d_local.x, 0.0, d_local.z],
        [v_local.x, 0.0, v_local.z],
    )?;
    let force_local = Vec2::new(f[0], f[2]);
    Ok(PlanarContact {
        disp_local: d_local,
        vel_local: v_local,
        force_local,
        force_world: force_local.rotated(theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ring_attachment_states, ExoAssembly};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn zero_displacement_zero_force() {
        let e = ContactElement::default();
        let f = contact_force(&e, [0.0; 3], [0.0; 3]).unwrap();
        assert_eq!(f, [0.0; 3]);
    }

    #[test]
    fn table_constants_arithmetic() {
        let e = ContactElement::default();
        let f = contact_force(&e, [0.01, 0.0, 0.0], [0.0; 3]).unwrap();
        assert_relative_eq!(f[0], 5.0, max_relative = 1e-12);

        let f = contact_force(&e, [0.0, 0.0, 0.001], [0.0, 0.0, 0.01]).unwrap();
        assert_relative_eq!(f[2], 12.0, max_relative = 1e-12);
    }

    #[test]
    fn non_finite_input_rejected() {
        let e = ContactElement::default();
        assert!(contact_force(&e, [f64::NAN, 0.0, 0.0], [0.0; 3]).is_err());
        assert!(contact_force(&e, [0.0; 3], [0.0, f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn ring_torque_cases() {
        let o = Vec2::ZERO;
        assert_eq!(ring_torque(Vec2::ZERO, Vec2::new(0.1, 0.0), o), 0.0);
        assert_relative_eq!(
            ring_torque(Vec2::new(0.0, 1.0), Vec2::new(0.1, 0.0), o),
            0.1,
            max_relative = 1e-12
        );
        assert_eq!(ring_torque(Vec2::new(1.0, 0.0), Vec2::new(0.1, 0.0), o), 0.0);
    }

    #[test]
    fn local_velocity_is_derivative_of_local_displacement() {
        let a = ExoAssembly::default();
        let e = ContactElement::default();
        let h = 1e-7;
        let theta = |t: f64| 0.15 * (4.0 * t).sin();
        let theta_dot = |t: f64| 0.6 * (4.0 * t).cos();
        let phi = |t: f64| 0.3 * (2.5 * t).sin();
        let phi_dot = |t: f64| 0.75 * (2.5 * t).cos();
        for i in 0..20 {
            let t = 0.05 + 0.07 * i as f64;
            let rings = ring_attachment_states(&a, theta(t), theta_dot(t), phi(t), phi_dot(t));
            let c = evaluate_planar(&e, &rings, theta(t), theta_dot(t)).unwrap();
            let at = |tt: f64| {
                let r = ring_attachment_states(&a, theta(tt), 0.0, phi(tt), 0.0);
                r.separation().rotated(-theta(tt))
            };
            let fd = (at(t + h) - at(t - h)) * (1.0 / (2.0 * h));
            assert_abs_diff_eq!(c.vel_local.x, fd.x, epsilon = 1e-5);
            assert_abs_diff_eq!(c.vel_local.z, fd.z, epsilon = 1e-5);
        }
    }

    proptest! {
        #[test]
        fn linearity_and_odd_symmetry(
            d in prop::array::uniform3(-0.05f64..0.05),
            v in prop::array::uniform3(-1.0f64..1.0),
            a in -3.0f64..3.0,
        ) {
            let e = ContactElement::default();
            let f = contact_force(&e, d, v).unwrap();
            let scaled = contact_force(
                &e,
                [a * d[0], a * d[1], a * d[2]],
                [a * v[0], a * v[1], a * v[2]],
            ).unwrap();
            for i in 0..3 {
                prop_assert!((scaled[i] - a * f[i]).abs() < 1e-9);
            }
            let negated = contact_force(
                &e,
                [-d[0], -d[1], -d[2]],
                [-v[0], -v[1], -v[2]],
            ).unwrap();
            for i in 0..3 {
                prop_assert!((negated[i] + f[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn axes_decoupled(axis in 0usize..3, d in -0.05f64..0.05, v in -1.0f64..1.0) {
            let e = ContactElement::default();
            let mut disp = [0.0; 3];
            let mut vel = [0.0; 3];
            disp[axis] = d;
            vel[axis] = v;
            let f = contact_force(&e, disp, vel).unwrap();
            for i in 0..3 {
                if i != axis {
                    prop_assert_eq!(f[i], 0.0);
                }
            }
        }

        #[test]
        fn damper_is_passive(v in prop::array::uniform3(-2.0f64..2.0)) {
            let e = ContactElement::default();
            let f = contact_force(&e, [0.0; 3], v).unwrap();
            // Velocity-proportional term opposes motion per axis.
            prop_assert!(f[0] * v[0] >= 0.0);
            prop_assert!(f[1] * v[1] >= 0.0);
            prop_assert!(f[2] * v[2] >= 0.0);
        }
    }
}
