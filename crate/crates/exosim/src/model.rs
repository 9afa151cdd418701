//! Rigid-body assembly of the exoskeleton and the simplified finger.
//!
//! The device has one true rotational degree of freedom: three equal gears in
//! series couple the motor, the index part and the thumb part. The exposed
//! state `theta` follows the index-part convention (positive closes the index
//! part, same angular direction as finger flexion `phi`). Motion is confined
//! to the horizontal plane; gravity is orthogonal to it and omitted.

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Mass and moment-of-inertia of one exoskeleton part. MOIs are about the
/// part's rotation axis (x fore-aft, y vertical, z lateral), in SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyParams {
    pub mass: f64,
    pub moi_xx: f64,
    pub moi_yy: f64,
    pub moi_zz: f64,
}

impl BodyParams {
    pub fn validate(&self, label: &str, errors: &mut Vec<String>) {
        if !(self.mass > 0.0) {
            errors.push(format!("{label}.mass must be > 0 (got {})", self.mass));
        }
        for (name, v) in [
            ("moi_xx", self.moi_xx),
            ("moi_yy", self.moi_yy),
            ("moi_zz", self.moi_zz),
        ] {
            if !(v >= 0.0) {
                errors.push(format!("{label}.{name} must be >= 0 (got {v})"));
            }
        }
    }
}

const KG_CM2: f64 = 1e-4; // 1 kg*cm^2 in kg*m^2

/// Measured base-part properties.
pub fn default_base() -> BodyParams {
    BodyParams {
        mass: 1.22e-1,
        moi_xx: 6.62e-1 * KG_CM2,
        moi_yy: 8.39e-1 * KG_CM2,
        moi_zz: 6.94e-1 * KG_CM2,
    }
}

/// Measured index-part properties.
pub fn default_index_part() -> BodyParams {
    BodyParams {
        mass: 2.95e-2,
        moi_xx: 6.11e-2 * KG_CM2,
        moi_yy: 5.56e-1 * KG_CM2,
        moi_zz: 5.58e-1 * KG_CM2,
    }
}

/// Measured thumb-part properties.
pub fn default_thumb_part() -> BodyParams {
    BodyParams {
        mass: 6.40e-3,
        moi_xx: 9.20e-3 * KG_CM2,
        moi_yy: 6.51e-2 * KG_CM2,
        moi_zz: 6.43e-2 * KG_CM2,
    }
}

/// How the thumb side of the device is modeled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThumbMode {
    /// Thumb link inertia lumped into the single DOF; no thumb contact.
    Lumped,
    /// Passive thumb joint coupled to the thumb part by a torsional
    /// spring-damper derived from the ring contact constants.
    SpringCoupled,
}

/// Planar ring geometry. The MCP joint sits at the origin; the index-gear
/// axis lies on the extended finger line at (-axis_offset, 0).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryConfig {
    /// MCP axis to index ring center (m).
    pub finger_ring_radius: f64,
    /// MCP axis to index-gear axis (m), behind the MCP.
    pub axis_offset: f64,
    /// Index-gear axis to ring center (m). Must equal
    /// `finger_ring_radius + axis_offset` so the two ring points coincide at
    /// initial assembly.
    pub exo_ring_radius: f64,
    pub thumb_mode: ThumbMode,
}

impl GeometryConfig {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.finger_ring_radius > 0.0) {
            errors.push(format!(
                "geometry.finger_ring_radius must be > 0 (got {})",
                self.finger_ring_radius
            ));
        }
        if !(self.axis_offset > 0.0) {
            errors.push(format!(
                "geometry.axis_offset must be > 0 (got {})",
                self.axis_offset
            ));
        }
        let expected = self.finger_ring_radius + self.axis_offset;
        if !((self.exo_ring_radius - expected).abs() <= 1e-9) {
            errors.push(format!(
                "geometry.exo_ring_radius must equal finger_ring_radius + axis_offset = {expected} (got {})",
                self.exo_ring_radius
            ));
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            finger_ring_radius: 0.060,
            axis_offset: 0.048,
            exo_ring_radius: 0.108,
            thumb_mode: ThumbMode::Lumped,
        }
    }
}

/// The full assembly: exoskeleton parts, gear train, finger link and the
/// passive damping of the drive.
#[derive(Clone, Debug, PartialEq)]
pub struct ExoAssembly {
    pub base: BodyParams,
    pub index_part: BodyParams,
    pub thumb_part: BodyParams,
    /// Reflected rotor + gear inertia (kg*m^2).
    pub motor_gear_inertia: f64,
    pub geometry: GeometryConfig,
    /// Velocity-dependent damping of the drive in passive mode (N*m*s/rad).
    pub passive_damping: f64,
    /// Index finger inertia about MCP (kg*m^2).
    pub finger_inertia: f64,
    pub finger_mass: f64,
    /// Human thumb link inertia (kg*m^2). Lumped into the DOF in `Lumped`
    /// mode, otherwise the inertia of the passive thumb joint.
    pub thumb_link_inertia: f64,
}

impl Default for ExoAssembly {
    fn default() -> Self {
        ExoAssembly {
            base: default_base(),
            index_part: default_index_part(),
            thumb_part: default_thumb_part(),
            motor_gear_inertia: 1.0e-5,
            geometry: GeometryConfig::default(),
            passive_damping: 0.3,
            finger_inertia: 1.0e-4,
            finger_mass: 0.04,
            thumb_link_inertia: 5.0e-6,
        }
    }
}

impl ExoAssembly {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.base.validate("assembly.base", &mut errors);
        self.index_part.validate("assembly.index_part", &mut errors);
        self.thumb_part.validate("assembly.thumb_part", &mut errors);
        self.geometry.validate(&mut errors);
        for (name, v) in [
            ("assembly.motor_gear_inertia", self.motor_gear_inertia),
            ("assembly.finger_inertia", self.finger_inertia),
            ("assembly.finger_mass", self.finger_mass),
            ("assembly.thumb_link_inertia", self.thumb_link_inertia),
        ] {
            if !(v > 0.0) {
                errors.push(format!("{name} must be > 0 (got {v})"));
            }
        }
        if !(self.passive_damping >= 0.0) {
            errors.push(format!(
                "assembly.passive_damping must be >= 0 (got {})",
                self.passive_damping
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors.join("; ")))
        }
    }

    /// Inertia reflected onto the single DOF. The three gears have unit
    /// ratio, so part inertias add directly; in lumped mode the human thumb
    /// link rides along as well.
    pub fn effective_inertia(&self) -> f64 {
        let mut i = self.motor_gear_inertia + self.index_part.moi_yy + self.thumb_part.moi_yy;
        if self.geometry.thumb_mode == ThumbMode::Lumped {
            i += self.thumb_link_inertia;
        }
        i
    }

    pub fn total_part_mass(&self) -> f64 {
        self.base.mass + self.index_part.mass + self.thumb_part.mass
    }

    /// Index-gear axis position (MCP at the origin).
    pub fn gear_axis(&self) -> Vec2 {
        Vec2::new(-self.geometry.axis_offset, 0.0)
    }

    /// Ring center at initial assembly, where the finger-side and exo-side
    /// points coincide.
    pub fn initial_ring_center(&self) -> Vec2 {
        Vec2::new(self.geometry.finger_ring_radius, 0.0)
    }

    /// Small-angle ratio d(theta)/d(phi) for the collinear-axis geometry.
    pub fn kinematic_ratio(&self) -> f64 {
        self.geometry.finger_ring_radius / self.geometry.exo_ring_radius
    }
}

/// Small-angle ratio d(theta)/d(phi) = L_f / L_e.
pub fn kinematic_ratio(assembly: &ExoAssembly) -> f64 {
    assembly.kinematic_ratio()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileShape {
    SmoothCosine,
    Triangular,
}

/// Prescribed MCP closing-opening motion, symmetric about mid-cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionProfile {
    /// Peak flexion angle (rad).
    pub amplitude: f64,
    /// Cycle duration (s).
    pub cycle_duration: f64,
    pub shape: ProfileShape,
    pub cycles: u32,
}

impl Default for MotionProfile {
    fn default() -> Self {
        MotionProfile {
            amplitude: 25.0_f64.to_radians(),
            cycle_duration: 1.5,
            shape: ProfileShape::SmoothCosine,
            cycles: 2,
        }
    }
}

impl MotionProfile {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.amplitude > 0.0) {
            errors.push(format!("profile.amplitude must be > 0 (got {})", self.amplitude));
        }
        if !(self.cycle_duration > 0.0) {
            errors.push(format!(
                "profile.cycle_duration must be > 0 (got {})",
                self.cycle_duration
            ));
        }
        if self.cycles == 0 {
            errors.push("profile.cycles must be >= 1".to_string());
        }
    }
}

/// Evaluate the prescribed motion at time `t` (wrapped into the cycle),
/// returning (phi, phi_dot, phi_ddot).
pub fn prescribed_motion(profile: &MotionProfile, t: f64) -> (f64, f64, f64) {
    let period = profile.cycle_duration;
    let amp = profile.amplitude;
    let tau = t.rem_euclid(period);
    match profile.shape {
        ProfileShape::SmoothCosine => {
            let w = 2.0 * std::f64::consts::PI / period;
            let phi = 0.5 * amp * (1.0 - (w * tau).cos());
            let dphi = 0.5 * amp * w * (w * tau).sin();
            let ddphi = 0.5 * amp * w * w * (w * tau).cos();
            (phi, dphi, ddphi)
        }
        ProfileShape::Triangular => {
            let half = 0.5 * period;
            let rate = amp / half;
            if tau < half {
                (rate * tau, rate, 0.0)
            } else {
                (amp - rate * (tau - half), -rate, 0.0)
            }
        }
    }
}

/// Position and velocity of the paired ring points in the horizontal plane.
#[derive(Clone, Copy, Debug, Default)]
pub struct RingStates {
    pub finger_pos: Vec2,
    pub finger_vel: Vec2,
    pub exo_pos: Vec2,
    pub exo_vel: Vec2,
}

impl RingStates {
    pub fn separation(&self) -> Vec2 {
        self.finger_pos - self.exo_pos
    }

    pub fn relative_velocity(&self) -> Vec2 {
        self.finger_vel - self.exo_vel
    }
}

/// Finger-side and exo-side index-ring point states.
///
/// The finger point is `(L_f, 0)` rotated about the MCP origin by `phi`; the
/// exo point is `(L_e, 0)` rotated about the gear axis by `theta`. Both
/// angles are positive in the closing direction, so the points coincide at
/// `theta = phi = 0`.
pub fn ring_attachment_states(
    assembly: &ExoAssembly,
    theta: f64,
    theta_dot: f64,
    phi: f64,
    phi_dot: f64,
) -> RingStates {
    let lf = assembly.geometry.finger_ring_radius;
    let le = assembly.geometry.exo_ring_radius;
    let axis = assembly.gear_axis();

    let finger_arm = Vec2::new(lf, 0.0).rotated(phi);
    let exo_arm = Vec2::new(le, 0.0).rotated(theta);

    RingStates {
        finger_pos: finger_arm,
        finger_vel: finger_arm.perp() * phi_dot,
        exo_pos: axis + exo_arm,
        exo_vel: exo_arm.perp() * theta_dot,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn table_defaults_convert_units() {
        let a = ExoAssembly::default();
        assert_relative_eq!(a.index_part.moi_yy, 5.56e-5, max_relative = 1e-12);
        assert_relative_eq!(a.base.moi_xx, 6.62e-5, max_relative = 1e-12);
        assert_relative_eq!(a.thumb_part.moi_yy, 6.51e-6, max_relative = 1e-12);
    }

    #[test]
    fn total_part_mass_matches_reported_weight() {
        // Part masses are specified to 4 decimals; the reported total is
        // rounded to 3.
        let a = ExoAssembly::default();
        assert_abs_diff_eq!(a.total_part_mass(), 0.158, epsilon = 5e-4);
    }

    #[test]
    fn unit_round_trip_reproduces_table() {
        // Build from the kg*cm^2 values, read back in kg*cm^2.
        let a = ExoAssembly::default();
        let back = [
            a.base.moi_xx / 1e-4,
            a.base.moi_yy / 1e-4,
            a.base.moi_zz / 1e-4,
            a.index_part.moi_xx / 1e-4,
            a.index_part.moi_yy / 1e-4,
            a.index_part.moi_zz / 1e-4,
            a.thumb_part.moi_xx / 1e-4,
            a.thumb_part.moi_yy / 1e-4,
            a.thumb_part.moi_zz / 1e-4,
        ];
        let table = [
            6.62e-1, 8.39e-1, 6.94e-1, 6.11e-2, 5.56e-1, 5.58e-1, 9.20e-3, 6.51e-2, 6.43e-2,
        ];
        for (b, t) in back.iter().zip(table.iter()) {
            assert_relative_eq!(b, t, max_relative = 1e-12);
        }
    }

    #[test]
    fn negative_mass_rejected() {
        let mut a = ExoAssembly::default();
        a.index_part.mass = -1.0;
        assert!(a.validate().is_err());
    }

    #[test]
    fn inconsistent_ring_radius_rejected() {
        let mut a = ExoAssembly::default();
        a.geometry.exo_ring_radius = 0.110;
        let err = a.validate().unwrap_err();
        assert!(err.to_string().contains("exo_ring_radius"));
    }

    #[test]
    fn kinematic_ratio_default_geometry() {
        let a = ExoAssembly::default();
        assert_relative_eq!(kinematic_ratio(&a), 0.060 / 0.108, max_relative = 1e-12);
        // 25 degree finger sweep maps to just under 14 degrees of motor sweep.
        let motor_deg = 25.0 * kinematic_ratio(&a);
        assert_abs_diff_eq!(motor_deg, 13.9, epsilon = 0.05);
    }

    #[test]
    fn prescribed_motion_smooth_cosine() {
        let p = MotionProfile::default();
        let (phi0, dphi0, ddphi0) = prescribed_motion(&p, 0.0);
        assert_abs_diff_eq!(phi0, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dphi0, 0.0, epsilon = 1e-15);
        assert!(ddphi0 > 0.0);

        let (phi_half, _, _) = prescribed_motion(&p, 0.75);
        assert_relative_eq!(phi_half, 0.4363, max_relative = 1e-3);

        // Peak closing velocity at T/4: A*pi/T.
        let (_, dphi_q, _) = prescribed_motion(&p, 0.375);
        assert_relative_eq!(dphi_q, p.amplitude * std::f64::consts::PI / 1.5, max_relative = 1e-12);
        assert_relative_eq!(dphi_q, 0.9137, max_relative = 2e-4);
    }

    #[test]
    fn prescribed_motion_derivatives_match_finite_differences() {
        let p = MotionProfile::default();
        let h = 1e-6;
        for i in 0..40 {
            let t = 0.03 + 0.036 * i as f64;
            let (_, dphi, ddphi) = prescribed_motion(&p, t);
            let (pm, dm, _) = prescribed_motion(&p, t - h);
            let (pp, dp, _) = prescribed_motion(&p, t + h);
            assert_abs_diff_eq!(dphi, (pp - pm) / (2.0 * h), epsilon = 1e-6);
            assert_abs_diff_eq!(ddphi, (dp - dm) / (2.0 * h), epsilon = 1e-5);
        }
    }

    #[test]
    fn triangular_profile_symmetric() {
        let p = MotionProfile {
            shape: ProfileShape::Triangular,
            ..MotionProfile::default()
        };
        let (phi, dphi, _) = prescribed_motion(&p, 0.375);
        assert_relative_eq!(phi, p.amplitude / 2.0, max_relative = 1e-12);
        assert!(dphi > 0.0);
        let (phi2, dphi2, _) = prescribed_motion(&p, 1.125);
        assert_relative_eq!(phi2, p.amplitude / 2.0, max_relative = 1e-12);
        assert_relative_eq!(dphi2, -dphi, max_relative = 1e-12);
    }

    #[test]
    fn rings_coincide_at_rest() {
        let a = ExoAssembly::default();
        let s = ring_attachment_states(&a, 0.0, 0.0, 0.0, 0.0);
        assert_abs_diff_eq!(s.separation().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn small_angle_separation() {
        let a = ExoAssembly::default();
        let s = ring_attachment_states(&a, 0.0, 0.0, 0.1, 0.0);
        let lf = a.geometry.finger_ring_radius;
        assert_relative_eq!(s.finger_pos.x, lf * 0.1_f64.cos(), max_relative = 1e-12);
        assert_relative_eq!(s.finger_pos.z, lf * 0.1_f64.sin(), max_relative = 1e-12);
        assert_relative_eq!(s.separation().norm(), lf * 0.1, max_relative = 2e-2);
    }

    #[test]
    fn coincidence_angle_matches_kinematic_ratio() {
        // Find theta minimizing the ring separation at full flexion by a
        // golden-section scan, independent of any closed form.
        let a = ExoAssembly::default();
        let phi = 0.4363;
        let sep = |theta: f64| {
            ring_attachment_states(&a, theta, 0.0, phi, 0.0)
                .separation()
                .norm()
        };
        let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
        let g = 0.5 * (5.0_f64.sqrt() - 1.0);
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if sep(m1) < sep(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let theta_star = 0.5 * (lo + hi);
        assert_abs_diff_eq!(theta_star, 0.2424, epsilon = 5e-4);
        assert_abs_diff_eq!(theta_star, phi * kinematic_ratio(&a), epsilon = 2e-3);
        assert_abs_diff_eq!(theta_star.to_degrees(), 13.9, epsilon = 0.1);
    }

    #[test]
    fn ring_velocities_match_finite_differences() {
        let a = ExoAssembly::default();
        let h = 1e-6;
        // Smooth trajectories for both angles.
        let theta = |t: f64| 0.2 * (3.0 * t).sin();
        let theta_dot = |t: f64| 0.6 * (3.0 * t).cos();
        let phi = |t: f64| 0.4 * (2.0 * t).sin();
        let phi_dot = |t: f64| 0.8 * (2.0 * t).cos();
        for i in 0..25 {
            let t = 0.1 + 0.05 * i as f64;
            let s = ring_attachment_states(&a, theta(t), theta_dot(t), phi(t), phi_dot(t));
            let sm = ring_attachment_states(&a, theta(t - h), 0.0, phi(t - h), 0.0);
            let sp = ring_attachment_states(&a, theta(t + h), 0.0, phi(t + h), 0.0);
            let fd_f = (sp.finger_pos - sm.finger_pos) * (1.0 / (2.0 * h));
            let fd_e = (sp.exo_pos - sm.exo_pos) * (1.0 / (2.0 * h));
            assert_abs_diff_eq!(s.finger_vel.x, fd_f.x, epsilon = 1e-6);
            assert_abs_diff_eq!(s.finger_vel.z, fd_f.z, epsilon = 1e-6);
            assert_abs_diff_eq!(s.exo_vel.x, fd_e.x, epsilon = 1e-6);
            assert_abs_diff_eq!(s.exo_vel.z, fd_e.z, epsilon = 1e-6);
        }
    }

    #[test]
    fn effective_inertia_sums_gear_train() {
        let a = ExoAssembly::default();
        let expected = 1.0e-5 + 5.56e-5 + 6.51e-6 + 5.0e-6;
        assert_relative_eq!(a.effective_inertia(), expected, max_relative = 1e-12);
        let mut b = a.clone();
        b.geometry.thumb_mode = ThumbMode::SpringCoupled;
        assert_relative_eq!(
            b.effective_inertia(),
            expected - 5.0e-6,
            max_relative = 1e-12
        );
    }
}
