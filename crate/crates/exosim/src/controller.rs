//! Admittance control loop and passive mode.
//!
//! In admittance mode the measured finger-on-ring force drives a virtual
//! end-effector mass in the horizontal task plane. Inverse kinematics maps
//! the mass position to a desired motor angle, which a PD law tracks at every
//! physics step. The mass integration and IK run at the controller rate
//! (155 Hz hardware loop by default) with zero-order hold in between.

use crate::error::{Error, Result};
use crate::model::ExoAssembly;
use crate::vec2::Vec2;

pub const DEFAULT_CONTROLLER_PERIOD: f64 = 1.0 / 155.0;
pub const IK_AXIS_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Admittance,
    Passive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmittanceParams {
    pub mode: ControlMode,
    /// Virtual end-effector mass (kg).
    pub virtual_mass: f64,
    /// Virtual damping on the end-effector (N*s/m).
    pub virtual_damping: f64,
    /// Proportional gain (N*m/rad).
    pub kp: f64,
    /// Derivative gain (N*m*s/rad).
    pub kd: f64,
    /// Controller period (s). A period <= the physics step means the
    /// controller updates every step.
    pub period: f64,
    /// Symmetric motor torque saturation (N*m).
    pub torque_limit: f64,
    /// Symmetric clamp on the desired motor angle (rad).
    pub theta_limit: f64,
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        AdmittanceParams {
            mode: ControlMode::Passive,
            virtual_mass: 0.01,
            virtual_damping: 0.01,
            kp: 1.0,
            kd: 0.0,
            period: DEFAULT_CONTROLLER_PERIOD,
            torque_limit: 3.0,
            theta_limit: 0.35,
        }
    }
}

impl AdmittanceParams {
    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.virtual_mass > 0.0) {
            errors.push(format!("controller.m must be > 0 (got {})", self.virtual_mass));
        }
        if !(self.virtual_damping >= 0.0) {
            errors.push(format!("controller.c must be >= 0 (got {})", self.virtual_damping));
        }
        if !(self.kp >= 0.0) {
            errors.push(format!("controller.kp must be >= 0 (got {})", self.kp));
        }
        if !(self.kd >= 0.0) {
            errors.push(format!("controller.kd must be >= 0 (got {})", self.kd));
        }
        if !(self.period > 0.0) {
            errors.push(format!("controller.period must be > 0 (got {})", self.period));
        }
        if !(self.torque_limit > 0.0) {
            errors.push(format!(
                "controller.torque_limit must be > 0 (got {})",
                self.torque_limit
            ));
        }
        if !(self.theta_limit > 0.0) {
            errors.push(format!(
                "controller.theta_limit must be > 0 (got {})",
                self.theta_limit
            ));
        }
    }
}

/// State of the virtual end-effector mass in the task plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VirtualMassState {
    pub pos: Vec2,
    pub vel: Vec2,
}

/// One semi-implicit Euler step of `m*a = f - c*v` per axis.
pub fn virtual_mass_step(
    state: VirtualMassState,
    force: Vec2,
    params: &AdmittanceParams,
    dt: f64,
) -> Result<VirtualMassState> {
    if params.virtual_mass <= 0.0 {
        return Err(Error::Parameter("virtual mass must be > 0".into()));
    }
    let accel = (force - state.vel * params.virtual_damping) * (1.0 / params.virtual_mass);
    let vel = state.vel + accel * dt;
    let pos = state.pos + vel * dt;
    Ok(VirtualMassState { pos, vel })
}

/// Desired motor angle from the virtual mass position: the four-quadrant
/// angle of the axis-to-position ray relative to the initial axis-to-ring
/// ray, clamped to the joint limits.
pub fn ik_to_motor_angle(
    pos: Vec2,
    assembly: &ExoAssembly,
    theta_limit: f64,
) -> Result<f64> {
    let ray = pos - assembly.gear_axis();
    if ray.norm() < IK_AXIS_EPSILON {
        return Err(Error::IkSingularity { eps: IK_AXIS_EPSILON });
    }
    // The initial axis-to-ring ray points along +x.
    let theta = ray.z.atan2(ray.x);
    Ok(theta.clamp(-theta_limit, theta_limit))
}

/// Constrain the virtual mass to the workspace of the end-effector: the arc
/// of radius `exo_ring_radius` about the gear axis, within the joint limits.
/// The position snaps to the arc point at the (clamped) desired angle and
/// the velocity keeps only its tangential component; at a joint limit the
/// outward-running component is dropped so the integrator cannot wind up
/// while the clamp is active.
pub fn project_to_workspace(
    state: VirtualMassState,
    theta_d: f64,
    assembly: &ExoAssembly,
    theta_limit: f64,
) -> VirtualMassState {
    let axis = assembly.gear_axis();
    let radius = assembly.geometry.exo_ring_radius;
    let radial = Vec2::new(theta_d.cos(), theta_d.sin());
    let tangent = radial.perp();
    let mut v_t = state.vel.dot(tangent);
    if (theta_d >= theta_limit && v_t > 0.0) || (theta_d <= -theta_limit && v_t < 0.0) {
        v_t = 0.0;
    }
    VirtualMassState {
        pos: axis + radial * radius,
        vel: tangent * v_t,
    }
}

/// PD torque law with symmetric saturation.
pub fn pd_torque(theta_d: f64, theta: f64, theta_dot: f64, params: &AdmittanceParams) -> f64 {
    let tau = params.kp * (theta_d - theta) - params.kd * theta_dot;
    tau.clamp(-params.torque_limit, params.torque_limit)
}

/// Passive-mode torque: velocity-proportional damping only.
pub fn passive_torque(theta_dot: f64, c_passive: f64) -> f64 {
    -c_passive * theta_dot
}

/// Per-run controller state. The admittance loop updates on controller
/// period boundaries (expressed in whole physics steps); the PD law is
/// evaluated against the held desired angle every physics step.
#[derive(Clone, Debug)]
pub struct Controller {
    pub params: AdmittanceParams,
    pub virtual_mass_state: VirtualMassState,
    pub theta_d: f64,
    steps_per_tick: u64,
    tick_dt: f64,
    step_count: u64,
    /// IK singularity events where the last valid angle was held.
    pub ik_hold_events: u64,
}

impl Controller {
    pub fn new(params: AdmittanceParams, assembly: &ExoAssembly, physics_dt: f64) -> Self {
        let steps_per_tick = (params.period / physics_dt).round().max(1.0) as u64;
        Controller {
            params,
            virtual_mass_state: VirtualMassState {
                pos: assembly.initial_ring_center(),
                vel: Vec2::ZERO,
            },
            theta_d: 0.0,
            steps_per_tick,
            tick_dt: steps_per_tick as f64 * physics_dt,
            step_count: 0,
            ik_hold_events: 0,
        }
    }

    /// Compute the motor torque command for the current physics step.
    /// `measured_force` is the finger-on-ring contact force in world
    /// coordinates.
    pub fn tick(
        &mut self,
        measured_force: Vec2,
        theta: f64,
        theta_dot: f64,
        assembly: &ExoAssembly,
    ) -> Result<f64> {
        match self.params.mode {
            ControlMode::Passive => Ok(passive_torque(theta_dot, assembly.passive_damping)),
            ControlMode::Admittance => {
                if self.step_count % self.steps_per_tick == 0 {
                    // The mass is constrained to the end-effector workspace
                    // arc, so only the tangential component of the measured
                    // force does work on it; the radial component is carried
                    // by the constraint (d'Alembert).
                    let ray = self.virtual_mass_state.pos - assembly.gear_axis();
                    let force = if ray.norm() >= IK_AXIS_EPSILON {
                        let tangent = (ray * (1.0 / ray.norm())).perp();
                        tangent * measured_force.dot(tangent)
                    } else {
                        measured_force
                    };
                    self.virtual_mass_state = virtual_mass_step(
                        self.virtual_mass_state,
                        force,
                        &self.params,
                        self.tick_dt,
                    )?;
                    match ik_to_motor_angle(
                        self.virtual_mass_state.pos,
                        assembly,
                        self.params.theta_limit,
                    ) {
                        Ok(theta_d) => self.theta_d = theta_d,
                        // Hold the last valid desired angle through the
                        // singularity.
                        Err(Error::IkSingularity { .. }) => self.ik_hold_events += 1,
                        Err(e) => return Err(e),
                    }
                    // Project the mass back onto the end-effector workspace
                    // (the arc the ring center can reach). Force components
                    // the exo cannot respond to are absorbed by the
                    // constraint, and the joint-limit clamp gets anti-windup
                    // so the integrator cannot run away while saturated.
                    self.virtual_mass_state = project_to_workspace(
                        self.virtual_mass_state,
                        self.theta_d,
                        assembly,
                        self.params.theta_limit,
                    );
                }
                self.step_count += 1;
                Ok(pd_torque(self.theta_d, theta, theta_dot, &self.params))
            }
        }
    }
}
