//! Hybrid inverse/forward dynamics stepping.
//!
//! The finger joint tracks the prescribed motion (inverse dynamics side);
//! the exoskeleton DOF responds to motor torque and ring contact forces
//! (forward dynamics side). Integration is semi-implicit Euler at a fixed
//! step; torques proportional to the DOF velocity (contact damping, passive
//! drive damping, the thumb coupling damper) enter the velocity update
//! implicitly, since the lateral contact damper is far too stiff for an
//! explicit update at the default step.

use crate::contact::{evaluate_planar, ContactElement, PlanarContact};
use crate::controller::{AdmittanceParams, ControlMode, Controller};
use crate::error::{Error, Result};
use crate::model::{
    prescribed_motion, ring_attachment_states, ExoAssembly, MotionProfile, ThumbMode,
};
use crate::muscles::{solve_muscle_forces, Muscle, MuscleGroup, MuscleOptProblem};
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimParams {
    /// Physics step (s).
    pub dt: f64,
    /// Simulated time after the settle ramp (s); at least one cycle.
    pub duration: f64,
    /// Record every Nth step.
    pub stride: usize,
    /// Settle-in ramp (s) during which the profile amplitude scales smoothly
    /// from zero.
    pub settle_ramp: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 1e-4,
            duration: 1.5,
            stride: 10,
            settle_ramp: 1.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub assembly: ExoAssembly,
    pub profile: MotionProfile,
    pub contact: ContactElement,
    pub controller: AdmittanceParams,
    pub muscles: Vec<Muscle>,
    pub sim: SimParams,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            assembly: ExoAssembly::default(),
            profile: MotionProfile::default(),
            contact: ContactElement::default(),
            controller: AdmittanceParams::default(),
            muscles: crate::muscles::default_muscle_set(),
            sim: SimParams::default(),
        }
    }
}

impl Scenario {
    /// Validate the whole scenario, reporting every offending key at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if let Err(Error::Validation(msg)) = self.assembly.validate() {
            errors.push(msg);
        }
        self.profile.validate(&mut errors);
        self.contact.validate(&mut errors);
        self.controller.validate(&mut errors);
        for m in &self.muscles {
            m.validate(&mut errors);
        }
        if self.muscles.is_empty() {
            errors.push("muscles: at least one muscle required".into());
        }
        if !(self.sim.dt > 0.0) {
            errors.push(format!("sim.dt must be > 0 (got {})", self.sim.dt));
        }
        if self.sim.duration < self.profile.cycle_duration {
            errors.push(format!(
                "sim.duration must cover at least one cycle ({} s)",
                self.profile.cycle_duration
            ));
        }
        if self.sim.stride == 0 {
            errors.push("sim.stride must be >= 1".into());
        }
        if self.sim.settle_ramp < 0.0 {
            errors.push("sim.settle_ramp must be >= 0".into());
        }
        if self.controller.period < self.sim.dt * (1.0 - 1e-9) {
            errors.push(format!(
                "controller.period ({}) must be >= sim.dt ({})",
                self.controller.period, self.sim.dt
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors.join("; ")))
        }
    }
}

/// Time-indexed record of every simulated quantity. All series share one
/// sampling grid; contact force channels are in the ring-local frame
/// (z = movement direction, the "load cell Z force").
#[derive(Clone, Debug, Default)]
pub struct SimulationTrace {
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub theta_d: Vec<f64>,
    pub tau_motor: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_dot: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
    pub tau_mcp: Vec<f64>,
    pub residual_torque: Vec<f64>,
    pub vm_px: Vec<f64>,
    pub vm_pz: Vec<f64>,
    pub vm_vx: Vec<f64>,
    pub vm_vz: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_dot: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub potential: Vec<f64>,
    pub work_in: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub energy_residual: Vec<f64>,
    /// Per-muscle force series, indexed [muscle][sample].
    pub muscle_forces: Vec<Vec<f64>>,
    pub muscle_activations: Vec<Vec<f64>>,
    pub muscle_names: Vec<String>,
    pub muscle_groups: Vec<MuscleGroup>,
    pub dt: f64,
    pub stride: usize,
    pub cycle_duration: f64,
    pub settle_ramp: f64,
    pub unstable: bool,
    pub unstable_time: Option<f64>,
    pub passive_mode: bool,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Profile phase in [0, 1); closing is [0, 0.5).
    pub fn cycle_phase(&self, t: f64) -> f64 {
        (t / self.cycle_duration).fract()
    }

    /// Sample index range [start, end) of the last complete profile cycle.
    /// Metrics are computed there, clear of the settle-in transient.
    pub fn analysis_window(&self) -> (usize, usize) {
        if self.t.is_empty() {
            return (0, 0);
        }
        let t_last = *self.t.last().unwrap();
        let period = self.cycle_duration;
        // The final step lands one sample short of the nominal end time;
        // count a cycle as complete when it is covered up to that gap.
        let sample_dt = self.dt * self.stride as f64;
        let k = ((t_last + sample_dt) / period + 1e-9).floor().max(1.0);
        let end_time = k * period;
        let start_time = end_time - period;
        let start = self.t.partition_point(|&t| t < start_time - 1e-12);
        let end = self.t.partition_point(|&t| t < end_time - 1e-12);
        (start, end)
    }

    /// Write all channels as CSV with unit-tagged headers.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from(
            "t_s,theta_rad,theta_dot_rad_s,theta_d_rad,tau_motor_Nm,phi_rad,phi_dot_rad_s,\
             fx_N,fy_N,fz_N,tau_mcp_Nm,residual_torque_Nm,\
             vm_px_m,vm_pz_m,vm_vx_m_s,vm_vz_m_s,psi_rad,psi_dot_rad_s,\
             ke_J,pe_J,work_in_J,dissipation_J,energy_residual_J",
        );
        for name in &self.muscle_names {
            header.push_str(&format!(",f_{name}_N"));
        }
        for name in &self.muscle_names {
            header.push_str(&format!(",a_{name}"));
        }
        writeln!(w, "{header}")?;
        for k in 0..self.len() {
            let mut row = format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.t[k],
                self.theta[k],
                self.theta_dot[k],
                self.theta_d[k],
                self.tau_motor[k],
                self.phi[k],
                self.phi_dot[k],
                self.fx[k],
                self.fy[k],
                self.fz[k],
                self.tau_mcp[k],
                self.residual_torque[k],
                self.vm_px[k],
                self.vm_pz[k],
                self.vm_vx[k],
                self.vm_vz[k],
                self.psi[k],
                self.psi_dot[k],
                self.kinetic[k],
                self.potential[k],
                self.work_in[k],
                self.dissipation[k],
                self.energy_residual[k],
            );
            for m in &self.muscle_forces {
                row.push_str(&format!(",{}", m[k]));
            }
            for m in &self.muscle_activations {
                row.push_str(&format!(",{}", m[k]));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Net torque the muscles must supply at MCP: link inertia torque minus the
/// moment of the ring-on-finger contact force.
pub fn finger_inverse_dynamics(phi_ddot: f64, tau_ring: f64, finger_inertia: f64) -> f64 {
    finger_inertia * phi_ddot - tau_ring
}

/// One explicit semi-implicit Euler step of the exoskeleton DOF. Used
/// directly in tests; `simulate` folds velocity-proportional torques into an
/// implicit form of the same update.
pub fn exo_forward_step(
    tau_motor: f64,
    tau_contact: f64,
    i_eff: f64,
    theta: f64,
    theta_dot: f64,
    dt: f64,
) -> (f64, f64) {
    let theta_ddot = (tau_motor + tau_contact) / i_eff;
    let new_dot = theta_dot + dt * theta_ddot;
    (theta + dt * new_dot, new_dot)
}

/// Smoothstep amplitude ramp and its first two time derivatives.
fn ramp(t: f64, ramp_len: f64) -> (f64, f64, f64) {
    if ramp_len <= 0.0 || t >= ramp_len {
        return (1.0, 0.0, 0.0);
    }
    let u = t / ramp_len;
    let s = u * u * (3.0 - 2.0 * u);
    let ds = 6.0 * u * (1.0 - u) / ramp_len;
    let dds = (6.0 - 12.0 * u) / (ramp_len * ramp_len);
    (s, ds, dds)
}

/// Prescribed motion with the settle-in amplitude ramp applied.
fn ramped_motion(profile: &MotionProfile, ramp_len: f64, t: f64) -> (f64, f64, f64) {
    let (phi, dphi, ddphi) = prescribed_motion(profile, t);
    let (s, ds, dds) = ramp(t, ramp_len);
    (
        s * phi,
        ds * phi + s * dphi,
        dds * phi + 2.0 * ds * dphi + s * ddphi,
    )
}

struct ContactEval {
    contact: PlanarContact,
    /// Torque about the gear axis. Taken at the finger-side point so the
    /// anisotropic element stays energy-consistent under frame rotation (the
    /// two application points differ only by the element stretch).
    tau_exo: f64,
    /// Moment about MCP of the ring-on-finger force.
    tau_ring: f64,
}

fn eval_contact(
    assembly: &ExoAssembly,
    element: &ContactElement,
    theta: f64,
    theta_dot: f64,
    phi: f64,
    phi_dot: f64,
) -> Result<ContactEval> {
    let rings = ring_attachment_states(assembly, theta, theta_dot, phi, phi_dot);
    let contact = evaluate_planar(element, &rings, theta, theta_dot)?;
    let axis = assembly.gear_axis();
    let tau_exo = (rings.finger_pos - axis).cross(contact.force_world);
    let tau_ring = rings.finger_pos.cross(-contact.force_world);
    Ok(ContactEval {
        contact,
        tau_exo,
        tau_ring,
    })
}

const THETA_BLOWUP: f64 = 1e3;
const THETA_DOT_BLOWUP: f64 = 1e6;

/// Run a scenario to completion. Deterministic: an identical scenario
/// produces a bit-identical trace. A numerical blow-up does not error; the
/// trace is truncated and flagged `unstable`, which is itself a reportable
/// sweep outcome.
pub fn simulate(scenario: &Scenario) -> Result<SimulationTrace> {
    scenario.validate()?;
    let a = &scenario.assembly;
    let element = &scenario.contact;
    let sim = &scenario.sim;
    let dt = sim.dt;
    let i_eff = a.effective_inertia();
    let total_time = sim.settle_ramp + sim.duration;
    let n_steps = (total_time / dt).round() as usize;

    let spring_coupled = a.geometry.thumb_mode == ThumbMode::SpringCoupled;
    // Torsional thumb coupling derived from the lateral ring constants.
    let thumb_radius = a.geometry.exo_ring_radius;
    let kappa_t = element.k_z * thumb_radius * thumb_radius;
    let gamma_t = element.c_z * thumb_radius * thumb_radius;
    let i_thumb = a.thumb_link_inertia;

    let mut controller = Controller::new(scenario.controller, a, dt);
    let passive = scenario.controller.mode == ControlMode::Passive;

    let n_muscles = scenario.muscles.len();
    let mut trace = SimulationTrace {
        muscle_names: scenario.muscles.iter().map(|m| m.name.clone()).collect(),
        muscle_groups: scenario.muscles.iter().map(|m| m.group).collect(),
        muscle_forces: vec![Vec::new(); n_muscles],
        muscle_activations: vec![Vec::new(); n_muscles],
        dt,
        stride: sim.stride,
        cycle_duration: scenario.profile.cycle_duration,
        settle_ramp: sim.settle_ramp,
        passive_mode: passive,
        ..SimulationTrace::default()
    };

    let mut theta = 0.0f64;
    let mut theta_dot = 0.0f64;
    let mut psi = 0.0f64;
    let mut psi_dot = 0.0f64;
    let mut warm_forces: Option<Vec<f64>> = None;

    // Energy ledger accumulators (trapezoidal in time).
    let mut work_in = 0.0f64;
    let mut dissipation = 0.0f64;
    let mut prev_finger_power: Option<f64> = None;
    let mut prev_dissipation_rate: Option<f64> = None;
    let mut energy0: Option<f64> = None;

    for k in 0..n_steps {
        let t = k as f64 * dt;
        let (phi, phi_dot, phi_ddot) = ramped_motion(&scenario.profile, sim.settle_ramp, t);

        let eval = eval_contact(a, element, theta, theta_dot, phi, phi_dot)?;
        let tau_motor = controller.tick(eval.contact.force_world, theta, theta_dot, a)?;
        let tau_mcp = finger_inverse_dynamics(phi_ddot, eval.tau_ring, a.finger_inertia);

        // Energy bookkeeping at the current state.
        let mut ke = 0.5 * i_eff * theta_dot * theta_dot;
        let mut pe = eval.contact.potential_energy(element);
        if spring_coupled {
            ke += 0.5 * i_thumb * psi_dot * psi_dot;
            let twist = theta - psi;
            pe += 0.5 * kappa_t * twist * twist;
        }
        let rings = ring_attachment_states(a, theta, theta_dot, phi, phi_dot);
        let finger_power = eval.contact.force_world.dot(rings.finger_vel);
        let mut diss_rate = eval.contact.dissipation_rate(element);
        if spring_coupled {
            let dw = theta_dot - psi_dot;
            diss_rate += gamma_t * dw * dw;
        }
        let e0 = *energy0.get_or_insert(ke + pe);
        let residual = (ke + pe) - e0 - work_in + dissipation;

        if k % sim.stride == 0 {
            trace.t.push(t);
            trace.theta.push(theta);
            trace.theta_dot.push(theta_dot);
            trace.theta_d.push(if passive { 0.0 } else { controller.theta_d });
            trace.tau_motor.push(tau_motor);
            trace.phi.push(phi);
            trace.phi_dot.push(phi_dot);
            trace.fx.push(eval.contact.force_local.x);
            trace.fy.push(0.0);
            trace.fz.push(eval.contact.force_local.z);
            trace.tau_mcp.push(tau_mcp);
            trace.vm_px.push(controller.virtual_mass_state.pos.x);
            trace.vm_pz.push(controller.virtual_mass_state.pos.z);
            trace.vm_vx.push(controller.virtual_mass_state.vel.x);
            trace.vm_vz.push(controller.virtual_mass_state.vel.z);
            trace.psi.push(psi);
            trace.psi_dot.push(psi_dot);
            trace.kinetic.push(ke);
            trace.potential.push(pe);
            trace.work_in.push(work_in);
            trace.dissipation.push(dissipation);
            trace.energy_residual.push(residual);

            let problem = MuscleOptProblem::new(tau_mcp, &scenario.muscles);
            let sol = solve_muscle_forces(&problem, warm_forces.as_deref())?;
            for (i, &f) in sol.forces.iter().enumerate() {
                trace.muscle_forces[i].push(f);
                trace.muscle_activations[i].push(sol.activations[i]);
            }
            trace.residual_torque.push(sol.residual);
            warm_forces = Some(sol.forces);
        }

        // Decompose the DOF torques into a velocity-independent part and a
        // velocity-proportional damping coefficient, then update theta_dot
        // implicitly in the damping.
        let eval0 = eval_contact(a, element, theta, 0.0, phi, phi_dot)?;
        let eval1 = eval_contact(a, element, theta, 1.0, phi, phi_dot)?;
        let tau_c0 = eval0.tau_exo;
        let gamma_c = eval0.tau_exo - eval1.tau_exo;

        // The drivetrain damping is a mechanical property of the gear train
        // and acts in every mode; in active mode the PD torque adds to it.
        let (tau_explicit, gamma_motor) = if passive {
            (0.0, a.passive_damping)
        } else {
            (tau_motor, a.passive_damping)
        };

        let (new_theta_dot, new_psi_dot);
        if spring_coupled {
            let twist_torque = kappa_t * (psi - theta);
            // 2x2 implicit solve coupling theta and the passive thumb DOF.
            let a11 = i_eff + dt * (gamma_c + gamma_motor + gamma_t);
            let a12 = -dt * gamma_t;
            let a21 = -dt * gamma_t;
            let a22 = i_thumb + dt * gamma_t;
            let b1 = i_eff * theta_dot + dt * (tau_explicit + tau_c0 + twist_torque);
            let b2 = i_thumb * psi_dot + dt * kappa_t * (theta - psi);
            let det = a11 * a22 - a12 * a21;
            new_theta_dot = (b1 * a22 - a12 * b2) / det;
            new_psi_dot = (a11 * b2 - a21 * b1) / det;
        } else {
            new_theta_dot = (i_eff * theta_dot + dt * (tau_explicit + tau_c0))
                / (i_eff + dt * (gamma_c + gamma_motor));
            new_psi_dot = 0.0;
        }

        // Work actually applied over the step, midpoint velocity so the
        // kinetic-energy balance of the implicit update is exact.
        let theta_dot_mid = 0.5 * (theta_dot + new_theta_dot);
        // Drive work includes the drivetrain damping loss so the ledger
        // balances exactly under the implicit velocity update.
        let tau_drive = tau_explicit - a.passive_damping * new_theta_dot;
        work_in += tau_drive * theta_dot_mid * dt;
        if let Some(p_prev) = prev_finger_power {
            work_in += 0.5 * (p_prev + finger_power) * dt;
        } else {
            work_in += finger_power * dt;
        }
        prev_finger_power = Some(finger_power);
        if let Some(d_prev) = prev_dissipation_rate {
            dissipation += 0.5 * (d_prev + diss_rate) * dt;
        } else {
            dissipation += diss_rate * dt;
        }
        prev_dissipation_rate = Some(diss_rate);

        theta_dot = new_theta_dot;
        theta += dt * theta_dot;
        if spring_coupled {
            psi_dot = new_psi_dot;
            psi += dt * psi_dot;
        }

        let finite = theta.is_finite()
            && theta_dot.is_finite()
            && psi.is_finite()
            && controller.virtual_mass_state.pos.is_finite()
            && controller.virtual_mass_state.vel.is_finite();
        if !finite || theta.abs() > THETA_BLOWUP || theta_dot.abs() > THETA_DOT_BLOWUP {
            trace.unstable = true;
            trace.unstable_time = Some(t);
            break;
        }
    }
    Ok(trace)
}

/// Summary of the per-step energy ledger.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct EnergyAudit {
    /// Largest |residual| over the whole trace (J).
    pub max_abs_residual: f64,
    /// Residual change over the last complete cycle, as a fraction of the
    /// cycle's energy throughput.
    pub per_cycle_drift_fraction: f64,
    /// Energy throughput of that cycle: |work in| + dissipated + peak stored.
    pub cycle_throughput: f64,
}

pub fn energy_audit(trace: &SimulationTrace) -> EnergyAudit {
    let max_abs_residual = trace
        .energy_residual
        .iter()
        .fold(0.0f64, |m, &r| m.max(r.abs()));
    let (start, end) = trace.analysis_window();
    if end <= start {
        return EnergyAudit {
            max_abs_residual,
            per_cycle_drift_fraction: 0.0,
            cycle_throughput: 0.0,
        };
    }
    let last = end - 1;
    let drift = (trace.energy_residual[last] - trace.energy_residual[start]).abs();
    let work = (trace.work_in[last] - trace.work_in[start]).abs();
    let diss = trace.dissipation[last] - trace.dissipation[start];
    let peak_stored = (start..end)
        .map(|k| trace.kinetic[k] + trace.potential[k])
        .fold(0.0f64, f64::max);
    let throughput = work + diss + peak_stored;
    EnergyAudit {
        max_abs_residual,
        per_cycle_drift_fraction: if throughput > 0.0 {
            drift / throughput
        } else {
            0.0
        },
        cycle_throughput: throughput,
    }
}
