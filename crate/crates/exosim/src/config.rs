//! JSON run configuration.
//!
//! Every section and key is optional; omitted keys take the built-in
//! defaults. Unknown keys are rejected. Angles may be given in radians or,
//! with an explicit `_deg` suffix, in degrees; giving both forms of the same
//! angle is an error. Domain validation collects every offending key into a
//! single message.

use crate::controller::ControlMode;
use crate::dynamics::Scenario;
use crate::error::{Error, Result};
use crate::model::{BodyParams, ProfileShape, ThumbMode};
use crate::muscles::{Muscle, MuscleGroup};
use serde::Deserialize;
use std::path::Path;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub assembly: Option<AssemblySection>,
    #[serde(default)]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub profile: Option<ProfileSection>,
    #[serde(default)]
    pub contact: Option<ContactSection>,
    #[serde(default)]
    pub controller: Option<ControllerSection>,
    #[serde(default)]
    pub muscles: Option<Vec<MuscleSection>>,
    #[serde(default)]
    pub sim: Option<SimSection>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    pub mass: Option<f64>,
    pub moi_xx: Option<f64>,
    pub moi_yy: Option<f64>,
    pub moi_zz: Option<f64>,
}

impl BodySection {
    fn apply(&self, body: &mut BodyParams) {
        if let Some(v) = self.mass {
            body.mass = v;
        }
        if let Some(v) = self.moi_xx {
            body.moi_xx = v;
        }
        if let Some(v) = self.moi_yy {
            body.moi_yy = v;
        }
        if let Some(v) = self.moi_zz {
            body.moi_zz = v;
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssemblySection {
    pub base: Option<BodySection>,
    pub index_part: Option<BodySection>,
    pub thumb_part: Option<BodySection>,
    pub motor_gear_inertia: Option<f64>,
    pub passive_damping: Option<f64>,
    pub finger_inertia: Option<f64>,
    pub finger_mass: Option<f64>,
    pub thumb_link_inertia: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub finger_ring_radius: Option<f64>,
    pub axis_offset: Option<f64>,
    pub exo_ring_radius: Option<f64>,
    pub thumb_mode: Option<ThumbMode>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub amplitude: Option<f64>,
    pub amplitude_deg: Option<f64>,
    pub cycle_duration: Option<f64>,
    pub shape: Option<ProfileShape>,
    pub cycles: Option<u32>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSection {
    pub k_x: Option<f64>,
    pub k_y: Option<f64>,
    pub k_z: Option<f64>,
    pub c_x: Option<f64>,
    pub c_y: Option<f64>,
    pub c_z: Option<f64>,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub z0: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub mode: Option<ControlMode>,
    pub virtual_mass: Option<f64>,
    pub virtual_damping: Option<f64>,
    pub kp: Option<f64>,
    pub kd: Option<f64>,
    pub period: Option<f64>,
    pub torque_limit: Option<f64>,
    pub theta_limit: Option<f64>,
    pub theta_limit_deg: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleSection {
    pub name: String,
    pub group: MuscleGroup,
    pub moment_arm: f64,
    pub f_max: f64,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub stride: Option<usize>,
    pub settle_ramp: Option<f64>,
}

/// Pick one of a radian/degree key pair.
fn angle_key(
    rad: Option<f64>,
    deg: Option<f64>,
    rad_key: &str,
    deg_key: &str,
    errors: &mut Vec<String>,
) -> Option<f64> {
    match (rad, deg) {
        (Some(_), Some(_)) => {
            errors.push(format!("{rad_key} and {deg_key} are mutually exclusive"));
            None
        }
        (Some(r), None) => Some(r),
        (None, Some(d)) => Some(d.to_radians()),
        (None, None) => None,
    }
}

impl ScenarioConfig {
    /// Overlay this config onto the defaults and validate the result.
    pub fn into_scenario(self) -> Result<Scenario> {
        let mut s = Scenario::default();
        let mut errors = Vec::new();

        if let Some(a) = &self.assembly {
            if let Some(b) = &a.base {
                b.apply(&mut s.assembly.base);
            }
            if let Some(b) = &a.index_part {
                b.apply(&mut s.assembly.index_part);
            }
            if let Some(b) = &a.thumb_part {
                b.apply(&mut s.assembly.thumb_part);
            }
            if let Some(v) = a.motor_gear_inertia {
                s.assembly.motor_gear_inertia = v;
            }
            if let Some(v) = a.passive_damping {
                s.assembly.passive_damping = v;
            }
            if let Some(v) = a.finger_inertia {
                s.assembly.finger_inertia = v;
            }
            if let Some(v) = a.finger_mass {
                s.assembly.finger_mass = v;
            }
            if let Some(v) = a.thumb_link_inertia {
                s.assembly.thumb_link_inertia = v;
            }
        }

        if let Some(g) = &self.geometry {
            let geo = &mut s.assembly.geometry;
            if let Some(v) = g.finger_ring_radius {
                geo.finger_ring_radius = v;
            }
            if let Some(v) = g.axis_offset {
                geo.axis_offset = v;
            }
            // The exo radius is pinned to the other two lengths unless
            // overridden explicitly.
            geo.exo_ring_radius = g
                .exo_ring_radius
                .unwrap_or(geo.finger_ring_radius + geo.axis_offset);
            if let Some(v) = g.thumb_mode {
                geo.thumb_mode = v;
            }
        }

        if let Some(p) = &self.profile {
            if let Some(v) = angle_key(
                p.amplitude,
                p.amplitude_deg,
                "profile.amplitude",
                "profile.amplitude_deg",
                &mut errors,
            ) {
                s.profile.amplitude = v;
            }
            if let Some(v) = p.cycle_duration {
                s.profile.cycle_duration = v;
            }
            if let Some(v) = p.shape {
                s.profile.shape = v;
            }
            if let Some(v) = p.cycles {
                s.profile.cycles = v;
                s.sim.duration = v as f64 * s.profile.cycle_duration;
            }
        }

        if let Some(c) = &self.contact {
            let e = &mut s.contact;
            for (field, value) in [
                (&mut e.k_x, c.k_x),
                (&mut e.k_y, c.k_y),
                (&mut e.k_z, c.k_z),
                (&mut e.c_x, c.c_x),
                (&mut e.c_y, c.c_y),
                (&mut e.c_z, c.c_z),
                (&mut e.x0, c.x0),
                (&mut e.y0, c.y0),
                (&mut e.z0, c.z0),
            ] {
                if let Some(v) = value {
                    *field = v;
                }
            }
        }

        if let Some(c) = &self.controller {
            let p = &mut s.controller;
            if let Some(v) = c.mode {
                p.mode = v;
            }
            if let Some(v) = c.virtual_mass {
                p.virtual_mass = v;
            }
            if let Some(v) = c.virtual_damping {
                p.virtual_damping = v;
            }
            if let Some(v) = c.kp {
                p.kp = v;
            }
            if let Some(v) = c.kd {
                p.kd = v;
            }
            if let Some(v) = c.period {
                p.period = v;
            }
            if let Some(v) = c.torque_limit {
                p.torque_limit = v;
            }
            if let Some(v) = angle_key(
                c.theta_limit,
                c.theta_limit_deg,
                "controller.theta_limit",
                "controller.theta_limit_deg",
                &mut errors,
            ) {
                p.theta_limit = v;
            }
        }

        if let Some(muscles) = self.muscles {
            s.muscles = muscles
                .into_iter()
                .map(|m| Muscle::new(&m.name, m.group, m.moment_arm, m.f_max))
                .collect();
        }

        if let Some(sim) = &self.sim {
            if let Some(v) = sim.dt {
                s.sim.dt = v;
            }
            if let Some(v) = sim.duration {
                s.sim.duration = v;
            }
            if let Some(v) = sim.stride {
                s.sim.stride = v;
            }
            if let Some(v) = sim.settle_ramp {
                s.sim.settle_ramp = v;
            }
        }

        if !errors.is_empty() {
            return Err(Error::Validation(errors.join("; ")));
        }
        s.validate()?;
        Ok(s)
    }
}

pub fn parse_scenario(json: &str) -> Result<Scenario> {
    let config: ScenarioConfig = serde_json::from_str(json)?;
    config.into_scenario()
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

/// One cartesian block of controller parameters.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGridSection {
    pub m: Vec<f64>,
    pub kp: Vec<f64>,
    #[serde(default = "default_kd_list")]
    pub kd: Vec<f64>,
    #[serde(default = "default_c_list")]
    pub c: Vec<f64>,
}

fn default_kd_list() -> Vec<f64> {
    vec![0.0]
}

fn default_c_list() -> Vec<f64> {
    vec![0.01]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Scenario every grid point starts from.
    #[serde(default)]
    pub base: ScenarioConfig,
    /// Union of cartesian blocks; duplicates collapse.
    pub grids: Vec<SweepGridSection>,
    #[serde(default = "default_true")]
    pub include_passive: bool,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_true() -> bool {
    true
}

fn default_cap() -> usize {
    1000
}

impl SweepConfig {
    pub fn into_sweep(self) -> Result<crate::sweep::SweepGrid> {
        let base = self.base.into_scenario()?;
        let mut points = Vec::new();
        for g in &self.grids {
            if g.m.is_empty() || g.kp.is_empty() || g.kd.is_empty() || g.c.is_empty() {
                return Err(Error::Validation(
                    "sweep grid axes must be non-empty".into(),
                ));
            }
            for &m in &g.m {
                for &kp in &g.kp {
                    for &kd in &g.kd {
                        for &c in &g.c {
                            points.push(crate::sweep::SweepPoint { m, kp, kd, c });
                        }
                    }
                }
            }
        }
        crate::sweep::SweepGrid::new(base, points, self.include_passive, self.cap)
    }
}

pub fn load_sweep(path: &Path) -> Result<crate::sweep::SweepGrid> {
    let config: SweepConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    config.into_sweep()
}
