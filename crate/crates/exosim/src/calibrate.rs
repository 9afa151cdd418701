//! Passive damping calibration.
//!
//! Finds the drive damping coefficient whose passive run reproduces a target
//! peak lateral ring force. Peak force grows monotonically with damping, so
//! a bisection over a fixed bracket converges reliably; an unreachable
//! target reports the bracket instead of iterating forever.

use crate::controller::ControlMode;
use crate::dynamics::{simulate, Scenario};
use crate::error::{Error, Result};
use crate::metrics::peak_abs_fz;

/// Damping bracket searched (N*m*s/rad).
pub const C_MIN: f64 = 1e-4;
pub const C_MAX: f64 = 5.0;
const MAX_ITERATIONS: usize = 60;

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CalibrationResult {
    /// Calibrated drive damping (N*m*s/rad).
    pub c_passive: f64,
    /// Peak |f_z| the calibrated run produces (N).
    pub achieved_peak: f64,
    pub iterations: usize,
}

fn peak_for_damping(base: &Scenario, c: f64) -> Result<f64> {
    let mut s = base.clone();
    s.controller.mode = ControlMode::Passive;
    s.assembly.passive_damping = c;
    let trace = simulate(&s)?;
    if trace.unstable {
        return Err(Error::Unstable {
            t: trace.unstable_time.unwrap_or(0.0),
        });
    }
    Ok(peak_abs_fz(&trace))
}

/// Bisect the damping coefficient until the passive peak force lands within
/// `tolerance` (relative) of `target`.
pub fn calibrate_passive(
    base: &Scenario,
    target: f64,
    tolerance: f64,
) -> Result<CalibrationResult> {
    if !(target > 0.0) {
        return Err(Error::Calibration(format!(
            "target force must be > 0 (got {target})"
        )));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Calibration(format!(
            "tolerance must be > 0 (got {tolerance})"
        )));
    }

    let (mut lo, mut hi) = (C_MIN, C_MAX);
    let f_lo = peak_for_damping(base, lo)?;
    let f_hi = peak_for_damping(base, hi)?;
    if target < f_lo || target > f_hi {
        return Err(Error::Calibration(format!(
            "target {target} N outside the reachable range [{f_lo:.4}, {f_hi:.4}] N \
             for damping in [{lo}, {hi}]"
        )));
    }

    let mut iterations = 0;
    let mut c = 0.5 * (lo + hi);
    let mut peak = peak_for_damping(base, c)?;
    while (peak - target).abs() > tolerance * target && iterations < MAX_ITERATIONS {
        if peak < target {
            lo = c;
        } else {
            hi = c;
        }
        c = 0.5 * (lo + hi);
        peak = peak_for_damping(base, c)?;
        iterations += 1;
    }
    if (peak - target).abs() > tolerance * target {
        return Err(Error::Calibration(format!(
            "did not converge to {target} N within {MAX_ITERATIONS} iterations \
             (closest {peak:.4} N at damping {c:.6})"
        )));
    }
    Ok(CalibrationResult {
        c_passive: c,
        achieved_peak: peak,
        iterations,
    })
}
