//! Per-run outcome metrics, evaluated over the last complete motion cycle.

use crate::dynamics::SimulationTrace;
use crate::muscles::{group_activation_summary, GroupActivationSummary};

/// Topographic prominence of the local maximum at `i`: its height above the
/// higher of the two bases, where each base is the lowest value between the
/// peak and the nearest strictly higher sample on that side (or the window
/// edge when none exists).
fn peak_prominence(series: &[f64], i: usize) -> f64 {
    let h = series[i];
    let mut left_base = h;
    for &v in series[..i].iter().rev() {
        if v > h {
            break;
        }
        left_base = left_base.min(v);
    }
    let mut right_base = h;
    for &v in &series[i + 1..] {
        if v > h {
            break;
        }
        right_base = right_base.min(v);
    }
    h - left_base.max(right_base)
}

/// Count interior local extrema whose topographic prominence exceeds
/// `threshold`; minima are measured on the negated series.
pub fn count_prominent_extrema(series: &[f64], threshold: f64) -> usize {
    if series.len() < 3 || !(threshold > 0.0) {
        return 0;
    }
    let negated: Vec<f64> = series.iter().map(|v| -v).collect();
    let mut count = 0usize;
    for i in 1..series.len() - 1 {
        // First sample of a plateau counts as the candidate extremum.
        if series[i] > series[i - 1] && series[i] >= series[i + 1] {
            if peak_prominence(series, i) > threshold {
                count += 1;
            }
        } else if series[i] < series[i - 1] && series[i] <= series[i + 1] {
            if peak_prominence(&negated, i) > threshold {
                count += 1;
            }
        }
    }
    count
}

/// Direction of the motor's net work during the closing (flexion) phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TorqueSign {
    Assistive,
    Resistive,
    Mixed,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ScenarioMetrics {
    /// Peak |f_z| (lateral ring force) over the analysis cycle (N).
    pub peak_fz: f64,
    /// Peak in-plane force magnitude sqrt(f_x^2 + f_z^2) (N).
    pub peak_f_mag: f64,
    /// Percent reduction of peak |f_z| relative to a passive baseline, when
    /// one is supplied.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction_pct: Option<f64>,
    /// Mean and peak |motor torque| over the cycle (N*m).
    pub mean_tau_motor: f64,
    pub peak_tau_motor: f64,
    /// Peak |motor angle| over the cycle (deg).
    pub motor_peak_deg: f64,
    /// Absent in passive mode, where the motor only damps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub torque_sign: Option<TorqueSign>,
    /// True when f_z shows 5 or more prominent extrema within the cycle
    /// (prominence above 10% of the cycle's peak |f_z|).
    pub oscillation: bool,
    pub unstable: bool,
    /// Mean flexor activation over the full cycle.
    pub mean_flexor_act: f64,
    /// Mean extensor activation over the full cycle.
    pub mean_extensor_act: f64,
    pub activation: GroupActivationSummary,
}

/// Minimum prominent extrema to flag oscillation.
pub const OSCILLATION_MIN_EXTREMA: usize = 5;
/// Prominence threshold as a fraction of the cycle's peak |f_z|.
pub const OSCILLATION_PROMINENCE_FRACTION: f64 = 0.10;
/// Motor work below this (J) classifies the torque direction as mixed.
pub const TORQUE_SIGN_DEADBAND: f64 = 1e-9;

/// Peak |f_z| over the trace's analysis window (N).
pub fn peak_abs_fz(trace: &SimulationTrace) -> f64 {
    let (start, end) = trace.analysis_window();
    trace.fz[start..end].iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

/// Motor work integral over the closing phase of the analysis cycle (J).
pub fn closing_motor_work(trace: &SimulationTrace) -> f64 {
    let (start, end) = trace.analysis_window();
    let sample_dt = trace.dt * trace.stride as f64;
    let mut work = 0.0;
    for k in start..end {
        if trace.cycle_phase(trace.t[k]) < 0.5 {
            work += trace.tau_motor[k] * trace.theta_dot[k] * sample_dt;
        }
    }
    work
}

pub fn compute_metrics(
    trace: &SimulationTrace,
    passive_baseline: Option<&SimulationTrace>,
) -> ScenarioMetrics {
    let (start, end) = trace.analysis_window();
    let peak_fz = peak_abs_fz(trace);
    let peak_f_mag = (start..end)
        .map(|k| (trace.fx[k] * trace.fx[k] + trace.fz[k] * trace.fz[k]).sqrt())
        .fold(0.0f64, f64::max);
    let taus = &trace.tau_motor[start..end];
    let peak_tau_motor = taus.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let mean_tau_motor = if taus.is_empty() {
        0.0
    } else {
        taus.iter().map(|v| v.abs()).sum::<f64>() / taus.len() as f64
    };
    let motor_peak_deg = trace.theta[start..end]
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .to_degrees();

    let extrema = count_prominent_extrema(
        &trace.fz[start..end],
        OSCILLATION_PROMINENCE_FRACTION * peak_fz,
    );
    let oscillation = extrema >= OSCILLATION_MIN_EXTREMA;

    let torque_sign = if trace.passive_mode {
        None
    } else {
        let work = closing_motor_work(trace);
        Some(if work > TORQUE_SIGN_DEADBAND {
            TorqueSign::Assistive
        } else if work < -TORQUE_SIGN_DEADBAND {
            TorqueSign::Resistive
        } else {
            TorqueSign::Mixed
        })
    };

    let reduction_pct = passive_baseline.and_then(|b| {
        let p = peak_abs_fz(b);
        (p > 0.0).then(|| 100.0 * (1.0 - peak_fz / p))
    });

    let activation = group_activation_summary(trace);
    ScenarioMetrics {
        peak_fz,
        peak_f_mag,
        reduction_pct,
        mean_tau_motor,
        peak_tau_motor,
        motor_peak_deg,
        torque_sign,
        oscillation,
        unstable: trace.unstable,
        mean_flexor_act: activation.flexor_cycle_mean,
        mean_extensor_act: activation.extensor_cycle_mean,
        activation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{AdmittanceParams, ControlMode};
    use crate::dynamics::{simulate, Scenario};
    use approx::assert_relative_eq;

    #[test]
    fn extrema_counting_on_synthetic_series() {
        // Two cycles of a sine: 2 peaks + 2 troughs, the last trough
        // confirmed by the rise back to zero.
        let n = 400;
        let sine: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 2.0 * i as f64 / n as f64).sin())
            .collect();
        assert_eq!(count_prominent_extrema(&sine, 0.1), 4);

        // Small ripple below the threshold is not counted.
        let rippled: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                (2.0 * std::f64::consts::PI * t).sin()
                    + 0.01 * (2.0 * std::f64::consts::PI * 30.0 * t).sin()
            })
            .collect();
        assert_eq!(count_prominent_extrema(&rippled, 0.1), 2);

        // A 30 Hz force ripple above the threshold triggers the oscillation
        // count.
        let noisy: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                (2.0 * std::f64::consts::PI * t).sin()
                    + 0.3 * (2.0 * std::f64::consts::PI * 30.0 * t).sin()
            })
            .collect();
        assert!(count_prominent_extrema(&noisy, 0.1) >= 5);
    }

    #[test]
    fn empty_and_flat_series() {
        assert_eq!(count_prominent_extrema(&[], 0.1), 0);
        assert_eq!(count_prominent_extrema(&[1.0; 50], 0.1), 0);
        assert_eq!(count_prominent_extrema(&[1.0, 2.0], 0.0), 0);
    }

    #[test]
    fn passive_run_is_smooth_and_resists_closing() {
        let trace = simulate(&Scenario::default()).unwrap();
        let m = compute_metrics(&trace, None);
        assert!(!m.oscillation);
        assert!(!m.unstable);
        // Passive mode reports no torque direction, but the damper's closing
        // work is negative by construction.
        assert_eq!(m.torque_sign, None);
        assert!(closing_motor_work(&trace) < 0.0);
        assert!(m.peak_fz > 0.1, "peak fz {}", m.peak_fz);
        assert!(m.peak_f_mag >= m.peak_fz);
        assert!(m.reduction_pct.is_none());
    }

    #[test]
    fn trace_against_itself_reduces_zero_percent() {
        let trace = simulate(&Scenario::default()).unwrap();
        let m = compute_metrics(&trace, Some(&trace));
        assert_relative_eq!(m.reduction_pct.unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn assistive_controller_flips_torque_sign() {
        let mut s = Scenario::default();
        s.controller = AdmittanceParams {
            mode: ControlMode::Admittance,
            virtual_mass: 0.01,
            kp: 1.0,
            ..AdmittanceParams::default()
        };
        let trace = simulate(&s).unwrap();
        let m = compute_metrics(&trace, None);
        assert_eq!(m.torque_sign, Some(TorqueSign::Assistive));
    }

    #[test]
    fn metrics_serialize_without_absent_fields() {
        let trace = simulate(&Scenario::default()).unwrap();
        let m = compute_metrics(&trace, None);
        let json = serde_json::to_string(&m).unwrap();
        assert!(!json.contains("torque_sign"));
        assert!(!json.contains("reduction_pct"));
        assert!(json.contains("peak_fz"));
    }
}
