//! Session loading and the full processing pipeline.
//!
//! A session directory holds `manifest.json`, `kinetics.csv` (motor angle and
//! ring force at the controller rate) and `emg.csv` (four EMG channels at the
//! acquisition rate). Kinematics and force are resampled to the analysis rate
//! and lowpassed; EMG is bandpassed at the native rate (the 500 Hz lowpass is
//! only meaningful before the resample), resampled, rectified and enveloped;
//! cycles are segmented on the filtered angle and envelopes normalized to the
//! peak of the FDI cycle-mean envelope.

use crate::error::{Error, Result};
use crate::signals::cycles::{average_cycles, normalize_emg, resample_linear, segment_cycles, CycleSet};
use crate::signals::envelope::{rectify, rms_envelope};
use crate::signals::filter::{design_filter, filter_zero_phase, FilterKind};
use crate::signals::remove_bias;
use crate::signals::resample::resample;
use std::io::Write;
use std::path::Path;

pub const EMG_CHANNELS: [&str; 4] = ["FDI", "EI", "EDC", "FDS"];

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    /// Metronome speed tag.
    pub bpm: f64,
    #[serde(default = "default_kinetics_fs")]
    pub kinetics_fs: f64,
    #[serde(default = "default_emg_fs")]
    pub emg_fs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

fn default_kinetics_fs() -> f64 {
    155.0
}

fn default_emg_fs() -> f64 {
    2000.0
}

#[derive(Clone, Debug)]
pub struct SessionData {
    pub manifest: SessionManifest,
    pub theta: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
    /// FDI, EI, EDC, FDS.
    pub emg: Vec<Vec<f64>>,
}

impl SessionData {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.manifest.kinetics_fs > 0.0) {
            errors.push("kinetics_fs must be > 0".to_string());
        }
        if !(self.manifest.emg_fs > 0.0) {
            errors.push("emg_fs must be > 0".to_string());
        }
        let n = self.theta.len();
        for (name, ch) in [("fx", &self.fx), ("fy", &self.fy), ("fz", &self.fz)] {
            if ch.len() != n {
                errors.push(format!("{name} length {} != angle length {n}", ch.len()));
            }
        }
        if self.emg.len() != EMG_CHANNELS.len() {
            errors.push(format!("expected {} EMG channels", EMG_CHANNELS.len()));
        }
        for (name, ch) in EMG_CHANNELS.iter().zip(&self.emg) {
            if ch.iter().any(|v| !v.is_finite()) {
                errors.push(format!("EMG channel {name} contains non-finite samples"));
            }
        }
        if self
            .theta
            .iter()
            .chain(&self.fx)
            .chain(&self.fy)
            .chain(&self.fz)
            .any(|v| !v.is_finite())
        {
            errors.push("kinetics contain non-finite samples".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors.join("; ")))
        }
    }
}

fn parse_csv_columns(text: &str, expected_header: &[&str], path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Validation(format!("{}: empty file", path.display())))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names != expected_header {
        return Err(Error::Validation(format!(
            "{}: expected header {:?}, got {:?}",
            path.display(),
            expected_header,
            names
        )));
    }
    let mut cols = vec![Vec::new(); expected_header.len()];
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Validation(format!(
                "{} line {}: expected {} fields, got {}",
                path.display(),
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        for (col, field) in cols.iter_mut().zip(fields) {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Validation(format!(
                    "{} line {}: cannot parse '{field}' as a number",
                    path.display(),
                    lineno + 2
                ))
            })?;
            col.push(v);
        }
    }
    Ok(cols)
}

pub fn load_session(dir: &Path) -> Result<SessionData> {
    let manifest: SessionManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let kin_path = dir.join("kinetics.csv");
    let kin = parse_csv_columns(
        &std::fs::read_to_string(&kin_path)?,
        &["t_s", "theta_rad", "fx_N", "fy_N", "fz_N"],
        &kin_path,
    )?;
    let emg_path = dir.join("emg.csv");
    let emg = parse_csv_columns(
        &std::fs::read_to_string(&emg_path)?,
        &["t_s", "fdi_mV", "ei_mV", "edc_mV", "fds_mV"],
        &emg_path,
    )?;
    let mut kin = kin.into_iter();
    let _t = kin.next().unwrap();
    let session = SessionData {
        manifest,
        theta: kin.next().unwrap(),
        fx: kin.next().unwrap(),
        fy: kin.next().unwrap(),
        fz: kin.next().unwrap(),
        emg: emg.into_iter().skip(1).collect(),
    };
    session.validate()?;
    Ok(session)
}

pub fn save_session(dir: &Path, session: &SessionData) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&session.manifest)?,
    )?;
    let mut kin = String::from("t_s,theta_rad,fx_N,fy_N,fz_N\n");
    for (i, &th) in session.theta.iter().enumerate() {
        kin.push_str(&format!(
            "{},{},{},{},{}\n",
            i as f64 / session.manifest.kinetics_fs,
            th,
            session.fx[i],
            session.fy[i],
            session.fz[i]
        ));
    }
    std::fs::write(dir.join("kinetics.csv"), kin)?;
    let mut emg = String::from("t_s,fdi_mV,ei_mV,edc_mV,fds_mV\n");
    for i in 0..session.emg[0].len() {
        emg.push_str(&format!(
            "{},{},{},{},{}\n",
            i as f64 / session.manifest.emg_fs,
            session.emg[0][i],
            session.emg[1][i],
            session.emg[2][i],
            session.emg[3][i]
        ));
    }
    std::fs::write(dir.join("emg.csv"), emg)?;
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineParams {
    /// Common analysis rate (Hz).
    pub target_fs: f64,
    pub filter_order: u32,
    /// Position lowpass cutoff (Hz).
    pub position_cutoff: f64,
    /// Force lowpass cutoff (Hz).
    pub force_cutoff: f64,
    /// EMG bandpass edges at the native rate (Hz).
    pub emg_highpass: f64,
    pub emg_lowpass: f64,
    /// RMS envelope window and overlap (samples at the analysis rate).
    pub rms_window: usize,
    pub rms_overlap: usize,
    /// Force bias: mean of this many leading samples; 0 disables.
    pub bias_samples: usize,
    pub min_separation_s: f64,
    pub prominence_fraction: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            target_fs: 350.0,
            filter_order: 4,
            position_cutoff: 8.0,
            force_cutoff: 10.0,
            emg_highpass: 20.0,
            emg_lowpass: 500.0,
            rms_window: 30,
            rms_overlap: 29,
            bias_samples: 1000,
            min_separation_s: 0.5,
            prominence_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChannelAverage {
    pub name: String,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ProcessedSession {
    pub fs: f64,
    pub angle: Vec<f64>,
    pub velocity: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub fz: Vec<f64>,
    /// Normalized envelopes, FDI/EI/EDC/FDS order.
    pub envelopes: Vec<Vec<f64>>,
    /// Normalization divisor: peak of the FDI cycle-mean envelope.
    pub emg_reference: f64,
    pub cycles: CycleSet,
    /// Per-cycle mean and variance of every output channel, on a common grid.
    pub averages: Vec<ChannelAverage>,
}

fn central_difference(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (x[1] - x[0]) * fs
            } else if i == n - 1 {
                (x[n - 1] - x[n - 2]) * fs
            } else {
                (x[i + 1] - x[i - 1]) * 0.5 * fs
            }
        })
        .collect()
}

pub fn process_session(session: &SessionData, params: &PipelineParams) -> Result<ProcessedSession> {
    session.validate()?;
    let kin_fs = session.manifest.kinetics_fs;
    let emg_fs = session.manifest.emg_fs;
    let fs = params.target_fs;

    let pos_lp = design_filter(params.filter_order, params.position_cutoff, FilterKind::Lowpass, fs)?;
    let force_lp = design_filter(params.filter_order, params.force_cutoff, FilterKind::Lowpass, fs)?;
    let emg_hp = design_filter(params.filter_order, params.emg_highpass, FilterKind::Highpass, emg_fs)?;
    let emg_lp = design_filter(params.filter_order, params.emg_lowpass, FilterKind::Lowpass, emg_fs)?;

    // Position/force: resample to the analysis rate, then lowpass.
    let angle = filter_zero_phase(&pos_lp, &resample(&session.theta, kin_fs, fs)?)?;
    let velocity = central_difference(&angle, fs);
    let force = |ch: &[f64]| -> Result<Vec<f64>> {
        let unbiased = remove_bias(ch, params.bias_samples.min(ch.len()));
        filter_zero_phase(&force_lp, &resample(&unbiased, kin_fs, fs)?)
    };
    let fx = force(&session.fx)?;
    let fy = force(&session.fy)?;
    let fz = force(&session.fz)?;

    // EMG: bandpass at the native rate, resample, rectify, envelope.
    let mut envelopes = Vec::with_capacity(session.emg.len());
    for ch in &session.emg {
        let band = filter_zero_phase(&emg_lp, &filter_zero_phase(&emg_hp, ch)?)?;
        let at_fs = resample(&band, emg_fs, fs)?;
        envelopes.push(rms_envelope(&rectify(&at_fs), params.rms_window, params.rms_overlap)?);
    }

    let cycles = segment_cycles(&angle, fs, params.min_separation_s, params.prominence_fraction)?;
    let emg_reference = normalize_emg(&mut envelopes, 0, &cycles)?;

    let mut averages = Vec::new();
    let mut common_len = 0usize;
    let named: Vec<(&str, &[f64])> = vec![
        ("theta_rad", &angle),
        ("velocity_rad_s", &velocity),
        ("fx_N", &fx),
        ("fy_N", &fy),
        ("fz_N", &fz),
        ("FDI", &envelopes[0]),
        ("EI", &envelopes[1]),
        ("EDC", &envelopes[2]),
        ("FDS", &envelopes[3]),
    ];
    for (name, ch) in named {
        let (mut mean, mut variance) = average_cycles(ch, &cycles)?;
        if common_len == 0 {
            common_len = mean.len();
        } else if mean.len() != common_len {
            mean = resample_linear(&mean, common_len);
            variance = resample_linear(&variance, common_len);
        }
        averages.push(ChannelAverage {
            name: name.to_string(),
            mean,
            variance,
        });
    }

    // Cycle-averaging the normalized reference yields a peak of 1.0 only up
    // to rounding; rescale the EMG averages so the documented invariant (FDI
    // mean peak exactly 1.0) holds bitwise.
    let fdi_peak = averages[5].mean.iter().cloned().fold(0.0f64, f64::max);
    if fdi_peak > 0.0 {
        for ch in &mut averages[5..] {
            for v in &mut ch.mean {
                *v /= fdi_peak;
            }
            for v in &mut ch.variance {
                *v /= fdi_peak * fdi_peak;
            }
        }
    }

    Ok(ProcessedSession {
        fs,
        angle,
        velocity,
        fx,
        fy,
        fz,
        envelopes,
        emg_reference,
        cycles,
        averages,
    })
}

impl ProcessedSession {
    pub fn n_cycles(&self) -> usize {
        self.cycles.n_cycles()
    }

    pub fn mean_cycle_duration(&self) -> f64 {
        let n = self.cycles.n_cycles();
        if n == 0 {
            return 0.0;
        }
        let b = &self.cycles.boundaries;
        (b[b.len() - 1] - b[0]) as f64 / (n as f64 * self.fs)
    }

    /// Cycle-average CSV: phase column plus mean/variance per channel.
    pub fn write_cycle_averages_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("phase");
        for ch in &self.averages {
            header.push_str(&format!(",{}_mean,{}_var", ch.name, ch.name));
        }
        writeln!(w, "{header}")?;
        let n = self.averages[0].mean.len();
        for k in 0..n {
            let mut row = format!("{}", k as f64 / n as f64);
            for ch in &self.averages {
                row.push_str(&format!(",{},{}", ch.mean[k], ch.variance[k]));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Waveform of the synthetic generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticShape {
    Cosine,
    Triangular,
}

/// Build a clean session with `n_cycles + 1` extension extrema, phased so all
/// extrema are interior: segmentation must find exactly `n_cycles` complete
/// cycles. EMG channels carry carrier bursts: flexors (FDI, FDS) during
/// closing, extensors (EI, EDC) during opening.
pub fn synthetic_session(n_cycles: usize, bpm: f64, shape: SyntheticShape) -> SessionData {
    let manifest = SessionManifest {
        bpm,
        kinetics_fs: 155.0,
        emg_fs: 2000.0,
        subject: None,
    };
    // One metronome beat per extension-flexion cycle.
    let period = 60.0 / bpm;
    let amplitude = 25.0f64.to_radians();
    // Minima sit at (k + 0.75) * period; this span contains exactly
    // n_cycles + 1 of them.
    let total = (n_cycles as f64 + 1.5) * period;
    let angle_at = |t: f64| -> f64 {
        // Phase shift puts minima at 0.75T + kT, away from both ends.
        let u = (t / period + 0.25).rem_euclid(1.0);
        match shape {
            SyntheticShape::Cosine => {
                0.5 * amplitude * (1.0 - (2.0 * std::f64::consts::PI * u).cos())
            }
            SyntheticShape::Triangular => {
                amplitude * if u < 0.5 { 2.0 * u } else { 2.0 * (1.0 - u) }
            }
        }
    };

    let n_kin = (total * manifest.kinetics_fs) as usize;
    let mut theta = Vec::with_capacity(n_kin);
    let mut fx = Vec::with_capacity(n_kin);
    let fy = vec![0.0; n_kin];
    let mut fz = Vec::with_capacity(n_kin);
    for i in 0..n_kin {
        let t = i as f64 / manifest.kinetics_fs;
        let a = angle_at(t);
        theta.push(a);
        fx.push(0.2 * a);
        // Lateral force follows the motion rate's sign.
        fz.push(1.4 * (2.0 * std::f64::consts::PI * (t / period + 0.25)).sin());
    }

    let n_emg = (total * manifest.emg_fs) as usize;
    let mut emg = vec![Vec::with_capacity(n_emg); 4];
    for i in 0..n_emg {
        let t = i as f64 / manifest.emg_fs;
        // u = 0 at the extension extrema; closing spans u in [0, 0.5).
        let u = (t / period + 0.25).rem_euclid(1.0);
        let s = (2.0 * std::f64::consts::PI * u).sin();
        let closing = s.max(0.0).powi(2);
        let opening = (-s).max(0.0).powi(2);
        let carrier = (2.0 * std::f64::consts::PI * 80.0 * t).sin();
        emg[0].push(1.0 * closing * carrier); // FDI
        emg[1].push(0.5 * opening * carrier); // EI
        emg[2].push(0.6 * opening * carrier); // EDC
        emg[3].push(0.8 * closing * carrier); // FDS
    }

    SessionData {
        manifest,
        theta,
        fx,
        fy,
        fz,
        emg,
    }
}
