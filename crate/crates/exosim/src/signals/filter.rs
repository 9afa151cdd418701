//! Butterworth filter design (bilinear transform with prewarping) and
//! zero-phase application as cascaded second-order sections.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// One second-order section, denominator normalized to a0 = 1.
#[derive(Clone, Copy, Debug)]
pub struct Sos {
    pub b: [f64; 3],
    pub a1: f64,
    pub a2: f64,
}

#[derive(Clone, Copy, Debug)]
struct C {
    re: f64,
    im: f64,
}

impl C {
    fn abs2(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Design an even-order Butterworth filter. The analog prototype poles are
/// prewarped so the digital cutoff lands exactly on `cutoff`.
pub fn design_filter(order: u32, cutoff: f64, kind: FilterKind, fs: f64) -> Result<Vec<Sos>> {
    if !(fs > 0.0) {
        return Err(Error::FilterDesign(format!("fs must be > 0 (got {fs})")));
    }
    if !(cutoff > 0.0 && cutoff < fs / 2.0) {
        return Err(Error::FilterDesign(format!(
            "cutoff must lie in (0, fs/2) = (0, {}) (got {cutoff})",
            fs / 2.0
        )));
    }
    if order != 2 && order != 4 {
        return Err(Error::FilterDesign(format!(
            "order must be 2 or 4 (got {order})"
        )));
    }
    let n = order;
    let warped = 2.0 * fs * (std::f64::consts::PI * cutoff / fs).tan();
    let mut sections = Vec::with_capacity((n / 2) as usize);
    for k in 0..n / 2 {
        // Prototype pole in the left half plane; its conjugate completes the
        // section.
        let theta = std::f64::consts::PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
        let proto = C {
            re: theta.cos(),
            im: theta.sin(),
        };
        let pole = match kind {
            FilterKind::Lowpass => C {
                re: warped * proto.re,
                im: warped * proto.im,
            },
            // lp2hp maps p -> warped / p; |proto| = 1 so this is warped *
            // conj(proto).
            FilterKind::Highpass => C {
                re: warped * proto.re,
                im: -warped * proto.im,
            },
        };
        // Bilinear transform: z = (1 + p/(2fs)) / (1 - p/(2fs)).
        let num = C {
            re: 1.0 + pole.re / (2.0 * fs),
            im: pole.im / (2.0 * fs),
        };
        let den = C {
            re: 1.0 - pole.re / (2.0 * fs),
            im: -pole.im / (2.0 * fs),
        };
        let d2 = den.abs2();
        let zpole = C {
            re: (num.re * den.re + num.im * den.im) / d2,
            im: (num.im * den.re - num.re * den.im) / d2,
        };
        let a1 = -2.0 * zpole.re;
        let a2 = zpole.abs2();
        let b = match kind {
            FilterKind::Lowpass => {
                // Zeros at z = -1; unit gain at DC.
                let b0 = (1.0 + a1 + a2) / 4.0;
                [b0, 2.0 * b0, b0]
            }
            FilterKind::Highpass => {
                // Zeros at z = +1; unit gain at Nyquist, exact null at DC.
                let b0 = (1.0 - a1 + a2) / 4.0;
                [b0, -2.0 * b0, b0]
            }
        };
        sections.push(Sos { b, a1, a2 });
    }
    Ok(sections)
}

/// |H| of the cascade at frequency `f` (Hz).
pub fn magnitude(sos: &[Sos], f: f64, fs: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f / fs;
    let z1 = C {
        re: (-w).cos(),
        im: (-w).sin(),
    };
    let z2 = C {
        re: (-2.0 * w).cos(),
        im: (-2.0 * w).sin(),
    };
    let mut mag2 = 1.0;
    for s in sos {
        let num = C {
            re: s.b[0] + s.b[1] * z1.re + s.b[2] * z2.re,
            im: s.b[1] * z1.im + s.b[2] * z2.im,
        };
        let den = C {
            re: 1.0 + s.a1 * z1.re + s.a2 * z2.re,
            im: s.a1 * z1.im + s.a2 * z2.im,
        };
        mag2 *= num.abs2() / den.abs2();
    }
    mag2.sqrt()
}

/// Steady-state direct-form-II-transposed state for a unit-step input, so a
/// constant signal passes through unchanged. Scale by the first sample.
fn section_zi(s: &Sos) -> [f64; 2] {
    let dc = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a1 + s.a2);
    [dc - s.b[0], s.b[2] - s.a2 * dc]
}

/// Single forward pass of the cascade, each section initialized to its
/// steady state for the signal's first sample.
pub fn sosfilt(sos: &[Sos], x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in sos {
        let zi = section_zi(s);
        let x0 = y.first().copied().unwrap_or(0.0);
        let (mut z1, mut z2) = (zi[0] * x0, zi[1] * x0);
        for v in y.iter_mut() {
            let xin = *v;
            let out = s.b[0] * xin + z1;
            z1 = s.b[1] * xin - s.a1 * out + z2;
            z2 = s.b[2] * xin - s.a2 * out;
            *v = out;
        }
    }
    y
}

/// Forward-backward (zero-phase) filtering with odd-reflection padding of
/// three times the filter order at each edge.
pub fn filter_zero_phase(sos: &[Sos], x: &[f64]) -> Result<Vec<f64>> {
    let order = 2 * sos.len();
    let padlen = 3 * order;
    if x.len() <= padlen {
        return Err(Error::SignalLength(format!(
            "zero-phase filtering needs more than {padlen} samples (got {})",
            x.len()
        )));
    }
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    for i in (1..=padlen).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=padlen {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }

    let mut y = sosfilt(sos, &ext);
    y.reverse();
    let mut y = sosfilt(sos, &y);
    y.reverse();
    Ok(y[padlen..padlen + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn lowpass_dc_gain_is_one() {
        let sos = design_filter(4, 8.0, FilterKind::Lowpass, 350.0).unwrap();
        assert_relative_eq!(magnitude(&sos, 0.0, 350.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn lowpass_minus_3db_at_cutoff() {
        let sos = design_filter(4, 8.0, FilterKind::Lowpass, 350.0).unwrap();
        let g = magnitude(&sos, 8.0, 350.0);
        assert_relative_eq!(g, std::f64::consts::FRAC_1_SQRT_2, max_relative = 0.01);
    }

    #[test]
    fn lowpass_matches_analytic_butterworth_response() {
        // After prewarping, |H(f)|^2 = 1 / (1 + (tan(pi f/fs)/tan(pi fc/fs))^(2n)).
        let (fc, fs, n) = (10.0, 350.0, 4);
        let sos = design_filter(n, fc, FilterKind::Lowpass, fs).unwrap();
        for f in [2.0, 5.0, 10.0, 20.0, 40.0, 80.0] {
            let ratio = (std::f64::consts::PI * f / fs).tan() / (std::f64::consts::PI * fc / fs).tan();
            let expect = (1.0 + ratio.powi(2 * n as i32)).sqrt().recip();
            assert_relative_eq!(magnitude(&sos, f, fs), expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn highpass_dc_gain_is_zero() {
        let sos = design_filter(4, 20.0, FilterKind::Highpass, 2000.0).unwrap();
        assert_abs_diff_eq!(magnitude(&sos, 0.0, 2000.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(magnitude(&sos, 1000.0, 2000.0), 1.0, max_relative = 1e-12);
        let g = magnitude(&sos, 20.0, 2000.0);
        assert_relative_eq!(g, std::f64::consts::FRAC_1_SQRT_2, max_relative = 0.01);
    }

    #[test]
    fn invalid_designs_rejected() {
        assert!(design_filter(4, 200.0, FilterKind::Lowpass, 350.0).is_err());
        assert!(design_filter(4, 175.0, FilterKind::Lowpass, 350.0).is_err());
        assert!(design_filter(4, 0.0, FilterKind::Lowpass, 350.0).is_err());
        assert!(design_filter(3, 8.0, FilterKind::Lowpass, 350.0).is_err());
        assert!(design_filter(2, 8.0, FilterKind::Lowpass, 350.0).is_ok());
    }

    #[test]
    fn constant_signal_unchanged_by_lowpass() {
        let sos = design_filter(4, 8.0, FilterKind::Lowpass, 350.0).unwrap();
        let x = vec![0.7; 500];
        let y = filter_zero_phase(&sos, &x).unwrap();
        for v in y {
            assert_abs_diff_eq!(v, 0.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_phase_preserves_symmetry() {
        // A symmetric pulse must come out symmetric (no phase shift).
        let sos = design_filter(4, 8.0, FilterKind::Lowpass, 350.0).unwrap();
        let n = 701;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let d = (i as f64 - 350.0) / 30.0;
                (-d * d).exp()
            })
            .collect();
        let y = filter_zero_phase(&sos, &x).unwrap();
        for i in 0..n {
            assert_abs_diff_eq!(y[i], y[n - 1 - i], epsilon = 1e-9);
        }
    }

    #[test]
    fn sine_at_cutoff_halved_by_two_passes() {
        let (fc, fs) = (8.0, 350.0);
        let sos = design_filter(4, fc, FilterKind::Lowpass, fs).unwrap();
        let n = 3500; // 10 s
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * fc * i as f64 / fs).sin())
            .collect();
        let y = filter_zero_phase(&sos, &x).unwrap();
        // Measure amplitude away from the edges.
        let amp = y[n / 4..3 * n / 4].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert_relative_eq!(amp, 0.5, max_relative = 0.02);
    }

    #[test]
    fn too_short_input_rejected() {
        let sos = design_filter(4, 8.0, FilterKind::Lowpass, 350.0).unwrap();
        // padlen = 3 * order = 12; anything not longer is rejected.
        assert!(matches!(
            filter_zero_phase(&sos, &[0.0; 12]),
            Err(Error::SignalLength(_))
        ));
        assert!(filter_zero_phase(&sos, &[0.0; 13]).is_ok());
    }

    #[test]
    fn zero_phase_never_amplifies_dc() {
        let sos = design_filter(4, 10.0, FilterKind::Lowpass, 350.0).unwrap();
        let x = vec![1.0; 400];
        let y = filter_zero_phase(&sos, &x).unwrap();
        let peak = y.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(peak <= 1.0 + 1e-9);
    }
}
