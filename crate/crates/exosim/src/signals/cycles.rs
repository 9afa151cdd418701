//! Cycle segmentation on the motor angle and per-cycle averaging.
//!
//! A cycle runs between consecutive extension extrema (minima of the flexion
//! angle, "fully extended"). Partial cycles before the first and after the
//! last extremum are discarded by construction.

use crate::error::{Error, Result};

/// Non-overlapping, ordered cycle boundaries on one sampling grid.
#[derive(Clone, Debug)]
pub struct CycleSet {
    /// Extremum indices; cycle k spans [boundaries[k], boundaries[k+1]).
    pub boundaries: Vec<usize>,
}

impl CycleSet {
    pub fn n_cycles(&self) -> usize {
        self.boundaries.len().saturating_sub(1)
    }

    pub fn ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.boundaries.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Indices of prominent minima: a zigzag walk confirms a minimum once the
/// signal has fallen and risen again by more than `prominence_fraction` of
/// the signal's total range, then minima closer than `min_separation_s` are
/// thinned keeping the deeper one.
pub fn detect_extension_extrema(
    angle: &[f64],
    fs: f64,
    min_separation_s: f64,
    prominence_fraction: f64,
) -> Result<Vec<usize>> {
    if !(fs > 0.0) || !(prominence_fraction > 0.0) || min_separation_s < 0.0 {
        return Err(Error::Parameter(
            "segmentation needs fs > 0, prominence fraction > 0, separation >= 0".into(),
        ));
    }
    let lo = angle.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = angle.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = prominence_fraction * (hi - lo);
    if !(threshold > 0.0) {
        return Err(Error::Segmentation(
            "signal is flat; no cycles detected".into(),
        ));
    }

    let mut minima = Vec::new();
    let mut direction = 0i8;
    let mut anchor = angle[0];
    let mut anchor_idx = 0usize;
    for (i, &v) in angle.iter().enumerate().skip(1) {
        match direction {
            0 => {
                if v - anchor > threshold {
                    direction = 1;
                    anchor = v;
                    anchor_idx = i;
                } else if anchor - v > threshold {
                    direction = -1;
                    anchor = v;
                    anchor_idx = i;
                } else if v < anchor {
                    // Track the running extreme so the first reversal is
                    // measured from it.
                    anchor = v;
                    anchor_idx = i;
                }
            }
            -1 => {
                if v < anchor {
                    anchor = v;
                    anchor_idx = i;
                } else if v - anchor > threshold {
                    minima.push(anchor_idx);
                    direction = 1;
                    anchor = v;
                    anchor_idx = i;
                }
            }
            _ => {
                if v > anchor {
                    anchor = v;
                    anchor_idx = i;
                } else if anchor - v > threshold {
                    direction = -1;
                    anchor = v;
                    anchor_idx = i;
                }
            }
        }
    }

    let min_gap = (min_separation_s * fs).round() as usize;
    let mut thinned: Vec<usize> = Vec::with_capacity(minima.len());
    for idx in minima {
        if let Some(&last) = thinned.last() {
            if idx - last < min_gap {
                if angle[idx] < angle[last] {
                    *thinned.last_mut().unwrap() = idx;
                }
                continue;
            }
        }
        thinned.push(idx);
    }

    if thinned.len() < 2 {
        return Err(Error::Segmentation(format!(
            "need at least 2 extension extrema, found {}",
            thinned.len()
        )));
    }
    Ok(thinned)
}

pub fn segment_cycles(
    angle: &[f64],
    fs: f64,
    min_separation_s: f64,
    prominence_fraction: f64,
) -> Result<CycleSet> {
    let boundaries =
        detect_extension_extrema(angle, fs, min_separation_s, prominence_fraction)?;
    Ok(CycleSet { boundaries })
}

/// Linear-interpolation resample of a slice to `n` points.
pub fn resample_linear(x: &[f64], n: usize) -> Vec<f64> {
    if x.len() == 1 || n == 1 {
        return vec![x[0]; n];
    }
    (0..n)
        .map(|j| {
            let t = j as f64 * (x.len() - 1) as f64 / (n - 1) as f64;
            let k = (t.floor() as usize).min(x.len() - 2);
            let frac = t - k as f64;
            x[k] * (1.0 - frac) + x[k + 1] * frac
        })
        .collect()
}

/// Pointwise mean and population variance of the channel's cycles, each
/// resampled to the median cycle length. Cycles extending past the channel
/// end (shorter derived channels such as envelopes) are skipped.
pub fn average_cycles(channel: &[f64], cycles: &CycleSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let usable: Vec<(usize, usize)> = cycles
        .ranges()
        .filter(|&(s, e)| e <= channel.len() && e > s)
        .collect();
    if usable.len() < 2 {
        return Err(Error::Segmentation(format!(
            "need at least 2 complete cycles to average, have {}",
            usable.len()
        )));
    }
    let mut lengths: Vec<usize> = usable.iter().map(|&(s, e)| e - s).collect();
    lengths.sort_unstable();
    let common = lengths[lengths.len() / 2];

    let n = usable.len() as f64;
    let mut mean = vec![0.0; common];
    let mut m2 = vec![0.0; common];
    let resampled: Vec<Vec<f64>> = usable
        .iter()
        .map(|&(s, e)| resample_linear(&channel[s..e], common))
        .collect();
    for cyc in &resampled {
        for (m, &v) in mean.iter_mut().zip(cyc) {
            *m += v / n;
        }
    }
    for cyc in &resampled {
        for (k, &v) in cyc.iter().enumerate() {
            let d = v - mean[k];
            m2[k] += d * d / n;
        }
    }
    Ok((mean, m2))
}

/// Divide every channel by the maximum of the reference channel's cycle-mean
/// envelope. Returns the reference value used.
pub fn normalize_emg(
    channels: &mut [Vec<f64>],
    reference_index: usize,
    cycles: &CycleSet,
) -> Result<f64> {
    if reference_index >= channels.len() {
        return Err(Error::Parameter(format!(
            "reference channel index {reference_index} out of range"
        )));
    }
    let (mean, _) = average_cycles(&channels[reference_index], cycles)?;
    let reference = mean.iter().cloned().fold(0.0f64, f64::max);
    if !(reference > 0.0) {
        return Err(Error::Normalization(format!(
            "reference envelope maximum must be > 0 (got {reference})"
        )));
    }
    for ch in channels.iter_mut() {
        for v in ch.iter_mut() {
            *v /= reference;
        }
    }
    Ok(reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn sine_periods(periods: f64, fs: f64, period_s: f64) -> Vec<f64> {
        let n = (periods * period_s * fs) as usize;
        (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / (period_s * fs)).sin())
            .collect()
    }

    #[test]
    fn sinusoid_ten_periods_nine_cycles() {
        let x = sine_periods(10.0, 350.0, 1.5);
        let set = segment_cycles(&x, 350.0, 0.5, 0.25).unwrap();
        assert_eq!(set.boundaries.len(), 10);
        assert_eq!(set.n_cycles(), 9);
        // Minima sit at 3/4 of each period.
        let expect0 = (0.75 * 1.5 * 350.0) as usize;
        assert!((set.boundaries[0] as i64 - expect0 as i64).abs() <= 2);
    }

    #[test]
    fn flat_signal_is_an_error() {
        let x = vec![0.3; 1000];
        assert!(matches!(
            segment_cycles(&x, 350.0, 0.5, 0.25),
            Err(Error::Segmentation(_))
        ));
    }

    #[test]
    fn single_extremum_is_an_error() {
        let x = sine_periods(1.0, 350.0, 1.5);
        assert!(segment_cycles(&x, 350.0, 0.5, 0.25).is_err());
    }

    #[test]
    fn close_spurious_minima_are_thinned() {
        // A small notch near each true minimum must not double-count.
        let fs = 350.0;
        let x: Vec<f64> = (0..(6.0 * fs) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                (2.0 * std::f64::consts::PI * t / 1.5).sin()
                    + 0.3 * (2.0 * std::f64::consts::PI * t * 8.0).sin()
            })
            .collect();
        let set = segment_cycles(&x, fs, 0.5, 0.25).unwrap();
        assert_eq!(set.boundaries.len(), 4);
    }

    #[test]
    fn identical_cycles_have_zero_variance() {
        let one: Vec<f64> = (0..100).map(|i| (i as f64 / 10.0).sin()).collect();
        let mut channel = Vec::new();
        for _ in 0..4 {
            channel.extend_from_slice(&one);
        }
        let set = CycleSet {
            boundaries: vec![0, 100, 200, 300, 400],
        };
        let (mean, var) = average_cycles(&channel, &set).unwrap();
        assert_eq!(mean.len(), 100);
        for k in 0..100 {
            assert_abs_diff_eq!(mean[k], one[k], epsilon = 1e-12);
            assert_abs_diff_eq!(var[k], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_cycle_mean_and_population_variance() {
        let channel = vec![1.0, 1.0, 3.0, 3.0];
        let set = CycleSet {
            boundaries: vec![0, 2, 4],
        };
        let (mean, var) = average_cycles(&channel, &set).unwrap();
        for &m in &mean {
            assert_relative_eq!(m, 2.0, max_relative = 1e-12);
        }
        for &v in &var {
            assert_relative_eq!(v, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn noisy_cycle_mean_converges() {
        // Deterministic pseudo-noise; mean error shrinks roughly as 1/sqrt(N).
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let period = 120usize;
        let clean: Vec<f64> = (0..period)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / period as f64).sin())
            .collect();
        let rms_err = |n_cycles: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let mut channel = Vec::new();
            for _ in 0..n_cycles {
                channel.extend(clean.iter().map(|&v| v + rng.gen_range(-0.5..0.5)));
            }
            let set = CycleSet {
                boundaries: (0..=n_cycles).map(|k| k * period).collect(),
            };
            let (mean, _) = average_cycles(&channel, &set).unwrap();
            let se: f64 = mean
                .iter()
                .zip(&clean)
                .map(|(m, c)| (m - c) * (m - c))
                .sum::<f64>()
                / period as f64;
            se.sqrt()
        };
        let few = rms_err(4, &mut rng);
        let many = rms_err(64, &mut rng);
        assert!(many < few / 2.0, "few {few}, many {many}");
    }

    #[test]
    fn fewer_than_two_cycles_rejected() {
        let set = CycleSet {
            boundaries: vec![0, 50],
        };
        assert!(average_cycles(&vec![0.0; 100], &set).is_err());
    }

    #[test]
    fn normalization_scale_invariance_and_self_peak() {
        let period = 100usize;
        let fdi: Vec<f64> = (0..4 * period)
            .map(|i| 0.5 + 0.4 * (2.0 * std::f64::consts::PI * i as f64 / period as f64).sin())
            .collect();
        let other: Vec<f64> = fdi.iter().map(|v| 0.3 * v).collect();
        let set = CycleSet {
            boundaries: (0..=4).map(|k| k * period).collect(),
        };

        let mut a = vec![fdi.clone(), other.clone()];
        normalize_emg(&mut a, 0, &set).unwrap();
        let (mean, _) = average_cycles(&a[0], &set).unwrap();
        let peak = mean.iter().cloned().fold(0.0f64, f64::max);
        assert_relative_eq!(peak, 1.0, max_relative = 1e-12);

        // Scaling all raw channels by 2 leaves the normalized output alone.
        let mut b = vec![
            fdi.iter().map(|v| 2.0 * v).collect::<Vec<_>>(),
            other.iter().map(|v| 2.0 * v).collect::<Vec<_>>(),
        ];
        normalize_emg(&mut b, 0, &set).unwrap();
        for (x, y) in a[1].iter().zip(&b[1]) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_reference_is_an_error() {
        let set = CycleSet {
            boundaries: vec![0, 10, 20],
        };
        let mut chans = vec![vec![0.0; 30]];
        assert!(matches!(
            normalize_emg(&mut chans, 0, &set),
            Err(Error::Normalization(_))
        ));
    }
}
