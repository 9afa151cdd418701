//! Band-limited rational-ratio resampling: windowed-sinc interpolation with
//! the kernel cutoff at the lower of the two Nyquist rates.

use crate::error::{Error, Result};

/// Best rational approximation p/q of `x` with q bounded, by continued
/// fractions.
fn rational_approx(x: f64, max_den: u64) -> (u64, u64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    loop {
        let a = r.floor();
        let p2 = a as u64 * p1 + p0;
        let q2 = a as u64 * q1 + q0;
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a;
        if frac < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    (p1, q1.max(1))
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn blackman(u: f64) -> f64 {
    // u in [-1, 1].
    let t = std::f64::consts::PI * (u + 1.0);
    0.42 - 0.5 * (t).cos() + 0.08 * (2.0 * t).cos()
}

/// Resample `x` from `fs_in` to `fs_out`. Duration is preserved to within one
/// output sample; output sample j sits at input time j * fs_in / fs_out.
pub fn resample(x: &[f64], fs_in: f64, fs_out: f64) -> Result<Vec<f64>> {
    if !(fs_in > 0.0) || !(fs_out > 0.0) {
        return Err(Error::Parameter(format!(
            "sample rates must be > 0 (got {fs_in}, {fs_out})"
        )));
    }
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let ratio = fs_out / fs_in;
    if (ratio - 1.0).abs() < 1e-12 {
        return Ok(x.to_vec());
    }
    let (l, m) = rational_approx(ratio, 10_000);
    let n_in = x.len();
    let n_out = ((n_in as u64 * l + m - 1) / m) as usize;

    // Kernel cutoff relative to the input Nyquist; 16 output-rate lobes per
    // side give a steep, low-leakage response.
    let r = ratio.min(1.0);
    let half_width = (16.0 / r).ceil() as isize;

    // Odd reflection padding keeps edges unbiased.
    let sample = |i: isize| -> f64 {
        if i < 0 {
            let j = (-i) as usize;
            if j < n_in {
                2.0 * x[0] - x[j]
            } else {
                x[0]
            }
        } else if (i as usize) < n_in {
            x[i as usize]
        } else {
            let j = i as usize - (n_in - 1);
            if j < n_in {
                2.0 * x[n_in - 1] - x[n_in - 1 - j]
            } else {
                x[n_in - 1]
            }
        }
    };

    let mut y = Vec::with_capacity(n_out);
    for j in 0..n_out {
        let t = (j as u64 * m) as f64 / l as f64;
        let k0 = t.floor() as isize;
        let mut acc = 0.0;
        let mut norm = 0.0;
        for k in (k0 - half_width)..=(k0 + half_width + 1) {
            let u = t - k as f64;
            if u.abs() > half_width as f64 {
                continue;
            }
            let w = r * sinc(r * u) * blackman(u / half_width as f64);
            acc += w * sample(k);
            norm += w;
        }
        // Per-sample normalization removes polyphase gain ripple, so a
        // constant resamples to the same constant.
        y.push(acc / norm);
    }
    Ok(y)
}
