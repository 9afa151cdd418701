//! EMG rectification and sliding-window RMS envelope.

use crate::error::{Error, Result};

pub fn rectify(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.abs()).collect()
}

/// RMS over sliding windows [i*hop, i*hop + window); hop = window - overlap.
/// With the default window 30 / overlap 29 the output advances one sample per
/// step and has length len - window + 1.
pub fn rms_envelope(x: &[f64], window: usize, overlap: usize) -> Result<Vec<f64>> {
    if window == 0 || overlap >= window {
        return Err(Error::Parameter(format!(
            "need window > overlap >= 0 (got window {window}, overlap {overlap})"
        )));
    }
    if x.len() < window {
        return Err(Error::SignalLength(format!(
            "input ({} samples) shorter than RMS window ({window})",
            x.len()
        )));
    }
    let hop = window - overlap;
    let n_out = (x.len() - window) / hop + 1;
    let mut out = Vec::with_capacity(n_out);
    // Running sum of squares; rebuilding per window would be O(n*window).
    let mut sumsq: f64 = x[..window].iter().map(|v| v * v).sum();
    let mut start = 0usize;
    for _ in 0..n_out {
        out.push((sumsq / window as f64).max(0.0).sqrt());
        for k in 0..hop {
            if start + window + k >= x.len() {
                break;
            }
            sumsq -= x[start + k] * x[start + k];
            sumsq += x[start + window + k] * x[start + window + k];
        }
        start += hop;
    }
    Ok(out)
}
