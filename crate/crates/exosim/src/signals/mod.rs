//! Signal-processing pipeline for recorded sessions and simulator output:
//! Butterworth filtering, rational resampling, bias removal, EMG envelopes,
//! cycle segmentation and per-cycle averaging.

pub mod cycles;
pub mod envelope;
pub mod filter;
pub mod resample;
pub mod session;

pub use cycles::{average_cycles, normalize_emg, segment_cycles, CycleSet};
pub use envelope::{rectify, rms_envelope};
pub use filter::{design_filter, filter_zero_phase, FilterKind, Sos};
pub use resample::resample;
pub use session::{
    load_session, process_session, save_session, synthetic_session, PipelineParams,
    ProcessedSession, SessionData, SyntheticShape,
};

/// Subtract the mean of the first `n_samples` from the whole channel; the
/// load cell's standing offset is estimated from the quiet lead-in. `n = 0`
/// is a no-op; `n` is clamped to the channel length.
pub fn remove_bias(channel: &[f64], n_samples: usize) -> Vec<f64> {
    let n = n_samples.min(channel.len());
    if n == 0 {
        return channel.to_vec();
    }
    let bias = channel[..n].iter().sum::<f64>() / n as f64;
    channel.iter().map(|v| v - bias).collect()
}
