//! Shared fixture for the criterion benchmarks: one mid-sized corrupted
//! instance so every kernel is timed on the same graph.

use permsync_core::synth::{generate, CorruptionModel, SynthConfig, SynthInstance};

/// A 30-image instance with a 10-point universe and a third of the
/// edges corrupted; large enough to exercise the kernels, small enough
/// to keep a full benchmark run short.
pub fn benchmark_instance() -> SynthInstance {
    generate(&SynthConfig {
        nodes: 30,
        universe: 10,
        edge_prob: 0.5,
        keypoint_prob: 0.8,
        model: CorruptionModel::Uniform { fraction: 0.3 },
        seed: 0,
    })
    .expect("benchmark configuration is valid")
}
