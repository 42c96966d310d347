//! Feedback pipelines and the Monte Carlo metrics used to compare them.

mod metrics;
mod pipeline;

pub use metrics::{
    max_gram_eigenvalue, mean_and_stderr, normalized_gain, normalized_gain_of, paired_difference,
    qpsk_ser, qpsk_ser_blocked, ser_fixed_channel, time_online, DataLinkSpec, GainRun, Metric,
    MetricRecord, RecordConfig, SerRun, CSV_HEADER, GAIN_BOUND_SLACK, SYMBOLS_PER_BLOCK,
    TIMING_WARMUP,
};
pub use pipeline::{
    BaselinePipeline, DlPipeline, EigenBeamformer, Link, PerfectCsiPipeline, PilotContext,
    Pipeline, Scheme,
};
