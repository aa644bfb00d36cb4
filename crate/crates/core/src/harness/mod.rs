//! Configuration, the training loop, evaluation, metrics and plots.

mod config;
mod eval;
mod metrics;
mod plot;
mod trainer;

pub use config::{Profile, RunConfig};
pub use eval::{best_of, eval_seeds, evaluate, format_wallclock, random_baseline, report_wallclock, EvalReport, WallclockRow};
pub use metrics::{
    metrics_header, read_metrics, read_timing, MetricsRecord, MetricsWriter, RecordKind, TimingRecord,
    TimingWriter, METRICS_SCHEMA, TIMING_SCHEMA,
};
pub use plot::{collect_series, moving_average, plot_runs, resample, PlotKind, PlotOptions, Series};
pub use trainer::{
    sweep, Checkpoint, RunSummary, Trainer, CHECKPOINT_FILE, CONFIG_FILE, METRICS_FILE, SUMMARY_FILE,
    TIMING_FILE,
};
