//! Weak-to-strong training of linear probes on synthetic Gaussian tasks.

pub mod bias_variance;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod task;
pub mod train;

pub use bias_variance::{run_bias_variance, BiasVarianceConfig, BiasVarianceReport, PointEstimate};
pub use model::{FeatureMap, LinearProbeModel};
pub use optim::{gdv, param_distance, Gdv, Optimizer};
pub use pipeline::{
    alpha_sweep, prepare, resolve_loss, train_student, trend_verdicts, w2s_pipeline, PipelineConfig, PreparedRun,
    SweepCell, SweepResult, SweepRow, Verdict,
};
pub use task::{Dataset, SyntheticTask, TaskData};
pub use train::{batch_gradient, train, GradientMode, LossSpec, TrainConfig, TrainReport, LOSS_NAMES};
