//! Radar-inertial ego-velocity estimation with inertially derived box
//! constraints, plus a synthetic scenario generator, dataset I/O and odometry
//! metrics.

pub mod boxlsq;
pub mod config;
pub mod error;
pub mod estimator;
pub mod frames;
pub mod io;
pub mod metrics;
pub mod ransac;
pub mod runner;
pub mod sim;

pub use boxlsq::{solve_box_lsq, BoundState, BoxConstraint, BoxLsqSolution};
pub use config::{load_config, parse_config, RunConfig};
pub use error::{Error, ErrorKind, Result};
pub use estimator::{
    coarse_align, step, Alignment, BiasFilter, GammaBounds, Method, PipelineConfig, PipelineState,
    VelocityEstimate,
};
pub use frames::{ExtrinsicCalib, ImuSample, PoseSample, RadarScan, RadarTarget, Rotation, Stamped, Vec3};
pub use io::{load_dataset, save_dataset, Dataset, EstimateRecord};
pub use metrics::{ate, rmse_per_axis, AlignmentMode, AteReport, Trajectory};
pub use ransac::{detect_zero_velocity, ransac_estimate, RansacParams, RansacResult};
pub use runner::{evaluate, run_estimator, EvaluationReport, RunOutput, TimingStats};
pub use sim::{generate, Scenario, ScenarioConfig};
