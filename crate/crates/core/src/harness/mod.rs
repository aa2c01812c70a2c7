//! Regret accounting, experiment configuration and orchestration.

pub mod baseline;
pub mod config;
pub mod generate;
pub mod plot;
pub mod regret;
pub mod run;

pub use baseline::UniformPairLearner;
pub use config::{Algorithm, ExperimentConfig, InstanceSpec, SCHEMA_VERSION};
pub use generate::{random_instance, Instance, RandomInstanceSpec};
pub use regret::{
    best_policy, claim_checks, preference_regret_increment, score_regret_increment,
    sublinearity_metric, CheckResult, Verdict,
};
pub use run::{
    curve_rows, read_curve_csv, run_experiment, run_on_instance, write_curve_csv, write_outputs,
    Aggregate, AnyLearner, CurveRow, ExperimentResult, RegretCurve, RoundRecord, RunParams,
    RunRecord, Summary,
};
