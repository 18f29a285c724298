//! Scenario builders: layouts, initial states, and unitary pipelines for
//! the measurement setups the engine ships, plus the shared runner that
//! produces an [`ExperimentReport`] from any of them.

pub mod beam_cascade;
pub mod bell_aspect;
pub mod config;
pub mod double_slit;
pub mod mott_sphere;
pub mod report;
pub mod stern_gerlach;
pub mod track_chamber;
pub mod two_observer;

use std::collections::BTreeMap;

pub use config::{ExperimentConfig, SplitterSpec};
pub use report::{
    BornWeights, BranchSummary, ConditioningCheck, DiagnosticSummary, ExperimentReport, Payload,
    TrackSummary,
};

use crate::branching::{
    self, Branch, IsolationReport, SupportReport,
};
use crate::dynamics::{apply_pipeline, UnitaryOp};
use crate::error::{Error, Result};
use crate::hilbert::state::StateVector;

/// Record tuple → expected outcome labels.
pub type RecordMap = BTreeMap<BTreeMap<String, String>, BTreeMap<String, String>>;

/// Every experiment the engine ships, in CLI order.
pub const EXPERIMENT_NAMES: [&str; 7] = [
    "stern-gerlach",
    "two-observer",
    "mott-sphere",
    "double-slit",
    "bell-aspect",
    "beam-cascade",
    "track-chamber",
];

/// Runs one experiment by CLI name.
pub fn run(name: &str, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.check_experiment_name(name)?;
    match name {
        "stern-gerlach" => stern_gerlach::run(config),
        "two-observer" => two_observer::run(config),
        "mott-sphere" => mott_sphere::run(config),
        "double-slit" => double_slit::run(config),
        "bell-aspect" => bell_aspect::run(config),
        "beam-cascade" => beam_cascade::run(config),
        "track-chamber" => track_chamber::run(config),
        other => Err(Error::config(
            "experiment",
            format!("unknown experiment `{other}`"),
        )),
    }
}

/// Builds one record-map entry from label slices.
pub(crate) fn map_entry(
    record: &[(&str, &str)],
    outcome: &[(&str, &str)],
) -> (BTreeMap<String, String>, BTreeMap<String, String>) {
    let to_map = |pairs: &[(&str, &str)]| {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect::<BTreeMap<String, String>>()
    };
    (to_map(record), to_map(outcome))
}

/// Everything the shared runner computes about a finished protocol.
pub(crate) struct ProtocolOutcome {
    pub final_state: StateVector,
    pub branches: Vec<Branch>,
    pub isolation: IsolationReport,
    pub support: SupportReport,
    pub perception: Vec<Vec<f64>>,
    pub perception_defect: f64,
}

/// Applies the pipeline and computes the full diagnostic set: branch
/// decomposition, isolation residuals for the two version states, observer
/// record support, and the perception matrix.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_protocol(
    initial: &StateVector,
    pipeline: &[UnitaryOp],
    record_subsystems: &[&str],
    observer: &str,
    expected_observer_records: &[&str],
    outcome_subsystems: &[&str],
    record_map: &RecordMap,
    isolation_pipeline: &[UnitaryOp],
    versions: (&StateVector, &StateVector),
    samples: usize,
    seed: u64,
) -> Result<ProtocolOutcome> {
    let final_state = apply_pipeline(pipeline, initial)?;
    let branches = branching::decompose(&final_state, record_subsystems)?;
    let isolation = branching::verify_isolation(
        isolation_pipeline,
        versions.0,
        versions.1,
        record_subsystems,
        samples,
        seed,
    )?;
    let support =
        branching::record_support(&final_state, observer, expected_observer_records)?;
    let perception_matrix =
        branching::perception_matrix(&branches, outcome_subsystems, record_map)?;
    let perception_defect = branching::identity_defect_real(&perception_matrix);
    let perception = (0..perception_matrix.nrows())
        .map(|i| {
            (0..perception_matrix.ncols())
                .map(|j| perception_matrix[(i, j)])
                .collect()
        })
        .collect();
    Ok(ProtocolOutcome {
        final_state,
        branches,
        isolation,
        support,
        perception,
        perception_defect,
    })
}

/// Assembles the report skeleton shared by every experiment.
pub(crate) fn assemble_report(
    name: &str,
    config_echo: ExperimentConfig,
    normalization_applied: bool,
    outcome: &ProtocolOutcome,
    payload: Payload,
    started: std::time::Instant,
) -> ExperimentReport {
    let branches: Vec<BranchSummary> = outcome
        .branches
        .iter()
        .map(BranchSummary::from_branch)
        .collect();
    let born_weights = BornWeights::from_branches(&outcome.branches);
    let pruned_mass = outcome.final_state.pruned_mass();
    let diagnostics = DiagnosticSummary::evaluate(
        &outcome.isolation,
        &outcome.support,
        outcome.perception_defect,
        pruned_mass,
    );
    ExperimentReport {
        experiment: name.to_string(),
        config: config_echo,
        normalization_applied,
        branch_count: branches.len(),
        branches,
        born_weights,
        isolation: outcome.isolation.clone(),
        support: outcome.support.clone(),
        perception_matrix: outcome.perception.clone(),
        payload,
        pruned_mass,
        diagnostics,
        wall_time_ms: Some(started.elapsed().as_secs_f64() * 1e3),
    }
}
