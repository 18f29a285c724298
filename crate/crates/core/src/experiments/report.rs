//! Structured experiment results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::branching::{Branch, IsolationReport, SupportReport};
use crate::experiments::config::ExperimentConfig;

/// Tolerance applied by the report-level diagnostic verdict.
pub const DIAGNOSTIC_TOLERANCE: f64 = 1e-12;

/// Fixed wording attached to the Born-weight block in every report.
pub const BORN_POSTULATE_LABEL: &str =
    "external Born postulate: probability = |branch weight|^2; imposed on top of the engine, not derived by it";

/// One branch, flattened for serialization: its record labels, squared
/// weight, and global phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSummary {
    pub record: BTreeMap<String, String>,
    pub weight_sqr: f64,
    pub phase_rad: f64,
}

impl BranchSummary {
    pub fn from_branch(branch: &Branch) -> Self {
        BranchSummary {
            record: branch.record.clone(),
            weight_sqr: branch.weight.norm_sqr(),
            phase_rad: branch.weight.arg(),
        }
    }
}

/// Branch weights under the squared-modulus rule, explicitly labeled as an
/// external postulate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BornWeights {
    pub label: String,
    pub weights: Vec<f64>,
}

impl BornWeights {
    pub fn from_branches(branches: &[Branch]) -> Self {
        BornWeights {
            label: BORN_POSTULATE_LABEL.to_string(),
            weights: branches.iter().map(|b| b.weight.norm_sqr()).collect(),
        }
    }
}

/// Report-level pass/fail verdict on the classicality diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub tolerance: f64,
    pub isolation_ok: bool,
    pub leakage_ok: bool,
    pub perception_ok: bool,
    pub pruned_mass_ok: bool,
    pub pass: bool,
}

impl DiagnosticSummary {
    pub fn evaluate(
        isolation: &IsolationReport,
        support: &SupportReport,
        perception_defect: f64,
        pruned_mass: f64,
    ) -> Self {
        let tol = DIAGNOSTIC_TOLERANCE;
        let isolation_ok = isolation.linearity_residual <= tol
            && isolation.branch_fidelity_deviation <= tol
            && isolation.cross_talk <= tol;
        let leakage_ok = support.leakage <= tol;
        let perception_ok = perception_defect <= tol;
        let pruned_mass_ok = pruned_mass < tol;
        DiagnosticSummary {
            tolerance: tol,
            isolation_ok,
            leakage_ok,
            perception_ok,
            pruned_mass_ok,
            pass: isolation_ok && leakage_ok && perception_ok && pruned_mass_ok,
        }
    }
}

/// Conditioning check row for the beam cascade.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditioningCheck {
    pub first_record: String,
    pub fidelity: f64,
}

/// One reconstructed track.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackSummary {
    pub direction: String,
    pub cells: Vec<usize>,
}

/// Experiment-specific results.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    SternGerlach {},
    TwoObserver {
        /// Per branch: both records denote the same outcome and the second
        /// observer's register carries the agreement marker.
        agreement: Vec<bool>,
        all_agree: bool,
        obs2_leakage: f64,
    },
    MottSphere {
        exposed_grain_per_branch: Vec<usize>,
        /// Squared amplitude on exposure patterns with two or more grains.
        multi_exposure_weight: f64,
    },
    DoubleSlit {
        screen_width_m: f64,
        fringe_spacing_m: f64,
        cell_centers_m: Vec<f64>,
        /// Pre-detection |amplitude|² per cell.
        intensity: Vec<f64>,
        exposed_cell_per_branch: Vec<usize>,
    },
    BellAspect {
        analyzer_angle_a_rad: f64,
        analyzer_angle_b_rad: f64,
        /// E(θa, θb) = Σ ± |weight|² under the Born postulate layer.
        correlation: f64,
        branch_outcome_products: Vec<f64>,
        /// Pipeline operators whose acting factors span both sides. The
        /// builder produces none; the count is recomputed structurally.
        cross_side_ops: usize,
    },
    BeamCascade {
        leaf_count: usize,
        conditioning: Vec<ConditioningCheck>,
    },
    TrackChamber {
        tracks: Vec<TrackSummary>,
        /// Squared amplitude on basis states whose layer cells do not all
        /// match the direction label.
        non_ballistic_weight: f64,
    },
}

/// Full result of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub normalization_applied: bool,
    pub branch_count: usize,
    pub branches: Vec<BranchSummary>,
    pub born_weights: BornWeights,
    pub isolation: IsolationReport,
    pub support: SupportReport,
    pub perception_matrix: Vec<Vec<f64>>,
    pub payload: Payload,
    pub pruned_mass: f64,
    pub diagnostics: DiagnosticSummary,
    /// Measured, not serialized: reports must be byte-identical across
    /// identical invocations.
    #[serde(skip)]
    pub wall_time_ms: Option<f64>,
}

impl ExperimentReport {
    /// Canonical JSON form: pretty-printed, trailing newline.
    pub fn to_json(&self) -> crate::error::Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> crate::error::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat CSV of the branch table: record columns, squared weight, phase,
    /// Born weight. Diagnostics stay JSON-only.
    pub fn to_csv(&self) -> crate::error::Result<String> {
        let columns: Vec<String> = self
            .branches
            .first()
            .map(|b| b.record.keys().cloned().collect())
            .unwrap_or_default();
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["branch".to_string()];
        header.extend(columns.iter().map(|c| format!("record.{c}")));
        header.extend(["weight_sqr", "phase_rad", "born_weight"].map(String::from));
        writer.write_record(&header).map_err(csv_error)?;
        for (i, b) in self.branches.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(
                columns
                    .iter()
                    .map(|c| b.record.get(c).cloned().unwrap_or_default()),
            );
            row.push(b.weight_sqr.to_string());
            row.push(b.phase_rad.to_string());
            row.push(self.born_weights.weights[i].to_string());
            writer.write_record(&row).map_err(csv_error)?;
        }
        let bytes = writer.into_inner().map_err(|e| csv_error(e.into_error()))?;
        String::from_utf8(bytes)
            .map_err(|e| crate::error::Error::schema(format!("csv not utf-8: {e}")))
    }
}

fn csv_error(e: impl std::fmt::Display) -> crate::error::Error {
    crate::error::Error::schema(format!("csv write failed: {e}"))
}
