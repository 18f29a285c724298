//! Singlet pair, local analyzers, local detector pairs, local observers.
//!
//! The source prepares the two-spin singlet; everything downstream acts on
//! one side only. The correlation E(θa, θb) reported in the payload is a
//! Born-postulate quantity computed from the branch weights — the pipeline
//! itself contains no cross-side operator, and the payload counts that
//! structurally.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::{ConditionedSwaps, UnitaryOp};
use crate::error::Result;
use crate::experiments::{
    assemble_report, map_entry, run_protocol, ExperimentConfig, ExperimentReport, Payload,
    RecordMap,
};
use crate::hilbert::layout::SystemLayout;
use crate::hilbert::state::StateVector;

pub const NAME: &str = "bell-aspect";

const SIDE_A: [&str; 4] = ["spinA", "DetA-", "DetA+", "ObsA"];
const SIDE_B: [&str; 4] = ["spinB", "DetB-", "DetB+", "ObsB"];

fn layout() -> Result<Arc<SystemLayout>> {
    let spin = vec!["-".to_string(), "+".to_string()];
    let det = vec!["no".to_string(), "yes".to_string()];
    let obs = vec![
        "blank".to_string(),
        "yes,no".to_string(),
        "no,yes".to_string(),
        "other1".to_string(),
    ];
    SystemLayout::new(vec![
        ("spinA".into(), spin.clone()),
        ("spinB".into(), spin),
        ("DetA-".into(), det.clone()),
        ("DetA+".into(), det.clone()),
        ("DetB-".into(), det.clone()),
        ("DetB+".into(), det),
        ("ObsA".into(), obs.clone()),
        ("ObsB".into(), obs),
    ])
}

fn component(layout: &Arc<SystemLayout>, spin_a: &str, spin_b: &str) -> Result<StateVector> {
    StateVector::basis_state(
        layout,
        &[
            ("spinA", spin_a),
            ("spinB", spin_b),
            ("DetA-", "no"),
            ("DetA+", "no"),
            ("DetB-", "no"),
            ("DetB+", "no"),
            ("ObsA", "blank"),
            ("ObsB", "blank"),
        ],
    )
}

/// Analyzer rotation by θ about the beam axis, on a spin factor with basis
/// order (−, +): maps the ±θ spin eigenstates onto the detector basis.
fn analyzer(layout: &Arc<SystemLayout>, spin: &str, theta: f64) -> Result<UnitaryOp> {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = Complex64::new((theta / 2.0).sin(), 0.0);
    let kernel = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    UnitaryOp::from_dense_kernel(layout, &[spin], kernel)
}

fn side_pipeline(
    layout: &Arc<SystemLayout>,
    spin: &str,
    det_minus: &str,
    det_plus: &str,
    obs: &str,
    theta: f64,
) -> Result<Vec<UnitaryOp>> {
    Ok(vec![
        analyzer(layout, spin, theta)?,
        UnitaryOp::controlled_flip(layout, spin, &["-"], det_minus, "no", "yes")?,
        UnitaryOp::controlled_flip(layout, spin, &["+"], det_plus, "no", "yes")?,
        UnitaryOp::conditioned_permutation(
            layout,
            &[det_minus, det_plus],
            obs,
            &[
                ConditionedSwaps { when: vec!["yes", "no"], swaps: vec![("blank", "yes,no")] },
                ConditionedSwaps { when: vec!["no", "yes"], swaps: vec![("blank", "no,yes")] },
                ConditionedSwaps { when: vec!["yes", "yes"], swaps: vec![("blank", "other1")] },
            ],
        )?,
    ])
}

fn record_map() -> RecordMap {
    let mut map = RecordMap::new();
    for (obs_a, spin_a) in [("yes,no", "-"), ("no,yes", "+")] {
        for (obs_b, spin_b) in [("yes,no", "-"), ("no,yes", "+")] {
            let det_a = if spin_a == "-" { ("yes", "no") } else { ("no", "yes") };
            let det_b = if spin_b == "-" { ("yes", "no") } else { ("no", "yes") };
            let (k, v) = map_entry(
                &[
                    ("DetA-", det_a.0),
                    ("DetA+", det_a.1),
                    ("DetB-", det_b.0),
                    ("DetB+", det_b.1),
                    ("ObsA", obs_a),
                    ("ObsB", obs_b),
                ],
                &[("spinA", spin_a), ("spinB", spin_b)],
            );
            map.insert(k, v);
        }
    }
    map
}

/// ±1 outcome denoted by an observer record.
fn outcome_sign(record: &str) -> f64 {
    if record == "no,yes" {
        1.0
    } else {
        -1.0
    }
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let theta_a = config.analyzer_angle_a_rad;
    let theta_b = config.analyzer_angle_b_rad;

    let layout = layout()?;
    let v1 = component(&layout, "-", "+")?;
    let v2 = component(&layout, "+", "-")?;
    let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let initial = StateVector::superpose(&[(inv, &v1), (-inv, &v2)])?;

    let mut pipeline = side_pipeline(&layout, "spinA", "DetA-", "DetA+", "ObsA", theta_a)?;
    pipeline.extend(side_pipeline(&layout, "spinB", "DetB-", "DetB+", "ObsB", theta_b)?);

    let cross_side_ops = pipeline
        .iter()
        .filter(|op| {
            let acting = op.acting_subsystems();
            let touches_a = acting.iter().any(|s| SIDE_A.contains(&s.as_str()));
            let touches_b = acting.iter().any(|s| SIDE_B.contains(&s.as_str()));
            touches_a && touches_b
        })
        .count();

    let outcome = run_protocol(
        &initial,
        &pipeline,
        &["DetA-", "DetA+", "DetB-", "DetB+", "ObsA", "ObsB"],
        "ObsA",
        &["yes,no", "no,yes"],
        &["spinA", "spinB"],
        &record_map(),
        &pipeline,
        (&v1, &v2),
        config.isolation_samples,
        config.seed,
    )?;

    let branch_outcome_products: Vec<f64> = outcome
        .branches
        .iter()
        .map(|b| outcome_sign(&b.record["ObsA"]) * outcome_sign(&b.record["ObsB"]))
        .collect();
    let correlation = outcome
        .branches
        .iter()
        .zip(&branch_outcome_products)
        .map(|(b, sign)| b.weight.norm_sqr() * sign)
        .sum();

    let payload = Payload::BellAspect {
        analyzer_angle_a_rad: theta_a,
        analyzer_angle_b_rad: theta_b,
        correlation,
        branch_outcome_products,
        cross_side_ops,
    };

    Ok(assemble_report(
        NAME,
        config.echo_with(NAME, None, None),
        false,
        &outcome,
        payload,
        started,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn correlation_of(report: &ExperimentReport) -> f64 {
        match &report.payload {
            Payload::BellAspect { correlation, .. } => *correlation,
            other => panic!("wrong payload: {other:?}"),
        }
    }

    fn run_at(theta_a: f64, theta_b: f64) -> ExperimentReport {
        let mut config = ExperimentConfig::default();
        config.analyzer_angle_a_rad = theta_a;
        config.analyzer_angle_b_rad = theta_b;
        config.isolation_samples = 20;
        run(&config).unwrap()
    }

    #[test]
    fn equal_settings_anticorrelate_in_two_branches() {
        let report = run_at(0.0, 0.0);
        assert_eq!(report.branch_count, 2);
        assert_abs_diff_eq!(correlation_of(&report), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_settings_decorrelate() {
        let report = run_at(0.0, PI / 2.0);
        assert_abs_diff_eq!(correlation_of(&report), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sixty_degrees_matches_oracle() {
        let report = run_at(0.0, PI / 3.0);
        assert_abs_diff_eq!(correlation_of(&report), -0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(
            correlation_of(&report),
            oracle::singlet_correlation(0.0, PI / 3.0),
            epsilon = 1e-10
        );
    }

    #[test]
    fn correlation_depends_only_on_angle_difference() {
        let shift = 0.713;
        let a = correlation_of(&run_at(0.2, 1.1));
        let b = correlation_of(&run_at(0.2 + shift, 1.1 + shift));
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn no_cross_side_operators() {
        let report = run_at(0.3, 1.7);
        match &report.payload {
            Payload::BellAspect { cross_side_ops, .. } => assert_eq!(*cross_side_ops, 0),
            other => panic!("wrong payload: {other:?}"),
        }
        assert!(report.diagnostics.pass);
        assert_eq!(report.perception_matrix.len(), report.branch_count);
    }
}
