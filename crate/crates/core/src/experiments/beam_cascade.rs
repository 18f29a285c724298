//! Successive beam splittings with a which-branch detector at every stage.
//!
//! The 2^D-leaf path space is factored into D binary junction subsystems;
//! splitter k is a 2×2 unitary on junction k and detector k copies that
//! junction's bit. The observer reads the full leaf at the end. Because
//! records accumulate stage by stage, conditioning on early records must
//! reproduce a fresh simulation of the remaining stages — the payload
//! carries that check for every realized first record.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::branching::conditional_state;
use crate::dynamics::{apply_pipeline, ConditionedSwaps, UnitaryOp};
use crate::error::{Error, Result};
use crate::experiments::{
    assemble_report, run_protocol, ConditioningCheck, ExperimentConfig, ExperimentReport, Payload,
    RecordMap,
};
use crate::hilbert::layout::SystemLayout;
use crate::hilbert::state::StateVector;

pub const NAME: &str = "beam-cascade";

fn junction_name(k: usize) -> String {
    format!("path:{k}")
}

fn detector_name(k: usize) -> String {
    format!("det:{k}")
}

/// Leaf label for a bit pattern, e.g. "path:LRL".
fn leaf_label(bits: &[usize]) -> String {
    let mut label = String::from("path:");
    for &b in bits {
        label.push(if b == 0 { 'L' } else { 'R' });
    }
    label
}

fn leaves(depth: usize) -> Vec<Vec<usize>> {
    (0..1usize << depth)
        .map(|leaf| (0..depth).map(|k| (leaf >> (depth - 1 - k)) & 1).collect())
        .collect()
}

fn layout(depth: usize) -> Result<Arc<SystemLayout>> {
    let lr = vec!["left".to_string(), "right".to_string()];
    let mut subsystems = Vec::with_capacity(2 * depth + 1);
    for k in 0..depth {
        subsystems.push((junction_name(k), lr.clone()));
    }
    for k in 0..depth {
        subsystems.push((detector_name(k), lr.clone()));
    }
    let mut obs_labels = vec!["blank".to_string()];
    obs_labels.extend(leaves(depth).iter().map(|bits| leaf_label(bits)));
    obs_labels.push("other1".into());
    subsystems.push(("Obs".to_string(), obs_labels));
    SystemLayout::new(subsystems)
}

fn all_left(layout: &Arc<SystemLayout>, depth: usize, first_bit: &str) -> Result<StateVector> {
    let junctions: Vec<String> = (0..depth).map(junction_name).collect();
    let detectors: Vec<String> = (0..depth).map(detector_name).collect();
    let mut assignment: Vec<(&str, &str)> = Vec::new();
    for (k, name) in junctions.iter().enumerate() {
        assignment.push((name.as_str(), if k == 0 { first_bit } else { "left" }));
    }
    for name in &detectors {
        assignment.push((name.as_str(), "left"));
    }
    assignment.push(("Obs", "blank"));
    StateVector::basis_state(layout, &assignment)
}

fn splitter(
    layout: &Arc<SystemLayout>,
    k: usize,
    t: Complex64,
    r: Complex64,
) -> Result<UnitaryOp> {
    let kernel = DMatrix::from_row_slice(2, 2, &[t, -r.conj(), r, t.conj()]);
    let name = junction_name(k);
    UnitaryOp::from_dense_kernel(layout, &[name.as_str()], kernel)
}

fn detector_copy(layout: &Arc<SystemLayout>, k: usize) -> Result<UnitaryOp> {
    let junction = junction_name(k);
    let detector = detector_name(k);
    UnitaryOp::controlled_flip(
        layout,
        junction.as_str(),
        &["right"],
        detector.as_str(),
        "left",
        "right",
    )
}

fn observer_read(layout: &Arc<SystemLayout>, depth: usize) -> Result<UnitaryOp> {
    let detectors: Vec<String> = (0..depth).map(detector_name).collect();
    let controls: Vec<&str> = detectors.iter().map(String::as_str).collect();
    let leaf_labels: Vec<String> = leaves(depth).iter().map(|bits| leaf_label(bits)).collect();
    let rules: Vec<ConditionedSwaps> = leaves(depth)
        .iter()
        .zip(&leaf_labels)
        .map(|(bits, label)| ConditionedSwaps {
            when: bits.iter().map(|&b| if b == 0 { "left" } else { "right" }).collect(),
            swaps: vec![("blank", label.as_str())],
        })
        .collect();
    UnitaryOp::conditioned_permutation(layout, &controls, "Obs", &rules)
}

fn record_map(depth: usize) -> RecordMap {
    let mut map = RecordMap::new();
    for bits in leaves(depth) {
        let mut record = std::collections::BTreeMap::new();
        let mut outcome = std::collections::BTreeMap::new();
        for (k, &b) in bits.iter().enumerate() {
            let side = if b == 0 { "left" } else { "right" };
            record.insert(detector_name(k), side.to_string());
            outcome.insert(junction_name(k), side.to_string());
        }
        record.insert("Obs".to_string(), leaf_label(&bits));
        map.insert(record, outcome);
    }
    map
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate_cascade_depth()?;
    let depth = config.cascade_depth;
    let (splitters, normalized) = config.resolve_splitters()?;

    let layout = layout(depth)?;
    let initial = all_left(&layout, depth, "left")?;

    let mut pipeline = Vec::with_capacity(2 * depth + 1);
    for (k, &(t, r)) in splitters.iter().enumerate() {
        pipeline.push(splitter(&layout, k, t, r)?);
        pipeline.push(detector_copy(&layout, k)?);
    }
    pipeline.push(observer_read(&layout, depth)?);

    let detectors: Vec<String> = (0..depth).map(detector_name).collect();
    let junctions: Vec<String> = (0..depth).map(junction_name).collect();
    let mut record_subsystems: Vec<&str> = detectors.iter().map(String::as_str).collect();
    record_subsystems.push("Obs");
    let outcome_subsystems: Vec<&str> = junctions.iter().map(String::as_str).collect();
    let expected: Vec<String> = leaves(depth).iter().map(|bits| leaf_label(bits)).collect();
    let expected_refs: Vec<&str> = expected.iter().map(String::as_str).collect();

    // Versions for the isolation check: the two first-junction branches,
    // with the downstream pipeline (everything after the first splitter).
    let v1 = all_left(&layout, depth, "left")?;
    let v2 = all_left(&layout, depth, "right")?;

    let outcome = run_protocol(
        &initial,
        &pipeline,
        &record_subsystems,
        "Obs",
        &expected_refs,
        &outcome_subsystems,
        &record_map(depth),
        &pipeline[1..],
        (&v1, &v2),
        config.isolation_samples,
        config.seed,
    )?;

    // Conditioning check: fixing the first record and re-running the
    // remaining stages from the conditioned mid-state must reproduce the
    // conditioned final state.
    let first_detector = detector_name(0);
    let mid = apply_pipeline(&pipeline[..2], &initial)?;
    let mut conditioning = Vec::new();
    for side in ["left", "right"] {
        let conditioned_mid = match conditional_state(&mid, &[(first_detector.as_str(), side)]) {
            Ok(state) => state,
            Err(Error::EmptyConditional { .. }) => continue,
            Err(e) => return Err(e),
        };
        let fresh = apply_pipeline(&pipeline[2..], &conditioned_mid)?;
        let conditioned_final =
            conditional_state(&outcome.final_state, &[(first_detector.as_str(), side)])?;
        let fidelity = fresh.inner_product(&conditioned_final)?.norm();
        conditioning.push(ConditioningCheck {
            first_record: side.to_string(),
            fidelity,
        });
    }

    let payload = Payload::BeamCascade {
        leaf_count: 1 << depth,
        conditioning,
    };

    Ok(assemble_report(
        NAME,
        config.echo_with(NAME, None, Some(&splitters)),
        normalized,
        &outcome,
        payload,
        started,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_even_splitter_gives_half_half() {
        let mut config = ExperimentConfig::default();
        config.cascade_depth = 1;
        let report = run(&config).unwrap();
        assert_eq!(report.branch_count, 2);
        for b in &report.branches {
            assert_abs_diff_eq!(b.weight_sqr, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn depth_three_conditioning_matches_fresh_run() {
        let report = run(&ExperimentConfig::default()).unwrap();
        assert_eq!(report.branch_count, 8);
        match &report.payload {
            Payload::BeamCascade { leaf_count, conditioning } => {
                assert_eq!(*leaf_count, 8);
                assert_eq!(conditioning.len(), 2);
                for check in conditioning {
                    assert!(
                        check.fidelity >= 1.0 - 1e-12,
                        "conditioning on {} drifted: {}",
                        check.first_record,
                        check.fidelity
                    );
                }
            }
            other => panic!("wrong payload: {other:?}"),
        }
        assert!(report.diagnostics.pass);
    }

    #[test]
    fn fully_transmitting_cascade_is_deterministic() {
        let mut config = ExperimentConfig::default();
        config.splitters = Some(vec![
            SplitterSpecHelper::through(),
            SplitterSpecHelper::through(),
            SplitterSpecHelper::through(),
        ]);
        let report = run(&config).unwrap();
        assert_eq!(report.branch_count, 1);
        assert_eq!(report.branches[0].record["Obs"], "path:LLL");
    }

    #[test]
    fn depth_zero_rejected() {
        let mut config = ExperimentConfig::default();
        config.cascade_depth = 0;
        assert!(run(&config).is_err());
    }

    use crate::experiments::SplitterSpec;
    struct SplitterSpecHelper;
    impl SplitterSpecHelper {
        fn through() -> SplitterSpec {
            SplitterSpec {
                transmission: [1.0, 0.0],
                reflection: [0.0, 0.0],
            }
        }
    }
}
