//! Scattering sphere covered with N film grains.
//!
//! One grain subsystem per grain, each coupled only to its matching
//! incident direction, plus an observer who reads whichever grain fired.
//! Only one-hot exposure patterns ever acquire amplitude, so the sparse
//! support stays O(N) inside a 2^N-sized grain sector.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use crate::dynamics::{ConditionedSwaps, UnitaryOp};
use crate::error::{Error, Result};
use crate::experiments::{
    assemble_report, run_protocol, ExperimentConfig, ExperimentReport, Payload, RecordMap,
};
use crate::hilbert::layout::SystemLayout;
use crate::hilbert::state::StateVector;

pub const NAME: &str = "mott-sphere";

fn grain_name(j: usize) -> String {
    format!("grain:{j}")
}

fn dir_label(j: usize) -> String {
    format!("dir:{j}")
}

fn layout(grains: usize) -> Result<Arc<SystemLayout>> {
    let mut subsystems = vec![(
        "direction".to_string(),
        (0..grains).map(dir_label).collect::<Vec<_>>(),
    )];
    for j in 0..grains {
        subsystems.push((grain_name(j), vec!["unexposed".into(), "exposed".into()]));
    }
    let mut obs_labels = vec!["blank".to_string()];
    obs_labels.extend((0..grains).map(|j| grain_name(j)));
    obs_labels.push("other1".into());
    subsystems.push(("Obs".to_string(), obs_labels));
    SystemLayout::new(subsystems)
}

fn version(layout: &Arc<SystemLayout>, grains: usize, direction: usize) -> Result<StateVector> {
    let dir = dir_label(direction);
    let grain_names: Vec<String> = (0..grains).map(grain_name).collect();
    let mut assignment: Vec<(&str, &str)> = vec![("direction", dir.as_str())];
    for name in &grain_names {
        assignment.push((name.as_str(), "unexposed"));
    }
    assignment.push(("Obs", "blank"));
    StateVector::basis_state(layout, &assignment)
}

/// Per-grain exposure flips, then per-grain observer reads.
fn pipeline(layout: &Arc<SystemLayout>, grains: usize) -> Result<Vec<UnitaryOp>> {
    let mut ops = Vec::with_capacity(2 * grains);
    for j in 0..grains {
        let dir = dir_label(j);
        let grain = grain_name(j);
        ops.push(UnitaryOp::controlled_flip(
            layout,
            "direction",
            &[dir.as_str()],
            grain.as_str(),
            "unexposed",
            "exposed",
        )?);
    }
    for j in 0..grains {
        let grain = grain_name(j);
        let record = grain_name(j);
        ops.push(UnitaryOp::conditioned_permutation(
            layout,
            &[grain.as_str()],
            "Obs",
            &[ConditionedSwaps {
                when: vec!["exposed"],
                swaps: vec![("blank", record.as_str())],
            }],
        )?);
    }
    Ok(ops)
}

fn record_map(grains: usize) -> RecordMap {
    let mut map = RecordMap::new();
    for j in 0..grains {
        let mut record = std::collections::BTreeMap::new();
        for i in 0..grains {
            record.insert(
                grain_name(i),
                if i == j { "exposed" } else { "unexposed" }.to_string(),
            );
        }
        record.insert("Obs".to_string(), grain_name(j));
        let mut outcome = std::collections::BTreeMap::new();
        outcome.insert("direction".to_string(), dir_label(j));
        map.insert(record, outcome);
    }
    map
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let grains = config.grains;
    if grains < 2 {
        return Err(Error::config("grains", "need at least 2 grains"));
    }
    let uniform = Complex64::new(1.0 / (grains as f64).sqrt(), 0.0);
    let default = vec![uniform; grains];
    let (amps, normalized) = config.resolve_amplitudes(grains, &default)?;

    let layout = layout(grains)?;
    let versions: Vec<StateVector> = (0..grains)
        .map(|j| version(&layout, grains, j))
        .collect::<Result<_>>()?;
    let terms: Vec<(Complex64, &StateVector)> =
        amps.iter().copied().zip(versions.iter()).collect();
    let initial = StateVector::superpose(&terms)?;
    let pipeline = pipeline(&layout, grains)?;

    let grain_names: Vec<String> = (0..grains).map(grain_name).collect();
    let mut record_subsystems: Vec<&str> = grain_names.iter().map(String::as_str).collect();
    record_subsystems.push("Obs");
    let expected: Vec<String> = (0..grains).map(grain_name).collect();
    let expected_refs: Vec<&str> = expected.iter().map(String::as_str).collect();

    let outcome = run_protocol(
        &initial,
        &pipeline,
        &record_subsystems,
        "Obs",
        &expected_refs,
        &["direction"],
        &record_map(grains),
        &pipeline,
        (&versions[0], &versions[1]),
        config.isolation_samples,
        config.seed,
    )?;

    // Exposure bookkeeping straight off the final sparse support.
    let grain_positions: Vec<usize> = grain_names
        .iter()
        .map(|n| layout.position_of(n))
        .collect::<Result<_>>()?;
    let mut multi_exposure_weight = 0.0;
    for (idx, amp) in outcome.final_state.entries() {
        let exposed = grain_positions
            .iter()
            .filter(|&&p| layout.label_at(idx, p) == "exposed")
            .count();
        if exposed >= 2 {
            multi_exposure_weight += amp.norm_sqr();
        }
    }
    let exposed_grain_per_branch: Vec<usize> = outcome
        .branches
        .iter()
        .map(|b| {
            let fired: Vec<usize> = (0..grains)
                .filter(|&j| b.record[&grain_name(j)] == "exposed")
                .collect();
            debug_assert_eq!(fired.len(), 1);
            fired[0]
        })
        .collect();

    let payload = Payload::MottSphere {
        exposed_grain_per_branch,
        multi_exposure_weight,
    };

    Ok(assemble_report(
        NAME,
        config.echo_with(NAME, Some(&amps), None),
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
    fn twelve_grains_give_twelve_single_exposure_branches() {
        let report = run(&ExperimentConfig::default()).unwrap();
        assert_eq!(report.branch_count, 12);
        match &report.payload {
            Payload::MottSphere { exposed_grain_per_branch, multi_exposure_weight } => {
                let mut seen = exposed_grain_per_branch.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..12).collect::<Vec<_>>());
                assert_eq!(*multi_exposure_weight, 0.0);
            }
            other => panic!("wrong payload: {other:?}"),
        }
        for b in &report.branches {
            assert_abs_diff_eq!(b.weight_sqr, 1.0 / 12.0, epsilon = 1e-12);
        }
        assert_eq!(report.support.reduced_rank, 12);
        assert!(report.diagnostics.pass);
    }

    #[test]
    fn two_grains_one_direction() {
        let mut config = ExperimentConfig::default();
        config.grains = 2;
        config.amplitudes = Some(vec![[1.0, 0.0], [0.0, 0.0]]);
        let report = run(&config).unwrap();
        assert_eq!(report.branch_count, 1);
        assert_eq!(report.branches[0].record["grain:0"], "exposed");
        assert_eq!(report.branches[0].record["grain:1"], "unexposed");
        assert_eq!(report.branches[0].record["Obs"], "grain:0");
    }

    #[test]
    fn grain_count_below_two_rejected() {
        let mut config = ExperimentConfig::default();
        config.grains = 0;
        assert!(run(&config).is_err());
        config.grains = 1;
        assert!(run(&config).is_err());
    }
}
