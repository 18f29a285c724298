//! Layered detector stack: straight tracks from repeated detection.
//!
//! A ballistic direction subsystem fires the matching cell in every layer,
//! so each final branch records one cell per layer and all of a branch's
//! cells share the direction index — a straight track. The observer reads
//! the first layer; deeper layers are redundant with it branch by branch.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use crate::dynamics::{ConditionedSwaps, UnitaryOp};
use crate::error::{Error, Result};
use crate::experiments::{
    assemble_report, run_protocol, ExperimentConfig, ExperimentReport, Payload, RecordMap,
    TrackSummary,
};
use crate::hilbert::layout::SystemLayout;
use crate::hilbert::state::StateVector;

pub const NAME: &str = "track-chamber";

fn layer_name(l: usize) -> String {
    format!("layer:{l}")
}

fn dir_label(j: usize) -> String {
    format!("dir:{j}")
}

fn cell_label(j: usize) -> String {
    format!("cell:{j}")
}

fn track_label(j: usize) -> String {
    format!("track:{j}")
}

fn layout(layers: usize, cells: usize) -> Result<Arc<SystemLayout>> {
    let mut subsystems = vec![(
        "direction".to_string(),
        (0..cells).map(dir_label).collect::<Vec<_>>(),
    )];
    let mut layer_labels = vec!["blank".to_string()];
    layer_labels.extend((0..cells).map(cell_label));
    for l in 0..layers {
        subsystems.push((layer_name(l), layer_labels.clone()));
    }
    let mut obs_labels = vec!["blank".to_string()];
    obs_labels.extend((0..cells).map(track_label));
    obs_labels.push("other1".into());
    subsystems.push(("Obs".to_string(), obs_labels));
    SystemLayout::new(subsystems)
}

fn version(layout: &Arc<SystemLayout>, layers: usize, direction: usize) -> Result<StateVector> {
    let dir = dir_label(direction);
    let layer_names: Vec<String> = (0..layers).map(layer_name).collect();
    let mut assignment: Vec<(&str, &str)> = vec![("direction", dir.as_str())];
    for name in &layer_names {
        assignment.push((name.as_str(), "blank"));
    }
    assignment.push(("Obs", "blank"));
    StateVector::basis_state(layout, &assignment)
}

fn pipeline(layout: &Arc<SystemLayout>, layers: usize, cells: usize) -> Result<Vec<UnitaryOp>> {
    let dir_labels: Vec<String> = (0..cells).map(dir_label).collect();
    let cell_labels: Vec<String> = (0..cells).map(cell_label).collect();
    let track_labels: Vec<String> = (0..cells).map(track_label).collect();

    let mut ops = Vec::with_capacity(layers + 1);
    for l in 0..layers {
        let layer = layer_name(l);
        let rules: Vec<ConditionedSwaps> = (0..cells)
            .map(|j| ConditionedSwaps {
                when: vec![dir_labels[j].as_str()],
                swaps: vec![("blank", cell_labels[j].as_str())],
            })
            .collect();
        ops.push(UnitaryOp::conditioned_permutation(
            layout,
            &["direction"],
            layer.as_str(),
            &rules,
        )?);
    }
    let first_layer = layer_name(0);
    let rules: Vec<ConditionedSwaps> = (0..cells)
        .map(|j| ConditionedSwaps {
            when: vec![cell_labels[j].as_str()],
            swaps: vec![("blank", track_labels[j].as_str())],
        })
        .collect();
    ops.push(UnitaryOp::conditioned_permutation(
        layout,
        &[first_layer.as_str()],
        "Obs",
        &rules,
    )?);
    Ok(ops)
}

fn record_map(layers: usize, cells: usize) -> RecordMap {
    let mut map = RecordMap::new();
    for j in 0..cells {
        let mut record = std::collections::BTreeMap::new();
        for l in 0..layers {
            record.insert(layer_name(l), cell_label(j));
        }
        record.insert("Obs".to_string(), track_label(j));
        let mut outcome = std::collections::BTreeMap::new();
        outcome.insert("direction".to_string(), dir_label(j));
        map.insert(record, outcome);
    }
    map
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let layers = config.layers;
    let cells = config.cells_per_layer;
    if layers < 1 {
        return Err(Error::config("layers", "need at least 1 layer"));
    }
    if cells < 2 {
        return Err(Error::config("cells_per_layer", "need at least 2 cells"));
    }
    let uniform = Complex64::new(1.0 / (cells as f64).sqrt(), 0.0);
    let default = vec![uniform; cells];
    let (amps, normalized) = config.resolve_amplitudes(cells, &default)?;

    let layout = layout(layers, cells)?;
    let versions: Vec<StateVector> = (0..cells)
        .map(|j| version(&layout, layers, j))
        .collect::<Result<_>>()?;
    let terms: Vec<(Complex64, &StateVector)> =
        amps.iter().copied().zip(versions.iter()).collect();
    let initial = StateVector::superpose(&terms)?;
    let pipeline = pipeline(&layout, layers, cells)?;

    let layer_names: Vec<String> = (0..layers).map(layer_name).collect();
    let mut record_subsystems: Vec<&str> = layer_names.iter().map(String::as_str).collect();
    record_subsystems.push("Obs");
    let expected: Vec<String> = (0..cells).map(track_label).collect();
    let expected_refs: Vec<&str> = expected.iter().map(String::as_str).collect();

    let outcome = run_protocol(
        &initial,
        &pipeline,
        &record_subsystems,
        "Obs",
        &expected_refs,
        &["direction"],
        &record_map(layers, cells),
        &pipeline,
        (&versions[0], &versions[1]),
        config.isolation_samples,
        config.seed,
    )?;

    // Ballistic consistency straight off the final sparse support: in every
    // surviving basis state, each layer's cell matches the direction.
    let dir_pos = layout.position_of("direction")?;
    let layer_positions: Vec<usize> = layer_names
        .iter()
        .map(|n| layout.position_of(n))
        .collect::<Result<_>>()?;
    let mut non_ballistic_weight = 0.0;
    for (idx, amp) in outcome.final_state.entries() {
        let dir_ord = layout.ordinal_at(idx, dir_pos);
        let straight = layer_positions
            .iter()
            .all(|&p| layout.label_at(idx, p) == cell_label(dir_ord));
        if !straight {
            non_ballistic_weight += amp.norm_sqr();
        }
    }

    let tracks: Vec<TrackSummary> = outcome
        .branches
        .iter()
        .map(|b| {
            let cells_hit: Vec<usize> = layer_names
                .iter()
                .map(|name| {
                    b.record[name]
                        .strip_prefix("cell:")
                        .and_then(|s| s.parse().ok())
                        .expect("layer record is a cell label")
                })
                .collect();
            TrackSummary {
                direction: format!("dir:{}", cells_hit[0]),
                cells: cells_hit,
            }
        })
        .collect();

    let payload = Payload::TrackChamber {
        tracks,
        non_ballistic_weight,
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
    fn uniform_directions_give_constant_cell_tracks() {
        let report = run(&ExperimentConfig::default()).unwrap();
        assert_eq!(report.branch_count, 3);
        match &report.payload {
            Payload::TrackChamber { tracks, non_ballistic_weight } => {
                assert_eq!(*non_ballistic_weight, 0.0);
                for track in tracks {
                    assert_eq!(track.cells.len(), 4);
                    assert!(track.cells.windows(2).all(|w| w[0] == w[1]));
                }
            }
            other => panic!("wrong payload: {other:?}"),
        }
        for b in &report.branches {
            assert_abs_diff_eq!(b.weight_sqr, 1.0 / 3.0, epsilon = 1e-12);
        }
        assert!(report.diagnostics.pass);
    }

    #[test]
    fn single_layer_reduces_to_point_detection() {
        let mut config = ExperimentConfig::default();
        config.layers = 1;
        let report = run(&config).unwrap();
        assert_eq!(report.branch_count, 3);
        match &report.payload {
            Payload::TrackChamber { tracks, .. } => {
                for track in tracks {
                    assert_eq!(track.cells.len(), 1);
                }
            }
            other => panic!("wrong payload: {other:?}"),
        }
    }

    #[test]
    fn degenerate_dimensions_rejected() {
        let mut config = ExperimentConfig::default();
        config.layers = 0;
        assert!(run(&config).is_err());
        config.layers = 4;
        config.cells_per_layer = 1;
        assert!(run(&config).is_err());
    }
}
