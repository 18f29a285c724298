//! Spin-½ Stern–Gerlach run: two path detectors and one observer.
//!
//! The initial state superposes the two pre-detection versions (spin down
//! on path 1, spin up on path 2, both detectors reading "no", observer
//! blank). The pipeline flips the matching detector pointer and then writes
//! the observer register from the joint detector reading. Records land on
//! the detectors and the observer; the branch count is the number of
//! nonzero input amplitudes.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use crate::dynamics::{ConditionedSwaps, UnitaryOp};
use crate::error::Result;
use crate::experiments::{
    assemble_report, map_entry, run_protocol, ExperimentConfig, ExperimentReport, Payload,
    RecordMap,
};
use crate::hilbert::layout::SystemLayout;
use crate::hilbert::state::StateVector;

pub const NAME: &str = "stern-gerlach";

pub(crate) const OBS_RECORDS: [&str; 2] = ["yes,no", "no,yes"];

pub(crate) fn layout() -> Result<Arc<SystemLayout>> {
    SystemLayout::new(vec![
        ("spin".into(), vec!["-".into(), "+".into()]),
        ("Det-".into(), vec!["no".into(), "yes".into()]),
        ("Det+".into(), vec!["no".into(), "yes".into()]),
        (
            "Obs".into(),
            vec![
                "blank".into(),
                "yes,no".into(),
                "no,yes".into(),
                "other1".into(),
            ],
        ),
    ])
}

/// Pre-detection version state for one spin label.
pub(crate) fn version(layout: &Arc<SystemLayout>, spin: &str) -> Result<StateVector> {
    StateVector::basis_state(
        layout,
        &[("spin", spin), ("Det-", "no"), ("Det+", "no"), ("Obs", "blank")],
    )
}

/// Detector flips plus the observer read.
pub(crate) fn pipeline(layout: &Arc<SystemLayout>) -> Result<Vec<UnitaryOp>> {
    let flip_minus = UnitaryOp::controlled_flip(layout, "spin", &["-"], "Det-", "no", "yes")?;
    let flip_plus = UnitaryOp::controlled_flip(layout, "spin", &["+"], "Det+", "no", "yes")?;
    let read = observer_read(layout, "Obs")?;
    Ok(vec![flip_minus, flip_plus, read])
}

/// Observer readout: one permutation on the register conditioned jointly on
/// both detector labels. The two unrealized detector readings keep their
/// own rows so the operator is a permutation.
pub(crate) fn observer_read(layout: &Arc<SystemLayout>, observer: &str) -> Result<UnitaryOp> {
    let records = observer_record_labels(layout, observer)?;
    UnitaryOp::conditioned_permutation(
        layout,
        &["Det-", "Det+"],
        observer,
        &[
            ConditionedSwaps {
                when: vec!["yes", "no"],
                swaps: vec![("blank", records.0)],
            },
            ConditionedSwaps {
                when: vec!["no", "yes"],
                swaps: vec![("blank", records.1)],
            },
            ConditionedSwaps {
                when: vec!["yes", "yes"],
                swaps: vec![("blank", "other1")],
            },
        ],
    )
}

/// The two realized record labels on an observer register, in (detector−
/// fired, detector+ fired) order. The two-observer run reuses this with its
/// agreement-marked labels.
fn observer_record_labels<'a>(
    layout: &'a Arc<SystemLayout>,
    observer: &str,
) -> Result<(&'a str, &'a str)> {
    let pos = layout.position_of(observer)?;
    let labels = &layout.subsystem(pos).labels;
    Ok((labels[1].as_str(), labels[2].as_str()))
}

pub(crate) fn record_map() -> RecordMap {
    let mut map = RecordMap::new();
    let (k, v) = map_entry(
        &[("Det-", "yes"), ("Det+", "no"), ("Obs", "yes,no")],
        &[("spin", "-")],
    );
    map.insert(k, v);
    let (k, v) = map_entry(
        &[("Det-", "no"), ("Det+", "yes"), ("Obs", "no,yes")],
        &[("spin", "+")],
    );
    map.insert(k, v);
    map
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let default = [Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)];
    let (amps, normalized) = config.resolve_amplitudes(2, &default)?;

    let layout = layout()?;
    let v1 = version(&layout, "-")?;
    let v2 = version(&layout, "+")?;
    let initial = StateVector::superpose(&[(amps[0], &v1), (amps[1], &v2)])?;
    let pipeline = pipeline(&layout)?;

    let outcome = run_protocol(
        &initial,
        &pipeline,
        &["Det-", "Det+", "Obs"],
        "Obs",
        &OBS_RECORDS,
        &["spin"],
        &record_map(),
        &pipeline,
        (&v1, &v2),
        config.isolation_samples,
        config.seed,
    )?;

    Ok(assemble_report(
        NAME,
        config.echo_with(NAME, Some(&amps), None),
        normalized,
        &outcome,
        Payload::SternGerlach {},
        started,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn by_obs_record<'a>(
        report: &'a ExperimentReport,
        label: &str,
    ) -> &'a crate::experiments::BranchSummary {
        report
            .branches
            .iter()
            .find(|b| b.record["Obs"] == label)
            .unwrap()
    }

    #[test]
    fn default_run_reproduces_two_records() {
        let report = run(&ExperimentConfig::default()).unwrap();
        assert_eq!(report.branch_count, 2);
        assert_abs_diff_eq!(by_obs_record(&report, "yes,no").weight_sqr, 0.36, epsilon = 1e-12);
        assert_abs_diff_eq!(by_obs_record(&report, "no,yes").weight_sqr, 0.64, epsilon = 1e-12);
        assert_eq!(by_obs_record(&report, "yes,no").record["Det-"], "yes");
        assert_eq!(by_obs_record(&report, "no,yes").record["Det+"], "yes");
        assert!(report.diagnostics.pass);
        assert_eq!(report.support.reduced_rank, 2);
    }

    #[test]
    fn single_amplitude_gives_single_branch() {
        let mut config = ExperimentConfig::default();
        config.amplitudes = Some(vec![[1.0, 0.0], [0.0, 0.0]]);
        let report = run(&config).unwrap();
        assert_eq!(report.branch_count, 1);
        assert_eq!(report.branches[0].record["Obs"], "yes,no");
        assert_eq!(report.support.reduced_rank, 1);
        assert!(report.diagnostics.pass);
    }

    #[test]
    fn complex_phase_leaves_records_unchanged() {
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let mut config = ExperimentConfig::default();
        config.amplitudes = Some(vec![[half, 0.0], [0.0, half]]);
        let phased = run(&config).unwrap();
        config.amplitudes = Some(vec![[half, 0.0], [half, 0.0]]);
        let plain = run(&config).unwrap();

        let records = |r: &ExperimentReport| -> Vec<_> {
            r.branches.iter().map(|b| b.record.clone()).collect()
        };
        assert_eq!(records(&phased), records(&plain));
        for (a, b) in phased.branches.iter().zip(&plain.branches) {
            assert_abs_diff_eq!(a.weight_sqr, b.weight_sqr, epsilon = 1e-12);
            assert_abs_diff_eq!(a.weight_sqr, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn born_weights_labeled_and_normalized() {
        let report = run(&ExperimentConfig::default()).unwrap();
        assert!(report.born_weights.label.contains("postulate"));
        let sum: f64 = report.born_weights.weights.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
    }
}
