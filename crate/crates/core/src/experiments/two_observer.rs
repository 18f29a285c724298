//! Stern–Gerlach with a second observer who writes whether she agrees.
//!
//! Both observer reads are conditioned on the same detector pair, so within
//! every branch the two registers denote the same outcome. The payload
//! checks that structurally, branch by branch.

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

pub const NAME: &str = "two-observer";

const OBS1_RECORDS: [&str; 2] = ["yes,no", "no,yes"];
const OBS2_RECORDS: [&str; 2] = ["yes,no; agree", "no,yes; agree"];

fn layout() -> Result<Arc<SystemLayout>> {
    SystemLayout::new(vec![
        ("spin".into(), vec!["-".into(), "+".into()]),
        ("Det-".into(), vec!["no".into(), "yes".into()]),
        ("Det+".into(), vec!["no".into(), "yes".into()]),
        (
            "Obs1".into(),
            vec![
                "blank".into(),
                "yes,no".into(),
                "no,yes".into(),
                "other1".into(),
            ],
        ),
        (
            "Obs2".into(),
            vec![
                "blank".into(),
                "yes,no; agree".into(),
                "no,yes; agree".into(),
                "other1".into(),
            ],
        ),
    ])
}

fn version(layout: &Arc<SystemLayout>, spin: &str) -> Result<StateVector> {
    StateVector::basis_state(
        layout,
        &[
            ("spin", spin),
            ("Det-", "no"),
            ("Det+", "no"),
            ("Obs1", "blank"),
            ("Obs2", "blank"),
        ],
    )
}

fn observer_read(
    layout: &Arc<SystemLayout>,
    observer: &str,
    records: [&str; 2],
) -> Result<UnitaryOp> {
    UnitaryOp::conditioned_permutation(
        layout,
        &["Det-", "Det+"],
        observer,
        &[
            ConditionedSwaps { when: vec!["yes", "no"], swaps: vec![("blank", records[0])] },
            ConditionedSwaps { when: vec!["no", "yes"], swaps: vec![("blank", records[1])] },
            ConditionedSwaps { when: vec!["yes", "yes"], swaps: vec![("blank", "other1")] },
        ],
    )
}

fn pipeline(layout: &Arc<SystemLayout>) -> Result<Vec<UnitaryOp>> {
    Ok(vec![
        UnitaryOp::controlled_flip(layout, "spin", &["-"], "Det-", "no", "yes")?,
        UnitaryOp::controlled_flip(layout, "spin", &["+"], "Det+", "no", "yes")?,
        observer_read(layout, "Obs1", OBS1_RECORDS)?,
        observer_read(layout, "Obs2", OBS2_RECORDS)?,
    ])
}

fn record_map() -> RecordMap {
    let mut map = RecordMap::new();
    let (k, v) = map_entry(
        &[
            ("Det-", "yes"),
            ("Det+", "no"),
            ("Obs1", "yes,no"),
            ("Obs2", "yes,no; agree"),
        ],
        &[("spin", "-")],
    );
    map.insert(k, v);
    let (k, v) = map_entry(
        &[
            ("Det-", "no"),
            ("Det+", "yes"),
            ("Obs1", "no,yes"),
            ("Obs2", "no,yes; agree"),
        ],
        &[("spin", "+")],
    );
    map.insert(k, v);
    map
}

/// Outcome denoted by a register label, with the agreement marker for the
/// second observer.
fn denoted_outcome(label: &str) -> Option<(&'static str, bool)> {
    match label {
        "yes,no" => Some(("-", false)),
        "no,yes" => Some(("+", false)),
        "yes,no; agree" => Some(("-", true)),
        "no,yes; agree" => Some(("+", true)),
        _ => None,
    }
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
        &["Det-", "Det+", "Obs1", "Obs2"],
        "Obs1",
        &OBS1_RECORDS,
        &["spin"],
        &record_map(),
        &pipeline,
        (&v1, &v2),
        config.isolation_samples,
        config.seed,
    )?;

    // Per branch: the two registers denote the same outcome and the second
    // carries the agreement marker.
    let agreement: Vec<bool> = outcome
        .branches
        .iter()
        .map(|b| {
            match (
                denoted_outcome(&b.record["Obs1"]),
                denoted_outcome(&b.record["Obs2"]),
            ) {
                (Some((o1, false)), Some((o2, true))) => o1 == o2,
                _ => false,
            }
        })
        .collect();
    let all_agree = !agreement.is_empty() && agreement.iter().all(|&a| a);

    let obs2_support =
        crate::branching::record_support(&outcome.final_state, "Obs2", &OBS2_RECORDS)?;

    let payload = Payload::TwoObserver {
        agreement,
        all_agree,
        obs2_leakage: obs2_support.leakage,
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

    #[test]
    fn both_branches_agree() {
        let report = run(&ExperimentConfig::default()).unwrap();
        assert_eq!(report.branch_count, 2);
        for b in &report.branches {
            assert!(b.record["Obs2"].contains("agree"));
        }
        match &report.payload {
            Payload::TwoObserver { agreement, all_agree, obs2_leakage } => {
                assert_eq!(agreement.len(), 2);
                assert!(all_agree);
                assert!(*obs2_leakage <= 1e-12);
            }
            other => panic!("wrong payload: {other:?}"),
        }
        assert!(report.diagnostics.pass);
    }

    #[test]
    fn single_branch_still_agrees() {
        let mut config = ExperimentConfig::default();
        config.amplitudes = Some(vec![[1.0, 0.0], [0.0, 0.0]]);
        let report = run(&config).unwrap();
        assert_eq!(report.branch_count, 1);
        match &report.payload {
            Payload::TwoObserver { all_agree, .. } => assert!(all_agree),
            other => panic!("wrong payload: {other:?}"),
        }
    }
}
