//! Branch decomposition and classicality diagnostics.
//!
//! A branch is the component of a composite state carrying one definite
//! tuple of record labels on designated record subsystems (detector
//! pointers and observer registers). Branch identity is fixed by those
//! labels — no automated pointer-basis search is performed.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{apply_pipeline, UnitaryOp};
use crate::error::{Error, Result};
use crate::hilbert::density::{DensityMatrix, RANK_TOLERANCE};
use crate::hilbert::layout::SubsetIndexer;
use crate::hilbert::state::StateVector;
use crate::sampling;

/// Projection weights below this are treated as an empty conditional.
pub const CONDITIONAL_WEIGHT_FLOOR: f64 = 1e-14;

/// One component of a decomposition: a record-label tuple, the complex
/// coefficient carrying the branch's norm and global phase, and the
/// normalized branch state. `weight · state` reconstructs the projected
/// component exactly.
#[derive(Debug, Clone)]
pub struct Branch {
    pub record: BTreeMap<String, String>,
    pub weight: Complex64,
    pub state: StateVector,
}

/// Residuals of the linearity/isolation check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsolationReport {
    /// max ‖U(a1·v1 + a2·v2) − a1·U v1 − a2·U v2‖ over sampled pairs.
    pub linearity_residual: f64,
    /// max over branches of 1 − |⟨branch evolved alone | branch conditioned
    /// from the superposition⟩| (global phase quotiented out).
    pub branch_fidelity_deviation: f64,
    /// |⟨U v1 | U v2⟩|.
    pub cross_talk: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Support of the observer's reduced density matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportReport {
    /// Numerical rank at tolerance 1e-10.
    pub reduced_rank: usize,
    /// Probability weight on observer labels outside the expected record set.
    pub leakage: f64,
    pub expected_records: Vec<String>,
}

/// Splits a state into branches keyed by the record-label tuples found on
/// the listed subsystems. Branches come back in ascending record-tuple
/// order, are mutually orthogonal, and reconstruct the input as
/// Σ weight·state.
pub fn decompose(state: &StateVector, record_subsystems: &[&str]) -> Result<Vec<Branch>> {
    if record_subsystems.is_empty() {
        return Err(Error::precondition("decompose needs at least one record subsystem"));
    }
    let layout = state.layout();
    let indexer = SubsetIndexer::for_names(layout, record_subsystems)?;

    let mut groups: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
    for (idx, amp) in state.entries() {
        groups.entry(indexer.local_index(idx)).or_default().push((idx, amp));
    }

    let mut branches = Vec::with_capacity(groups.len());
    for (record_local, entries) in groups {
        let norm_sqr: f64 = entries.iter().map(|(_, a)| a.norm_sqr()).sum();
        let norm = norm_sqr.sqrt();
        // Weight phase convention: the branch state's first stored
        // amplitude is real positive; the global phase lives in `weight`.
        let phase = entries[0].1.arg();
        let weight = Complex64::from_polar(norm, phase);
        let inv = Complex64::ONE / weight;
        let branch_state = StateVector::from_entries(
            std::sync::Arc::clone(layout),
            entries.into_iter().map(|(idx, amp)| (idx, amp * inv)),
        );

        let ords = indexer.unpack_local(record_local);
        let mut record = BTreeMap::new();
        for (slot, &pos) in indexer.positions().iter().enumerate() {
            let sub = layout.subsystem(pos);
            record.insert(sub.name.clone(), sub.labels[ords[slot]].clone());
        }
        branches.push(Branch {
            record,
            weight,
            state: branch_state,
        });
    }
    Ok(branches)
}

/// Checks that each version evolves as if the others were not there.
///
/// `protocol` is the ordered interaction pipeline; `v1`, `v2` must be
/// normalized and orthogonal. Over `samples` amplitude pairs drawn from the
/// complex unit sphere, the report collects the worst linearity residual,
/// the worst deviation of a conditioned branch from its evolved-alone
/// counterpart (matched by record tuple on `record_subsystems`), and the
/// cross-branch overlap after evolution.
pub fn verify_isolation(
    protocol: &[UnitaryOp],
    v1: &StateVector,
    v2: &StateVector,
    record_subsystems: &[&str],
    samples: usize,
    seed: u64,
) -> Result<IsolationReport> {
    let overlap = v1.inner_product(v2)?.norm();
    if overlap > 1e-12 {
        return Err(Error::precondition(format!(
            "version states are not orthogonal (|⟨v1|v2⟩| = {overlap:.3e})"
        )));
    }
    for (name, v) in [("v1", v1), ("v2", v2)] {
        let n = v.norm_sqr();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::precondition(format!(
                "{name} is not normalized (norm² = {n})"
            )));
        }
    }

    let u1 = apply_pipeline(protocol, v1)?;
    let u2 = apply_pipeline(protocol, v2)?;
    let cross_talk = u1.inner_product(&u2)?.norm();

    // Record → evolved-alone branch states, from both versions.
    let mut alone: BTreeMap<BTreeMap<String, String>, Vec<StateVector>> = BTreeMap::new();
    for evolved in [&u1, &u2] {
        for branch in decompose(evolved, record_subsystems)? {
            alone.entry(branch.record).or_default().push(branch.state);
        }
    }

    let mut rng = sampling::rng(seed);
    let mut linearity_residual = 0.0f64;
    let mut branch_fidelity_deviation = 0.0f64;
    for _ in 0..samples {
        let (a1, a2) = sampling::amplitude_pair(&mut rng);
        let psi = StateVector::superpose(&[(a1, v1), (a2, v2)])?;
        let evolved = apply_pipeline(protocol, &psi)?;
        let by_parts = StateVector::superpose(&[(a1, &u1), (a2, &u2)])?;
        linearity_residual = linearity_residual.max(evolved.distance(&by_parts)?);

        for branch in decompose(&evolved, record_subsystems)? {
            let fidelity = match alone.get(&branch.record) {
                Some(candidates) => candidates
                    .iter()
                    .map(|alone_state| {
                        alone_state
                            .inner_product(&branch.state)
                            .map(|ip| ip.norm())
                    })
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(0.0, f64::max),
                None => 0.0,
            };
            branch_fidelity_deviation = branch_fidelity_deviation.max(1.0 - fidelity);
        }
    }

    Ok(IsolationReport {
        linearity_residual,
        branch_fidelity_deviation,
        cross_talk,
        samples,
        seed,
    })
}

/// Reduced-density-matrix support check on one observer subsystem.
pub fn record_support(
    state: &StateVector,
    observer: &str,
    expected_records: &[&str],
) -> Result<SupportReport> {
    let layout = state.layout();
    let pos = layout.position_of(observer)?;
    let mut expected_ordinals = Vec::with_capacity(expected_records.len());
    for label in expected_records {
        expected_ordinals.push(layout.label_ordinal(pos, label)?);
    }

    let rho = DensityMatrix::partial_trace(state, &[observer])?;
    let reduced_rank = rho.rank(RANK_TOLERANCE);

    let mut leakage = 0.0;
    for (idx, amp) in state.entries() {
        if !expected_ordinals.contains(&layout.ordinal_at(idx, pos)) {
            leakage += amp.norm_sqr();
        }
    }

    Ok(SupportReport {
        reduced_rank,
        leakage,
        expected_records: expected_records.iter().map(|s| s.to_string()).collect(),
    })
}

/// Probability, within each branch, of each expected outcome-label tuple.
///
/// `record_map` sends a branch's record tuple to the outcome labels it is
/// supposed to denote on `outcome_subsystems`. Row i, column j is the
/// weight inside branch i of branch j's expected outcome; the claim under
/// test is that this matrix is the identity.
pub fn perception_matrix(
    branches: &[Branch],
    outcome_subsystems: &[&str],
    record_map: &BTreeMap<BTreeMap<String, String>, BTreeMap<String, String>>,
) -> Result<DMatrix<f64>> {
    let n = branches.len();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let layout = branches[0].state.layout();
    let indexer = SubsetIndexer::for_names(layout, outcome_subsystems)?;

    let mut outcome_locals = Vec::with_capacity(n);
    for branch in branches {
        let mapped = record_map.get(&branch.record).ok_or_else(|| {
            Error::schema(format!("record {:?} missing from record map", branch.record))
        })?;
        let mut ordinals = Vec::with_capacity(indexer.positions().len());
        for &pos in indexer.positions() {
            let sub = layout.subsystem(pos);
            let label = mapped.get(&sub.name).ok_or_else(|| {
                Error::schema(format!(
                    "record map entry lacks outcome subsystem `{}`",
                    sub.name
                ))
            })?;
            ordinals.push(layout.label_ordinal(pos, label)?);
        }
        outcome_locals.push(indexer.pack_local(&ordinals));
    }

    let mut matrix = DMatrix::zeros(n, n);
    for (i, branch) in branches.iter().enumerate() {
        for (idx, amp) in branch.state.entries() {
            let local = indexer.local_index(idx);
            if let Some(j) = outcome_locals.iter().position(|&o| o == local) {
                matrix[(i, j)] += amp.norm_sqr();
            }
        }
    }
    Ok(matrix)
}

/// Projects onto the given labels and renormalizes.
pub fn conditional_state(
    state: &StateVector,
    constraints: &[(&str, &str)],
) -> Result<StateVector> {
    let layout = state.layout();
    let mut resolved = Vec::with_capacity(constraints.len());
    for (name, label) in constraints {
        let pos = layout.position_of(name)?;
        resolved.push((pos, layout.label_ordinal(pos, label)?));
    }
    let kept: Vec<(u64, Complex64)> = state
        .entries()
        .filter(|&(idx, _)| {
            resolved
                .iter()
                .all(|&(pos, ord)| layout.ordinal_at(idx, pos) == ord)
        })
        .collect();
    let weight: f64 = kept.iter().map(|(_, a)| a.norm_sqr()).sum();
    if weight < CONDITIONAL_WEIGHT_FLOOR {
        return Err(Error::EmptyConditional {
            weight,
            threshold: CONDITIONAL_WEIGHT_FLOOR,
        });
    }
    let inv = Complex64::new(1.0 / weight.sqrt(), 0.0);
    Ok(StateVector::from_entries(
        std::sync::Arc::clone(layout),
        kept.into_iter().map(|(idx, amp)| (idx, amp * inv)),
    ))
}

/// Gram matrix of the branch states.
pub fn branch_overlap_matrix(branches: &[Branch]) -> Result<DMatrix<Complex64>> {
    let n = branches.len();
    let mut gram = DMatrix::from_element(n, n, Complex64::ZERO);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = branches[i].state.inner_product(&branches[j].state)?;
        }
    }
    Ok(gram)
}

/// Max elementwise distance of a complex matrix from the identity.
pub fn identity_defect(matrix: &DMatrix<Complex64>) -> f64 {
    let mut defect = 0.0f64;
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            let expected = if i == j { Complex64::ONE } else { Complex64::ZERO };
            defect = defect.max((matrix[(i, j)] - expected).norm());
        }
    }
    defect
}

/// Max elementwise distance of a real matrix from the identity.
pub fn identity_defect_real(matrix: &DMatrix<f64>) -> f64 {
    let mut defect = 0.0f64;
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            let expected = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((matrix[(i, j)] - expected).abs());
        }
    }
    defect
}
