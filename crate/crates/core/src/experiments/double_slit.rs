//! Two slits, far-field propagation onto a cell screen, then detection.
//!
//! The slit labels and the screen-cell labels share one "mode" subsystem,
//! so the propagation unitary can erase the which-slit information into
//! cell phases: its two slit columns are the quadratic-phase path sums and
//! the rest of the kernel is a deterministic orthonormal completion. The
//! screen spans an integer number of fringes, which makes the two slit
//! columns exactly orthogonal and the completion well-posed.
//!
//! Per-cell detection and the observer read are basis permutations, so the
//! pipeline stays exact and cheap even at the default 64 cells.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::{ConditionedSwaps, UnitaryOp};
use crate::error::{Error, Result};
use crate::experiments::{
    assemble_report, run_protocol, ExperimentConfig, ExperimentReport, Payload, RecordMap,
};
use crate::hilbert::layout::SystemLayout;
use crate::hilbert::state::StateVector;

pub const NAME: &str = "double-slit";

/// Screen geometry derived from a config.
#[derive(Debug, Clone)]
pub struct SlitGeometry {
    pub cells: usize,
    pub fringe_spacing_m: f64,
    pub screen_width_m: f64,
    pub cell_centers_m: Vec<f64>,
}

impl SlitGeometry {
    /// The screen covers `fringes` full fringes (λL/d each) centered on the
    /// axis; the count is clamped so it is nonzero and not a multiple of
    /// the cell count, which keeps the slit columns exactly orthogonal.
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        config.validate_geometry()?;
        let cells = config.screen_cells;
        if cells < 3 {
            return Err(Error::config("screen_cells", "need at least 3 cells"));
        }
        let fringe_spacing_m = config.wavelength_m * config.screen_distance_m
            / config.slit_separation_m;
        let fringes = (cells / 4).clamp(1, 8);
        let screen_width_m = fringes as f64 * fringe_spacing_m;
        let cell_centers_m = (0..cells)
            .map(|m| -screen_width_m / 2.0 + (m as f64 + 0.5) * screen_width_m / cells as f64)
            .collect();
        Ok(SlitGeometry {
            cells,
            fringe_spacing_m,
            screen_width_m,
            cell_centers_m,
        })
    }
}

fn cell_label(m: usize) -> String {
    format!("cell:{m}")
}

fn hit_label(m: usize) -> String {
    format!("hit:{m}")
}

fn layout(cells: usize) -> Result<Arc<SystemLayout>> {
    let mut mode_labels = vec!["slit:top".to_string(), "slit:bottom".to_string()];
    mode_labels.extend((0..cells).map(cell_label));
    let mut screen_labels = vec!["blank".to_string()];
    screen_labels.extend((0..cells).map(hit_label));
    let mut obs_labels = vec!["blank".to_string()];
    obs_labels.extend((0..cells).map(cell_label));
    obs_labels.push("other1".into());
    SystemLayout::new(vec![
        ("mode".into(), mode_labels),
        ("screen".into(), screen_labels),
        ("Obs".into(), obs_labels),
    ])
}

/// Propagation kernel on the mode subsystem.
///
/// Column `slit:s` carries exp(i·2π·r_s(x_m)/λ)/√M on the cell rows, with
/// r_s(x) = L + (x−x_s)²/(2L). The phase is assembled as a per-row phasor
/// (the slit-independent part, including the huge 2πL/λ term) times a
/// small slit-dependent phasor, so the relative phases that control
/// unitarity and the fringe pattern never touch large trigonometric
/// arguments. The remaining columns are a twice-iterated Gram–Schmidt
/// completion over the standard basis.
fn propagation_kernel(config: &ExperimentConfig, geometry: &SlitGeometry) -> DMatrix<Complex64> {
    let cells = geometry.cells;
    let dim = cells + 2;
    let lambda = config.wavelength_m;
    let l_screen = config.screen_distance_m;
    let spread = 1.0 / (cells as f64).sqrt();
    let tau = 2.0 * std::f64::consts::PI;

    let slit_x = [config.slit_separation_m / 2.0, -config.slit_separation_m / 2.0];
    let mut kernel = DMatrix::from_element(dim, dim, Complex64::ZERO);
    for (m, &x) in geometry.cell_centers_m.iter().enumerate() {
        // Slit-independent phase: 2π(L + x²/2L)/λ, shared by the row.
        let row_phase = Complex64::from_polar(1.0, tau * (l_screen + x * x / (2.0 * l_screen)) / lambda);
        for (col, &xs) in slit_x.iter().enumerate() {
            // Slit-dependent remainder: 2π(x_s² − 2x·x_s)/(2Lλ), small.
            let rel = tau * (xs * xs - 2.0 * x * xs) / (2.0 * l_screen * lambda);
            kernel[(2 + m, col)] = row_phase * Complex64::from_polar(spread, rel);
        }
    }

    // Deterministic completion of the remaining dim−2 columns.
    let mut basis: Vec<Vec<Complex64>> = (0..2)
        .map(|col| (0..dim).map(|row| kernel[(row, col)]).collect())
        .collect();
    let mut next_col = 2;
    for seed in 0..dim {
        if next_col == dim {
            break;
        }
        let mut v = vec![Complex64::ZERO; dim];
        v[seed] = Complex64::ONE;
        for _ in 0..2 {
            for b in &basis {
                let mut overlap = Complex64::ZERO;
                for (bi, vi) in b.iter().zip(&v) {
                    overlap += bi.conj() * vi;
                }
                for (bi, vi) in b.iter().zip(v.iter_mut()) {
                    *vi -= overlap * bi;
                }
            }
        }
        let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        for vi in v.iter_mut() {
            *vi *= inv;
        }
        for (row, &vi) in v.iter().enumerate() {
            kernel[(row, next_col)] = vi;
        }
        basis.push(v);
        next_col += 1;
    }
    debug_assert_eq!(next_col, dim);
    kernel
}

fn detection(layout: &Arc<SystemLayout>, cells: usize) -> Result<UnitaryOp> {
    let cell_labels: Vec<String> = (0..cells).map(cell_label).collect();
    let hit_labels: Vec<String> = (0..cells).map(hit_label).collect();
    let rules: Vec<ConditionedSwaps> = (0..cells)
        .map(|m| ConditionedSwaps {
            when: vec![cell_labels[m].as_str()],
            swaps: vec![("blank", hit_labels[m].as_str())],
        })
        .collect();
    UnitaryOp::conditioned_permutation(layout, &["mode"], "screen", &rules)
}

fn observer_read(layout: &Arc<SystemLayout>, cells: usize) -> Result<UnitaryOp> {
    let hit_labels: Vec<String> = (0..cells).map(hit_label).collect();
    let record_labels: Vec<String> = (0..cells).map(cell_label).collect();
    let rules: Vec<ConditionedSwaps> = (0..cells)
        .map(|m| ConditionedSwaps {
            when: vec![hit_labels[m].as_str()],
            swaps: vec![("blank", record_labels[m].as_str())],
        })
        .collect();
    UnitaryOp::conditioned_permutation(layout, &["screen"], "Obs", &rules)
}

fn record_map(cells: usize) -> RecordMap {
    let mut map = RecordMap::new();
    for m in 0..cells {
        let mut record = std::collections::BTreeMap::new();
        record.insert("screen".to_string(), hit_label(m));
        record.insert("Obs".to_string(), cell_label(m));
        let mut outcome = std::collections::BTreeMap::new();
        outcome.insert("mode".to_string(), cell_label(m));
        map.insert(record, outcome);
    }
    map
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let geometry = SlitGeometry::from_config(config)?;
    let cells = geometry.cells;
    let default = [Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)];
    let (amps, normalized) = config.resolve_amplitudes(2, &default)?;

    let layout = layout(cells)?;
    let v_top = StateVector::basis_state(
        &layout,
        &[("mode", "slit:top"), ("screen", "blank"), ("Obs", "blank")],
    )?;
    let v_bottom = StateVector::basis_state(
        &layout,
        &[("mode", "slit:bottom"), ("screen", "blank"), ("Obs", "blank")],
    )?;
    let initial = StateVector::superpose(&[(amps[0], &v_top), (amps[1], &v_bottom)])?;

    let propagation =
        UnitaryOp::from_dense_kernel(&layout, &["mode"], propagation_kernel(config, &geometry))?;
    let pipeline = vec![
        propagation.clone(),
        detection(&layout, cells)?,
        observer_read(&layout, cells)?,
    ];

    // Pre-detection intensity profile, straight off the propagated state.
    let propagated = propagation.apply(&initial)?;
    let mode_pos = layout.position_of("mode")?;
    let mut intensity = vec![0.0f64; cells];
    for (idx, amp) in propagated.entries() {
        let ord = layout.ordinal_at(idx, mode_pos);
        debug_assert!(ord >= 2, "support must leave the slit labels");
        intensity[ord - 2] += amp.norm_sqr();
    }

    let expected: Vec<String> = (0..cells).map(cell_label).collect();
    let expected_refs: Vec<&str> = expected.iter().map(String::as_str).collect();

    let outcome = run_protocol(
        &initial,
        &pipeline,
        &["screen", "Obs"],
        "Obs",
        &expected_refs,
        &["mode"],
        &record_map(cells),
        &pipeline,
        (&v_top, &v_bottom),
        config.isolation_samples,
        config.seed,
    )?;

    let exposed_cell_per_branch: Vec<usize> = outcome
        .branches
        .iter()
        .map(|b| {
            b.record["screen"]
                .strip_prefix("hit:")
                .and_then(|s| s.parse().ok())
                .expect("screen record is a hit label")
        })
        .collect();

    let payload = Payload::DoubleSlit {
        screen_width_m: geometry.screen_width_m,
        fringe_spacing_m: geometry.fringe_spacing_m,
        cell_centers_m: geometry.cell_centers_m.clone(),
        intensity,
        exposed_cell_per_branch,
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
    use crate::oracle;
    use approx::assert_abs_diff_eq;

    fn slit_amps(config: &ExperimentConfig) -> (Complex64, Complex64) {
        let pairs = config.amplitudes.clone().unwrap();
        (
            Complex64::new(pairs[0][0], pairs[0][1]),
            Complex64::new(pairs[1][0], pairs[1][1]),
        )
    }

    #[test]
    fn propagation_kernel_is_unitary() {
        let config = ExperimentConfig::default();
        let geometry = SlitGeometry::from_config(&config).unwrap();
        let kernel = propagation_kernel(&config, &geometry);
        let layout = layout(geometry.cells).unwrap();
        // from_dense_kernel checks the 1e-12 unitarity invariant itself
        let op = UnitaryOp::from_dense_kernel(&layout, &["mode"], kernel).unwrap();
        assert!(op.unitarity_defect() < 1e-12);
    }

    #[test]
    fn intensity_matches_two_path_oracle() {
        let report = run(&ExperimentConfig::default()).unwrap();
        let config = report.config.clone();
        let amps = slit_amps(&config);
        match &report.payload {
            Payload::DoubleSlit { cell_centers_m, intensity, .. } => {
                for (x, &engine) in cell_centers_m.iter().zip(intensity) {
                    let reference = oracle::two_path_intensity(
                        amps,
                        config.slit_separation_m,
                        config.wavelength_m,
                        config.screen_distance_m,
                        *x,
                        cell_centers_m.len(),
                    );
                    assert!(
                        (engine - reference).abs() <= 1e-9 * reference,
                        "cell at {x}: engine {engine}, reference {reference}"
                    );
                }
            }
            other => panic!("wrong payload: {other:?}"),
        }
    }

    #[test]
    fn bottom_slit_closed_gives_flat_profile() {
        let mut config = ExperimentConfig::default();
        config.amplitudes = Some(vec![[1.0, 0.0], [0.0, 0.0]]);
        let report = run(&config).unwrap();
        match &report.payload {
            Payload::DoubleSlit { intensity, .. } => {
                let first = intensity[0];
                assert_abs_diff_eq!(first, 1.0 / 64.0, epsilon = 1e-12);
                for &i in intensity {
                    assert_abs_diff_eq!(i, first, epsilon = 1e-12);
                }
            }
            other => panic!("wrong payload: {other:?}"),
        }
    }

    #[test]
    fn every_branch_exposes_exactly_one_cell() {
        let report = run(&ExperimentConfig::default()).unwrap();
        assert!(report.branch_count > 0);
        match &report.payload {
            Payload::DoubleSlit { exposed_cell_per_branch, .. } => {
                assert_eq!(exposed_cell_per_branch.len(), report.branch_count);
            }
            other => panic!("wrong payload: {other:?}"),
        }
        for b in &report.branches {
            assert!(b.record["screen"].starts_with("hit:"));
            assert!(b.record["Obs"].starts_with("cell:"));
        }
        assert!(report.diagnostics.pass);
    }

    #[test]
    fn tiny_screen_still_works() {
        let mut config = ExperimentConfig::default();
        config.screen_cells = 3;
        let report = run(&config).unwrap();
        assert!(report.diagnostics.pass);
    }

    #[test]
    fn nonpositive_geometry_rejected() {
        let mut config = ExperimentConfig::default();
        config.wavelength_m = 0.0;
        assert!(run(&config).is_err());
    }
}
