//! Independent reference computations.
//!
//! Everything here recomputes a quantity along a different route than the
//! engine: dense full-space matrices instead of sparse kernels, closed-form
//! trigonometry instead of unitary pipelines. The verification battery and
//! the test suites compare engine output against these.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::layout::{SubsetIndexer, SystemLayout};
use crate::hilbert::state::StateVector;

/// Densifies a sparse state (oracle-scale layouts only).
pub fn dense_vector(state: &StateVector) -> Result<Vec<Complex64>> {
    let dim = state.layout().dim();
    if dim > (1 << 10) {
        return Err(Error::capacity(format!(
            "dense oracle refused over dimension {dim}"
        )));
    }
    let mut out = vec![Complex64::ZERO; dim as usize];
    for (idx, amp) in state.entries() {
        out[idx as usize] = amp;
    }
    Ok(out)
}

/// Full-space dense matrix-vector product.
pub fn dense_apply(matrix: &DMatrix<Complex64>, vector: &[Complex64]) -> Vec<Complex64> {
    let dim = vector.len();
    let mut out = vec![Complex64::ZERO; dim];
    for (i, value) in out.iter_mut().enumerate() {
        for (j, &v) in vector.iter().enumerate() {
            *value += matrix[(i, j)] * v;
        }
    }
    out
}

/// Brute-force partial trace of |ψ⟩⟨ψ| from a dense vector.
///
/// Loops over every (kept, kept', rest) triple of the composite space; no
/// sparse grouping is shared with the engine path.
pub fn dense_partial_trace(
    layout: &SystemLayout,
    vector: &[Complex64],
    keep: &[&str],
) -> Result<DMatrix<Complex64>> {
    let indexer = SubsetIndexer::for_names(layout, keep)?;
    let keep_dim = indexer.dim() as usize;
    let mut rho = DMatrix::from_element(keep_dim, keep_dim, Complex64::ZERO);
    for idx_a in 0..vector.len() as u64 {
        let a = vector[idx_a as usize];
        if a == Complex64::ZERO {
            continue;
        }
        let rest_a = indexer.rest_index(idx_a);
        let i = indexer.local_index(idx_a) as usize;
        for idx_b in 0..vector.len() as u64 {
            if indexer.rest_index(idx_b) != rest_a {
                continue;
            }
            let b = vector[idx_b as usize];
            let j = indexer.local_index(idx_b) as usize;
            rho[(i, j)] += a * b.conj();
        }
    }
    Ok(rho)
}

/// Closed-form two-path intensity at one screen cell.
///
/// With slits at ±d/2 and quadratic path lengths r_s(x) = L + (x−x_s)²/(2L),
/// the path-phase difference collapses to Δφ(x) = 2π·d·x/(λL) exactly, so
/// the coherent sum is |a_top + a_bottom·e^{iΔφ}|²/M. Working with the
/// difference keeps the trigonometric arguments small; the raw per-path
/// phases are ~10⁷ rad and would cost nine digits.
pub fn two_path_intensity(
    slit_amps: (Complex64, Complex64),
    slit_separation_m: f64,
    wavelength_m: f64,
    screen_distance_m: f64,
    cell_center_m: f64,
    cells: usize,
) -> f64 {
    let delta_phi = 2.0 * std::f64::consts::PI * slit_separation_m * cell_center_m
        / (wavelength_m * screen_distance_m);
    let (a_top, a_bottom) = slit_amps;
    (a_top + a_bottom * Complex64::from_polar(1.0, delta_phi)).norm_sqr() / cells as f64
}

/// Singlet spin correlation E(θa, θb) computed directly on the 4-dimensional
/// two-spin space: ⟨ψ|(n̂_a·σ)⊗(n̂_b·σ)|ψ⟩ with analyzers in the z–x plane.
pub fn singlet_correlation(theta_a: f64, theta_b: f64) -> f64 {
    let pauli_n = |theta: f64| {
        // n̂·σ for n̂ = (sinθ, 0, cosθ)
        let c = Complex64::new(theta.cos(), 0.0);
        let s = Complex64::new(theta.sin(), 0.0);
        DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
    };
    let a = pauli_n(theta_a);
    let b = pauli_n(theta_b);
    // |ψ⟩ = (|01⟩ − |10⟩)/√2 in the (z-up, z-down) product basis
    let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let psi = [Complex64::ZERO, inv, -inv, Complex64::ZERO];
    let mut out = [Complex64::ZERO; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + j] += a[(i, k)] * b[(j, l)] * psi[2 * k + l];
                }
            }
        }
    }
    let mut acc = Complex64::ZERO;
    for (p, o) in psi.iter().zip(&out) {
        acc += p.conj() * o;
    }
    acc.re
}

/// CHSH combination |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|.
pub fn chsh_combination(e: impl Fn(f64, f64) -> f64, a: f64, b: f64, a2: f64, b2: f64) -> f64 {
    (e(a, b) - e(a, b2) + e(a2, b) + e(a2, b2)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn singlet_correlation_matches_closed_form() {
        for k in 0..24 {
            let ta = k as f64 * PI / 7.3;
            let tb = (k as f64) * 0.41 - 1.2;
            assert_abs_diff_eq!(
                singlet_correlation(ta, tb),
                -(ta - tb).cos(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn singlet_anchor_points() {
        assert_abs_diff_eq!(singlet_correlation(0.0, 0.0), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(singlet_correlation(0.0, PI / 2.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(singlet_correlation(0.0, PI / 3.0), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn chsh_peaks_at_two_sqrt_two() {
        let s = chsh_combination(singlet_correlation, 0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0);
        assert_abs_diff_eq!(s, 2.0 * std::f64::consts::SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn two_path_single_slit_is_flat() {
        let amp = Complex64::new(1.0, 0.0);
        let zero = Complex64::ZERO;
        let i0 = two_path_intensity((amp, zero), 1e-5, 5e-7, 1.0, 0.01, 64);
        let i1 = two_path_intensity((amp, zero), 1e-5, 5e-7, 1.0, 0.17, 64);
        assert_abs_diff_eq!(i0, i1, epsilon = 1e-15);
        assert_abs_diff_eq!(i0, 1.0 / 64.0, epsilon = 1e-15);
    }

    #[test]
    fn two_path_equal_amps_follow_cos_squared() {
        let half = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let (d, lambda, l, m) = (1e-5, 5e-7, 1.0, 64usize);
        for k in 0..20 {
            let x = -0.2 + 0.021 * k as f64;
            // |a(1 + e^{iΔ})|² = 4|a|²cos²(Δ/2) with Δ/2 = πdx/(λL)
            let expected = (std::f64::consts::PI * d * x / (lambda * l)).cos().powi(2)
                * 4.0
                * half.norm_sqr()
                / m as f64;
            let got = two_path_intensity((half, half), d, lambda, l, x, m);
            assert_abs_diff_eq!(got, expected, epsilon = 1e-15);
        }
    }
}
