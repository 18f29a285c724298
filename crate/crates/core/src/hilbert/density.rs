//! Reduced density matrices via the partial trace.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::layout::SubsetIndexer;
use crate::hilbert::state::StateVector;

/// Singular values below this count as zero when ranking a reduced state.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense reduced density matrix over a kept subset of subsystems.
///
/// Rows and columns are indexed by the packed local index of the kept
/// subsystems (in layout order).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    kept: Vec<String>,
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// ρ_keep = Tr_rest |ψ⟩⟨ψ|.
    ///
    /// Amplitudes are grouped by the traced-out rest index; each group
    /// contributes its outer product. Groups and entries are visited in
    /// ascending index order so the accumulation order is fixed.
    pub fn partial_trace(state: &StateVector, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::schema("partial trace needs at least one kept subsystem"));
        }
        let layout = state.layout();
        let indexer = SubsetIndexer::for_names(layout, keep)?;
        let dim = indexer.dim();
        if dim > (1 << 14) {
            return Err(Error::capacity(format!(
                "kept subspace dimension {dim} too large for a dense density matrix"
            )));
        }
        let dim = dim as usize;

        let mut groups: std::collections::BTreeMap<u64, Vec<(u64, Complex64)>> =
            std::collections::BTreeMap::new();
        for (idx, amp) in state.entries() {
            let rest = indexer.rest_index(idx);
            let local = indexer.local_index(idx);
            groups.entry(rest).or_default().push((local, amp));
        }

        let mut entries = DMatrix::from_element(dim, dim, Complex64::ZERO);
        for group in groups.values() {
            for &(i, a) in group {
                for &(j, b) in group {
                    entries[(i as usize, j as usize)] += a * b.conj();
                }
            }
        }

        let kept = indexer
            .positions()
            .iter()
            .map(|&p| layout.subsystem(p).name.clone())
            .collect();
        Ok(DensityMatrix { kept, entries })
    }

    /// Kept subsystem names, in layout order.
    pub fn kept(&self) -> &[String] {
        &self.kept
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|c| c.re).sum()
    }

    /// Max elementwise |ρ − ρ†|.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.entries.adjoint();
        (&self.entries - adj)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = self.entries.clone().symmetric_eigen();
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    /// Number of eigenvalues above `tolerance`.
    pub fn rank(&self, tolerance: f64) -> usize {
        self.eigenvalues().iter().filter(|&&v| v > tolerance).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::layout::SystemLayout;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn two_qubit() -> Arc<SystemLayout> {
        SystemLayout::new(vec![
            ("a".into(), vec!["0".into(), "1".into()]),
            ("b".into(), vec!["0".into(), "1".into()]),
        ])
        .unwrap()
    }

    #[test]
    fn product_state_reduces_to_rank_one() {
        let layout = two_qubit();
        let s = StateVector::basis_state(&layout, &[("a", "1"), ("b", "0")]).unwrap();
        let rho = DensityMatrix::partial_trace(&s, &["a"]).unwrap();
        assert_eq!(rho.dim(), 2);
        assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-15);
        assert_eq!(rho.rank(RANK_TOLERANCE), 1);
        assert_abs_diff_eq!(rho.entries()[(1, 1)].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bell_pair_reduces_to_maximally_mixed() {
        let layout = two_qubit();
        let s00 = StateVector::basis_state(&layout, &[("a", "0"), ("b", "0")]).unwrap();
        let s11 = StateVector::basis_state(&layout, &[("a", "1"), ("b", "1")]).unwrap();
        let inv = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let bell = StateVector::superpose(&[(inv, &s00), (inv, &s11)]).unwrap();
        let rho = DensityMatrix::partial_trace(&bell, &["a"]).unwrap();
        assert_abs_diff_eq!(rho.entries()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.entries()[(1, 1)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(rho.entries()[(0, 1)].norm(), 0.0, epsilon = 1e-15);
        assert_eq!(rho.rank(RANK_TOLERANCE), 2);
    }

    #[test]
    fn unknown_subsystem_rejected() {
        let layout = two_qubit();
        let s = StateVector::basis_state(&layout, &[("a", "0"), ("b", "0")]).unwrap();
        assert!(DensityMatrix::partial_trace(&s, &["c"]).is_err());
    }

    #[test]
    fn hermitian_and_positive() {
        let layout = two_qubit();
        let s00 = StateVector::basis_state(&layout, &[("a", "0"), ("b", "0")]).unwrap();
        let s10 = StateVector::basis_state(&layout, &[("a", "1"), ("b", "0")]).unwrap();
        let s11 = StateVector::basis_state(&layout, &[("a", "1"), ("b", "1")]).unwrap();
        let psi = StateVector::superpose(&[
            (Complex64::new(0.3, 0.4), &s00),
            (Complex64::new(0.5, -0.2), &s10),
            (Complex64::new(-0.1, 0.67), &s11),
        ])
        .unwrap();
        let rho = DensityMatrix::partial_trace(&psi, &["b"]).unwrap();
        assert!(rho.hermiticity_defect() < 1e-12);
        assert_abs_diff_eq!(rho.trace(), psi.norm_sqr(), epsilon = 1e-12);
        assert!(rho.eigenvalues().iter().all(|&v| v >= -1e-12));
    }
}
