//! Sparse state vectors over a [`SystemLayout`].
//!
//! Amplitudes are stored in a sorted map keyed by packed composite index,
//! so every reduction (norms, inner products, traces) sums in ascending
//! index order and results are bitwise reproducible. Entries whose modulus
//! falls below the prune threshold are dropped and their squared modulus is
//! accumulated in a pruned-mass counter that experiments surface in
//! reports.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::layout::SystemLayout;

/// Default modulus threshold below which amplitudes are pruned.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-14;

/// Sparse complex amplitude vector over a layout's composite index space.
#[derive(Debug, Clone)]
pub struct StateVector {
    layout: Arc<SystemLayout>,
    amps: BTreeMap<u64, Complex64>,
    prune_threshold: f64,
    pruned_mass: f64,
}

impl StateVector {
    /// The zero vector.
    pub fn zero(layout: Arc<SystemLayout>) -> Self {
        StateVector {
            layout,
            amps: BTreeMap::new(),
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            pruned_mass: 0.0,
        }
    }

    /// Basis state for a complete (subsystem → label) assignment.
    pub fn basis_state(layout: &Arc<SystemLayout>, assignment: &[(&str, &str)]) -> Result<Self> {
        let index = layout.index_of_labels(assignment)?;
        let mut amps = BTreeMap::new();
        amps.insert(index, Complex64::new(1.0, 0.0));
        Ok(StateVector {
            layout: Arc::clone(layout),
            amps,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
            pruned_mass: 0.0,
        })
    }

    /// Builds a state from raw (index, amplitude) pairs, pruning as it goes.
    /// Duplicate indices accumulate.
    pub fn from_entries<I>(layout: Arc<SystemLayout>, entries: I) -> Self
    where
        I: IntoIterator<Item = (u64, Complex64)>,
    {
        let mut state = StateVector::zero(layout);
        for (idx, amp) in entries {
            debug_assert!(idx < state.layout.dim());
            *state.amps.entry(idx).or_insert(Complex64::ZERO) += amp;
        }
        state.prune();
        state
    }

    /// Componentwise complex linear combination of states sharing a layout.
    /// No implicit normalization; the result is pruned.
    pub fn superpose(terms: &[(Complex64, &StateVector)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::schema("superpose needs at least one term"))?;
        for (_, term) in terms {
            if !first.same_layout(term) {
                return Err(Error::LayoutMismatch(
                    "superpose terms built over different layouts".into(),
                ));
            }
        }
        let mut amps: BTreeMap<u64, Complex64> = BTreeMap::new();
        let mut inherited = 0.0;
        for (coeff, term) in terms {
            inherited += coeff.norm_sqr() * term.pruned_mass;
            for (&idx, &amp) in &term.amps {
                *amps.entry(idx).or_insert(Complex64::ZERO) += coeff * amp;
            }
        }
        let mut state = StateVector {
            layout: Arc::clone(&first.layout),
            amps,
            prune_threshold: first.prune_threshold,
            pruned_mass: inherited,
        };
        state.prune();
        Ok(state)
    }

    pub fn layout(&self) -> &Arc<SystemLayout> {
        &self.layout
    }

    pub fn same_layout(&self, other: &StateVector) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout
    }

    /// Stored (index, amplitude) pairs in ascending index order.
    pub fn entries(&self) -> impl Iterator<Item = (u64, Complex64)> + '_ {
        self.amps.iter().map(|(&i, &a)| (i, a))
    }

    pub fn support_size(&self) -> usize {
        self.amps.len()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, index: u64) -> Complex64 {
        self.amps.get(&index).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    /// Accumulated squared modulus of every amplitude pruned so far along
    /// this state's history (inherited through superpose and apply).
    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    /// Σ |amplitude|², summed in ascending index order.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self|other⟩ = Σ conj(self_i)·other_i over the support intersection.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if !self.same_layout(other) {
            return Err(Error::LayoutMismatch(
                "inner product of states over different layouts".into(),
            ));
        }
        let mut acc = Complex64::ZERO;
        // Walk the smaller support in ascending order, probe the other map.
        let small = if self.amps.len() <= other.amps.len() {
            &self.amps
        } else {
            &other.amps
        };
        for &idx in small.keys() {
            if let (Some(a), Some(b)) = (self.amps.get(&idx), other.amps.get(&idx)) {
                acc += a.conj() * b;
            }
        }
        Ok(acc)
    }

    /// Scales every amplitude by a constant.
    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for amp in out.amps.values_mut() {
            *amp *= factor;
        }
        out.prune();
        out
    }

    /// Returns the state divided by its norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm < self.prune_threshold {
            return Err(Error::precondition(
                "cannot normalize a (numerically) zero state",
            ));
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    /// ‖self − other‖, the 2-norm of the componentwise difference.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        if !self.same_layout(other) {
            return Err(Error::LayoutMismatch(
                "distance between states over different layouts".into(),
            ));
        }
        let mut acc = 0.0;
        let mut it_a = self.amps.iter().peekable();
        let mut it_b = other.amps.iter().peekable();
        loop {
            match (it_a.peek(), it_b.peek()) {
                (Some((&ia, &aa)), Some((&ib, &ab))) => {
                    if ia == ib {
                        acc += (aa - ab).norm_sqr();
                        it_a.next();
                        it_b.next();
                    } else if ia < ib {
                        acc += aa.norm_sqr();
                        it_a.next();
                    } else {
                        acc += ab.norm_sqr();
                        it_b.next();
                    }
                }
                (Some((_, &aa)), None) => {
                    acc += aa.norm_sqr();
                    it_a.next();
                }
                (None, Some((_, &ab))) => {
                    acc += ab.norm_sqr();
                    it_b.next();
                }
                (None, None) => break,
            }
        }
        Ok(acc.sqrt())
    }

    /// Builds the replacement amplitude map for this state; used by
    /// operator application.
    pub(crate) fn with_amps(&self, amps: BTreeMap<u64, Complex64>, extra_pruned: f64) -> Self {
        StateVector {
            layout: Arc::clone(&self.layout),
            amps,
            prune_threshold: self.prune_threshold,
            pruned_mass: self.pruned_mass + extra_pruned,
        }
    }

    fn prune(&mut self) {
        let threshold = self.prune_threshold;
        let mut dropped = 0.0;
        self.amps.retain(|_, amp| {
            if amp.norm() < threshold {
                dropped += amp.norm_sqr();
                false
            } else {
                true
            }
        });
        self.pruned_mass += dropped;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sg_layout() -> Arc<SystemLayout> {
        SystemLayout::new(vec![
            ("spin".into(), vec!["-".into(), "+".into()]),
            ("Det-".into(), vec!["no".into(), "yes".into()]),
            ("Det+".into(), vec!["no".into(), "yes".into()]),
            (
                "Obs".into(),
                vec!["blank".into(), "yes,no".into(), "no,yes".into(), "other1".into()],
            ),
        ])
        .unwrap()
    }

    fn version(layout: &Arc<SystemLayout>, spin: &str) -> StateVector {
        StateVector::basis_state(
            layout,
            &[("spin", spin), ("Det-", "no"), ("Det+", "no"), ("Obs", "blank")],
        )
        .unwrap()
    }

    #[test]
    fn basis_state_is_unit() {
        let layout = sg_layout();
        let v = version(&layout, "-");
        assert_eq!(v.support_size(), 1);
        assert_abs_diff_eq!(v.norm_sqr(), 1.0, epsilon = 1e-15);
        let ip = v.inner_product(&v).unwrap();
        assert_abs_diff_eq!(ip.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn distinct_basis_states_orthogonal() {
        let layout = sg_layout();
        let a = version(&layout, "-");
        let b = version(&layout, "+");
        assert_eq!(a.inner_product(&b).unwrap(), Complex64::ZERO);
    }

    #[test]
    fn missing_label_rejected() {
        let layout = sg_layout();
        let err = StateVector::basis_state(
            &layout,
            &[("spin", "-"), ("Det-", "no"), ("Det+", "no"), ("Obs", "nope")],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn superpose_amplitudes_preserved() {
        let layout = sg_layout();
        let v1 = version(&layout, "-");
        let v2 = version(&layout, "+");
        let psi = StateVector::superpose(&[
            (Complex64::new(0.6, 0.0), &v1),
            (Complex64::new(0.8, 0.0), &v2),
        ])
        .unwrap();
        assert_abs_diff_eq!(psi.norm_sqr(), 1.0, epsilon = 1e-12);
        let a1 = psi.inner_product(&v1).unwrap();
        assert_abs_diff_eq!(a1.re, 0.6, epsilon = 1e-15);
        // inner_product recovers the coefficient against an orthonormal term
        let a2 = v2.inner_product(&psi).unwrap();
        assert_abs_diff_eq!(a2.re, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn cancellation_empties_support() {
        let layout = sg_layout();
        let v = version(&layout, "-");
        let zero = StateVector::superpose(&[
            (Complex64::new(1.0, 0.0), &v),
            (Complex64::new(-1.0, 0.0), &v),
        ])
        .unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.norm_sqr(), 0.0);
    }

    #[test]
    fn mixed_layouts_rejected() {
        let a = sg_layout();
        let b = SystemLayout::new(vec![("spin".into(), vec!["-".into(), "+".into()])]).unwrap();
        let va = version(&a, "-");
        let vb = StateVector::basis_state(&b, &[("spin", "-")]).unwrap();
        let err = StateVector::superpose(&[
            (Complex64::ONE, &va),
            (Complex64::ONE, &vb),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::LayoutMismatch(_)));
        assert!(va.inner_product(&vb).is_err());
    }

    #[test]
    fn conjugate_symmetry() {
        let layout = sg_layout();
        let v1 = version(&layout, "-");
        let v2 = version(&layout, "+");
        let a = StateVector::superpose(&[
            (Complex64::new(0.3, 0.4), &v1),
            (Complex64::new(-0.5, 0.1), &v2),
        ])
        .unwrap();
        let b = StateVector::superpose(&[
            (Complex64::new(-0.2, 0.9), &v1),
            (Complex64::new(0.7, 0.3), &v2),
        ])
        .unwrap();
        let ab = a.inner_product(&b).unwrap();
        let ba = b.inner_product(&a).unwrap();
        assert_abs_diff_eq!(ab.re, ba.conj().re, epsilon = 1e-15);
        assert_abs_diff_eq!(ab.im, ba.conj().im, epsilon = 1e-15);
    }

    #[test]
    fn pruning_tracks_mass() {
        let layout = sg_layout();
        let v1 = version(&layout, "-");
        let v2 = version(&layout, "+");
        let tiny = 1e-15;
        let psi = StateVector::superpose(&[
            (Complex64::new(1.0, 0.0), &v1),
            (Complex64::new(tiny, 0.0), &v2),
        ])
        .unwrap();
        assert_eq!(psi.support_size(), 1);
        assert_abs_diff_eq!(psi.pruned_mass(), tiny * tiny, epsilon = 1e-32);
    }
}
