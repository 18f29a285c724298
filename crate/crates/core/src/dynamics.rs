//! Exact linear unitary operators on sparse states.
//!
//! An operator acts on a listed subset of subsystems and is the identity on
//! every other factor. Two kernel representations are used:
//!
//! * a dense unitary matrix on the acting subspace, for Hamiltonian
//!   exponentials, rotations, and propagation maps — capped at
//!   [`DEFAULT_ACTING_CAP`] so the matrix stays small;
//! * a permutation of the acting basis, for conditional pointer flips and
//!   record reads. Permutations store one index per basis state, so they
//!   scale to acting subspaces as large as the layout itself, and applying
//!   one touches each stored amplitude exactly once.
//!
//! Subsystem promotion and summation orders are fixed by layout order, so
//! application is deterministic down to the bit.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::layout::{SubsetIndexer, SystemLayout};
use crate::hilbert::state::StateVector;

/// Default cap on the acting-subspace dimension of a dense kernel.
pub const DEFAULT_ACTING_CAP: u64 = 1 << 12;

/// Dense-kernel unitarity is verified at construction up to this dimension.
const EAGER_UNITARITY_CHECK_DIM: usize = 256;

/// How an operator was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Single-control pointer flip.
    Flip,
    /// Jointly conditioned basis permutation (record reads, detections).
    Permutation,
    /// Hamiltonian exponential exp(−i·g·t·H).
    Exp,
    /// Product of two operators.
    Composition,
}

#[derive(Debug, Clone)]
enum Kernel {
    Dense(DMatrix<Complex64>),
    /// Basis permutation: |j⟩ ↦ |map[j]⟩.
    Permutation(Vec<u32>),
}

/// Exact unitary on a layout, identity outside its acting subsystems.
#[derive(Debug, Clone)]
pub struct UnitaryOp {
    layout: Arc<SystemLayout>,
    indexer: SubsetIndexer,
    kernel: Kernel,
    provenance: Provenance,
}

/// Hermitian coupling term on a small acting subspace, with strength `g`
/// (energy units, ħ = 1).
#[derive(Debug, Clone)]
pub struct HamiltonianTerm {
    layout: Arc<SystemLayout>,
    acting: Vec<String>,
    kernel: DMatrix<Complex64>,
    coupling: f64,
}

impl HamiltonianTerm {
    pub fn new(
        layout: &Arc<SystemLayout>,
        acting: &[&str],
        kernel: DMatrix<Complex64>,
        coupling: f64,
    ) -> Result<Self> {
        let indexer = SubsetIndexer::for_names(layout, acting)?;
        if kernel.nrows() != kernel.ncols() || kernel.nrows() as u64 != indexer.dim() {
            return Err(Error::schema(format!(
                "Hamiltonian kernel is {}x{}, acting subspace has dimension {}",
                kernel.nrows(),
                kernel.ncols(),
                indexer.dim()
            )));
        }
        if indexer.dim() > DEFAULT_ACTING_CAP {
            return Err(Error::capacity(format!(
                "acting subspace dimension {} exceeds dense cap {DEFAULT_ACTING_CAP}",
                indexer.dim()
            )));
        }
        let defect = (&kernel - kernel.adjoint())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if defect > 1e-12 {
            return Err(Error::schema(format!(
                "Hamiltonian kernel is not Hermitian (defect {defect:.3e})"
            )));
        }
        Ok(HamiltonianTerm {
            layout: Arc::clone(layout),
            acting: acting.iter().map(|s| s.to_string()).collect(),
            kernel,
            coupling,
        })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

/// Rule row for [`UnitaryOp::conditioned_permutation`]: when every control
/// carries the listed label, apply the listed target-label transpositions
/// in order.
#[derive(Debug, Clone)]
pub struct ConditionedSwaps<'a> {
    pub when: Vec<&'a str>,
    pub swaps: Vec<(&'a str, &'a str)>,
}

impl UnitaryOp {
    /// Swaps `from`/`to` on `target` whenever `control` carries one of
    /// `control_labels`; identity otherwise. Self-inverse.
    pub fn controlled_flip(
        layout: &Arc<SystemLayout>,
        control: &str,
        control_labels: &[&str],
        target: &str,
        from: &str,
        to: &str,
    ) -> Result<Self> {
        if control == target {
            return Err(Error::schema(
                "controlled flip needs distinct control and target subsystems",
            ));
        }
        if from == to {
            return Err(Error::schema("flip labels must differ"));
        }
        let swaps = [(from, to)];
        let rules: Vec<ConditionedSwaps> = control_labels
            .iter()
            .map(|&label| ConditionedSwaps {
                when: vec![label],
                swaps: swaps.to_vec(),
            })
            .collect();
        let mut op = Self::conditioned_permutation(layout, &[control], target, &rules)?;
        op.provenance = Provenance::Flip;
        Ok(op)
    }

    /// Permutation of the target basis conditioned jointly on the labels of
    /// one or more control subsystems. Control tuples not listed act as the
    /// identity.
    pub fn conditioned_permutation(
        layout: &Arc<SystemLayout>,
        controls: &[&str],
        target: &str,
        rules: &[ConditionedSwaps<'_>],
    ) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::schema("conditioned permutation needs at least one control"));
        }
        if controls.contains(&target) {
            return Err(Error::schema(
                "target subsystem cannot also be a control",
            ));
        }
        let target_pos = layout.position_of(target)?;
        let control_pos: Vec<usize> = controls
            .iter()
            .map(|c| layout.position_of(c))
            .collect::<Result<_>>()?;

        let mut acting: Vec<usize> = control_pos.clone();
        acting.push(target_pos);
        acting.sort_unstable();
        if acting.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::schema("control subsystems must be distinct"));
        }
        let indexer = SubsetIndexer::new(layout, &acting);

        let target_dim = layout.subsystem(target_pos).dim();
        // Slot of each acting position inside the sorted acting list.
        let slot_of = |pos: usize| acting.iter().position(|&p| p == pos).unwrap();
        let target_slot = slot_of(target_pos);
        let control_slots: Vec<usize> = control_pos.iter().map(|&p| slot_of(p)).collect();

        // Per-rule target permutation, keyed by the control ordinal tuple.
        let mut rule_perms: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for rule in rules {
            if rule.when.len() != controls.len() {
                return Err(Error::schema(format!(
                    "rule lists {} control labels, expected {}",
                    rule.when.len(),
                    controls.len()
                )));
            }
            let key: Vec<usize> = rule
                .when
                .iter()
                .zip(&control_pos)
                .map(|(label, &pos)| layout.label_ordinal(pos, label))
                .collect::<Result<_>>()?;
            let mut perm: Vec<usize> = (0..target_dim).collect();
            for &(a, b) in &rule.swaps {
                let ia = layout.label_ordinal(target_pos, a)?;
                let ib = layout.label_ordinal(target_pos, b)?;
                if ia == ib {
                    return Err(Error::schema(format!("swap `{a}`↔`{b}` is degenerate")));
                }
                // Post-compose the transposition.
                for image in perm.iter_mut() {
                    if *image == ia {
                        *image = ib;
                    } else if *image == ib {
                        *image = ia;
                    }
                }
            }
            if rule_perms.insert(key, perm).is_some() {
                return Err(Error::schema(
                    "two rules share the same control label tuple",
                ));
            }
        }

        let dim = indexer.dim() as usize;
        let mut map = vec![0u32; dim];
        for local in 0..dim {
            let ords = indexer.unpack_local(local as u64);
            let key: Vec<usize> = control_slots.iter().map(|&s| ords[s]).collect();
            let image = match rule_perms.get(&key) {
                Some(perm) => {
                    let mut out = ords.clone();
                    out[target_slot] = perm[ords[target_slot]];
                    indexer.pack_local(&out)
                }
                None => local as u64,
            };
            map[local] = image as u32;
        }
        debug_assert!(permutation_is_bijective(&map));

        Ok(UnitaryOp {
            layout: Arc::clone(layout),
            indexer,
            kernel: Kernel::Permutation(map),
            provenance: Provenance::Permutation,
        })
    }

    /// Wraps a dense unitary kernel acting on the listed subsystems.
    pub fn from_dense_kernel(
        layout: &Arc<SystemLayout>,
        acting: &[&str],
        kernel: DMatrix<Complex64>,
    ) -> Result<Self> {
        let indexer = SubsetIndexer::for_names(layout, acting)?;
        if indexer.dim() > DEFAULT_ACTING_CAP {
            return Err(Error::capacity(format!(
                "acting subspace dimension {} exceeds dense cap {DEFAULT_ACTING_CAP}",
                indexer.dim()
            )));
        }
        if kernel.nrows() != kernel.ncols() || kernel.nrows() as u64 != indexer.dim() {
            return Err(Error::schema(format!(
                "kernel is {}x{}, acting subspace has dimension {}",
                kernel.nrows(),
                kernel.ncols(),
                indexer.dim()
            )));
        }
        if kernel.nrows() <= EAGER_UNITARITY_CHECK_DIM {
            let defect = dense_unitarity_defect(&kernel);
            if defect > 1e-12 {
                return Err(Error::schema(format!(
                    "kernel is not unitary (defect {defect:.3e})"
                )));
            }
        }
        Ok(UnitaryOp {
            layout: Arc::clone(layout),
            indexer,
            kernel: Kernel::Dense(kernel),
            provenance: Provenance::Composition,
        })
    }

    /// exp(−i·g·t·H) via Hermitian eigendecomposition of the term's kernel.
    pub fn hamiltonian_evolution(term: &HamiltonianTerm, t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::precondition("evolution time must be finite"));
        }
        let eig = term.kernel.clone().symmetric_eigen();
        let dim = term.kernel.nrows();
        let mut phased = eig.eigenvectors.clone();
        for (col, &lambda) in eig.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -term.coupling * t * lambda);
            for row in 0..dim {
                phased[(row, col)] *= phase;
            }
        }
        let kernel = phased * eig.eigenvectors.adjoint();
        let acting: Vec<&str> = term.acting.iter().map(|s| s.as_str()).collect();
        let mut op = Self::from_dense_kernel(&term.layout, &acting, kernel)?;
        op.provenance = Provenance::Exp;
        Ok(op)
    }

    /// Operator acting as `second ∘ first` on the union of their factors.
    ///
    /// Two permutations compose into a permutation at any size; anything
    /// else densifies the union subspace, which must fit the dense cap.
    pub fn compose(first: &UnitaryOp, second: &UnitaryOp) -> Result<Self> {
        if !SystemLayout::same(&first.layout, &second.layout) {
            return Err(Error::LayoutMismatch(
                "composed operators built over different layouts".into(),
            ));
        }
        let mut union: Vec<usize> = first.indexer.positions().to_vec();
        for &p in second.indexer.positions() {
            if !union.contains(&p) {
                union.push(p);
            }
        }
        union.sort_unstable();
        let indexer = SubsetIndexer::new(&first.layout, &union);
        let dim = indexer.dim();

        let kernel = match (&first.kernel, &second.kernel) {
            (Kernel::Permutation(_), Kernel::Permutation(_)) => {
                let m1 = promote_permutation(first, &indexer);
                let m2 = promote_permutation(second, &indexer);
                let map: Vec<u32> = m1.iter().map(|&mid| m2[mid as usize]).collect();
                Kernel::Permutation(map)
            }
            _ => {
                if dim > DEFAULT_ACTING_CAP {
                    return Err(Error::capacity(format!(
                        "dense composition over union dimension {dim} exceeds cap {DEFAULT_ACTING_CAP}"
                    )));
                }
                let d1 = promote_dense(first, &indexer);
                let d2 = promote_dense(second, &indexer);
                Kernel::Dense(d2 * d1)
            }
        };

        Ok(UnitaryOp {
            layout: Arc::clone(&first.layout),
            indexer,
            kernel,
            provenance: Provenance::Composition,
        })
    }

    /// |ψ'⟩ = U|ψ⟩, touching only the acting factors.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if !SystemLayout::same(&self.layout, state.layout()) {
            return Err(Error::LayoutMismatch(
                "operator and state built over different layouts".into(),
            ));
        }
        match &self.kernel {
            Kernel::Permutation(map) => {
                let mut out: BTreeMap<u64, Complex64> = BTreeMap::new();
                for (idx, amp) in state.entries() {
                    let local = self.indexer.local_index(idx);
                    let rest = self.indexer.rest_index(idx);
                    let image = self.indexer.combine(rest, map[local as usize] as u64);
                    out.insert(image, amp);
                }
                Ok(state.with_amps(out, 0.0))
            }
            Kernel::Dense(kernel) => {
                let dim = self.indexer.dim() as usize;
                let mut groups: BTreeMap<u64, Vec<(usize, Complex64)>> = BTreeMap::new();
                for (idx, amp) in state.entries() {
                    let local = self.indexer.local_index(idx) as usize;
                    let rest = self.indexer.rest_index(idx);
                    groups.entry(rest).or_default().push((local, amp));
                }
                let threshold = state.prune_threshold();
                let mut out: BTreeMap<u64, Complex64> = BTreeMap::new();
                let mut dropped = 0.0;
                let mut scratch = vec![Complex64::ZERO; dim];
                for (rest, group) in groups {
                    scratch.fill(Complex64::ZERO);
                    for &(j, amp) in &group {
                        let column = kernel.column(j);
                        for (i, value) in scratch.iter_mut().enumerate() {
                            *value += column[i] * amp;
                        }
                    }
                    for (i, &value) in scratch.iter().enumerate() {
                        if value.norm() >= threshold {
                            out.insert(self.indexer.combine(rest, i as u64), value);
                        } else {
                            dropped += value.norm_sqr();
                        }
                    }
                }
                Ok(state.with_amps(out, dropped))
            }
        }
    }

    pub fn layout(&self) -> &Arc<SystemLayout> {
        &self.layout
    }

    /// Names of the acting subsystems, in layout order.
    pub fn acting_subsystems(&self) -> Vec<String> {
        self.indexer
            .positions()
            .iter()
            .map(|&p| self.layout.subsystem(p).name.clone())
            .collect()
    }

    pub fn acting_dim(&self) -> u64 {
        self.indexer.dim()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Max elementwise |U†U − I| of the kernel. Zero for permutations,
    /// which are bijective by construction.
    pub fn unitarity_defect(&self) -> f64 {
        match &self.kernel {
            Kernel::Permutation(map) => {
                if permutation_is_bijective(map) {
                    0.0
                } else {
                    1.0
                }
            }
            Kernel::Dense(kernel) => dense_unitarity_defect(kernel),
        }
    }

    /// Materializes the kernel as a dense matrix on the acting subspace.
    pub fn dense_kernel(&self) -> DMatrix<Complex64> {
        match &self.kernel {
            Kernel::Dense(kernel) => kernel.clone(),
            Kernel::Permutation(map) => {
                let dim = map.len();
                let mut out = DMatrix::from_element(dim, dim, Complex64::ZERO);
                for (j, &i) in map.iter().enumerate() {
                    out[(i as usize, j)] = Complex64::ONE;
                }
                out
            }
        }
    }

    /// Dense matrix of the operator promoted to the full composite space.
    /// Intended for small layouts (oracle checks).
    pub fn full_matrix(&self) -> Result<DMatrix<Complex64>> {
        let dim = self.layout.dim();
        if dim > (1 << 10) {
            return Err(Error::capacity(format!(
                "full promotion of dimension {dim} refused (oracle-scale only)"
            )));
        }
        let dim = dim as usize;
        let kernel = self.dense_kernel();
        let mut out = DMatrix::from_element(dim, dim, Complex64::ZERO);
        for col in 0..dim as u64 {
            let local = self.indexer.local_index(col) as usize;
            let rest = self.indexer.rest_index(col);
            for row_local in 0..kernel.nrows() {
                let value = kernel[(row_local, local)];
                if value != Complex64::ZERO {
                    let row = self.indexer.combine(rest, row_local as u64);
                    out[(row as usize, col as usize)] = value;
                }
            }
        }
        Ok(out)
    }
}

/// Applies a pipeline of operators in order.
pub fn apply_pipeline(ops: &[UnitaryOp], state: &StateVector) -> Result<StateVector> {
    let mut current = state.clone();
    for op in ops {
        current = op.apply(&current)?;
    }
    Ok(current)
}

fn permutation_is_bijective(map: &[u32]) -> bool {
    let mut seen = vec![false; map.len()];
    for &i in map {
        let i = i as usize;
        if i >= map.len() || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

fn dense_unitarity_defect(kernel: &DMatrix<Complex64>) -> f64 {
    let product = kernel.adjoint() * kernel;
    let dim = kernel.nrows();
    let mut defect = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let expected = if i == j { Complex64::ONE } else { Complex64::ZERO };
            defect = defect.max((product[(i, j)] - expected).norm());
        }
    }
    defect
}

/// Lifts a permutation kernel onto a larger acting set.
fn promote_permutation(op: &UnitaryOp, union: &SubsetIndexer) -> Vec<u32> {
    let Kernel::Permutation(map) = &op.kernel else {
        unreachable!("promote_permutation on dense kernel")
    };
    // Slot of each op position inside the union's sorted positions.
    let slots: Vec<usize> = op
        .indexer
        .positions()
        .iter()
        .map(|p| union.positions().iter().position(|q| q == p).unwrap())
        .collect();
    let dim = union.dim() as usize;
    let mut out = vec![0u32; dim];
    for (local, slot) in out.iter_mut().enumerate() {
        let ords = union.unpack_local(local as u64);
        let own: Vec<usize> = slots.iter().map(|&s| ords[s]).collect();
        let own_local = op.indexer.pack_local(&own);
        let image_ords = op.indexer.unpack_local(map[own_local as usize] as u64);
        let mut new_ords = ords.clone();
        for (k, &s) in slots.iter().enumerate() {
            new_ords[s] = image_ords[k];
        }
        *slot = union.pack_local(&new_ords) as u32;
    }
    out
}

/// Lifts any kernel to a dense matrix on a larger acting set.
fn promote_dense(op: &UnitaryOp, union: &SubsetIndexer) -> DMatrix<Complex64> {
    let kernel = op.dense_kernel();
    let slots: Vec<usize> = op
        .indexer
        .positions()
        .iter()
        .map(|p| union.positions().iter().position(|q| q == p).unwrap())
        .collect();
    let dim = union.dim() as usize;
    let mut out = DMatrix::from_element(dim, dim, Complex64::ZERO);
    for col in 0..dim {
        let col_ords = union.unpack_local(col as u64);
        let own_col: Vec<usize> = slots.iter().map(|&s| col_ords[s]).collect();
        let own_col_local = op.indexer.pack_local(&own_col) as usize;
        for own_row_local in 0..kernel.nrows() {
            let value = kernel[(own_row_local, own_col_local)];
            if value == Complex64::ZERO {
                continue;
            }
            let row_ords_own = op.indexer.unpack_local(own_row_local as u64);
            let mut row_ords = col_ords.clone();
            for (k, &s) in slots.iter().enumerate() {
                row_ords[s] = row_ords_own[k];
            }
            let row = union.pack_local(&row_ords) as usize;
            out[(row, col)] = value;
        }
    }
    out
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

    fn det_minus_flip(layout: &Arc<SystemLayout>) -> UnitaryOp {
        UnitaryOp::controlled_flip(layout, "spin", &["-"], "Det-", "no", "yes").unwrap()
    }

    #[test]
    fn flip_moves_conditioned_pointer() {
        let layout = sg_layout();
        let flip = det_minus_flip(&layout);
        let minus = version(&layout, "-");
        let plus = version(&layout, "+");

        let fired = flip.apply(&minus).unwrap();
        let expected = StateVector::basis_state(
            &layout,
            &[("spin", "-"), ("Det-", "yes"), ("Det+", "no"), ("Obs", "blank")],
        )
        .unwrap();
        assert_abs_diff_eq!(fired.distance(&expected).unwrap(), 0.0, epsilon = 1e-15);

        let idle = flip.apply(&plus).unwrap();
        assert_abs_diff_eq!(idle.distance(&plus).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn flip_is_involution() {
        let layout = sg_layout();
        let flip = det_minus_flip(&layout);
        for spin in ["-", "+"] {
            let v = version(&layout, spin);
            let back = flip.apply(&flip.apply(&v).unwrap()).unwrap();
            assert_abs_diff_eq!(back.distance(&v).unwrap(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn flip_kernel_is_unitary() {
        let layout = sg_layout();
        let flip = det_minus_flip(&layout);
        assert_eq!(flip.unitarity_defect(), 0.0);
        let dense = flip.dense_kernel();
        assert!(dense_unitarity_defect(&dense) < 1e-15);
    }

    #[test]
    fn control_equal_target_rejected() {
        let layout = sg_layout();
        let err =
            UnitaryOp::controlled_flip(&layout, "Det-", &["no"], "Det-", "no", "yes").unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn evolution_at_zero_time_is_identity() {
        let layout = sg_layout();
        let mut h = DMatrix::from_element(4, 4, Complex64::ZERO);
        h[(0, 1)] = Complex64::ONE;
        h[(1, 0)] = Complex64::ONE;
        let term = HamiltonianTerm::new(&layout, &["spin", "Det-"], h, 1.0).unwrap();
        let u = UnitaryOp::hamiltonian_evolution(&term, 0.0).unwrap();
        let psi = version(&layout, "-");
        let out = u.apply(&psi).unwrap();
        assert_abs_diff_eq!(out.distance(&psi).unwrap(), 0.0, epsilon = 1e-12);
    }

    /// Pointer Hamiltonian H = |−⟩⟨−| ⊗ σx on (spin, Det−) at g·t = π/2
    /// equals the controlled flip times −i on the flipped block. Expected
    /// values follow from exp(−iθσx) = cosθ·I − i·sinθ·σx at θ = π/2.
    #[test]
    fn half_pi_pulse_matches_flip_up_to_block_phase() {
        let layout = sg_layout();
        // Acting order (spin, Det-): basis (-,no),(-,yes),(+,no),(+,yes).
        let mut h = DMatrix::from_element(4, 4, Complex64::ZERO);
        h[(0, 1)] = Complex64::ONE;
        h[(1, 0)] = Complex64::ONE;
        let term = HamiltonianTerm::new(&layout, &["spin", "Det-"], h, 1.0).unwrap();
        let u = UnitaryOp::hamiltonian_evolution(&term, std::f64::consts::FRAC_PI_2).unwrap();
        let flip = det_minus_flip(&layout);

        let minus = version(&layout, "-");
        let evolved = u.apply(&minus).unwrap();
        let flipped = flip.apply(&minus).unwrap();
        let overlap = flipped.inner_product(&evolved).unwrap();
        // fidelity 1, phase −i on the flipped block
        assert_abs_diff_eq!(overlap.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(overlap.im, -1.0, epsilon = 1e-12);

        let plus = version(&layout, "+");
        let idle = u.apply(&plus).unwrap();
        assert_abs_diff_eq!(idle.distance(&plus).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn one_parameter_group_property() {
        let layout = sg_layout();
        let mut h = DMatrix::from_element(4, 4, Complex64::ZERO);
        h[(0, 1)] = Complex64::new(0.3, -0.7);
        h[(1, 0)] = Complex64::new(0.3, 0.7);
        h[(2, 2)] = Complex64::new(1.1, 0.0);
        h[(3, 3)] = Complex64::new(-0.4, 0.0);
        let term = HamiltonianTerm::new(&layout, &["spin", "Det-"], h, 0.9).unwrap();
        for (t1, t2) in [(0.37, 1.21), (-0.5, 0.25), (2.0, -3.0)] {
            let u1 = UnitaryOp::hamiltonian_evolution(&term, t1).unwrap();
            let u2 = UnitaryOp::hamiltonian_evolution(&term, t2).unwrap();
            let u12 = UnitaryOp::compose(&u1, &u2).unwrap();
            let direct = UnitaryOp::hamiltonian_evolution(&term, t1 + t2).unwrap();
            let diff = (u12.dense_kernel() - direct.dense_kernel())
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-10, "group property violated: {diff}");
        }
    }

    #[test]
    fn non_hermitian_kernel_rejected() {
        let layout = sg_layout();
        let mut h = DMatrix::from_element(4, 4, Complex64::ZERO);
        h[(0, 1)] = Complex64::ONE;
        assert!(HamiltonianTerm::new(&layout, &["spin", "Det-"], h, 1.0).is_err());
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let layout = sg_layout();
        let mut h = DMatrix::from_element(4, 4, Complex64::ZERO);
        h[(0, 1)] = Complex64::new(0.0, -1.0);
        h[(1, 0)] = Complex64::new(0.0, 1.0);
        let term = HamiltonianTerm::new(&layout, &["spin", "Det-"], h, 1.3).unwrap();
        let u = UnitaryOp::hamiltonian_evolution(&term, 0.77).unwrap();
        let u_inv = UnitaryOp::hamiltonian_evolution(&term, -0.77).unwrap();
        let id = UnitaryOp::compose(&u, &u_inv).unwrap();
        let defect = {
            let k = id.dense_kernel();
            let mut d = 0.0f64;
            for i in 0..k.nrows() {
                for j in 0..k.ncols() {
                    let expected = if i == j { Complex64::ONE } else { Complex64::ZERO };
                    d = d.max((k[(i, j)] - expected).norm());
                }
            }
            d
        };
        assert!(defect < 1e-12);
        assert!(id.unitarity_defect() < 1e-11);
    }

    #[test]
    fn permutation_composition_stays_permutation() {
        let layout = sg_layout();
        let f1 = det_minus_flip(&layout);
        let f2 = UnitaryOp::controlled_flip(&layout, "spin", &["+"], "Det+", "no", "yes").unwrap();
        let composed = UnitaryOp::compose(&f1, &f2).unwrap();
        assert_eq!(composed.unitarity_defect(), 0.0);
        assert_eq!(composed.acting_dim(), 8);

        let psi = StateVector::superpose(&[
            (Complex64::new(0.6, 0.0), &version(&layout, "-")),
            (Complex64::new(0.8, 0.0), &version(&layout, "+")),
        ])
        .unwrap();
        let sequential = f2.apply(&f1.apply(&psi).unwrap()).unwrap();
        let fused = composed.apply(&psi).unwrap();
        assert_abs_diff_eq!(sequential.distance(&fused).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn apply_preserves_norm_and_linearity() {
        let layout = sg_layout();
        let flip = det_minus_flip(&layout);
        let v1 = version(&layout, "-");
        let v2 = version(&layout, "+");
        let a1 = Complex64::new(0.48, -0.36);
        let a2 = Complex64::new(0.64, 0.48);
        let psi = StateVector::superpose(&[(a1, &v1), (a2, &v2)]).unwrap();

        let applied = flip.apply(&psi).unwrap();
        assert_abs_diff_eq!(applied.norm_sqr(), psi.norm_sqr(), epsilon = 1e-12);

        let by_parts = StateVector::superpose(&[
            (a1, &flip.apply(&v1).unwrap()),
            (a2, &flip.apply(&v2).unwrap()),
        ])
        .unwrap();
        assert_abs_diff_eq!(applied.distance(&by_parts).unwrap(), 0.0, epsilon = 1e-12);
    }
}
