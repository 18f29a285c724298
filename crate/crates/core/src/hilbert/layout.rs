//! Labeled tensor-product index spaces.
//!
//! A [`SystemLayout`] is an ordered list of named subsystems, each with a
//! finite labeled basis. It fixes a bijection between label tuples and
//! packed composite indices via a stride table: the first subsystem is the
//! most significant digit, the last has stride 1.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the composite dimension of a layout.
pub const DEFAULT_COMPOSITE_CAP: u64 = 1 << 24;

/// One named tensor factor with an ordered, labeled basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub name: String,
    pub labels: Vec<String>,
}

impl Subsystem {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }
}

/// Ordered list of subsystems plus the derived stride table.
///
/// The composite index of a label tuple is `Σ ordinal(s) · stride(s)`,
/// bijective over `[0, dim)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLayout {
    subsystems: Vec<Subsystem>,
    strides: Vec<u64>,
    dim: u64,
}

impl SystemLayout {
    /// Builds a layout with the default composite-dimension cap (2^24).
    pub fn new(subsystems: Vec<(String, Vec<String>)>) -> Result<Arc<Self>> {
        Self::with_cap(subsystems, DEFAULT_COMPOSITE_CAP)
    }

    /// Builds a layout with an explicit composite-dimension cap.
    pub fn with_cap(subsystems: Vec<(String, Vec<String>)>, cap: u64) -> Result<Arc<Self>> {
        if subsystems.is_empty() {
            return Err(Error::schema("layout needs at least one subsystem"));
        }
        let mut seen_names = std::collections::BTreeSet::new();
        for (name, labels) in &subsystems {
            if name.is_empty() {
                return Err(Error::schema("subsystem name must be nonempty"));
            }
            if !seen_names.insert(name.clone()) {
                return Err(Error::schema(format!("duplicate subsystem name `{name}`")));
            }
            if labels.is_empty() {
                return Err(Error::schema(format!(
                    "subsystem `{name}` needs at least one basis label"
                )));
            }
            let mut seen_labels = std::collections::BTreeSet::new();
            for label in labels {
                if label.is_empty() {
                    return Err(Error::schema(format!(
                        "subsystem `{name}` has an empty basis label"
                    )));
                }
                if !seen_labels.insert(label.clone()) {
                    return Err(Error::schema(format!(
                        "duplicate basis label `{label}` in subsystem `{name}`"
                    )));
                }
            }
        }

        let mut dim: u64 = 1;
        for (name, labels) in &subsystems {
            dim = dim.checked_mul(labels.len() as u64).ok_or_else(|| {
                Error::capacity(format!("composite dimension overflows u64 at `{name}`"))
            })?;
            if dim > cap {
                return Err(Error::capacity(format!(
                    "composite dimension {dim} exceeds cap {cap} at subsystem `{name}`"
                )));
            }
        }

        let subsystems: Vec<Subsystem> = subsystems
            .into_iter()
            .map(|(name, labels)| Subsystem { name, labels })
            .collect();

        // Row-major strides: last subsystem has stride 1.
        let mut strides = vec![0u64; subsystems.len()];
        let mut acc = 1u64;
        for (k, sub) in subsystems.iter().enumerate().rev() {
            strides[k] = acc;
            acc *= sub.dim() as u64;
        }

        Ok(Arc::new(SystemLayout {
            subsystems,
            strides,
            dim,
        }))
    }

    pub fn dim(&self) -> u64 {
        self.dim
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn stride(&self, position: usize) -> u64 {
        self.strides[position]
    }

    /// Position of a subsystem by name.
    pub fn position_of(&self, name: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::schema(format!("unknown subsystem `{name}`")))
    }

    pub fn subsystem(&self, position: usize) -> &Subsystem {
        &self.subsystems[position]
    }

    /// Ordinal of a label within a subsystem.
    pub fn label_ordinal(&self, position: usize, label: &str) -> Result<usize> {
        let sub = &self.subsystems[position];
        sub.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| {
                Error::schema(format!(
                    "unknown label `{label}` on subsystem `{}`",
                    sub.name
                ))
            })
    }

    /// Packs a full ordinal tuple (one ordinal per subsystem, in layout
    /// order) into a composite index.
    pub fn pack(&self, ordinals: &[usize]) -> u64 {
        debug_assert_eq!(ordinals.len(), self.subsystems.len());
        ordinals
            .iter()
            .zip(&self.strides)
            .map(|(&o, &s)| o as u64 * s)
            .sum()
    }

    /// Ordinal of one subsystem's digit inside a composite index.
    pub fn ordinal_at(&self, index: u64, position: usize) -> usize {
        ((index / self.strides[position]) % self.subsystems[position].dim() as u64) as usize
    }

    /// Unpacks a composite index into the full ordinal tuple.
    pub fn unpack(&self, index: u64) -> Vec<usize> {
        (0..self.subsystems.len())
            .map(|k| self.ordinal_at(index, k))
            .collect()
    }

    /// Label of one subsystem's digit inside a composite index.
    pub fn label_at(&self, index: u64, position: usize) -> &str {
        &self.subsystems[position].labels[self.ordinal_at(index, position)]
    }

    /// True when two layout handles denote the same index space.
    pub fn same(a: &Arc<SystemLayout>, b: &Arc<SystemLayout>) -> bool {
        Arc::ptr_eq(a, b) || a == b
    }

    /// Builds the composite index for a (subsystem name → label) assignment
    /// covering every subsystem exactly once.
    pub fn index_of_labels(&self, assignment: &[(&str, &str)]) -> Result<u64> {
        if assignment.len() != self.subsystems.len() {
            return Err(Error::schema(format!(
                "assignment covers {} subsystems, layout has {}",
                assignment.len(),
                self.subsystems.len()
            )));
        }
        let mut ordinals = vec![usize::MAX; self.subsystems.len()];
        for (name, label) in assignment {
            let pos = self.position_of(name)?;
            if ordinals[pos] != usize::MAX {
                return Err(Error::schema(format!(
                    "subsystem `{name}` assigned more than once"
                )));
            }
            ordinals[pos] = self.label_ordinal(pos, label)?;
        }
        Ok(self.pack(&ordinals))
    }
}

/// Index arithmetic over a subset of a layout's subsystems.
///
/// Splits a composite index into a local part (the subset's digits, packed
/// row-major in layout order) and a rest part (the composite index with the
/// subset digits zeroed). Used by operator application, decomposition, and
/// the partial trace.
#[derive(Debug, Clone)]
pub struct SubsetIndexer {
    positions: Vec<usize>,
    global_strides: Vec<u64>,
    global_dims: Vec<u64>,
    local_strides: Vec<u64>,
    dim: u64,
}

impl SubsetIndexer {
    /// Positions must be sorted ascending and unique (layout order).
    pub fn new(layout: &SystemLayout, positions: &[usize]) -> Self {
        debug_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        let global_strides: Vec<u64> = positions.iter().map(|&p| layout.stride(p)).collect();
        let global_dims: Vec<u64> = positions
            .iter()
            .map(|&p| layout.subsystem(p).dim() as u64)
            .collect();
        let mut local_strides = vec![0u64; positions.len()];
        let mut acc = 1u64;
        for k in (0..positions.len()).rev() {
            local_strides[k] = acc;
            acc *= global_dims[k];
        }
        SubsetIndexer {
            positions: positions.to_vec(),
            global_strides,
            global_dims,
            local_strides,
            dim: acc,
        }
    }

    /// Resolves names to sorted positions and builds the indexer.
    pub fn for_names(layout: &SystemLayout, names: &[&str]) -> Result<Self> {
        let mut positions = Vec::with_capacity(names.len());
        for name in names {
            let p = layout.position_of(name)?;
            if positions.contains(&p) {
                return Err(Error::schema(format!("subsystem `{name}` listed twice")));
            }
            positions.push(p);
        }
        positions.sort_unstable();
        Ok(Self::new(layout, &positions))
    }

    /// Product of the subset dimensions.
    pub fn dim(&self) -> u64 {
        self.dim
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Packed local index of the subset digits inside a composite index.
    pub fn local_index(&self, index: u64) -> u64 {
        let mut local = 0u64;
        for k in 0..self.positions.len() {
            let ord = (index / self.global_strides[k]) % self.global_dims[k];
            local += ord * self.local_strides[k];
        }
        local
    }

    /// Composite index with the subset digits zeroed.
    pub fn rest_index(&self, index: u64) -> u64 {
        let mut rest = index;
        for k in 0..self.positions.len() {
            let ord = (index / self.global_strides[k]) % self.global_dims[k];
            rest -= ord * self.global_strides[k];
        }
        rest
    }

    /// Inverse of `local_index`/`rest_index`: recombines a rest index with
    /// new subset digits.
    pub fn combine(&self, rest: u64, local: u64) -> u64 {
        let mut index = rest;
        for k in 0..self.positions.len() {
            let ord = (local / self.local_strides[k]) % self.global_dims[k];
            index += ord * self.global_strides[k];
        }
        index
    }

    /// Unpacks a local index into per-position ordinals.
    pub fn unpack_local(&self, local: u64) -> Vec<usize> {
        (0..self.positions.len())
            .map(|k| ((local / self.local_strides[k]) % self.global_dims[k]) as usize)
            .collect()
    }

    /// Packs per-position ordinals into a local index.
    pub fn pack_local(&self, ordinals: &[usize]) -> u64 {
        ordinals
            .iter()
            .zip(&self.local_strides)
            .map(|(&o, &s)| o as u64 * s)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subs(pairs: &[(&str, &[&str])]) -> Vec<(String, Vec<String>)> {
        pairs
            .iter()
            .map(|(n, ls)| {
                (
                    n.to_string(),
                    ls.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
                )
            })
            .collect()
    }

    #[test]
    fn single_qubit_dimension() {
        let layout = SystemLayout::new(subs(&[("spin", &["-", "+"])])).unwrap();
        assert_eq!(layout.dim(), 2);
    }

    #[test]
    fn detector_observer_layout_dimension() {
        // spin ⊗ Det- ⊗ Det+ ⊗ Obs(k=4) → 8k = 32
        let layout = SystemLayout::new(subs(&[
            ("spin", &["-", "+"]),
            ("Det-", &["no", "yes"]),
            ("Det+", &["no", "yes"]),
            ("Obs", &["blank", "yes,no", "no,yes", "other1"]),
        ]))
        .unwrap();
        assert_eq!(layout.dim(), 8 * 4);
    }

    #[test]
    fn duplicate_name_rejected() {
        let err = SystemLayout::new(subs(&[("a", &["x"]), ("a", &["y"])])).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn duplicate_label_rejected() {
        let err = SystemLayout::new(subs(&[("a", &["x", "x"])])).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn capacity_cap_enforced() {
        let big: Vec<String> = (0..64).map(|i| format!("l{i}")).collect();
        let subsystems: Vec<(String, Vec<String>)> = (0..5)
            .map(|i| (format!("s{i}"), big.clone()))
            .collect();
        let err = SystemLayout::new(subsystems).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }

    #[test]
    fn index_round_trip_exhaustive() {
        let layout = SystemLayout::new(subs(&[
            ("a", &["0", "1", "2"]),
            ("b", &["x", "y"]),
            ("c", &["p", "q", "r", "s"]),
        ]))
        .unwrap();
        assert_eq!(layout.dim(), 24);
        for idx in 0..layout.dim() {
            let ords = layout.unpack(idx);
            assert_eq!(layout.pack(&ords), idx);
        }
    }

    #[test]
    fn subset_indexer_round_trip() {
        let layout = SystemLayout::new(subs(&[
            ("a", &["0", "1", "2"]),
            ("b", &["x", "y"]),
            ("c", &["p", "q", "r", "s"]),
            ("d", &["u", "v"]),
        ]))
        .unwrap();
        let indexer = SubsetIndexer::for_names(&layout, &["b", "d"]).unwrap();
        assert_eq!(indexer.dim(), 4);
        for idx in 0..layout.dim() {
            let local = indexer.local_index(idx);
            let rest = indexer.rest_index(idx);
            assert_eq!(indexer.combine(rest, local), idx);
            let ords = indexer.unpack_local(local);
            assert_eq!(indexer.pack_local(&ords), local);
        }
    }

    #[test]
    fn index_of_labels_matches_pack() {
        let layout = SystemLayout::new(subs(&[
            ("spin", &["-", "+"]),
            ("Det-", &["no", "yes"]),
        ]))
        .unwrap();
        let idx = layout
            .index_of_labels(&[("Det-", "yes"), ("spin", "-")])
            .unwrap();
        assert_eq!(idx, layout.pack(&[0, 1]));
        assert_eq!(layout.label_at(idx, 0), "-");
        assert_eq!(layout.label_at(idx, 1), "yes");
    }
}
