//! Example and class identifiers and the labeled set `L`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 0-based index of an example in the pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExampleId(pub usize);

/// 0-based class index. By convention the out-of-distribution class is `K - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub usize);

impl ExampleId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl ClassId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }

    /// The out-of-distribution class for a `k`-class problem.
    pub fn ood(k: usize) -> Self {
        ClassId(k - 1)
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Observed labels in the order they were collected. Labels never change once recorded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabeledSet {
    order: Vec<(ExampleId, ClassId)>,
    index: HashMap<ExampleId, ClassId>,
}

impl LabeledSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from `(id, label)` pairs, rejecting duplicate ids.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (ExampleId, ClassId)>,
    {
        let mut set = Self::new();
        for (id, class) in pairs {
            set.insert(id, class)?;
        }
        Ok(set)
    }

    /// Records a label. Re-inserting an id is an error, even with the same label.
    pub fn insert(&mut self, id: ExampleId, class: ClassId) -> Result<()> {
        if self.index.contains_key(&id) {
            return Err(Error::input(format!("example {id} is already labeled")));
        }
        self.index.insert(id, class);
        self.order.push((id, class));
        Ok(())
    }

    pub fn get(&self, id: ExampleId) -> Option<ClassId> {
        self.index.get(&id).copied()
    }

    pub fn contains(&self, id: ExampleId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (ExampleId, ClassId)> + '_ {
        self.order.iter().copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ExampleId> + '_ {
        self.order.iter().map(|&(id, _)| id)
    }

    /// Number of labeled examples per class, for classes `0..k`.
    pub fn class_counts(&self, k: usize) -> Vec<usize> {
        let mut counts = vec![0; k];
        for &(_, c) in &self.order {
            if c.0 < k {
                counts[c.0] += 1;
            }
        }
        counts
    }

    pub fn distinct_classes(&self) -> usize {
        let mut seen: Vec<ClassId> = self.order.iter().map(|&(_, c)| c).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Dense per-example label lookup for a pool of `n` examples.
    pub fn dense(&self, n: usize) -> Result<Vec<Option<ClassId>>> {
        let mut out = vec![None; n];
        for &(id, c) in &self.order {
            if id.0 >= n {
                return Err(Error::input(format!(
                    "labeled example {id} is outside a pool of {n}"
                )));
            }
            out[id.0] = Some(c);
        }
        Ok(out)
    }

    /// Checks every id is `< n` and every label `< k`.
    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        for &(id, c) in &self.order {
            if id.0 >= n {
                return Err(Error::input(format!("label index {id} out of range for N={n}")));
            }
            if c.0 >= k {
                return Err(Error::input(format!("label {c} out of range for K={k}")));
            }
        }
        Ok(())
    }

    /// Unlabeled ids of a pool of size `n`, ascending.
    pub fn unlabeled(&self, n: usize) -> Vec<ExampleId> {
        (0..n)
            .map(ExampleId)
            .filter(|id| !self.index.contains_key(id))
            .collect()
    }
}
