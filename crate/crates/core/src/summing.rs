//! Summing functors on a finite set `S = {0..n-1}`.
//!
//! A summing functor is stored as its values on singletons; the value on a
//! subset is the tensor fold of those values in ascending index order.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rescat::{ObjId, ResourceCategory};

/// Default limit on `K^n` for exhaustive scans.
pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SummingError {
    #[error("element {element} out of range for a system of size {n}")]
    OutOfRange { element: usize, n: usize },
    #[error("functor lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("functor space K^n = {k}^{n} exceeds the enumeration cap {cap}")]
    Capacity { k: usize, n: usize, cap: usize },
}

/// Values of a summing functor on the singletons `{0}, …, {n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SummingFunctor(pub Vec<ObjId>);

impl SummingFunctor {
    pub fn new(values: Vec<ObjId>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[ObjId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value on a subset. `∅` goes to the unit.
    pub fn evaluate(&self, cat: &ResourceCategory, subset: &[usize]) -> Result<ObjId, SummingError> {
        let mut members = subset.to_vec();
        members.sort_unstable();
        members.dedup();
        let mut acc = cat.unit();
        for (pos, &i) in members.iter().enumerate() {
            let v = *self.0.get(i).ok_or(SummingError::OutOfRange {
                element: i,
                n: self.0.len(),
            })?;
            acc = if pos == 0 { v } else { cat.tensor(acc, v) };
        }
        Ok(acc)
    }

    /// Value on the whole set `S`.
    pub fn total(&self, cat: &ResourceCategory) -> ObjId {
        let mut it = self.0.iter().copied();
        match it.next() {
            None => cat.unit(),
            Some(first) => it.fold(first, |acc, v| cat.tensor(acc, v)),
        }
    }

    /// Componentwise isomorphism in the groupoid `Ĉ^n`.
    pub fn isomorphic(&self, other: &Self, cat: &ResourceCategory) -> Result<bool, SummingError> {
        if self.len() != other.len() {
            return Err(SummingError::LengthMismatch(self.len(), other.len()));
        }
        Ok(self.0.iter().zip(&other.0).all(|(&a, &b)| cat.iso(a, b)))
    }

    /// Iso-class id of each component; equal keys ⇔ isomorphic functors.
    pub fn iso_key(&self, cat: &ResourceCategory) -> Vec<usize> {
        self.0.iter().map(|&v| cat.iso_class(v)).collect()
    }
}

/// The `K^n` summing functors in lexicographic order, addressable by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FunctorSpace {
    k: usize,
    n: usize,
    len: usize,
}

impl FunctorSpace {
    pub fn new(k: usize, n: usize, cap: usize) -> Result<Self, SummingError> {
        let capacity = SummingError::Capacity { k, n, cap };
        let mut len: usize = 1;
        for _ in 0..n {
            len = len.checked_mul(k).ok_or(capacity.clone())?;
        }
        if len > cap {
            return Err(capacity);
        }
        Ok(Self { k, n, len })
    }

    pub fn objects(&self) -> usize {
        self.k
    }

    pub fn system_size(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Functor at lexicographic position `index` (most significant first).
    pub fn functor(&self, mut index: usize) -> SummingFunctor {
        let mut values = vec![0; self.n];
        for slot in values.iter_mut().rev() {
            *slot = index % self.k;
            index /= self.k;
        }
        SummingFunctor(values)
    }

    pub fn index_of(&self, phi: &SummingFunctor) -> Option<usize> {
        if phi.len() != self.n {
            return None;
        }
        phi.0.iter().try_fold(0usize, |acc, &v| (v < self.k).then(|| acc * self.k + v))
    }

    pub fn iter(&self) -> FunctorIter {
        self.iter_range(0..self.len)
    }

    /// A sub-range, for partitioning a scan across workers.
    pub fn iter_range(&self, range: Range<usize>) -> FunctorIter {
        let next = (range.start < range.end.min(self.len)).then(|| self.functor(range.start));
        FunctorIter {
            k: self.k,
            remaining: range.end.min(self.len).saturating_sub(range.start),
            next,
        }
    }
}

/// Odometer over functor tuples.
#[derive(Debug, Clone)]
pub struct FunctorIter {
    k: usize,
    remaining: usize,
    next: Option<SummingFunctor>,
}

impl Iterator for FunctorIter {
    type Item = SummingFunctor;

    fn next(&mut self) -> Option<SummingFunctor> {
        if self.remaining == 0 {
            return None;
        }
        let current = self.next.take()?;
        self.remaining -= 1;
        if self.remaining > 0 {
            let mut succ = current.clone();
            for slot in succ.0.iter_mut().rev() {
                *slot += 1;
                if *slot < self.k {
                    break;
                }
                *slot = 0;
            }
            self.next = Some(succ);
        }
        Some(current)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for FunctorIter {}

/// All `K^n` summing functors of `cat` on a set of size `n`.
pub fn enumerate_summing_functors(
    cat: &ResourceCategory,
    n: usize,
    cap: usize,
) -> Result<FunctorIter, SummingError> {
    Ok(FunctorSpace::new(cat.objects(), n, cap)?.iter())
}
