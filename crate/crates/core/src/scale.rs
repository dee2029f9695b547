//! Scale-indexed objects on an integer grid `0..=T`, shifts, interleavings,
//! and reversibility.
//!
//! All diagram conditions are read in thin semantics, so each reduces to the
//! existence of arrows. Past the last grid point an object stays at its last
//! value, which keeps `shift` total.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::rescat::{ObjId, TargetCategory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaleError {
    #[error("a scale object needs at least one grid point")]
    Empty,
    #[error("value {value} at scale {s} is not an object of the base category")]
    OutOfRange { s: usize, value: ObjId },
    #[error("no transition arrow from scale {0} to scale {1}")]
    Transition(usize, usize),
    #[error("grid lengths differ: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("no arrow to reverse at scale {0}")]
    NoConversion(usize),
    #[error("the chain is empty")]
    EmptyChain,
    #[error("chain step {0} has no arrow at scale {1}")]
    ChainGap(usize, usize),
}

/// `s ↦ Y(s)` on the grid with transition arrows `Y(s) → Y(s+1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct ScaleObject {
    values: Vec<ObjId>,
}

impl ScaleObject {
    pub fn new(base: &TargetCategory, values: Vec<ObjId>) -> Result<Self, ScaleError> {
        if values.is_empty() {
            return Err(ScaleError::Empty);
        }
        if let Some((s, &value)) = values.iter().enumerate().find(|(_, &v)| v >= base.objects()) {
            return Err(ScaleError::OutOfRange { s, value });
        }
        if let Some(s) = values.windows(2).position(|w| !base.hom(w[0], w[1])) {
            return Err(ScaleError::Transition(s, s + 1));
        }
        Ok(Self { values })
    }

    pub fn constant(obj: ObjId, grid_len: usize) -> Self {
        Self {
            values: vec![obj; grid_len],
        }
    }

    pub fn values(&self) -> &[ObjId] {
        &self.values
    }

    pub fn grid_len(&self) -> usize {
        self.values.len()
    }

    /// `Y(s)`, constant beyond the grid.
    pub fn at(&self, s: usize) -> ObjId {
        self.values[s.min(self.values.len() - 1)]
    }

    /// `T_ε Y`: `s ↦ Y(s + ε)`.
    pub fn shift(&self, eps: usize) -> Self {
        Self {
            values: (0..self.values.len()).map(|s| self.at(s + eps)).collect(),
        }
    }
}

fn same_grid(y: &ScaleObject, z: &ScaleObject) -> Result<usize, ScaleError> {
    if y.grid_len() != z.grid_len() {
        return Err(ScaleError::GridMismatch(y.grid_len(), z.grid_len()));
    }
    Ok(y.grid_len())
}

/// Arrows `Y(s) → Z(s+ε)` and `Z(s) → Y(s+ε)` at every grid point.
pub fn epsilon_interleaved(base: &TargetCategory, y: &ScaleObject, z: &ScaleObject, eps: usize) -> Result<bool, ScaleError> {
    let len = same_grid(y, z)?;
    Ok((0..len).all(|s| base.hom(y.at(s), z.at(s + eps)) && base.hom(z.at(s), y.at(s + eps))))
}

/// A grid distance with `∞` for objects that never interleave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl Distance {
    pub fn within(self, eps: usize) -> bool {
        self <= Distance::Finite(eps)
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }
}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Distance {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Distance::Finite(a), Distance::Finite(b)) => a.cmp(b),
            (Distance::Finite(_), Distance::Infinite) => Ordering::Less,
            (Distance::Infinite, Distance::Finite(_)) => Ordering::Greater,
            (Distance::Infinite, Distance::Infinite) => Ordering::Equal,
        }
    }
}

impl Add for Distance {
    type Output = Distance;

    fn add(self, rhs: Distance) -> Distance {
        match (self, rhs) {
            (Distance::Finite(a), Distance::Finite(b)) => Distance::Finite(a + b),
            _ => Distance::Infinite,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Distance::Finite(d) => ser.serialize_u64(*d as u64),
            Distance::Infinite => ser.serialize_str("inf"),
        }
    }
}

/// Least grid `ε` at which `y` and `z` interleave.
///
/// Shifts of at least `T` all see only the last value, so a scan up to `T`
/// is exhaustive.
pub fn interleaving_distance(base: &TargetCategory, y: &ScaleObject, z: &ScaleObject) -> Result<Distance, ScaleError> {
    let len = same_grid(y, z)?;
    for eps in 0..len {
        if epsilon_interleaved(base, y, z, eps)? {
            return Ok(Distance::Finite(eps));
        }
    }
    Ok(Distance::Infinite)
}

/// Whether the conversion `Y(s) → Z(s)` can be undone after `ε` steps: `Z(s) → Y(s+ε)`.
pub fn epsilon_reversible(base: &TargetCategory, y: &ScaleObject, z: &ScaleObject, s: usize, eps: usize) -> Result<bool, ScaleError> {
    same_grid(y, z)?;
    if !base.hom(y.at(s), z.at(s)) {
        return Err(ScaleError::NoConversion(s));
    }
    Ok(base.hom(z.at(s), y.at(s + eps)))
}

/// [`epsilon_reversible`] at every grid point.
pub fn reversible_everywhere(base: &TargetCategory, y: &ScaleObject, z: &ScaleObject, eps: usize) -> Result<bool, ScaleError> {
    let len = same_grid(y, z)?;
    let mut all = true;
    for s in 0..len {
        all &= epsilon_reversible(base, y, z, s, eps)?;
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvergenceCheck {
    /// Reversing arrows `F(Φ_{k+1})(s) → F(Φ_k)(s+ε)` exist for every `k ≥ n_0`.
    pub hypothesis: bool,
    /// `d(F(Φ_k), L) ≤ ε` for every `k ≥ n_0`.
    pub conclusion: bool,
    /// `d(F(Φ_k), L)` for every `k`.
    pub distances: Vec<Distance>,
}

impl ConvergenceCheck {
    /// Whether the hypothesis implies the conclusion on this chain.
    pub fn confirmed(&self) -> bool {
        !self.hypothesis || self.conclusion
    }

    pub fn holds(&self) -> bool {
        self.hypothesis && self.conclusion
    }
}

/// Tests a finite chain `F(Φ_0) → … → F(Φ_m) = L` against its last element.
pub fn check_convergence(
    base: &TargetCategory,
    chain: &[ScaleObject],
    eps: usize,
    n0: usize,
) -> Result<ConvergenceCheck, ScaleError> {
    let last = chain.last().ok_or(ScaleError::EmptyChain)?;
    for (k, w) in chain.windows(2).enumerate() {
        let len = same_grid(&w[0], &w[1])?;
        if let Some(s) = (0..len).find(|&s| !base.hom(w[0].at(s), w[1].at(s))) {
            return Err(ScaleError::ChainGap(k, s));
        }
    }
    let len = last.grid_len();
    let hypothesis = chain
        .windows(2)
        .skip(n0)
        .all(|w| (0..len).all(|s| base.hom(w[1].at(s), w[0].at(s + eps))));
    let distances = chain
        .iter()
        .map(|y| interleaving_distance(base, y, last))
        .collect::<Result<Vec<_>, _>>()?;
    let conclusion = distances.iter().skip(n0).all(|d| d.within(eps));
    Ok(ConvergenceCheck {
        hypothesis,
        conclusion,
        distances,
    })
}

/// Scale profiles of every valuation image: `table[α][functor index]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScaledValuations {
    grid_len: usize,
    table: Vec<Vec<ScaleObject>>,
}

impl ScaledValuations {
    /// Callers are expected to have checked grid lengths and table shape.
    pub fn new(grid_len: usize, table: Vec<Vec<ScaleObject>>) -> Self {
        Self { grid_len, table }
    }

    pub fn grid_len(&self) -> usize {
        self.grid_len
    }

    pub fn objectives(&self) -> usize {
        self.table.len()
    }

    pub fn object(&self, objective: usize, functor: usize) -> &ScaleObject {
        &self.table[objective][functor]
    }

    pub fn table(&self) -> &[Vec<ScaleObject>] {
        &self.table
    }
}
