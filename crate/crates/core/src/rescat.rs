//! Finite resource categories.
//!
//! Hom-sets are carried only as a nonemptiness bit per ordered pair together
//! with an isomorphism partition. A [`ResourceCategory`] adds a total tensor
//! table and a unit object; a [`TargetCategory`] is the bare thin part and is
//! used for valuation targets.

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

/// Object identifier, 0-based.
pub type ObjId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("{path}: expected {expected} entries, found {found}")]
    Dimension {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}: object id {id} out of range (K = {objects})")]
    OutOfRange {
        path: String,
        id: usize,
        objects: usize,
    },
    #[error("iso_classes: object {0} is not covered by any class")]
    IsoUncovered(ObjId),
    #[error("iso_classes: object {0} appears in more than one class")]
    IsoDuplicate(ObjId),
    #[error("iso_classes: empty class")]
    IsoEmptyClass,
}

/// One violated law together with the objects that witness it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub witness: Vec<ObjId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self, code: &str) -> Option<&Violation> {
        self.violations.iter().find(|v| v.code == code)
    }

    fn push(&mut self, code: &'static str, witness: Vec<ObjId>) {
        self.violations.push(Violation { code, witness });
    }
}

/// A finite thin category: hom-nonemptiness table plus isomorphism classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetCategory {
    hom: Vec<Vec<bool>>,
    class_of: Vec<usize>,
    classes: Vec<Vec<ObjId>>,
}

impl TargetCategory {
    /// Checks dimensions and that `iso_classes` partitions `0..objects`.
    /// Categorical laws are checked separately by [`TargetCategory::validate`].
    pub fn new(
        objects: usize,
        hom: Vec<Vec<bool>>,
        iso_classes: Vec<Vec<ObjId>>,
    ) -> Result<Self, StructureError> {
        check_square("hom", &hom, objects)?;
        let mut class_of = vec![usize::MAX; objects];
        for (c, class) in iso_classes.iter().enumerate() {
            if class.is_empty() {
                return Err(StructureError::IsoEmptyClass);
            }
            for (j, &id) in class.iter().enumerate() {
                if id >= objects {
                    return Err(StructureError::OutOfRange {
                        path: format!("iso_classes[{c}][{j}]"),
                        id,
                        objects,
                    });
                }
                if class_of[id] != usize::MAX {
                    return Err(StructureError::IsoDuplicate(id));
                }
                class_of[id] = c;
            }
        }
        if let Some(id) = class_of.iter().position(|&c| c == usize::MAX) {
            return Err(StructureError::IsoUncovered(id));
        }
        Ok(Self {
            hom,
            class_of,
            classes: iso_classes,
        })
    }

    /// Discrete iso partition (every object its own class).
    pub fn with_discrete_iso(hom: Vec<Vec<bool>>) -> Result<Self, StructureError> {
        let k = hom.len();
        Self::new(k, hom, (0..k).map(|i| vec![i]).collect())
    }

    pub fn objects(&self) -> usize {
        self.hom.len()
    }

    pub fn hom(&self, a: ObjId, b: ObjId) -> bool {
        self.hom[a][b]
    }

    pub fn hom_table(&self) -> &[Vec<bool>] {
        &self.hom
    }

    pub fn iso(&self, a: ObjId, b: ObjId) -> bool {
        self.class_of[a] == self.class_of[b]
    }

    pub fn iso_class(&self, a: ObjId) -> usize {
        self.class_of[a]
    }

    pub fn iso_classes(&self) -> &[Vec<ObjId>] {
        &self.classes
    }

    /// Convertibility `a ⪰ b`: some conversion process from `a` to `b` exists.
    pub fn convertible(&self, a: ObjId, b: ObjId) -> Result<bool, StructureError> {
        let k = self.objects();
        for id in [a, b] {
            if id >= k {
                return Err(StructureError::OutOfRange {
                    path: "object".into(),
                    id,
                    objects: k,
                });
            }
        }
        Ok(self.hom[a][b])
    }

    /// Replaces the hom table by its reflexive-transitive closure.
    pub fn close_hom(&mut self) {
        close_transitively(&mut self.hom);
    }

    /// Checks the thin-category laws; never stops at the first violation.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        self.validate_into(&mut report);
        report
    }

    fn validate_into(&self, report: &mut ValidationReport) {
        let k = self.objects();
        for a in 0..k {
            if !self.hom[a][a] {
                report.push("rescat.hom.reflexivity", vec![a]);
            }
        }
        for a in 0..k {
            for b in 0..k {
                if !self.hom[a][b] {
                    continue;
                }
                for c in 0..k {
                    if self.hom[b][c] && !self.hom[a][c] {
                        report.push("rescat.hom.transitivity", vec![a, b, c]);
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..k {
                if self.iso(a, b) && !(self.hom[a][b] && self.hom[b][a]) {
                    report.push("rescat.iso.hom", vec![a, b]);
                }
            }
        }
        // Iso-invariance of hom in each argument.
        for a in 0..k {
            for a2 in self.classes[self.class_of[a]].iter().copied() {
                if a2 <= a {
                    continue;
                }
                for b in 0..k {
                    if self.hom[a][b] != self.hom[a2][b] {
                        report.push("rescat.hom.iso_respect", vec![a, a2, b]);
                    }
                    if self.hom[b][a] != self.hom[b][a2] {
                        report.push("rescat.hom.iso_respect", vec![b, a, a2]);
                    }
                }
            }
        }
    }
}

/// A finite symmetric monoidal category of resources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceCategory {
    base: TargetCategory,
    unit: ObjId,
    tensor: Vec<Vec<ObjId>>,
}

impl ResourceCategory {
    pub fn new(
        objects: usize,
        unit: ObjId,
        hom: Vec<Vec<bool>>,
        iso_classes: Vec<Vec<ObjId>>,
        tensor: Vec<Vec<ObjId>>,
    ) -> Result<Self, StructureError> {
        let base = TargetCategory::new(objects, hom, iso_classes)?;
        Self::from_base(base, unit, tensor)
    }

    pub fn from_base(
        base: TargetCategory,
        unit: ObjId,
        tensor: Vec<Vec<ObjId>>,
    ) -> Result<Self, StructureError> {
        let k = base.objects();
        if unit >= k {
            return Err(StructureError::OutOfRange {
                path: "unit".into(),
                id: unit,
                objects: k,
            });
        }
        check_square("tensor", &tensor, k)?;
        for (a, row) in tensor.iter().enumerate() {
            for (b, &id) in row.iter().enumerate() {
                if id >= k {
                    return Err(StructureError::OutOfRange {
                        path: format!("tensor[{a}][{b}]"),
                        id,
                        objects: k,
                    });
                }
            }
        }
        Ok(Self { base, unit, tensor })
    }

    pub fn base(&self) -> &TargetCategory {
        &self.base
    }

    pub fn objects(&self) -> usize {
        self.base.objects()
    }

    pub fn unit(&self) -> ObjId {
        self.unit
    }

    pub fn hom(&self, a: ObjId, b: ObjId) -> bool {
        self.base.hom(a, b)
    }

    pub fn iso(&self, a: ObjId, b: ObjId) -> bool {
        self.base.iso(a, b)
    }

    pub fn iso_class(&self, a: ObjId) -> usize {
        self.base.iso_class(a)
    }

    pub fn tensor(&self, a: ObjId, b: ObjId) -> ObjId {
        self.tensor[a][b]
    }

    pub fn tensor_table(&self) -> &[Vec<ObjId>] {
        &self.tensor
    }

    pub fn convertible(&self, a: ObjId, b: ObjId) -> Result<bool, StructureError> {
        self.base.convertible(a, b)
    }

    pub fn close_hom(&mut self) {
        self.base.close_hom();
    }

    /// `a ⊗ a ⊗ … ⊗ a` (`n` factors), folded from the left.
    pub fn tensor_power(&self, a: ObjId, n: usize) -> ObjId {
        assert!(n >= 1, "tensor_power needs at least one factor");
        (1..n).fold(a, |acc, _| self.tensor[acc][a])
    }

    /// Largest `m/n` with `n·a ⪰ m·b` and `1 ≤ m, n ≤ n_max`.
    ///
    /// This truncates the supremum defining the maximal conversion rate, so it
    /// is a lower bound that can only grow with `n_max`.
    pub fn conversion_rate(&self, a: ObjId, b: ObjId, n_max: usize) -> Option<Ratio<u64>> {
        assert!(n_max >= 1, "n_max must be positive");
        let powers = |x: ObjId| {
            let mut out = Vec::with_capacity(n_max);
            let mut acc = x;
            out.push(acc);
            for _ in 1..n_max {
                acc = self.tensor[acc][x];
                out.push(acc);
            }
            out
        };
        let pa = powers(a);
        let pb = powers(b);
        let mut best: Option<Ratio<u64>> = None;
        for (i, &na) in pa.iter().enumerate() {
            let n = i as u64 + 1;
            // Only the largest admissible m for this n can improve the maximum.
            if let Some(j) = (0..n_max).rev().find(|&j| self.hom(na, pb[j])) {
                let r = Ratio::new(j as u64 + 1, n);
                if best.is_none_or(|b| r > b) {
                    best = Some(r);
                }
            }
        }
        best
    }

    /// Thin-category laws plus the monoidal laws up to isomorphism.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        self.base.validate_into(&mut report);
        let k = self.objects();
        let t = &self.tensor;
        let cls = |x: ObjId| self.base.iso_class(x);
        for a in 0..k {
            if cls(t[a][self.unit]) != cls(a) || cls(t[self.unit][a]) != cls(a) {
                report.push("rescat.tensor.unit", vec![a]);
            }
            for b in 0..k {
                if cls(t[a][b]) != cls(t[b][a]) {
                    report.push("rescat.tensor.symmetry", vec![a, b]);
                }
                for c in 0..k {
                    if cls(t[t[a][b]][c]) != cls(t[a][t[b][c]]) {
                        report.push("rescat.tensor.associativity", vec![a, b, c]);
                    }
                }
            }
        }
        for a in 0..k {
            for &a2 in &self.base.classes[cls(a)] {
                if a2 <= a {
                    continue;
                }
                for b in 0..k {
                    if cls(t[a][b]) != cls(t[a2][b]) || cls(t[b][a]) != cls(t[b][a2]) {
                        report.push("rescat.tensor.iso_respect", vec![a, a2, b]);
                    }
                }
            }
        }
        for a in 0..k {
            for b in 0..k {
                if !self.hom(a, b) {
                    continue;
                }
                for a2 in 0..k {
                    for b2 in 0..k {
                        if self.hom(a2, b2) && !self.hom(t[a][a2], t[b][b2]) {
                            report.push("rescat.tensor.functoriality", vec![a, b, a2, b2]);
                        }
                    }
                }
            }
        }
        report
    }
}

fn check_square<T>(path: &str, table: &[Vec<T>], k: usize) -> Result<(), StructureError> {
    if table.len() != k {
        return Err(StructureError::Dimension {
            path: path.into(),
            expected: k,
            found: table.len(),
        });
    }
    for (i, row) in table.iter().enumerate() {
        if row.len() != k {
            return Err(StructureError::Dimension {
                path: format!("{path}[{i}]"),
                expected: k,
                found: row.len(),
            });
        }
    }
    Ok(())
}

pub(crate) fn close_transitively(hom: &mut [Vec<bool>]) {
    let k = hom.len();
    for (i, row) in hom.iter_mut().enumerate() {
        row[i] = true;
    }
    for m in 0..k {
        for i in 0..k {
            if !hom[i][m] {
                continue;
            }
            for j in 0..k {
                if hom[m][j] {
                    hom[i][j] = true;
                }
            }
        }
    }
}

/// Small hand-built categories shared by tests across the crate.
#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Chain `2 → 1 → 0` with saturating addition as tensor and unit 0.
    pub fn chain3() -> ResourceCategory {
        chain(3)
    }

    /// Chain on `0..k` with `hom(a, b)` iff `a ≥ b` and tensor `min(a + b, k - 1)`.
    pub fn chain(k: usize) -> ResourceCategory {
        let hom = (0..k).map(|a| (0..k).map(|b| a >= b).collect()).collect();
        let tensor = (0..k)
            .map(|a| (0..k).map(|b| (a + b).min(k - 1)).collect())
            .collect();
        ResourceCategory::new(k, 0, hom, (0..k).map(|i| vec![i]).collect(), tensor).unwrap()
    }

    /// Cyclic group of order 4: tensor is addition mod 4, only identities.
    pub fn z4() -> ResourceCategory {
        let hom = (0..4).map(|a| (0..4).map(|b| a == b).collect()).collect();
        let tensor = (0..4).map(|a| (0..4).map(|b| (a + b) % 4).collect()).collect();
        ResourceCategory::new(4, 0, hom, (0..4).map(|i| vec![i]).collect(), tensor).unwrap()
    }
}
