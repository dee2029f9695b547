//! Probabilistic categories: formal convex combinations of base objects and
//! stochastic-matrix morphisms between them.
//!
//! Two isomorphism notions live here. [`prob_isomorphic`] is the strict one:
//! equal component counts matched by a permutation of isomorphic objects with
//! equal weights. [`canonicalize`] computes the normal form of the localized
//! category, where components with isomorphic objects merge into one carrying
//! the summed weight; [`localized_isomorphic`] compares those normal forms.
//!
//! Weight comparisons for isomorphism use [`WEIGHT_TOL`]; stochasticity sums
//! use the tighter [`SUM_TOL`]. The first is a modelling tolerance for weights
//! computed from decimals; exact equality is not meaningful for them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rescat::{ObjId, TargetCategory};

pub const WEIGHT_TOL: f64 = 1e-9;
pub const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbError {
    #[error("a probabilistic object needs at least one component")]
    Empty,
    #[error("component {0} has non-positive weight {1}")]
    NonPositive(usize, f64),
    #[error("weights sum to {0}, not 1")]
    Sum(f64),
    #[error("matrix has shape {found:?}, expected {expected:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix column {0} sums to {1}, not 1")]
    Column(usize, f64),
    #[error("matrix entry ({0}, {1}) is negative")]
    Negative(usize, usize),
    #[error("S·Λ differs from the target weights at component {0}")]
    Pushforward(usize),
    #[error("family probabilities at ({0}, {1}) sum to {2}, matrix entry is {3}")]
    FamilyMass(usize, usize, f64, f64),
    #[error("family entry {0} refers to a pair of objects with no arrow")]
    EmptyHom(usize),
    #[error("family entry {0} does not match the components it connects")]
    TagMismatch(usize),
    #[error("object map is undefined on object {0}")]
    Undefined(ObjId),
    #[error("object map sends the arrow {0} → {1} to a pair with no arrow")]
    NotFunctorial(ObjId, ObjId),
}

/// One weighted component `λ_i C_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub w: f64,
    pub obj: ObjId,
}

/// A formal convex combination `Σ λ_i C_i` with all `λ_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Component>", into = "Vec<Component>")]
pub struct ProbObject {
    components: Vec<Component>,
}

impl TryFrom<Vec<Component>> for ProbObject {
    type Error = ProbError;

    fn try_from(components: Vec<Component>) -> Result<Self, ProbError> {
        if components.is_empty() {
            return Err(ProbError::Empty);
        }
        if let Some((i, c)) = components.iter().enumerate().find(|(_, c)| !(c.w > 0.0)) {
            return Err(ProbError::NonPositive(i, c.w));
        }
        let sum: f64 = components.iter().map(|c| c.w).sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(ProbError::Sum(sum));
        }
        Ok(Self { components })
    }
}

impl From<ProbObject> for Vec<Component> {
    fn from(p: ProbObject) -> Self {
        p.components
    }
}

impl ProbObject {
    pub fn new(pairs: impl IntoIterator<Item = (f64, ObjId)>) -> Result<Self, ProbError> {
        pairs
            .into_iter()
            .map(|(w, obj)| Component { w, obj })
            .collect::<Vec<_>>()
            .try_into()
    }

    pub fn point(obj: ObjId) -> Self {
        Self {
            components: vec![Component { w: 1.0, obj }],
        }
    }

    /// Uniform weights `1/M` over the given objects.
    pub fn uniform(objs: &[ObjId]) -> Result<Self, ProbError> {
        let w = 1.0 / objs.len() as f64;
        Self::new(objs.iter().map(|&o| (w, o)))
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.w).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.w).sum()
    }
}

/// Sorted `(iso class, weight)` keys of the components, without merging.
pub fn iso_key(p: &ProbObject, base: &TargetCategory) -> Vec<(usize, f64)> {
    let mut key: Vec<(usize, f64)> = p
        .components
        .iter()
        .map(|c| (base.iso_class(c.obj), c.w))
        .collect();
    key.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    key
}

fn keys_match(a: &[(usize, f64)], b: &[(usize, f64)]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() <= WEIGHT_TOL)
}

/// Strict isomorphism: same number of components matched by a permutation of
/// isomorphic objects with equal weights.
pub fn prob_isomorphic(p: &ProbObject, q: &ProbObject, base: &TargetCategory) -> bool {
    keys_match(&iso_key(p, base), &iso_key(q, base))
}

/// Localized normal form: merge components whose objects are isomorphic.
///
/// Each merged component keeps the smallest object id among those merged.
/// Output is sorted by iso class id.
pub fn canonicalize(p: &ProbObject, base: &TargetCategory) -> ProbObject {
    let mut merged: Vec<(usize, Component)> = Vec::new();
    for c in &p.components {
        let cls = base.iso_class(c.obj);
        match merged.iter_mut().find(|(k, _)| *k == cls) {
            Some((_, m)) => {
                m.w += c.w;
                m.obj = m.obj.min(c.obj);
            }
            None => merged.push((cls, *c)),
        }
    }
    merged.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.w.total_cmp(&b.1.w)));
    ProbObject {
        components: merged.into_iter().map(|(_, c)| c).collect(),
    }
}

/// Isomorphism after localization at the merge morphisms.
pub fn localized_isomorphic(p: &ProbObject, q: &ProbObject, base: &TargetCategory) -> bool {
    prob_isomorphic(&canonicalize(p, base), &canonicalize(q, base), base)
}

/// A morphism tag: the (source, target) objects of a base arrow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub from: ObjId,
    pub to: ObjId,
}

impl Tag {
    pub fn compose(self, next: Tag) -> Option<Tag> {
        (self.to == next.from).then_some(Tag {
            from: self.from,
            to: next.to,
        })
    }
}

/// `f_{ab,r}` with probability `μ^{ab}_r`: maps source component `b` to target component `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub target: usize,
    pub source: usize,
    pub tag: Tag,
    pub mu: f64,
}

/// A pair `(S, f)` with `S` column-stochastic of shape (target × source).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMorphism {
    pub matrix: Vec<Vec<f64>>,
    pub families: Vec<FamilyEntry>,
}

impl ProbMorphism {
    pub fn shape(&self) -> (usize, usize) {
        (self.matrix.len(), self.matrix.first().map_or(0, |r| r.len()))
    }

    /// `S · Λ` for a weight vector `Λ`.
    pub fn push_forward(&self, weights: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(weights).map(|(s, w)| s * w).fold(0.0, |a, b| a + b))
            .collect()
    }

    /// Checks every invariant against the given source and target objects.
    pub fn validate(&self, source: &ProbObject, target: &ProbObject, base: &TargetCategory) -> Result<(), ProbError> {
        let expected = (target.len(), source.len());
        let found = (self.matrix.len(), self.matrix.iter().map(|r| r.len()).max().unwrap_or(0));
        if self.matrix.len() != expected.0 || self.matrix.iter().any(|r| r.len() != expected.1) {
            return Err(ProbError::Shape { expected, found });
        }
        for (a, row) in self.matrix.iter().enumerate() {
            if let Some(b) = row.iter().position(|&s| s < 0.0) {
                return Err(ProbError::Negative(a, b));
            }
        }
        for b in 0..expected.1 {
            let col: f64 = self.matrix.iter().map(|r| r[b]).sum();
            if (col - 1.0).abs() > SUM_TOL {
                return Err(ProbError::Column(b, col));
            }
        }
        let pushed = self.push_forward(&source.weights());
        for (a, (x, c)) in pushed.iter().zip(target.components()).enumerate() {
            if (x - c.w).abs() > SUM_TOL {
                return Err(ProbError::Pushforward(a));
            }
        }
        let mut mass = vec![vec![0.0; expected.1]; expected.0];
        for (i, e) in self.families.iter().enumerate() {
            if e.target >= expected.0 || e.source >= expected.1 {
                return Err(ProbError::TagMismatch(i));
            }
            if e.tag.from != source.components()[e.source].obj || e.tag.to != target.components()[e.target].obj {
                return Err(ProbError::TagMismatch(i));
            }
            if !base.hom(e.tag.from, e.tag.to) {
                return Err(ProbError::EmptyHom(i));
            }
            mass[e.target][e.source] += e.mu;
        }
        for a in 0..expected.0 {
            for b in 0..expected.1 {
                if (mass[a][b] - self.matrix[a][b]).abs() > SUM_TOL {
                    return Err(ProbError::FamilyMass(a, b, mass[a][b], self.matrix[a][b]));
                }
            }
        }
        Ok(())
    }
}

/// A (partial) object map between thin categories; arrows map along with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectMap {
    images: Vec<Option<ObjId>>,
}

impl ObjectMap {
    pub fn new(images: Vec<Option<ObjId>>) -> Self {
        Self { images }
    }

    pub fn total(images: Vec<ObjId>) -> Self {
        Self {
            images: images.into_iter().map(Some).collect(),
        }
    }

    pub fn identity(k: usize) -> Self {
        Self::total((0..k).collect())
    }

    pub fn constant(k: usize, obj: ObjId) -> Self {
        Self::total(vec![obj; k])
    }

    pub fn apply(&self, obj: ObjId) -> Result<ObjId, ProbError> {
        self.images
            .get(obj)
            .copied()
            .flatten()
            .ok_or(ProbError::Undefined(obj))
    }

    pub fn apply_tag(&self, tag: Tag, target: &TargetCategory) -> Result<Tag, ProbError> {
        let (from, to) = (self.apply(tag.from)?, self.apply(tag.to)?);
        if !target.hom(from, to) {
            return Err(ProbError::NotFunctorial(tag.from, tag.to));
        }
        Ok(Tag { from, to })
    }
}

/// `Σ λ_i C_i ↦ Σ λ_i h(C_i)`.
pub fn lift_object(h: &ObjectMap, p: &ProbObject) -> Result<ProbObject, ProbError> {
    let components = p
        .components
        .iter()
        .map(|c| Ok(Component { w: c.w, obj: h.apply(c.obj)? }))
        .collect::<Result<Vec<_>, ProbError>>()?;
    Ok(ProbObject { components })
}

/// `(S, f) ↦ (S, h(f))` with unchanged probabilities.
pub fn lift_morphism(h: &ObjectMap, m: &ProbMorphism, target: &TargetCategory) -> Result<ProbMorphism, ProbError> {
    let families = m
        .families
        .iter()
        .map(|e| {
            Ok(FamilyEntry {
                tag: h.apply_tag(e.tag, target)?,
                ..*e
            })
        })
        .collect::<Result<Vec<_>, ProbError>>()?;
    Ok(ProbMorphism {
        matrix: m.matrix.clone(),
        families,
    })
}

/// A weighted family of object maps `Σ λ_i F_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbFunctor {
    pub components: Vec<(f64, ObjectMap)>,
}

/// `(Σ λ_i F_i)(Σ ω_a X_a) = Σ_{i,a} λ_i ω_a F_i(X_a)`, components in `i`-major order.
pub fn apply_prob_functor(f: &ProbFunctor, x: &ProbObject) -> Result<ProbObject, ProbError> {
    let mut components = Vec::with_capacity(f.components.len() * x.len());
    for (lambda, map) in &f.components {
        for c in x.components() {
            components.push(Component {
                w: lambda * c.w,
                obj: map.apply(c.obj)?,
            });
        }
    }
    components.try_into()
}

/// Morphism clause: block-diagonal `S'_{(i,a),(j,b)} = δ_ij S_ab` with each block's
/// arrows mapped by `F_i`.
pub fn apply_prob_functor_morphism(
    f: &ProbFunctor,
    m: &ProbMorphism,
    target: &TargetCategory,
) -> Result<ProbMorphism, ProbError> {
    let (rows, cols) = m.shape();
    let blocks = f.components.len();
    let mut matrix = vec![vec![0.0; cols * blocks]; rows * blocks];
    let mut families = Vec::new();
    for (i, (_, map)) in f.components.iter().enumerate() {
        for a in 0..rows {
            for b in 0..cols {
                matrix[i * rows + a][i * cols + b] = m.matrix[a][b];
            }
        }
        for e in &m.families {
            families.push(FamilyEntry {
                target: i * rows + e.target,
                source: i * cols + e.source,
                tag: map.apply_tag(e.tag, target)?,
                mu: e.mu,
            });
        }
    }
    Ok(ProbMorphism { matrix, families })
}

/// Permutation search for [`prob_isomorphic`]; exponential, for cross-checks.
pub fn prob_isomorphic_by_permutation(p: &ProbObject, q: &ProbObject, base: &TargetCategory) -> bool {
    fn search(
        i: usize,
        p: &[Component],
        q: &[Component],
        used: &mut [bool],
        base: &TargetCategory,
    ) -> bool {
        if i == p.len() {
            return true;
        }
        for j in 0..q.len() {
            if !used[j] && base.iso(p[i].obj, q[j].obj) && (p[i].w - q[j].w).abs() <= WEIGHT_TOL {
                used[j] = true;
                if search(i + 1, p, q, used, base) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    p.len() == q.len() && search(0, p.components(), q.components(), &mut vec![false; q.len()], base)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Objects 0..4; {0, 1} isomorphic; 2 and 3 separate; arrows 0,1 → 2 → 3.
    fn base() -> TargetCategory {
        let mut hom = vec![vec![false; 4]; 4];
        for (a, row) in hom.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                *cell = a == b || (a <= 1 && b <= 1) || (b >= 2 && a < b) || (a <= 1 && b >= 2);
            }
        }
        TargetCategory::new(4, hom, vec![vec![0, 1], vec![2], vec![3]]).unwrap()
    }

    #[test]
    fn base_is_valid() {
        assert!(base().validate().passed());
    }

    #[test]
    fn construction_rules() {
        assert_eq!(ProbObject::new(vec![]).unwrap_err(), ProbError::Empty);
        assert!(matches!(ProbObject::new([(0.0, 1), (1.0, 2)]), Err(ProbError::NonPositive(0, _))));
        assert!(matches!(ProbObject::new([(0.5, 1), (0.4, 2)]), Err(ProbError::Sum(_))));
        let json: Result<ProbObject, _> = serde_json::from_str(r#"[{"w":0.5,"obj":0},{"w":0.5,"obj":2}]"#);
        assert_eq!(json.unwrap().len(), 2);
        let bad: Result<ProbObject, _> = serde_json::from_str(r#"[{"w":0.0,"obj":0},{"w":1.0,"obj":2}]"#);
        assert!(bad.is_err());
    }

    #[test]
    fn isomorphism_cases() {
        let b = base();
        let p = ProbObject::new([(0.3, 0), (0.7, 2)]).unwrap();
        assert!(prob_isomorphic(&p, &p, &b));
        let permuted = ProbObject::new([(0.7, 2), (0.3, 1)]).unwrap();
        assert!(prob_isomorphic(&p, &permuted, &b));
        assert!(prob_isomorphic_by_permutation(&p, &permuted, &b));
        let even = ProbObject::new([(0.5, 0), (0.5, 2)]).unwrap();
        let skew = ProbObject::new([(0.6, 0), (0.4, 2)]).unwrap();
        assert!(!prob_isomorphic(&even, &skew, &b));
        // Strict isomorphism sees component counts; localization does not.
        let split = ProbObject::new([(0.5, 0), (0.5, 1)]).unwrap();
        assert!(!prob_isomorphic(&split, &ProbObject::point(0), &b));
        assert!(localized_isomorphic(&split, &ProbObject::point(1), &b));
    }

    #[test]
    fn canonical_forms() {
        let b = base();
        let all_iso = ProbObject::new([(0.25, 1), (0.5, 0), (0.25, 1)]).unwrap();
        let c = canonicalize(&all_iso, &b);
        assert_eq!(c.components(), &[Component { w: 1.0, obj: 0 }]);
        let distinct = ProbObject::new([(0.6, 3), (0.4, 2)]).unwrap();
        assert_eq!(canonicalize(&distinct, &b).components(), &[
            Component { w: 0.4, obj: 2 },
            Component { w: 0.6, obj: 3 }
        ]);
        let mixed = ProbObject::new([(0.3, 0), (0.2, 1), (0.5, 2)]).unwrap();
        let c = canonicalize(&mixed, &b);
        assert_eq!(c.len(), 2);
        assert_eq!(c.components()[0].obj, 0);
        assert!((c.components()[0].w - 0.5).abs() < 1e-15);
        assert_eq!(c.components()[1], Component { w: 0.5, obj: 2 });
    }

    #[test]
    fn lifting_objects() {
        let b = base();
        let p = ProbObject::new([(0.2, 0), (0.3, 2), (0.5, 3)]).unwrap();
        assert_eq!(lift_object(&ObjectMap::identity(4), &p).unwrap(), p);
        let constant = lift_object(&ObjectMap::constant(4, 2), &p).unwrap();
        assert_eq!(canonicalize(&constant, &b).components(), &[Component { w: 1.0, obj: 2 }]);
        // A valuation-style map applied componentwise.
        let h = ObjectMap::total(vec![2, 2, 3, 3]);
        let lifted = lift_object(&h, &p).unwrap();
        let want: Vec<_> = p.components().iter().map(|c| (c.w, h.apply(c.obj).unwrap())).collect();
        let got: Vec<_> = lifted.components().iter().map(|c| (c.w, c.obj)).collect();
        assert_eq!(got, want);
        let partial = ObjectMap::new(vec![Some(0), None, Some(2), Some(3)]);
        assert_eq!(lift_object(&partial, &ProbObject::point(1)).unwrap_err(), ProbError::Undefined(1));
    }

    #[test]
    fn lifting_morphisms() {
        let b = base();
        let src = ProbObject::new([(0.5, 0), (0.5, 2)]).unwrap();
        let dst = ProbObject::new([(0.25, 2), (0.75, 3)]).unwrap();
        let m = ProbMorphism {
            matrix: vec![vec![0.5, 0.0], vec![0.5, 1.0]],
            families: vec![
                FamilyEntry { target: 0, source: 0, tag: Tag { from: 0, to: 2 }, mu: 0.5 },
                FamilyEntry { target: 1, source: 0, tag: Tag { from: 0, to: 3 }, mu: 0.5 },
                FamilyEntry { target: 1, source: 1, tag: Tag { from: 2, to: 3 }, mu: 1.0 },
            ],
        };
        m.validate(&src, &dst, &b).unwrap();
        let h = ObjectMap::total(vec![1, 0, 2, 3]);
        let lm = lift_morphism(&h, &m, &b).unwrap();
        lm.validate(&lift_object(&h, &src).unwrap(), &lift_object(&h, &dst).unwrap(), &b)
            .unwrap();
        let backwards = ObjectMap::total(vec![3, 3, 2, 0]);
        assert!(matches!(lift_morphism(&backwards, &m, &b), Err(ProbError::NotFunctorial(..))));
    }

    #[test]
    fn morphism_validation_errors() {
        let b = base();
        let src = ProbObject::point(2);
        let dst = ProbObject::point(3);
        let ok = ProbMorphism {
            matrix: vec![vec![1.0]],
            families: vec![FamilyEntry { target: 0, source: 0, tag: Tag { from: 2, to: 3 }, mu: 1.0 }],
        };
        ok.validate(&src, &dst, &b).unwrap();
        assert_eq!(ok.validate(&dst, &src, &b).unwrap_err(), ProbError::TagMismatch(0));
        let backwards = ProbMorphism {
            matrix: vec![vec![1.0]],
            families: vec![FamilyEntry { target: 0, source: 0, tag: Tag { from: 3, to: 2 }, mu: 1.0 }],
        };
        assert_eq!(backwards.validate(&dst, &src, &b).unwrap_err(), ProbError::EmptyHom(0));
        let light = ProbMorphism {
            matrix: vec![vec![1.0]],
            families: vec![FamilyEntry { target: 0, source: 0, tag: Tag { from: 2, to: 3 }, mu: 0.5 }],
        };
        assert!(matches!(light.validate(&src, &dst, &b), Err(ProbError::FamilyMass(..))));
        let wide = ProbMorphism { matrix: vec![vec![1.0, 0.0]], families: vec![] };
        assert!(matches!(wide.validate(&src, &dst, &b), Err(ProbError::Shape { .. })));
    }

    #[test]
    fn prob_functor_application() {
        let b = base();
        let x = ProbObject::new([(0.4, 0), (0.6, 2)]).unwrap();
        let single = ProbFunctor { components: vec![(1.0, ObjectMap::total(vec![2, 2, 3, 3]))] };
        assert_eq!(
            apply_prob_functor(&single, &x).unwrap(),
            lift_object(&single.components[0].1, &x).unwrap()
        );
        let two = ProbFunctor {
            components: vec![(0.5, ObjectMap::identity(4)), (0.5, ObjectMap::constant(4, 3))],
        };
        let y = apply_prob_functor(&two, &ProbObject::point(2)).unwrap();
        assert_eq!(y.weights(), vec![0.5, 0.5]);
        let mixed = ProbFunctor {
            components: vec![(0.3, ObjectMap::identity(4)), (0.7, ObjectMap::constant(4, 3))],
        };
        let z = apply_prob_functor(&mixed, &x).unwrap();
        let want = [0.12, 0.18, 0.28, 0.42];
        for (got, want) in z.weights().iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(z.components().iter().map(|c| c.obj).collect::<Vec<_>>(), vec![0, 2, 3, 3]);

        let src = ProbObject::new([(0.5, 0), (0.5, 2)]).unwrap();
        let dst = ProbObject::new([(0.25, 2), (0.75, 3)]).unwrap();
        let m = ProbMorphism {
            matrix: vec![vec![0.5, 0.0], vec![0.5, 1.0]],
            families: vec![
                FamilyEntry { target: 0, source: 0, tag: Tag { from: 0, to: 2 }, mu: 0.5 },
                FamilyEntry { target: 1, source: 0, tag: Tag { from: 0, to: 3 }, mu: 0.5 },
                FamilyEntry { target: 1, source: 1, tag: Tag { from: 2, to: 3 }, mu: 1.0 },
            ],
        };
        let lifted = apply_prob_functor_morphism(&mixed, &m, &b).unwrap();
        lifted
            .validate(&apply_prob_functor(&mixed, &src).unwrap(), &apply_prob_functor(&mixed, &dst).unwrap(), &b)
            .unwrap();
    }

    #[test]
    fn tag_composition() {
        let f = Tag { from: 0, to: 2 };
        assert_eq!(f.compose(Tag { from: 2, to: 3 }), Some(Tag { from: 0, to: 3 }));
        assert_eq!(f.compose(Tag { from: 3, to: 3 }), None);
    }
}
