//! Valuation systems `(F, X)`, minorization, and exact Pareto frontiers.
//!
//! Direction convention: `Φ` is minorized by `Ψ` when every objective has an
//! arrow `F_α(Φ) → F_α(Ψ)`. Reaching `Ψ` from `Φ` is therefore the improving
//! direction, and the upper frontier consists of admissible functors from
//! which no strictly better admissible functor can be reached.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::issue::Issue;
use crate::rescat::{ObjId, ResourceCategory, TargetCategory};
use crate::summing::{FunctorSpace, SummingError, SummingFunctor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValuationError {
    #[error(transparent)]
    Summing(#[from] SummingError),
    #[error("functor {0:?} is not admissible")]
    NotAdmissible(Vec<ObjId>),
    #[error("functor {0:?} does not belong to the functor space")]
    UnknownFunctor(Vec<ObjId>),
}

/// How an objective assigns a target object to each summing functor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValuationMap {
    /// One target object per functor, in lexicographic functor order.
    Table(Vec<ObjId>),
    /// `h` applied to the value of the functor on the whole set.
    Composed(Vec<ObjId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub target: TargetCategory,
    pub goal: ObjId,
    pub map: ValuationMap,
}

impl Objective {
    pub fn image(&self, cat: &ResourceCategory, space: &FunctorSpace, phi: &SummingFunctor) -> Option<ObjId> {
        match &self.map {
            ValuationMap::Table(entries) => space.index_of(phi).and_then(|i| entries.get(i).copied()),
            ValuationMap::Composed(h) => h.get(phi.total(cat)).copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValuationSystem {
    objectives: Vec<Objective>,
}

impl ValuationSystem {
    pub fn new(objectives: Vec<Objective>) -> Self {
        Self { objectives }
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    /// `F_α(Φ)` for every objective; `None` if a map is undefined on `Φ`.
    pub fn images(&self, cat: &ResourceCategory, space: &FunctorSpace, phi: &SummingFunctor) -> Option<Vec<ObjId>> {
        self.objectives.iter().map(|o| o.image(cat, space, phi)).collect()
    }

    pub fn admissible_images(&self, img: &[ObjId]) -> bool {
        self.objectives
            .iter()
            .zip(img)
            .all(|(o, &y)| o.target.hom(y, o.goal))
    }

    /// Plain `F`-minorization: arrows `F_α(from) → F_α(to)` for every `α`;
    /// strict additionally asks for a non-isomorphic component.
    pub fn minorizes_images(&self, from: &[ObjId], to: &[ObjId], strict: bool) -> bool {
        let mut some_strict = false;
        for ((o, &a), &b) in self.objectives.iter().zip(from).zip(to) {
            if !o.target.hom(a, b) {
                return false;
            }
            some_strict |= !o.target.iso(a, b);
        }
        !strict || some_strict
    }

    /// `(F, X)`-minorization: the plain condition plus arrows from both ends to the goals.
    pub fn fx_minorizes_images(&self, from: &[ObjId], to: &[ObjId], strict: bool) -> bool {
        self.admissible_images(from) && self.admissible_images(to) && self.minorizes_images(from, to, strict)
    }

    /// Structural checks and iso-respect over the whole functor space.
    pub fn validate(&self, cat: &ResourceCategory, space: &FunctorSpace) -> Vec<Issue> {
        let mut issues = Vec::new();
        for (a, o) in self.objectives.iter().enumerate() {
            let base = format!("valuations[{a}]");
            for v in o.target.validate().violations {
                issues.push(Issue::new(
                    v.code,
                    format!("{base}.target"),
                    format!("witness {:?}", v.witness),
                ));
            }
            let ko = o.target.objects();
            if o.goal >= ko {
                issues.push(Issue::new(
                    "valuation.goal.range",
                    format!("{base}.goal"),
                    format!("goal {} out of range (target has {ko} objects)", o.goal),
                ));
            }
            let (entries, expected, kind) = match &o.map {
                ValuationMap::Table(e) => (e, space.len(), "entries"),
                ValuationMap::Composed(h) => (h, cat.objects(), "h"),
            };
            if entries.len() != expected {
                issues.push(Issue::new(
                    "valuation.map.length",
                    format!("{base}.map.{kind}"),
                    format!("expected {expected} entries, found {}", entries.len()),
                ));
                continue;
            }
            if let Some((i, &y)) = entries.iter().enumerate().find(|(_, &y)| y >= ko) {
                issues.push(Issue::new(
                    "valuation.map.range",
                    format!("{base}.map.{kind}[{i}]"),
                    format!("object {y} out of range (target has {ko} objects)"),
                ));
                continue;
            }
            // Functors in one Ĉ^n iso class must land in one iso class of V_α.
            let mut seen: HashMap<Vec<usize>, (SummingFunctor, usize)> = HashMap::new();
            for phi in space.iter() {
                let y = o.image(cat, space, &phi).expect("map length checked");
                let cls = o.target.iso_class(y);
                match seen.get(&phi.iso_key(cat)) {
                    Some((first, c)) if *c != cls => {
                        issues.push(Issue::new(
                            "valuation.iso_respect",
                            format!("{base}.map"),
                            format!(
                                "isomorphic functors {:?} and {:?} have non-isomorphic images",
                                first.values(),
                                phi.values()
                            ),
                        ));
                        break;
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(phi.iso_key(cat), (phi, cls));
                    }
                }
            }
        }
        issues
    }
}

/// A strictly positive probability on `Obj(C)`; induces the product measure on functors.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDistribution {
    weights: Vec<f64>,
}

impl ObjectDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self, Issue> {
        if weights.is_empty() {
            return Err(Issue::new("distribution.length", "distribution.weights", "no weights"));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Issue::new(
                "distribution.positive",
                format!("distribution.weights[{i}]"),
                format!("weight {} is not strictly positive", weights[i]),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Issue::new(
                "distribution.sum",
                "distribution.weights",
                format!("weights sum to {sum}, not 1"),
            ));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Product-measure weight of a functor.
    pub fn functor_weight(&self, phi: &SummingFunctor) -> f64 {
        phi.values().iter().map(|&v| self.weights[v]).product()
    }
}

/// Frontier members grouped by `Ĉ^n` isomorphism class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Frontier {
    pub classes: Vec<FrontierClass>,
    pub members: Vec<SummingFunctor>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrontierClass {
    /// Lexicographically least member.
    pub representative: SummingFunctor,
    pub members: Vec<SummingFunctor>,
}

impl Frontier {
    fn from_members(cat: &ResourceCategory, members: Vec<SummingFunctor>) -> Self {
        let mut groups: BTreeMap<usize, FrontierClass> = BTreeMap::new();
        let mut order: HashMap<Vec<usize>, usize> = HashMap::new();
        for phi in &members {
            let next = order.len();
            let slot = *order.entry(phi.iso_key(cat)).or_insert(next);
            groups
                .entry(slot)
                .or_insert_with(|| FrontierClass {
                    representative: phi.clone(),
                    members: Vec::new(),
                })
                .members
                .push(phi.clone());
        }
        Self {
            classes: groups.into_values().collect(),
            members,
        }
    }

    pub fn contains(&self, phi: &SummingFunctor) -> bool {
        self.members.binary_search(phi).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Every functor of an instance evaluated once under a valuation system.
///
/// Queries work on "image classes": the tuple of target iso classes of a
/// functor's images. All hom and iso predicates depend only on that tuple.
#[derive(Debug, Clone)]
pub struct Landscape<'a> {
    cat: &'a ResourceCategory,
    system: &'a ValuationSystem,
    space: FunctorSpace,
    /// Image class id per functor index.
    class_of: Vec<usize>,
    /// Representative image objects per class.
    class_images: Vec<Vec<ObjId>>,
    class_admissible: Vec<bool>,
    /// Functor indices per class, ascending.
    class_members: Vec<Vec<usize>>,
}

impl<'a> Landscape<'a> {
    /// Evaluates all functors. The system must have passed [`ValuationSystem::validate`].
    pub fn new(cat: &'a ResourceCategory, system: &'a ValuationSystem, space: FunctorSpace) -> Self {
        let images: Vec<Vec<ObjId>> = (0..space.len())
            .into_par_iter()
            .map(|i| {
                system
                    .images(cat, &space, &space.functor(i))
                    .expect("validated valuation maps are total")
            })
            .collect();
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut class_of = Vec::with_capacity(images.len());
        let mut class_images = Vec::new();
        let mut class_members: Vec<Vec<usize>> = Vec::new();
        for (i, img) in images.into_iter().enumerate() {
            let key: Vec<usize> = system
                .objectives
                .iter()
                .zip(&img)
                .map(|(o, &y)| o.target.iso_class(y))
                .collect();
            let c = *index.entry(key).or_insert_with(|| {
                class_images.push(img);
                class_members.push(Vec::new());
                class_images.len() - 1
            });
            class_of.push(c);
            class_members[c].push(i);
        }
        let class_admissible = class_images.iter().map(|img| system.admissible_images(img)).collect();
        Self {
            cat,
            system,
            space,
            class_of,
            class_images,
            class_admissible,
            class_members,
        }
    }

    pub fn category(&self) -> &'a ResourceCategory {
        self.cat
    }

    pub fn system(&self) -> &'a ValuationSystem {
        self.system
    }

    pub fn space(&self) -> &FunctorSpace {
        &self.space
    }

    fn index(&self, phi: &SummingFunctor) -> Result<usize, ValuationError> {
        self.space
            .index_of(phi)
            .ok_or_else(|| ValuationError::UnknownFunctor(phi.values().to_vec()))
    }

    pub fn images(&self, phi: &SummingFunctor) -> Result<&[ObjId], ValuationError> {
        Ok(&self.class_images[self.class_of[self.index(phi)?]])
    }

    pub fn images_at(&self, index: usize) -> &[ObjId] {
        &self.class_images[self.class_of[index]]
    }

    pub fn admissible_at(&self, index: usize) -> bool {
        self.class_admissible[self.class_of[index]]
    }

    pub fn admissible(&self, phi: &SummingFunctor) -> Result<bool, ValuationError> {
        Ok(self.admissible_at(self.index(phi)?))
    }

    /// All admissible functors in lexicographic order.
    pub fn admissible_set(&self) -> Vec<SummingFunctor> {
        (0..self.space.len())
            .filter(|&i| self.admissible_at(i))
            .map(|i| self.space.functor(i))
            .collect()
    }

    /// Plain `F`-minorization of `phi` by `psi`.
    pub fn minorizes(&self, phi: &SummingFunctor, psi: &SummingFunctor, strict: bool) -> Result<bool, ValuationError> {
        Ok(self.system.minorizes_images(self.images(phi)?, self.images(psi)?, strict))
    }

    /// Strict `(F, X)`-minorization between functor indices.
    pub fn strictly_improves_at(&self, from: usize, to: usize) -> bool {
        let (cf, ct) = (self.class_of[from], self.class_of[to]);
        self.class_strict(cf, ct)
    }

    fn class_strict(&self, from: usize, to: usize) -> bool {
        self.class_admissible[from]
            && self.class_admissible[to]
            && self
                .system
                .minorizes_images(&self.class_images[from], &self.class_images[to], true)
    }

    /// All admissible strict `(F, X)`-minorizations of `phi`.
    pub fn strict_minorization_set(&self, phi: &SummingFunctor) -> Result<Vec<SummingFunctor>, ValuationError> {
        let i = self.index(phi)?;
        if !self.admissible_at(i) {
            return Err(ValuationError::NotAdmissible(phi.values().to_vec()));
        }
        let from = self.class_of[i];
        let mut out: Vec<usize> = (0..self.class_images.len())
            .filter(|&c| self.class_strict(from, c))
            .flat_map(|c| self.class_members[c].iter().copied())
            .collect();
        out.sort_unstable();
        Ok(out.into_iter().map(|j| self.space.functor(j)).collect())
    }

    fn frontier_classes(&self) -> Vec<usize> {
        (0..self.class_images.len())
            .filter(|&u| self.class_admissible[u])
            .filter(|&u| !(0..self.class_images.len()).any(|v| self.class_strict(u, v)))
            .collect()
    }

    fn members_of(&self, classes: &[usize]) -> Vec<SummingFunctor> {
        let mut idx: Vec<usize> = classes
            .iter()
            .flat_map(|&c| self.class_members[c].iter().copied())
            .collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| self.space.functor(i)).collect()
    }

    /// Admissible functors admitting no strict `(F, X)`-minorization.
    pub fn pareto_frontier(&self) -> Frontier {
        Frontier::from_members(self.cat, self.members_of(&self.frontier_classes()))
    }

    /// Frontier as the terminal objects of finite minorization chains.
    ///
    /// Builds the strict-minorization digraph on admissible image classes and
    /// walks chains from every object; a chain is finished when its tip has
    /// no outgoing strict arrow, i.e. every arrow out of it lands in its own
    /// iso class. Objects on minorization cycles never terminate a chain.
    pub fn frontier_via_chains(&self) -> Frontier {
        let nodes: Vec<usize> = (0..self.class_images.len())
            .filter(|&u| self.class_admissible[u])
            .collect();
        let succ: Vec<Vec<usize>> = nodes
            .iter()
            .map(|&u| {
                nodes
                    .iter()
                    .enumerate()
                    .filter(|&(_, &v)| self.class_strict(u, v))
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let mut terminal = vec![false; nodes.len()];
        let mut visited = vec![false; nodes.len()];
        for start in 0..nodes.len() {
            if visited[start] {
                continue;
            }
            let mut stack = vec![start];
            visited[start] = true;
            while let Some(u) = stack.pop() {
                if succ[u].is_empty() {
                    terminal[u] = true;
                }
                for &v in &succ[u] {
                    if !visited[v] {
                        visited[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        let classes: Vec<usize> = nodes
            .iter()
            .zip(&terminal)
            .filter(|(_, &t)| t)
            .map(|(&c, _)| c)
            .collect();
        Frontier::from_members(self.cat, self.members_of(&classes))
    }

    /// Product-measure mass of each image class.
    fn class_masses(&self, dist: &ObjectDistribution) -> Vec<f64> {
        self.class_members
            .iter()
            .map(|m| m.iter().map(|&i| dist.functor_weight(&self.space.functor(i))).fold(0.0, |a, b| a + b))
            .collect()
    }

    /// `λ(Φ)`: probability of the strict minorization set of `phi`.
    pub fn lambda(&self, dist: &ObjectDistribution, phi: &SummingFunctor) -> Result<f64, ValuationError> {
        let i = self.index(phi)?;
        if !self.admissible_at(i) {
            return Err(ValuationError::NotAdmissible(phi.values().to_vec()));
        }
        let from = self.class_of[i];
        let masses = self.class_masses(dist);
        let mass: f64 = (0..masses.len())
            .filter(|&c| self.class_strict(from, c))
            .map(|c| masses[c])
            .fold(0.0, |a, b| a + b);
        Ok(mass.clamp(0.0, 1.0))
    }

    /// `λ` for every functor index (0 for non-admissible ones).
    pub fn lambda_table(&self, dist: &ObjectDistribution) -> Vec<f64> {
        let masses = self.class_masses(dist);
        let per_class: Vec<f64> = (0..masses.len())
            .map(|u| {
                if !self.class_admissible[u] {
                    return 0.0;
                }
                let m: f64 = (0..masses.len())
                    .filter(|&v| self.class_strict(u, v))
                    .map(|v| masses[v])
                    .fold(0.0, |a, b| a + b);
                m.clamp(0.0, 1.0)
            })
            .collect();
        self.class_of.iter().map(|&c| per_class[c]).collect()
    }

    /// Probability that a product-measure draw is admissible.
    pub fn admissible_mass(&self, dist: &ObjectDistribution) -> f64 {
        self.class_masses(dist)
            .iter()
            .zip(&self.class_admissible)
            .filter(|(_, &a)| a)
            .map(|(m, _)| m)
            .fold(0.0, |a, b| a + b)
    }

    /// Longest chains of strict minorizations among `draws` (see [`longest_chains`]).
    pub fn longest_strict_chains(&self, draws: &[SummingFunctor]) -> Result<Vec<Vec<usize>>, ValuationError> {
        let idx: Vec<usize> = draws.iter().map(|d| self.index(d)).collect::<Result<_, _>>()?;
        if let Some(d) = idx.iter().position(|&i| !self.admissible_at(i)) {
            return Err(ValuationError::NotAdmissible(draws[d].values().to_vec()));
        }
        Ok(longest_chains(idx.len(), |a, b| self.strictly_improves_at(idx[a], idx[b])))
    }
}

/// All maximum-length index sequences `l_0 < l_1 < …` with `step(l_j, l_{j+1})`
/// for each consecutive pair, in lexicographic order. Empty input gives no chains.
pub fn longest_chains(len: usize, step: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    if len == 0 {
        return Vec::new();
    }
    let depth = chain_depths(len, &step);
    let best = *depth.iter().max().expect("nonempty");
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(best);
    for end in (0..len).filter(|&j| depth[j] == best) {
        path.clear();
        path.push(end);
        collect_back(end, &depth, &step, &mut path, &mut out);
    }
    out.sort();
    out
}

/// `depth[j]`: length of the longest chain ending at `j`.
pub fn chain_depths(len: usize, step: &impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let mut depth = vec![1usize; len];
    for j in 0..len {
        for i in 0..j {
            if depth[i] + 1 > depth[j] && step(i, j) {
                depth[j] = depth[i] + 1;
            }
        }
    }
    depth
}

fn collect_back(
    at: usize,
    depth: &[usize],
    step: &impl Fn(usize, usize) -> bool,
    path: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if depth[at] == 1 {
        out.push(path.iter().rev().copied().collect());
        return;
    }
    for i in 0..at {
        if depth[i] + 1 == depth[at] && step(i, at) {
            path.push(i);
            collect_back(i, depth, step, path, out);
            path.pop();
        }
    }
}

/// Lexicographically earliest maximum-length chain ending exactly at `end`.
pub fn earliest_chain_ending_at(end: usize, depth: &[usize], step: &impl Fn(usize, usize) -> bool) -> Vec<usize> {
    // Greedy from the front: pick the smallest start that can still reach `end`
    // with the full depth, then repeat.
    let target = depth[end];
    let mut can_reach = vec![0usize; end + 1];
    // can_reach[i]: longest chain from i ending at end.
    can_reach[end] = 1;
    for i in (0..end).rev() {
        for j in (i + 1)..=end {
            if can_reach[j] > 0 && step(i, j) {
                can_reach[i] = can_reach[i].max(can_reach[j] + 1);
            }
        }
    }
    let mut chain = Vec::with_capacity(target);
    let mut need = target;
    let mut from = 0;
    let mut prev: Option<usize> = None;
    while need > 0 {
        let pick = (from..=end)
            .find(|&i| can_reach[i] == need && prev.is_none_or(|p| step(p, i)) && depth[i] == target - need + 1)
            .expect("a chain of the recorded depth exists");
        chain.push(pick);
        prev = Some(pick);
        from = pick + 1;
        need -= 1;
    }
    chain
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::rescat::fixtures::chain;

    /// Chain target on `0..k` with `hom(a, b)` iff `a ≥ b`.
    pub fn chain_target(k: usize) -> TargetCategory {
        TargetCategory::with_discrete_iso((0..k).map(|a| (0..k).map(|b| a >= b).collect()).collect()).unwrap()
    }

    /// C3 resources, n = 2, one objective `h = id` into the 3-chain with goal `goal`.
    pub fn chain_system(goal: ObjId) -> (ResourceCategory, ValuationSystem) {
        let cat = chain(3);
        let sys = ValuationSystem::new(vec![Objective {
            target: chain_target(3),
            goal,
            map: ValuationMap::Composed(vec![0, 1, 2]),
        }]);
        (cat, sys)
    }

    /// Two non-isomorphic objects 1, 2 with arrows both ways, above an object 0.
    pub fn cycle_target() -> TargetCategory {
        TargetCategory::with_discrete_iso(vec![
            vec![true, false, false],
            vec![true, true, true],
            vec![true, true, true],
        ])
        .unwrap()
    }

    pub fn cycle_resources() -> ResourceCategory {
        let base = cycle_target();
        let tensor = vec![vec![0, 1, 2], vec![1, 1, 1], vec![2, 1, 1]];
        ResourceCategory::from_base(base, 0, tensor).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::summing::DEFAULT_CAP;

    fn f(v: &[usize]) -> SummingFunctor {
        SummingFunctor::new(v.to_vec())
    }

    /// Frontier by a direct double loop over functor pairs.
    fn brute_frontier(l: &Landscape) -> Vec<SummingFunctor> {
        let all: Vec<_> = l.space().iter().collect();
        all.iter()
            .filter(|p| l.admissible(p).unwrap())
            .filter(|p| {
                !all.iter().any(|q| {
                    let (a, b) = (l.images(p).unwrap(), l.images(q).unwrap());
                    l.system().fx_minorizes_images(a, b, true)
                })
            })
            .cloned()
            .collect()
    }

    #[test]
    fn admissibility_in_chain_with_goal_mid_chain() {
        let (cat, sys) = chain_system(1);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        assert!(sys.validate(&cat, &space).is_empty());
        let l = Landscape::new(&cat, &sys, space);
        // Admissible iff min(a + b, 2) ≥ 1, i.e. everything but (0, 0).
        let adm = l.admissible_set();
        let expected: Vec<_> = space.iter().filter(|p| p.values() != [0, 0]).collect();
        assert_eq!(adm, expected);
        assert!(l.admissible(&f(&[1, 0])).unwrap());
    }

    #[test]
    fn single_objective_identity_goal() {
        let (cat, sys) = chain_system(2);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        assert!(l.admissible(&f(&[2, 0])).unwrap());
        assert!(!l.admissible(&f(&[1, 0])).unwrap());
    }

    #[test]
    fn minorization_basics() {
        let (cat, sys) = chain_system(0);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        let top = f(&[2, 2]);
        assert!(l.minorizes(&top, &top, false).unwrap());
        assert!(!l.minorizes(&top, &top, true).unwrap());
        assert!(l.minorizes(&top, &f(&[0, 1]), true).unwrap());
        assert!(!l.minorizes(&f(&[0, 1]), &top, false).unwrap());
    }

    #[test]
    fn strict_minorization_sets() {
        let (cat, sys) = chain_system(0);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        assert!(l.strict_minorization_set(&f(&[0, 0])).unwrap().is_empty());
        let below_top = l.strict_minorization_set(&f(&[2, 2])).unwrap();
        let expected: Vec<_> = space.iter().filter(|p| p.total(&cat) < 2).collect();
        assert_eq!(below_top, expected);
    }

    #[test]
    fn strict_minorization_requires_admissible_source() {
        let (cat, sys) = chain_system(1);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        assert!(matches!(
            l.strict_minorization_set(&f(&[0, 0])),
            Err(ValuationError::NotAdmissible(_))
        ));
    }

    #[test]
    fn cycle_members_minorize_each_other() {
        let cat = cycle_resources();
        assert!(cat.validate().passed());
        let sys = ValuationSystem::new(vec![Objective {
            target: cycle_target(),
            goal: 1,
            map: ValuationMap::Composed(vec![0, 1, 2]),
        }]);
        let space = FunctorSpace::new(3, 1, DEFAULT_CAP).unwrap();
        assert!(sys.validate(&cat, &space).is_empty());
        let l = Landscape::new(&cat, &sys, space);
        assert_eq!(l.strict_minorization_set(&f(&[1])).unwrap(), vec![f(&[2])]);
        assert_eq!(l.strict_minorization_set(&f(&[2])).unwrap(), vec![f(&[1])]);
        assert!(l.pareto_frontier().is_empty());
        assert!(l.frontier_via_chains().is_empty());
    }

    #[test]
    fn frontier_all_images_isomorphic() {
        let cat = crate::rescat::fixtures::chain(3);
        let target = TargetCategory::new(1, vec![vec![true]], vec![vec![0]]).unwrap();
        let sys = ValuationSystem::new(vec![Objective {
            target,
            goal: 0,
            map: ValuationMap::Composed(vec![0, 0, 0]),
        }]);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        assert_eq!(l.pareto_frontier().members, space.iter().collect::<Vec<_>>());
    }

    #[test]
    fn chain_frontier_matches_double_loop() {
        for goal in 0..3 {
            let (cat, sys) = chain_system(goal);
            let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
            let l = Landscape::new(&cat, &sys, space);
            let frontier = l.pareto_frontier();
            assert_eq!(frontier.members, brute_frontier(&l));
            assert_eq!(frontier, l.frontier_via_chains());
            // Preimage of the minimal admissible image, which is the goal itself.
            let expected: Vec<_> = space.iter().filter(|p| p.total(&cat) == goal).collect();
            assert_eq!(frontier.members, expected);
        }
    }

    #[test]
    fn frontier_grouping_uses_lexicographic_representatives() {
        let (cat, sys) = chain_system(1);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let frontier = Landscape::new(&cat, &sys, space).pareto_frontier();
        assert_eq!(frontier.members, vec![f(&[0, 1]), f(&[1, 0])]);
        assert_eq!(frontier.classes.len(), 2);
        assert_eq!(frontier.classes[0].representative, f(&[0, 1]));
    }

    #[test]
    fn empty_and_singleton_admissible_sets() {
        let cat = crate::rescat::fixtures::chain(3);
        // Goal 0 in a target where nothing maps to 0 from 1: nothing admissible.
        let target = TargetCategory::with_discrete_iso(vec![vec![true, false], vec![false, true]]).unwrap();
        let none = ValuationSystem::new(vec![Objective {
            target: target.clone(),
            goal: 0,
            map: ValuationMap::Composed(vec![1, 1, 1]),
        }]);
        let space = FunctorSpace::new(3, 1, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &none, space);
        assert!(l.pareto_frontier().is_empty());
        assert!(l.frontier_via_chains().is_empty());
        let single = ValuationSystem::new(vec![Objective {
            target,
            goal: 0,
            map: ValuationMap::Table(vec![1, 0, 1]),
        }]);
        let l = Landscape::new(&cat, &single, space);
        assert_eq!(l.frontier_via_chains().members, vec![f(&[1])]);
        assert_eq!(l.pareto_frontier().members, vec![f(&[1])]);
    }

    #[test]
    fn lambda_values() {
        // K = 2, n = 1, uniform: the top functor has exactly one strict minorization.
        let cat = crate::rescat::fixtures::chain(2);
        let sys = ValuationSystem::new(vec![Objective {
            target: chain_target(2),
            goal: 0,
            map: ValuationMap::Composed(vec![0, 1]),
        }]);
        let space = FunctorSpace::new(2, 1, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        let dist = ObjectDistribution::uniform(2);
        assert_eq!(l.lambda(&dist, &f(&[1])).unwrap(), 0.5);
        assert_eq!(l.lambda(&dist, &f(&[0])).unwrap(), 0.0);

        // Top of C3 with goal 0: everything with total < 2 minorizes it.
        let (cat, sys) = chain_system(0);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        let dist = ObjectDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let exact: f64 = space
            .iter()
            .filter(|p| p.total(&cat) < 2)
            .map(|p| dist.functor_weight(&p))
            .sum();
        let expected = 0.25 + 2.0 * 0.5 * 0.3;
        assert!((exact - expected).abs() < 1e-15);
        assert!((l.lambda(&dist, &f(&[2, 2])).unwrap() - expected).abs() < 1e-15);
        let table = l.lambda_table(&dist);
        assert_eq!(table[space.index_of(&f(&[2, 2])).unwrap()], l.lambda(&dist, &f(&[2, 2])).unwrap());
    }

    #[test]
    fn distribution_validation() {
        assert_eq!(ObjectDistribution::new(vec![0.5, 0.4]).unwrap_err().code, "distribution.sum");
        assert_eq!(ObjectDistribution::new(vec![1.0, 0.0]).unwrap_err().code, "distribution.positive");
        assert!(ObjectDistribution::new(vec![0.25; 4]).is_ok());
    }

    #[test]
    fn iso_respect_violation_detected() {
        let hom = vec![
            vec![true, false, false],
            vec![true, true, true],
            vec![true, true, true],
        ];
        let tensor = vec![vec![0, 1, 2], vec![1, 1, 1], vec![2, 1, 2]];
        let cat = ResourceCategory::new(3, 0, hom, vec![vec![0], vec![1, 2]], tensor).unwrap();
        let sys = ValuationSystem::new(vec![Objective {
            target: chain_target(3),
            goal: 0,
            map: ValuationMap::Table(vec![0, 1, 2]),
        }]);
        let space = FunctorSpace::new(3, 1, DEFAULT_CAP).unwrap();
        let issues = sys.validate(&cat, &space);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].code, "valuation.iso_respect");
        let composed = ValuationSystem::new(vec![Objective {
            target: chain_target(3),
            goal: 0,
            map: ValuationMap::Composed(vec![0, 1, 2]),
        }]);
        assert_eq!(composed.validate(&cat, &space)[0].code, "valuation.iso_respect");
    }

    #[test]
    fn table_length_checked() {
        let (cat, _) = chain_system(0);
        let sys = ValuationSystem::new(vec![Objective {
            target: chain_target(3),
            goal: 0,
            map: ValuationMap::Table(vec![0; 8]),
        }]);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        assert_eq!(sys.validate(&cat, &space)[0].code, "valuation.map.length");
    }

    fn brute_longest(len: usize, step: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
        let mut best: Vec<Vec<usize>> = Vec::new();
        for mask in 1u32..(1 << len) {
            let seq: Vec<usize> = (0..len).filter(|i| mask & (1 << i) != 0).collect();
            if !seq.windows(2).all(|w| step(w[0], w[1])) {
                continue;
            }
            match best.first().map(|b| b.len()) {
                Some(l) if seq.len() < l => {}
                Some(l) if seq.len() == l => best.push(seq),
                _ => best = vec![seq],
            }
        }
        best.sort();
        best
    }

    #[test]
    fn longest_chain_cases() {
        let (cat, sys) = chain_system(0);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        let descending = [f(&[2, 2]), f(&[0, 1]), f(&[0, 0])];
        assert_eq!(l.longest_strict_chains(&descending).unwrap(), vec![vec![0, 1, 2]]);
        let flat = [f(&[0, 1]), f(&[1, 0]), f(&[0, 1])];
        assert_eq!(l.longest_strict_chains(&flat).unwrap(), vec![vec![0], vec![1], vec![2]]);
        assert!(l.longest_strict_chains(&[]).unwrap().is_empty());
    }

    #[test]
    fn longest_chains_match_subset_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let cat = cycle_resources();
        let sys = ValuationSystem::new(vec![Objective {
            target: cycle_target(),
            goal: 0,
            map: ValuationMap::Composed(vec![0, 1, 2]),
        }]);
        let space = FunctorSpace::new(3, 2, DEFAULT_CAP).unwrap();
        let l = Landscape::new(&cat, &sys, space);
        for _ in 0..200 {
            let draws: Vec<_> = (0..6).map(|_| space.functor(rng.gen_range(0..space.len()))).collect();
            let idx: Vec<_> = draws.iter().map(|d| space.index_of(d).unwrap()).collect();
            let got = l.longest_strict_chains(&draws).unwrap();
            let want = brute_longest(6, |a, b| l.strictly_improves_at(idx[a], idx[b]));
            assert_eq!(got, want);
            let step = |a: usize, b: usize| l.strictly_improves_at(idx[a], idx[b]);
            let depth = chain_depths(6, &step);
            for end in 0..6 {
                let chain = earliest_chain_ending_at(end, &depth, &step);
                let all_ending: Vec<Vec<usize>> = all_chains(end + 1, &step)
                    .into_iter()
                    .filter(|c| c.last() == Some(&end) && c.len() == depth[end])
                    .collect();
                assert_eq!(chain.len(), depth[end]);
                assert_eq!(&chain, all_ending.iter().min().unwrap());
            }
        }
    }

    fn all_chains(len: usize, step: &impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
        (1u32..(1 << len))
            .map(|mask| (0..len).filter(|i| mask & (1 << i) != 0).collect::<Vec<_>>())
            .filter(|s| s.windows(2).all(|w| step(w[0], w[1])))
            .collect()
    }
}
