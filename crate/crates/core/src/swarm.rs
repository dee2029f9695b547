//! The N-particle swarm: independent draw loops, strict-minorization and
//! reversibility tests, and cross-particle chain search at each round.
//!
//! Round 0 draws one admissible functor per particle. Each later round `k`
//! draws again for every particle, compares the new draw against all earlier
//! own draws (and the tip of any chain brought in from other particles last
//! round), then searches the other particles' round-`k` positions for
//! strict improvements of each particle's longest own chain.
//!
//! A position is flagged when it is reached by a strict minorization whose
//! reversal exists after an `ε` shift, at every scale and for every
//! objective. Which positions are compared never depends on `ε`, so the
//! flagged set grows with `ε`.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::particle::{AdmissibleSampler, ParticleError, DEFAULT_BUDGET};
use crate::scale::{interleaving_distance, reversible_everywhere, ScaleError, ScaledValuations};
use crate::summing::SummingFunctor;
use crate::valuation::{chain_depths, earliest_chain_ending_at, longest_chains, Frontier, Landscape, ObjectDistribution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwarmError {
    #[error("a swarm needs at least one particle and one round")]
    Config,
    #[error("scale data covers {found} objectives, the valuation system has {expected}")]
    ScaleShape { expected: usize, found: usize },
    #[error("functor {0:?} is not admissible")]
    NotAdmissible(Vec<usize>),
    #[error(transparent)]
    Particle(#[from] ParticleError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SwarmConfig {
    pub particles: usize,
    /// Rounds after the initial draw.
    pub draws: usize,
    pub epsilon: usize,
    pub seed: u64,
    pub budget: usize,
}

impl SwarmConfig {
    pub fn new(particles: usize, draws: usize, epsilon: usize, seed: u64) -> Self {
        Self {
            particles,
            draws,
            epsilon,
            seed,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Draw `draw` of particle `particle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Node {
    pub particle: usize,
    pub draw: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagSource {
    /// Reached from an earlier draw of the same particle.
    Own,
    /// Reached from the tip of a chain found among other particles.
    Inherited,
    /// Reached during the cross-particle search.
    Cross,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Flag {
    pub particle: usize,
    pub draw: usize,
    pub functor: SummingFunctor,
    /// Strict minorization chain ending at the flagged position; its last
    /// arrow is the reversible one.
    pub witness: Vec<Node>,
    pub epsilon: usize,
    pub source: FlagSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CrossLink {
    pub round: usize,
    pub from: Node,
    pub to: Node,
    pub reversible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwarmStats {
    /// Product-measure samples per particle, including rejections.
    pub attempts: Vec<usize>,
    pub acceptance_rate: f64,
    /// Strict minorizations found between own draws.
    pub own_arrows: usize,
    /// Length of the longest own chain ↦ number of particles.
    pub chain_length_histogram: BTreeMap<usize, usize>,
    pub any_flags: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwarmReport {
    pub config: SwarmConfig,
    pub draws: Vec<Vec<SummingFunctor>>,
    pub flagged: Vec<Flag>,
    /// Per particle: all longest strict chains among its own draws.
    pub chains: Vec<Vec<Vec<usize>>>,
    pub cross_links: Vec<CrossLink>,
    pub stats: SwarmStats,
}

struct Ctx<'l, 'a> {
    land: &'l Landscape<'a>,
    scaled: &'l ScaledValuations,
    eps: usize,
}

impl Ctx<'_, '_> {
    fn strict(&self, from: usize, to: usize) -> bool {
        self.land.strictly_improves_at(from, to)
    }

    /// Every objective's conversion `from → to` reverses after an `ε` shift at every scale.
    fn reversible(&self, from: usize, to: usize) -> Result<bool, SwarmError> {
        for (a, o) in self.land.system().objectives().iter().enumerate() {
            let (y, z) = (self.scaled.object(a, from), self.scaled.object(a, to));
            if !reversible_everywhere(&o.target, y, z, self.eps)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Lexicographically earliest chain among the longest own chains, ending anywhere.
fn selected_chain(own: &[usize], ctx: &Ctx) -> Vec<usize> {
    let step = |a: usize, b: usize| ctx.strict(own[a], own[b]);
    let depth = chain_depths(own.len(), &step);
    let best = *depth.iter().max().expect("at least one draw");
    (0..own.len())
        .filter(|&e| depth[e] == best)
        .map(|e| earliest_chain_ending_at(e, &depth, &step))
        .min()
        .expect("some end attains the maximum")
}

struct OwnOutcome {
    flag: Option<Flag>,
    arrows: usize,
}

fn own_round(
    i: usize,
    k: usize,
    own: &[usize],
    inherited: Option<&Vec<Node>>,
    idx_of: &dyn Fn(Node) -> usize,
    ctx: &Ctx,
    space_functor: &dyn Fn(usize) -> SummingFunctor,
) -> Result<OwnOutcome, SwarmError> {
    let new = own[k];
    let here = Node { particle: i, draw: k };
    let hits: Vec<usize> = (0..k).filter(|&j| ctx.strict(own[j], new)).collect();
    let arrows = hits.len();
    let mut flag = None;
    if !hits.is_empty() {
        let step = |a: usize, b: usize| ctx.strict(own[a], own[b]);
        let depth = chain_depths(k, &step);
        for &j in &hits {
            if ctx.reversible(own[j], new)? {
                let mut witness: Vec<Node> = earliest_chain_ending_at(j, &depth, &step)
                    .into_iter()
                    .map(|d| Node { particle: i, draw: d })
                    .collect();
                witness.push(here);
                flag = Some(Flag {
                    particle: i,
                    draw: k,
                    functor: space_functor(new),
                    witness,
                    epsilon: ctx.eps,
                    source: FlagSource::Own,
                });
                break;
            }
        }
    }
    if flag.is_none() {
        if let Some(chain) = inherited {
            let tip = idx_of(*chain.last().expect("nonempty chain"));
            if ctx.strict(tip, new) && ctx.reversible(tip, new)? {
                let mut witness = chain.clone();
                witness.push(here);
                flag = Some(Flag {
                    particle: i,
                    draw: k,
                    functor: space_functor(new),
                    witness,
                    epsilon: ctx.eps,
                    source: FlagSource::Inherited,
                });
            }
        }
    }
    Ok(OwnOutcome { flag, arrows })
}

struct CrossOutcome {
    links: Vec<CrossLink>,
    flags: Vec<Flag>,
    inherited: Option<Vec<Node>>,
}

/// Breadth-first search from the particle's chain tip over the other
/// particles' positions at round `k`.
fn cross_round(
    i: usize,
    k: usize,
    draws: &[Vec<usize>],
    ctx: &Ctx,
    space_functor: &dyn Fn(usize) -> SummingFunctor,
) -> Result<CrossOutcome, SwarmError> {
    let own = &draws[i];
    let chain: Vec<Node> = selected_chain(&own[..=k], ctx)
        .into_iter()
        .map(|d| Node { particle: i, draw: d })
        .collect();
    let tip = *chain.last().expect("nonempty chain");
    let idx = |n: Node| draws[n.particle][n.draw];
    let mut parent: BTreeMap<Node, Node> = BTreeMap::new();
    let mut visited: HashSet<Node> = HashSet::from([tip]);
    let mut order = Vec::new();
    let mut queue = VecDeque::from([tip]);
    let mut links = Vec::new();
    let mut flags = Vec::new();
    let path_to = |v: Node, parent: &BTreeMap<Node, Node>| {
        let mut path = vec![v];
        let mut at = v;
        while let Some(&p) = parent.get(&at) {
            if p == tip {
                break;
            }
            path.push(p);
            at = p;
        }
        path.reverse();
        let mut full = chain.clone();
        full.extend(path);
        full
    };
    while let Some(u) = queue.pop_front() {
        for j in (0..draws.len()).filter(|&j| j != i) {
            let v = Node { particle: j, draw: k };
            if visited.contains(&v) || !ctx.strict(idx(u), idx(v)) {
                continue;
            }
            visited.insert(v);
            parent.insert(v, u);
            order.push(v);
            queue.push_back(v);
            let reversible = ctx.reversible(idx(u), idx(v))?;
            links.push(CrossLink { round: k, from: u, to: v, reversible });
            if reversible {
                flags.push(Flag {
                    particle: j,
                    draw: k,
                    functor: space_functor(idx(v)),
                    witness: path_to(v, &parent),
                    epsilon: ctx.eps,
                    source: FlagSource::Cross,
                });
            }
        }
    }
    let inherited = order
        .iter()
        .map(|&v| path_to(v, &parent))
        .fold(None::<Vec<Node>>, |best, p| match best {
            Some(b) if b.len() >= p.len() => Some(b),
            _ => Some(p),
        });
    Ok(CrossOutcome { links, flags, inherited })
}

/// Runs the swarm. Deterministic for a fixed configuration and thread-count independent.
pub fn run_swarm(
    land: &Landscape,
    dist: &ObjectDistribution,
    scaled: &ScaledValuations,
    config: SwarmConfig,
) -> Result<SwarmReport, SwarmError> {
    if config.particles == 0 || config.draws == 0 {
        return Err(SwarmError::Config);
    }
    if scaled.objectives() != land.system().len() {
        return Err(SwarmError::ScaleShape {
            expected: land.system().len(),
            found: scaled.objectives(),
        });
    }
    let ctx = Ctx { land, scaled, eps: config.epsilon };
    let sampler = AdmissibleSampler::new(land, dist, config.budget)?;
    let space = *land.space();
    let functor = |i: usize| space.functor(i);
    let mut rngs: Vec<ChaCha8Rng> = (0..config.particles)
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(p as u64);
            rng
        })
        .collect();
    let mut draws: Vec<Vec<usize>> = vec![Vec::with_capacity(config.draws + 1); config.particles];
    let mut attempts = vec![0usize; config.particles];
    let mut inherited: Vec<Option<Vec<Node>>> = vec![None; config.particles];
    let mut flagged = Vec::new();
    let mut seen: HashSet<Node> = HashSet::new();
    let mut cross_links = Vec::new();
    let mut own_arrows = 0;

    for k in 0..=config.draws {
        let fresh = rngs
            .par_iter_mut()
            .map(|rng| sampler.draw(rng))
            .collect::<Result<Vec<_>, _>>()?;
        for (p, (phi, a)) in fresh.into_iter().enumerate() {
            attempts[p] += a;
            draws[p].push(space.index_of(&phi).expect("sampled in space"));
        }
        if k == 0 {
            continue;
        }
        let snapshot = &draws;
        let idx_of = |n: Node| snapshot[n.particle][n.draw];
        let own = (0..config.particles)
            .into_par_iter()
            .map(|p| own_round(p, k, &snapshot[p], inherited[p].as_ref(), &idx_of, &ctx, &functor))
            .collect::<Result<Vec<_>, _>>()?;
        for o in own {
            own_arrows += o.arrows;
            if let Some(f) = o.flag {
                if seen.insert(Node { particle: f.particle, draw: f.draw }) {
                    flagged.push(f);
                }
            }
        }
        let cross = (0..config.particles)
            .into_par_iter()
            .map(|p| cross_round(p, k, snapshot, &ctx, &functor))
            .collect::<Result<Vec<_>, _>>()?;
        for (p, c) in cross.into_iter().enumerate() {
            cross_links.extend(c.links);
            for f in c.flags {
                if seen.insert(Node { particle: f.particle, draw: f.draw }) {
                    flagged.push(f);
                }
            }
            inherited[p] = c.inherited;
        }
    }

    let chains: Vec<Vec<Vec<usize>>> = draws
        .iter()
        .map(|own| longest_chains(own.len(), |a, b| ctx.strict(own[a], own[b])))
        .collect();
    let mut histogram = BTreeMap::new();
    for c in &chains {
        *histogram.entry(c.first().map_or(0, |x| x.len())).or_insert(0) += 1;
    }
    let total_attempts: usize = attempts.iter().sum();
    let accepted = config.particles * (config.draws + 1);
    Ok(SwarmReport {
        config,
        draws: draws.iter().map(|d| d.iter().map(|&i| space.functor(i)).collect()).collect(),
        stats: SwarmStats {
            attempts,
            acceptance_rate: accepted as f64 / total_attempts as f64,
            own_arrows,
            chain_length_histogram: histogram,
            any_flags: !flagged.is_empty(),
        },
        flagged,
        chains,
        cross_links,
    })
}

/// Whether some frontier member is within `ε` of `phi` for every objective.
pub fn certify_neighborhood(
    land: &Landscape,
    scaled: &ScaledValuations,
    frontier: &Frontier,
    phi: &SummingFunctor,
    eps: usize,
) -> Result<bool, SwarmError> {
    let space = land.space();
    let i = space
        .index_of(phi)
        .filter(|&i| land.admissible_at(i))
        .ok_or_else(|| SwarmError::NotAdmissible(phi.values().to_vec()))?;
    for psi in &frontier.members {
        if within(land, scaled, i, space.index_of(psi).expect("frontier in space"), eps)? {
            return Ok(true);
        }
    }
    Ok(false)
}

fn within(land: &Landscape, scaled: &ScaledValuations, a: usize, b: usize, eps: usize) -> Result<bool, SwarmError> {
    for (o, obj) in land.system().objectives().iter().enumerate() {
        if !interleaving_distance(&obj.target, scaled.object(o, a), scaled.object(o, b))?.within(eps) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Precision and recall of a report against the exact frontier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwarmQuality {
    pub epsilon: usize,
    /// Per flag, in report order.
    pub certified: Vec<bool>,
    /// Certified fraction of flags; absent when nothing was flagged.
    pub precision: Option<f64>,
    pub frontier_classes: usize,
    /// Frontier classes with a member within `ε` of some flag.
    pub represented_classes: usize,
    pub recall: Option<f64>,
}

pub fn assess(
    land: &Landscape,
    scaled: &ScaledValuations,
    frontier: &Frontier,
    report: &SwarmReport,
) -> Result<SwarmQuality, SwarmError> {
    let eps = report.config.epsilon;
    let certified = report
        .flagged
        .iter()
        .map(|f| certify_neighborhood(land, scaled, frontier, &f.functor, eps))
        .collect::<Result<Vec<_>, _>>()?;
    let space = land.space();
    let flag_idx: Vec<usize> = report
        .flagged
        .iter()
        .map(|f| space.index_of(&f.functor).expect("in space"))
        .collect();
    let mut represented = 0;
    for class in &frontier.classes {
        let mut hit = false;
        'class: for psi in &class.members {
            let b = space.index_of(psi).expect("in space");
            for &a in &flag_idx {
                if within(land, scaled, a, b, eps)? {
                    hit = true;
                    break 'class;
                }
            }
        }
        represented += hit as usize;
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(SwarmQuality {
        epsilon: eps,
        precision: ratio(certified.iter().filter(|&&c| c).count(), certified.len()),
        certified,
        frontier_classes: frontier.classes.len(),
        represented_classes: represented,
        recall: ratio(represented, frontier.classes.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rescat::fixtures::chain;
    use crate::scale::fixtures::{chain4, stair};
    use crate::scale::ScaleObject;
    use crate::summing::{FunctorSpace, DEFAULT_CAP};
    use crate::valuation::{Objective, ValuationMap, ValuationSystem};

    fn staircase() -> (crate::rescat::ResourceCategory, ValuationSystem, ScaledValuations) {
        let cat = chain(4);
        let sys = ValuationSystem::new(vec![Objective {
            target: chain4(),
            goal: 0,
            map: ValuationMap::Composed(vec![0, 1, 2, 3]),
        }]);
        let space = FunctorSpace::new(4, 2, DEFAULT_CAP).unwrap();
        let table = vec![space.iter().map(|phi| stair(phi.total(&cat))).collect()];
        (cat, sys, ScaledValuations::new(4, table))
    }

    #[test]
    fn staircase_flags_are_certified_and_monotone() {
        let (cat, sys, scaled) = staircase();
        let land = Landscape::new(&cat, &sys, FunctorSpace::new(4, 2, DEFAULT_CAP).unwrap());
        let dist = ObjectDistribution::uniform(4);
        let frontier = land.pareto_frontier();
        let mut previous: Option<HashSet<Node>> = None;
        for eps in 0..4 {
            let r = run_swarm(&land, &dist, &scaled, SwarmConfig::new(8, 20, eps, 5)).unwrap();
            let q = assess(&land, &scaled, &frontier, &r).unwrap();
            assert!(q.certified.iter().all(|&c| c), "ε = {eps}");
            assert!(eps < 3 || !r.flagged.is_empty());
            for f in &r.flagged {
                assert_eq!(f.witness.last(), Some(&Node { particle: f.particle, draw: f.draw }));
                let w: Vec<usize> = f
                    .witness
                    .iter()
                    .map(|n| land.space().index_of(&r.draws[n.particle][n.draw]).unwrap())
                    .collect();
                assert!(w.windows(2).all(|p| land.strictly_improves_at(p[0], p[1])));
            }
            let set: HashSet<Node> = r.flagged.iter().map(|f| Node { particle: f.particle, draw: f.draw }).collect();
            if let Some(prev) = previous {
                assert!(prev.is_subset(&set), "ε = {eps}");
            }
            previous = Some(set);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let (cat, sys, scaled) = staircase();
        let land = Landscape::new(&cat, &sys, FunctorSpace::new(4, 2, DEFAULT_CAP).unwrap());
        let dist = ObjectDistribution::uniform(4);
        let cfg = SwarmConfig::new(5, 10, 1, 77);
        let a = serde_json::to_string(&run_swarm(&land, &dist, &scaled, cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run_swarm(&land, &dist, &scaled, cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chains_match_longest_strict_chains() {
        let (cat, sys, scaled) = staircase();
        let land = Landscape::new(&cat, &sys, FunctorSpace::new(4, 2, DEFAULT_CAP).unwrap());
        let dist = ObjectDistribution::uniform(4);
        let r = run_swarm(&land, &dist, &scaled, SwarmConfig::new(4, 12, 1, 3)).unwrap();
        for (p, own) in r.draws.iter().enumerate() {
            assert_eq!(r.chains[p], land.longest_strict_chains(own).unwrap());
        }
    }

    #[test]
    fn single_class_instance_never_flags() {
        let cat = chain(4);
        let sys = ValuationSystem::new(vec![Objective {
            target: chain4(),
            goal: 0,
            map: ValuationMap::Composed(vec![2; 4]),
        }]);
        let space = FunctorSpace::new(4, 2, DEFAULT_CAP).unwrap();
        let scaled = ScaledValuations::new(4, vec![vec![ScaleObject::constant(2, 4); space.len()]]);
        let land = Landscape::new(&cat, &sys, space);
        let r = run_swarm(&land, &ObjectDistribution::uniform(4), &scaled, SwarmConfig::new(3, 6, 0, 1)).unwrap();
        assert!(r.flagged.is_empty() && !r.stats.any_flags);
        assert!(r.cross_links.is_empty());
        assert!(r.chains.iter().all(|c| c.iter().all(|x| x.len() == 1)));
    }

    #[test]
    fn certification_on_the_staircase() {
        let (cat, sys, scaled) = staircase();
        let land = Landscape::new(&cat, &sys, FunctorSpace::new(4, 2, DEFAULT_CAP).unwrap());
        let frontier = land.pareto_frontier();
        let zero = SummingFunctor::new(vec![0, 0]);
        let one = SummingFunctor::new(vec![0, 1]);
        for eps in 0..4 {
            assert!(certify_neighborhood(&land, &scaled, &frontier, &zero, eps).unwrap());
        }
        assert!(!certify_neighborhood(&land, &scaled, &frontier, &one, 0).unwrap());
        assert!(certify_neighborhood(&land, &scaled, &frontier, &one, 1).unwrap());
        assert!(certify_neighborhood(&land, &scaled, &frontier, &SummingFunctor::new(vec![3, 3]), 3).unwrap());
    }

    #[test]
    fn bad_configs() {
        let (cat, sys, scaled) = staircase();
        let land = Landscape::new(&cat, &sys, FunctorSpace::new(4, 2, DEFAULT_CAP).unwrap());
        let dist = ObjectDistribution::uniform(4);
        assert_eq!(run_swarm(&land, &dist, &scaled, SwarmConfig::new(0, 3, 0, 1)).unwrap_err(), SwarmError::Config);
        let bad = ScaledValuations::new(4, vec![]);
        assert!(matches!(
            run_swarm(&land, &dist, &bad, SwarmConfig::new(2, 3, 0, 1)),
            Err(SwarmError::ScaleShape { .. })
        ));
    }
}
