//! Single-particle dynamics: the jump chain on "best index so far".
//!
//! A particle holds draws `Φ_0, Φ_1, …`. At step `t` the best index `k`
//! jumps to `t` with probability `λ_k`, otherwise stays. The state
//! distribution after `n` steps is the coefficient vector `c_n`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::probcat::{canonicalize, Component, FamilyEntry, ProbError, ProbMorphism, ProbObject, Tag};
use crate::rescat::{ObjId, TargetCategory};
use crate::summing::SummingFunctor;
use crate::valuation::{earliest_chain_ending_at, chain_depths, Landscape, ObjectDistribution, ValuationError};

pub const DEFAULT_BUDGET: usize = 100_000;
const ESTIMATE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParticleError {
    #[error("λ_{0} = {1} lies outside [0, 1]")]
    LambdaRange(usize, f64),
    #[error("λ increases at index {0}")]
    NotMonotone(usize),
    #[error("chain index {0} is out of order or beyond n = {1}")]
    ChainIndex(usize, usize),
    #[error("no admissible functor")]
    NoAdmissible,
    #[error("no admissible draw after {attempts} attempts (admissible mass {mass:e})")]
    Sampling { attempts: usize, mass: f64 },
    #[error("draws {0} and {1} are not a strict step for objective {2}")]
    NotAChain(usize, usize, usize),
    #[error("no arrow from chain component {component} to tip {tip}")]
    MissingArrow { component: usize, tip: usize },
    #[error("a cocone needs at least one tip")]
    NoTips,
    #[error("objective {0} does not exist")]
    Objective(usize),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

fn check_range<T: PartialOrd + Zero + One>(lambdas: &[T], to_f64: impl Fn(&T) -> f64) -> Result<(), ParticleError> {
    match lambdas.iter().position(|l| *l < T::zero() || *l > T::one()) {
        Some(i) => Err(ParticleError::LambdaRange(i, to_f64(&lambdas[i]))),
        None => Ok(()),
    }
}

fn pow<T: Num + Clone>(x: &T, e: usize) -> T {
    (0..e).fold(T::one(), |acc, _| acc * x.clone())
}

/// Diagonal `c_0^0, …, c_n^n` for `λ_0, …, λ_{n-1}`.
pub fn diagonal<T: Num + Clone>(lambdas: &[T]) -> Vec<T> {
    let mut d = vec![T::one()];
    for m in 1..=lambdas.len() {
        let mut acc = T::zero();
        for k in 0..m {
            let l = &lambdas[k];
            acc = acc + l.clone() * pow(&(T::one() - l.clone()), m - 1 - k) * d[k].clone();
        }
        d.push(acc);
    }
    d
}

fn closed_form<T: Num + Clone>(lambdas: &[T]) -> Vec<T> {
    let n = lambdas.len();
    let d = diagonal(lambdas);
    let mut c: Vec<T> = (0..n)
        .map(|k| d[k].clone() * pow(&(T::one() - lambdas[k].clone()), n - k))
        .collect();
    c.push(d[n].clone());
    c
}

/// `c_n` from the closed recursion; `lambdas` are `λ_0, …, λ_{n-1}`.
pub fn evolve_coefficients(lambdas: &[f64]) -> Result<Vec<f64>, ParticleError> {
    check_range(lambdas, |l| *l)?;
    Ok(closed_form(lambdas))
}

pub fn evolve_coefficients_exact(lambdas: &[BigRational]) -> Result<Vec<BigRational>, ParticleError> {
    check_range(lambdas, ratio_to_f64)?;
    Ok(closed_form(lambdas))
}

/// `S_m`, shape `(m+2) × (m+1)`: diagonal `1 - λ_k`, last row `λ_k`.
pub fn transition_matrix<T: Num + Clone>(lambdas: &[T], m: usize) -> Vec<Vec<T>> {
    let mut s = vec![vec![T::zero(); m + 1]; m + 2];
    for k in 0..=m {
        s[k][k] = T::one() - lambdas[k].clone();
        s[m + 1][k] = lambdas[k].clone();
    }
    s
}

pub fn mat_vec<T: Num + Clone>(s: &[Vec<T>], v: &[T]) -> Vec<T> {
    s.iter()
        .map(|row| row.iter().zip(v).fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
        .collect()
}

pub fn mat_mul<T: Num + Clone>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    let cols = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).fold(T::zero(), |acc, (x, r)| acc + x.clone() * r[j].clone()))
                .collect()
        })
        .collect()
}

fn by_matrix<T: Num + Clone>(lambdas: &[T]) -> Vec<T> {
    let mut c = vec![T::one()];
    for m in 0..lambdas.len() {
        c = mat_vec(&transition_matrix(lambdas, m), &c);
    }
    c
}

/// `c_n` as `S_{n-1} ⋯ S_0 · (1)`.
pub fn evolve_by_matrix(lambdas: &[f64]) -> Result<Vec<f64>, ParticleError> {
    check_range(lambdas, |l| *l)?;
    Ok(by_matrix(lambdas))
}

pub fn evolve_by_matrix_exact(lambdas: &[BigRational]) -> Result<Vec<BigRational>, ParticleError> {
    check_range(lambdas, ratio_to_f64)?;
    Ok(by_matrix(lambdas))
}

/// The exact rational value of an `f64`.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|i| (p.get(i).unwrap_or(&0.0) - q.get(i).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

const ORACLE_CHUNK: usize = 1 << 15;

fn jump_run(lambdas: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut state = 0;
    for t in 1..=lambdas.len() {
        if rng.gen::<f64>() < lambdas[state] {
            state = t;
        }
    }
    state
}

/// Final-state counts of `trials` independent jump-chain runs.
///
/// Trial `t` reads its own window of the seeded stream (always `n` uniforms),
/// so results do not depend on how trials are split across threads.
pub fn markov_counts(lambdas: &[f64], trials: usize, seed: u64) -> Result<Vec<u64>, ParticleError> {
    check_range(lambdas, |l| *l)?;
    let n = lambdas.len();
    let words_per_trial = 2 * n as u128;
    let chunks = trials.div_ceil(ORACLE_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * ORACLE_CHUNK;
            let end = (start + ORACLE_CHUNK).min(trials);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_word_pos(start as u128 * words_per_trial);
            let mut counts = vec![0u64; n + 1];
            for _ in start..end {
                counts[jump_run(lambdas, &mut rng)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; n + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts)
}

/// Empirical final-state distribution of the jump chain.
pub fn markov_oracle(lambdas: &[f64], trials: usize, seed: u64) -> Result<Vec<f64>, ParticleError> {
    let counts = markov_counts(lambdas, trials, seed)?;
    let t = trials.max(1) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / t).collect())
}

/// Jump-index path frequencies: how often each sequence of jump times occurred.
pub fn markov_paths(lambdas: &[f64], trials: usize, seed: u64) -> Result<Vec<(Vec<usize>, u64)>, ParticleError> {
    check_range(lambdas, |l| *l)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: std::collections::BTreeMap<Vec<usize>, u64> = Default::default();
    for _ in 0..trials {
        let mut state = 0;
        let mut path = Vec::new();
        for t in 1..=lambdas.len() {
            if rng.gen::<f64>() < lambdas[state] {
                state = t;
                path.push(t);
            }
        }
        *seen.entry(path).or_default() += 1;
    }
    Ok(seen.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Bound {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateViolation {
    pub k: usize,
    pub bound: Bound,
    pub lhs: f64,
    pub rhs: f64,
}

/// Checks `c_k^k (1-λ_0)^{n-k} ≤ c_n^n ≤ c_k^k` for every `k < n`, where
/// `diagonal` holds `c_0^0 … c_n^n`. Returns the failing instances.
pub fn check_estimate(lambdas: &[f64], diagonal: &[f64]) -> Result<Vec<EstimateViolation>, ParticleError> {
    check_range(lambdas, |l| *l)?;
    if let Some(i) = lambdas.windows(2).position(|w| w[1] > w[0]) {
        return Err(ParticleError::NotMonotone(i + 1));
    }
    let n = diagonal.len() - 1;
    let top = diagonal[n];
    let mut out = Vec::new();
    for (k, &d) in diagonal.iter().enumerate().take(n) {
        let lower = d * (1.0 - lambdas[0]).powi((n - k) as i32);
        if lower > top + ESTIMATE_SLACK {
            out.push(EstimateViolation { k, bound: Bound::Lower, lhs: lower, rhs: top });
        }
        if top > d + ESTIMATE_SLACK {
            out.push(EstimateViolation { k, bound: Bound::Upper, lhs: top, rhs: d });
        }
    }
    Ok(out)
}

fn check_chain(chain: &[usize], n: usize) -> Result<(), ParticleError> {
    let mut prev = 0;
    for &l in chain {
        if l <= prev || l > n {
            return Err(ParticleError::ChainIndex(l, n));
        }
        prev = l;
    }
    Ok(())
}

/// Probability that the jumps up to step `n` happen exactly at `chain`.
///
/// `lambdas[i]` is the rate at draw `i`; entries are read at `0` and at
/// chain points before `n`.
pub fn chain_probability(lambdas: &[f64], chain: &[usize], n: usize) -> Result<f64, ParticleError> {
    check_chain(chain, n)?;
    let rate = |i: usize| lambdas.get(i).copied().ok_or(ParticleError::ChainIndex(i, n));
    let mut p = 1.0;
    let mut state = 0;
    for &l in chain {
        let r = rate(state)?;
        p *= (1.0 - r).powi((l - state - 1) as i32) * r;
        state = l;
    }
    if state < n {
        p *= (1.0 - rate(state)?).powi((n - state) as i32);
    }
    Ok(p)
}

/// Variant in which each jump between chain points is weighted by the rate
/// of the point being jumped to instead of the point being left (the first
/// jump still uses `λ_0`). Kept for comparison; it does not describe the
/// jump chain.
pub fn chain_probability_shifted(lambdas: &[f64], chain: &[usize], n: usize) -> Result<f64, ParticleError> {
    check_chain(chain, n)?;
    let rate = |i: usize| lambdas.get(i).copied().ok_or(ParticleError::ChainIndex(i, n));
    let mut p = 1.0;
    let mut state = 0;
    for (j, &l) in chain.iter().enumerate() {
        let jump = if j == 0 { rate(0)? } else { rate(l)? };
        p *= (1.0 - rate(state)?).powi((l - state - 1) as i32) * jump;
        state = l;
    }
    if state < n {
        p *= (1.0 - rate(state)?).powi((n - state) as i32);
    }
    Ok(p)
}

/// A particle run: draws `Φ_0..Φ_n`, their `λ`, and `c_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleTrace {
    pub draws: Vec<SummingFunctor>,
    pub lambdas: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// Product-measure samples taken, including rejected ones.
    pub attempts: usize,
}

impl ParticleTrace {
    pub fn from_draws(
        land: &Landscape,
        dist: &ObjectDistribution,
        draws: Vec<SummingFunctor>,
    ) -> Result<Self, ParticleError> {
        let lambdas = draws
            .iter()
            .map(|d| land.lambda(dist, d))
            .collect::<Result<Vec<_>, _>>()?;
        let coeffs = evolve_coefficients(&lambdas[..lambdas.len().saturating_sub(1)])?;
        let attempts = draws.len();
        Ok(Self { draws, lambdas, coeffs, attempts })
    }

    pub fn n(&self) -> usize {
        self.draws.len() - 1
    }

    /// Diagonal `c_0^0..c_n^n` of this trace.
    pub fn diagonal(&self) -> Vec<f64> {
        diagonal(&self.lambdas[..self.n()])
    }

    /// Longest strict minorization chains among the draws.
    pub fn chains(&self, land: &Landscape) -> Result<Vec<Vec<usize>>, ParticleError> {
        Ok(land.longest_strict_chains(&self.draws)?)
    }

    /// Whether `λ` is non-increasing along every longest chain.
    pub fn lambdas_monotone_on_chains(&self, land: &Landscape) -> Result<bool, ParticleError> {
        Ok(self
            .chains(land)?
            .iter()
            .all(|c| c.windows(2).all(|w| self.lambdas[w[1]] <= self.lambdas[w[0]])))
    }
}

/// Samples admissible functors from the product measure by rejection.
pub struct AdmissibleSampler<'l, 'a> {
    land: &'l Landscape<'a>,
    weights: WeightedIndex<f64>,
    budget: usize,
    mass: f64,
}

impl<'l, 'a> AdmissibleSampler<'l, 'a> {
    pub fn new(land: &'l Landscape<'a>, dist: &ObjectDistribution, budget: usize) -> Result<Self, ParticleError> {
        if !(0..land.space().len()).any(|i| land.admissible_at(i)) {
            return Err(ParticleError::NoAdmissible);
        }
        let weights = WeightedIndex::new(dist.weights()).expect("validated distribution");
        Ok(Self {
            land,
            weights,
            budget,
            mass: land.admissible_mass(dist),
        })
    }

    /// One admissible draw and the number of attempts it took.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<(SummingFunctor, usize), ParticleError> {
        let n = self.land.space().system_size();
        for attempt in 1..=self.budget {
            let phi = SummingFunctor::new((0..n).map(|_| self.weights.sample(rng)).collect());
            let idx = self.land.space().index_of(&phi).expect("values in range");
            if self.land.admissible_at(idx) {
                return Ok((phi, attempt));
            }
        }
        Err(ParticleError::Sampling {
            attempts: self.budget,
            mass: self.mass,
        })
    }
}

/// Draws `Φ_0..Φ_n` conditioned on admissibility and evaluates the trace.
pub fn run_particle(
    land: &Landscape,
    dist: &ObjectDistribution,
    n: usize,
    seed: u64,
    budget: usize,
) -> Result<ParticleTrace, ParticleError> {
    let sampler = AdmissibleSampler::new(land, dist, budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n + 1);
    let mut attempts = 0;
    for _ in 0..=n {
        let (phi, a) = sampler.draw(&mut rng)?;
        attempts += a;
        draws.push(phi);
    }
    let table = land.lambda_table(dist);
    let lambdas: Vec<f64> = draws
        .iter()
        .map(|d| table[land.space().index_of(d).expect("in space")])
        .collect();
    let coeffs = evolve_coefficients(&lambdas[..n])?;
    Ok(ParticleTrace { draws, lambdas, coeffs, attempts })
}

/// The system `X_0 → X_1 → …` in a probabilistic target, one object per step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InducedSystem {
    pub objective: usize,
    /// `X_m = Σ_k c_m^k F(Φ_k)` over the positive-weight support.
    pub objects: Vec<ProbObject>,
    /// Draw index of each component of each object.
    pub supports: Vec<Vec<usize>>,
    /// `X_m → X_{m+1}`.
    pub morphisms: Vec<ProbMorphism>,
    pub lambdas: Vec<f64>,
}

fn next_support(support: &[usize], lambdas: &[f64], m: usize) -> Vec<usize> {
    let mut next: Vec<usize> = support.iter().copied().filter(|&k| lambdas[k] < 1.0).collect();
    if support.iter().any(|&k| lambdas[k] > 0.0) {
        next.push(m + 1);
    }
    next
}

/// Builds the induced system of a trace whose draws form a strict chain for `objective`.
pub fn induced_system(land: &Landscape, trace: &ParticleTrace, objective: usize) -> Result<InducedSystem, ParticleError> {
    let obj = land
        .system()
        .objectives()
        .get(objective)
        .ok_or(ParticleError::Objective(objective))?;
    let target = &obj.target;
    let images: Vec<ObjId> = trace
        .draws
        .iter()
        .map(|d| land.images(d).map(|img| img[objective]))
        .collect::<Result<_, _>>()?;
    for (k, w) in images.windows(2).enumerate() {
        if !target.hom(w[0], w[1]) || target.iso(w[0], w[1]) {
            return Err(ParticleError::NotAChain(k, k + 1, objective));
        }
    }
    let lambdas = trace.lambdas.clone();
    let mut supports = vec![vec![0usize]];
    let mut objects = vec![ProbObject::point(images[0])];
    let mut morphisms = Vec::new();
    for m in 0..trace.n() {
        let src = &supports[m];
        let dst = next_support(src, &lambdas, m);
        let coeffs = evolve_coefficients(&lambdas[..=m])?;
        let x_next = ProbObject::try_from(
            dst.iter()
                .map(|&k| Component { w: coeffs[k], obj: images[k] })
                .collect::<Vec<_>>(),
        )?;
        let full = transition_matrix(&lambdas, m);
        let matrix: Vec<Vec<f64>> = dst
            .iter()
            .map(|&a| src.iter().map(|&b| full[a][b]).collect())
            .collect();
        let mut families = Vec::new();
        for (bj, &b) in src.iter().enumerate() {
            for (ai, &a) in dst.iter().enumerate() {
                let mu = full[a][b];
                if mu > 0.0 {
                    families.push(FamilyEntry {
                        target: ai,
                        source: bj,
                        tag: Tag { from: images[b], to: images[a] },
                        mu,
                    });
                }
            }
        }
        let morphism = ProbMorphism { matrix, families };
        morphism.validate(&objects[m], &x_next, target)?;
        morphisms.push(morphism);
        objects.push(x_next);
        supports.push(dst);
    }
    Ok(InducedSystem { objective, objects, supports, morphisms, lambdas })
}

/// A cocone over an induced system with tip `Σ (1/M) Y_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cocone {
    pub tip: ProbObject,
    /// Leg `X_m → tip` per system object.
    pub legs: Vec<ProbMorphism>,
    /// Whether `S̃_{m+1} · S_m = S̃_m` held exactly for every `m`.
    pub commutes: bool,
}

impl Cocone {
    /// The tip in localized normal form.
    pub fn collapse(&self, target: &TargetCategory) -> ProbObject {
        canonicalize(&self.tip, target)
    }
}

/// `M × cols` matrix with every entry `1/M`.
pub fn uniform_leg(m: usize, cols: usize) -> Vec<Vec<BigRational>> {
    let e = BigRational::new(BigInt::one(), BigInt::from(m));
    vec![vec![e; cols]; m]
}

/// `S_m` restricted to consecutive supports, in exact arithmetic.
fn exact_step(lambdas: &[f64], src: &[usize], dst: &[usize], m: usize) -> Vec<Vec<BigRational>> {
    let exact_l: Vec<BigRational> = lambdas[..=m].iter().map(|&l| exact(l)).collect();
    let full = transition_matrix(&exact_l, m);
    dst.iter().map(|&a| src.iter().map(|&b| full[a][b].clone()).collect()).collect()
}

/// Cocone from `system` to the uniform combination of `tips`.
pub fn induced_cocone(
    land: &Landscape,
    trace: &ParticleTrace,
    system: &InducedSystem,
    tips: &[ObjId],
) -> Result<Cocone, ParticleError> {
    let target = &land.system().objectives()[system.objective].target;
    if tips.is_empty() {
        return Err(ParticleError::NoTips);
    }
    let m_tips = tips.len();
    let tip = ProbObject::uniform(tips)?;
    let w = 1.0 / m_tips as f64;
    let mut legs = Vec::with_capacity(system.objects.len());
    for x in &system.objects {
        let mut families = Vec::new();
        for (b, c) in x.components().iter().enumerate() {
            for (r, &y) in tips.iter().enumerate() {
                if !target.hom(c.obj, y) {
                    return Err(ParticleError::MissingArrow { component: b, tip: r });
                }
                families.push(FamilyEntry { target: r, source: b, tag: Tag { from: c.obj, to: y }, mu: w });
            }
        }
        let leg = ProbMorphism {
            matrix: vec![vec![w; x.len()]; m_tips],
            families,
        };
        leg.validate(x, &tip, target)?;
        legs.push(leg);
    }
    let mut commutes = true;
    for m in 0..trace.n() {
        let step = exact_step(&system.lambdas, &system.supports[m], &system.supports[m + 1], m);
        let lhs = mat_mul(&uniform_leg(m_tips, system.supports[m + 1].len()), &step);
        commutes &= lhs == uniform_leg(m_tips, system.supports[m].len());
    }
    Ok(Cocone { tip, legs, commutes })
}

/// Longest own chain ending at the last draw, lexicographically earliest.
pub fn earliest_chain_to_last(len: usize, step: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let depth = chain_depths(len, &step);
    earliest_chain_ending_at(len - 1, &depth, &step)
}
