use std::collections::BTreeSet;
use std::path::PathBuf;

use paretocat::instance::{from_file, load_instance, parse_instance, Instance, LoadOptions};
use paretocat::summing::SummingFunctor;

fn fixture(name: &str) -> Instance {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"));
    load_instance(path, LoadOptions::default()).unwrap()
}

const NAMES: [&str; 3] = ["chain3", "cycle2", "staircase"];

/// Frontier straight from the definitions, using only raw tables.
fn brute_frontier(inst: &Instance) -> BTreeSet<Vec<usize>> {
    let cat = &inst.category;
    let objs = inst.valuations.objectives();
    let all: Vec<SummingFunctor> = inst.space.iter().collect();
    let img = |phi: &SummingFunctor| -> Vec<usize> { objs.iter().map(|o| o.map_image(cat, phi)).collect() };
    let adm = |v: &[usize]| objs.iter().zip(v).all(|(o, &y)| o.target.hom(y, o.goal));
    let better = |from: &[usize], to: &[usize]| {
        objs.iter().zip(from.iter().zip(to)).all(|(o, (&a, &b))| o.target.hom(a, b))
            && objs.iter().zip(from.iter().zip(to)).any(|(o, (&a, &b))| !o.target.iso(a, b))
    };
    all.iter()
        .filter(|phi| adm(&img(phi)))
        .filter(|phi| !all.iter().any(|psi| adm(&img(psi)) && better(&img(phi), &img(psi))))
        .map(|phi| phi.values().to_vec())
        .collect()
}

trait MapImage {
    fn map_image(&self, cat: &paretocat::rescat::ResourceCategory, phi: &SummingFunctor) -> usize;
}

impl MapImage for paretocat::valuation::Objective {
    fn map_image(&self, cat: &paretocat::rescat::ResourceCategory, phi: &SummingFunctor) -> usize {
        let total = phi.values().iter().fold(cat.unit(), |acc, &v| cat.tensor(acc, v));
        match &self.map {
            paretocat::valuation::ValuationMap::Composed(h) => h[total],
            paretocat::valuation::ValuationMap::Table(_) => unreachable!("fixtures use composed maps"),
        }
    }
}

fn set(members: &[SummingFunctor]) -> BTreeSet<Vec<usize>> {
    members.iter().map(|m| m.values().to_vec()).collect()
}

#[test]
fn bundled_fixtures_load() {
    for name in NAMES {
        let inst = fixture(name);
        assert!(inst.category.validate().passed(), "{name}");
        assert!(inst.scale.is_some(), "{name}");
        assert!(inst.space.len() <= 125);
    }
}

#[test]
fn frontier_characterizations_agree() {
    for name in NAMES {
        let inst = fixture(name);
        let land = inst.landscape();
        let exact = land.pareto_frontier();
        let chains = land.frontier_via_chains();
        let lambdas = land.lambda_table(&inst.distribution);
        let zero: BTreeSet<Vec<usize>> = inst
            .space
            .iter()
            .enumerate()
            .filter(|&(i, _)| land.admissible_at(i) && lambdas[i] == 0.0)
            .map(|(_, phi)| phi.values().to_vec())
            .collect();
        assert_eq!(set(&exact.members), brute_frontier(&inst), "{name}");
        assert_eq!(set(&chains.members), set(&exact.members), "{name}");
        assert_eq!(zero, set(&exact.members), "{name}");
        assert!(!exact.is_empty(), "{name}");
    }
}

#[test]
fn chain3_frontier_classes() {
    let inst = fixture("chain3");
    let frontier = inst.landscape().pareto_frontier();
    assert_eq!(set(&frontier.members), BTreeSet::from([vec![0, 1], vec![1, 0]]));
    assert_eq!(frontier.classes.len(), 2);
}

#[test]
fn fixtures_round_trip() {
    for name in NAMES {
        let inst = fixture(name);
        let again = from_file(parse_instance(&inst.to_json()).unwrap(), LoadOptions::default()).unwrap();
        assert_eq!(again, inst, "{name}");
    }
}

#[test]
fn cycle_lambdas() {
    // Objects 1 and 2 convert into each other without being isomorphic.
    let inst = fixture("cycle2");
    let land = inst.landscape();
    let l = |v: &[usize]| land.lambda(&inst.distribution, &SummingFunctor::new(v.to_vec())).unwrap();
    assert_eq!(l(&[0, 0]), 0.0);
    assert!(l(&[0, 1]) > 0.0);
    assert!(l(&[0, 2]) > 0.0);
}
