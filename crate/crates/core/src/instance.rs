//! JSON instance files: parsing, full validation with located error codes,
//! and emission.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::issue::Issue;
use crate::rescat::{ObjId, ResourceCategory, StructureError, TargetCategory};
use crate::scale::{ScaleError, ScaleObject, ScaledValuations};
use crate::summing::{FunctorSpace, DEFAULT_CAP};
use crate::valuation::{Landscape, ObjectDistribution, Objective, ValuationMap, ValuationSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub category: CategoryFile,
    pub system_size: usize,
    pub valuations: Vec<ValuationFile>,
    pub distribution: DistributionFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<ScaleFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryFile {
    pub objects: usize,
    pub unit: ObjId,
    pub hom: Vec<Vec<bool>>,
    /// Omitted: every object is its own class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso_classes: Option<Vec<Vec<ObjId>>>,
    pub tensor: Vec<Vec<ObjId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub objects: usize,
    pub hom: Vec<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso_classes: Option<Vec<Vec<ObjId>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationFile {
    pub target: TargetFile,
    pub goal: ObjId,
    pub map: MapFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapFile {
    Table { entries: Vec<ObjId> },
    Composed { h: Vec<ObjId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionFile {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleFile {
    pub grid_len: usize,
    /// `[objective][functor in lexicographic order][scale]`.
    pub valuations_scaled: Vec<Vec<Vec<ObjId>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadError {
    Io { path: String, message: String },
    Parse { path: String, line: usize, column: usize, message: String },
    Validation(Vec<Issue>),
}

impl LoadError {
    pub fn class(&self) -> &'static str {
        match self {
            LoadError::Io { .. } => "io",
            LoadError::Parse { .. } => "parse",
            LoadError::Validation(_) => "validation",
        }
    }

    pub fn issues(&self) -> &[Issue] {
        match self {
            LoadError::Validation(v) => v,
            _ => &[],
        }
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io { path, message } => write!(f, "cannot read {path}: {message}"),
            LoadError::Parse { path, line, column, message } => {
                write!(f, "parse error at {path} (line {line}, column {column}): {message}")
            }
            LoadError::Validation(issues) => {
                write!(f, "{} validation issue(s)", issues.len())?;
                for i in issues {
                    write!(f, "\n  {i}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for LoadError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Add missing composites to every hom table before validation.
    pub close_hom: bool,
    pub cap: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            close_hom: false,
            cap: DEFAULT_CAP,
        }
    }
}

/// A validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub description: String,
    pub category: ResourceCategory,
    pub system_size: usize,
    pub valuations: ValuationSystem,
    pub distribution: ObjectDistribution,
    pub scale: Option<ScaledValuations>,
    pub space: FunctorSpace,
}

impl Instance {
    pub fn landscape(&self) -> Landscape<'_> {
        Landscape::new(&self.category, &self.valuations, self.space)
    }

    pub fn to_file(&self) -> InstanceFile {
        let base = self.category.base();
        InstanceFile {
            name: self.name.clone(),
            description: self.description.clone(),
            category: CategoryFile {
                objects: base.objects(),
                unit: self.category.unit(),
                hom: base.hom_table().to_vec(),
                iso_classes: Some(base.iso_classes().to_vec()),
                tensor: self.category.tensor_table().to_vec(),
            },
            system_size: self.system_size,
            valuations: self
                .valuations
                .objectives()
                .iter()
                .map(|o| ValuationFile {
                    target: TargetFile {
                        objects: o.target.objects(),
                        hom: o.target.hom_table().to_vec(),
                        iso_classes: Some(o.target.iso_classes().to_vec()),
                    },
                    goal: o.goal,
                    map: match &o.map {
                        ValuationMap::Table(entries) => MapFile::Table { entries: entries.clone() },
                        ValuationMap::Composed(h) => MapFile::Composed { h: h.clone() },
                    },
                })
                .collect(),
            distribution: DistributionFile {
                weights: self.distribution.weights().to_vec(),
            },
            scale: self.scale.as_ref().map(|s| ScaleFile {
                grid_len: s.grid_len(),
                valuations_scaled: s
                    .table()
                    .iter()
                    .map(|per| per.iter().map(|y| y.values().to_vec()).collect())
                    .collect(),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }
}

fn structure_issue(path: &str, e: StructureError) -> Issue {
    let code = match e {
        StructureError::Dimension { .. } => "rescat.shape",
        StructureError::OutOfRange { .. } => "rescat.range",
        _ => "rescat.iso.partition",
    };
    Issue::new(code, path, e.to_string())
}

fn discrete(k: usize) -> Vec<Vec<ObjId>> {
    (0..k).map(|i| vec![i]).collect()
}

pub fn parse_instance(text: &str) -> Result<InstanceFile, LoadError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        LoadError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

pub fn load_instance(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Instance, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    from_file(parse_instance(&text)?, opts)
}

/// Validates a parsed file. All issues found are reported together.
pub fn from_file(file: InstanceFile, opts: LoadOptions) -> Result<Instance, LoadError> {
    let mut issues = Vec::new();
    let fail = |issues: Vec<Issue>| Err(LoadError::Validation(issues));

    let c = &file.category;
    let mut category = match ResourceCategory::new(
        c.objects,
        c.unit,
        c.hom.clone(),
        c.iso_classes.clone().unwrap_or_else(|| discrete(c.objects)),
        c.tensor.clone(),
    ) {
        Ok(cat) => cat,
        Err(e) => return fail(vec![structure_issue("category", e)]),
    };
    if opts.close_hom {
        category.close_hom();
    }
    for v in category.validate().violations {
        issues.push(Issue::new(v.code, "category", format!("witness {:?}", v.witness)));
    }

    let space = match FunctorSpace::new(c.objects, file.system_size, opts.cap) {
        Ok(s) => s,
        Err(e) => {
            issues.push(Issue::new("summing.capacity", "system_size", e.to_string()));
            return fail(issues);
        }
    };

    let mut objectives = Vec::new();
    for (a, v) in file.valuations.iter().enumerate() {
        let t = &v.target;
        match TargetCategory::new(
            t.objects,
            t.hom.clone(),
            t.iso_classes.clone().unwrap_or_else(|| discrete(t.objects)),
        ) {
            Ok(mut target) => {
                if opts.close_hom {
                    target.close_hom();
                }
                objectives.push(Objective {
                    target,
                    goal: v.goal,
                    map: match &v.map {
                        MapFile::Table { entries } => ValuationMap::Table(entries.clone()),
                        MapFile::Composed { h } => ValuationMap::Composed(h.clone()),
                    },
                })
            }
            Err(e) => issues.push(structure_issue(&format!("valuations[{a}].target"), e)),
        }
    }
    if !issues.is_empty() {
        return fail(issues);
    }
    if objectives.is_empty() {
        return fail(vec![Issue::new("valuation.empty", "valuations", "no objectives")]);
    }
    let valuations = ValuationSystem::new(objectives);
    issues.extend(valuations.validate(&category, &space));

    let distribution = if file.distribution.weights.len() != c.objects {
        issues.push(Issue::new(
            "distribution.length",
            "distribution.weights",
            format!("{} weights for {} objects", file.distribution.weights.len(), c.objects),
        ));
        None
    } else {
        ObjectDistribution::new(file.distribution.weights.clone())
            .map_err(|e| issues.push(e))
            .ok()
    };
    if !issues.is_empty() {
        return fail(issues);
    }

    let scale = match &file.scale {
        None => None,
        Some(s) => match scale_section(s, &category, &valuations, &space) {
            Ok(sv) => Some(sv),
            Err(mut found) => {
                issues.append(&mut found);
                None
            }
        },
    };
    if !issues.is_empty() {
        return fail(issues);
    }

    Ok(Instance {
        name: file.name,
        description: file.description,
        category,
        system_size: file.system_size,
        valuations,
        distribution: distribution.expect("checked above"),
        scale,
        space,
    })
}

/// Shape, transitions, agreement with the base images at scale 0,
/// iso-respect, and coherence of arrows across scales.
fn scale_section(
    s: &ScaleFile,
    cat: &ResourceCategory,
    sys: &ValuationSystem,
    space: &FunctorSpace,
) -> Result<ScaledValuations, Vec<Issue>> {
    let mut issues = Vec::new();
    if s.grid_len == 0 {
        return Err(vec![Issue::new("scale.grid", "scale.grid_len", "grid must have at least one point")]);
    }
    if s.valuations_scaled.len() != sys.len() {
        return Err(vec![Issue::new(
            "scale.shape",
            "scale.valuations_scaled",
            format!("{} objectives, expected {}", s.valuations_scaled.len(), sys.len()),
        )]);
    }
    let mut table = Vec::new();
    for (a, (per, o)) in s.valuations_scaled.iter().zip(sys.objectives()).enumerate() {
        let at = format!("scale.valuations_scaled[{a}]");
        if per.len() != space.len() {
            issues.push(Issue::new(
                "scale.shape",
                at,
                format!("{} functors, expected {}", per.len(), space.len()),
            ));
            continue;
        }
        let mut row = Vec::with_capacity(per.len());
        for (i, values) in per.iter().enumerate() {
            let at = format!("{at}[{i}]");
            if values.len() != s.grid_len {
                issues.push(Issue::new(
                    "scale.shape",
                    at,
                    format!("{} grid values, expected {}", values.len(), s.grid_len),
                ));
                continue;
            }
            match ScaleObject::new(&o.target, values.clone()) {
                Ok(y) => {
                    let image = o.image(cat, space, &space.functor(i)).expect("validated map");
                    if !o.target.iso(y.at(0), image) {
                        issues.push(Issue::new(
                            "scale.base",
                            at,
                            format!("scale 0 holds {} but the valuation image is {image}", y.at(0)),
                        ));
                    }
                    row.push(y);
                }
                Err(e) => {
                    let code = match e {
                        ScaleError::Transition(..) => "scale.transition",
                        ScaleError::OutOfRange { .. } => "scale.range",
                        _ => "scale.shape",
                    };
                    issues.push(Issue::new(code, at, e.to_string()));
                }
            }
        }
        if row.len() == per.len() {
            issues.extend(scale_consistency(a, &row, &o.target, cat, space));
        }
        table.push(row);
    }
    if issues.is_empty() {
        Ok(ScaledValuations::new(s.grid_len, table))
    } else {
        Err(issues)
    }
}

fn scale_consistency(
    a: usize,
    row: &[ScaleObject],
    target: &TargetCategory,
    cat: &ResourceCategory,
    space: &FunctorSpace,
) -> Vec<Issue> {
    let mut issues = Vec::new();
    let at = format!("scale.valuations_scaled[{a}]");
    let mut by_functor_class: HashMap<Vec<usize>, usize> = HashMap::new();
    for (i, y) in row.iter().enumerate() {
        let key = space.functor(i).iso_key(cat);
        match by_functor_class.get(&key) {
            None => {
                by_functor_class.insert(key, i);
            }
            Some(&j) => {
                let z = &row[j];
                if let Some(s) = (0..y.grid_len()).find(|&s| !target.iso(y.at(s), z.at(s))) {
                    issues.push(Issue::new(
                        "scale.iso_respect",
                        format!("{at}[{i}]"),
                        format!("isomorphic to functor {j} but differs at scale {s}"),
                    ));
                }
            }
        }
    }
    let mut distinct: Vec<(usize, &ScaleObject)> = Vec::new();
    for (i, y) in row.iter().enumerate() {
        if !distinct.iter().any(|(_, z)| *z == y) {
            distinct.push((i, y));
        }
    }
    for &(i, y) in &distinct {
        for &(j, z) in &distinct {
            if i == j || !target.hom(y.at(0), z.at(0)) {
                continue;
            }
            if let Some(s) = (0..y.grid_len()).find(|&s| !target.hom(y.at(s), z.at(s))) {
                issues.push(Issue::new(
                    "scale.coherence",
                    format!("{at}[{i}]"),
                    format!("arrow to functor {j} at scale 0 has no counterpart at scale {s}"),
                ));
            }
        }
    }
    issues
}
