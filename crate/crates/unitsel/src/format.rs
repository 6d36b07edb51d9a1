//! JSON files: networks, objective functions, query sidecars and roles.
//!
//! Variables are referred to by name everywhere. Probabilities are written
//! with 17 significant digits so tables survive a round trip bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::ser::{Error as _, SerializeSeq};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use unitsel_core::bench::Roles;
use unitsel_core::network::Violation;
use unitsel_core::objective::{CounterfactualComponent, ObjectiveFunction, World, WorldEvent};
use unitsel_core::{Cpt, Evidence, Network, VarId, Variable};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownName(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] unitsel_core::Error),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        FormatError::Syntax { line: e.line(), column: e.column(), message }
    }
}

pub fn read_file(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), FormatError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| FormatError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| FormatError::Io { path: path.to_path_buf(), source })
}

fn exact<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        if !x.is_finite() {
            return Err(S::Error::custom("non-finite number"));
        }
        let raw = RawValue::from_string(format!("{x:.16e}")).map_err(S::Error::custom)?;
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    cardinality: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptDoc {
    child: String,
    parents: Vec<String>,
    #[serde(serialize_with = "exact")]
    table: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    variables: Vec<VariableDoc>,
    cpts: Vec<CptDoc>,
}

fn lookup(names: &std::collections::HashMap<&str, VarId>, name: &str) -> Result<VarId, FormatError> {
    names.get(name).copied().ok_or_else(|| FormatError::UnknownName(name.to_string()))
}

/// Parses and validates a network; ids follow declaration order.
pub fn parse_network(text: &str) -> Result<Network, FormatError> {
    let doc: NetworkDoc = serde_json::from_str(text)?;
    let variables: Vec<Variable> = doc
        .variables
        .into_iter()
        .enumerate()
        .map(|(i, v)| Variable { id: VarId(i as u32), name: v.name, cardinality: v.cardinality })
        .collect();
    let names: std::collections::HashMap<&str, VarId> = variables.iter().map(|v| (v.name.as_str(), v.id)).collect();
    let mut cpts = Vec::with_capacity(doc.cpts.len());
    for c in doc.cpts {
        let child = lookup(&names, &c.child)?;
        let parents = c.parents.iter().map(|p| lookup(&names, p)).collect::<Result<_, _>>()?;
        cpts.push(Cpt { child, parents, table: c.table });
    }
    Ok(Network::new(variables, cpts)?)
}

pub fn network_to_json(net: &Network) -> String {
    let doc = NetworkDoc {
        variables: net
            .variables()
            .iter()
            .map(|v| VariableDoc { name: v.name.clone(), cardinality: v.cardinality })
            .collect(),
        cpts: net
            .cpts()
            .iter()
            .map(|c| CptDoc {
                child: net.name(c.child).to_string(),
                parents: c.parents.iter().map(|&p| net.name(p).to_string()).collect(),
                table: c.table.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("finite tables serialize") + "\n"
}

/// Human-readable validation report, one violation per line.
pub fn describe_violations(net_names: &[String], report: &[Violation]) -> String {
    report
        .iter()
        .map(|v| {
            let name = net_names.get(v.var().index()).map_or("?", String::as_str);
            format!("{name}: {v}")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub var: String,
    pub value: usize,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EventDoc {
    pub var: String,
    /// 0 factual, 1 first intervention, 2 second intervention.
    pub world: u8,
    pub value: usize,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub weight: f64,
    pub outcomes: Vec<EventDoc>,
    #[serde(default)]
    pub treatments: Vec<EventDoc>,
    #[serde(default)]
    pub evidence: Vec<Assignment>,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveDoc {
    pub components: Vec<ComponentDoc>,
    pub units: Vec<String>,
}

fn world(w: u8) -> Result<World, FormatError> {
    match w {
        0 => Ok(World::Base),
        1 => Ok(World::First),
        2 => Ok(World::Second),
        _ => Err(FormatError::Invalid(format!("world must be 0, 1 or 2, found {w}"))),
    }
}

fn world_number(w: World) -> u8 {
    w.index() as u8
}

pub fn evidence_from(net: &Network, items: &[Assignment]) -> Result<Evidence, FormatError> {
    let mut e = Evidence::new();
    for a in items {
        let v = net.find(&a.var).ok_or_else(|| FormatError::UnknownName(a.var.clone()))?;
        if e.insert(v, a.value).is_some_and(|old| old != a.value) {
            return Err(FormatError::Invalid(format!("conflicting values for `{}`", a.var)));
        }
    }
    net.check_evidence(&e)?;
    Ok(e)
}

pub fn evidence_to(net: &Network, e: &Evidence) -> Vec<Assignment> {
    e.iter().map(|(v, x)| Assignment { var: net.name(v).to_string(), value: x }).collect()
}

pub fn names_to_ids(net: &Network, names: &[String]) -> Result<Vec<VarId>, FormatError> {
    names.iter().map(|n| net.find(n).ok_or_else(|| FormatError::UnknownName(n.clone()))).collect()
}

pub fn ids_to_names(net: &Network, ids: &[VarId]) -> Vec<String> {
    ids.iter().map(|&v| net.name(v).to_string()).collect()
}

pub fn parse_objective(scm: &Network, text: &str) -> Result<ObjectiveFunction, FormatError> {
    let doc: ObjectiveDoc = serde_json::from_str(text)?;
    let event = |e: &EventDoc| -> Result<WorldEvent, FormatError> {
        let v = scm.find(&e.var).ok_or_else(|| FormatError::UnknownName(e.var.clone()))?;
        if e.value >= scm.cardinality(v) {
            return Err(FormatError::Invalid(format!("value {} out of range for `{}`", e.value, e.var)));
        }
        Ok(WorldEvent::new(v, world(e.world)?, e.value))
    };
    let mut components = Vec::with_capacity(doc.components.len());
    for c in &doc.components {
        components.push(CounterfactualComponent {
            weight: c.weight,
            outcomes: c.outcomes.iter().map(event).collect::<Result<_, _>>()?,
            treatments: c.treatments.iter().map(event).collect::<Result<_, _>>()?,
            evidence: evidence_from(scm, &c.evidence)?,
        });
    }
    Ok(ObjectiveFunction { components, units: names_to_ids(scm, &doc.units)? })
}

pub fn objective_to_json(scm: &Network, obj: &ObjectiveFunction) -> String {
    let event = |e: &WorldEvent| EventDoc { var: scm.name(e.var).to_string(), world: world_number(e.world), value: e.value };
    let doc = ObjectiveDoc {
        components: obj
            .components
            .iter()
            .map(|c| ComponentDoc {
                weight: c.weight,
                outcomes: c.outcomes.iter().map(event).collect(),
                treatments: c.treatments.iter().map(event).collect(),
                evidence: evidence_to(scm, &c.evidence),
            })
            .collect(),
        units: ids_to_names(scm, &obj.units),
    };
    serde_json::to_string_pretty(&doc).expect("objective serializes") + "\n"
}

/// The R-MAP query that goes with an objective-model file. The objective's
/// value at `u` is `scale * Pr(e1 | u, e2) - shift`.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QueryDoc {
    pub units: Vec<String>,
    pub e1: Vec<Assignment>,
    pub e2: Vec<Assignment>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
}

fn one() -> f64 {
    1.0
}

pub fn parse_query(text: &str) -> Result<QueryDoc, FormatError> {
    Ok(serde_json::from_str(text)?)
}

pub fn query_to_json(q: &QueryDoc) -> String {
    serde_json::to_string_pretty(q).expect("query serializes") + "\n"
}

/// `model.json` -> `model.query.json`.
pub fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("query.json")
}

/// Roles written next to a generated SCM.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RolesDoc {
    pub units: Vec<String>,
    pub treatment: String,
    pub outcome: String,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub index: u32,
    pub n_prime: usize,
}

pub fn parse_roles(scm: &Network, text: &str) -> Result<(RolesDoc, Roles), FormatError> {
    let doc: RolesDoc = serde_json::from_str(text)?;
    let find = |n: &String| scm.find(n).ok_or_else(|| FormatError::UnknownName(n.clone()));
    let mut units = names_to_ids(scm, &doc.units)?;
    units.sort_unstable();
    let roles = Roles { units, treatment: find(&doc.treatment)?, outcome: find(&doc.outcome)? };
    Ok((doc, roles))
}

pub fn roles_to_json(doc: &RolesDoc) -> String {
    serde_json::to_string_pretty(doc).expect("roles serialize") + "\n"
}

/// Parses `A=1,B=0` (names may contain anything but `,`; the last `=`
/// separates the value).
pub fn parse_assignments(s: &str) -> Result<Vec<Assignment>, FormatError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (name, value) = t
                .rsplit_once('=')
                .ok_or_else(|| FormatError::Invalid(format!("expected NAME=VALUE, found `{t}`")))?;
            let value = value
                .trim()
                .parse()
                .map_err(|_| FormatError::Invalid(format!("bad value in `{t}`")))?;
            Ok(Assignment { var: name.trim().to_string(), value })
        })
        .collect()
}

pub fn parse_names(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}
