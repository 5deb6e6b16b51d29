//! Model, bid and price files.
//!
//! Files are TOML unless the path ends in `.json`. A network model file:
//!
//! ```toml
//! market = "DAM"
//! slack = "L"
//! nodes = ["S", "C", "L"]
//!
//! [[lines]]
//! id = "SL"
//! from = "S"
//! to = "L"
//! reactance = 1.0
//! lower = -75.0
//! upper = 75.0          # numbers, or "inf" / "-inf" / "absent"
//!
//! [[contingencies]]     # optional; defaults to one base case "B"
//! id = "SC"
//! outaged = ["SC"]
//! enforced = true       # false leaves the whole block absent
//! overrides = [{ line = "SL", lower = -90.0, upper = 90.0 }]
//! ```
//!
//! Enforced blocks take each line's base limits unless overridden; rows of
//! outaged lines are always absent.
//!
//! Bid files hold `[[units]]` (`id`, `node`, `direction` = 1 or -1, `min`,
//! `max`, `price`) and/or `[[bids]]` (`id`, `source`, `sink`, `min`, `max`,
//! `price`). Price files hold `[[prices]]` entries (`contingency`, `line`,
//! `value`, optional integer `interval`).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clearing::{DamBidSet, DamUnit, FtrBid, FtrBidSet};
use crate::netmodel::{
    stack_model, Bound, Contingency, Limit, LimitVector, Line, Market, NetError, NetworkModel,
    Topology,
};
use crate::support::{PriceVector, SupportError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid limit literal `{0}` (use a number, \"inf\", \"-inf\" or \"absent\")")]
    BadLiteral(String),
    #[error("{0}")]
    Schema(String),
    #[error("model files disagree: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Support(#[from] SupportError),
}

/// A limit as written in a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LimitValue {
    Number(f64),
    Literal(String),
}

impl LimitValue {
    fn to_bound(&self, upper_side: bool) -> Result<Bound, IoError> {
        match self {
            LimitValue::Number(v) => Ok(Bound::Finite(*v)),
            LimitValue::Literal(s) => match (s.trim(), upper_side) {
                ("absent", _) | ("inf", true) | ("+inf", true) | ("-inf", false) => Ok(Bound::Absent),
                _ => Err(IoError::BadLiteral(s.clone())),
            },
        }
    }

    fn from_bound(b: Bound, upper_side: bool) -> Self {
        match b {
            Bound::Finite(v) => LimitValue::Number(v),
            Bound::Absent => LimitValue::Literal(if upper_side { "inf" } else { "-inf" }.into()),
        }
    }
}

fn absent_lower() -> LimitValue {
    LimitValue::Literal("-inf".into())
}

fn absent_upper() -> LimitValue {
    LimitValue::Literal("inf".into())
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub reactance: f64,
    #[serde(default = "absent_lower")]
    pub lower: LimitValue,
    #[serde(default = "absent_upper")]
    pub upper: LimitValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideSpec {
    pub line: String,
    #[serde(default = "absent_lower")]
    pub lower: LimitValue,
    #[serde(default = "absent_upper")]
    pub upper: LimitValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencySpec {
    pub id: String,
    #[serde(default)]
    pub outaged: Vec<String>,
    #[serde(default = "default_true")]
    pub enforced: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<OverrideSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default = "default_market")]
    pub market: String,
    pub slack: String,
    pub nodes: Vec<String>,
    pub lines: Vec<LineSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contingencies: Vec<ContingencySpec>,
}

fn default_market() -> String {
    "DAM".into()
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, IoError> {
    let err = |message: String| IoError::Parse {
        path: path.display().to_string(),
        message,
    };
    if is_json(path) {
        serde_json::from_str(text).map_err(|e| err(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| err(e.to_string()))
    }
}

fn read_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    parse(path, &read_text(path)?)
}

fn limit_of(lower: &LimitValue, upper: &LimitValue) -> Result<Limit, IoError> {
    Ok(Limit {
        lower: lower.to_bound(false)?,
        upper: upper.to_bound(true)?,
    })
}

impl ModelFile {
    pub fn topology(&self) -> Result<Topology, IoError> {
        let lines = self
            .lines
            .iter()
            .map(|l| Line::new(&l.id, &l.from, &l.to, l.reactance))
            .collect();
        Ok(Topology::new(self.nodes.clone(), lines, &self.slack)?)
    }

    fn contingency_specs(&self) -> Vec<ContingencySpec> {
        if self.contingencies.is_empty() {
            vec![ContingencySpec {
                id: "B".into(),
                outaged: Vec::new(),
                enforced: true,
                overrides: Vec::new(),
            }]
        } else {
            self.contingencies.clone()
        }
    }

    pub fn contingencies(&self) -> Vec<Contingency> {
        self.contingency_specs()
            .iter()
            .map(|c| Contingency {
                id: c.id.clone(),
                outaged: c.outaged.iter().cloned().collect(),
            })
            .collect()
    }

    pub fn to_model(&self) -> Result<NetworkModel, IoError> {
        let topology = self.topology()?;
        let specs = self.contingency_specs();
        let base: Vec<Limit> = self
            .lines
            .iter()
            .map(|l| limit_of(&l.lower, &l.upper))
            .collect::<Result<_, _>>()?;
        let mut entries = Vec::with_capacity(specs.len() * base.len());
        for spec in &specs {
            let mut block = if spec.enforced {
                base.clone()
            } else {
                vec![Limit::ABSENT; base.len()]
            };
            for o in &spec.overrides {
                if !spec.enforced {
                    return Err(IoError::Schema(format!(
                        "contingency `{}` overrides limits but is not enforced",
                        spec.id
                    )));
                }
                let k = topology
                    .line_index(&o.line)
                    .ok_or_else(|| NetError::UnknownLine(o.line.clone()))?;
                block[k] = limit_of(&o.lower, &o.upper)?;
            }
            entries.extend(block);
        }
        Ok(stack_model(
            &topology,
            &self.contingencies(),
            LimitVector::new(entries),
            Market::parse(&self.market),
        )?)
    }

    /// File representation of a model. Line limits come from the first
    /// block; other blocks record their differences as overrides.
    pub fn from_model(model: &NetworkModel) -> ModelFile {
        let topo = model.topology();
        let l = topo.num_lines();
        let entries = model.limits().entries();
        let base_enforced = !model.block_absent(0);
        let base: Vec<Limit> = (0..l)
            .map(|k| {
                let first = &model.contingencies()[0];
                if first.outaged.contains(&topo.lines()[k].id) {
                    // Outaged in the first block: take the first block that
                    // enforces the line, if any.
                    (1..model.contingencies().len())
                        .map(|c| entries[c * l + k])
                        .find(|lim| !lim.is_absent())
                        .unwrap_or(Limit::ABSENT)
                } else {
                    entries[k]
                }
            })
            .collect();
        let lines = topo
            .lines()
            .iter()
            .zip(&base)
            .map(|(line, lim)| LineSpec {
                id: line.id.clone(),
                from: line.from.clone(),
                to: line.to.clone(),
                reactance: line.reactance,
                lower: LimitValue::from_bound(lim.lower, false),
                upper: LimitValue::from_bound(lim.upper, true),
            })
            .collect();
        let contingencies = model
            .contingencies()
            .iter()
            .enumerate()
            .map(|(c, cont)| {
                let enforced = !model.block_absent(c) || (c == 0 && base_enforced);
                let overrides = if enforced {
                    (0..l)
                        .filter(|&k| !cont.outaged.contains(&topo.lines()[k].id))
                        .filter(|&k| entries[c * l + k] != base[k])
                        .map(|k| OverrideSpec {
                            line: topo.lines()[k].id.clone(),
                            lower: LimitValue::from_bound(entries[c * l + k].lower, false),
                            upper: LimitValue::from_bound(entries[c * l + k].upper, true),
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                ContingencySpec {
                    id: cont.id.clone(),
                    outaged: cont.outaged.iter().cloned().collect(),
                    enforced,
                    overrides,
                }
            })
            .collect();
        ModelFile {
            market: model.market().label().to_string(),
            slack: topo.slack().to_string(),
            nodes: topo.nodes().to_vec(),
            lines,
            contingencies,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model files always serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files always serialize")
    }
}

pub fn read_model_file(path: &Path) -> Result<ModelFile, IoError> {
    read_file(path)
}

pub fn load_model(path: &Path) -> Result<NetworkModel, IoError> {
    read_model_file(path)?.to_model()
}

/// Serialized model text in the format implied by `path`.
pub fn model_text(model: &NetworkModel, path: &Path) -> String {
    let file = ModelFile::from_model(model);
    if is_json(path) {
        file.to_json()
    } else {
        file.to_toml()
    }
}

pub fn write_model(model: &NetworkModel, path: &Path) -> Result<(), IoError> {
    fs::write(path, model_text(model, path)).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a day-ahead and an FTR model and re-indexes both over one
/// universal contingency order: the day-ahead order followed by FTR-only
/// contingencies. Nodes, lines, reactances, slack and shared contingency
/// outages must agree.
pub fn load_pair(dam_path: &Path, ftr_path: &Path) -> Result<(NetworkModel, NetworkModel), IoError> {
    let dam = load_model(dam_path)?;
    let ftr = load_model(ftr_path)?;
    pair_models(dam, ftr)
}

pub fn pair_models(dam: NetworkModel, ftr: NetworkModel) -> Result<(NetworkModel, NetworkModel), IoError> {
    if dam.topology() != ftr.topology() {
        return Err(IoError::Incompatible(
            "nodes, lines, reactances or slack differ".into(),
        ));
    }
    let mut universal: Vec<Contingency> = dam.contingencies().to_vec();
    for c in ftr.contingencies() {
        match universal.iter().find(|u| u.id == c.id) {
            Some(u) if u.outaged != c.outaged => {
                return Err(IoError::Incompatible(format!(
                    "contingency `{}` has different outaged lines",
                    c.id
                )))
            }
            Some(_) => {}
            None => universal.push(c.clone()),
        }
    }
    Ok((dam.extend_to(&universal)?, ftr.extend_to(&universal)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSpec {
    pub id: String,
    pub node: String,
    #[serde(default = "one")]
    pub direction: f64,
    #[serde(default)]
    pub min: f64,
    pub max: f64,
    pub price: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtrBidSpec {
    pub id: String,
    pub source: String,
    pub sink: String,
    #[serde(default)]
    pub min: f64,
    pub max: f64,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BidFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub units: Vec<UnitSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bids: Vec<FtrBidSpec>,
}

impl BidFile {
    pub fn dam(&self) -> DamBidSet {
        DamBidSet {
            units: self
                .units
                .iter()
                .map(|u| DamUnit::new(&u.id, &u.node, u.direction, u.min, u.max, u.price))
                .collect(),
        }
    }

    pub fn ftr(&self) -> FtrBidSet {
        FtrBidSet {
            bids: self
                .bids
                .iter()
                .map(|b| FtrBid::new(&b.id, &b.source, &b.sink, b.min, b.max, b.price))
                .collect(),
        }
    }

    pub fn from_dam(bids: &DamBidSet) -> BidFile {
        BidFile {
            units: bids
                .units
                .iter()
                .map(|u| UnitSpec {
                    id: u.id.clone(),
                    node: u.node.clone(),
                    direction: u.direction,
                    min: u.min,
                    max: u.max,
                    price: u.price,
                })
                .collect(),
            bids: Vec::new(),
        }
    }
}

pub fn load_bids(path: &Path) -> Result<BidFile, IoError> {
    read_file(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceEntry {
    pub contingency: String,
    pub line: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceFile {
    #[serde(default)]
    pub prices: Vec<PriceEntry>,
}

impl PriceFile {
    /// Price vectors aligned to `model`, one per interval in increasing
    /// interval order. Entries without an interval form interval 0.
    pub fn vectors(&self, model: &NetworkModel) -> Result<Vec<PriceVector>, IoError> {
        let mut groups: BTreeMap<u32, Vec<(&str, &str, f64)>> = BTreeMap::new();
        for e in &self.prices {
            groups
                .entry(e.interval.unwrap_or(0))
                .or_default()
                .push((&e.contingency, &e.line, e.value));
        }
        if groups.is_empty() {
            return Ok(vec![PriceVector::zeros(model.rows())]);
        }
        groups
            .values()
            .map(|entries| PriceVector::from_entries(model, entries).map_err(IoError::from))
            .collect()
    }

    pub fn from_vector(model: &NetworkModel, y: &PriceVector, interval: Option<u32>) -> PriceFile {
        PriceFile {
            prices: y
                .support()
                .into_iter()
                .map(|(row, value)| {
                    let (c, l) = model.row_ids(row);
                    PriceEntry {
                        contingency: c.to_string(),
                        line: l.to_string(),
                        value,
                        interval,
                    }
                })
                .collect(),
        }
    }
}

pub fn load_prices(path: &Path) -> Result<PriceFile, IoError> {
    read_file(path)
}

/// Serializes any file structure in the format implied by `path`.
pub fn to_text<T: Serialize>(value: &T, path: &Path) -> Result<String, IoError> {
    if is_json(path) {
        serde_json::to_string_pretty(value).map_err(|e| IoError::Schema(e.to_string()))
    } else {
        toml::to_string(value).map_err(|e| IoError::Schema(e.to_string()))
    }
}
