//! JSON system configurations.
//!
//! A config names the system kind, the exponent `p` and an explicit ratio
//! (or weight) presentation. Numbers may be JSON numbers or strings; strings
//! such as `"1/2"` or `"0.25"` are read as exact rationals, which lets tails
//! with geometric mean exactly 1 be decided without a tolerance.
//!
//! ```json
//! {
//!   "kind": "dissipative",
//!   "label": "two-sided decay",
//!   "p": 1,
//!   "mu0": 1,
//!   "ratio": { "core_lo": 0, "core": ["1/2"], "neg_period": [2], "pos_period": ["1/2"] },
//!   "cells": { "beta": [0.25, 0.75], "wobble": { "0": [2, "2/3"] }, "K": 2 }
//! }
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use compdyn::seqcore::{parse_rational, Entry, EventuallyPeriodicSequence};
use compdyn::systems::{
    check_bounded_distortion, AtomicSystem, Cells, Component, DissipativeSystem, MeasureSequence,
    WeightSequence,
};
use serde::de::{self, value::MapAccessDeserializer, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

/// A JSON number or a string holding an exact rational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    pub fn entry(&self) -> Result<Entry, String> {
        match self {
            Number::Float(x) => Ok(Entry::float(*x)),
            Number::Text(s) => parse_rational(s)
                .map(Entry::rational)
                .ok_or_else(|| format!("`{s}` is not a rational number")),
        }
    }

    pub fn value(&self) -> Result<f64, String> {
        self.entry().map(|e| e.value)
    }
}

fn entries(xs: &[Number]) -> Result<Vec<Entry>, String> {
    xs.iter().map(Number::entry).collect()
}

fn values(xs: &[Number]) -> Result<Vec<f64>, String> {
    xs.iter().map(Number::value).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPresentation {
    #[serde(default)]
    pub core_lo: i64,
    pub core: Vec<Number>,
    pub neg_period: Vec<Number>,
    pub pos_period: Vec<Number>,
}

/// A validated eventually periodic presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Presentation(pub EventuallyPeriodicSequence);

// Validating inside `visit_map` lets the parser attach the position of the
// offending object to the error.
impl<'de> Deserialize<'de> for Presentation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct PresentationVisitor;

        impl<'de> Visitor<'de> for PresentationVisitor {
            type Value = Presentation;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object with core_lo, core, neg_period and pos_period")
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Presentation, A::Error> {
                let raw = RawPresentation::deserialize(MapAccessDeserializer::new(map))?;
                Presentation::try_from(raw).map_err(de::Error::custom)
            }
        }

        d.deserialize_map(PresentationVisitor)
    }
}

impl TryFrom<RawPresentation> for Presentation {
    type Error = String;

    fn try_from(raw: RawPresentation) -> Result<Self, String> {
        EventuallyPeriodicSequence::from_entries(
            raw.core_lo,
            &entries(&raw.core)?,
            &entries(&raw.neg_period)?,
            &entries(&raw.pos_period)?,
        )
        .map(Presentation)
        .map_err(|e| e.to_string())
    }
}

impl From<&EventuallyPeriodicSequence> for RawPresentation {
    fn from(seq: &EventuallyPeriodicSequence) -> Self {
        let nums = |xs: &[f64]| xs.iter().map(|x| Number::Float(*x)).collect();
        Self {
            core_lo: seq.core_lo(),
            core: nums(seq.core()),
            neg_period: nums(seq.neg_period()),
            pos_period: nums(seq.pos_period()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCells {
    beta: Vec<Number>,
    #[serde(default)]
    wobble: BTreeMap<i64, Vec<Number>>,
    #[serde(rename = "K")]
    k: Number,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    #[serde(default = "one")]
    mu0: Number,
    ratio: Presentation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawComponent {
    Cycle(Vec<Number>),
    Line(RawLine),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Dissipative,
    Atomic,
    Shift,
}

fn one() -> Number {
    Number::Float(1.0)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Kind,
    #[serde(default)]
    label: String,
    p: Number,
    #[serde(default = "one")]
    mu0: Number,
    ratio: Option<Presentation>,
    weights: Option<Presentation>,
    cells: Option<RawCells>,
    components: Option<Vec<RawComponent>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Dissipative(DissipativeSystem),
    Atomic(AtomicSystem),
    Shift { weights: WeightSequence, p: f64 },
}

impl System {
    pub fn kind(&self) -> Kind {
        match self {
            System::Dissipative(_) => Kind::Dissipative,
            System::Atomic(_) => Kind::Atomic,
            System::Shift { .. } => Kind::Shift,
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            System::Dissipative(s) => s.p(),
            System::Atomic(s) => s.p(),
            System::Shift { p, .. } => *p,
        }
    }
}

/// A parsed and validated configuration.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct SystemConfig {
    pub label: String,
    pub system: System,
}

fn unused(kind: Kind, field: &str, present: bool) -> Result<(), String> {
    if present {
        Err(format!("field `{field}` does not apply to kind {kind:?}"))
    } else {
        Ok(())
    }
}

fn required<T>(field: &str, kind: Kind, x: Option<T>) -> Result<T, String> {
    x.ok_or_else(|| format!("kind {kind:?} requires field `{field}`"))
}

impl TryFrom<RawConfig> for SystemConfig {
    type Error = String;

    fn try_from(raw: RawConfig) -> Result<Self, String> {
        let kind = raw.kind;
        let p = raw.p.value()?;
        let system = match kind {
            Kind::Dissipative => {
                unused(kind, "weights", raw.weights.is_some())?;
                unused(kind, "components", raw.components.is_some())?;
                let ratio = required("ratio", kind, raw.ratio)?;
                let measures =
                    MeasureSequence::new(raw.mu0.value()?, ratio.0).map_err(|e| e.to_string())?;
                let sys = match raw.cells {
                    None => DissipativeSystem::new(p, measures),
                    Some(c) => {
                        let wobble = c
                            .wobble
                            .iter()
                            .map(|(k, row)| Ok((*k, values(row)?)))
                            .collect::<Result<BTreeMap<_, _>, String>>()?;
                        let cells =
                            Cells::new(values(&c.beta)?, wobble).map_err(|e| e.to_string())?;
                        DissipativeSystem::with_cells(p, measures, cells, c.k.value()?)
                    }
                }
                .map_err(|e| e.to_string())?;
                let d = check_bounded_distortion(&sys);
                if !d.ok {
                    return Err(format!(
                        "(◊) fails: least distortion constant {} exceeds declared K = {}",
                        d.k_min,
                        sys.declared_k()
                    ));
                }
                System::Dissipative(sys)
            }
            Kind::Shift => {
                unused(kind, "ratio", raw.ratio.is_some())?;
                unused(kind, "cells", raw.cells.is_some())?;
                unused(kind, "components", raw.components.is_some())?;
                let weights = WeightSequence::new(required("weights", kind, raw.weights)?.0);
                weights.dissipative_model(p).map_err(|e| e.to_string())?;
                System::Shift { weights, p }
            }
            Kind::Atomic => {
                unused(kind, "ratio", raw.ratio.is_some())?;
                unused(kind, "weights", raw.weights.is_some())?;
                unused(kind, "cells", raw.cells.is_some())?;
                let components = required("components", kind, raw.components)?
                    .into_iter()
                    .map(|c| match c {
                        RawComponent::Cycle(atoms) => Ok(Component::Cycle(values(&atoms)?)),
                        RawComponent::Line(l) => MeasureSequence::new(l.mu0.value()?, l.ratio.0)
                            .map(Component::Line)
                            .map_err(|e| e.to_string()),
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                System::Atomic(AtomicSystem::new(p, components).map_err(|e| e.to_string())?)
            }
        };
        Ok(Self {
            label: raw.label,
            system,
        })
    }
}

/// Config of a weighted shift, as emitted by `reduce`.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftConfig {
    pub kind: Kind,
    pub label: String,
    pub p: f64,
    pub weights: RawPresentation,
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Dissipative => "dissipative",
            Kind::Atomic => "atomic",
            Kind::Shift => "shift",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SystemConfig, String> {
        SystemConfig::parse(text).map_err(|e| e.to_string())
    }

    #[test]
    fn dissipative_with_exact_tails() {
        let c = parse(
            r#"{"kind": "dissipative", "p": 2, "label": "decay",
                "ratio": {"core": ["1/2"], "neg_period": [2], "pos_period": ["1/2"]}}"#,
        )
        .unwrap();
        assert_eq!(c.label, "decay");
        let System::Dissipative(sys) = c.system else {
            panic!("wrong kind")
        };
        assert_eq!(sys.p(), 2.0);
        assert!((sys.measures().mu(-3) - 0.125).abs() < 1e-15);
        assert!(sys
            .measures()
            .ratio()
            .exact_tail(compdyn::seqcore::Side::Positive)
            .is_some());
    }

    #[test]
    fn beta_sum_is_named() {
        let err = parse(
            r#"{"kind": "dissipative", "p": 1, "mu0": 1,
                "ratio": {"core": [1], "neg_period": [1], "pos_period": [1]},
                "cells": {"beta": [0.5, 0.25], "K": 1}}"#,
        )
        .unwrap_err();
        assert!(err.contains("sum of beta"), "{err}");
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse(
            "{\"kind\": \"shift\", \"p\": 1,\n \"weights\": {\"core\": [1], \"neg_period\": [], \"pos_period\": [2]}\n}",
        )
        .unwrap_err();
        assert!(err.contains("neg_period must be nonempty"), "{err}");
        assert!(err.contains("line 2"), "{err}");
        let err = parse(r#"{"kind": "shift", "p": 1, "wieghts": {}}"#).unwrap_err();
        assert!(err.contains("unknown field `wieghts`"), "{err}");
    }

    #[test]
    fn kind_specific_fields() {
        let err = parse(r#"{"kind": "shift", "p": 1}"#).unwrap_err();
        assert!(err.contains("requires field `weights`"), "{err}");
        let err = parse(
            r#"{"kind": "atomic", "p": 1, "components": [{"cycle": [1]}],
                "ratio": {"core": [1], "neg_period": [1], "pos_period": [1]}}"#,
        )
        .unwrap_err();
        assert!(err.contains("does not apply"), "{err}");
    }

    #[test]
    fn atomic_components() {
        let c = parse(
            r#"{"kind": "atomic", "p": 1, "components": [
                {"cycle": [1, 2, 3]},
                {"line": {"ratio": {"core": [2], "neg_period": [2], "pos_period": [2]}}}]}"#,
        )
        .unwrap();
        let System::Atomic(sys) = c.system else {
            panic!("wrong kind")
        };
        assert_eq!(sys.components().len(), 2);
        assert!(sys.has_cycle());
    }

    #[test]
    fn declared_distortion_is_enforced() {
        let err = parse(
            r#"{"kind": "dissipative", "p": 1,
                "ratio": {"core": [1], "neg_period": [1], "pos_period": [1]},
                "cells": {"beta": [0.25, 0.75], "wobble": {"0": [2, "2/3"]}, "K": 1.5}}"#,
        )
        .unwrap_err();
        assert!(err.contains("(◊) fails"), "{err}");
    }

    #[test]
    fn bad_rational_text() {
        let err = parse(
            r#"{"kind": "shift", "p": 1,
                "weights": {"core": ["1/0"], "neg_period": [1], "pos_period": [1]}}"#,
        )
        .unwrap_err();
        assert!(err.contains("`1/0` is not a rational"), "{err}");
    }
}
