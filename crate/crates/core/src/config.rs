//! JSON model files: graph, one generator profile per vertex, solver settings.
//!
//! ```json
//! {
//!   "space_dimension": 1,
//!   "vertices": ["c"],
//!   "edges": [{"from": "c", "to": "c", "ratio": "1/3"},
//!             {"from": "c", "to": "c", "ratio": "1/3"}],
//!   "generators": {"c": {"pieces": [{"breakpoint": 0.1666, "coefficients": [2, 0]}],
//!                        "volume": 0.3333}},
//!   "settings": {"height": 60}
//! }
//! ```

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dimensions::{MethodChoice, SearchOptions};
use crate::error::{Error, Result};
use crate::generator::{GeneratorProfile, Piece};
use crate::graph::MwGraph;
use crate::oracle::{OracleMode, TubeOracle, DEFAULT_PATH_CAP};
use crate::tube::{validate_model, ZetaSystem};
use crate::validation::{ValidationReport, Violation};

/// An edge ratio: a number, or a string holding a decimal or an exact `p/q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ratio {
    Number(f64),
    Text(String),
}

impl Ratio {
    pub fn value(&self) -> Option<f64> {
        match self {
            Ratio::Number(x) => Some(*x),
            Ratio::Text(t) => parse_ratio(t),
        }
    }
}

/// `"p/q"` is divided once, after both integers are parsed exactly.
fn parse_ratio(text: &str) -> Option<f64> {
    let text = text.trim();
    match text.split_once('/') {
        Some((p, q)) => {
            let p: u64 = p.trim().parse().ok()?;
            let q: u64 = q.trim().parse().ok()?;
            (q != 0).then(|| p as f64 / q as f64)
        }
        None => text.parse().ok(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub ratio: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub pieces: Vec<Piece>,
    pub volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// Grouped evaluation for lattice graphs, path walk otherwise.
    #[default]
    Auto,
    Paths,
    LatticeGrouped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub tol: f64,
    /// Truncation height `T`.
    pub height: f64,
    pub delta: f64,
    pub lattice_tol: f64,
    pub max_denominator: u64,
    pub path_cap: u64,
    /// Force the argument-principle zero finder even for lattice graphs.
    pub generic_zeros: bool,
    pub oracle: OracleChoice,
}

impl Default for Settings {
    fn default() -> Self {
        let opts = SearchOptions::default();
        Self {
            tol: opts.tol,
            height: opts.height,
            delta: opts.delta,
            lattice_tol: opts.lattice_tol,
            max_denominator: opts.max_denominator,
            path_cap: DEFAULT_PATH_CAP,
            generic_zeros: false,
            oracle: OracleChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SprayConfig {
    pub space_dimension: usize,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    pub generators: BTreeMap<String, GeneratorSpec>,
    #[serde(default)]
    pub settings: Settings,
}

/// A checked model ready for computation.
#[derive(Debug, Clone)]
pub struct Model {
    pub graph: MwGraph,
    pub profiles: Vec<GeneratorProfile>,
    pub settings: Settings,
}

impl SprayConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Every problem with the file, structural and mathematical.
    pub fn check(&self) -> ValidationReport {
        match self.assemble() {
            Ok((graph, profiles)) => validate_model(&graph, &profiles),
            Err(report) => report,
        }
    }

    pub fn build(&self) -> Result<Model> {
        let (graph, profiles) = self
            .assemble()
            .map_err(|r| Error::InvalidGraph(r.to_string()))?;
        let report = validate_model(&graph, &profiles);
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report.to_string()));
        }
        Ok(Model { graph, profiles, settings: self.settings.clone() })
    }

    /// Resolves names and ratios; fails with the structural violations only.
    fn assemble(&self) -> std::result::Result<(MwGraph, Vec<GeneratorProfile>), ValidationReport> {
        let mut report = ValidationReport::default();
        let mut seen = HashSet::new();
        for v in &self.vertices {
            if !seen.insert(v.as_str()) {
                report.push(Violation::DuplicateVertex { vertex: v.clone() });
            }
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (k, e) in self.edges.iter().enumerate() {
            for end in [&e.from, &e.to] {
                if !seen.contains(end.as_str()) {
                    report.push(Violation::DanglingEndpoint { edge: k, vertex: end.clone() });
                }
            }
            match e.ratio.value() {
                Some(r) => edges.push((e.from.as_str(), e.to.as_str(), r)),
                None => report.push(Violation::BadRatio {
                    edge: k,
                    text: match &e.ratio {
                        Ratio::Text(t) => t.clone(),
                        Ratio::Number(x) => x.to_string(),
                    },
                }),
            }
        }
        for name in self.generators.keys() {
            if !seen.contains(name.as_str()) {
                report.push(Violation::UnknownGenerator { vertex: name.clone() });
            }
        }
        let mut profiles = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            match self.generators.get(v) {
                Some(g) => profiles.push(GeneratorProfile::pluriphase(
                    self.space_dimension,
                    g.pieces.clone(),
                    g.volume,
                )),
                None => report.push(Violation::MissingGenerator { vertex: v.clone() }),
            }
        }
        if !report.is_valid() {
            return Err(report);
        }
        let names: Vec<&str> = self.vertices.iter().map(String::as_str).collect();
        let graph = MwGraph::new(&names, &edges, self.space_dimension)
            .map_err(|e| {
                // unreachable after the checks above, kept as a guard
                let mut r = ValidationReport::default();
                r.push(Violation::DanglingEndpoint { edge: 0, vertex: e.to_string() });
                r
            })?;
        Ok((graph, profiles))
    }
}

impl Model {
    pub fn search_options(&self) -> SearchOptions {
        let s = &self.settings;
        SearchOptions {
            height: s.height,
            tol: s.tol,
            delta: s.delta,
            lattice_tol: s.lattice_tol,
            max_denominator: s.max_denominator,
            method: if s.generic_zeros { MethodChoice::Generic } else { MethodChoice::Auto },
            ..SearchOptions::default()
        }
    }

    pub fn zeta_system(&self) -> Result<ZetaSystem> {
        ZetaSystem::new(&self.graph, &self.profiles)
    }

    pub fn oracle(&self) -> Result<TubeOracle> {
        let oracle = TubeOracle::new(&self.graph, &self.profiles)?.with_path_cap(self.settings.path_cap);
        let mode = match self.settings.oracle {
            OracleChoice::Paths => OracleMode::Paths,
            OracleChoice::LatticeGrouped => OracleMode::LatticeGrouped,
            OracleChoice::Auto if oracle.is_lattice() => OracleMode::LatticeGrouped,
            OracleChoice::Auto => OracleMode::Paths,
        };
        Ok(oracle.with_mode(mode))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANTOR: &str = r#"{
        "space_dimension": 1,
        "vertices": ["c"],
        "edges": [{"from": "c", "to": "c", "ratio": "1/3"},
                  {"from": "c", "to": "c", "ratio": "1/3"}],
        "generators": {"c": {"pieces": [{"breakpoint": 0.16666666666666666, "coefficients": [2, 0]}],
                             "volume": 0.3333333333333333}}
    }"#;

    #[test]
    fn ratio_forms() {
        assert_eq!(parse_ratio("1/3"), Some(1.0 / 3.0));
        assert_eq!(parse_ratio(" 3 / 4 "), Some(0.75));
        assert_eq!(parse_ratio("0.25"), Some(0.25));
        assert_eq!(parse_ratio("1/0"), None);
        assert_eq!(parse_ratio("a/b"), None);
    }

    #[test]
    fn cantor_config_builds() {
        let cfg = SprayConfig::from_json(CANTOR).unwrap();
        assert!(cfg.check().is_valid());
        let m = cfg.build().unwrap();
        assert_eq!(m.graph.edges()[0].ratio, 1.0 / 3.0);
        assert_eq!(m.settings, Settings::default());
        assert!(m.oracle().unwrap().is_lattice());
    }

    #[test]
    fn json_round_trip() {
        let cfg = SprayConfig::from_json(CANTOR).unwrap();
        assert_eq!(SprayConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn all_violations_reported() {
        let text = r#"{
            "space_dimension": 1,
            "vertices": ["a", "b"],
            "edges": [{"from": "a", "to": "z", "ratio": "x"}],
            "generators": {"q": {"pieces": [], "volume": 1}}
        }"#;
        let report = SprayConfig::from_json(text).unwrap().check();
        let kinds: Vec<_> = report.violations.iter().map(|v| format!("{v}")).collect();
        assert!(kinds.iter().any(|k| k.contains("unknown vertex `z`")), "{kinds:?}");
        assert!(kinds.iter().any(|k| k.contains("cannot parse ratio `x`")));
        assert!(kinds.iter().any(|k| k.contains("unknown vertex `q`")));
        assert!(kinds.iter().any(|k| k.contains("`a` has no generator")));
        assert!(kinds.iter().any(|k| k.contains("`b` has no generator")));
    }

    #[test]
    fn missing_outgoing_edge_named() {
        let text = r#"{
            "space_dimension": 1,
            "vertices": ["a", "b"],
            "edges": [{"from": "a", "to": "b", "ratio": 0.5}, {"from": "a", "to": "a", "ratio": 0.5}],
            "generators": {
                "a": {"pieces": [{"breakpoint": 0.5, "coefficients": [2, 0]}], "volume": 1},
                "b": {"pieces": [{"breakpoint": 0.5, "coefficients": [2, 0]}], "volume": 1}
            }
        }"#;
        let cfg = SprayConfig::from_json(text).unwrap();
        let report = cfg.check();
        assert!(report.violations.contains(&Violation::NoOutgoingEdges { vertex: "b".into() }));
        assert!(cfg.build().is_err());
    }

    #[test]
    fn generator_violations_tagged() {
        let text = CANTOR.replace("0.3333333333333333", "0.5");
        let report = SprayConfig::from_json(&text).unwrap().check();
        assert!(!report.is_valid());
        assert!(report
            .violations
            .iter()
            .all(|v| matches!(v, Violation::Generator { vertex, .. } if vertex == "c")));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = CANTOR.replacen("\"space_dimension\"", "\"colour\": 1, \"space_dimension\"", 1);
        assert!(SprayConfig::from_json(&text).is_err());
    }
}
