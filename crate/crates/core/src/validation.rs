use std::fmt;

use serde::Serialize;

/// A single problem found while validating a graph or a generator profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RatioOutOfRange { edge: usize, ratio: f64 },
    NoOutgoingEdges { vertex: String },
    NotStronglyConnected { unreachable_from: String, to: String },
    EmptyGraph,
    ZeroSpaceDimension,
    DanglingEndpoint { edge: usize, vertex: String },
    BadRatio { edge: usize, text: String },
    DuplicateVertex { vertex: String },
    UnknownGenerator { vertex: String },
    CoefficientCount { piece: usize, expected: usize, found: usize },
    BreakpointOrder { piece: usize, breakpoint: f64 },
    ContinuityViolation { breakpoint: f64, left: f64, right: f64 },
    ZeroLimitViolation { value: f64 },
    NonPositiveVolume { volume: f64 },
    NotMonotone { eps: f64 },
    NoPieces,
    MissingGenerator { vertex: String },
    DimensionMismatch { vertex: String, expected: usize, found: usize },
    /// A profile violation, tagged with the vertex owning the profile.
    Generator { vertex: String, violation: Box<Violation> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RatioOutOfRange { edge, ratio } => {
                write!(f, "edge #{edge}: ratio {ratio} not in (0, 1)")
            }
            Violation::NoOutgoingEdges { vertex } => {
                write!(f, "vertex `{vertex}` has no outgoing edges")
            }
            Violation::NotStronglyConnected { unreachable_from, to } => {
                write!(f, "not strongly connected: no path from `{unreachable_from}` to `{to}`")
            }
            Violation::EmptyGraph => write!(f, "graph has no vertices"),
            Violation::ZeroSpaceDimension => write!(f, "space dimension must be >= 1"),
            Violation::DanglingEndpoint { edge, vertex } => {
                write!(f, "edge #{edge} references unknown vertex `{vertex}`")
            }
            Violation::BadRatio { edge, text } => {
                write!(f, "edge #{edge}: cannot parse ratio `{text}`")
            }
            Violation::DuplicateVertex { vertex } => write!(f, "vertex `{vertex}` listed twice"),
            Violation::UnknownGenerator { vertex } => {
                write!(f, "generator given for unknown vertex `{vertex}`")
            }
            Violation::Generator { vertex, violation } => {
                write!(f, "generator of `{vertex}`: {violation}")
            }
            Violation::CoefficientCount { piece, expected, found } => write!(
                f,
                "piece #{piece}: expected {expected} coefficients, found {found}"
            ),
            Violation::BreakpointOrder { piece, breakpoint } => write!(
                f,
                "piece #{piece}: breakpoint {breakpoint} is not positive and strictly increasing"
            ),
            Violation::ContinuityViolation { breakpoint, left, right } => write!(
                f,
                "discontinuity at {breakpoint}: left value {left}, right value {right}"
            ),
            Violation::ZeroLimitViolation { value } => {
                write!(f, "V(0) = {value}, must vanish (kappa_n of the first piece must be 0)")
            }
            Violation::NonPositiveVolume { volume } => {
                write!(f, "generator volume {volume} must be positive")
            }
            Violation::NotMonotone { eps } => write!(f, "tube volume decreases near eps = {eps}"),
            Violation::NoPieces => write!(f, "profile has no pieces"),
            Violation::MissingGenerator { vertex } => {
                write!(f, "vertex `{vertex}` has no generator profile")
            }
            Violation::DimensionMismatch { vertex, expected, found } => write!(
                f,
                "generator of `{vertex}` has space dimension {found}, graph has {expected}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, violation: Violation) {
        self.violations.push(violation);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "- {v}")?;
        }
        Ok(())
    }
}
