//! Geometric zeta functions and the residue tube formula
//!
//! `V(eps) = sum_u sum_{omega in dims + {0..n-1}} res(zeta_u(s) eps^(n-s); omega)`
//!
//! with `zeta_u(s) = sum_v adj(I - A(s))_uv / det(I - A(s)) * M_v(s)` and
//! `M_v` the Mellin transform of `V_{G_v}(eps) / eps^n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::dimensions::{find_complex_dimensions, ComplexDimensionSet, SearchOptions, Zero};
use crate::error::{Error, Result};
use crate::exppoly::{det_and_adjugate, identity_minus_matrix, ExpMatrix, ExpPolynomial};
use crate::generator::GeneratorProfile;
use crate::graph::MwGraph;
use crate::quad::ComplexKahanSum;
use crate::spectral::sim_value;
use crate::validation::{ValidationReport, Violation};

pub const DEFAULT_HEIGHT: f64 = 200.0;
/// Complex dimensions closer than this to an integer pole are refused.
pub const COLLISION_RADIUS: f64 = 1e-6;
const DEGENERATE_DET: f64 = 1e-9;
const NEAR_ZERO_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ZetaSystem {
    graph: MwGraph,
    profiles: Vec<GeneratorProfile>,
    det: ExpPolynomial,
    det_prime: ExpPolynomial,
    adj: ExpMatrix,
    dim: f64,
}

/// Checks a graph together with one generator per vertex.
pub fn validate_model(graph: &MwGraph, profiles: &[GeneratorProfile]) -> ValidationReport {
    let mut report = graph.validate();
    for (k, name) in graph.vertices().iter().enumerate() {
        let Some(p) = profiles.get(k) else {
            report.push(Violation::MissingGenerator { vertex: name.clone() });
            continue;
        };
        if p.space_dimension != graph.space_dimension() {
            report.push(Violation::DimensionMismatch {
                vertex: name.clone(),
                expected: graph.space_dimension(),
                found: p.space_dimension,
            });
            continue;
        }
        for violation in p.validate().violations {
            report.push(Violation::Generator { vertex: name.clone(), violation: Box::new(violation) });
        }
    }
    report
}

impl ZetaSystem {
    pub fn new(graph: &MwGraph, profiles: &[GeneratorProfile]) -> Result<Self> {
        let report = validate_model(graph, profiles);
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report.to_string()));
        }
        let n = graph.space_dimension();
        let dim = sim_value(graph, 1e-13)?.dim;
        if !(dim > n as f64 - 1.0 && dim < n as f64) {
            return Err(Error::SimValueOutOfRange { dim, space_dimension: n });
        }
        let (det, adj) = det_and_adjugate(&identity_minus_matrix(graph))?;
        Ok(Self {
            graph: graph.clone(),
            profiles: profiles.to_vec(),
            det_prime: det.derivative(),
            det,
            adj,
            dim,
        })
    }

    pub fn graph(&self) -> &MwGraph {
        &self.graph
    }

    pub fn profiles(&self) -> &[GeneratorProfile] {
        &self.profiles
    }

    pub fn det(&self) -> &ExpPolynomial {
        &self.det
    }

    pub fn det_prime(&self) -> &ExpPolynomial {
        &self.det_prime
    }

    pub fn adjugate(&self) -> &ExpMatrix {
        &self.adj
    }

    pub fn sim_value(&self) -> f64 {
        self.dim
    }

    pub fn space_dimension(&self) -> usize {
        self.graph.space_dimension()
    }

    /// Abscissa `(D + n) / 2` of the inversion contour.
    pub fn contour_abscissa(&self) -> f64 {
        0.5 * (self.dim + self.space_dimension() as f64)
    }

    pub fn dimensions(&self, opts: &SearchOptions) -> Result<ComplexDimensionSet> {
        find_complex_dimensions(&self.det, opts)
    }

    fn mellin_all(&self, s: Complex64) -> Result<Vec<Complex64>> {
        self.profiles.iter().map(|p| p.mellin_transform(s)).collect()
    }

    /// `zeta_u(s)`.
    pub fn zeta_at(&self, u: usize, s: Complex64) -> Result<Complex64> {
        let mellin = self.mellin_all(s)?;
        let d = self.det.evaluate(s);
        let dp = self.det_prime.evaluate(s);
        if d.norm() <= NEAR_ZERO_DISTANCE * dp.norm() {
            return Err(Error::NearDimension(s));
        }
        let row = &self.adj[u];
        Ok(row
            .iter()
            .zip(&mellin)
            .map(|(a, m)| a.evaluate(s) * m)
            .sum::<Complex64>()
            / d)
    }

    /// `eps`-free factor `sum_v adj_uv(omega) M_v(omega) / det'(omega)` of the residue.
    fn dimension_factor(&self, u: usize, zero: &Zero) -> Result<Complex64> {
        let omega = zero.location;
        if zero.multiplicity > 1 {
            return Err(Error::HigherOrderPole { omega, multiplicity: zero.multiplicity });
        }
        for i in 0..=self.space_dimension() {
            if (omega - i as f64).norm() < COLLISION_RADIUS {
                return Err(Error::PoleCollision { omega, pole: i as i64 });
            }
        }
        let mellin = self.mellin_all(omega)?;
        let dp = self.det_prime.evaluate(omega);
        Ok(self.adj[u]
            .iter()
            .zip(&mellin)
            .map(|(a, m)| a.evaluate(omega) * m)
            .sum::<Complex64>()
            / dp)
    }

    /// `res(zeta_u(s) eps^(n-s); omega)` at a simple zero of the determinant.
    pub fn residue_at_dimension(&self, u: usize, zero: &Zero, eps: f64) -> Result<Complex64> {
        let n = self.space_dimension() as f64;
        Ok(self.dimension_factor(u, zero)? * ((n - zero.location) * eps.ln()).exp())
    }

    /// `[(I - A(i))^{-1} r_i]_u` with `r_i` the Mellin residues at `i`.
    fn integer_factor(&self, u: usize, i: usize) -> Result<f64> {
        let k = self.graph.vertex_count();
        let m = DMatrix::<f64>::identity(k, k) - self.graph.matrix_at_real(i as f64);
        let lu = m.clone().lu();
        let det = lu.determinant();
        if det.abs() < DEGENERATE_DET {
            return Err(Error::DegeneratePole { pole: i as i64, det });
        }
        let inv = lu.try_inverse().ok_or(Error::Singular)?;
        Ok((0..k)
            .map(|v| inv[(u, v)] * self.profiles[v].mellin_integer_residue(i))
            .sum())
    }

    /// `res(zeta_u(s) eps^(n-s); i)` for `i in 0..n`.
    pub fn residue_at_integer(&self, u: usize, i: usize, eps: f64) -> Result<f64> {
        if i >= self.space_dimension() {
            return Err(Error::InvalidArgument(format!(
                "integer pole {i} outside 0..{}",
                self.space_dimension()
            )));
        }
        Ok(self.integer_factor(u, i)? * eps.powi((self.space_dimension() - i) as i32))
    }

    /// Sufficient upper bound on `eps` for pointwise validity:
    /// `r_min^(N-1) * min_u g_{1,u}`.
    pub fn validity_bound(&self) -> f64 {
        let n_vertices = self.graph.vertex_count() as i32;
        let g = self
            .profiles
            .iter()
            .map(|p| p.first_breakpoint())
            .fold(f64::INFINITY, f64::min);
        self.graph.min_ratio().powi(n_vertices - 1) * g
    }

    /// Precomputes the `eps`-independent residue factors up to height `height`.
    pub fn pole_table(&self, dims: &ComplexDimensionSet, height: f64) -> Result<PoleTable> {
        if dims.strip.height + 1e-12 < height {
            return Err(Error::InvalidArgument(format!(
                "dimensions computed to height {}, formula needs {height}",
                dims.strip.height
            )));
        }
        let k = self.graph.vertex_count();
        let n = self.space_dimension();
        let mut poles = Vec::new();
        for i in 0..n {
            let factors = (0..k)
                .map(|u| self.integer_factor(u, i).map(|f| Complex64::new(f, 0.0)))
                .collect::<Result<Vec<_>>>()?;
            poles.push(TablePole { location: Complex64::new(i as f64, 0.0), kind: PoleKind::Integer, factors });
        }
        let mut zeros: Vec<&Zero> = dims
            .zeros
            .iter()
            .filter(|z| z.location.im.abs() <= height)
            .collect();
        zeros.sort_by(|a, b| {
            a.location
                .im
                .abs()
                .total_cmp(&b.location.im.abs())
                .then(a.location.im.total_cmp(&b.location.im))
                .then(a.location.re.total_cmp(&b.location.re))
        });
        for z in zeros {
            let factors = (0..k)
                .map(|u| self.dimension_factor(u, z))
                .collect::<Result<Vec<_>>>()?;
            poles.push(TablePole { location: z.location, kind: PoleKind::Dimension, factors });
        }
        Ok(PoleTable {
            space_dimension: n,
            height,
            bound: self.validity_bound(),
            poles,
        })
    }

    pub fn tube_volume_formula(
        &self,
        dims: &ComplexDimensionSet,
        eps: f64,
        height: f64,
    ) -> Result<TubeFormulaResult> {
        self.pole_table(dims, height)?.evaluate(eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleKind {
    Integer,
    Dimension,
}

#[derive(Debug, Clone)]
struct TablePole {
    location: Complex64,
    kind: PoleKind,
    factors: Vec<Complex64>,
}

/// Residue factors for every pole, ordered by increasing `|Im|`.
#[derive(Debug, Clone)]
pub struct PoleTable {
    space_dimension: usize,
    height: f64,
    bound: f64,
    poles: Vec<TablePole>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub pole: Complex64,
    pub kind: PoleKind,
    pub per_vertex: Vec<Complex64>,
    pub combined: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeFormulaResult {
    pub eps: f64,
    pub value: f64,
    pub contributions: Vec<Contribution>,
    pub height: f64,
    pub within_validity_bound: bool,
    /// `|Im|` of the unpaired residue sum, dropped from `value`.
    pub discarded_imaginary: f64,
}

impl PoleTable {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn evaluate(&self, eps: f64) -> Result<TubeFormulaResult> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        let log_eps = eps.ln();
        let n = self.space_dimension as f64;
        let mut paired = ComplexKahanSum::default();
        let mut full = ComplexKahanSum::default();
        let mut contributions = Vec::with_capacity(self.poles.len());
        for pole in &self.poles {
            let scale = ((n - pole.location) * log_eps).exp();
            let per_vertex: Vec<Complex64> = pole.factors.iter().map(|f| f * scale).collect();
            let combined: Complex64 = per_vertex.iter().sum();
            full.add(combined);
            if pole.location.im > 0.0 {
                paired.add(Complex64::new(2.0 * combined.re, 0.0));
            } else if pole.location.im == 0.0 {
                paired.add(Complex64::new(combined.re, 0.0));
            }
            contributions.push(Contribution { pole: pole.location, kind: pole.kind, per_vertex, combined });
        }
        Ok(TubeFormulaResult {
            eps,
            value: paired.value().re,
            contributions,
            height: self.height,
            within_validity_bound: eps < self.bound,
            discarded_imaginary: full.value().im.abs(),
        })
    }
}
