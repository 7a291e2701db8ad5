//! Mauldin-Williams graphs: weighted directed multigraphs whose edges carry
//! contraction ratios in `(0, 1)`.
//!
//! Vertices are opaque names mapped to dense indices in insertion order; every
//! matrix produced here uses that order for rows and columns.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::validation::{ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MwGraph {
    vertices: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    space_dimension: usize,
}

impl MwGraph {
    /// Builds a graph from vertex names and `(from, to, ratio)` triples.
    ///
    /// Construction only resolves names; call [`MwGraph::validate`] to check
    /// the Mauldin-Williams conditions.
    pub fn new<S: AsRef<str>>(
        vertices: &[S],
        edges: &[(S, S, f64)],
        space_dimension: usize,
    ) -> Result<Self> {
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(vertices.len());
        for v in vertices {
            let name = v.as_ref().to_string();
            if index.insert(name.clone(), names.len()).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate vertex `{name}`")));
            }
            names.push(name);
        }
        let mut resolved = Vec::with_capacity(edges.len());
        for (from, to, ratio) in edges {
            let lookup = |s: &S| {
                index
                    .get(s.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownVertex(s.as_ref().to_string()))
            };
            resolved.push(Edge {
                from: lookup(from)?,
                to: lookup(to)?,
                ratio: *ratio,
            });
        }
        Ok(Self {
            vertices: names,
            index,
            edges: resolved,
            space_dimension,
        })
    }

    /// Like [`MwGraph::new`] but fails unless the validation report is clean.
    pub fn validated<S: AsRef<str>>(
        vertices: &[S],
        edges: &[(S, S, f64)],
        space_dimension: usize,
    ) -> Result<Self> {
        let g = Self::new(vertices, edges, space_dimension)?;
        let report = g.validate();
        if !report.is_valid() {
            return Err(Error::InvalidGraph(report.to_string()));
        }
        Ok(g)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn space_dimension(&self) -> usize {
        self.space_dimension
    }

    pub fn min_ratio(&self) -> f64 {
        self.edges.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min)
    }

    /// Edges leaving `u` (the set `E_u`).
    pub fn outgoing(&self, u: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.from == u)
    }

    /// Reports every violated Mauldin-Williams condition. Never fails.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.space_dimension == 0 {
            report.push(Violation::ZeroSpaceDimension);
        }
        if self.vertices.is_empty() {
            report.push(Violation::EmptyGraph);
            return report;
        }
        for (k, e) in self.edges.iter().enumerate() {
            if !(e.ratio > 0.0 && e.ratio < 1.0) {
                report.push(Violation::RatioOutOfRange { edge: k, ratio: e.ratio });
            }
        }
        for (u, name) in self.vertices.iter().enumerate() {
            if self.outgoing(u).next().is_none() {
                report.push(Violation::NoOutgoingEdges { vertex: name.clone() });
            }
        }
        // Forward and backward sweeps from vertex 0 decide strong connectivity.
        let forward = self.reachable(0, false);
        let backward = self.reachable(0, true);
        for (v, name) in self.vertices.iter().enumerate() {
            if !forward[v] {
                report.push(Violation::NotStronglyConnected {
                    unreachable_from: self.vertices[0].clone(),
                    to: name.clone(),
                });
            }
            if !backward[v] {
                report.push(Violation::NotStronglyConnected {
                    unreachable_from: name.clone(),
                    to: self.vertices[0].clone(),
                });
            }
        }
        report
    }

    fn reachable(&self, start: usize, reverse: bool) -> Vec<bool> {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            for e in &self.edges {
                let (a, b) = if reverse { (e.to, e.from) } else { (e.from, e.to) };
                if a == u && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen
    }

    /// `A(s)` with `a_uv(s) = sum over edges u -> v of r_e^s`.
    pub fn matrix_at(&self, s: Complex64) -> DMatrix<Complex64> {
        let n = self.vertices.len();
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for e in &self.edges {
            m[(e.from, e.to)] += (s * e.ratio.ln()).exp();
        }
        m
    }

    /// Real-argument specialisation of [`MwGraph::matrix_at`].
    pub fn matrix_at_real(&self, s: f64) -> DMatrix<f64> {
        let n = self.vertices.len();
        let mut m = DMatrix::zeros(n, n);
        for e in &self.edges {
            m[(e.from, e.to)] += e.ratio.powf(s);
        }
        m
    }

    /// Depth-first stream of all paths starting at `u` with ratio strictly
    /// above `min_ratio`, the empty path first.
    pub fn enumerate_paths(&self, u: usize, min_ratio: f64) -> Result<PathIter<'_>> {
        if !(min_ratio > 0.0) {
            return Err(Error::NonPositiveThreshold(min_ratio));
        }
        if u >= self.vertices.len() {
            return Err(Error::UnknownVertex(u.to_string()));
        }
        Ok(PathIter {
            graph: self,
            min_ratio,
            stack: vec![Path::empty(u)],
        })
    }
}

/// A finite walk in the graph together with its ratio and endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub start: usize,
    /// Indices into [`MwGraph::edges`].
    pub edges: Vec<usize>,
    pub ratio: f64,
    pub terminal: usize,
}

impl Path {
    pub fn empty(u: usize) -> Self {
        Self {
            start: u,
            edges: Vec::new(),
            ratio: 1.0,
            terminal: u,
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(&self, other: &Path) -> Option<Path> {
        if other.start != self.terminal {
            return None;
        }
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        Some(Path {
            start: self.start,
            edges,
            ratio: self.ratio * other.ratio,
            terminal: other.terminal,
        })
    }

    /// Checks that consecutive edges chain and the cached fields agree.
    pub fn is_consistent(&self, g: &MwGraph) -> bool {
        let mut at = self.start;
        let mut ratio = 1.0;
        for &k in &self.edges {
            let e = g.edges()[k];
            if e.from != at {
                return false;
            }
            at = e.to;
            ratio *= e.ratio;
        }
        at == self.terminal && (ratio - self.ratio).abs() <= 1e-15 * ratio.max(1e-300)
    }
}

pub struct PathIter<'g> {
    graph: &'g MwGraph,
    min_ratio: f64,
    stack: Vec<Path>,
}

impl Iterator for PathIter<'_> {
    type Item = Path;

    fn next(&mut self) -> Option<Path> {
        let path = self.stack.pop()?;
        // Push children in reverse so the first outgoing edge is visited first.
        let children: Vec<_> = self
            .graph
            .edges()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.from == path.terminal)
            .collect();
        for &(k, e) in children.iter().rev() {
            let ratio = path.ratio * e.ratio;
            if ratio > self.min_ratio {
                let mut edges = path.edges.clone();
                edges.push(k);
                self.stack.push(Path {
                    start: path.start,
                    edges,
                    ratio,
                    terminal: e.to,
                });
            }
        }
        Some(path)
    }
}
