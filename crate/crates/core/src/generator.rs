//! Inner tube volumes of generators: piecewise polynomials in `eps` that
//! saturate at the generator volume beyond the inradius.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::validation::{ValidationReport, Violation};

/// Radius around the integer Mellin poles inside which evaluation is refused.
pub const POLE_RADIUS: f64 = 1e-9;

const MONOTONE_SAMPLES: usize = 10_000;

/// Polynomial piece `sum_i kappa_i eps^(n-i)` valid up to `breakpoint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub breakpoint: f64,
    /// `kappa_0 ..= kappa_n`.
    pub coefficients: Vec<f64>,
}

impl Piece {
    fn eval(&self, eps: f64) -> f64 {
        let n = self.coefficients.len() - 1;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, k)| k * eps.powi((n - i) as i32))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorProfile {
    pub space_dimension: usize,
    pub pieces: Vec<Piece>,
    pub volume: f64,
}

impl GeneratorProfile {
    /// Single-piece profile `sum_{i<n} kappa_i eps^(n-i)` up to `inradius`.
    pub fn monophase(coefficients: &[f64], inradius: f64, volume: f64) -> Self {
        let mut coefficients = coefficients.to_vec();
        let space_dimension = coefficients.len();
        coefficients.push(0.0);
        Self {
            space_dimension,
            pieces: vec![Piece { breakpoint: inradius, coefficients }],
            volume,
        }
    }

    pub fn pluriphase(space_dimension: usize, pieces: Vec<Piece>, volume: f64) -> Self {
        Self { space_dimension, pieces, volume }
    }

    pub fn is_monophase(&self) -> bool {
        self.pieces.len() == 1
    }

    pub fn inradius(&self) -> f64 {
        self.pieces.last().map_or(0.0, |p| p.breakpoint)
    }

    pub fn first_breakpoint(&self) -> f64 {
        self.pieces.first().map_or(0.0, |p| p.breakpoint)
    }

    pub fn tube_volume(&self, eps: f64) -> f64 {
        if eps <= 0.0 {
            return 0.0;
        }
        self.pieces
            .iter()
            .find(|p| eps <= p.breakpoint)
            .map_or(self.volume, |p| p.eval(eps))
    }

    /// Coefficient `kappa_i` of piece `m`, with the saturated sentinel piece
    /// at `m == pieces.len()`.
    fn kappa(&self, m: usize, i: usize) -> f64 {
        match self.pieces.get(m) {
            Some(p) => p.coefficients[i],
            None if i == self.space_dimension => self.volume,
            None => 0.0,
        }
    }

    /// Closed-form Mellin transform of `V(eps) / eps^n`, continued
    /// meromorphically with simple poles at `0, 1, ..., n`.
    pub fn mellin_transform(&self, s: Complex64) -> Result<Complex64> {
        let n = self.space_dimension;
        for i in 0..=n {
            if (s - i as f64).norm() < POLE_RADIUS {
                return Err(Error::PoleProximity { s, pole: i as i64, radius: POLE_RADIUS });
            }
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (m, piece) in self.pieces.iter().enumerate() {
            let log_g = piece.breakpoint.ln();
            for i in 0..=n {
                let jump = self.kappa(m, i) - self.kappa(m + 1, i);
                if jump != 0.0 {
                    let shifted = s - i as f64;
                    total += jump * (shifted * log_g).exp() / shifted;
                }
            }
        }
        Ok(total)
    }

    /// Residue of the Mellin transform at the integer pole `i`.
    pub fn mellin_integer_residue(&self, i: usize) -> f64 {
        assert!(i <= self.space_dimension, "pole {i} outside 0..=n");
        (0..self.pieces.len())
            .map(|m| self.kappa(m, i) - self.kappa(m + 1, i))
            .sum()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.space_dimension;
        if n == 0 {
            report.push(Violation::ZeroSpaceDimension);
        }
        if self.pieces.is_empty() {
            report.push(Violation::NoPieces);
            return report;
        }
        if !(self.volume > 0.0) {
            report.push(Violation::NonPositiveVolume { volume: self.volume });
        }
        let mut shape_ok = true;
        let mut previous = 0.0;
        for (m, p) in self.pieces.iter().enumerate() {
            if p.coefficients.len() != n + 1 {
                report.push(Violation::CoefficientCount {
                    piece: m,
                    expected: n + 1,
                    found: p.coefficients.len(),
                });
                shape_ok = false;
            }
            if !(p.breakpoint > previous) || !p.breakpoint.is_finite() {
                report.push(Violation::BreakpointOrder { piece: m, breakpoint: p.breakpoint });
                shape_ok = false;
            }
            previous = p.breakpoint;
        }
        if !shape_ok {
            return report;
        }
        let scale = self.volume.abs().max(1.0);
        let first_n = self.pieces[0].coefficients[n];
        if first_n.abs() > 1e-12 * scale {
            report.push(Violation::ZeroLimitViolation { value: first_n });
        }
        for w in self.pieces.windows(2) {
            let g = w[0].breakpoint;
            let (left, right) = (w[0].eval(g), w[1].eval(g));
            if (left - right).abs() > 1e-9 * scale {
                report.push(Violation::ContinuityViolation { breakpoint: g, left, right });
            }
        }
        let last = self.pieces.last().expect("non-empty");
        let at_g = last.eval(last.breakpoint);
        if (at_g - self.volume).abs() > 1e-9 * scale {
            report.push(Violation::ContinuityViolation {
                breakpoint: last.breakpoint,
                left: at_g,
                right: self.volume,
            });
        }
        let g = self.inradius();
        let mut prev = 0.0;
        for k in 1..=MONOTONE_SAMPLES {
            let eps = g * k as f64 / MONOTONE_SAMPLES as f64;
            let v = self.tube_volume(eps);
            if v < prev - 1e-12 * scale {
                report.push(Violation::NotMonotone { eps });
                break;
            }
            prev = v;
        }
        report
    }
}
