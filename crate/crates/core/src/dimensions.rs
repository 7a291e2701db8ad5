//! Complex dimensions: the zeros of `det(I - A(s))` in a vertical strip.
//!
//! Two independent finders are provided. The lattice finder maps the
//! determinant to an ordinary polynomial in `z = exp(-lambda s)` and reads the
//! zeros off its roots. The generic finder isolates zeros with the argument
//! principle on recursively split rectangles and polishes them with Newton.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exppoly::{lattice_structure, ExpPolynomial, Lattice, LatticeStructure};

/// Roots of the lattice polynomial closer than this are one multiple root.
pub const CLUSTER_RADIUS: f64 = 1e-7;
const MAX_PERTURBATIONS: usize = 8;
const MAX_LATTICE_DEGREE: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        Self { re_min, re_max, im_min, im_max }
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn grown(&self, by: f64) -> Self {
        Self::new(self.re_min - by, self.re_max + by, self.im_min - by, self.im_max + by)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Zero {
    pub location: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lattice,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeMeta {
    pub lambda: f64,
    pub period: f64,
    /// Real parts of the vertical zero families, ascending.
    pub base_real_parts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Strip {
    pub left: f64,
    pub right: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexDimensionSet {
    /// Sorted by imaginary part, then real part.
    pub zeros: Vec<Zero>,
    pub strip: Strip,
    pub method: Method,
    pub lattice: Option<LatticeMeta>,
}

impl ComplexDimensionSet {
    /// Cardinality counted with multiplicity.
    pub fn count(&self) -> usize {
        self.zeros.iter().map(|z| z.multiplicity).sum()
    }

    /// Real part of the rightmost zero.
    pub fn rightmost_real_part(&self) -> Option<f64> {
        self.zeros.iter().map(|z| z.location.re).reduce(f64::max)
    }

    /// Largest distance from a zero of one set to the nearest zero of the other.
    pub fn hausdorff_distance(&self, other: &ComplexDimensionSet) -> f64 {
        fn one_way(a: &[Zero], b: &[Zero]) -> f64 {
            a.iter()
                .map(|x| {
                    b.iter()
                        .map(|y| (x.location - y.location).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        }
        one_way(&self.zeros, &other.zeros).max(one_way(&other.zeros, &self.zeros))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Lattice finder when the bases are commensurable, generic otherwise.
    Auto,
    Generic,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Zeros with `|Im| <= height` are reported.
    pub height: f64,
    pub tol: f64,
    /// Dominance margin for the left edge of the strip.
    pub delta: f64,
    pub lattice_tol: f64,
    pub max_denominator: u64,
    pub method: MethodChoice,
    pub max_depth: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            height: 200.0,
            tol: 1e-9,
            delta: 1.0,
            lattice_tol: crate::exppoly::DEFAULT_LATTICE_TOL,
            max_denominator: crate::exppoly::DEFAULT_MAX_DENOMINATOR,
            method: MethodChoice::Auto,
            max_depth: 60,
        }
    }
}

/// A `c_l < 0` left of which the minimal-base term dominates the rest by
/// more than `delta`, so the determinant cannot vanish there.
pub fn left_abscissa(det: &ExpPolynomial, delta: f64) -> Result<f64> {
    let terms = det.terms();
    let min_term = match terms.last() {
        Some(t) if t.log_base < -crate::exppoly::BASE_MERGE_TOL && t.coeff != 0.0 => *t,
        _ => return Err(Error::DominanceUnavailable),
    };
    let others = &terms[..terms.len() - 1];
    for k in 1..=100_000 {
        let sigma = -(k as f64);
        // |c_min| b_min^sigma - sum |c_j| b_j^sigma, factored by b_min^sigma
        let factor = min_term.coeff.abs()
            - others
                .iter()
                .map(|t| t.coeff.abs() * (sigma * (t.log_base - min_term.log_base)).exp())
                .sum::<f64>();
        if factor > 0.0 && factor * (sigma * min_term.log_base).exp() > delta {
            return Ok(sigma);
        }
    }
    Err(Error::DominanceUnavailable)
}

/// Evaluates the dominance margin at real part `sigma`; positive means no zeros there.
pub fn dominance_margin(det: &ExpPolynomial, sigma: f64) -> f64 {
    let terms = det.terms();
    let Some((last, rest)) = terms.split_last() else {
        return 0.0;
    };
    last.coeff.abs() * (sigma * last.log_base).exp()
        - rest.iter().map(|t| t.coeff.abs() * (sigma * t.log_base).exp()).sum::<f64>()
}

/// A real part right of which the constant term dominates, with margin one half.
pub fn right_abscissa(det: &ExpPolynomial) -> Result<f64> {
    let c0 = det.constant_term();
    if c0 == 0.0 {
        return Err(Error::NoConstantTerm);
    }
    let mut sigma = 0.0;
    loop {
        let tail: f64 = det
            .terms()
            .iter()
            .filter(|t| t.log_base < -crate::exppoly::BASE_MERGE_TOL)
            .map(|t| t.coeff.abs() * (sigma * t.log_base).exp())
            .sum();
        if tail < 0.5 * c0.abs() {
            return Ok(sigma);
        }
        sigma += 0.25;
    }
}

/// Winding number of `det` around the boundary of `rect`.
pub fn count_zeros_in_rectangle(det: &ExpPolynomial, rect: &Rect) -> Result<usize> {
    count_with_perturbation(det, rect, 1e-9).map(|(n, _)| n)
}

fn count_with_perturbation(det: &ExpPolynomial, rect: &Rect, tol: f64) -> Result<(usize, Rect)> {
    let counter = Winding::new(det);
    for attempt in 0..MAX_PERTURBATIONS {
        let r = rect.grown(tol * 10.0 * attempt as f64);
        if let Some(n) = counter.count(&r) {
            return Ok((n, r));
        }
    }
    Err(Error::BoundaryZero(*rect))
}

struct Winding<'a> {
    det: &'a ExpPolynomial,
    /// Initial samples per unit length of boundary.
    density: f64,
}

impl<'a> Winding<'a> {
    fn new(det: &'a ExpPolynomial) -> Self {
        let fastest = det.terms().iter().map(|t| -t.log_base).fold(0.0, f64::max);
        Self { det, density: (4.0 * fastest).max(8.0) }
    }

    fn near_zero(&self, z: Complex64, value: Complex64) -> bool {
        let scale: f64 = self
            .det
            .terms()
            .iter()
            .map(|t| t.coeff.abs() * (z.re * t.log_base).exp())
            .sum();
        value.norm() <= 1e-12 * scale
    }

    /// `None` when the boundary passes (numerically) through a zero.
    fn count(&self, rect: &Rect) -> Option<usize> {
        let c = rect.corners();
        let mut total = 0.0;
        for k in 0..4 {
            total += self.edge(c[k], c[(k + 1) % 4])?;
        }
        let w = total / (2.0 * PI);
        let rounded = w.round();
        if (w - rounded).abs() > 0.1 || rounded < 0.0 {
            return None;
        }
        Some(rounded as usize)
    }

    fn edge(&self, a: Complex64, b: Complex64) -> Option<f64> {
        let steps = ((b - a).norm() * self.density).ceil().max(4.0) as usize;
        let mut total = 0.0;
        let mut prev_z = a;
        let mut prev_f = self.det.evaluate(a);
        if self.near_zero(a, prev_f) {
            return None;
        }
        for k in 1..=steps {
            let z = a + (b - a) * (k as f64 / steps as f64);
            let f = self.det.evaluate(z);
            if self.near_zero(z, f) {
                return None;
            }
            total += self.segment(prev_z, prev_f, z, f, 0)?;
            prev_z = z;
            prev_f = f;
        }
        Some(total)
    }

    /// Argument change along `[za, zb]`, bisecting until each step turns by less than pi/2.
    fn segment(&self, za: Complex64, fa: Complex64, zb: Complex64, fb: Complex64, depth: usize) -> Option<f64> {
        let step = (fb / fa).arg();
        if step.abs() < PI / 2.0 {
            return Some(step);
        }
        if depth > 50 {
            return None;
        }
        let zm = 0.5 * (za + zb);
        let fm = self.det.evaluate(zm);
        if self.near_zero(zm, fm) {
            return None;
        }
        Some(self.segment(za, fa, zm, fm, depth + 1)? + self.segment(zm, fm, zb, fb, depth + 1)?)
    }
}

pub fn find_complex_dimensions(det: &ExpPolynomial, opts: &SearchOptions) -> Result<ComplexDimensionSet> {
    if !(opts.height > 0.0) {
        return Err(Error::InvalidArgument(format!("height must be positive, got {}", opts.height)));
    }
    if opts.method == MethodChoice::Auto {
        if let Lattice::Lattice(structure) = lattice_structure(det, opts.lattice_tol, opts.max_denominator) {
            if structure.max_exponent() <= MAX_LATTICE_DEGREE {
                return lattice_dimensions(det, &structure, opts);
            }
        }
    }
    generic_dimensions(det, opts)
}

fn strip_for(det: &ExpPolynomial, opts: &SearchOptions) -> Result<Strip> {
    Ok(Strip {
        left: left_abscissa(det, opts.delta)?,
        right: right_abscissa(det)?,
        height: opts.height,
    })
}

/// Zeros via the roots of `sum_j c_j z^{k_j}` with `z = exp(-lambda s)`.
pub fn lattice_dimensions(
    det: &ExpPolynomial,
    structure: &LatticeStructure,
    opts: &SearchOptions,
) -> Result<ComplexDimensionSet> {
    let strip = strip_for(det, opts)?;
    let coeffs = structure.polynomial(det);
    let roots = polynomial_roots(&coeffs);
    let lambda = structure.lambda;
    let period = structure.period;
    let mut zeros = Vec::new();
    let mut base_real_parts = Vec::new();
    for (z, multiplicity) in roots {
        let sigma = -z.norm().ln() / lambda;
        let offset = -z.arg() / lambda;
        base_real_parts.push(sigma);
        let first = ((-opts.height - offset) / period).ceil() as i64;
        let last = ((opts.height - offset) / period).floor() as i64;
        for j in first..=last {
            let im = offset + j as f64 * period;
            zeros.push(Zero { location: Complex64::new(sigma, im), multiplicity });
        }
    }
    base_real_parts.sort_by(f64::total_cmp);
    base_real_parts.dedup_by(|a, b| (*a - *b).abs() <= opts.tol);
    Ok(ComplexDimensionSet {
        zeros: symmetrize(zeros, opts.tol),
        strip,
        method: Method::Lattice,
        lattice: Some(LatticeMeta { lambda, period, base_real_parts }),
    })
}

/// Nonzero roots of `sum_k coeffs[k] z^k` with multiplicities, via companion
/// matrix eigenvalues, Newton polishing and clustering.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<(Complex64, usize)> {
    let low = coeffs.iter().position(|&c| c != 0.0).unwrap_or(coeffs.len());
    let high = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
    if low >= high {
        return Vec::new();
    }
    let p = &coeffs[low..=high];
    let deg = p.len() - 1;
    let lead = p[deg];
    let companion = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -p[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let eig = companion.complex_eigenvalues();
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for &c in p.iter().rev() {
            d = d * z + v;
            v = v * z + c;
        }
        (v, d)
    };
    let mut raw: Vec<Complex64> = eig.iter().copied().collect();
    raw.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    let mut used = vec![false; raw.len()];
    for i in 0..raw.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![raw[i]];
        used[i] = true;
        for j in i + 1..raw.len() {
            if !used[j] && (raw[j] - raw[i]).norm() <= CLUSTER_RADIUS * raw[i].norm().max(1.0) {
                used[j] = true;
                members.push(raw[j]);
            }
        }
        let mut z = members.iter().sum::<Complex64>() / members.len() as f64;
        if members.len() == 1 {
            for _ in 0..20 {
                let (v, d) = eval(z);
                if d.norm() == 0.0 {
                    break;
                }
                let step = v / d;
                z -= step;
                if step.norm() <= 1e-16 * z.norm() {
                    break;
                }
            }
        }
        clusters.push((z, members.len()));
    }
    clusters
}

/// Argument-principle isolation over `[c_l, c_r] x [-height, height]`.
pub fn generic_dimensions(det: &ExpPolynomial, opts: &SearchOptions) -> Result<ComplexDimensionSet> {
    let strip = strip_for(det, opts)?;
    let derivative = det.derivative();
    let counter = Winding::new(det);
    let margin = 0.5_f64.min(opts.height);
    // odd number of bands keeps the real axis inside the middle band
    let h = opts.height + margin;
    let mut bands = ((2.0 * h) / 4.0).ceil() as usize;
    if bands.is_multiple_of(2) {
        bands += 1;
    }
    let band = 2.0 * h / bands as f64;
    let mut zeros = Vec::new();
    let mut finder = Isolator { det, derivative: &derivative, counter: &counter, opts, zeros: &mut zeros };
    for k in 0..bands {
        let lo = -h + k as f64 * band;
        let rect = Rect::new(strip.left, strip.right, lo, lo + band);
        let (count, rect) = finder.count(&rect)?;
        finder.isolate(rect, count, 0)?;
    }
    let zeros: Vec<Zero> = zeros
        .into_iter()
        .filter(|z| z.location.im.abs() <= opts.height)
        .collect();
    Ok(ComplexDimensionSet {
        zeros: symmetrize(zeros, opts.tol),
        strip,
        method: Method::Generic,
        lattice: None,
    })
}

struct Isolator<'a> {
    det: &'a ExpPolynomial,
    derivative: &'a ExpPolynomial,
    counter: &'a Winding<'a>,
    opts: &'a SearchOptions,
    zeros: &'a mut Vec<Zero>,
}

impl Isolator<'_> {
    fn count(&self, rect: &Rect) -> Result<(usize, Rect)> {
        for attempt in 0..MAX_PERTURBATIONS {
            let r = rect.grown(self.opts.tol * 10.0 * attempt as f64);
            if let Some(n) = self.counter.count(&r) {
                return Ok((n, r));
            }
        }
        Err(Error::BoundaryZero(*rect))
    }

    fn isolate(&mut self, rect: Rect, count: usize, depth: usize) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        if count == 1 {
            if let Some(z) = self.newton(rect.center(), &rect) {
                self.zeros.push(Zero { location: z, multiplicity: 1 });
                return Ok(());
            }
        } else if rect.width().max(rect.height()) <= CLUSTER_RADIUS {
            let z = self.newton(rect.center(), &rect.grown(CLUSTER_RADIUS)).unwrap_or(rect.center());
            self.zeros.push(Zero { location: z, multiplicity: count });
            return Ok(());
        }
        if depth >= self.opts.max_depth {
            return Err(Error::IsolationFailed(rect));
        }
        for attempt in 0..MAX_PERTURBATIONS {
            let shift = self.opts.tol * 10.0 * attempt as f64;
            let (a, b) = split(&rect, shift);
            let (Some(na), Some(nb)) = (self.counter.count(&a), self.counter.count(&b)) else {
                continue;
            };
            if na + nb != count {
                continue;
            }
            self.isolate(a, na, depth + 1)?;
            self.isolate(b, nb, depth + 1)?;
            return Ok(());
        }
        Err(Error::BoundaryZero(rect))
    }

    /// Newton from `start`; accepted only if it converges inside `rect`.
    fn newton(&self, start: Complex64, rect: &Rect) -> Option<Complex64> {
        let mut z = start;
        for _ in 0..60 {
            let f = self.det.evaluate(z);
            let d = self.derivative.evaluate(z);
            if d.norm() == 0.0 {
                return None;
            }
            let step = f / d;
            z -= step;
            if !rect.grown(rect.width().max(rect.height())).contains(z) {
                return None;
            }
            if step.norm() <= 1e-15 * z.norm().max(1.0) {
                return rect.contains(z).then_some(z);
            }
        }
        None
    }
}

/// Halves along the longer side, the cut line moved by `shift`.
fn split(r: &Rect, shift: f64) -> (Rect, Rect) {
    if r.width() >= r.height() {
        let m = 0.5 * (r.re_min + r.re_max) + shift;
        (Rect::new(r.re_min, m, r.im_min, r.im_max), Rect::new(m, r.re_max, r.im_min, r.im_max))
    } else {
        let m = 0.5 * (r.im_min + r.im_max) + shift;
        (Rect::new(r.re_min, r.re_max, r.im_min, m), Rect::new(r.re_min, r.re_max, m, r.im_max))
    }
}

/// Snaps near-real zeros onto the axis, mirrors the upper half onto the lower,
/// removes duplicates within `tol` and sorts by `(Im, Re)`.
fn symmetrize(zeros: Vec<Zero>, tol: f64) -> Vec<Zero> {
    let mut upper: Vec<Zero> = Vec::new();
    for mut z in zeros {
        if z.location.im.abs() <= tol {
            z.location.im = 0.0;
        } else if z.location.im < 0.0 {
            z.location = z.location.conj();
        }
        match upper.iter_mut().find(|u| (u.location - z.location).norm() <= tol) {
            Some(existing) => existing.multiplicity = existing.multiplicity.max(z.multiplicity),
            None => upper.push(z),
        }
    }
    let mut all = Vec::with_capacity(2 * upper.len());
    for z in upper {
        if z.location.im != 0.0 {
            all.push(Zero { location: z.location.conj(), multiplicity: z.multiplicity });
        }
        all.push(z);
    }
    all.sort_by(|a, b| {
        a.location
            .im
            .total_cmp(&b.location.im)
            .then(a.location.re.total_cmp(&b.location.re))
    });
    all
}
