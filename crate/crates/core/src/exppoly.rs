//! Exponential polynomials `sum_j c_j * b_j^s` with real coefficients and
//! bases in `(0, 1]`, exact symbolic determinants and adjugates of matrices
//! over them, and detection of lattice (commensurable) base sets.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::MwGraph;

/// Two bases are merged when their logarithms differ by at most this much.
pub const BASE_MERGE_TOL: f64 = 1e-12;
/// Coefficients below this fraction of the largest one are dropped.
const COEFF_DROP_REL: f64 = 1e-14;
/// Largest matrix handled by cofactor expansion.
pub const MAX_SYMBOLIC_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coeff: f64,
    /// `ln b`, always `<= 0`.
    pub log_base: f64,
}

impl Term {
    pub fn base(&self) -> f64 {
        self.log_base.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpPolynomial {
    terms: Vec<Term>,
}

impl ExpPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_log_terms(vec![Term { coeff: c, log_base: 0.0 }])
    }

    /// `c * b^s`.
    pub fn monomial(coeff: f64, base: f64) -> Self {
        assert!(base > 0.0 && base <= 1.0, "base {base} outside (0, 1]");
        Self::from_log_terms(vec![Term {
            coeff,
            log_base: base.ln().min(0.0),
        }])
    }

    /// Builds from `(coefficient, base)` pairs and canonicalises.
    pub fn from_terms(terms: &[(f64, f64)]) -> Self {
        terms
            .iter()
            .map(|&(c, b)| Self::monomial(c, b))
            .fold(Self::zero(), |acc, t| acc + t)
    }

    fn from_log_terms(mut terms: Vec<Term>) -> Self {
        terms.sort_by(|a, b| b.log_base.total_cmp(&a.log_base));
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if (last.log_base - t.log_base).abs() <= BASE_MERGE_TOL => {
                    last.coeff += t.coeff;
                }
                _ => merged.push(t),
            }
        }
        let scale = merged.iter().map(|t| t.coeff.abs()).fold(0.0, f64::max);
        merged.retain(|t| t.coeff != 0.0 && t.coeff.abs() > COEFF_DROP_REL * scale);
        Self { terms: merged }
    }

    /// Terms sorted by base descending; no two share a base.
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn canonicalize(&self) -> Self {
        Self::from_log_terms(self.terms.clone())
    }

    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.log_base.abs() <= BASE_MERGE_TOL)
            .map_or(0.0, |t| t.coeff)
    }

    pub fn evaluate(&self, s: Complex64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.coeff * (s * t.log_base).exp())
            .sum()
    }

    pub fn evaluate_real(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * (s * t.log_base).exp())
            .sum()
    }

    /// `d/ds`, using `d/ds b^s = ln(b) b^s`; the constant term drops out.
    pub fn derivative(&self) -> Self {
        Self::from_log_terms(
            self.terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * t.log_base,
                    log_base: t.log_base,
                })
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_log_terms(
            self.terms
                .iter()
                .map(|t| Term { coeff: t.coeff * k, log_base: t.log_base })
                .collect(),
        )
    }
}

impl Add for ExpPolynomial {
    type Output = ExpPolynomial;
    fn add(self, rhs: Self) -> Self {
        let mut terms = self.terms;
        terms.extend(rhs.terms);
        Self::from_log_terms(terms)
    }
}

impl<'a> Add<&'a ExpPolynomial> for &'a ExpPolynomial {
    type Output = ExpPolynomial;
    fn add(self, rhs: Self) -> ExpPolynomial {
        self.clone() + rhs.clone()
    }
}

impl Neg for ExpPolynomial {
    type Output = ExpPolynomial;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Sub for ExpPolynomial {
    type Output = ExpPolynomial;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<'a> Sub<&'a ExpPolynomial> for &'a ExpPolynomial {
    type Output = ExpPolynomial;
    fn sub(self, rhs: Self) -> ExpPolynomial {
        self.clone() - rhs.clone()
    }
}

impl<'a> Mul<&'a ExpPolynomial> for &'a ExpPolynomial {
    type Output = ExpPolynomial;
    fn mul(self, rhs: Self) -> ExpPolynomial {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(Term {
                    coeff: a.coeff * b.coeff,
                    log_base: a.log_base + b.log_base,
                });
            }
        }
        ExpPolynomial::from_log_terms(terms)
    }
}

impl Mul for ExpPolynomial {
    type Output = ExpPolynomial;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

impl fmt::Display for ExpPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            let sign = if t.coeff < 0.0 { "-" } else if k > 0 { "+" } else { "" };
            let sep = if k > 0 { " " } else { "" };
            if t.log_base == 0.0 {
                write!(f, "{sep}{sign}{}", t.coeff.abs())?;
            } else {
                write!(f, "{sep}{sign}{}*{}^s", t.coeff.abs(), t.base())?;
            }
        }
        Ok(())
    }
}

/// Square matrix with exponential-polynomial entries, row-major.
pub type ExpMatrix = Vec<Vec<ExpPolynomial>>;

/// `I - A(s)` for the graph, entry `(u, v)` being `delta_uv - sum_{e: u->v} r_e^s`.
pub fn identity_minus_matrix(g: &MwGraph) -> ExpMatrix {
    let n = g.vertex_count();
    let mut m: ExpMatrix = (0..n)
        .map(|u| {
            (0..n)
                .map(|v| {
                    if u == v {
                        ExpPolynomial::constant(1.0)
                    } else {
                        ExpPolynomial::zero()
                    }
                })
                .collect()
        })
        .collect();
    for e in g.edges() {
        let entry = std::mem::take(&mut m[e.from][e.to]);
        m[e.from][e.to] = entry - ExpPolynomial::monomial(1.0, e.ratio);
    }
    m
}

pub fn evaluate_matrix(m: &ExpMatrix, s: Complex64) -> nalgebra::DMatrix<Complex64> {
    let n = m.len();
    nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j].evaluate(s))
}

/// Symbolic determinant and adjugate by cofactor expansion.
#[allow(clippy::needless_range_loop)]
pub fn det_and_adjugate(m: &ExpMatrix) -> Result<(ExpPolynomial, ExpMatrix)> {
    let n = m.len();
    if let Some(row) = m.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare { rows: n, cols: row.len() });
    }
    if n > MAX_SYMBOLIC_DIM {
        return Err(Error::DimensionTooLarge { dim: n, cap: MAX_SYMBOLIC_DIM });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let det = minor_det(m, &all, &all);
    let mut adj = vec![vec![ExpPolynomial::zero(); n]; n];
    if n == 1 {
        adj[0][0] = ExpPolynomial::constant(1.0);
        return Ok((det, adj));
    }
    for i in 0..n {
        for j in 0..n {
            let rows: Vec<usize> = all.iter().copied().filter(|&r| r != i).collect();
            let cols: Vec<usize> = all.iter().copied().filter(|&c| c != j).collect();
            let minor = minor_det(m, &rows, &cols);
            // adj is the transposed cofactor matrix
            adj[j][i] = if (i + j) % 2 == 0 { minor } else { -minor };
        }
    }
    Ok((det, adj))
}

fn minor_det(m: &ExpMatrix, rows: &[usize], cols: &[usize]) -> ExpPolynomial {
    match rows.len() {
        1 => m[rows[0]][cols[0]].clone(),
        2 => {
            &(&m[rows[0]][cols[0]] * &m[rows[1]][cols[1]])
                - &(&m[rows[0]][cols[1]] * &m[rows[1]][cols[0]])
        }
        _ => {
            let r0 = rows[0];
            let sub_rows = &rows[1..];
            let mut acc = ExpPolynomial::zero();
            for (k, &c) in cols.iter().enumerate() {
                if m[r0][c].is_zero() {
                    continue;
                }
                let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let term = &m[r0][c] * &minor_det(m, sub_rows, &sub_cols);
                acc = if k % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
    }
}

/// Commensurability data: every `ln(1/b_j) = k_j * lambda` for integers `k_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeStructure {
    pub lambda: f64,
    /// One exponent per term of the source polynomial, in term order.
    pub exponents: Vec<u64>,
    pub period: f64,
}

impl LatticeStructure {
    pub fn max_exponent(&self) -> u64 {
        self.exponents.iter().copied().max().unwrap_or(0)
    }

    /// Coefficients of the polynomial in `z = exp(-lambda s)`, lowest degree first.
    pub fn polynomial(&self, ep: &ExpPolynomial) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.max_exponent() as usize + 1];
        for (t, &k) in ep.terms().iter().zip(&self.exponents) {
            coeffs[k as usize] += t.coeff;
        }
        coeffs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lattice {
    Lattice(LatticeStructure),
    NonLattice,
}

pub const DEFAULT_LATTICE_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_DENOMINATOR: u64 = 64;

/// Decides whether the bases of `ep` are commensurable, via continued
/// fractions of `ln(1/b_j) / ln(1/b_min)` with bounded denominators.
pub fn lattice_structure(ep: &ExpPolynomial, tol: f64, max_denominator: u64) -> Lattice {
    let logs: Vec<f64> = ep.terms().iter().map(|t| -t.log_base).collect();
    let largest = logs.iter().copied().fold(0.0, f64::max);
    if largest <= BASE_MERGE_TOL {
        return Lattice::NonLattice;
    }
    let mut fractions = Vec::with_capacity(logs.len());
    for &l in &logs {
        if l <= BASE_MERGE_TOL {
            fractions.push((0u64, 1u64));
            continue;
        }
        match rational_approx(l / largest, tol, max_denominator) {
            Some(pq) => fractions.push(pq),
            None => return Lattice::NonLattice,
        }
    }
    let common = fractions.iter().fold(1u64, |acc, &(_, q)| lcm(acc, q));
    let mut exponents: Vec<u64> = fractions.iter().map(|&(p, q)| p * (common / q)).collect();
    let g = exponents.iter().copied().filter(|&k| k > 0).fold(0, gcd);
    if g == 0 {
        return Lattice::NonLattice;
    }
    for k in &mut exponents {
        *k /= g;
    }
    // least-squares lambda over all terms
    let (num, den) = exponents
        .iter()
        .zip(&logs)
        .fold((0.0, 0.0), |(n, d), (&k, &l)| (n + k as f64 * l, d + (k * k) as f64));
    let lambda = num / den;
    let fits = exponents
        .iter()
        .zip(&logs)
        .all(|(&k, &l)| (l - k as f64 * lambda).abs() <= tol * l.max(1.0));
    if !fits {
        return Lattice::NonLattice;
    }
    Lattice::Lattice(LatticeStructure {
        lambda,
        exponents,
        period: 2.0 * std::f64::consts::PI / lambda,
    })
}

/// First continued-fraction convergent `p/q` of `x` in `[0, 1]` with
/// `|x - p/q| <= tol` and `q <= max_den`.
fn rational_approx(x: f64, tol: f64, max_den: u64) -> Option<(u64, u64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        if a > 1e12 {
            return None;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            return None;
        }
        if (x - p2 as f64 / q2 as f64).abs() <= tol {
            return Some((p2, q2));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = rem - a as f64;
        if frac <= 0.0 {
            return None;
        }
        rem = 1.0 / frac;
    }
    None
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{cantor, worked_example};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn worked_det() -> ExpPolynomial {
        ExpPolynomial::from_terms(&[(1.0, 1.0), (-1.0, 0.5), (-7.0, 0.25)])
    }

    fn assert_same(a: &ExpPolynomial, b: &ExpPolynomial) {
        assert_eq!(a.terms().len(), b.terms().len(), "{a} vs {b}");
        for (x, y) in a.terms().iter().zip(b.terms()) {
            assert!((x.coeff - y.coeff).abs() < 1e-13, "{a} vs {b}");
            assert!((x.log_base - y.log_base).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn worked_det_at_zero() {
        assert!((worked_det().evaluate(c(0.0, 0.0)) - c(-7.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn worked_det_vanishes_at_sim_value() {
        let d = ((29f64.sqrt() + 1.0) / 2.0).log2();
        assert!(worked_det().evaluate(c(d, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let p = worked_det();
        let s = c(1.3, 0.7);
        let h = 1e-6;
        let fd = (p.evaluate(s + h) - p.evaluate(s - h)) / (2.0 * h);
        let exact = p.derivative().evaluate(s);
        assert!((fd - exact).norm() <= 1e-8 * exact.norm());
    }

    #[test]
    fn derivative_drops_constant() {
        assert!(ExpPolynomial::constant(3.0).derivative().is_zero());
    }

    #[test]
    fn worked_example_det_and_adjugate() {
        let (det, adj) = det_and_adjugate(&identity_minus_matrix(&worked_example())).unwrap();
        assert_same(&det, &worked_det());
        assert_same(
            &adj[0][0],
            &ExpPolynomial::from_terms(&[(1.0, 1.0), (-1.0, 0.5), (-3.0, 0.25)]),
        );
        assert_same(&adj[0][1], &ExpPolynomial::from_terms(&[(4.0, 0.5)]));
        assert_same(&adj[1][0], &ExpPolynomial::from_terms(&[(1.0, 0.5)]));
        assert_same(&adj[1][1], &ExpPolynomial::constant(1.0));
    }

    #[test]
    fn one_by_one_adjugate_is_one() {
        let m = identity_minus_matrix(&cantor());
        let (det, adj) = det_and_adjugate(&m).unwrap();
        assert_same(&det, &ExpPolynomial::from_terms(&[(1.0, 1.0), (-2.0, 1.0 / 3.0)]));
        assert_same(&adj[0][0], &ExpPolynomial::constant(1.0));
    }

    #[test]
    fn too_large_matrix_is_rejected() {
        let m = vec![vec![ExpPolynomial::constant(1.0); 9]; 9];
        assert_eq!(
            det_and_adjugate(&m).unwrap_err(),
            Error::DimensionTooLarge { dim: 9, cap: 8 }
        );
    }

    fn three_vertex_graph() -> MwGraph {
        MwGraph::validated(
            &["a", "b", "c"],
            &[
                ("a", "b", 0.3),
                ("a", "c", 0.2),
                ("b", "c", 0.5),
                ("b", "a", 0.25),
                ("c", "a", 0.4),
                ("c", "c", 0.1),
            ],
            2,
        )
        .unwrap()
    }

    #[test]
    fn adjugate_identity_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for g in [worked_example(), three_vertex_graph()] {
            let m = identity_minus_matrix(&g);
            let (det, adj) = det_and_adjugate(&m).unwrap();
            for _ in 0..10 {
                let s = c(rng.gen_range(-1.0..3.0), rng.gen_range(-30.0..30.0));
                let prod = evaluate_matrix(&adj, s) * evaluate_matrix(&m, s);
                let d = det.evaluate(s);
                let scale = 1.0 + prod.iter().map(|z| z.norm()).fold(0.0, f64::max);
                for i in 0..m.len() {
                    for j in 0..m.len() {
                        let want = if i == j { d } else { c(0.0, 0.0) };
                        assert!((prod[(i, j)] - want).norm() <= 1e-10 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn symbolic_det_matches_numeric_lu() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for g in [worked_example(), three_vertex_graph()] {
            let (det, _) = det_and_adjugate(&identity_minus_matrix(&g)).unwrap();
            let n = g.vertex_count();
            for _ in 0..20 {
                let s = c(rng.gen_range(-1.0..3.0), rng.gen_range(-30.0..30.0));
                let numeric = (nalgebra::DMatrix::<Complex64>::identity(n, n) - g.matrix_at(s))
                    .lu()
                    .determinant();
                let sym = det.evaluate(s);
                assert!((numeric - sym).norm() <= 1e-10 * numeric.norm().max(1.0));
            }
        }
    }

    #[test]
    fn lattice_powers_of_two() {
        let ep = worked_det();
        let Lattice::Lattice(l) = lattice_structure(&ep, 1e-9, 64) else {
            panic!("expected lattice");
        };
        assert!((l.lambda - 2f64.ln()).abs() < 1e-14);
        assert_eq!(l.exponents, vec![0, 1, 2]);
        assert!((l.period - 9.064720283654388).abs() < 1e-12);
        assert_eq!(l.polynomial(&ep), vec![1.0, -1.0, -7.0]);
    }

    #[test]
    fn halves_and_thirds_are_non_lattice() {
        let ep = ExpPolynomial::from_terms(&[(1.0, 1.0), (-1.0, 0.5), (-1.0, 1.0 / 3.0)]);
        assert_eq!(lattice_structure(&ep, 1e-9, 64), Lattice::NonLattice);
    }

    #[test]
    fn single_base_is_lattice() {
        for r in [0.3, 0.5, 0.9, 1.0 / 7.0] {
            let ep = ExpPolynomial::from_terms(&[(1.0, 1.0), (-2.0, r)]);
            let Lattice::Lattice(l) = lattice_structure(&ep, 1e-9, 64) else {
                panic!("expected lattice");
            };
            assert!((l.lambda - (1.0 / r).ln()).abs() < 1e-14);
            assert_eq!(l.exponents, vec![0, 1]);
        }
    }

    #[test]
    fn lattice_with_fractional_ratio() {
        // ln(1/b) in {2, 3} * ln 2: lambda = ln 2 after reduction
        let ep = ExpPolynomial::from_terms(&[(1.0, 1.0), (-1.0, 0.25), (-1.0, 0.125)]);
        let Lattice::Lattice(l) = lattice_structure(&ep, 1e-9, 64) else {
            panic!("expected lattice");
        };
        assert!((l.lambda - 2f64.ln()).abs() < 1e-13);
        assert_eq!(l.exponents, vec![0, 2, 3]);
    }

    #[test]
    fn near_duplicate_bases_merge() {
        let ep = ExpPolynomial::from_terms(&[(1.0, 0.3), (2.0, 0.3 * (1.0 + 1e-14))]);
        assert_eq!(ep.terms().len(), 1);
        assert!((ep.terms()[0].coeff - 3.0).abs() < 1e-15);
        let apart = ExpPolynomial::from_terms(&[(1.0, 0.3), (2.0, 0.3 * (1.0 + 1e-9))]);
        assert_eq!(apart.terms().len(), 2);
    }

    fn arb_poly() -> impl Strategy<Value = ExpPolynomial> {
        prop::collection::vec(
            (-5i32..=5, prop::sample::select(vec![1.0, 0.5, 0.25, 0.2, 1.0 / 3.0, 0.125])),
            0..5,
        )
        .prop_map(|v| {
            ExpPolynomial::from_terms(
                &v.into_iter().map(|(c, b)| (c as f64, b)).collect::<Vec<_>>(),
            )
        })
    }

    proptest! {
        #[test]
        fn canonicalize_idempotent(p in arb_poly()) {
            prop_assert_eq!(p.canonicalize(), p.clone());
            let bases: Vec<f64> = p.terms().iter().map(|t| t.log_base).collect();
            prop_assert!(bases.windows(2).all(|w| w[0] > w[1]));
        }

        #[test]
        fn ring_laws(a in arb_poly(), b in arb_poly(), cc in arb_poly()) {
            let s = c(0.7, 2.3);
            let close = |x: &ExpPolynomial, y: &ExpPolynomial| {
                (x.evaluate(s) - y.evaluate(s)).norm() < 1e-9 && x.terms().len() == y.terms().len()
            };
            prop_assert!(close(&(&a + &b), &(&b + &a)));
            prop_assert!(close(&(&a * &b), &(&b * &a)));
            prop_assert!(close(&(&(&a + &b) + &cc), &(&a + &(&b + &cc))));
            prop_assert!(close(&(&(&a * &b) * &cc), &(&a * &(&b * &cc))));
        }

        #[test]
        fn conjugate_symmetry(p in arb_poly(), re in -2.0f64..3.0, im in -40.0f64..40.0) {
            let s = c(re, im);
            prop_assert!((p.evaluate(s.conj()) - p.evaluate(s).conj()).norm() <= 1e-12 * (1.0 + p.evaluate(s).norm()));
        }

        #[test]
        fn lattice_polynomial_matches(re in -1.0f64..3.0, im in -40.0f64..40.0) {
            let ep = worked_det();
            let Lattice::Lattice(l) = lattice_structure(&ep, 1e-9, 64) else { unreachable!() };
            let s = c(re, im);
            let z = (-l.lambda * s).exp();
            let poly: Complex64 = l.polynomial(&ep).iter().enumerate().map(|(k, &a)| a * z.powu(k as u32)).sum();
            let direct = ep.evaluate(s);
            prop_assert!((poly - direct).norm() <= 1e-10 * (1.0 + direct.norm()));
        }
    }
}
