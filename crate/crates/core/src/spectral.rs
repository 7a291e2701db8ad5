//! Sim-value, Perron vector and total spray volumes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generator::GeneratorProfile;
use crate::graph::MwGraph;

pub const MAX_POWER_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimValue {
    pub dim: f64,
    pub bracket_width: f64,
    /// `|rho(A(dim)) - 1|`.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct PowerResult {
    pub radius: f64,
    pub vector: DVector<f64>,
    pub iterations: usize,
}

/// Spectral radius and Perron vector of a nonnegative irreducible matrix.
///
/// Iterates on `I + M`, which is primitive whenever `M` is irreducible, so
/// periodic graphs converge too; the radius is shifted back by one.
pub fn power_iteration(m: &DMatrix<f64>, start: &DVector<f64>, tol: f64) -> Result<PowerResult> {
    let n = m.nrows();
    let shifted = m + DMatrix::<f64>::identity(n, n);
    let mut x = start / start.lp_norm(1);
    let mut previous = f64::NAN;
    for it in 1..=MAX_POWER_ITERATIONS {
        let y = &shifted * &x;
        let norm = y.lp_norm(1);
        let radius = norm - 1.0;
        x = y / norm;
        if (radius - previous).abs() < (tol / 10.0).max(4.0 * f64::EPSILON * norm) {
            return Ok(PowerResult { radius, vector: x, iterations: it });
        }
        previous = radius;
    }
    Err(Error::PowerIteration { iterations: MAX_POWER_ITERATIONS })
}

pub fn spectral_radius(g: &MwGraph, s: f64, tol: f64) -> Result<f64> {
    let n = g.vertex_count();
    power_iteration(&g.matrix_at_real(s), &DVector::from_element(n, 1.0), tol).map(|r| r.radius)
}

/// Unique `D >= 0` with `rho(A(D)) = 1`, by bisection.
pub fn sim_value(g: &MwGraph, tol: f64) -> Result<SimValue> {
    let inner_tol = tol * 1e-3;
    let rho = |s: f64| spectral_radius(g, s, inner_tol);
    let mut hi = g.space_dimension().max(1) as f64;
    while rho(hi)? >= 1.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::BracketNotFound { s_hi: hi });
        }
    }
    let mut lo = 0.0;
    if rho(lo)? <= 1.0 {
        // every row of A(0) counts at least one edge, so rho(A(0)) >= 1
        return Ok(SimValue { dim: 0.0, bracket_width: 0.0, residual: (rho(0.0)? - 1.0).abs() });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rho(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * 1e-2 {
            break;
        }
    }
    let dim = 0.5 * (lo + hi);
    Ok(SimValue { dim, bracket_width: hi - lo, residual: (rho(dim)? - 1.0).abs() })
}

/// Positive eigenvector of `A(dim)` for eigenvalue 1, normalised to unit 1-norm.
pub fn perron_vector(g: &MwGraph, dim: f64) -> Result<DVector<f64>> {
    perron_vector_from(g, dim, &DVector::from_element(g.vertex_count(), 1.0))
}

pub fn perron_vector_from(g: &MwGraph, dim: f64, start: &DVector<f64>) -> Result<DVector<f64>> {
    let result = power_iteration(&g.matrix_at_real(dim), start, 1e-15)?;
    let p = result.vector;
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositivePerron { index, value });
    }
    Ok(p)
}

/// Per-vertex total volumes `Vol(S_u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeVector(pub Vec<f64>);

impl VolumeVector {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Solves `(I - A(n)) x = [Vol(G_u)]`; finite only when the sim-value is below `n`.
pub fn total_volumes(g: &MwGraph, profiles: &[GeneratorProfile]) -> Result<VolumeVector> {
    let n = g.space_dimension();
    let d = sim_value(g, 1e-12)?;
    if d.dim >= n as f64 {
        return Err(Error::InfiniteVolume { dim: d.dim, space_dimension: n });
    }
    total_volumes_unchecked(g, profiles)
}

pub(crate) fn total_volumes_unchecked(
    g: &MwGraph,
    profiles: &[GeneratorProfile],
) -> Result<VolumeVector> {
    let k = g.vertex_count();
    if profiles.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} profiles for {k} vertices",
            profiles.len()
        )));
    }
    let m = DMatrix::<f64>::identity(k, k) - g.matrix_at_real(g.space_dimension() as f64);
    let rhs = DVector::from_iterator(k, profiles.iter().map(|p| p.volume));
    let x = m.lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(VolumeVector(x.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::fixtures::*;
    use crate::graph::fixtures::*;

    fn closed_form_dim() -> f64 {
        ((29f64.sqrt() + 1.0) / 2.0).log2()
    }

    #[test]
    fn worked_example_sim_value() {
        let d = sim_value(&worked_example(), 1e-12).unwrap();
        assert!((d.dim - closed_form_dim()).abs() < 1e-10);
        assert!((d.dim - 1.6747238577302133).abs() < 1e-10);
        assert!(d.residual <= 1e-12);
    }

    #[test]
    fn cantor_sim_value() {
        let d = sim_value(&cantor(), 1e-12).unwrap();
        assert!((d.dim - 2f64.ln() / 3f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn gasket_sim_value() {
        let g = MwGraph::validated(
            &["t"],
            &[("t", "t", 0.5), ("t", "t", 0.5), ("t", "t", 0.5)],
            2,
        )
        .unwrap();
        let d = sim_value(&g, 1e-12).unwrap();
        assert!((d.dim - 3f64.log2()).abs() < 1e-11);
    }

    #[test]
    fn periodic_graph_converges() {
        // bipartite two-cycle: A(s) has eigenvalues +-rho
        let g = MwGraph::validated(
            &["a", "b"],
            &[("a", "b", 0.5), ("a", "b", 0.5), ("b", "a", 0.5), ("b", "a", 0.25)],
            1,
        )
        .unwrap();
        let d = sim_value(&g, 1e-12).unwrap();
        let det = 1.0 - (2.0 * 0.5f64.powf(d.dim)) * (0.5f64.powf(d.dim) + 0.25f64.powf(d.dim));
        assert!(det.abs() < 1e-10);
    }

    #[test]
    fn sim_value_permutation_invariant() {
        let mut edges = Vec::new();
        for _ in 0..4 {
            edges.push(("2", "1", 0.5));
        }
        edges.push(("1", "2", 0.5));
        edges.push(("1", "1", 0.5));
        for _ in 0..3 {
            edges.push(("1", "1", 0.25));
        }
        let swapped = MwGraph::validated(&["1", "2"], &edges, 2).unwrap();
        let a = sim_value(&worked_example(), 1e-12).unwrap().dim;
        let b = sim_value(&swapped, 1e-12).unwrap().dim;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_strictly_decreasing() {
        let g = worked_example();
        let radii: Vec<f64> = (0..=4).map(|k| spectral_radius(&g, 0.5 * k as f64, 1e-13).unwrap()).collect();
        assert!(radii.windows(2).all(|w| w[0] > w[1]), "{radii:?}");
    }

    #[test]
    fn perron_vectors() {
        assert!((perron_vector(&cantor(), 2f64.ln() / 3f64.ln()).unwrap()[0] - 1.0).abs() < 1e-15);
        let g = worked_example();
        let d = sim_value(&g, 1e-13).unwrap().dim;
        let p = perron_vector(&g, d).unwrap();
        assert!(p.iter().all(|&x| x > 0.0));
        assert!((p.lp_norm(1) - 1.0).abs() < 1e-14);
        let residual = (g.matrix_at_real(d) * &p - &p).norm();
        assert!(residual <= 1e-10, "{residual}");
        let q = perron_vector_from(&g, d, &DVector::from_vec(vec![0.9, 0.001])).unwrap();
        let r = perron_vector_from(&g, d, &DVector::from_vec(vec![0.02, 7.0])).unwrap();
        assert!((q - r).norm() <= 1e-8);
    }

    #[test]
    fn worked_example_total_volumes() {
        let v = total_volumes(&worked_example(), &[worked_g1(), worked_g2()]).unwrap();
        assert!((v.0[0] - 4.0).abs() < 1e-13 && (v.0[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn cantor_total_volume() {
        let v = total_volumes(&cantor(), &[cantor_gap()]).unwrap();
        assert!((v.0[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn total_volumes_linear() {
        let g = worked_example();
        let mut a = worked_g1();
        let mut b = worked_g2();
        let base = total_volumes(&g, &[a.clone(), b.clone()]).unwrap();
        a.volume *= 2.0;
        b.volume *= 2.0;
        let doubled = total_volumes(&g, &[a, b]).unwrap();
        for (x, y) in base.0.iter().zip(&doubled.0) {
            assert!((2.0 * x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn neumann_series_agrees() {
        let g = worked_example();
        let a = g.matrix_at_real(2.0);
        let vol_g = DVector::from_vec(vec![2.0, 0.125]);
        let mut term = vol_g.clone();
        let mut sum = vol_g.clone();
        // rho(A(2)) ~ 0.7645, so the tail after 100 terms is ~1e-12
        for _ in 0..100 {
            term = &a * term;
            sum += &term;
        }
        let x = total_volumes(&g, &[worked_g1(), worked_g2()]).unwrap();
        for (s, v) in sum.iter().zip(&x.0) {
            assert!((s - v).abs() < 1e-8);
        }
    }

    #[test]
    fn infinite_volume_rejected() {
        // sim-value log2 3 > 1 = n
        let g = MwGraph::validated(&["t"], &[("t", "t", 0.5), ("t", "t", 0.5), ("t", "t", 0.5)], 1)
            .unwrap();
        let p = GeneratorProfile::monophase(&[2.0], 0.1, 0.2);
        assert!(matches!(total_volumes(&g, &[p]), Err(Error::InfiniteVolume { .. })));
    }
}
