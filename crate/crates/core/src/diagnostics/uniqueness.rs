//! Uniqueness probes: many randomized Newton starts at a fixed `ρ` in the
//! bubbling regime, clustered by sup-distance. One cluster is the expected
//! outcome at a non-degenerate configuration; the translation-degenerate
//! uniform-weight torus is the control demonstrating why the hypothesis
//! matters.

use rand::Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{GreenTable, Point};
use crate::quantities::{BlowupConfiguration, PartitionSpec};
use crate::solver::ansatz;
use crate::solver::disk::{disk_exact_solution, RadialProblem, DEFAULT_CLUSTER};
use crate::solver::torus::TorusProblem;
use crate::solver::FieldData;
use crate::weight::WeightSpec;

#[derive(Clone, Debug, Serialize)]
pub struct ClusterReport {
    pub clusters: usize,
    pub cluster_sizes: Vec<usize>,
    /// Pairwise sup-distances between cluster representatives.
    pub representative_distances: Vec<f64>,
    pub failures: usize,
    pub tolerance: f64,
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn cluster(solutions: &[Vec<f64>], tol: f64) -> (Vec<usize>, Vec<usize>) {
    let mut reps: Vec<usize> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for (i, s) in solutions.iter().enumerate() {
        let mut found = false;
        for (r, rep_idx) in reps.iter().enumerate() {
            if sup_dist(s, &solutions[*rep_idx]) <= tol {
                sizes[r] += 1;
                found = true;
                break;
            }
        }
        if !found {
            reps.push(i);
            sizes.push(1);
        }
    }
    (reps, sizes)
}

/// Radial disk probe at fixed `ρ`: `n_starts` Newton runs from randomized
/// smooth perturbations of the bubble profile.
pub fn disk_uniqueness_probe(
    g: &GreenTable,
    w: &WeightSpec,
    rho: f64,
    n_starts: usize,
    n_nodes: usize,
    perturbation: f64,
    tolerance: f64,
    seed: u64,
) -> Result<ClusterReport> {
    if n_starts == 0 {
        return Ok(ClusterReport {
            clusters: 0,
            cluster_sizes: vec![],
            representative_distances: vec![],
            failures: 0,
            tolerance,
        });
    }
    let problem = RadialProblem::new(g, w, n_nodes, DEFAULT_CLUSTER)?;
    // Height matching ρ on the uniform-weight branch: ρ = 8π - 8e^{-λ}.
    let lambda = -((8.0 * std::f64::consts::PI - rho) / 8.0).ln();
    let base = disk_exact_solution(lambda);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut solutions = Vec::new();
    let mut failures = 0;
    for _ in 0..n_starts {
        let coeffs: Vec<f64> = (0..4).map(|_| perturbation * (rng.random::<f64>() - 0.5) * 2.0).collect();
        let u0: Vec<f64> = problem
            .radii
            .iter()
            .map(|&r| {
                let bump: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| a * ((k + 1) as f64 * std::f64::consts::PI * r).cos())
                    .sum();
                base.u(r) + bump * (1.0 - r * r)
            })
            .collect();
        match problem.solve_fixed_rho(rho, &u0, 1e-9, 60) {
            Ok((u, _)) => solutions.push(u),
            Err(_) => failures += 1,
        }
    }
    let (reps, sizes) = cluster(&solutions, tolerance);
    let mut dists = Vec::new();
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            dists.push(sup_dist(&solutions[reps[i]], &solutions[reps[j]]));
        }
    }
    Ok(ClusterReport {
        clusters: reps.len(),
        cluster_sizes: sizes,
        representative_distances: dists,
        failures,
        tolerance,
    })
}

/// Torus probe at fixed `ρ`: Newton from randomized perturbations of the
/// bubble ansatz at the given configuration; a non-degenerate critical point
/// should collapse every start into a single cluster.
#[allow(clippy::too_many_arguments)]
pub fn torus_uniqueness_probe(
    cfg: &BlowupConfiguration,
    g: &GreenTable,
    w: &WeightSpec,
    n_grid: usize,
    lambda: f64,
    n_starts: usize,
    perturbation: f64,
    tolerance: f64,
    seed: u64,
) -> Result<ClusterReport> {
    if n_starts == 0 {
        return Ok(ClusterReport {
            clusters: 0,
            cluster_sizes: vec![],
            representative_distances: vec![],
            failures: 0,
            tolerance,
        });
    }
    let problem = TorusProblem::new(g, w, n_grid)?;
    let base = ansatz::bubble_ansatz(cfg, g, w, &problem, lambda)?;
    let rho = base.rho;
    let FieldData::TorusGrid { values: base_u, .. } = base.data else { unreachable!() };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut solutions = Vec::new();
    let mut failures = 0;
    for _ in 0..n_starts {
        let coeffs: Vec<f64> =
            (0..6).map(|_| perturbation * (rng.random::<f64>() - 0.5) * 2.0).collect();
        let u0: Vec<f64> = base_u
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let x = (idx % n_grid) as f64 / n_grid as f64;
                let y = (idx / n_grid) as f64 / n_grid as f64;
                let tp = 2.0 * std::f64::consts::PI;
                v + coeffs[0] * (tp * x).cos()
                    + coeffs[1] * (tp * y).cos()
                    + coeffs[2] * (tp * (x + y)).sin()
                    + coeffs[3] * (tp * 2.0 * x).sin()
                    + coeffs[4] * (tp * 2.0 * y).cos()
                    + coeffs[5] * (tp * (x - y)).cos()
            })
            .collect();
        match problem.newton_solve(&u0, rho, 1e-7, 40) {
            Ok((u, _, _)) => solutions.push(u),
            Err(_) => failures += 1,
        }
    }
    let (reps, sizes) = cluster(&solutions, tolerance);
    let mut dists = Vec::new();
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            dists.push(sup_dist(&solutions[reps[i]], &solutions[reps[j]]));
        }
    }
    Ok(ClusterReport {
        clusters: reps.len(),
        cluster_sizes: sizes,
        representative_distances: dists,
        failures,
        tolerance,
    })
}

/// Control case: uniform weight on the torus, Newton starts centred at
/// translated bubble positions. The configuration functional is constant
/// (`det D²f₁ = 0`), the solution set is a translation continuum, and the
/// starts converge to distinct translates — more than one cluster.
pub fn torus_translation_probe(
    g: &GreenTable,
    w: &WeightSpec,
    n_grid: usize,
    lambda: f64,
    centers: &[Point],
    tolerance: f64,
) -> Result<ClusterReport> {
    let problem = TorusProblem::new(g, w, n_grid)?;
    let mut solutions = Vec::new();
    let mut failures = 0;
    let mut rho_common = None;
    for &c in centers {
        let cfg = BlowupConfiguration { q: vec![c], partition: PartitionSpec::voronoi(0.1) };
        let field = ansatz::bubble_ansatz(&cfg, g, w, &problem, lambda)?;
        let rho = *rho_common.get_or_insert(field.rho);
        let FieldData::TorusGrid { values, .. } = field.data else { unreachable!() };
        // The degenerate control sits on a flat solution manifold; demand
        // only enough convergence to separate translates (they differ at
        // O(1) in sup norm).
        match problem.newton_solve(&values, rho, 1e-6, 30) {
            Ok((u, _, _)) => solutions.push(u),
            Err(_) => failures += 1,
        }
    }
    let (reps, sizes) = cluster(&solutions, tolerance);
    let mut dists = Vec::new();
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            dists.push(sup_dist(&solutions[reps[i]], &solutions[reps[j]]));
        }
    }
    Ok(ClusterReport {
        clusters: reps.len(),
        cluster_sizes: sizes,
        representative_distances: dists,
        failures,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn zero_starts_gives_empty_report() {
        let g = GreenTable::for_domain(DomainSpec::disk());
        let w = WeightSpec::uniform();
        let rep = disk_uniqueness_probe(&g, &w, 24.0, 0, 200, 0.1, 1e-6, 1).unwrap();
        assert_eq!(rep.clusters, 0);
        assert_eq!(rep.failures, 0);
    }

    #[test]
    fn disk_probe_collapses_to_one_cluster() {
        let g = GreenTable::for_domain(DomainSpec::disk());
        let w = WeightSpec::uniform();
        let rho = 8.0 * std::f64::consts::PI - 8.0 * (-5.0_f64).exp();
        let rep = disk_uniqueness_probe(&g, &w, rho, 6, 200, 0.2, 1e-6, 7).unwrap();
        assert_eq!(rep.failures, 0);
        assert_eq!(rep.clusters, 1, "distances: {:?}", rep.representative_distances);
    }
}
