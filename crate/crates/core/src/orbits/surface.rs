//! Newton search for periodic orbits of surface maps.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::circle::CircleMap;
use super::search::{search, Dynamics, SearchParams, SearchStats};
use super::{classify_nondegeneracy, PeriodicOrbit};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{pinv_solve, Vec2};
use crate::maps::SurfaceMap;

const MAX_NEWTON: usize = 60;
const PINV_CUTOFF: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_period: usize,
    /// Seeds per axis of the uniform seed grid.
    pub grid: usize,
    pub tol: f64,
    pub boundary_search: bool,
    pub boundary_grid: usize,
    /// Backtracking line search on the residual norm.
    pub damped: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { max_period: 3, grid: 12, tol: 1e-10, boundary_search: true, boundary_grid: 256, damped: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSearchReport {
    pub orbits: Vec<PeriodicOrbit>,
    pub stats: SearchStats,
    pub per_period: Vec<SearchStats>,
}

struct MapDynamics<'a> {
    map: &'a SurfaceMap,
    damped: bool,
}

impl MapDynamics<'_> {
    /// `G(x) = φ^d(x) ⊖ x` in the chart of `x` and its Jacobian.
    fn residual(&self, x: &Point, d: usize) -> Option<(Vec2, crate::linalg::Mat2)> {
        let surface = self.map.surface();
        let (y, dy) = self.map.iterate_with_derivative(x, d).ok()?;
        let (y, jt) = surface.transition(&y, x.chart)?;
        let g = surface.difference(&y, x)?;
        Some((g, jt * dy - crate::linalg::Mat2::identity()))
    }
}

impl Dynamics for MapDynamics<'_> {
    type State = Point;

    fn step(&self, x: &Point) -> Option<Point> {
        self.map.apply(x).ok()
    }

    fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.map.surface().distance(a, b)
    }

    fn solve(&self, seed: &Point, period: usize, tol: f64) -> Option<Point> {
        let surface = self.map.surface();
        let mut x = surface.canonical(seed).ok()?;
        let (mut g, mut jac) = self.residual(&x, period)?;
        for _ in 0..MAX_NEWTON {
            let norm = g.norm();
            if norm <= 1e-2 * tol {
                break;
            }
            let dx = pinv_solve(&jac, &(-g), PINV_CUTOFF);
            if dx.norm() == 0.0 {
                break;
            }
            let mut lambda = 1.0;
            let mut next = None;
            for _ in 0..if self.damped { 30 } else { 1 } {
                let trial = surface.canonical(&x.with_coords(x.coords() + lambda * dx)).ok();
                if let Some(trial) = trial {
                    if let Some((gt, jt)) = self.residual(&trial, period) {
                        if !self.damped || gt.norm() < norm {
                            next = Some((trial, gt, jt));
                            break;
                        }
                    }
                }
                lambda *= 0.5;
            }
            let (nx, ng, nj) = next?;
            x = nx;
            g = ng;
            jac = nj;
        }
        (g.norm() <= tol).then_some(x)
    }

    fn order(&self, a: &Point, b: &Point) -> Ordering {
        let (ka, kb) = (a.order_key(), b.order_key());
        (ka.0, ka.1).cmp(&(kb.0, kb.1)).then(ka.2.total_cmp(&kb.2)).then(ka.3.total_cmp(&kb.3))
    }
}

/// Periodic orbits of period at most `max_period`: Newton iteration from a
/// uniform seed grid, plus circle-map periodic points on invariant boundary
/// circles. Orbits are sorted by period, then by first point, and numbered.
pub fn find_orbits(map: &SurfaceMap, cfg: &SearchConfig) -> Result<OrbitSearchReport> {
    if cfg.max_period == 0 || cfg.grid == 0 {
        return Err(Error::InvalidInput("max_period and grid must be positive".into()));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidInput("tol must be positive".into()));
    }
    let surface = map.surface();
    let seeds = surface.seed_grid(cfg.grid);
    let mut boundary: Vec<(usize, Point)> = Vec::new();
    if cfg.boundary_search {
        for i in 0..surface.lagrangian_circles().len() {
            let Ok(cm) = CircleMap::new(map, i, cfg.boundary_grid) else {
                continue;
            };
            let m = cm.power();
            if m > cfg.max_period {
                continue;
            }
            for pp in cm.periodic_points(cfg.max_period / m, cfg.tol)? {
                boundary.push((m * pp.q, surface.collar_point(i, 0.0, pp.t)?));
            }
        }
    }
    let dynamics = MapDynamics { map, damped: cfg.damped };
    let params = SearchParams { max_period: cfg.max_period, tol: cfg.tol, radius: 10.0 * cfg.tol };
    let outcome = search(&dynamics, &seeds, params, |d| {
        boundary.iter().filter(|(p, _)| *p == d).map(|(_, x)| *x).collect()
    });
    let mut orbits = Vec::with_capacity(outcome.orbits.len());
    for (id, pts) in outcome.orbits.into_iter().enumerate() {
        let mut o = classify_nondegeneracy(&PeriodicOrbit::from_points(pts), map)?;
        o.id = id;
        o.simple = true;
        orbits.push(o);
    }
    Ok(OrbitSearchReport { orbits, stats: outcome.stats, per_period: outcome.per_period })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Surface;
    use crate::maps::{identity, perturbed_twist, radial_twist, rigid_rotation};

    #[test]
    fn identity_every_seed_is_a_degenerate_fixed_point() {
        let disk = Surface::disk(1.0).unwrap();
        let cfg = SearchConfig { max_period: 1, grid: 4, boundary_search: false, ..Default::default() };
        let r = find_orbits(&identity(&disk), &cfg).unwrap();
        assert_eq!(r.orbits.len(), disk.seed_grid(4).len());
        assert!(r.orbits.iter().all(|o| !o.nondegenerate && o.period == 1));
    }

    #[test]
    fn rotation_by_a_third() {
        let disk = Surface::disk(1.0).unwrap();
        let m = rigid_rotation(&disk, 1.0 / 3.0).unwrap();
        let cfg = SearchConfig { max_period: 3, grid: 4, ..Default::default() };
        let r = find_orbits(&m, &cfg).unwrap();
        let fixed: Vec<_> = r.orbits.iter().filter(|o| o.period == 1).collect();
        assert_eq!(fixed.len(), 1);
        assert!(fixed[0].points[0].coords().norm() < 1e-12 && fixed[0].nondegenerate);
        let three: Vec<_> = r.orbits.iter().filter(|o| o.period == 3).collect();
        assert!(!three.is_empty());
        for o in three {
            assert!(o.residual < 1e-10);
            assert!((o.monodromy_matrix() - crate::linalg::Mat2::identity()).abs().max() < 1e-8);
            assert!(!o.nondegenerate);
        }
        assert!(r.orbits.iter().all(|o| o.period != 2));
    }

    #[test]
    fn twist_center_found() {
        let disk = Surface::disk(1.0).unwrap();
        let m = radial_twist(&disk, &[0.5, -0.5]).unwrap();
        let cfg = SearchConfig { max_period: 1, grid: 6, boundary_search: false, ..Default::default() };
        let r = find_orbits(&m, &cfg).unwrap();
        let center = r.orbits.iter().find(|o| o.points[0].coords().norm() < 1e-9).expect("center");
        assert!(center.nondegenerate);
        assert!((center.floquet[0].re + 1.0).abs() < 1e-9);
    }

    #[test]
    fn perturbed_twist_interior_and_boundary_orbits() {
        let ann = Surface::annulus(1.0).unwrap();
        let m = perturbed_twist(&ann, 0.05, 0.6, 0.1).unwrap();
        let cfg = SearchConfig { max_period: 1, grid: 8, ..Default::default() };
        let r = find_orbits(&m, &cfg).unwrap();
        let near = |u: f64, v: f64| r.orbits.iter().any(|o| ann.distance(&o.points[0], &Point::base(u, v)) < 1e-9);
        assert!(near(0.5, 0.0) && near(0.5, 0.5));
        let cfg = SearchConfig { max_period: 10, grid: 2, ..Default::default() };
        let r = find_orbits(&m, &cfg).unwrap();
        assert!(r.orbits.iter().any(|o| o.period == 10 && o.boundary_circle.is_some()));
        assert!(r.orbits.iter().all(|o| o.residual <= 1e-10));
        assert!(r.orbits.windows(2).all(|w| w[0].period <= w[1].period));
    }

    #[test]
    fn search_is_deterministic_across_thread_counts() {
        let ann = Surface::annulus(1.0).unwrap();
        let m = perturbed_twist(&ann, 0.05, 0.6, 0.1).unwrap();
        let cfg = SearchConfig { max_period: 2, grid: 6, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| find_orbits(&m, &cfg).unwrap());
        let b = four.install(|| find_orbits(&m, &cfg).unwrap());
        assert_eq!(a, b);
    }
}
