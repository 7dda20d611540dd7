//! A period-by-period orbit search shared by every dynamical system.
//!
//! Candidates are solved per seed (in parallel), then merged sequentially in
//! seed order: non-minimal and non-simple candidates are rejected, and a
//! candidate matching an accepted orbit under some cyclic rotation (within the
//! clustering radius) is a duplicate. The result does not depend on the
//! number of worker threads.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A discrete dynamical system together with a periodic-point solver.
pub trait Dynamics: Sync {
    type State: Clone + Send + Sync;

    /// One step of the map, `None` when the orbit leaves the domain.
    fn step(&self, x: &Self::State) -> Option<Self::State>;

    fn distance(&self, a: &Self::State, b: &Self::State) -> f64;

    /// A point `x` with `φ^period(x) ≈ x` near `seed`, or `None`.
    fn solve(&self, seed: &Self::State, period: usize, tol: f64) -> Option<Self::State>;

    /// Total order used to pick the first point of an orbit.
    fn order(&self, a: &Self::State, b: &Self::State) -> Ordering;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub attempts: usize,
    pub converged: usize,
    pub non_minimal: usize,
    pub not_simple: usize,
    pub duplicates: usize,
    pub escaped: usize,
    pub accepted: usize,
}

impl SearchStats {
    fn absorb(&mut self, o: &SearchStats) {
        self.attempts += o.attempts;
        self.converged += o.converged;
        self.non_minimal += o.non_minimal;
        self.not_simple += o.not_simple;
        self.duplicates += o.duplicates;
        self.escaped += o.escaped;
        self.accepted += o.accepted;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    pub max_period: usize,
    /// Residual bound `dist(φ^d x, x) ≤ tol`.
    pub tol: f64,
    /// Points closer than this are the same point.
    pub radius: f64,
}

/// Orbits as ordered point lists, sorted by period and then by first point.
pub struct SearchOutcome<S> {
    pub orbits: Vec<Vec<S>>,
    pub stats: SearchStats,
    pub per_period: Vec<SearchStats>,
}

fn trajectory<D: Dynamics>(dynamics: &D, x: &D::State, n: usize) -> Option<Vec<D::State>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(x.clone());
    for _ in 0..n {
        let next = dynamics.step(out.last().expect("nonempty"))?;
        out.push(next);
    }
    Some(out)
}

fn canonical_rotation<D: Dynamics>(dynamics: &D, mut pts: Vec<D::State>) -> Vec<D::State> {
    let mut best = 0;
    for k in 1..pts.len() {
        if dynamics.order(&pts[k], &pts[best]) == Ordering::Less {
            best = k;
        }
    }
    pts.rotate_left(best);
    pts
}

/// Whether `b` equals `a` up to cyclic rotation, pointwise within `radius`.
pub fn same_orbit<D: Dynamics>(dynamics: &D, a: &[D::State], b: &[D::State], radius: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let n = a.len();
    (0..n).any(|r| {
        dynamics.distance(&a[0], &b[r]) <= radius
            && (1..n).all(|i| dynamics.distance(&a[i], &b[(i + r) % n]) <= radius)
    })
}

/// Runs the search. `extra(d)` supplies additional candidates of period `d`
/// (merged before the seeded ones).
pub fn search<D, E>(dynamics: &D, seeds: &[D::State], params: SearchParams, extra: E) -> SearchOutcome<D::State>
where
    D: Dynamics,
    E: Fn(usize) -> Vec<D::State>,
{
    let mut accepted: Vec<Vec<D::State>> = Vec::new();
    let mut stats = SearchStats::default();
    let mut per_period = Vec::new();
    for d in 1..=params.max_period.max(1) {
        let mut level = SearchStats::default();
        let mut candidates: Vec<Option<D::State>> = extra(d).into_iter().map(Some).collect();
        level.attempts += candidates.len();
        let solved: Vec<Option<D::State>> =
            seeds.par_iter().map(|s| dynamics.solve(s, d, params.tol)).collect();
        level.attempts += seeds.len();
        candidates.extend(solved);
        let mut this_period: Vec<Vec<D::State>> = Vec::new();
        for x in candidates.into_iter().flatten() {
            let Some(traj) = trajectory(dynamics, &x, d) else {
                level.escaped += 1;
                continue;
            };
            if dynamics.distance(&traj[d], &traj[0]) > params.tol {
                continue;
            }
            level.converged += 1;
            if (1..d).any(|k| dynamics.distance(&traj[k], &traj[0]) <= params.radius) {
                level.non_minimal += 1;
                continue;
            }
            let pts: Vec<D::State> = traj[..d].to_vec();
            let simple = (0..d).all(|i| (i + 1..d).all(|j| dynamics.distance(&pts[i], &pts[j]) > params.radius));
            if !simple {
                level.not_simple += 1;
                continue;
            }
            let pts = canonical_rotation(dynamics, pts);
            if this_period.iter().any(|o| same_orbit(dynamics, o, &pts, params.radius)) {
                level.duplicates += 1;
                continue;
            }
            level.accepted += 1;
            this_period.push(pts);
        }
        this_period.sort_by(|a, b| dynamics.order(&a[0], &b[0]));
        accepted.extend(this_period);
        stats.absorb(&level);
        per_period.push(level);
    }
    SearchOutcome { orbits: accepted, stats, per_period }
}
