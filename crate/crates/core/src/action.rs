//! Action functions, mean actions and the Calabi invariant.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{area_integrate, IntegrationOptions, Point, Surface, SurfaceKind};
use crate::homology::{default_basis, CycleSpec};
use crate::linalg::Vec2;
use crate::maps::{OneForm, SurfaceMap};
use crate::orbits::{voronoi_masses, CircleMap, PeriodicOrbit, RotationNumber};
use crate::quadrature::{adaptive_simpson, integrate_1d};

/// Largest tolerated cycle integral of `φ*β − β`.
pub const EXACTNESS_TOL: f64 = 1e-7;
/// Random closed triangles checked for path independence.
pub const EXACTNESS_LOOPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionOptions {
    /// Tolerance of each path integral.
    pub path_tol: f64,
    /// Denominator bound of the boundary rotation-number search.
    pub boundary_q_max: usize,
    /// Longest Cesàro average on the boundary.
    pub boundary_n_max: usize,
    /// Target agreement of successive boundary estimates.
    pub boundary_tol: f64,
    pub seed: u64,
}

impl Default for ActionOptions {
    fn default() -> Self {
        ActionOptions { path_tol: 1e-13, boundary_q_max: 64, boundary_n_max: 1_000_000, boundary_tol: 1e-9, seed: 0 }
    }
}

/// How the boundary constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMean {
    pub rotation: RotationNumber,
    /// Length of the boundary cycle under the boundary permutation.
    pub power: usize,
    /// Number of `φ`-iterates averaged.
    pub iterates: usize,
    pub value: f64,
    /// Change between the last two estimates (0 for a periodic boundary orbit).
    pub fluctuation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    /// `∫_c (φ*β − β)` over the homology basis.
    pub basis: Vec<(String, f64)>,
    /// Largest loop integral over the random triangles.
    pub loops: f64,
    pub defect: f64,
}

/// `f = f_raw − boundary mean`, with `d f_raw = φ*β − β`.
#[derive(Clone)]
pub struct ActionProfile {
    map: Arc<SurfaceMap>,
    beta: OneForm,
    gamma: usize,
    basepoint: Point,
    opts: ActionOptions,
    pub boundary: BoundaryMean,
    pub exactness: ExactnessReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSummary {
    pub map: String,
    pub primitive: String,
    pub gamma: usize,
    pub basepoint: Point,
    pub boundary: BoundaryMean,
    pub exactness: ExactnessReport,
}

impl std::fmt::Debug for ActionProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.summary())
    }
}

/// Builds the normalized action of `map` for the primitive `beta` and the
/// boundary circle `gamma`, integrating from `basepoint` (default: the disk
/// center or the annulus point `(w/2, 0)`).
pub fn build_action(
    map: &Arc<SurfaceMap>,
    beta: &OneForm,
    gamma: usize,
    basepoint: Option<Point>,
    opts: ActionOptions,
) -> Result<ActionProfile> {
    let surface = map.surface().clone();
    if surface.kind() == SurfaceKind::Capped {
        return Err(Error::InvalidInput("actions are defined on the base surface".into()));
    }
    if gamma >= surface.boundary_circles().len() {
        return Err(Error::InvalidInput(format!("no boundary circle {gamma}")));
    }
    let defect = beta.primitive_defect(&surface, 256, opts.seed);
    if defect > 1e-8 {
        return Err(Error::NotAPrimitive { defect });
    }
    let basepoint = match basepoint {
        Some(p) => surface.canonical(&p)?,
        None => match surface.annulus_width() {
            Some(w) => Point::base(0.5 * w, 0.0),
            None => Point::base(0.0, 0.0),
        },
    };
    let mut profile = ActionProfile {
        map: map.clone(),
        beta: beta.clone(),
        gamma,
        basepoint,
        opts,
        boundary: BoundaryMean {
            rotation: RotationNumber::Rational { p: 0, q: 1, t: 0.0 },
            power: 1,
            iterates: 0,
            value: 0.0,
            fluctuation: 0.0,
        },
        exactness: ExactnessReport { basis: Vec::new(), loops: 0.0, defect: 0.0 },
    };
    profile.exactness = profile.check_exactness()?;
    profile.boundary = profile.boundary_mean(|p| profile.f_raw(p))?;
    Ok(profile)
}

impl ActionProfile {
    pub fn map(&self) -> &Arc<SurfaceMap> {
        &self.map
    }

    pub fn surface(&self) -> &Arc<Surface> {
        self.map.surface()
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn summary(&self) -> ActionSummary {
        ActionSummary {
            map: self.map.label().to_string(),
            primitive: self.beta.label().to_string(),
            gamma: self.gamma,
            basepoint: self.basepoint,
            boundary: self.boundary,
            exactness: self.exactness.clone(),
        }
    }

    /// `(φ*β − β)_z(w)` in base-chart coordinates.
    pub fn form_difference(&self, z: Vec2, w: Vec2) -> Result<f64> {
        let (q, d) = self.map.apply_with_derivative(&Point::base(z[0], z[1]))?;
        Ok(self.beta.pair(q.u, q.v, d * w) - self.beta.pair(z[0], z[1], w))
    }

    fn segment_integral(&self, a: Vec2, b: Vec2) -> Result<f64> {
        let w = b - a;
        if w.norm() == 0.0 {
            return Ok(0.0);
        }
        let g = |tau: f64| self.form_difference(a + tau * w, w);
        Ok(adaptive_simpson(&g, 0.0, 1.0, self.opts.path_tol, 40)?.value)
    }

    /// `∫ (φ*β − β)` along the straight chart path from the basepoint to `p`.
    pub fn f_raw(&self, p: &Point) -> Result<f64> {
        let surface = self.surface();
        let p = surface.canonical(p)?;
        let (p, _) = surface
            .transition(&p, self.basepoint.chart)
            .ok_or(Error::OutsideDomain { u: p.u, v: p.v })?;
        let d = surface.difference(&p, &self.basepoint).ok_or(Error::OutsideDomain { u: p.u, v: p.v })?;
        let a = self.basepoint.coords();
        self.segment_integral(a, a + d)
    }

    /// The normalized action.
    pub fn f(&self, p: &Point) -> Result<f64> {
        Ok(self.f_raw(p)? - self.boundary.value)
    }

    fn check_exactness(&self) -> Result<ExactnessReport> {
        let surface = self.surface().clone();
        let mut basis = Vec::new();
        let mut defect = 0.0f64;
        for cycle in default_basis(&surface)? {
            let integral = self.cycle_integral(&cycle)?;
            if integral.abs() > EXACTNESS_TOL {
                return Err(Error::NonExact { cycle: cycle.id.clone(), integral });
            }
            defect = defect.max(integral.abs());
            basis.push((cycle.id.clone(), integral));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed ^ 0x5eed);
        let triangles: Vec<[Point; 3]> = (0..EXACTNESS_LOOPS)
            .map(|_| std::array::from_fn(|_| surface.sample_uniform(&mut rng)))
            .collect();
        let loops: Vec<Result<f64>> = triangles
            .par_iter()
            .map(|tri| {
                let a = tri[0].coords();
                let b = a + surface.difference(&tri[1], &tri[0]).expect("base points");
                let c = a + surface.difference(&tri[2], &tri[0]).expect("base points");
                Ok(self.segment_integral(a, b)? + self.segment_integral(b, c)? + self.segment_integral(c, a)?)
            })
            .collect();
        let mut worst = 0.0f64;
        for (k, l) in loops.into_iter().enumerate() {
            let l = l?;
            if l.abs() > EXACTNESS_TOL {
                return Err(Error::NonExact { cycle: format!("triangle-{k}"), integral: l });
            }
            worst = worst.max(l.abs());
        }
        Ok(ExactnessReport { basis, loops: worst, defect: defect.max(worst) })
    }

    /// `∫_c (φ*β − β)`.
    pub fn cycle_integral(&self, cycle: &CycleSpec) -> Result<f64> {
        let surface = self.surface();
        let mut total = 0.0;
        for piece in &cycle.pieces {
            let g = |tau: f64| -> Result<f64> {
                let (z, dz) = cycle.eval(surface, piece, tau)?;
                self.form_difference(z, dz)
            };
            total += integrate_1d(g, 0.0, 1.0, 1e-12, 8)?.value;
        }
        Ok(total)
    }

    /// Ergodic average of `g` on `γ`: over a periodic boundary orbit when the
    /// rotation number is rational, otherwise a Cesàro average with doubling.
    pub fn boundary_mean<G>(&self, g: G) -> Result<BoundaryMean>
    where
        G: Fn(&Point) -> Result<f64> + Sync,
    {
        let surface = self.surface();
        let cm = CircleMap::new(&self.map, self.gamma, 256)?;
        let power = cm.power();
        let rotation = cm.rotation_number(self.opts.boundary_q_max, 1 << 14, 1e-10)?;
        match rotation {
            RotationNumber::Rational { q, t, .. } => {
                let n = power * q;
                let start = surface.collar_point(self.gamma, 0.0, t)?;
                let pts = orbit_points(&self.map, &start, n)?;
                let vals = pts.par_iter().map(&g).collect::<Vec<_>>();
                let mut sum = 0.0;
                for v in vals {
                    sum += v?;
                }
                Ok(BoundaryMean { rotation, power, iterates: n, value: sum / n as f64, fluctuation: 0.0 })
            }
            RotationNumber::Irrational { .. } => {
                let start = surface.collar_point(self.gamma, 0.0, 0.0)?;
                let mut x = start;
                let mut n = 0usize;
                let mut sum = 0.0;
                // Σ_k A_k with A_k the k-term Birkhoff average
                let mut cesaro = 0.0;
                let mut target = 1024usize.min(self.opts.boundary_n_max);
                let mut prev = f64::NAN;
                loop {
                    let chunk = target - n;
                    let pts = orbit_points(&self.map, &x, chunk + 1)?;
                    x = pts[chunk];
                    let vals = pts[..chunk].par_iter().map(&g).collect::<Vec<_>>();
                    for v in vals {
                        sum += v?;
                        n += 1;
                        cesaro += sum / n as f64;
                    }
                    let est = cesaro / n as f64;
                    let fluct = (est - prev).abs();
                    if fluct < self.opts.boundary_tol || n >= self.opts.boundary_n_max {
                        let fluctuation = if fluct.is_nan() { f64::INFINITY } else { fluct };
                        if fluctuation > EXACTNESS_TOL {
                            return Err(Error::BirkhoffNonConvergence { fluctuation, iterates: n });
                        }
                        return Ok(BoundaryMean { rotation, power, iterates: n, value: est, fluctuation });
                    }
                    prev = est;
                    target = (2 * target).min(self.opts.boundary_n_max);
                }
            }
        }
    }

    /// Largest `|f_raw(x + h e_i) − f_raw(x − h e_i)|/2h − (φ*β − β)(e_i)|`
    /// at `n` random interior points.
    pub fn primitive_check(&self, n: usize, h: f64, seed: u64) -> Result<f64> {
        let surface = self.surface();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut done = 0;
        while done < n {
            let p = surface.sample_uniform(&mut rng);
            let z = p.coords();
            let pts = [z + Vec2::new(h, 0.0), z - Vec2::new(h, 0.0), z + Vec2::new(0.0, h), z - Vec2::new(0.0, h)];
            if !pts.iter().all(|q| surface.contains(&Point::base(q[0], q[1])) && surface.canonical(&Point::base(q[0], q[1])).is_ok()) {
                continue;
            }
            let f: Vec<f64> = pts.iter().map(|q| self.f_raw(&Point::base(q[0], q[1]))).collect::<Result<_>>()?;
            for (k, e) in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)].into_iter().enumerate() {
                let fd = (f[2 * k] - f[2 * k + 1]) / (2.0 * h);
                worst = worst.max((fd - self.form_difference(z, e)?).abs());
            }
            done += 1;
        }
        Ok(worst)
    }
}

fn orbit_points(map: &SurfaceMap, start: &Point, n: usize) -> Result<Vec<Point>> {
    let mut pts = Vec::with_capacity(n);
    let mut x = *start;
    for _ in 0..n {
        pts.push(x);
        x = map.apply(&x)?;
    }
    Ok(pts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffEstimate {
    pub estimate: f64,
    /// Largest deviation of the partial averages over the last quarter.
    pub fluctuation: f64,
    pub iterates: usize,
    /// The orbit left the domain before `n_max` iterates.
    pub truncated: bool,
}

/// `(1/n) Σ_{k<n} f(φ^k x)` (or the Cesàro mean of the partial averages).
pub fn birkhoff_mean<F>(map: &SurfaceMap, f: F, x: &Point, n_max: usize, cesaro: bool) -> Result<BirkhoffEstimate>
where
    F: Fn(&Point) -> Result<f64>,
{
    let n_max = n_max.max(1);
    let mut partial = Vec::with_capacity(n_max);
    let mut sum = 0.0;
    let mut y = map.surface().canonical(x)?;
    let mut truncated = false;
    for k in 0..n_max {
        sum += f(&y)?;
        partial.push(sum / (k + 1) as f64);
        if k + 1 < n_max {
            match map.apply(&y) {
                Ok(z) => y = z,
                Err(e) if e.is_numerical() || matches!(e, Error::OutsideDomain { .. }) => {
                    truncated = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    let n = partial.len();
    if n == 0 {
        return Err(Error::OrbitEscape { iterates: 0 });
    }
    let estimate = if cesaro { partial.iter().sum::<f64>() / n as f64 } else { partial[n - 1] };
    let tail = &partial[n - n.div_ceil(4)..];
    let fluctuation = tail.iter().map(|a| (a - estimate).abs()).fold(0.0, f64::max);
    Ok(BirkhoffEstimate { estimate, fluctuation, iterates: n, truncated })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub estimate: f64,
    /// 95% confidence half-width.
    pub half_width: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalabiReport {
    pub cal: f64,
    pub quadrature_tolerance: f64,
    pub quadrature_converged: bool,
    pub monte_carlo: MonteCarlo,
    pub total_area: f64,
}

/// `Cal = (∫ω)^{-1} ∫ f ω` by quadrature, with a Monte Carlo cross-check.
pub fn calabi(profile: &ActionProfile, opts: IntegrationOptions, mc_samples: usize, seed: u64) -> Result<CalabiReport> {
    let surface = profile.surface();
    let area = surface.total_area();
    let est = area_integrate(surface, &|p: &Point| profile.f(p), opts)?;
    if !est.converged {
        return Err(Error::QuadratureNonConvergence { achieved: est.achieved_tolerance });
    }
    let monte_carlo = monte_carlo(surface, |p| profile.f(p), mc_samples, seed)?;
    Ok(CalabiReport {
        cal: est.value / area,
        quadrature_tolerance: est.achieved_tolerance / area,
        quadrature_converged: est.converged,
        monte_carlo,
        total_area: area,
    })
}

/// Mean of `g` at uniform samples of the normalized area measure.
pub fn monte_carlo<G>(surface: &Surface, g: G, samples: usize, seed: u64) -> Result<MonteCarlo>
where
    G: Fn(&Point) -> Result<f64> + Sync,
{
    let samples = samples.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point> = (0..samples).map(|_| surface.sample_uniform(&mut rng)).collect();
    let vals: Vec<f64> = pts.par_iter().map(&g).collect::<Result<_>>()?;
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonteCarlo { estimate: mean, half_width: 1.96 * (var / n).sqrt(), samples })
}

/// Monte Carlo estimate of `(∫ω)^{-1} ∫ f^∞ ω` from `iterates`-step Birkhoff
/// averages at random points.
pub fn asymptotic_mean_integral(profile: &ActionProfile, samples: usize, iterates: usize, seed: u64) -> Result<MonteCarlo> {
    let map = profile.map().clone();
    monte_carlo(profile.surface(), |p| Ok(birkhoff_mean(&map, |q| profile.f(q), p, iterates, false)?.estimate), samples, seed)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanActionRecord {
    pub orbit_id: usize,
    pub period: usize,
    /// `S(f)/|S|`.
    pub mean_action: f64,
    /// `d`-step Birkhoff average from the first point.
    pub birkhoff: f64,
    /// Largest spread of the `d`-step averages over the orbit's points.
    pub spread: f64,
}

pub fn mean_actions(profile: &ActionProfile, orbits: &[PeriodicOrbit]) -> Result<Vec<MeanActionRecord>> {
    orbits
        .par_iter()
        .map(|o| {
            let d = o.points.len();
            let vals: Vec<f64> = o.points.iter().map(|p| profile.f(p)).collect::<Result<_>>()?;
            let mean = vals.iter().sum::<f64>() / d as f64;
            let mut spread = 0.0f64;
            let mut first = f64::NAN;
            for (i, p) in o.points.iter().enumerate() {
                let b = birkhoff_mean(profile.map(), |q| profile.f(q), p, d, false)?.estimate;
                if i == 0 {
                    first = b;
                }
                spread = spread.max((b - mean).abs());
            }
            Ok(MeanActionRecord { orbit_id: o.id, period: d, mean_action: mean, birkhoff: first, spread })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CensusVerdict {
    HoldsOnCensus,
    /// Orbits are missing from the census; not a counterexample.
    FailsOnCensus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub cal: f64,
    pub min_mean_action: f64,
    pub max_mean_action: f64,
    /// `min − Cal` (≤ 0 when the inf side holds).
    pub inf_gap: f64,
    /// `max − Cal` (≥ 0 when the sup side holds).
    pub sup_gap: f64,
    pub inf_side: CensusVerdict,
    pub sup_side: CensusVerdict,
    pub verdict: CensusVerdict,
    pub census_size: usize,
}

/// `inf S(f)/|S| ≤ Cal ≤ sup S(f)/|S|` over the census, up to `tol`.
pub fn inequality_check(cal: f64, records: &[MeanActionRecord], tol: f64) -> Result<InequalityReport> {
    if records.is_empty() {
        return Err(Error::EmptyCensus("no orbits in the census".into()));
    }
    let min = records.iter().map(|r| r.mean_action).fold(f64::INFINITY, f64::min);
    let max = records.iter().map(|r| r.mean_action).fold(f64::NEG_INFINITY, f64::max);
    let side = |ok: bool| if ok { CensusVerdict::HoldsOnCensus } else { CensusVerdict::FailsOnCensus };
    let inf_side = side(min <= cal + tol);
    let sup_side = side(max >= cal - tol);
    let verdict = side(inf_side == CensusVerdict::HoldsOnCensus && sup_side == CensusVerdict::HoldsOnCensus);
    Ok(InequalityReport {
        cal,
        min_mean_action: min,
        max_mean_action: max,
        inf_gap: min - cal,
        sup_gap: max - cal,
        inf_side,
        sup_side,
        verdict,
        census_size: records.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub epsilon: f64,
    pub cal: f64,
    /// Weighted fraction of census points in `P_ε^+`.
    pub p_plus: f64,
    /// Weighted fraction of census points in `P_ε^-`.
    pub p_minus: f64,
    pub points: usize,
    /// Always "voronoi-heuristic": cell masses of the census points, not the
    /// measure of the closures.
    pub weighting: String,
}

/// `P_ε^±` membership of census points, with the `Cal < 0` case handled
/// separately: for `Cal ≥ 0`, `P⁺: f^∞ ≥ (1−ε)Cal` and `P⁻: f^∞ ≤ (1+ε)Cal`;
/// for `Cal < 0`, `P⁺: f^∞ ≤ (1−ε)Cal` and `P⁻: f^∞ ≥ (1+ε)Cal`.
pub fn p_epsilon_census(
    surface: &Surface,
    cal: f64,
    orbits: &[PeriodicOrbit],
    records: &[MeanActionRecord],
    epsilon: f64,
    samples: usize,
    seed: u64,
) -> Result<CensusReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    if orbits.is_empty() || orbits.len() != records.len() {
        return Err(Error::EmptyCensus("census needs one record per orbit".into()));
    }
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (o, r) in orbits.iter().zip(records) {
        for p in &o.points {
            points.push(*p);
            values.push(r.mean_action);
        }
    }
    let weights = voronoi_masses(surface, &points, samples, seed)?;
    let total: f64 = weights.iter().sum();
    let (lo, hi) = ((1.0 - epsilon) * cal, (1.0 + epsilon) * cal);
    let (mut plus, mut minus) = (0.0, 0.0);
    for (w, v) in weights.iter().zip(&values) {
        let (in_plus, in_minus) = if cal >= 0.0 { (*v >= lo, *v <= hi) } else { (*v <= lo, *v >= hi) };
        if in_plus {
            plus += w;
        }
        if in_minus {
            minus += w;
        }
    }
    Ok(CensusReport {
        epsilon,
        cal,
        p_plus: plus / total,
        p_minus: minus / total,
        points: points.len(),
        weighting: "voronoi-heuristic".into(),
    })
}
