//! Equidistribution defects of orbit sets and restriction to the base surface.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{area_integrate, smoothstep, ChartId, IntegrationOptions, Point, Surface};
use crate::maps::SurfaceMap;
use crate::quadrature::integrate_rect;
use crate::orbits::{find_orbits, orbit_functional, voronoi_masses, OrbitSet, SearchConfig};

/// Largest tolerated variation of a dictionary function along a circle of `L`.
pub const LOCALITY_TOL: f64 = 1e-10;
/// Cap points this close to `L` (in area units) count as points of `Z`.
pub const RESTRICTION_TOL: f64 = 1e-9;

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Test functions `f₁ ≡ 1, f₂, …, f_N`, locally constant on `L`, with their
/// area averages.
#[derive(Clone)]
pub struct TestDictionary {
    names: Vec<String>,
    functions: Vec<ScalarField>,
    averages: Vec<f64>,
    locality_defect: f64,
}

impl std::fmt::Debug for TestDictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestDictionary")
            .field("names", &self.names)
            .field("averages", &self.averages)
            .field("locality_defect", &self.locality_defect)
            .finish()
    }
}

/// Global coordinates of a point of `Z` (disk: `(x, y)`; annulus: `(s/w, t)`)
/// and its depth into the nearest collar; `None` on caps.
fn base_data(surface: &Surface, p: &Point) -> Option<(f64, f64, f64)> {
    let p = surface.canonical(p).ok()?;
    if p.chart != ChartId::Base {
        return None;
    }
    let depth = surface.nearest_collar(&p).map_or(f64::INFINITY, |(_, c)| c[0]);
    match surface.annulus_width() {
        Some(w) => Some((p.u / w, p.v, depth)),
        None => Some((p.u, p.v, depth)),
    }
}

impl TestDictionary {
    /// `f₁ ≡ 1` followed by `N − 1` products of a cutoff vanishing within
    /// 10% of the collar width of `∂Z` and a polynomial (disk: monomials
    /// `x^a y^b`; annulus: `(s/w)^j` times a Fourier mode in `t`), ordered by
    /// degree. All are 0 on the caps of a capped surface.
    pub fn standard(surface: &Arc<Surface>, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidInput("dictionary needs at least f₁".into()));
        }
        let base = surface.base_surface().clone();
        let eta = 0.1 * base.collar_width();
        let annulus = base.annulus_width().is_some();
        let mut named: Vec<(String, ScalarField)> = Vec::new();
        let mut degree = 1;
        while named.len() + 1 < size {
            for b in 0..=degree {
                if named.len() + 1 >= size {
                    break;
                }
                let a = degree - b;
                let (name, poly): (String, Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>) = if annulus {
                    let (j, k): (i32, usize) = (a as i32, b);
                    let m = k.div_ceil(2) as f64;
                    let name = match k {
                        0 => format!("chi*s^{j}"),
                        k if k % 2 == 1 => format!("chi*s^{j}*cos({m}*2pi*t)"),
                        _ => format!("chi*s^{j}*sin({m}*2pi*t)"),
                    };
                    let f = move |s: f64, t: f64| {
                        let trig = match k {
                            0 => 1.0,
                            k if k % 2 == 1 => (2.0 * std::f64::consts::PI * m * t).cos(),
                            _ => (2.0 * std::f64::consts::PI * m * t).sin(),
                        };
                        s.powi(j) * trig
                    };
                    (name, Arc::new(f))
                } else {
                    let (ia, ib) = (a as i32, b as i32);
                    (format!("chi*x^{a}*y^{b}"), Arc::new(move |x: f64, y: f64| x.powi(ia) * y.powi(ib)))
                };
                let surf = surface.clone();
                let field: ScalarField = Arc::new(move |p: &Point| match base_data(&surf, p) {
                    Some((u, v, depth)) => smoothstep((depth - eta) / eta) * poly(u, v),
                    None => 0.0,
                });
                named.push((name, field));
            }
            degree += 1;
        }
        // the cutoff is only C², so integrate radially piecewise between its breakpoints
        let area = base.total_area();
        type Radial = Box<dyn Fn(f64, f64) -> Point + Sync>;
        let (radial, breaks): (Radial, Vec<f64>) = match base.annulus_width() {
            Some(w) => (Box::new(Point::base), vec![0.0, eta, 2.0 * eta, w - 2.0 * eta, w - eta, w]),
            None => {
                let r = |depth: f64| (1.0 - depth / area).sqrt();
                (
                    Box::new(|rho: f64, tau: f64| {
                        let (sn, cs) = (2.0 * std::f64::consts::PI * tau).sin_cos();
                        Point::base(rho * cs, rho * sn)
                    }),
                    vec![0.0, r(2.0 * eta), r(eta), 1.0],
                )
            }
        };
        let element = |rho: f64| if base.annulus_width().is_some() { 1.0 } else { 2.0 * area * rho };
        let integral = |f: &ScalarField| -> Result<f64> {
            let mut total = 0.0;
            for w in breaks.windows(2) {
                let g = |rho: f64, tau: f64| -> Result<f64> { Ok(element(rho) * f(&radial(rho, tau))) };
                total += integrate_rect(&g, (w[0], w[1]), (0.0, 1.0), 1e-12, 6)?.value;
            }
            Ok(total / surface.total_area())
        };
        let averages = named.iter().map(|(_, f)| integral(f)).collect::<Result<Vec<_>>>()?;
        Self::build(surface, named, Some(averages))
    }

    /// `f₁ ≡ 1` followed by user functions; rejects functions that are not
    /// locally constant on `L`.
    pub fn custom(surface: &Arc<Surface>, functions: Vec<(String, ScalarField)>) -> Result<Self> {
        Self::build(surface, functions, None)
    }

    fn build(surface: &Arc<Surface>, rest: Vec<(String, ScalarField)>, known: Option<Vec<f64>>) -> Result<Self> {
        let one: ScalarField = Arc::new(|_| 1.0);
        let mut names = vec!["1".to_string()];
        let mut functions = vec![one];
        for (n, f) in rest {
            names.push(n);
            functions.push(f);
        }
        let locality_defect = locality_defect(surface, &functions)?;
        if locality_defect > LOCALITY_TOL {
            return Err(Error::InvalidInput(format!(
                "dictionary is not locally constant on the circles (defect {locality_defect:e})"
            )));
        }
        let mut averages = vec![1.0];
        match known {
            Some(a) => averages.extend(a),
            None => {
                let area = surface.total_area();
                for f in &functions[1..] {
                    let est = area_integrate(surface, &|p: &Point| Ok(f(p)), IntegrationOptions::default())?;
                    averages.push(est.value / area);
                }
            }
        }
        Ok(TestDictionary { names, functions, averages, locality_defect })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn averages(&self) -> &[f64] {
        &self.averages
    }

    pub fn locality_defect(&self) -> f64 {
        self.locality_defect
    }

    pub fn eval(&self, i: usize, p: &Point) -> f64 {
        (self.functions[i])(p)
    }
}

/// Largest variation along each circle of `L` over 64 samples.
fn locality_defect(surface: &Surface, functions: &[ScalarField]) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..surface.lagrangian_circles().len() {
        let pts: Vec<Point> = (0..64).map(|k| surface.collar_point(i, 0.0, k as f64 / 64.0)).collect::<Result<_>>()?;
        for f in functions {
            let vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(hi - lo);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub set_id: String,
    pub names: Vec<String>,
    /// `|O(f_i)/|O| − (∫ω)^{-1}∫f_i ω|`.
    pub defects: Vec<f64>,
    pub max_defect: f64,
}

pub fn equidistribution_defect(set_id: &str, set: &OrbitSet, dict: &TestDictionary) -> Result<DefectReport> {
    let size = set.size();
    if set.terms.is_empty() || size <= 0.0 {
        return Err(Error::EmptyOrbitSet(format!("{set_id} has |O| = 0")));
    }
    let defects: Vec<f64> = (0..dict.len())
        .into_par_iter()
        .map(|i| (orbit_functional(set, |p| dict.eval(i, p)) / size - dict.averages[i]).abs())
        .collect();
    let max_defect = defects.iter().cloned().fold(0.0, f64::max);
    Ok(DefectReport { set_id: set_id.to_string(), names: dict.names.clone(), defects, max_defect })
}

/// `O^Z`: the terms of `set` whose orbits lie in `Z`. The result may be
/// empty, in which case averages fail with [`Error::EmptyOrbitSet`].
pub fn restrict_orbit_set(set: &OrbitSet, surface: &Surface) -> Result<OrbitSet> {
    if surface.capping().is_none() {
        return Ok(set.clone());
    }
    let in_z = |p: &Point| -> Result<bool> {
        let q = surface.canonical(p)?;
        Ok(surface.cap_depth(&q).is_none_or(|d| d <= RESTRICTION_TOL))
    };
    let mut terms = Vec::new();
    for (a, o) in &set.terms {
        let flags: Vec<bool> = o.points.iter().map(in_z).collect::<Result<_>>()?;
        if flags.iter().all(|&f| f) {
            terms.push((*a, o.clone()));
        } else if flags.iter().any(|&f| f) {
            return Err(Error::StraddlingOrbit(format!(
                "orbit {} has {} of {} points in the caps",
                o.id,
                flags.iter().filter(|f| !**f).count(),
                flags.len()
            )));
        }
    }
    Ok(OrbitSet { terms })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    /// `a_k` = Voronoi mass of `S_k` divided by `|S_k|` (heuristic).
    Area,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub max_period: usize,
    pub orbits: usize,
    pub size: f64,
    pub report: Option<DefectReport>,
    pub note: Option<String>,
}

/// For each `d` in the schedule, the orbit set of all found orbits of period
/// at most `d` under the chosen weighting, with its defects.
pub fn defect_sequence_experiment(
    map: &SurfaceMap,
    dict: &TestDictionary,
    schedule: &[usize],
    weighting: Weighting,
    search: &SearchConfig,
    seed: u64,
) -> Result<Vec<LevelReport>> {
    if schedule.is_empty() {
        return Err(Error::InvalidInput("empty period schedule".into()));
    }
    let d_max = *schedule.iter().max().expect("nonempty");
    let cfg = SearchConfig { max_period: d_max, ..*search };
    let found = find_orbits(map, &cfg)?;
    let surface = map.surface();
    let mut out = Vec::with_capacity(schedule.len());
    for &d in schedule {
        let orbits: Vec<_> = found.orbits.iter().filter(|o| o.period <= d).cloned().collect();
        if orbits.is_empty() {
            out.push(LevelReport { max_period: d, orbits: 0, size: 0.0, report: None, note: Some("no orbits found".into()) });
            continue;
        }
        let coefficients: Vec<f64> = match weighting {
            Weighting::Uniform => vec![1.0; orbits.len()],
            Weighting::Area => {
                let samples = 20_000;
                let pts: Vec<Point> = orbits.iter().flat_map(|o| o.points.iter().copied()).collect();
                let masses = voronoi_masses(surface, &pts, samples, seed)?;
                let mut k = 0;
                orbits
                    .iter()
                    .map(|o| {
                        let m: f64 = masses[k..k + o.period].iter().sum();
                        k += o.period;
                        // floor of half a sample keeps every coefficient positive
                        m.max(0.5 / samples as f64) / o.period as f64
                    })
                    .collect()
            }
        };
        let set = OrbitSet::new(surface, coefficients.into_iter().zip(orbits).collect())?;
        let report = equidistribution_defect(&format!("period<={d}"), &set, dict)?;
        out.push(LevelReport { max_period: d, orbits: set.terms.len(), size: set.size(), report: Some(report), note: None });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cap_surface;
    use crate::maps::{annulus_twist, extend_boundary_rotation, rigid_rotation};
    use crate::orbits::{classify_nondegeneracy, PeriodicOrbit};
    use std::f64::consts::PI;

    #[test]
    fn standard_dictionaries() {
        let disk = Surface::disk(1.0).unwrap();
        let ann = Surface::annulus(1.0).unwrap();
        for s in [&disk, &ann] {
            for n in [1, 5, 10, 20] {
                let d = TestDictionary::standard(s, n).unwrap();
                assert_eq!(d.len(), n);
                assert_eq!(d.locality_defect(), 0.0);
                assert_eq!(d.averages()[0], 1.0);
            }
        }
        // oracle: χ·x has zero mean by symmetry
        let d = TestDictionary::standard(&disk, 5).unwrap();
        assert!(d.averages()[1].abs() < 1e-12 && d.averages()[2].abs() < 1e-12);
        assert!(d.averages()[3] > 0.0);
        // dual route: generic partition-of-unity quadrature
        for s in [&disk, &ann] {
            let d = TestDictionary::standard(s, 6).unwrap();
            for i in 1..6 {
                let est = area_integrate(s, &|p: &Point| Ok(d.eval(i, p)), IntegrationOptions { tol: 1e-7, max_level: 5 }).unwrap();
                assert!((est.value / s.total_area() - d.averages()[i]).abs() < 1e-6, "{i}");
            }
        }
    }

    #[test]
    fn rational_rotation_double_sum() {
        let ann = Surface::annulus(1.0).unwrap();
        let (p, q, m) = (1usize, 3usize, 4usize);
        let map = annulus_twist(&ann, &[p as f64 / q as f64]).unwrap();
        let f: ScalarField = Arc::new(move |x: &Point| (2.0 * PI * x.u).sin() * (2.0 * PI * q as f64 * x.v).sin());
        let dict = TestDictionary::custom(&ann, vec![("sin sin".into(), f.clone())]).unwrap();
        assert!(dict.averages()[1].abs() < 1e-12);
        let t0 = 0.05;
        let mut orbits = Vec::new();
        for j in 0..m {
            let s = (j as f64 + 0.5) / m as f64;
            let pts = (0..q).map(|k| map.iterate(&Point::base(s, t0), k).unwrap()).collect();
            orbits.push(classify_nondegeneracy(&PeriodicOrbit::from_points(pts), &map).unwrap());
        }
        let set = OrbitSet::uniform(&ann, &orbits).unwrap();
        let rep = equidistribution_defect("rot", &set, &dict).unwrap();
        // direct double sum
        let mut sum = 0.0;
        for j in 0..m {
            for k in 0..q {
                let s = (j as f64 + 0.5) / m as f64;
                let t = t0 + k as f64 / q as f64;
                sum += (2.0 * PI * s).sin() * (2.0 * PI * q as f64 * t).sin();
            }
        }
        assert!((rep.defects[1] - (sum / (q * m) as f64).abs()).abs() < 1e-12);
        assert_eq!(rep.defects[0], 0.0);
        // scale invariance
        let scaled = OrbitSet::new(&ann, set.terms.iter().map(|(a, o)| (3.5 * a, o.clone())).collect()).unwrap();
        assert!((equidistribution_defect("s", &scaled, &dict).unwrap().max_defect - rep.max_defect).abs() < 1e-14);
    }

    #[test]
    fn rejects_functions_not_constant_on_circles() {
        let ann = Surface::annulus(1.0).unwrap();
        let f: ScalarField = Arc::new(|p: &Point| (2.0 * PI * p.v).cos());
        assert!(TestDictionary::custom(&ann, vec![("cos".into(), f)]).is_err());
    }

    #[test]
    fn restriction_to_the_base() {
        let disk = Surface::disk(1.0).unwrap();
        let capped = cap_surface(&disk, 2.0, 0.1).unwrap();
        let ext = extend_boundary_rotation(&Arc::new(rigid_rotation(&disk, 0.25).unwrap()), &capped).unwrap();
        let cfg = SearchConfig { max_period: 4, grid: 5, ..Default::default() };
        let found = find_orbits(&ext, &cfg).unwrap();
        let set = OrbitSet::uniform(&capped, &found.orbits).unwrap();
        let z = restrict_orbit_set(&set, &capped).unwrap();
        let cap_center = found.orbits.iter().any(|o| o.points[0].chart == ChartId::Cap(0) && o.points[0].coords().norm() < 1e-12);
        assert!(cap_center);
        // brute-force membership oracle
        let keep: Vec<usize> = found
            .orbits
            .iter()
            .filter(|o| o.points.iter().all(|p| capped.in_base(p)))
            .map(|o| o.id)
            .collect();
        assert_eq!(z.terms.iter().map(|(_, o)| o.id).collect::<Vec<_>>(), keep);
        assert!(z.terms.iter().any(|(_, o)| o.boundary_circle.is_some()));
        let f = |p: &Point| p.u - 2.0 * p.v;
        let brute: f64 = found.orbits.iter().filter(|o| keep.contains(&o.id)).map(|o| o.sum(f)).sum();
        assert!((orbit_functional(&z, f) - brute).abs() < 1e-14);
        // all in caps: the average is guarded
        let caps: Vec<_> = found.orbits.iter().filter(|o| !keep.contains(&o.id)).cloned().collect();
        let only_caps = restrict_orbit_set(&OrbitSet::uniform(&capped, &caps).unwrap(), &capped).unwrap();
        assert!(matches!(only_caps.average(|_| 1.0), Err(Error::EmptyOrbitSet(_))));
    }

    #[test]
    fn straddling_orbits_are_reported() {
        let disk = Surface::disk(1.0).unwrap();
        let capped = cap_surface(&disk, 2.0, 0.1).unwrap();
        let o = PeriodicOrbit::from_points(vec![Point::base(0.0, 0.0), Point::new(ChartId::Cap(0), 0.0, 0.0)]);
        let set = OrbitSet { terms: vec![(1.0, o)] };
        assert!(matches!(restrict_orbit_set(&set, &capped), Err(Error::StraddlingOrbit(_))));
    }

    #[test]
    fn experiment_levels() {
        let ann = Surface::annulus(1.0).unwrap();
        let map = annulus_twist(&ann, &[0.0, 1.0]).unwrap();
        let dict = TestDictionary::standard(&ann, 1).unwrap();
        let cfg = SearchConfig { grid: 4, ..Default::default() };
        let levels = defect_sequence_experiment(&map, &dict, &[1, 2], Weighting::Uniform, &cfg, 0).unwrap();
        assert_eq!(levels.len(), 2);
        assert!(levels.iter().all(|l| l.report.as_ref().unwrap().max_defect == 0.0));
        let dict = TestDictionary::standard(&ann, 5).unwrap();
        let area = defect_sequence_experiment(&map, &dict, &[2], Weighting::Area, &cfg, 0).unwrap();
        assert!(area[0].report.as_ref().unwrap().max_defect.is_finite());
    }
}
