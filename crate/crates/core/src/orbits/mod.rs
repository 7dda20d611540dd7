//! Periodic orbits: search, nondegeneracy, orbit sets and their functionals.

pub mod circle;
pub mod search;
mod surface;
pub mod toy;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Surface};
use crate::linalg::{condition_number, eigenvalues, Complex, Mat2};
use crate::maps::SurfaceMap;

pub use circle::{CircleMap, CirclePeriodicPoint, RotationNumber};
pub use search::{SearchStats, SearchOutcome, SearchParams};
pub use surface::{find_orbits, OrbitSearchReport, SearchConfig};

/// Eigenvalues within this distance of 1 make an orbit degenerate.
pub const EIGEN_TOL: f64 = 1e-7;
/// Monodromies with a larger condition number are flagged unreliable.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Points of an orbit closer than this to a boundary circle lie on it.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// An ordered cycle `x₁ → … → x_d → x₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub id: usize,
    pub points: Vec<Point>,
    pub period: usize,
    /// `max_i dist(φ(x_i), x_{i+1})`.
    pub residual: f64,
    /// `Dφ^d(x₁)` in the chart of `x₁`.
    pub monodromy: [[f64; 2]; 2],
    pub floquet: [Complex; 2],
    pub determinant: f64,
    pub nondegenerate: bool,
    pub simple: bool,
    pub unreliable: bool,
    /// Index of the invariant circle carrying the orbit, if any.
    pub boundary_circle: Option<usize>,
    /// `∂t/∂t` entry of the monodromy in collar coordinates, for orbits on a circle.
    pub tangential_eigenvalue: Option<f64>,
}

impl PeriodicOrbit {
    /// An orbit through `points` with flags unset; call [`classify_nondegeneracy`].
    pub fn from_points(points: Vec<Point>) -> Self {
        let period = points.len();
        PeriodicOrbit {
            id: 0,
            points,
            period,
            residual: f64::NAN,
            monodromy: [[1.0, 0.0], [0.0, 1.0]],
            floquet: [Complex { re: 1.0, im: 0.0 }; 2],
            determinant: 1.0,
            nondegenerate: false,
            simple: true,
            unreliable: false,
            boundary_circle: None,
            tangential_eigenvalue: None,
        }
    }

    pub fn monodromy_matrix(&self) -> Mat2 {
        let m = self.monodromy;
        Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    /// `S(f) = Σ f(x_i)`.
    pub fn sum<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(f).sum()
    }

    /// The same orbit started at point `k`.
    pub fn relabel(&self, k: usize) -> Self {
        let mut o = self.clone();
        o.points.rotate_left(k % self.period.max(1));
        o
    }
}

/// Recomputes residual, monodromy, Floquet spectrum and flags of `orbit`.
pub fn classify_nondegeneracy(orbit: &PeriodicOrbit, map: &SurfaceMap) -> Result<PeriodicOrbit> {
    let surface = map.surface();
    let d = orbit.points.len();
    if d == 0 {
        return Err(Error::InvalidInput("empty orbit".into()));
    }
    let mut residual = 0.0f64;
    let mut chain = Mat2::identity();
    for i in 0..d {
        let (y, dy) = map.apply_with_derivative(&orbit.points[i])?;
        let next = &orbit.points[(i + 1) % d];
        let (y_next, jt) = surface.transition(&y, next.chart).ok_or(Error::OutsideDomain { u: y.u, v: y.v })?;
        residual = residual.max(surface.distance(&y_next, next));
        chain = jt * dy * chain;
    }
    let det = chain.determinant();
    let ev = eigenvalues(&chain);
    let near_one = |c: &Complex| (c.re - 1.0).hypot(c.im) <= EIGEN_TOL;
    let nondegenerate = !ev.iter().any(near_one);
    let unreliable = condition_number(&chain) > CONDITION_LIMIT || !det.is_finite();
    let mut simple = true;
    for i in 0..d {
        for j in i + 1..d {
            if surface.distance(&orbit.points[i], &orbit.points[j]) <= 10.0 * residual.max(1e-12) {
                simple = false;
            }
        }
    }
    let mut boundary_circle = None;
    let mut tangential = None;
    let x1 = &orbit.points[0];
    if let Some((i, c)) = surface.nearest_collar(x1) {
        if c[0].abs() <= BOUNDARY_TOL {
            let (_, jc) = surface.collar_coords(i, x1).expect("collar located");
            if let Some(jc_inv) = jc.try_inverse() {
                let m = jc * chain * jc_inv;
                boundary_circle = Some(i);
                tangential = Some(m[(1, 1)]);
            }
        }
    }
    Ok(PeriodicOrbit {
        id: orbit.id,
        points: orbit.points.clone(),
        period: d,
        residual,
        monodromy: [[chain[(0, 0)], chain[(0, 1)]], [chain[(1, 0)], chain[(1, 1)]]],
        floquet: ev,
        determinant: det,
        nondegenerate,
        simple,
        unreliable,
        boundary_circle,
        tangential_eigenvalue: tangential,
    })
}

/// A positive combination `Σ a_k S_k` of distinct simple orbits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSet {
    pub terms: Vec<(f64, PeriodicOrbit)>,
}

impl OrbitSet {
    /// Validates coefficients, simplicity and pairwise distinctness.
    pub fn new(surface: &Surface, terms: Vec<(f64, PeriodicOrbit)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::EmptyOrbitSet("no terms".into()));
        }
        for (i, (a, o)) in terms.iter().enumerate() {
            if !(a.is_finite() && *a > 0.0) {
                return Err(Error::InvalidInput(format!("coefficient {a} must be positive")));
            }
            if !o.simple || o.points.is_empty() {
                return Err(Error::InvalidInput(format!("orbit {} is not simple", o.id)));
            }
            for (_, other) in &terms[..i] {
                if other.period == o.period && same_points(surface, &other.points, &o.points) {
                    return Err(Error::InvalidInput(format!("orbits {} and {} coincide", other.id, o.id)));
                }
            }
        }
        Ok(OrbitSet { terms })
    }

    /// All coefficients equal to 1.
    pub fn uniform(surface: &Surface, orbits: &[PeriodicOrbit]) -> Result<Self> {
        Self::new(surface, orbits.iter().map(|o| (1.0, o.clone())).collect())
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_integral(&self) -> bool {
        self.terms.iter().all(|(a, _)| a.fract() == 0.0)
    }

    /// `|O| = Σ a_k |S_k|`.
    pub fn size(&self) -> f64 {
        self.terms.iter().map(|(a, o)| a * o.period as f64).sum()
    }

    /// `O(f)/|O|`.
    pub fn average<F: Fn(&Point) -> f64>(&self, f: F) -> Result<f64> {
        let size = self.size();
        if self.terms.is_empty() || size <= 0.0 {
            return Err(Error::EmptyOrbitSet("|O| = 0".into()));
        }
        Ok(orbit_functional(self, f) / size)
    }
}

fn same_points(surface: &Surface, a: &[Point], b: &[Point]) -> bool {
    let n = a.len();
    (0..n).any(|r| (0..n).all(|i| surface.distance(&a[i], &b[(i + r) % n]) <= 1e-9))
}

/// `O(f) = Σ_k a_k Σ_i f(x_i^{(k)})`.
pub fn orbit_functional<F: Fn(&Point) -> f64>(set: &OrbitSet, f: F) -> f64 {
    set.terms.iter().map(|(a, o)| a * o.sum(&f)).sum()
}

/// Heuristic area weights of `points`: the normalized area of each Voronoi
/// cell (chart distance), estimated from `samples` uniform samples.
pub fn voronoi_masses(surface: &Surface, points: &[Point], samples: usize, seed: u64) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(Error::EmptyCensus("no points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Point> = (0..samples.max(1)).map(|_| surface.sample_uniform(&mut rng)).collect();
    let owners: Vec<usize> = draws
        .par_iter()
        .map(|x| {
            let mut best = (f64::INFINITY, 0usize);
            for (k, p) in points.iter().enumerate() {
                let d = surface.distance(x, p);
                if d < best.0 {
                    best = (d, k);
                }
            }
            best.1
        })
        .collect();
    let mut mass = vec![0.0; points.len()];
    for k in owners {
        mass[k] += 1.0;
    }
    let n = draws.len() as f64;
    Ok(mass.into_iter().map(|m| m / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{identity, perturbed_twist, radial_twist};
    use crate::ChartId;

    fn fixed(map: &SurfaceMap, p: Point) -> PeriodicOrbit {
        classify_nondegeneracy(&PeriodicOrbit::from_points(vec![p]), map).unwrap()
    }

    #[test]
    fn identity_fixed_points_are_degenerate() {
        let disk = Surface::disk(1.0).unwrap();
        let o = fixed(&identity(&disk), Point::base(0.3, 0.1));
        assert!(!o.nondegenerate);
        assert_eq!(o.floquet[0], Complex { re: 1.0, im: 0.0 });
    }

    #[test]
    fn twist_center_has_eigenvalues_minus_one() {
        let disk = Surface::disk(1.0).unwrap();
        let m = radial_twist(&disk, &[0.5, -0.5]).unwrap();
        let o = fixed(&m, Point::base(0.0, 0.0));
        assert!(o.nondegenerate);
        for e in o.floquet {
            assert!((e.re + 1.0).abs() < 1e-12 && e.im.abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_twist_fixed_points() {
        let ann = Surface::annulus(1.0).unwrap();
        let (eps, kappa) = (0.05, 0.6);
        let m = perturbed_twist(&ann, eps, kappa, 0.1).unwrap();
        let hyp = fixed(&m, Point::base(0.5, 0.5));
        let ell = fixed(&m, Point::base(0.5, 0.0));
        assert!(hyp.residual < 1e-14 && ell.residual < 1e-14);
        // oracle: at s = w/2 the bump has b = 1, b' = 0, b'' = -6/h², h = w/2 - margin,
        // and the map linearizes to [[1, a], [k, 1 + k a]]
        let h: f64 = 0.4;
        let bpp = -6.0 / (h * h);
        for (o, c) in [(&hyp, -1.0), (&ell, 1.0)] {
            let a = -2.0 * std::f64::consts::PI * eps * c;
            let k = kappa - eps * bpp * c / (2.0 * std::f64::consts::PI);
            let expect = Mat2::new(1.0, a, k, 1.0 + k * a);
            let mono = o.monodromy_matrix();
            assert!((mono - expect).abs().max() < 1e-9, "{mono} vs {expect}");
            assert!((o.determinant - 1.0).abs() < 1e-9);
        }
        let mu = hyp.floquet[0];
        assert!(mu.im == 0.0 && mu.re > 1.0 && (mu.re * hyp.floquet[1].re - 1.0).abs() < 1e-9);
        assert!(hyp.nondegenerate && ell.nondegenerate);
        assert!(ell.floquet[0].im != 0.0 && (ell.floquet[0].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orbit_set_functional() {
        let disk = Surface::disk(1.0).unwrap();
        let m = identity(&disk);
        let a = fixed(&m, Point::base(0.1, 0.0));
        let b = fixed(&m, Point::base(0.0, 0.2));
        let set = OrbitSet::new(&disk, vec![(2.0, a.clone()), (0.5, b.clone())]).unwrap();
        assert_eq!(set.size(), 2.5);
        assert!(!set.is_integral());
        assert_eq!(orbit_functional(&set, |_| 1.0), 2.5);
        let f = |p: &Point| p.u + 3.0 * p.v;
        assert!((orbit_functional(&set, f) - (2.0 * 0.1 + 0.5 * 0.6)).abs() < 1e-15);
        assert!(OrbitSet::new(&disk, vec![(1.0, a.clone()), (1.0, a.clone())]).is_err());
        assert!(OrbitSet::new(&disk, vec![(-1.0, a)]).is_err());
        assert!(matches!(OrbitSet::new(&disk, vec![]), Err(Error::EmptyOrbitSet(_))));
    }

    #[test]
    fn boundary_orbit_tangential_eigenvalue() {
        let ann = Surface::annulus(1.0).unwrap();
        let m = perturbed_twist(&ann, 0.05, 0.6, 0.1).unwrap();
        let p = ann.collar_point(0, 0.0, 0.0).unwrap();
        let pts: Vec<Point> = (0..10).map(|k| m.iterate(&p, k).unwrap()).collect();
        let o = classify_nondegeneracy(&PeriodicOrbit::from_points(pts), &m).unwrap();
        assert!(o.residual < 1e-12);
        assert_eq!(o.boundary_circle, Some(0));
        assert!((o.tangential_eigenvalue.unwrap() - 1.0).abs() < 1e-12);
        assert!(!o.nondegenerate);
    }

    #[test]
    fn voronoi_masses_sum_to_one() {
        let disk = Surface::disk(1.0).unwrap();
        let pts = vec![Point::base(0.0, 0.0), Point::base(0.0, 0.9), Point::new(ChartId::Base, 0.5, -0.5)];
        let w = voronoi_masses(&disk, &pts, 4000, 1).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x > 0.0));
        assert_eq!(w, voronoi_masses(&disk, &pts, 4000, 1).unwrap());
    }
}
