//! Evaluable area-preserving maps with derivatives.
//!
//! Maps act on canonical points (see [`Surface::canonical`]) and return
//! canonical points. Derivatives are Jacobians from the input point's chart to
//! the output point's chart; with constant chart densities, area preservation
//! reads `det Dφ · c(out) / c(in) = 1`.
//!
//! Sign convention: the Hamiltonian vector field satisfies `ι_{X_H} ω = dH`.
//! Flipping it negates actions and Calabi invariants.

mod extension;
mod families;
mod hamiltonian;
mod moser;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{wrap_unit, Point, Surface, DOMAIN_TOL};
use crate::linalg::Mat2;

pub use extension::{certify_collar_rotation, extend_boundary_rotation, CollarRotation, ExtensionReport};
pub use families::{
    annulus_flip, annulus_shear, annulus_twist, identity, perturbed_twist, radial_twist,
    rigid_rotation, PerturbedTwist,
};
pub use hamiltonian::{
    hamiltonian_flow, hamiltonian_time_one, FlowCertificate, Hamiltonian, IntegratorConfig,
};
pub use moser::{moser_interpolate, moser_pullback_defect, Density, MoserConfig, OneForm};

pub(crate) enum Representation {
    Identity,
    /// `θ ↦ θ + 2π Σ_k turns[k] r^{2k}` on the disk.
    DiskTwist { turns: Vec<f64> },
    /// `(s, t) ↦ (s, t + Σ_k turns[k] s^k)` on the annulus.
    AnnulusTwist { turns: Vec<f64> },
    PerturbedTwist(PerturbedTwist),
    /// `(s, t) ↦ (w − s, shift − t)`.
    AnnulusFlip { shift: f64 },
    Hamiltonian(Box<hamiltonian::HamiltonianFlow>),
    Moser(Box<moser::MoserFlow>),
    /// `outer ∘ inner`.
    Composition { outer: Arc<SurfaceMap>, inner: Arc<SurfaceMap> },
    Extension(Box<extension::Extension>),
}

/// An area-preserving diffeomorphism of a surface.
pub struct SurfaceMap {
    surface: Arc<Surface>,
    repr: Representation,
    label: String,
}

impl fmt::Debug for SurfaceMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceMap").field("label", &self.label).finish_non_exhaustive()
    }
}

impl SurfaceMap {
    pub(crate) fn new(surface: Arc<Surface>, repr: Representation, label: impl Into<String>) -> Self {
        SurfaceMap { surface, repr, label: label.into() }
    }

    pub fn surface(&self) -> &Arc<Surface> {
        &self.surface
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Image of `p` as a canonical point.
    pub fn apply(&self, p: &Point) -> Result<Point> {
        self.apply_with_derivative(p).map(|(q, _)| q)
    }

    /// Image of `p` and the Jacobian from `p`'s chart to the image's chart.
    pub fn apply_with_derivative(&self, p: &Point) -> Result<(Point, Mat2)> {
        let (q, jin) = self.surface.canonical_with_jacobian(p)?;
        let (r, d) = self.eval(&q)?;
        let (out, jout) = self.surface.canonical_with_jacobian(&r)?;
        Ok((out, jout * d * jin))
    }

    /// Evaluates on a canonical point; the result may be in any chart.
    fn eval(&self, p: &Point) -> Result<(Point, Mat2)> {
        match &self.repr {
            Representation::Identity => Ok((*p, Mat2::identity())),
            Representation::DiskTwist { turns } => Ok(families::disk_twist(turns, p)),
            Representation::AnnulusTwist { turns } => Ok(families::annulus_twist_eval(turns, p)),
            Representation::PerturbedTwist(pt) => pt.eval(p),
            Representation::AnnulusFlip { shift } => {
                let w = self.surface.annulus_width().unwrap_or(1.0);
                Ok((
                    Point::new(p.chart, w - p.u, wrap_unit(shift - p.v)),
                    Mat2::new(-1.0, 0.0, 0.0, -1.0),
                ))
            }
            Representation::Hamiltonian(h) => h.eval(&self.surface, p),
            Representation::Moser(m) => m.eval(&self.surface, p),
            Representation::Composition { outer, inner } => {
                let (q, d1) = inner.apply_with_derivative(p)?;
                let (r, d2) = outer.apply_with_derivative(&q)?;
                Ok((r, d2 * d1))
            }
            Representation::Extension(e) => e.eval(&self.surface, p),
        }
    }

    /// `det Dφ(p)` measured against the area form (1 for area-preserving maps).
    pub fn area_jacobian(&self, p: &Point) -> Result<f64> {
        let (q, d) = self.apply_with_derivative(p)?;
        Ok(d.determinant() * self.surface.form_coefficient(q.chart)
            / self.surface.form_coefficient(p.chart))
    }

    /// `φ^n(p)`.
    pub fn iterate(&self, p: &Point, n: usize) -> Result<Point> {
        let mut q = self.surface.canonical(p)?;
        for _ in 0..n {
            q = self.apply(&q)?;
        }
        Ok(q)
    }

    /// `φ^n(p)` with the chained derivative.
    pub fn iterate_with_derivative(&self, p: &Point, n: usize) -> Result<(Point, Mat2)> {
        let (mut q, mut d) = self.surface.canonical_with_jacobian(p)?;
        for _ in 0..n {
            let (r, dr) = self.apply_with_derivative(&q)?;
            q = r;
            d = dr * d;
        }
        Ok((q, d))
    }

    /// The inverse map, when it is available in closed form or by backward
    /// integration.
    pub fn inverse(&self) -> Option<SurfaceMap> {
        let repr = match &self.repr {
            Representation::Identity => Representation::Identity,
            Representation::DiskTwist { turns } => {
                Representation::DiskTwist { turns: turns.iter().map(|c| -c).collect() }
            }
            Representation::AnnulusTwist { turns } => {
                Representation::AnnulusTwist { turns: turns.iter().map(|c| -c).collect() }
            }
            Representation::AnnulusFlip { shift } => Representation::AnnulusFlip { shift: *shift },
            Representation::Hamiltonian(h) => Representation::Hamiltonian(Box::new(h.reversed())),
            Representation::Composition { outer, inner } => Representation::Composition {
                outer: Arc::new(inner.inverse()?),
                inner: Arc::new(outer.inverse()?),
            },
            _ => return None,
        };
        Some(SurfaceMap::new(self.surface.clone(), repr, format!("inverse of {}", self.label)))
    }

    /// Boundary permutation `σ` with `φ(γ_i) = γ_{σ(i)}`, read off at `t = 0`
    /// of each Lagrangian (boundary) circle.
    pub fn boundary_permutation(&self) -> Result<Vec<usize>> {
        let n = self.surface.lagrangian_circles().len();
        let mut sigma = Vec::with_capacity(n);
        for i in 0..n {
            let p = self.surface.collar_point(i, 0.0, 0.0)?;
            let q = self.apply(&p)?;
            let (j, c) = self
                .surface
                .nearest_collar(&q)
                .ok_or_else(|| Error::InvalidInput(format!("circle {i} leaves its collar")))?;
            if c[0].abs() > 1e-8 {
                return Err(Error::InvalidInput(format!(
                    "circle {i} is not mapped to a boundary circle (depth {})",
                    c[0]
                )));
            }
            sigma.push(j);
        }
        Ok(sigma)
    }

    pub fn extension_report(&self) -> Option<&ExtensionReport> {
        match &self.repr {
            Representation::Extension(e) => Some(&e.report),
            _ => None,
        }
    }

    pub fn flow_certificate(&self) -> Option<FlowCertificate> {
        match &self.repr {
            Representation::Hamiltonian(h) => Some(h.certificate),
            Representation::Moser(m) => Some(m.certificate),
            _ => None,
        }
    }

    /// Whether the map is a closed-form member of a built-in family.
    pub fn is_closed_form(&self) -> bool {
        matches!(
            self.repr,
            Representation::Identity
                | Representation::DiskTwist { .. }
                | Representation::AnnulusTwist { .. }
                | Representation::PerturbedTwist(_)
                | Representation::AnnulusFlip { .. }
        )
    }
}

/// `f ∘ g`.
pub fn compose(f: &Arc<SurfaceMap>, g: &Arc<SurfaceMap>) -> Result<SurfaceMap> {
    if !Arc::ptr_eq(&f.surface, &g.surface) {
        return Err(Error::SurfaceMismatch(format!(
            "cannot compose `{}` with `{}`: different surfaces",
            f.label, g.label
        )));
    }
    Ok(SurfaceMap::new(
        f.surface.clone(),
        Representation::Composition { outer: f.clone(), inner: g.clone() },
        format!("{} ∘ {}", f.label, g.label),
    ))
}

/// Maximum of `|det Dφ − 1|` (against the area form) at `n` uniform samples.
pub fn area_preservation_defect(map: &SurfaceMap, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Point> = (0..n).map(|_| map.surface.sample_uniform(&mut rng)).collect();
    let mut worst = 0.0f64;
    for p in points {
        worst = worst.max((map.area_jacobian(&p)? - 1.0).abs());
    }
    Ok(worst)
}

/// Largest deviation between the derivative and central differences of
/// `apply`, at `n` uniform samples kept away from chart edges.
pub fn derivative_defect(map: &SurfaceMap, n: usize, h: f64, seed: u64) -> Result<f64> {
    let surface = map.surface();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut taken = 0;
    while taken < n {
        let p = surface.sample_uniform(&mut rng);
        let shifted = |du: f64, dv: f64| Point::new(p.chart, p.u + du, p.v + dv);
        let probes = [shifted(h, 0.0), shifted(-h, 0.0), shifted(0.0, h), shifted(0.0, -h)];
        if probes.iter().any(|q| !surface.contains(q) || surface.canonical(q).map(|c| c.chart) != Ok(p.chart)) {
            continue;
        }
        if surface.nearest_collar(&p).is_some_and(|(_, c)| c[0] < 4.0 * h + DOMAIN_TOL) {
            continue;
        }
        taken += 1;
        let (q, d) = map.apply_with_derivative(&p)?;
        let image = |x: &Point| -> Result<Point> {
            let r = map.apply(x)?;
            surface.transition(&r, q.chart).map(|(r, _)| r).ok_or(Error::OutsideDomain { u: r.u, v: r.v })
        };
        for (col, (a, b)) in [(0, (probes[0], probes[1])), (1, (probes[2], probes[3]))] {
            let fa = image(&a)?;
            let fb = image(&b)?;
            let diff = surface.difference(&fa, &fb).ok_or(Error::OutsideDomain { u: fa.u, v: fa.v })?;
            let fd = diff / (2.0 * h);
            worst = worst.max((fd[0] - d[(0, col)]).abs()).max((fd[1] - d[(1, col)]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartId;
    use std::f64::consts::PI;

    #[test]
    fn composition_with_identity_and_group_law() {
        let disk = Surface::disk(1.0).unwrap();
        let a = Arc::new(rigid_rotation(&disk, 0.1).unwrap());
        let b = Arc::new(rigid_rotation(&disk, 0.25).unwrap());
        let id = Arc::new(identity(&disk));
        let ab = compose(&a, &b).unwrap();
        let aid = compose(&a, &id).unwrap();
        for k in 0..20 {
            let th = 0.3 * k as f64;
            let p = Point::base(0.7 * th.cos(), 0.7 * th.sin());
            let q = a.apply(&p).unwrap();
            let q1 = aid.apply(&p).unwrap();
            assert!((q.coords() - q1.coords()).norm() < 1e-12);
            let r = ab.apply(&p).unwrap();
            let ang = 2.0 * PI * 0.35;
            let expect = crate::linalg::rotation(ang) * p.coords();
            assert!((r.coords() - expect).norm() < 1e-12);
        }
        let other = Surface::disk(1.0).unwrap();
        let c = Arc::new(identity(&other));
        assert!(matches!(compose(&a, &c), Err(Error::SurfaceMismatch(_))));
    }

    #[test]
    fn chain_rule_against_finite_differences() {
        let ann = Surface::annulus(1.0).unwrap();
        let f = Arc::new(perturbed_twist(&ann, 0.02, 0.7, 0.1).unwrap());
        let g = Arc::new(annulus_twist(&ann, &[0.1, 0.3, -0.2]).unwrap());
        let fg = compose(&f, &g).unwrap();
        assert!(derivative_defect(&fg, 50, 1e-6, 3).unwrap() < 1e-6);
        assert!(area_preservation_defect(&fg, 200, 4).unwrap() < 1e-12);
    }

    #[test]
    fn closed_form_inverses() {
        let disk = Surface::disk(2.0).unwrap();
        let t = radial_twist(&disk, &[0.5, -0.5]).unwrap();
        let ti = t.inverse().unwrap();
        let p = Point::base(0.3, -0.4);
        let q = ti.apply(&t.apply(&p).unwrap()).unwrap();
        assert!((q.coords() - p.coords()).norm() < 1e-14);
        let ann = Surface::annulus(1.0).unwrap();
        let flip = annulus_flip(&ann, 0.3).unwrap();
        let p = Point::base(0.2, 0.9);
        let q = flip.apply(&flip.apply(&p).unwrap()).unwrap();
        assert!(ann.distance(&p, &q) < 1e-15);
        assert_eq!(flip.boundary_permutation().unwrap(), vec![1, 0]);
        assert_eq!(q.chart, ChartId::Base);
    }
}
