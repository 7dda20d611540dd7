//! Closed-form map families.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Representation, SurfaceMap};
use crate::error::{Error, Result};
use crate::geometry::{wrap_unit, Point, Surface, SurfaceKind};
use crate::linalg::{rotation, Mat2, Vec2};

fn require(surface: &Surface, kind: SurfaceKind, family: &str) -> Result<()> {
    if surface.kind() != kind {
        return Err(Error::InvalidInput(format!(
            "{family} needs a {kind:?} surface, got {:?}",
            surface.kind()
        )));
    }
    Ok(())
}

fn check_coeffs(coeffs: &[f64]) -> Result<()> {
    if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("profile coefficients must be finite and nonempty".into()));
    }
    Ok(())
}

/// Value and derivative of `Σ c_k x^k`.
fn poly(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &c in coeffs.iter().rev() {
        d = d * x + v;
        v = v * x + c;
    }
    (v, d)
}

pub fn identity(surface: &Arc<Surface>) -> SurfaceMap {
    SurfaceMap::new(surface.clone(), Representation::Identity, "identity")
}

/// Rigid rotation by `turns` full turns: `θ ↦ θ + 2π·turns` on the disk,
/// `t ↦ t + turns` on the annulus.
pub fn rigid_rotation(surface: &Arc<Surface>, turns: f64) -> Result<SurfaceMap> {
    let repr = match surface.kind() {
        SurfaceKind::Disk => Representation::DiskTwist { turns: vec![turns] },
        SurfaceKind::Annulus => Representation::AnnulusTwist { turns: vec![turns] },
        SurfaceKind::Capped => {
            return Err(Error::InvalidInput("rotate the base surface and extend instead".into()))
        }
    };
    Ok(SurfaceMap::new(surface.clone(), repr, format!("rotation by {turns} turns")))
}

/// Radial twist `θ ↦ θ + 2π P(r²)` with `P(x) = Σ_k profile[k] x^k` (in turns).
pub fn radial_twist(disk: &Arc<Surface>, profile: &[f64]) -> Result<SurfaceMap> {
    require(disk, SurfaceKind::Disk, "radial twist")?;
    check_coeffs(profile)?;
    Ok(SurfaceMap::new(
        disk.clone(),
        Representation::DiskTwist { turns: profile.to_vec() },
        "radial twist",
    ))
}

/// Shear `(s, t) ↦ (s, t + c)`.
pub fn annulus_shear(annulus: &Arc<Surface>, c: f64) -> Result<SurfaceMap> {
    require(annulus, SurfaceKind::Annulus, "annulus shear")?;
    check_coeffs(&[c])?;
    Ok(SurfaceMap::new(
        annulus.clone(),
        Representation::AnnulusTwist { turns: vec![c] },
        format!("annulus shear by {c}"),
    ))
}

/// Twist `(s, t) ↦ (s, t + Σ_k profile[k] s^k)`.
pub fn annulus_twist(annulus: &Arc<Surface>, profile: &[f64]) -> Result<SurfaceMap> {
    require(annulus, SurfaceKind::Annulus, "annulus twist")?;
    check_coeffs(profile)?;
    Ok(SurfaceMap::new(
        annulus.clone(),
        Representation::AnnulusTwist { turns: profile.to_vec() },
        "annulus twist",
    ))
}

/// `(s, t) ↦ (w − s, shift − t)`, exchanging the two boundary circles.
pub fn annulus_flip(annulus: &Arc<Surface>, shift: f64) -> Result<SurfaceMap> {
    require(annulus, SurfaceKind::Annulus, "annulus flip")?;
    check_coeffs(&[shift])?;
    Ok(SurfaceMap::new(
        annulus.clone(),
        Representation::AnnulusFlip { shift },
        format!("annulus flip with shift {shift}"),
    ))
}

/// Standard-map-like twist with a perturbation that vanishes near both
/// boundary circles. Defined by the generating relations
///
/// `s = s' + ε b(s') sin 2πt`, `t' = t − ε b'(s') cos 2πt / 2π`,
///
/// followed by the twist `t'' = t' + κ (s' − w/2)`. The bump is
/// `b(s) = ((s − a)(w − a − s)/u_max)³` on `(a, w − a)` and zero elsewhere,
/// normalized so that `b(w/2) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedTwist {
    pub epsilon: f64,
    pub kappa: f64,
    pub margin: f64,
    pub width: f64,
}

impl PerturbedTwist {
    fn umax(&self) -> f64 {
        let h = 0.5 * (self.width - 2.0 * self.margin);
        h * h
    }

    /// `b`, `b'`, `b''` at `s`.
    pub fn bump(&self, s: f64) -> (f64, f64, f64) {
        let a = self.margin;
        let u = (s - a) * (self.width - a - s);
        if u <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let m = self.umax();
        let x = u / m;
        let du = (self.width - 2.0 * s) / m;
        let ddu = -2.0 / m;
        (x * x * x, 3.0 * x * x * du, 6.0 * x * du * du + 3.0 * x * x * ddu)
    }

    fn max_slope(&self) -> f64 {
        (0..=2000)
            .map(|k| self.bump(self.width * k as f64 / 2000.0).1.abs())
            .fold(0.0, f64::max)
    }

    /// Linearization at the fixed point `(w/2, t0)`, `t0 ∈ {0, 1/2}`.
    pub fn fixed_point_linearization(&self, t0: f64) -> Mat2 {
        let c = (2.0 * PI * t0).cos();
        let (b, _, bpp) = self.bump(0.5 * self.width);
        let a = -2.0 * PI * self.epsilon * b * c;
        let k = self.kappa - self.epsilon * bpp * c / (2.0 * PI);
        Mat2::new(1.0, a, k, 1.0 + k * a)
    }

    pub(crate) fn eval(&self, p: &Point) -> Result<(Point, Mat2)> {
        let (s, t) = (p.u, p.v);
        let (sn, cs) = (2.0 * PI * t).sin_cos();
        let eps = self.epsilon;
        let mut sp = s;
        for _ in 0..60 {
            let (b, bp, _) = self.bump(sp);
            let f = sp + eps * b * sn - s;
            let step = f / (1.0 + eps * bp * sn);
            sp -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (b, bp, bpp) = self.bump(sp);
        let residual = sp + eps * b * sn - s;
        if residual.abs() > 1e-12 {
            return Err(Error::Numerical(format!("perturbed twist inversion residual {residual}")));
        }
        let den = 1.0 + eps * bp * sn;
        let dsp_ds = 1.0 / den;
        let dsp_dt = -2.0 * PI * eps * b * cs / den;
        let k = self.kappa - eps * bpp * cs / (2.0 * PI);
        let t2 = t - eps * bp * cs / (2.0 * PI) + self.kappa * (sp - 0.5 * self.width);
        let d = Mat2::new(dsp_ds, dsp_dt, k * dsp_ds, 1.0 + eps * bp * sn + k * dsp_dt);
        Ok((Point::new(p.chart, sp, wrap_unit(t2)), d))
    }
}

pub fn perturbed_twist(annulus: &Arc<Surface>, epsilon: f64, kappa: f64, margin: f64) -> Result<SurfaceMap> {
    require(annulus, SurfaceKind::Annulus, "perturbed twist")?;
    let width = annulus.annulus_width().unwrap_or(1.0);
    if !(margin > 0.0 && 2.0 * margin < width) {
        return Err(Error::InvalidInput(format!("margin {margin} must lie in (0, w/2)")));
    }
    let pt = PerturbedTwist { epsilon, kappa, margin, width };
    if !(epsilon.abs() * pt.max_slope() < 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidInput(format!(
            "perturbation too strong: ε·max|b'| = {} must be < 1",
            epsilon.abs() * pt.max_slope()
        )));
    }
    Ok(SurfaceMap::new(
        annulus.clone(),
        Representation::PerturbedTwist(pt),
        format!("perturbed twist ε={epsilon} κ={kappa}"),
    ))
}

pub(crate) fn disk_twist(turns: &[f64], p: &Point) -> (Point, Mat2) {
    let z = p.coords();
    let r2 = z.norm_squared();
    let (tv, td) = poly(turns, r2);
    let alpha = 2.0 * PI * tv;
    let rot = rotation(alpha);
    let out = rot * z;
    // d(R(α)z) = R(α) dz + R(α) J z dα,  dα = 4π P'(r²) (x dx + y dy)
    let jz = Vec2::new(-z[1], z[0]);
    let grad = z * (4.0 * PI * td);
    let d = rot * (Mat2::identity() + jz * grad.transpose());
    (Point::new(p.chart, out[0], out[1]), d)
}

pub(crate) fn annulus_twist_eval(turns: &[f64], p: &Point) -> (Point, Mat2) {
    let (v, d) = poly(turns, p.u);
    (Point::new(p.chart, p.u, wrap_unit(p.v + v)), Mat2::new(1.0, 0.0, d, 1.0))
}
