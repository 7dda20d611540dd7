//! Extension of collar-rotation maps to capped surfaces.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Representation, SurfaceMap};
use crate::error::{Error, Result};
use crate::geometry::{wrap_centered, wrap_unit, ChartId, Point, Surface, SurfaceKind};
use crate::linalg::{rotation, Mat2};

/// Samples per collar and depth used by the certification.
pub const COLLAR_SAMPLES: usize = 32;
/// Largest tolerated deviation from a rigid collar rotation.
pub const COLLAR_TOL: f64 = 1e-9;
/// Largest tolerated derivative jump across the gluing circles.
pub const SMOOTHNESS_TOL: f64 = 1e-8;

/// A map that near boundary circle `i` reads `(s, t) ↦ (s, t + ρ_i)` in
/// collar `σ(i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarRotation {
    pub permutation: Vec<usize>,
    pub rotations: Vec<f64>,
    pub defect: f64,
}

/// Certifies that `map` is a rigid rotation on the collars of width `delta`
/// by sampling 32 points at depths `δ/4` and `3δ/4` of each collar.
pub fn certify_collar_rotation(map: &SurfaceMap, delta: f64) -> Result<CollarRotation> {
    let surface = map.surface();
    let n = surface.boundary_circles().len();
    let mut permutation = Vec::with_capacity(n);
    let mut rotations = Vec::with_capacity(n);
    let mut defect = 0.0f64;
    for i in 0..n {
        let mut target: Option<(usize, f64)> = None;
        for depth in [0.25 * delta, 0.75 * delta] {
            for k in 0..COLLAR_SAMPLES {
                let t = k as f64 / COLLAR_SAMPLES as f64;
                let p = surface.collar_point(i, depth, t)?;
                let q = map.apply(&p)?;
                let (j, c) = surface.nearest_collar(&q).ok_or(Error::UnsupportedExtension { defect: f64::INFINITY })?;
                let rho = wrap_unit(c[1] - t);
                let (j0, rho0) = *target.get_or_insert((j, rho));
                if j != j0 {
                    return Err(Error::UnsupportedExtension { defect: f64::INFINITY });
                }
                defect = defect.max((c[0] - depth).abs()).max(wrap_centered(rho - rho0).abs());
            }
        }
        let (j, rho) = target.expect("samples taken");
        permutation.push(j);
        rotations.push(rho);
    }
    let mut seen = vec![false; n];
    for &j in &permutation {
        if seen[j] {
            return Err(Error::UnsupportedExtension { defect: f64::INFINITY });
        }
        seen[j] = true;
    }
    if defect > COLLAR_TOL {
        return Err(Error::UnsupportedExtension { defect });
    }
    Ok(CollarRotation { permutation, rotations, defect })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub collar: CollarRotation,
    /// Cap rotation angles `2πρ_i` in cap coordinates.
    pub cap_angles: Vec<f64>,
    /// Largest derivative mismatch across the gluing circles.
    pub derivative_jump: f64,
}

pub(crate) struct Extension {
    base_map: Arc<SurfaceMap>,
    pub(crate) report: ExtensionReport,
}

impl Extension {
    pub(crate) fn eval(&self, _surface: &Surface, p: &Point) -> Result<(Point, Mat2)> {
        match p.chart {
            ChartId::Cap(i) => {
                let r = rotation(self.report.cap_angles[i]);
                let z = r * p.coords();
                Ok((Point::new(ChartId::Cap(self.report.collar.permutation[i]), z[0], z[1]), r))
            }
            _ => self.base_map.apply_with_derivative(p),
        }
    }
}

/// Extends a collar-rotation map on `Z` to the capped surface: equal to `φ0`
/// on `Z` and to the rigid rotation by `2πρ_i` from cap `i` to cap `σ(i)`.
pub fn extend_boundary_rotation(phi0: &Arc<SurfaceMap>, capped: &Arc<Surface>) -> Result<SurfaceMap> {
    let cap = capped
        .capping()
        .filter(|_| capped.kind() == SurfaceKind::Capped)
        .ok_or_else(|| Error::InvalidInput("extension target must be a capped surface".into()))?;
    if !Arc::ptr_eq(&cap.base, phi0.surface()) {
        return Err(Error::SurfaceMismatch("map is not defined on the capped surface's base".into()));
    }
    let collar = certify_collar_rotation(phi0, cap.delta)?;
    let cap_angles: Vec<f64> = collar.rotations.iter().map(|r| 2.0 * PI * r).collect();

    let mut jump = 0.0f64;
    for (i, &j) in collar.permutation.iter().enumerate() {
        for k in 0..COLLAR_SAMPLES {
            let p = capped.collar_point(i, 0.0, k as f64 / COLLAR_SAMPLES as f64)?;
            let (q, d) = phi0.apply_with_derivative(&p)?;
            let (_, jin) = capped
                .transition(&p, ChartId::Cap(i))
                .ok_or(Error::OutsideDomain { u: p.u, v: p.v })?;
            let jin = jin.try_inverse().ok_or_else(|| Error::Numerical("singular gluing Jacobian".into()))?;
            let (_, jout) = capped
                .transition(&q, ChartId::Cap(j))
                .ok_or(Error::UnsupportedExtension { defect: f64::INFINITY })?;
            let seen_from_cap = jout * d * jin;
            jump = jump.max((seen_from_cap - rotation(cap_angles[i])).abs().max());
        }
    }
    if jump > SMOOTHNESS_TOL {
        return Err(Error::UnsupportedExtension { defect: jump });
    }
    let report = ExtensionReport { collar, cap_angles, derivative_jump: jump };
    Ok(SurfaceMap::new(
        capped.clone(),
        Representation::Extension(Box::new(Extension { base_map: phi0.clone(), report })),
        format!("capped extension of {}", phi0.label()),
    ))
}
