//! Time-one maps of Hamiltonian flows by the implicit midpoint rule.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Representation, SurfaceMap};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{wrap_unit, ChartId, Point, Surface, SurfaceKind};
use crate::jet::{Jet2, TimeField};
use crate::linalg::{Mat2, Vec2};

/// Largest allowed variation of `H_t` along one boundary circle.
pub const BOUNDARY_TOL: f64 = 1e-10;

/// A time-dependent Hamiltonian in base-chart coordinates, 1-periodic in time.
#[derive(Clone)]
pub struct Hamiltonian {
    field: TimeField,
    autonomous: bool,
    label: String,
}

impl std::fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hamiltonian").field("label", &self.label).finish_non_exhaustive()
    }
}

impl Hamiltonian {
    pub fn new(label: impl Into<String>, field: TimeField, autonomous: bool) -> Self {
        Hamiltonian { field, autonomous, label: label.into() }
    }

    pub fn zero() -> Self {
        Hamiltonian::new("0", Arc::new(|_, _, _| Jet2::constant(0.0)), true)
    }

    /// Parses an expression in the base coordinates of `surface`.
    pub fn from_expression(src: &str, surface: &Surface) -> Result<Self> {
        let e = Expr::parse(src)?;
        let autonomous = !e.depends_on_time();
        Ok(Hamiltonian::new(src, e.bind(surface.coordinates())?, autonomous))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn jet(&self, time: f64, u: f64, v: f64) -> Jet2 {
        let (ju, jv) = Jet2::seed(u, v);
        (self.field)(time, ju, jv)
    }

    pub fn value(&self, time: f64, u: f64, v: f64) -> f64 {
        (self.field)(time, Jet2::constant(u), Jet2::constant(v)).v
    }

    /// `X_H` and its Jacobian at `z` in the base chart, from `ι_X ω = dH`.
    pub fn vector_field(&self, surface: &Surface, time: f64, z: Vec2) -> (Vec2, Mat2) {
        let c = surface.form_coefficient(ChartId::Base);
        let j = self.jet(time, z[0], z[1]);
        let [hu, hv] = j.d;
        let [huu, huv, hvv] = j.h;
        (Vec2::new(hv, -hu) / c, Mat2::new(huv, hvv, -huu, -huv) / c)
    }

    /// Values of `H_time` on each boundary circle, failing if `H_time` is not
    /// constant along some circle.
    pub fn boundary_values(&self, surface: &Surface, time: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (i, circle) in surface.boundary_circles().iter().enumerate() {
            let vals: Vec<f64> = (0..64)
                .map(|k| {
                    let (z, _) = circle.collar_chart.embed(0.0, k as f64 / 64.0);
                    self.value(time, z[0], z[1])
                })
                .collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !(hi - lo <= BOUNDARY_TOL) {
                return Err(Error::BoundaryNotConstant { circle: i, variation: hi - lo });
            }
            out.push(vals[0]);
        }
        Ok(out)
    }

    /// Boundary certificate: values at time 0, checked at 8 times when `H`
    /// depends on time.
    pub fn certify(&self, surface: &Surface) -> Result<Vec<f64>> {
        let times = if self.autonomous { 1 } else { 8 };
        for k in 1..times {
            self.boundary_values(surface, k as f64 / times as f64)?;
        }
        self.boundary_values(surface, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Initial steps per unit time.
    pub steps: usize,
    /// 2 (implicit midpoint) or 4 (symmetric triple-jump composition).
    pub order: u8,
    /// Bound on the Richardson error estimate `Δ/(2^order − 1)` from step halving.
    pub tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { steps: 64, order: 4, tol: 1e-9 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 8 {
            return Err(Error::InvalidInput(format!("integrator steps {} < 8", self.steps)));
        }
        if self.order != 2 && self.order != 4 {
            return Err(Error::InvalidInput(format!("integrator order {} not in {{2, 4}}", self.order)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("integrator tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Step count fixed at construction and the endpoint change observed when
/// halving it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowCertificate {
    pub steps: usize,
    pub halving_defect: f64,
}

const MAX_DOUBLINGS: usize = 14;

pub(crate) struct HamiltonianFlow {
    pub(crate) hamiltonian: Hamiltonian,
    t0: f64,
    t1: f64,
    order: u8,
    pub(crate) certificate: FlowCertificate,
}

fn stages(order: u8) -> Vec<f64> {
    if order == 4 {
        let c = 2f64.powf(1.0 / 3.0);
        let g1 = 1.0 / (2.0 - c);
        vec![g1, -c * g1, g1]
    } else {
        vec![1.0]
    }
}

impl HamiltonianFlow {
    fn midpoint(&self, surface: &Surface, z0: Vec2, tau: f64, h: f64) -> Result<(Vec2, Mat2)> {
        let tm = tau + 0.5 * h;
        let h_ = &self.hamiltonian;
        let mut z1 = z0 + h * h_.vector_field(surface, tm, z0).0;
        let mut converged = false;
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let m = 0.5 * (z0 + z1);
            let (x, a) = h_.vector_field(surface, tm, m);
            let f = z1 - z0 - h * x;
            let j = Mat2::identity() - 0.5 * h * a;
            let dz = j.try_inverse().ok_or_else(|| Error::Numerical("singular midpoint Jacobian".into()))? * f;
            z1 -= dz;
            last = dz.norm();
            if last <= 1e-15 * (1.0 + z1.norm()) {
                converged = true;
                break;
            }
        }
        if !converged && last > 1e-12 {
            return Err(Error::IntegratorNonConvergence { defect: last, steps: 0 });
        }
        let (_, a) = h_.vector_field(surface, tm, 0.5 * (z0 + z1));
        let half = 0.5 * h * a;
        let m = (Mat2::identity() - half).try_inverse().ok_or_else(|| Error::Numerical("singular Cayley factor".into()))?
            * (Mat2::identity() + half);
        Ok((z1, m))
    }

    fn integrate(&self, surface: &Surface, z: Vec2, steps: usize) -> Result<(Vec2, Mat2)> {
        let h = (self.t1 - self.t0) / steps as f64;
        let coeffs = stages(self.order);
        let mut z = z;
        let mut d = Mat2::identity();
        let mut tau = self.t0;
        for _ in 0..steps {
            for &c in &coeffs {
                let (zn, m) = self.midpoint(surface, z, tau, c * h).map_err(|e| match e {
                    Error::IntegratorNonConvergence { defect, .. } => {
                        Error::IntegratorNonConvergence { defect, steps }
                    }
                    e => e,
                })?;
                z = zn;
                d = m * d;
                tau += c * h;
            }
        }
        Ok((z, d))
    }

    fn certify(&mut self, surface: &Surface, initial_steps: usize, tol: f64) -> Result<()> {
        let mut samples: Vec<Vec2> = surface.seed_grid(5).iter().map(|p| p.coords()).collect();
        for circle in surface.boundary_circles() {
            for k in 0..4 {
                samples.push(circle.collar_chart.embed(0.0, k as f64 / 4.0).0);
            }
        }
        let run = |n: usize| -> Result<Vec<Vec2>> {
            samples.iter().map(|z| self.integrate(surface, *z, n).map(|r| r.0)).collect()
        };
        let richardson = f64::from((1u32 << self.order) - 1);
        let mut n = initial_steps;
        let mut coarse = run(n)?;
        let mut defect = f64::INFINITY;
        for _ in 0..MAX_DOUBLINGS {
            let fine = run(2 * n)?;
            defect = coarse.iter().zip(&fine).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            n *= 2;
            // Richardson estimate of the error of the refined solution
            if defect / richardson < tol {
                self.certificate = FlowCertificate { steps: n, halving_defect: defect };
                return Ok(());
            }
            coarse = fine;
        }
        Err(Error::IntegratorNonConvergence { defect, steps: n })
    }

    pub(crate) fn eval(&self, surface: &Surface, p: &Point) -> Result<(Point, Mat2)> {
        let (z, d) = self.integrate(surface, p.coords(), self.certificate.steps)?;
        let v = if surface.periodic_v(ChartId::Base) { wrap_unit(z[1]) } else { z[1] };
        Ok((Point::new(ChartId::Base, z[0], v), d))
    }

    pub(crate) fn reversed(&self) -> HamiltonianFlow {
        HamiltonianFlow {
            hamiltonian: self.hamiltonian.clone(),
            t0: self.t1,
            t1: self.t0,
            order: self.order,
            certificate: self.certificate,
        }
    }
}

/// `ψ_H` from time `t0` to time `t1`. The step count is certified once at
/// construction by step halving on a fixed sample set.
pub fn hamiltonian_flow(
    surface: &Arc<Surface>,
    hamiltonian: &Hamiltonian,
    cfg: &IntegratorConfig,
    t0: f64,
    t1: f64,
) -> Result<SurfaceMap> {
    cfg.validate()?;
    if surface.kind() == SurfaceKind::Capped {
        return Err(Error::InvalidInput(
            "Hamiltonian flows are built on the base surface; extend them to the capping".into(),
        ));
    }
    hamiltonian.certify(surface)?;
    let mut flow = HamiltonianFlow {
        hamiltonian: hamiltonian.clone(),
        t0,
        t1,
        order: cfg.order,
        certificate: FlowCertificate { steps: cfg.steps, halving_defect: f64::NAN },
    };
    flow.certify(surface, cfg.steps, cfg.tol)?;
    Ok(SurfaceMap::new(
        surface.clone(),
        Representation::Hamiltonian(Box::new(flow)),
        format!("flow of H = {} over [{t0}, {t1}]", hamiltonian.label),
    ))
}

/// `ψ¹_H`.
pub fn hamiltonian_time_one(
    surface: &Arc<Surface>,
    hamiltonian: &Hamiltonian,
    cfg: &IntegratorConfig,
) -> Result<SurfaceMap> {
    hamiltonian_flow(surface, hamiltonian, cfg, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rotation;
    use crate::maps::{area_preservation_defect, compose, derivative_defect};
    use std::f64::consts::PI;

    #[test]
    fn zero_hamiltonian_is_identity() {
        let disk = Surface::disk(1.0).unwrap();
        let m = hamiltonian_time_one(&disk, &Hamiltonian::zero(), &IntegratorConfig::default()).unwrap();
        let p = Point::base(0.3, 0.2);
        let (q, d) = m.apply_with_derivative(&p).unwrap();
        assert_eq!(q, p);
        assert_eq!(d, Mat2::identity());
    }

    #[test]
    fn radial_hamiltonian_rotates_circles() {
        // H = h(r²) gives X = 2h'(r²)(y, −x)/c: clockwise rotation at angular
        // speed 2h'(r²)π/A, i.e. Θ(r) = −2π h'(r²)/A after unit time.
        let area = 1.0;
        let disk = Surface::disk(area).unwrap();
        let h = Hamiltonian::from_expression("0.5 * r2 - 0.25 * r2^2", &disk).unwrap();
        let cfg = IntegratorConfig { steps: 64, order: 4, tol: 1e-11 };
        let m = hamiltonian_time_one(&disk, &h, &cfg).unwrap();
        for k in 0..12 {
            let r: f64 = 0.08 * k as f64;
            let p = Point::base(r * 0.6, r * 0.8);
            let theta = -2.0 * PI * (0.5 - 0.5 * r * r) / area;
            let expect = rotation(theta) * p.coords();
            let q = m.apply(&p).unwrap();
            assert!((q.coords() - expect).norm() < 1e-9, "r = {r}");
        }
        assert!(area_preservation_defect(&m, 200, 7).unwrap() < 1e-12);
    }

    #[test]
    fn annulus_translation_and_flow_property() {
        let ann = Surface::annulus(1.0).unwrap();
        let h = Hamiltonian::from_expression("0.3 * s", &ann).unwrap();
        let m = hamiltonian_time_one(&ann, &h, &IntegratorConfig::default()).unwrap();
        let q = m.apply(&Point::base(0.4, 0.5)).unwrap();
        assert!((q.u - 0.4).abs() < 1e-14 && (q.v - 0.2).abs() < 1e-12);

        let h = Hamiltonian::from_expression("cos(2*pi*t) * (s*(1-s))^2 + s^3", &ann).unwrap();
        let cfg = IntegratorConfig { steps: 32, order: 4, tol: 1e-11 };
        let full = hamiltonian_flow(&ann, &h, &cfg, 0.0, 0.7).unwrap();
        let a = Arc::new(hamiltonian_flow(&ann, &h, &cfg, 0.0, 0.3).unwrap());
        let b = Arc::new(hamiltonian_flow(&ann, &h, &cfg, 0.0, 0.4).unwrap());
        let ab = compose(&b, &a).unwrap();
        for p in ann.seed_grid(4) {
            let d = ann.distance(&full.apply(&p).unwrap(), &ab.apply(&p).unwrap());
            assert!(d < 1e-9, "{d}");
        }
        assert!(derivative_defect(&full, 20, 1e-6, 1).unwrap() < 1e-6);
        let inv = full.inverse().unwrap();
        let p = Point::base(0.3, 0.1);
        assert!(ann.distance(&inv.apply(&full.apply(&p).unwrap()).unwrap(), &p) < 1e-12);
    }

    #[test]
    fn boundary_circles_are_invariant() {
        let ann = Surface::annulus(1.0).unwrap();
        let h = Hamiltonian::from_expression("sin(2*pi*t) * (s*(1-s))^2 + time*s", &ann).unwrap();
        assert!(!h.is_autonomous());
        let m = hamiltonian_time_one(&ann, &h, &IntegratorConfig { steps: 16, order: 4, tol: 1e-10 }).unwrap();
        for k in 0..16 {
            for s in [0.0, 1.0] {
                let q = m.apply(&Point::base(s, k as f64 / 16.0)).unwrap();
                assert!((q.u - s).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_non_constant_boundary_values() {
        let ann = Surface::annulus(1.0).unwrap();
        let h = Hamiltonian::from_expression("sin(2*pi*t)", &ann).unwrap();
        let err = hamiltonian_time_one(&ann, &h, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::BoundaryNotConstant { circle: 0, .. }));
        let cfg = IntegratorConfig { steps: 4, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
