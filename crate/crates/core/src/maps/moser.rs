//! One-forms, area densities and the Moser flow between two area forms.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FlowCertificate, Representation, SurfaceMap};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{area_integrate, wrap_unit, ChartId, IntegrationOptions, Point, Surface, SurfaceKind};
use crate::jet::{ChartField, Jet2};
use crate::linalg::{Mat2, Vec2};

/// Tolerance for the primitive and boundary-restriction preconditions.
pub const FORM_TOL: f64 = 1e-9;

#[derive(Clone)]
enum Part {
    /// `p du + q dv`.
    Coefficients(ChartField, ChartField),
    /// `dg`.
    Exact(ChartField),
}

/// A one-form `p du + q dv` on the base chart.
#[derive(Clone)]
pub struct OneForm {
    parts: Vec<Part>,
    label: String,
}

impl std::fmt::Debug for OneForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OneForm").field("label", &self.label).finish_non_exhaustive()
    }
}

impl OneForm {
    pub fn new(label: impl Into<String>, p: ChartField, q: ChartField) -> Self {
        OneForm { parts: vec![Part::Coefficients(p, q)], label: label.into() }
    }

    pub fn zero() -> Self {
        OneForm { parts: Vec::new(), label: "0".into() }
    }

    /// `dg`.
    pub fn exact(label: impl Into<String>, g: ChartField) -> Self {
        OneForm { parts: vec![Part::Exact(g)], label: label.into() }
    }

    /// `dg` for an expression `g` in the base coordinates of `surface`.
    pub fn exact_from_expression(src: &str, surface: &Surface) -> Result<Self> {
        let e = Expr::parse(src)?;
        if e.depends_on_time() {
            return Err(Error::Expression("exact terms cannot depend on time".into()));
        }
        let f = e.bind(surface.coordinates())?;
        Ok(OneForm::exact(format!("d({src})"), Arc::new(move |u, v| f(0.0, u, v))))
    }

    /// The standard primitive of the area form: `(A/2π)(x dy − y dx)` on the
    /// disk, `s dt` on the annulus.
    pub fn standard_primitive(surface: &Surface) -> Result<Self> {
        if let Some(area) = surface.disk_area() {
            let k = area / (2.0 * PI);
            Ok(OneForm::new(
                "(A/2π)(x dy − y dx)",
                Arc::new(move |_, v| -k * v),
                Arc::new(move |u, _| k * u),
            ))
        } else {
            Ok(OneForm::new("s dt", Arc::new(|_, _| Jet2::constant(0.0)), Arc::new(|u, _| u)))
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `self + other`.
    pub fn plus(&self, other: &OneForm) -> OneForm {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        OneForm { parts, label: format!("{} + {}", self.label, other.label) }
    }

    /// Coefficients `(p, q)` and their Jacobian `[[p_u, p_v], [q_u, q_v]]`.
    pub fn coefficients(&self, u: f64, v: f64) -> (Vec2, Mat2) {
        let (ju, jv) = Jet2::seed(u, v);
        let mut val = Vec2::zeros();
        let mut jac = Mat2::zeros();
        for part in &self.parts {
            match part {
                Part::Coefficients(p, q) => {
                    let (p, q) = (p(ju, jv), q(ju, jv));
                    val += Vec2::new(p.v, q.v);
                    jac += Mat2::new(p.d[0], p.d[1], q.d[0], q.d[1]);
                }
                Part::Exact(g) => {
                    let g = g(ju, jv);
                    val += Vec2::new(g.d[0], g.d[1]);
                    jac += Mat2::new(g.h[0], g.h[1], g.h[1], g.h[2]);
                }
            }
        }
        (val, jac)
    }

    /// The form evaluated on a tangent vector at `(u, v)`.
    pub fn pair(&self, u: f64, v: f64, w: Vec2) -> f64 {
        self.coefficients(u, v).0.dot(&w)
    }

    /// Coefficient of `dσ` with respect to `du∧dv`.
    pub fn exterior_derivative(&self, u: f64, v: f64) -> f64 {
        let (_, j) = self.coefficients(u, v);
        j[(1, 0)] - j[(0, 1)]
    }

    /// `max |dβ − ω|` at `n` seeded samples of the base surface.
    pub fn primitive_defect(&self, surface: &Surface, n: usize, seed: u64) -> f64 {
        let c = surface.form_coefficient(ChartId::Base);
        sample_base(surface, n, seed)
            .iter()
            .map(|p| (self.exterior_derivative(p.u, p.v) - c).abs())
            .fold(0.0, f64::max)
    }

    /// `max |dλ|` at `n` seeded samples of the base surface.
    pub fn closed_defect(&self, surface: &Surface, n: usize, seed: u64) -> f64 {
        sample_base(surface, n, seed)
            .iter()
            .map(|p| self.exterior_derivative(p.u, p.v).abs())
            .fold(0.0, f64::max)
    }

    /// `max |σ(∂_t)|` along every boundary circle (64 samples each).
    pub fn boundary_restriction_defect(&self, surface: &Surface) -> f64 {
        let mut worst = 0.0f64;
        for circle in surface.lagrangian_circles() {
            for k in 0..64 {
                let (z, j) = circle.collar_chart.embed(0.0, k as f64 / 64.0);
                worst = worst.max(self.pair(z[0], z[1], j.column(1).into()).abs());
            }
        }
        worst
    }
}

fn sample_base(surface: &Surface, n: usize, seed: u64) -> Vec<Point> {
    let base = match surface.capping() {
        Some(c) => c.base.as_ref(),
        None => surface,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = base.seed_grid(6);
    pts.extend((0..n).map(|_| base.sample_uniform(&mut rng)));
    pts
}

/// A positive area density `ρ du∧dv` on the base chart.
#[derive(Clone)]
pub struct Density {
    field: ChartField,
    label: String,
}

impl Density {
    pub fn new(label: impl Into<String>, field: ChartField) -> Self {
        Density { field, label: label.into() }
    }

    pub fn constant(c: f64) -> Self {
        Density::new(format!("{c}"), Arc::new(move |_, _| Jet2::constant(c)))
    }

    /// The density of the surface's own area form.
    pub fn area_form(surface: &Surface) -> Self {
        Density::constant(surface.form_coefficient(ChartId::Base))
    }

    pub fn from_expression(src: &str, surface: &Surface) -> Result<Self> {
        let e = Expr::parse(src)?;
        if e.depends_on_time() {
            return Err(Error::Expression("densities cannot depend on time".into()));
        }
        let f = e.bind(surface.coordinates())?;
        Ok(Density::new(src, Arc::new(move |u, v| f(0.0, u, v))))
    }

    pub fn jet(&self, u: f64, v: f64) -> Jet2 {
        let (ju, jv) = Jet2::seed(u, v);
        (self.field)(ju, jv)
    }

    pub fn value(&self, u: f64, v: f64) -> f64 {
        (self.field)(Jet2::constant(u), Jet2::constant(v)).v
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoserConfig {
    /// Initial RK4 steps over `[0, 1]`.
    pub steps: usize,
    /// Bound on the endpoint change under step halving.
    pub tol: f64,
}

impl Default for MoserConfig {
    fn default() -> Self {
        MoserConfig { steps: 16, tol: 1e-10 }
    }
}

pub(crate) struct MoserFlow {
    rho0: Density,
    rho1: Density,
    sigma: OneForm,
    pub(crate) certificate: FlowCertificate,
}

impl MoserFlow {
    /// `V_t = (−q, p)/ρ_t` solving `Ω_t(V_t, −) = −σ`, with its Jacobian.
    fn field(&self, t: f64, z: Vec2) -> (Vec2, Mat2) {
        let (pq, dpq) = self.sigma.coefficients(z[0], z[1]);
        let r0 = self.rho0.jet(z[0], z[1]);
        let r1 = self.rho1.jet(z[0], z[1]);
        let rho = (1.0 - t) * r0.v + t * r1.v;
        let grho = Vec2::new(
            (1.0 - t) * r0.d[0] + t * r1.d[0],
            (1.0 - t) * r0.d[1] + t * r1.d[1],
        );
        let v = Vec2::new(-pq[1], pq[0]) / rho;
        let gq = Vec2::new(dpq[(1, 0)], dpq[(1, 1)]);
        let gp = Vec2::new(dpq[(0, 0)], dpq[(0, 1)]);
        let row_u = -(gq * rho - grho * pq[1]) / (rho * rho);
        let row_v = (gp * rho - grho * pq[0]) / (rho * rho);
        (v, Mat2::new(row_u[0], row_u[1], row_v[0], row_v[1]))
    }

    fn integrate(&self, z: Vec2, steps: usize) -> (Vec2, Mat2) {
        let h = 1.0 / steps as f64;
        let mut z = z;
        let mut m = Mat2::identity();
        for k in 0..steps {
            let t = k as f64 * h;
            let (v1, a1) = self.field(t, z);
            let k1 = (v1, a1 * m);
            let (v2, a2) = self.field(t + 0.5 * h, z + 0.5 * h * k1.0);
            let k2 = (v2, a2 * (m + 0.5 * h * k1.1));
            let (v3, a3) = self.field(t + 0.5 * h, z + 0.5 * h * k2.0);
            let k3 = (v3, a3 * (m + 0.5 * h * k2.1));
            let (v4, a4) = self.field(t + h, z + h * k3.0);
            let k4 = (v4, a4 * (m + h * k3.1));
            z += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            m += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (z, m)
    }

    pub(crate) fn eval(&self, surface: &Surface, p: &Point) -> Result<(Point, Mat2)> {
        let (z, d) = self.integrate(p.coords(), self.certificate.steps);
        let v = if surface.periodic_v(ChartId::Base) { wrap_unit(z[1]) } else { z[1] };
        Ok((Point::new(ChartId::Base, z[0], v), d))
    }
}

/// The time-one map `τ₁` of the Moser flow from `Ω0 = ρ0 du∧dv` to
/// `Ω1 = ρ1 du∧dv` with `dσ = Ω1 − Ω0`, satisfying `τ₁^*Ω1 = Ω0`.
pub fn moser_interpolate(
    surface: &Arc<Surface>,
    rho0: &Density,
    rho1: &Density,
    sigma: &OneForm,
    cfg: &MoserConfig,
) -> Result<SurfaceMap> {
    if surface.kind() == SurfaceKind::Capped {
        return Err(Error::InvalidInput("Moser flows act on the base surface".into()));
    }
    if cfg.steps < 1 || !(cfg.tol > 0.0) {
        return Err(Error::InvalidInput("Moser steps and tolerance must be positive".into()));
    }
    let samples = sample_base(surface, 200, 0x5eed);
    for p in &samples {
        if !(rho0.value(p.u, p.v) > 0.0 && rho1.value(p.u, p.v) > 0.0) {
            return Err(Error::InvalidInput("densities must be positive".into()));
        }
    }
    let c = surface.form_coefficient(ChartId::Base);
    let opts = IntegrationOptions::default();
    let left = area_integrate(surface, &|p: &Point| Ok(rho0.value(p.u, p.v) / c), opts)?.value;
    let right = area_integrate(surface, &|p: &Point| Ok(rho1.value(p.u, p.v) / c), opts)?.value;
    if (left - right).abs() > FORM_TOL * left.abs().max(1.0) {
        return Err(Error::UnequalAreas { left, right });
    }
    let defect = samples
        .iter()
        .map(|p| {
            (sigma.exterior_derivative(p.u, p.v) - (rho1.value(p.u, p.v) - rho0.value(p.u, p.v))).abs()
        })
        .fold(0.0, f64::max);
    if defect > FORM_TOL {
        return Err(Error::NotAPrimitive { defect });
    }
    let defect = sigma.boundary_restriction_defect(surface);
    if defect > FORM_TOL {
        return Err(Error::NonzeroBoundaryRestriction { defect });
    }

    let mut flow = MoserFlow {
        rho0: rho0.clone(),
        rho1: rho1.clone(),
        sigma: sigma.clone(),
        certificate: FlowCertificate { steps: cfg.steps, halving_defect: f64::NAN },
    };
    let grid: Vec<Vec2> = surface.seed_grid(5).iter().map(|p| p.coords()).collect();
    let run = |f: &MoserFlow, n: usize| -> Vec<Vec2> { grid.iter().map(|z| f.integrate(*z, n).0).collect() };
    let mut n = cfg.steps;
    let mut coarse = run(&flow, n);
    let mut halving = f64::INFINITY;
    let mut certified = false;
    for _ in 0..12 {
        let fine = run(&flow, 2 * n);
        halving = coarse.iter().zip(&fine).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        n *= 2;
        if halving < cfg.tol {
            certified = true;
            break;
        }
        coarse = fine;
    }
    if !certified {
        return Err(Error::IntegratorNonConvergence { defect: halving, steps: n });
    }
    flow.certificate = FlowCertificate { steps: n, halving_defect: halving };
    Ok(SurfaceMap::new(
        surface.clone(),
        Representation::Moser(Box::new(flow)),
        format!("Moser map {} → {}", rho0.label, rho1.label),
    ))
}

/// `max |det Dτ(p) · ρ1(τ(p)) − ρ0(p)|` over an `n × n` seed grid.
pub fn moser_pullback_defect(map: &SurfaceMap, rho0: &Density, rho1: &Density, n: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in map.surface().seed_grid(n) {
        let (q, d) = map.apply_with_derivative(&p)?;
        worst = worst.max((d.determinant() * rho1.value(q.u, q.v) - rho0.value(p.u, p.v)).abs());
    }
    Ok(worst)
}
