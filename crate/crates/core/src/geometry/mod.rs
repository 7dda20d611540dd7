//! Concrete surfaces: the disk, the flat annulus, and their cappings.
//!
//! Every chart carries a constant area density, so area preservation in
//! chart coordinates is a determinant condition. Charts:
//!
//! * `Base`: Cartesian `(x, y)` on the unit disk with `ω = (A/π) dx∧dy`,
//!   or `(s, t) ∈ [0, w] × ℝ/ℤ` on the annulus with `ω = ds∧dt`.
//! * `Collar(i)`: `(s, t) ∈ [0, collar) × ℝ/ℤ` with `τ_i^*ω = ds∧dt`,
//!   `τ_i(0, ·)` the i-th boundary circle and `s` increasing into the surface.
//! * `Cap(i)`: Cartesian coordinates on the i-th cap disk of radius `r1`,
//!   area form `dx∧dy = r dr∧dθ`, glued along the collar by `ψ`.

mod integrate;

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Coordinates;
use crate::linalg::{Mat2, Vec2};

pub use integrate::{area_integrate, smoothstep, verify_area_form, verify_cap_chart, IntegrationOptions};

/// Slack allowed when deciding chart membership.
pub const DOMAIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Disk,
    Annulus,
    Capped,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChartId {
    Base,
    Collar(usize),
    Cap(usize),
}

impl ChartId {
    fn rank(&self) -> (u8, usize) {
        match self {
            ChartId::Base => (0, 0),
            ChartId::Collar(i) => (1, *i),
            ChartId::Cap(i) => (2, *i),
        }
    }
}

/// A point in a named chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub chart: ChartId,
    pub u: f64,
    pub v: f64,
}

impl Point {
    pub fn new(chart: ChartId, u: f64, v: f64) -> Self {
        Point { chart, u, v }
    }

    pub fn base(u: f64, v: f64) -> Self {
        Point::new(ChartId::Base, u, v)
    }

    pub fn coords(&self) -> Vec2 {
        Vec2::new(self.u, self.v)
    }

    pub fn with_coords(&self, c: Vec2) -> Self {
        Point::new(self.chart, c[0], c[1])
    }

    /// Total order used for canonical orbit labelling.
    pub fn order_key(&self) -> (u8, usize, f64, f64) {
        let (a, b) = self.chart.rank();
        (a, b, self.u, self.v)
    }
}

/// The collar embedding `τ_i: [0, collar) × ℝ/ℤ → Z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CollarChart {
    /// Unit disk of area `area`: `ρ = sqrt(1 − s/A)`, `θ = −2πt`.
    Disk { area: f64 },
    /// `s = 0` side of the annulus: identity.
    AnnulusInner,
    /// `s = w` side of the annulus: `(s, t) ↦ (w − s, −t)`.
    AnnulusOuter { width: f64 },
}

impl CollarChart {
    /// Collar → base chart, with Jacobian ∂(u, v)/∂(s, t).
    pub fn embed(&self, s: f64, t: f64) -> (Vec2, Mat2) {
        match *self {
            CollarChart::Disk { area } => {
                let rho = (1.0 - s / area).max(0.0).sqrt();
                let theta = -2.0 * PI * t;
                let (sn, cs) = theta.sin_cos();
                let drho = -1.0 / (2.0 * area * rho);
                let j = Mat2::new(
                    cs * drho,
                    2.0 * PI * rho * sn,
                    sn * drho,
                    -2.0 * PI * rho * cs,
                );
                (Vec2::new(rho * cs, rho * sn), j)
            }
            CollarChart::AnnulusInner => (Vec2::new(s, t), Mat2::identity()),
            CollarChart::AnnulusOuter { width } => {
                (Vec2::new(width - s, -t), Mat2::new(-1.0, 0.0, 0.0, -1.0))
            }
        }
    }

    /// Base chart → collar, with Jacobian ∂(s, t)/∂(u, v). `t` is reduced to `[0, 1)`.
    pub fn locate(&self, u: f64, v: f64) -> (Vec2, Mat2) {
        match *self {
            CollarChart::Disk { area } => {
                let r2 = u * u + v * v;
                let s = area * (1.0 - r2);
                let t = wrap_unit(-v.atan2(u) / (2.0 * PI));
                // ds = −2A(x dx + y dy), dt = −(x dy − y dx)/(2π r²)
                let j = Mat2::new(
                    -2.0 * area * u,
                    -2.0 * area * v,
                    v / (2.0 * PI * r2),
                    -u / (2.0 * PI * r2),
                );
                (Vec2::new(s, t), j)
            }
            CollarChart::AnnulusInner => (Vec2::new(u, wrap_unit(v)), Mat2::identity()),
            CollarChart::AnnulusOuter { width } => {
                (Vec2::new(width - u, wrap_unit(-v)), Mat2::new(-1.0, 0.0, 0.0, -1.0))
            }
        }
    }
}

/// A boundary circle with its collar chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCircle {
    pub index: usize,
    pub collar_chart: CollarChart,
    /// −1: increasing `t` runs against the boundary orientation induced by ω.
    pub orientation: i8,
}

/// The gluing chart `ψ(s, t) = (sqrt((π r0² + s)/π), 2πt)` from the collar
/// onto the annulus `r0 ≤ r < r1` in a cap disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapChart {
    pub r0: f64,
    pub r1: f64,
}

impl CapChart {
    /// `r0 = sqrt((B − A)/(nπ))`, `r1 = sqrt((B − A + nδ)/(nπ))`.
    pub fn from_areas(base_area: f64, target_area: f64, n: usize, delta: f64) -> Self {
        let nf = n as f64;
        CapChart {
            r0: ((target_area - base_area) / (nf * PI)).sqrt(),
            r1: ((target_area - base_area + nf * delta) / (nf * PI)).sqrt(),
        }
    }

    pub fn disk_radius(&self) -> f64 {
        self.r1
    }

    /// Polar form `(r, θ)` of `ψ(s, t)`.
    pub fn psi_polar(&self, s: f64, t: f64) -> (f64, f64) {
        (((PI * self.r0 * self.r0 + s) / PI).sqrt(), 2.0 * PI * t)
    }

    /// `ψ` in Cartesian cap coordinates, with Jacobian.
    pub fn psi(&self, s: f64, t: f64) -> (Vec2, Mat2) {
        let (r, theta) = self.psi_polar(s, t);
        let (sn, cs) = theta.sin_cos();
        let dr = 1.0 / (2.0 * PI * r);
        let j = Mat2::new(cs * dr, -2.0 * PI * r * sn, sn * dr, 2.0 * PI * r * cs);
        (Vec2::new(r * cs, r * sn), j)
    }

    /// `ψ⁻¹` from Cartesian cap coordinates, with Jacobian; `t ∈ [0, 1)`.
    pub fn psi_inv(&self, x: f64, y: f64) -> (Vec2, Mat2) {
        let r2 = x * x + y * y;
        let s = PI * (r2 - self.r0 * self.r0);
        let t = wrap_unit(y.atan2(x) / (2.0 * PI));
        let j = Mat2::new(
            2.0 * PI * x,
            2.0 * PI * y,
            -y / (2.0 * PI * r2),
            x / (2.0 * PI * r2),
        );
        (Vec2::new(s, t), j)
    }
}

/// Data attached to a capped surface.
#[derive(Clone, Debug)]
pub struct Capping {
    pub base: Arc<Surface>,
    pub chart: CapChart,
    pub delta: f64,
}

#[derive(Clone, Debug)]
enum Shape {
    Disk { area: f64 },
    Annulus { width: f64 },
    Capped(Capping),
}

/// A concrete chartable surface. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Surface {
    kind: SurfaceKind,
    total_area: f64,
    boundary_circles: Vec<BoundaryCircle>,
    collar_width: f64,
    shape: Shape,
}

/// Serializable summary of a surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub kind: SurfaceKind,
    pub total_area: f64,
    pub boundary_circles: usize,
    pub collar_width: f64,
    pub base_area: Option<f64>,
    pub lagrangian_circles: usize,
    pub r0: Option<f64>,
    pub r1: Option<f64>,
}

/// Reduces to `[0, 1)`.
pub fn wrap_unit(t: f64) -> f64 {
    let w = t - t.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Reduces to `(−1/2, 1/2]`.
pub fn wrap_centered(t: f64) -> f64 {
    let w = t - t.round();
    if w <= -0.5 {
        w + 1.0
    } else {
        w
    }
}

impl Surface {
    /// Unit disk carrying `ω = (A/π) dx∧dy`.
    pub fn disk(area: f64) -> Result<Arc<Surface>> {
        if !(area > 0.0 && area.is_finite()) {
            return Err(Error::InvalidArea(format!("disk area must be positive, got {area}")));
        }
        Ok(Arc::new(Surface {
            kind: SurfaceKind::Disk,
            total_area: area,
            boundary_circles: vec![BoundaryCircle {
                index: 0,
                collar_chart: CollarChart::Disk { area },
                orientation: -1,
            }],
            collar_width: 0.5 * area,
            shape: Shape::Disk { area },
        }))
    }

    /// Flat annulus `[0, w] × ℝ/ℤ` carrying `ds∧dt`.
    pub fn annulus(width: f64) -> Result<Arc<Surface>> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArea(format!("annulus width must be positive, got {width}")));
        }
        Ok(Arc::new(Surface {
            kind: SurfaceKind::Annulus,
            total_area: width,
            boundary_circles: vec![
                BoundaryCircle { index: 0, collar_chart: CollarChart::AnnulusInner, orientation: -1 },
                BoundaryCircle {
                    index: 1,
                    collar_chart: CollarChart::AnnulusOuter { width },
                    orientation: -1,
                },
            ],
            collar_width: 0.5 * width,
            shape: Shape::Annulus { width },
        }))
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn boundary_circles(&self) -> &[BoundaryCircle] {
        &self.boundary_circles
    }

    pub fn collar_width(&self) -> f64 {
        self.collar_width
    }

    pub fn capping(&self) -> Option<&Capping> {
        match &self.shape {
            Shape::Capped(c) => Some(c),
            _ => None,
        }
    }

    /// The surface `Z` for a capped surface, itself otherwise.
    pub fn base_surface(self: &Arc<Self>) -> &Arc<Surface> {
        match &self.shape {
            Shape::Capped(c) => &c.base,
            _ => self,
        }
    }

    /// Boundary circles of `Z`; on a capped surface these are the circles of `L`.
    pub fn lagrangian_circles(&self) -> &[BoundaryCircle] {
        match &self.shape {
            Shape::Capped(c) => &c.base.boundary_circles,
            _ => &self.boundary_circles,
        }
    }

    /// Coordinates of the base chart.
    pub fn coordinates(&self) -> Coordinates {
        match self.base_shape() {
            Shape::Disk { .. } => Coordinates::Cartesian,
            _ => Coordinates::Annulus,
        }
    }

    /// Width `w` of the flat annulus underlying this surface.
    pub fn annulus_width(&self) -> Option<f64> {
        match self.base_shape() {
            Shape::Annulus { width } => Some(*width),
            _ => None,
        }
    }

    /// Area of the disk underlying this surface.
    pub fn disk_area(&self) -> Option<f64> {
        match self.base_shape() {
            Shape::Disk { area } => Some(*area),
            _ => None,
        }
    }

    pub fn same_as(&self, other: &Surface) -> bool {
        std::ptr::eq(self, other)
    }

    pub fn summary(&self) -> SurfaceSummary {
        let cap = self.capping();
        SurfaceSummary {
            kind: self.kind,
            total_area: self.total_area,
            boundary_circles: self.boundary_circles.len(),
            collar_width: self.collar_width,
            base_area: cap.map(|c| c.base.total_area),
            lagrangian_circles: self.lagrangian_circles().len(),
            r0: cap.map(|c| c.chart.r0),
            r1: cap.map(|c| c.chart.r1),
        }
    }

    /// Constant area density of a chart with respect to `du∧dv`.
    pub fn form_coefficient(&self, chart: ChartId) -> f64 {
        match (&self.shape, chart) {
            (Shape::Disk { area }, ChartId::Base) => area / PI,
            (Shape::Capped(c), ChartId::Base) => c.base.form_coefficient(ChartId::Base),
            _ => 1.0,
        }
    }

    fn base_shape(&self) -> &Shape {
        match &self.shape {
            Shape::Capped(c) => &c.base.shape,
            s => s,
        }
    }

    /// Whether a chart's `v` coordinate is periodic.
    pub fn periodic_v(&self, chart: ChartId) -> bool {
        match chart {
            ChartId::Base => matches!(self.base_shape(), Shape::Annulus { .. }),
            ChartId::Collar(_) => true,
            ChartId::Cap(_) => false,
        }
    }

    fn collar_limit(&self) -> f64 {
        match &self.shape {
            Shape::Capped(c) => c.base.collar_width,
            _ => self.collar_width,
        }
    }

    /// Reduces periodic coordinates.
    pub fn normalize(&self, p: &Point) -> Point {
        if self.periodic_v(p.chart) {
            Point::new(p.chart, p.u, wrap_unit(p.v))
        } else {
            *p
        }
    }

    /// Whether `p` lies in its chart's domain.
    pub fn contains(&self, p: &Point) -> bool {
        if !(p.u.is_finite() && p.v.is_finite()) {
            return false;
        }
        let n = self.lagrangian_circles().len();
        match p.chart {
            ChartId::Base => match self.base_shape() {
                Shape::Disk { .. } => p.u * p.u + p.v * p.v <= (1.0 + DOMAIN_TOL).powi(2),
                Shape::Annulus { width } => p.u >= -DOMAIN_TOL && p.u <= width + DOMAIN_TOL,
                Shape::Capped(_) => unreachable!(),
            },
            ChartId::Collar(i) => i < n && p.u >= -DOMAIN_TOL && p.u < self.collar_limit(),
            ChartId::Cap(i) => match &self.shape {
                Shape::Capped(c) => i < n && p.u.hypot(p.v) < c.chart.r1,
                _ => false,
            },
        }
    }

    fn hop(&self, p: &Point, to: ChartId) -> Option<(Point, Mat2)> {
        let circles = self.lagrangian_circles();
        match (p.chart, to) {
            (ChartId::Base, ChartId::Collar(i)) => {
                let (c, j) = circles.get(i)?.collar_chart.locate(p.u, p.v);
                (c[0] >= -DOMAIN_TOL && c[0] < self.collar_limit())
                    .then(|| (Point::new(to, c[0], c[1]), j))
            }
            (ChartId::Collar(i), ChartId::Base) => {
                if p.u < -DOMAIN_TOL || p.u >= self.collar_limit() {
                    return None;
                }
                let (c, j) = circles.get(i)?.collar_chart.embed(p.u, p.v);
                Some((self.normalize(&Point::new(to, c[0], c[1])), j))
            }
            (ChartId::Collar(i), ChartId::Cap(k)) if i == k => {
                let cap = self.capping()?;
                if p.u < -DOMAIN_TOL || p.u >= cap.delta {
                    return None;
                }
                let (c, j) = cap.chart.psi(p.u, p.v);
                Some((Point::new(to, c[0], c[1]), j))
            }
            (ChartId::Cap(k), ChartId::Collar(i)) if i == k => {
                let cap = self.capping()?;
                let (c, j) = cap.chart.psi_inv(p.u, p.v);
                (c[0] >= -DOMAIN_TOL && c[0] < cap.delta).then(|| (Point::new(to, c[0], c[1]), j))
            }
            _ => None,
        }
    }

    /// Expresses `p` in `target`, with Jacobian ∂(target)/∂(source).
    pub fn transition(&self, p: &Point, target: ChartId) -> Option<(Point, Mat2)> {
        if p.chart == target {
            return Some((self.normalize(p), Mat2::identity()));
        }
        let route: Vec<ChartId> = match (p.chart, target) {
            (ChartId::Base, ChartId::Cap(i)) => vec![ChartId::Collar(i), target],
            (ChartId::Cap(i), ChartId::Base) => vec![ChartId::Collar(i), target],
            (ChartId::Collar(i), ChartId::Collar(k)) => {
                vec![ChartId::Base, ChartId::Collar(k)].into_iter().filter(|_| i != k).collect()
            }
            (ChartId::Cap(i), ChartId::Collar(k)) if i != k => {
                vec![ChartId::Collar(i), ChartId::Base, target]
            }
            (ChartId::Collar(i), ChartId::Cap(k)) if i != k => {
                vec![ChartId::Base, ChartId::Collar(k), target]
            }
            (ChartId::Cap(i), ChartId::Cap(k)) if i != k => return None,
            _ => vec![target],
        };
        let mut cur = *p;
        let mut jac = Mat2::identity();
        for hop in route {
            let (next, j) = self.hop(&cur, hop)?;
            cur = next;
            jac = j * jac;
        }
        Some((cur, jac))
    }

    /// The representative of `p` in its canonical chart: `Base` for points of
    /// `Z` (including `L`), `Cap(i)` for cap points strictly inside `L`.
    pub fn canonical(&self, p: &Point) -> Result<Point> {
        let out = match p.chart {
            ChartId::Base => self.normalize(p),
            ChartId::Collar(_) => self
                .transition(p, ChartId::Base)
                .map(|(q, _)| q)
                .ok_or(Error::OutsideDomain { u: p.u, v: p.v })?,
            ChartId::Cap(i) => {
                let cap = self.capping().ok_or(Error::OutsideDomain { u: p.u, v: p.v })?;
                if p.u * p.u + p.v * p.v >= cap.chart.r0 * cap.chart.r0 {
                    self.transition(&Point::new(ChartId::Cap(i), p.u, p.v), ChartId::Base)
                        .map(|(q, _)| q)
                        .ok_or(Error::OutsideDomain { u: p.u, v: p.v })?
                } else {
                    *p
                }
            }
        };
        if !self.contains(&out) {
            return Err(Error::OutsideDomain { u: p.u, v: p.v });
        }
        Ok(out)
    }

    /// Canonical point with the Jacobian of the change of chart.
    pub fn canonical_with_jacobian(&self, p: &Point) -> Result<(Point, Mat2)> {
        let q = self.canonical(p)?;
        if q.chart == p.chart {
            return Ok((q, Mat2::identity()));
        }
        self.transition(p, q.chart).ok_or(Error::OutsideDomain { u: p.u, v: p.v })
    }

    /// `a − b` in `a`'s chart (periodic coordinates reduced to `(−1/2, 1/2]`).
    pub fn difference(&self, a: &Point, b: &Point) -> Option<Vec2> {
        let (b, _) = self.transition(b, a.chart)?;
        let mut d = a.coords() - b.coords();
        if self.periodic_v(a.chart) {
            d[1] = wrap_centered(d[1]);
        }
        Some(d)
    }

    /// Chart distance; infinite when no common chart exists.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        self.difference(a, b).map_or(f64::INFINITY, |d| d.norm())
    }

    /// Whether a canonical point belongs to `Z` (every point of a non-capped surface does).
    pub fn in_base(&self, p: &Point) -> bool {
        !matches!(p.chart, ChartId::Cap(_))
    }

    /// Signed distance (in area units) of a cap point from `L`: `π(r0² − r²)`,
    /// positive inside the cap; `None` for points of `Z`.
    pub fn cap_depth(&self, p: &Point) -> Option<f64> {
        let cap = self.capping()?;
        match p.chart {
            ChartId::Cap(_) => Some(PI * (cap.chart.r0.powi(2) - (p.u * p.u + p.v * p.v))),
            _ => None,
        }
    }

    /// The point `τ_i(s, t)` in canonical coordinates.
    pub fn collar_point(&self, i: usize, s: f64, t: f64) -> Result<Point> {
        self.canonical(&Point::new(ChartId::Collar(i), s, wrap_unit(t)))
    }

    /// Collar coordinates `(s, t)` of a point, if it lies in collar `i`.
    pub fn collar_coords(&self, i: usize, p: &Point) -> Option<(Vec2, Mat2)> {
        self.transition(p, ChartId::Collar(i)).map(|(q, j)| (q.coords(), j))
    }

    /// The index of the collar containing `p`, preferring the smallest `s`.
    pub fn nearest_collar(&self, p: &Point) -> Option<(usize, Vec2)> {
        (0..self.lagrangian_circles().len())
            .filter_map(|i| self.collar_coords(i, p).map(|(c, _)| (i, c)))
            .min_by(|a, b| a.1[0].total_cmp(&b.1[0]))
    }

    /// Uniform sample of the normalized area measure.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.shape {
            Shape::Disk { .. } => {
                let rho = rng.gen::<f64>().sqrt();
                let theta = 2.0 * PI * rng.gen::<f64>();
                Point::base(rho * theta.cos(), rho * theta.sin())
            }
            Shape::Annulus { width } => Point::base(width * rng.gen::<f64>(), rng.gen::<f64>()),
            Shape::Capped(c) => {
                let n = c.base.boundary_circles.len();
                let pick = rng.gen::<f64>() * self.total_area;
                if pick < c.base.total_area {
                    c.base.sample_uniform(rng)
                } else {
                    let i = (((pick - c.base.total_area) / (self.total_area - c.base.total_area))
                        * n as f64) as usize;
                    let r = c.chart.r0 * rng.gen::<f64>().sqrt();
                    let theta = 2.0 * PI * rng.gen::<f64>();
                    Point::new(ChartId::Cap(i.min(n - 1)), r * theta.cos(), r * theta.sin())
                }
            }
        }
    }

    /// Interior seed points on an `n × n` lattice per chart.
    pub fn seed_grid(&self, n: usize) -> Vec<Point> {
        let n = n.max(1);
        let lattice = |k: usize| -> f64 {
            if n == 1 {
                0.0
            } else {
                -1.0 + 2.0 * k as f64 / (n - 1) as f64
            }
        };
        match &self.shape {
            Shape::Disk { .. } => {
                let mut out = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        let (x, y) = (lattice(i), lattice(j));
                        if x * x + y * y < 1.0 - 1e-9 {
                            out.push(Point::base(x, y));
                        }
                    }
                }
                out
            }
            Shape::Annulus { width } => {
                let mut out = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        let s = width * (i as f64 + 0.5) / n as f64;
                        out.push(Point::base(s, j as f64 / n as f64));
                    }
                }
                out
            }
            Shape::Capped(c) => {
                let mut out = c.base.seed_grid(n);
                for k in 0..c.base.boundary_circles.len() {
                    for i in 0..n {
                        for j in 0..n {
                            let (x, y) = (c.chart.r0 * lattice(i), c.chart.r0 * lattice(j));
                            if x * x + y * y < c.chart.r0 * c.chart.r0 * (1.0 - 1e-9) {
                                out.push(Point::new(ChartId::Cap(k), x, y));
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Whether `B/A` is a rational number with denominator at most `q_max`.
    pub fn area_ratio_rational(&self, q_max: u64, tol: f64) -> Option<(i64, u64)> {
        let cap = self.capping()?;
        let ratio = self.total_area / cap.base.total_area;
        let (p, q) = crate::homology::best_rational(ratio, q_max);
        ((ratio - p as f64 / q as f64).abs() < tol).then_some((p, q))
    }
}

/// Builds the capped surface `Σ ⊃ Z` of total area `B` by gluing one disk of
/// radius `r1` onto each boundary circle of `base` along a collar of width `δ`.
pub fn cap_surface(base: &Arc<Surface>, target_area: f64, delta: f64) -> Result<Arc<Surface>> {
    if base.kind == SurfaceKind::Capped {
        return Err(Error::InvalidInput("surface is already capped".into()));
    }
    let n = base.boundary_circles.len();
    if n == 0 {
        return Err(Error::InvalidInput("base surface has no boundary circles".into()));
    }
    let a = base.total_area;
    if !(target_area > a) || !target_area.is_finite() {
        return Err(Error::InvalidArea(format!(
            "target area B = {target_area} must exceed base area A = {a}"
        )));
    }
    if !(delta > 0.0 && delta < base.collar_width) {
        return Err(Error::InvalidCollar(format!(
            "collar width δ = {delta} must lie in (0, {})",
            base.collar_width
        )));
    }
    let chart = CapChart::from_areas(a, target_area, n, delta);
    Ok(Arc::new(Surface {
        kind: SurfaceKind::Capped,
        total_area: target_area,
        boundary_circles: Vec::new(),
        collar_width: delta,
        shape: Shape::Capped(Capping { base: Arc::clone(base), chart, delta }),
    }))
}
