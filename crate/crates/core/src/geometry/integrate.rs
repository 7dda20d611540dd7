//! Area integration with a polynomial partition of unity, and pullback checks.

use std::f64::consts::PI;

use super::{CapChart, ChartId, Point, Shape, Surface};
use crate::error::Result;
use crate::quadrature::{integrate_rect, Estimate};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    /// Absolute tolerance on the whole integral.
    pub tol: f64,
    /// Maximum number of panel doublings per piece.
    pub max_level: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions { tol: 1e-10, max_level: 6 }
    }
}

/// `6x⁵ − 15x⁴ + 10x³`, clamped to `[0, 1]`.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

/// A rectangle `[a, b] × [0, 1]` in parameter space mapped onto part of the
/// surface. `density` is the area element times the partition weight.
struct Piece<'a> {
    radial: (f64, f64),
    point: Box<dyn Fn(f64, f64) -> Point + Sync + 'a>,
    density: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
}

fn pieces<'a>(surface: &'a Surface) -> Vec<Piece<'a>> {
    let (base, delta) = match &surface.shape {
        Shape::Capped(c) => (c.base.as_ref(), Some(c.delta)),
        _ => (surface, None),
    };
    let weight = move |depth: f64| delta.map_or(1.0, |d| smoothstep(depth / d));
    let mut out: Vec<Piece<'a>> = Vec::new();
    match base.shape {
        Shape::Disk { area } => {
            let point = |rho: f64, tau: f64| {
                let th = 2.0 * PI * tau;
                Point::base(rho * th.cos(), rho * th.sin())
            };
            let split = delta.map(|d| (1.0 - d / area).sqrt());
            let mut cuts = vec![0.0];
            cuts.extend(split);
            cuts.push(1.0);
            for w in cuts.windows(2) {
                out.push(Piece {
                    radial: (w[0], w[1]),
                    point: Box::new(point),
                    density: Box::new(move |rho| {
                        2.0 * area * rho * weight(area * (1.0 - rho * rho))
                    }),
                });
            }
        }
        Shape::Annulus { width } => {
            let mut cuts = vec![0.0];
            if let Some(d) = delta {
                cuts.extend([d, width - d]);
            }
            cuts.push(width);
            for w in cuts.windows(2) {
                out.push(Piece {
                    radial: (w[0], w[1]),
                    point: Box::new(Point::base),
                    density: Box::new(move |s| weight(s.min(width - s))),
                });
            }
        }
        Shape::Capped(_) => unreachable!(),
    }
    if let Shape::Capped(c) = &surface.shape {
        let CapChart { r0, r1 } = c.chart;
        let d = c.delta;
        for i in 0..base.boundary_circles.len() {
            let point = move |r: f64, tau: f64| {
                let th = 2.0 * PI * tau;
                Point::new(ChartId::Cap(i), r * th.cos(), r * th.sin())
            };
            out.push(Piece {
                radial: (0.0, r0),
                point: Box::new(point),
                density: Box::new(|r| 2.0 * PI * r),
            });
            out.push(Piece {
                radial: (r0, r1),
                point: Box::new(point),
                density: Box::new(move |r| {
                    2.0 * PI * r * (1.0 - smoothstep(PI * (r * r - r0 * r0) / d))
                }),
            });
        }
    }
    out
}

/// `∫ f ω` over the whole surface. `f` receives canonical points. Pieces are
/// integrated in a fixed order, so the result is deterministic.
pub fn area_integrate<F>(surface: &Surface, f: &F, opts: IntegrationOptions) -> Result<Estimate>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    let parts = pieces(surface);
    let tol = opts.tol / parts.len() as f64;
    let mut total = Estimate { value: 0.0, achieved_tolerance: 0.0, converged: true, levels: 0 };
    for piece in &parts {
        let g = |r: f64, tau: f64| -> Result<f64> {
            let w = (piece.density)(r);
            if w == 0.0 {
                return Ok(0.0);
            }
            let p = surface.canonical(&(piece.point)(r, tau))?;
            Ok(w * f(&p)?)
        };
        let e = integrate_rect(&g, piece.radial, (0.0, 1.0), tol, opts.max_level)?;
        total.value += e.value;
        total.achieved_tolerance += e.achieved_tolerance;
        total.converged &= e.converged;
        total.levels = total.levels.max(e.levels);
    }
    Ok(total)
}

fn grid(n: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
}

/// Maximum pullback defect of one gluing chart: the Jacobian identity
/// `ψ^*(r dr∧dθ) = ds∧dt` on an `n × n` grid over `[0, δ] × [0, 1)`, together
/// with its integrated form `π|ψ(s, t)|² = (B − A)/n + s`.
pub fn verify_cap_chart(
    chart: &CapChart,
    base_area: f64,
    target_area: f64,
    circles: usize,
    delta: f64,
    n: usize,
) -> f64 {
    let n = n.max(2);
    let enclosed0 = (target_area - base_area) / circles as f64;
    let mut worst = 0.0f64;
    for s in grid(n, 0.0, delta) {
        for k in 0..n {
            let t = k as f64 / n as f64;
            let (xy, j) = chart.psi(s, t);
            worst = worst.max((j.determinant() - 1.0).abs());
            let enclosed = PI * xy.norm_squared();
            worst = worst.max((enclosed - (enclosed0 + s)).abs());
        }
    }
    worst
}

fn collar_defect(surface: &Surface, n: usize) -> f64 {
    let c_base = surface.form_coefficient(ChartId::Base);
    let limit = surface.collar_limit();
    let mut worst = 0.0f64;
    for (i, circle) in surface.lagrangian_circles().iter().enumerate() {
        for s in grid(n, 0.0, 0.999 * limit) {
            for k in 0..n {
                let t = k as f64 / n as f64;
                let (_, j) = circle.collar_chart.embed(s, t);
                worst = worst.max((j.determinant() * c_base - 1.0).abs());
                let p = Point::new(ChartId::Collar(i), s, t);
                if let Some((_, jt)) = surface.transition(&p, ChartId::Base) {
                    worst = worst.max((jt.determinant() * c_base - 1.0).abs());
                }
            }
        }
    }
    worst
}

/// Maximum over an `n × n` grid per chart transition of
/// `|det J · (form coefficient) − expected coefficient|`.
pub fn verify_area_form(surface: &Surface, grid_density: usize) -> f64 {
    let n = grid_density.max(2);
    let mut worst = collar_defect(surface, n);
    if let Some(cap) = surface.capping() {
        let circles = cap.base.boundary_circles.len();
        worst = worst.max(verify_cap_chart(
            &cap.chart,
            cap.base.total_area,
            surface.total_area,
            circles,
            cap.delta,
            n,
        ));
        let c_base = surface.form_coefficient(ChartId::Base);
        for i in 0..circles {
            for s in grid(n, 0.0, 0.999 * cap.delta) {
                for k in 0..n {
                    let t = k as f64 / n as f64;
                    let (xy, _) = cap.chart.psi(s, t);
                    let q = Point::new(ChartId::Cap(i), xy[0], xy[1]);
                    if let Some((_, j)) = surface.transition(&q, ChartId::Base) {
                        // cap form coefficient is 1
                        worst = worst.max((j.determinant() * c_base - 1.0).abs());
                    }
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cap_surface;

    fn opts() -> IntegrationOptions {
        IntegrationOptions::default()
    }

    #[test]
    fn partition_of_unity_sums_to_one() {
        for x in [0.0, 0.1, 0.37, 0.5, 0.9, 1.0] {
            assert!((smoothstep(x) + (1.0 - smoothstep(x)) - 1.0).abs() < 1e-16);
        }
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
    }

    #[test]
    fn integrals_of_simple_fields() {
        let disk = Surface::disk(1.0).unwrap();
        let one = area_integrate(&disk, &|_: &Point| Ok(1.0), opts()).unwrap();
        assert!((one.value - 1.0).abs() < 1e-10);
        let r2 = area_integrate(&disk, &|p: &Point| Ok(p.u * p.u + p.v * p.v), opts()).unwrap();
        assert!((r2.value - 0.5).abs() < 1e-10);
        let ann = Surface::annulus(1.0).unwrap();
        let s = area_integrate(&ann, &|p: &Point| Ok((2.0 * PI * p.v).sin()), opts()).unwrap();
        assert!(s.value.abs() < 1e-12);
    }

    #[test]
    fn total_area_of_every_kind() {
        let disk = Surface::disk(1.3).unwrap();
        let ann = Surface::annulus(0.8).unwrap();
        let surfaces = [
            disk.clone(),
            ann.clone(),
            cap_surface(&disk, 2.0, 0.1).unwrap(),
            cap_surface(&ann, 1.7, 0.2).unwrap(),
        ];
        for s in surfaces {
            let e = area_integrate(&s, &|_: &Point| Ok(1.0), opts()).unwrap();
            assert!(e.converged);
            assert!((e.value - s.total_area()).abs() < 1e-10, "{:?}: {}", s.kind(), e.value);
        }
    }

    #[test]
    fn capped_integral_splits_into_regions() {
        let disk = Surface::disk(1.0).unwrap();
        let capped = cap_surface(&disk, 2.0, 0.1).unwrap();
        // indicator of Z, smooth enough across L once weighted
        let e = area_integrate(
            &capped,
            &|p: &Point| Ok(if capped.in_base(p) { 1.0 } else { 0.0 }),
            opts(),
        )
        .unwrap();
        assert!((e.value - 1.0).abs() < 1e-10, "{}", e.value);
    }

    #[test]
    fn pullback_defects() {
        let ann = Surface::annulus(1.0).unwrap();
        assert!(verify_area_form(&ann, 50) < 1e-14);
        let disk = Surface::disk(1.0).unwrap();
        assert!(verify_area_form(&disk, 50) < 1e-12);
        let capped = cap_surface(&disk, 2.0, 0.1).unwrap();
        assert!(verify_area_form(&capped, 100) < 1e-10);
        let mut bad = capped.capping().unwrap().chart;
        bad.r0 *= 1.01;
        assert!(verify_cap_chart(&bad, 1.0, 2.0, 1, 0.1, 100) > 1e-3);
    }
}
