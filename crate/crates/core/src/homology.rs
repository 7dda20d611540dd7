//! Flux of isotopies over 1-cycles and rationality verdicts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_centered, ChartId, Point, Surface, SurfaceKind};
use crate::linalg::Vec2;
use crate::maps::Hamiltonian;
use crate::quadrature::integrate_rect;

/// Curves whose endpoints are closer than this are closed.
pub const CLOSURE_TOL: f64 = 1e-10;
/// Fluxes below this certify a Hamiltonian isotopy.
pub const FLUX_TOL: f64 = 1e-8;

/// Best rational approximation `p/q` of `x` with `1 ≤ q ≤ q_max`, from the
/// continued-fraction convergents and semiconvergents.
pub fn best_rational(x: f64, q_max: u64) -> (i64, u64) {
    let q_max = q_max.max(1);
    let a0 = x.floor();
    let mut frac = x - a0;
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0u64, a0 as i64, 1u64);
    let mut best = (p1, q1);
    for _ in 0..64 {
        if frac.abs() < 1e-300 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let a = a as u64;
        let q2 = a.saturating_mul(q1).saturating_add(q0);
        if q2 > q_max {
            // largest admissible semiconvergent
            let m = (q_max - q0) / q1.max(1);
            let cand = (m as i64 * p1 + p0, m * q1 + q0);
            if m > 0 {
                let err = |(p, q): (i64, u64)| (x - p as f64 / q as f64).abs();
                if err(cand) < err(best) {
                    best = cand;
                }
            }
            break;
        }
        let p2 = a as i64 * p1 + p0;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        best = (p1, q1);
    }
    best
}

/// One piece of a cycle, parameterized by `τ ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CyclePiece {
    /// Straight segment in base-chart coordinates.
    Segment { from: [f64; 2], to: [f64; 2] },
    /// The circle `s = depth` of collar `circle`, traversed with increasing `t`.
    Collar { circle: usize, depth: f64 },
}

/// A 1-cycle in `Z` (closed), or a relative cycle with endpoints on `∂Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub id: String,
    pub pieces: Vec<CyclePiece>,
    pub closed: bool,
    /// Distance between end and start point.
    pub closure_defect: f64,
}

impl CycleSpec {
    /// Built-in cycles: `core` and `radial` on the annulus, `boundary-<i>` on any base surface.
    pub fn builtin(surface: &Surface, name: &str) -> Result<Self> {
        let pieces = if let Some(i) = name.strip_prefix("boundary-") {
            let circle: usize = i.parse().map_err(|_| Error::InvalidInput(format!("bad cycle name {name}")))?;
            if circle >= surface.boundary_circles().len() {
                return Err(Error::InvalidInput(format!("no boundary circle {circle}")));
            }
            vec![CyclePiece::Collar { circle, depth: 0.0 }]
        } else {
            let w = surface
                .annulus_width()
                .filter(|_| surface.kind() == SurfaceKind::Annulus)
                .ok_or_else(|| Error::InvalidInput(format!("cycle {name} needs an annulus")))?;
            match name {
                "core" => vec![CyclePiece::Segment { from: [0.5 * w, 0.0], to: [0.5 * w, 1.0] }],
                "radial" => vec![CyclePiece::Segment { from: [0.0, 0.0], to: [w, 0.0] }],
                _ => return Err(Error::InvalidInput(format!("unknown cycle {name}"))),
            }
        };
        Self::from_pieces(surface, name, pieces)
    }

    /// A polyline through base-chart vertices.
    pub fn polyline(surface: &Surface, id: &str, vertices: &[[f64; 2]]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("a polyline needs two vertices".into()));
        }
        let pieces = vertices.windows(2).map(|w| CyclePiece::Segment { from: w[0], to: w[1] }).collect();
        Self::from_pieces(surface, id, pieces)
    }

    fn from_pieces(surface: &Surface, id: &str, pieces: Vec<CyclePiece>) -> Result<Self> {
        if surface.kind() == SurfaceKind::Capped {
            return Err(Error::InvalidInput("cycles live on the base surface".into()));
        }
        let mut cycle = CycleSpec { id: id.to_string(), pieces, closed: false, closure_defect: 0.0 };
        for piece in &cycle.pieces {
            for tau in [0.0, 0.5, 1.0] {
                let (z, _) = cycle.eval(surface, piece, tau)?;
                if !surface.contains(&Point::base(z[0], z[1])) {
                    return Err(Error::OutsideDomain { u: z[0], v: z[1] });
                }
            }
        }
        let (start, _) = cycle.eval(surface, &cycle.pieces[0], 0.0)?;
        let (end, _) = cycle.eval(surface, cycle.pieces.last().expect("nonempty"), 1.0)?;
        cycle.closure_defect = surface.distance(&Point::base(end[0], end[1]), &Point::base(start[0], start[1]));
        cycle.closed = cycle.closure_defect < CLOSURE_TOL;
        Ok(cycle)
    }

    /// Position and velocity in base-chart coordinates.
    pub fn eval(&self, surface: &Surface, piece: &CyclePiece, tau: f64) -> Result<(Vec2, Vec2)> {
        match *piece {
            CyclePiece::Segment { from, to } => {
                let (a, b) = (Vec2::from(from), Vec2::from(to));
                Ok((a + tau * (b - a), b - a))
            }
            CyclePiece::Collar { circle, depth } => {
                let bc = surface
                    .boundary_circles()
                    .get(circle)
                    .ok_or_else(|| Error::InvalidInput(format!("no boundary circle {circle}")))?;
                let (z, j) = bc.collar_chart.embed(depth, tau);
                Ok((z, j * Vec2::new(0.0, 1.0)))
            }
        }
    }
}

/// Default homology basis of a base surface.
pub fn default_basis(surface: &Surface) -> Result<Vec<CycleSpec>> {
    match surface.kind() {
        SurfaceKind::Annulus => Ok(vec![CycleSpec::builtin(surface, "core")?]),
        SurfaceKind::Disk => Ok(Vec::new()),
        SurfaceKind::Capped => Err(Error::InvalidInput("cycles live on the base surface".into())),
    }
}

pub type FieldFn = Arc<dyn Fn(f64, Vec2) -> Vec2 + Send + Sync>;

/// An isotopy `ψ^u`, `u ∈ [0, 1]`, given by its generating vector field.
#[derive(Clone)]
pub enum Isotopy {
    Identity,
    Hamiltonian(Hamiltonian),
    /// `(s, t) ↦ (s, t + u c)` on the annulus.
    Shear { c: f64 },
    /// A time-dependent field in base-chart coordinates.
    VectorField { label: String, field: FieldFn },
    /// The first isotopy followed by the second, each at double speed.
    Concat(Box<Isotopy>, Box<Isotopy>),
    /// `u ↦ ψ^{1−u} ∘ (ψ^1)^{−1}`.
    Reverse(Box<Isotopy>),
}

impl std::fmt::Debug for Isotopy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Isotopy::Identity => write!(f, "Identity"),
            Isotopy::Hamiltonian(h) => write!(f, "Hamiltonian({})", h.label()),
            Isotopy::Shear { c } => write!(f, "Shear({c})"),
            Isotopy::VectorField { label, .. } => write!(f, "VectorField({label})"),
            Isotopy::Concat(a, b) => write!(f, "Concat({a:?}, {b:?})"),
            Isotopy::Reverse(a) => write!(f, "Reverse({a:?})"),
        }
    }
}

impl Isotopy {
    /// `X_u(z)` in base-chart coordinates.
    pub fn field(&self, surface: &Surface, u: f64, z: Vec2) -> Vec2 {
        match self {
            Isotopy::Identity => Vec2::zeros(),
            Isotopy::Hamiltonian(h) => h.vector_field(surface, u, z).0,
            Isotopy::Shear { c } => Vec2::new(0.0, *c),
            Isotopy::VectorField { field, .. } => field(u, z),
            Isotopy::Concat(a, b) => {
                if u < 0.5 {
                    2.0 * a.field(surface, 2.0 * u, z)
                } else {
                    2.0 * b.field(surface, 2.0 * u - 1.0, z)
                }
            }
            Isotopy::Reverse(a) => -a.field(surface, 1.0 - u, z),
        }
    }

    /// Points where the field may be discontinuous in time.
    fn time_breaks(&self) -> Vec<f64> {
        match self {
            Isotopy::Concat(a, b) => {
                let mut out: Vec<f64> = a.time_breaks().into_iter().map(|t| 0.5 * t).collect();
                out.push(0.5);
                out.extend(b.time_breaks().into_iter().map(|t| 0.5 + 0.5 * t));
                out
            }
            Isotopy::Reverse(a) => a.time_breaks().into_iter().map(|t| 1.0 - t).rev().collect(),
            _ => Vec::new(),
        }
    }

    fn check(&self, surface: &Surface) -> Result<()> {
        match self {
            Isotopy::Shear { .. } if surface.kind() != SurfaceKind::Annulus => {
                Err(Error::InvalidInput("shear isotopy needs an annulus".into()))
            }
            Isotopy::Concat(a, b) => a.check(surface).and(b.check(surface)),
            Isotopy::Reverse(a) => a.check(surface),
            _ if surface.kind() == SurfaceKind::Capped => {
                Err(Error::InvalidInput("isotopies live on the base surface".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `∫₀¹ ∫_c λ_u du` with `λ_u = Ω(−, X_u)`, by tensor Gauss–Legendre
/// quadrature on each piece and time interval.
pub fn isotopy_flux(surface: &Surface, isotopy: &Isotopy, cycle: &CycleSpec, tol: f64) -> Result<f64> {
    isotopy.check(surface)?;
    let c = surface.form_coefficient(ChartId::Base);
    let mut times = vec![0.0];
    times.extend(isotopy.time_breaks());
    times.push(1.0);
    let mut total = 0.0;
    for piece in &cycle.pieces {
        for w in times.windows(2) {
            let f = |u: f64, tau: f64| -> Result<f64> {
                let (z, dz) = cycle.eval(surface, piece, tau)?;
                let x = isotopy.field(surface, u, z);
                Ok(c * (dz[0] * x[1] - dz[1] * x[0]))
            };
            let est = integrate_rect(&f, (w[0], w[1]), (0.0, 1.0), tol, 6)?;
            if !est.converged {
                return Err(Error::QuadratureNonConvergence { achieved: est.achieved_tolerance });
            }
            total += est.value;
        }
    }
    Ok(total)
}

/// Signed area of the cylinder `(τ, u) ↦ ψ^u(c(τ))` swept by the cycle,
/// from RK4 trajectories on `n × n` and `2n × 2n` grids of quadrilaterals
/// with Richardson extrapolation. Uses only positions, never the pairing
/// `Ω(ċ, X)`.
pub fn sweep_area(surface: &Surface, isotopy: &Isotopy, cycle: &CycleSpec, n: usize) -> Result<f64> {
    isotopy.check(surface)?;
    let n = n.max(2) & !1;
    let coarse = quad_sweep(surface, isotopy, cycle, n)?;
    let fine = quad_sweep(surface, isotopy, cycle, 2 * n)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn quad_sweep(surface: &Surface, isotopy: &Isotopy, cycle: &CycleSpec, n: usize) -> Result<f64> {
    let c = surface.form_coefficient(ChartId::Base);
    let periodic = surface.periodic_v(ChartId::Base);
    let diff = |a: Vec2, b: Vec2| -> Vec2 {
        let mut d = a - b;
        if periodic {
            d[1] = wrap_centered(d[1]);
        }
        d
    };
    let substeps = 4;
    let h = 1.0 / (n * substeps) as f64;
    let mut total = 0.0;
    for piece in &cycle.pieces {
        // grid[j][i] = ψ^{u_i}(c(τ_j))
        let mut grid: Vec<Vec<Vec2>> = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let (mut z, _) = cycle.eval(surface, piece, j as f64 / n as f64)?;
            let mut row = vec![z];
            for i in 0..n * substeps {
                let u = i as f64 * h;
                let k1 = isotopy.field(surface, u, z);
                let k2 = isotopy.field(surface, u + 0.5 * h, z + 0.5 * h * k1);
                let k3 = isotopy.field(surface, u + 0.5 * h, z + 0.5 * h * k2);
                let k4 = isotopy.field(surface, u + h, z + h * k3);
                z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (i + 1) % substeps == 0 {
                    row.push(z);
                }
            }
            grid.push(row);
        }
        for j in 0..n {
            for i in 0..n {
                let a = grid[j][i];
                let b = grid[j + 1][i];
                let cc = grid[j + 1][i + 1];
                let d = grid[j][i + 1];
                let e = diff(cc, a);
                let f = diff(d, b);
                total += 0.5 * c * (e[0] * f[1] - e[1] * f[0]);
            }
        }
    }
    Ok(total)
}

/// Tolerance-qualified rationality of a real number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Rational { p: i64, q: u64 },
    IrrationalWithinTolerance { best_p: i64, best_q: u64, error: f64 },
    /// The value's own uncertainty exceeds the tolerance.
    Undecided { uncertainty: f64 },
}

impl Verdict {
    pub fn is_rational(&self) -> bool {
        matches!(self, Verdict::Rational { .. })
    }
}

/// `x` is rational when within `tol` of `p/q` with `q ≤ q_max`.
pub fn classify_ratio(x: f64, uncertainty: f64, q_max: u64, tol: f64) -> Verdict {
    if !(uncertainty < tol) {
        return Verdict::Undecided { uncertainty };
    }
    let (p, q) = best_rational(x, q_max);
    let error = (x - p as f64 / q as f64).abs();
    if error < tol {
        Verdict::Rational { p, q }
    } else {
        Verdict::IrrationalWithinTolerance { best_p: p, best_q: q, error }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleFlux {
    pub cycle: String,
    pub closed: bool,
    pub flux: f64,
    pub uncertainty: f64,
    pub ratio: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub fluxes: Vec<CycleFlux>,
    pub area: f64,
    pub q_max: u64,
    pub tol: f64,
    /// Rational when every ratio is, irrational when some ratio is.
    pub overall: OverallVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverallVerdict {
    Rational,
    IrrationalWithinTolerance,
    Undecided,
}

/// Runs every `flux/area` through the bounded continued-fraction test.
/// Entries are `(cycle id, closed, flux, uncertainty)`.
pub fn rationality_verdict(entries: &[(String, bool, f64, f64)], area: f64, q_max: u64, tol: f64) -> Result<FluxReport> {
    if q_max < 1 || !(tol > 0.0) || !(area > 0.0) {
        return Err(Error::InvalidInput("need q_max ≥ 1, tol > 0 and area > 0".into()));
    }
    let fluxes: Vec<CycleFlux> = entries
        .iter()
        .map(|(id, closed, flux, unc)| {
            let ratio = flux / area;
            CycleFlux {
                cycle: id.clone(),
                closed: *closed,
                flux: *flux,
                uncertainty: *unc,
                ratio,
                verdict: classify_ratio(ratio, unc / area, q_max, tol),
            }
        })
        .collect();
    let overall = if fluxes.iter().any(|f| matches!(f.verdict, Verdict::IrrationalWithinTolerance { .. })) {
        OverallVerdict::IrrationalWithinTolerance
    } else if fluxes.iter().all(|f| f.verdict.is_rational()) {
        OverallVerdict::Rational
    } else {
        OverallVerdict::Undecided
    };
    Ok(FluxReport { fluxes, area, q_max, tol, overall })
}

/// Fluxes of `isotopy` over `cycles` with the rationality verdict against `area`.
pub fn flux_report(
    surface: &Surface,
    isotopy: &Isotopy,
    cycles: &[CycleSpec],
    area: f64,
    q_max: u64,
    tol: f64,
) -> Result<FluxReport> {
    let quad_tol = 1e-12;
    let mut entries = Vec::with_capacity(cycles.len());
    for c in cycles {
        let flux = isotopy_flux(surface, isotopy, c, quad_tol)?;
        entries.push((c.id.clone(), c.closed, flux, quad_tol));
    }
    rationality_verdict(&entries, area, q_max, tol)
}

/// Whether base and capped verdicts agree, as they must when `B/A` is rational.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CappingCompatibility {
    pub base_area: f64,
    pub capped_area: f64,
    pub area_ratio: Verdict,
    pub base: OverallVerdict,
    pub capped: OverallVerdict,
    /// `None` when `B/A` is not certified rational (no constraint applies).
    pub consistent: Option<bool>,
}

/// Compares the rationality of `flux/A` with that of `flux/B`; the capped
/// verdict allows denominators up to `q_max` times that of `B/A`.
pub fn capping_compatibility(base: &FluxReport, capped_area: f64) -> Result<CappingCompatibility> {
    let ratio = classify_ratio(capped_area / base.area, 0.0, base.q_max, base.tol);
    let q_scale = match ratio {
        Verdict::Rational { p, .. } => p.unsigned_abs().max(1),
        _ => 1,
    };
    let entries: Vec<_> = base.fluxes.iter().map(|f| (f.cycle.clone(), f.closed, f.flux, f.uncertainty)).collect();
    let capped = rationality_verdict(&entries, capped_area, base.q_max.saturating_mul(q_scale), base.tol)?;
    let consistent = match ratio {
        Verdict::Rational { .. } if base.overall != OverallVerdict::Undecided && capped.overall != OverallVerdict::Undecided => {
            Some(base.overall == capped.overall)
        }
        _ => None,
    };
    Ok(CappingCompatibility {
        base_area: base.area,
        capped_area,
        area_ratio: ratio,
        base: base.overall,
        capped: capped.overall,
        consistent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianCertificate {
    pub hamiltonian: bool,
    pub cycles: Vec<String>,
    pub defects: Vec<f64>,
}

/// The isotopy ends at a Hamiltonian map when all basis fluxes vanish.
pub fn hamiltonian_certificate(surface: &Surface, isotopy: &Isotopy, basis: &[CycleSpec]) -> Result<HamiltonianCertificate> {
    let mut defects = Vec::with_capacity(basis.len());
    for c in basis {
        defects.push(isotopy_flux(surface, isotopy, c, 1e-12)?.abs());
    }
    Ok(HamiltonianCertificate {
        hamiltonian: defects.iter().all(|d| *d < FLUX_TOL),
        cycles: basis.iter().map(|c| c.id.clone()).collect(),
        defects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ham(src: &str, s: &Surface) -> Isotopy {
        Isotopy::Hamiltonian(Hamiltonian::from_expression(src, s).unwrap())
    }

    #[test]
    fn best_rational_oracle() {
        // brute force over all q ≤ 50
        for x in [0.5, 0.3, std::f64::consts::FRAC_1_SQRT_2, 0.123456, 1.234567891] {
            let (p, q) = best_rational(x, 50);
            let err = (x - p as f64 / q as f64).abs();
            for qq in 1..=50u64 {
                let pp = (x * qq as f64).round();
                assert!(err <= (x - pp / qq as f64).abs() + 1e-15);
            }
        }
        assert_eq!(best_rational(std::f64::consts::FRAC_1_SQRT_2, 50), (29, 41));
    }

    #[test]
    fn verdicts() {
        assert_eq!(classify_ratio(0.5, 0.0, 10, 1e-9), Verdict::Rational { p: 1, q: 2 });
        assert_eq!(classify_ratio(0.3, 0.0, 50, 1e-9), Verdict::Rational { p: 3, q: 10 });
        assert!(matches!(
            classify_ratio(std::f64::consts::FRAC_1_SQRT_2, 0.0, 50, 1e-9),
            Verdict::IrrationalWithinTolerance { .. }
        ));
        assert_eq!(classify_ratio(0.0, 0.0, 50, 1e-9), Verdict::Rational { p: 0, q: 1 });
        assert!(matches!(classify_ratio(0.5, 1e-6, 50, 1e-9), Verdict::Undecided { .. }));
        // stable under tol halving
        for x in [0.5, 0.3] {
            assert_eq!(classify_ratio(x, 0.0, 50, 1e-9), classify_ratio(x, 0.0, 50, 5e-10));
        }
    }

    #[test]
    fn shear_flux_on_radial_arc() {
        let ann = Surface::annulus(1.0).unwrap();
        let radial = CycleSpec::builtin(&ann, "radial").unwrap();
        let core = CycleSpec::builtin(&ann, "core").unwrap();
        assert!(!radial.closed && core.closed);
        for c in [0.5, 0.3, std::f64::consts::FRAC_1_SQRT_2] {
            let iso = Isotopy::Shear { c };
            let flux = isotopy_flux(&ann, &iso, &radial, 1e-12).unwrap();
            assert!((flux - c).abs() < 1e-12);
            assert!((sweep_area(&ann, &iso, &radial, 16).unwrap() - c).abs() < 1e-12);
            assert!(isotopy_flux(&ann, &iso, &core, 1e-12).unwrap().abs() < 1e-12);
        }
        let cert = hamiltonian_certificate(&ann, &Isotopy::Shear { c: 0.3 }, &[radial]).unwrap();
        assert!(!cert.hamiltonian && (cert.defects[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_fluxes_vanish_on_closed_cycles() {
        let ann = Surface::annulus(1.0).unwrap();
        let iso = ham("(s*(1-s))^3 * sin(2*pi*t) * (1 + 0.5*cos(2*pi*time))", &ann);
        let wiggle = CycleSpec::polyline(&ann, "w", &[[0.3, 0.0], [0.6, 0.3], [0.4, 0.7], [0.3, 1.0]]).unwrap();
        assert!(wiggle.closed);
        for c in [CycleSpec::builtin(&ann, "core").unwrap(), wiggle.clone(), CycleSpec::builtin(&ann, "boundary-1").unwrap()] {
            assert!(isotopy_flux(&ann, &iso, &c, 1e-12).unwrap().abs() < 1e-8, "{}", c.id);
        }
        // dual route: swept area of the moving cycle
        let sw = sweep_area(&ann, &iso, &wiggle, 64).unwrap();
        assert!(sw.abs() < 1e-8, "{sw}");
        let cert = hamiltonian_certificate(&ann, &iso, &default_basis(&ann).unwrap()).unwrap();
        assert!(cert.hamiltonian);
        let disk = Surface::disk(1.0).unwrap();
        let h = ham("(1 - x^2 - y^2)^2 * x", &disk);
        let circle: Vec<[f64; 2]> = (0..=64)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                [0.5 * a.cos() + 0.1, 0.5 * a.sin()]
            })
            .collect();
        let c = CycleSpec::polyline(&disk, "loop", &circle).unwrap();
        assert!(isotopy_flux(&disk, &h, &c, 1e-12).unwrap().abs() < 1e-8);
        assert!(hamiltonian_certificate(&disk, &h, &default_basis(&disk).unwrap()).unwrap().hamiltonian);
    }

    #[test]
    fn additivity_and_reversal() {
        let ann = Surface::annulus(1.0).unwrap();
        let radial = CycleSpec::builtin(&ann, "radial").unwrap();
        let a = Isotopy::Shear { c: 0.2 };
        let field: FieldFn = Arc::new(|u: f64, z: Vec2| Vec2::new(0.0, (z[0] * (1.0 - z[0])).powi(2) * (1.0 + u)));
        let b = Isotopy::VectorField { label: "b".into(), field };
        let fa = isotopy_flux(&ann, &a, &radial, 1e-12).unwrap();
        let fb = isotopy_flux(&ann, &b, &radial, 1e-12).unwrap();
        let cat = Isotopy::Concat(Box::new(a.clone()), Box::new(b.clone()));
        assert!((isotopy_flux(&ann, &cat, &radial, 1e-12).unwrap() - fa - fb).abs() < 1e-12);
        let rev = Isotopy::Reverse(Box::new(b.clone()));
        assert!((isotopy_flux(&ann, &rev, &radial, 1e-12).unwrap() + fb).abs() < 1e-12);
        // oracle: ∫₀¹(1+u)du ∫₀¹ (s(1−s))² ds = 1.5 / 30
        assert!((fb - 0.05).abs() < 1e-12);
        assert!((sweep_area(&ann, &b, &radial, 64).unwrap() - 0.05).abs() < 1e-4);
        assert!(isotopy_flux(&ann, &Isotopy::Identity, &radial, 1e-12).unwrap() == 0.0);
    }

    #[test]
    fn reports_and_capping() {
        let ann = Surface::annulus(1.0).unwrap();
        let radial = CycleSpec::builtin(&ann, "radial").unwrap();
        let rep = flux_report(&ann, &Isotopy::Shear { c: 0.3 }, std::slice::from_ref(&radial), 1.0, 50, 1e-9).unwrap();
        assert_eq!(rep.overall, OverallVerdict::Rational);
        let compat = capping_compatibility(&rep, 1.5).unwrap();
        assert_eq!(compat.consistent, Some(true));
        let rep = flux_report(&ann, &Isotopy::Shear { c: 0.5f64.sqrt() }, &[radial], 1.0, 50, 1e-9).unwrap();
        assert_eq!(rep.overall, OverallVerdict::IrrationalWithinTolerance);
        assert_eq!(capping_compatibility(&rep, 2.0).unwrap().consistent, Some(true));
        assert_eq!(capping_compatibility(&rep, std::f64::consts::PI).unwrap().consistent, None);
    }
}
