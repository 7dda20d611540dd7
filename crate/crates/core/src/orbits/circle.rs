//! Circle maps induced on invariant boundary (or Lagrangian) circles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_centered, wrap_unit};
use crate::maps::SurfaceMap;

/// `φ^m` restricted to circle `i`, read in collar coordinates, where `m` is
/// the length of the cycle of `i` under the boundary permutation.
pub struct CircleMap<'a> {
    map: &'a SurfaceMap,
    circle: usize,
    power: usize,
    displacement: Vec<f64>,
}

/// Rotation number of `φ^m` on a circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RotationNumber {
    /// Exhibited by a periodic point `t` with `L^q(t) = t + p`.
    Rational { p: i64, q: usize, t: f64 },
    /// No periodic point up to the denominator bound; lift average.
    Irrational { estimate: f64, fluctuation: f64, iterates: usize },
}

impl RotationNumber {
    pub fn value(&self) -> f64 {
        match *self {
            RotationNumber::Rational { p, q, .. } => p as f64 / q as f64,
            RotationNumber::Irrational { estimate, .. } => estimate,
        }
    }
}

/// A periodic point of the circle map: `L^q(t) = t + p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CirclePeriodicPoint {
    pub q: usize,
    pub p: i64,
    pub t: f64,
    /// The whole circle consists of such points.
    pub continuum: bool,
}

impl<'a> CircleMap<'a> {
    pub fn new(map: &'a SurfaceMap, circle: usize, grid: usize) -> Result<Self> {
        let sigma = map.boundary_permutation()?;
        if circle >= sigma.len() {
            return Err(Error::InvalidInput(format!("no boundary circle {circle}")));
        }
        let mut power = 1;
        let mut j = sigma[circle];
        while j != circle {
            j = sigma[j];
            power += 1;
        }
        let mut cm = CircleMap { map, circle, power, displacement: Vec::new() };
        let grid = grid.max(8);
        let mut d = Vec::with_capacity(grid);
        for k in 0..grid {
            let t = k as f64 / grid as f64;
            let raw = cm.raw(t)?;
            let next = match d.last() {
                None => wrap_unit(raw - t),
                Some(&prev) => prev + wrap_centered(raw - t - prev),
            };
            d.push(next);
        }
        cm.displacement = d;
        Ok(cm)
    }

    pub fn power(&self) -> usize {
        self.power
    }

    pub fn circle(&self) -> usize {
        self.circle
    }

    /// `t'` with `φ^m(τ_i(0, t)) = τ_i(0, t')`, in `[0, 1)`.
    pub fn raw(&self, t: f64) -> Result<f64> {
        let surface = self.map.surface();
        let p = surface.collar_point(self.circle, 0.0, t)?;
        let q = self.map.iterate(&p, self.power)?;
        let (c, _) = surface
            .collar_coords(self.circle, &q)
            .ok_or_else(|| Error::InvalidInput(format!("circle {} is not invariant", self.circle)))?;
        if c[0].abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "circle {} is not invariant (depth {})",
                self.circle, c[0]
            )));
        }
        Ok(c[1])
    }

    /// The degree-one lift `L: ℝ → ℝ`.
    pub fn lift(&self, x: f64) -> Result<f64> {
        let n = self.displacement.len();
        let t = wrap_unit(x);
        let k = ((t * n as f64).round() as usize) % n;
        let base = self.displacement[k];
        Ok(x + base + wrap_centered(self.raw(t)? - t - base))
    }

    pub fn lift_iterate(&self, x: f64, q: usize) -> Result<f64> {
        let mut y = x;
        for _ in 0..q {
            y = self.lift(y)?;
        }
        Ok(y)
    }

    /// All periodic points with `q ≤ q_max` detected as zeros of
    /// `L^q(t) − t − p` on the grid, refined by bisection. A circle on which
    /// `|L^q(t) − t − p| ≤ tol` everywhere contributes the single
    /// representative `t = 0`.
    pub fn periodic_points(&self, q_max: usize, tol: f64) -> Result<Vec<CirclePeriodicPoint>> {
        let n = self.displacement.len();
        let ts: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let mut out = Vec::new();
        for q in 1..=q_max {
            let phi: Vec<f64> = ts[..n]
                .iter()
                .map(|&t| Ok(self.lift_iterate(t, q)? - t))
                .collect::<Result<_>>()?;
            let lo = phi.iter().cloned().fold(f64::INFINITY, f64::min).floor() as i64;
            let hi = phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
            for p in lo..=hi {
                let h: Vec<f64> = phi.iter().map(|v| v - p as f64).collect();
                if h.iter().all(|v| v.abs() <= tol) {
                    out.push(CirclePeriodicPoint { q, p, t: 0.0, continuum: true });
                    continue;
                }
                for k in 0..n {
                    let (a, b) = (h[k], h[(k + 1) % n]);
                    if a.abs() <= 1e-14 {
                        out.push(CirclePeriodicPoint { q, p, t: ts[k], continuum: false });
                    } else if a * b < 0.0 && b.abs() > 1e-14 {
                        let t = self.bisect(ts[k], ts[k + 1], q, p, a)?;
                        out.push(CirclePeriodicPoint { q, p, t, continuum: false });
                    }
                }
            }
        }
        Ok(out)
    }

    fn bisect(&self, mut a: f64, mut b: f64, q: usize, p: i64, fa: f64) -> Result<f64> {
        let g = |t: f64| -> Result<f64> { Ok(self.lift_iterate(t, q)? - t - p as f64) };
        let sa = fa.signum();
        for _ in 0..64 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = g(m)?;
            if fm == 0.0 {
                return Ok(m);
            }
            if fm.signum() == sa {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// Rotation number of `φ^m` on the circle: rational when a periodic
    /// point with `q ≤ q_max` exists, otherwise the lift average with `n`
    /// doubling up to `n_max` until successive estimates agree to `fluct_tol`.
    pub fn rotation_number(&self, q_max: usize, n_max: usize, fluct_tol: f64) -> Result<RotationNumber> {
        if let Some(pp) = self.periodic_points(q_max, 1e-12)?.into_iter().next() {
            return Ok(RotationNumber::Rational { p: pp.p, q: pp.q, t: pp.t });
        }
        let mut n = 1024usize.min(n_max.max(1));
        let mut x = 0.0;
        let mut done = 0usize;
        let mut prev = f64::NAN;
        loop {
            x = self.lift_iterate(x, n - done)?;
            done = n;
            let est = x / n as f64;
            let fluct = (est - prev).abs();
            if fluct < fluct_tol || n >= n_max {
                return Ok(RotationNumber::Irrational {
                    estimate: est,
                    fluctuation: if fluct.is_nan() { f64::INFINITY } else { fluct },
                    iterates: n,
                });
            }
            prev = est;
            n = (2 * n).min(n_max);
        }
    }
}
