//! Gauss–Legendre and adaptive Simpson quadrature.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Nodes per Gauss–Legendre panel.
pub const GL_ORDER: usize = 16;

/// Outcome of a refined quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// |difference| between the last two refinement levels.
    pub achieved_tolerance: f64,
    pub converged: bool,
    pub levels: usize,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static CELL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// Composite nodes and weights on `[a, b]` with `panels` equal panels.
pub fn composite_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gl16();
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (xi, wi) in x.iter().zip(w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// Composite Gauss–Legendre on `[a, b]`, doubling panels until successive
/// estimates differ by less than `tol`.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, tol: f64, max_level: usize) -> Result<Estimate>
where
    F: Fn(f64) -> Result<f64>,
{
    let eval = |panels: usize| -> Result<f64> {
        let mut s = 0.0;
        for (x, w) in composite_nodes(a, b, panels) {
            s += w * f(x)?;
        }
        Ok(s)
    };
    let mut prev = eval(1)?;
    let mut diff = f64::INFINITY;
    for level in 1..=max_level {
        let cur = eval(1 << level)?;
        diff = (cur - prev).abs();
        prev = cur;
        if diff < tol {
            return Ok(Estimate { value: cur, achieved_tolerance: diff, converged: true, levels: level });
        }
    }
    Ok(Estimate { value: prev, achieved_tolerance: diff, converged: false, levels: max_level })
}

/// Tensor-product Gauss–Legendre on `[a, b] × [c, d]` with joint panel
/// doubling. Rows are evaluated in parallel and reduced in order.
pub fn integrate_rect<F>(
    f: &F,
    (a, b): (f64, f64),
    (c, d): (f64, f64),
    tol: f64,
    max_level: usize,
) -> Result<Estimate>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let eval = |panels: usize| -> Result<f64> {
        let us = composite_nodes(a, b, panels);
        let vs = composite_nodes(c, d, panels);
        let rows: Vec<Result<f64>> = us
            .par_iter()
            .map(|&(u, wu)| {
                let mut s = 0.0;
                for &(v, wv) in &vs {
                    s += wv * f(u, v)?;
                }
                Ok(wu * s)
            })
            .collect();
        let mut total = 0.0;
        for r in rows {
            total += r?;
        }
        Ok(total)
    };
    let mut prev = eval(1)?;
    let mut diff = f64::INFINITY;
    for level in 1..=max_level {
        let cur = eval(1 << level)?;
        diff = (cur - prev).abs();
        prev = cur;
        if diff < tol {
            return Ok(Estimate { value: cur, achieved_tolerance: diff, converged: true, levels: level });
        }
    }
    Ok(Estimate { value: prev, achieved_tolerance: diff, converged: false, levels: max_level })
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64, max_depth: usize) -> Result<Estimate>
where
    F: Fn(f64) -> Result<f64>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst = 0.0f64;
    let mut converged = true;
    let value = simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut worst, &mut converged)?;
    Ok(Estimate { value, achieved_tolerance: worst, converged, levels: max_depth })
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
    worst: &mut f64,
    converged: &mut bool,
) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        *worst = worst.max(delta.abs() / 15.0);
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        *converged = false;
        *worst = worst.max(delta.abs() / 15.0);
        return Ok(left + right + delta / 15.0);
    }
    let l = simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst, converged)?;
    let r = simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst, converged)?;
    Ok(l + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(GL_ORDER);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for k in 0..(2 * GL_ORDER) {
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            assert!((q - exact).abs() < 1e-13, "degree {k}: {q} vs {exact}");
        }
    }

    #[test]
    fn refined_integrals() {
        let e = integrate_1d(|x| Ok(x.exp()), 0.0, 1.0, 1e-12, 8).unwrap();
        assert!(e.converged && (e.value - (1f64.exp() - 1.0)).abs() < 1e-13);
        let e = integrate_rect(&|u: f64, v: f64| Ok((u * v).sin()), (0.0, 1.0), (0.0, 2.0), 1e-12, 6)
            .unwrap();
        // ∫₀¹ (1 − cos 2u)/u du = Cin(2)
        let cin2 = 0.8473820166866132;
        assert!((e.value - cin2).abs() < 1e-12, "{}", e.value);
    }

    #[test]
    fn simpson_handles_smooth_and_oscillatory() {
        let e = adaptive_simpson(&|x: f64| Ok(x.powi(3)), 0.0, 2.0, 1e-12, 30).unwrap();
        assert!((e.value - 4.0).abs() < 1e-14);
        let e = adaptive_simpson(&|x: f64| Ok((10.0 * x).sin()), 0.0, 1.0, 1e-12, 40).unwrap();
        assert!((e.value - (1.0 - 10f64.cos()) / 10.0).abs() < 1e-11);
    }
}
