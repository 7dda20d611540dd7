//! 2×2 helpers on top of nalgebra.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

pub type Mat2 = Matrix2<f64>;
pub type Vec2 = Vector2<f64>;

/// A complex number as `(re, im)`; serializes as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Eigenvalues of a real 2×2 matrix, ordered by decreasing real part
/// (then decreasing imaginary part).
pub fn eigenvalues(m: &Mat2) -> [Complex; 2] {
    let tr = m[(0, 0)] + m[(1, 1)];
    let det = m.determinant();
    let half = 0.5 * tr;
    let disc = half * half - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        // Stable pairing: the larger-magnitude root directly, the other via det.
        let big = if half >= 0.0 { half + r } else { half - r };
        let small = if big != 0.0 { det / big } else { 0.0 };
        let (a, b) = if big >= small { (big, small) } else { (small, big) };
        [Complex { re: a, im: 0.0 }, Complex { re: b, im: 0.0 }]
    } else {
        let r = (-disc).sqrt();
        [Complex { re: half, im: r }, Complex { re: half, im: -r }]
    }
}

/// Ratio of largest to smallest singular value (infinite for singular input).
pub fn condition_number(m: &Mat2) -> f64 {
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Minimum-norm least-squares solution of `m x = b`, discarding singular
/// directions below `rel_cutoff` times the largest singular value.
pub fn pinv_solve(m: &Mat2, b: &Vec2, rel_cutoff: f64) -> Vec2 {
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Vec2::zeros(),
    };
    let smax = svd.singular_values.max();
    let mut x = Vec2::zeros();
    for k in 0..2 {
        let s = svd.singular_values[k];
        if s > rel_cutoff * smax && s > 0.0 {
            let coef = u.column(k).dot(b) / s;
            x += vt.row(k).transpose() * coef;
        }
    }
    x
}

pub fn rotation(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::new(c, -s, s, c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_rotation_and_hyperbolic() {
        let e = eigenvalues(&rotation(std::f64::consts::FRAC_PI_2));
        assert!((e[0].re).abs() < 1e-15 && (e[0].im - 1.0).abs() < 1e-15);
        let e = eigenvalues(&Mat2::new(2.0, 1.0, 1.0, 1.0));
        let mu = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((e[0].re - mu).abs() < 1e-14 && (e[1].re - 1.0 / mu).abs() < 1e-14);
    }

    #[test]
    fn pinv_solves_rank_deficient_systems() {
        let m = Mat2::new(1.0, 0.0, 0.0, 0.0);
        let x = pinv_solve(&m, &Vec2::new(3.0, 5.0), 1e-12);
        assert_eq!(x, Vec2::new(3.0, 0.0));
        let m = Mat2::new(2.0, 1.0, 1.0, 3.0);
        let x = pinv_solve(&m, &Vec2::new(1.0, 2.0), 1e-12);
        assert!((m * x - Vec2::new(1.0, 2.0)).norm() < 1e-14);
    }
}
