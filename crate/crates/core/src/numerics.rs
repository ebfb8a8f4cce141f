//! Finite differences, angle unwrapping and Gauss–Legendre rules shared by
//! the geometry, bundle, topology and dynamics modules.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use nalgebra::Vector3;

use crate::error::Result;

/// Step and order of a central-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffConfig {
    /// Step relative to `max(1, |coordinate|)`.
    pub rel_step: f64,
    /// Combine steps `h` and `2h` into a fourth-order estimate.
    pub richardson: bool,
}

impl DiffConfig {
    pub const fn central(rel_step: f64) -> Self {
        DiffConfig {
            rel_step,
            richardson: false,
        }
    }

    pub const fn richardson(rel_step: f64) -> Self {
        DiffConfig {
            rel_step,
            richardson: true,
        }
    }

    /// Absolute step for a coordinate of the given magnitude.
    pub fn step_for(&self, scale: f64) -> f64 {
        self.rel_step * scale.abs().max(1.0)
    }
}

/// Derivative at 0 of `f(s)` using step `h`.
pub fn derivative<V, F>(f: F, h: f64, richardson: bool) -> Result<V>
where
    V: Clone + Add<Output = V> + Sub<Output = V> + Mul<f64, Output = V>,
    F: Fn(f64) -> Result<V>,
{
    let d1 = (f(h)? - f(-h)?) * (0.5 / h);
    if !richardson {
        return Ok(d1);
    }
    let d2 = (f(2.0 * h)? - f(-2.0 * h)?) * (0.25 / h);
    Ok(d1 * (4.0 / 3.0) - d2 * (1.0 / 3.0))
}

/// Jacobian `J[i][j] = d f_j / d x_i` of a vector field on R^3.
pub fn jacobian3<F>(f: F, x: &Vector3<f64>, cfg: DiffConfig) -> Result<[Vector3<f64>; 3]>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
{
    let h = cfg.step_for(x.norm());
    let mut rows = [Vector3::zeros(); 3];
    for (i, row) in rows.iter_mut().enumerate() {
        let e = Vector3::ith(i, 1.0);
        *row = derivative(|s| f(&(x + e * s)), h, cfg.richardson)?;
    }
    Ok(rows)
}

/// Central-difference curl of a vector field.
pub fn curl3<F>(f: F, x: &Vector3<f64>, cfg: DiffConfig) -> Result<Vector3<f64>>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
{
    let j = jacobian3(f, x, cfg)?;
    Ok(Vector3::new(
        j[1][2] - j[2][1],
        j[2][0] - j[0][2],
        j[0][1] - j[1][0],
    ))
}

/// Central-difference divergence of a vector field.
pub fn divergence3<F>(f: F, x: &Vector3<f64>, cfg: DiffConfig) -> Result<f64>
where
    F: Fn(&Vector3<f64>) -> Result<Vector3<f64>>,
{
    let j = jacobian3(f, x, cfg)?;
    Ok(j[0][0] + j[1][1] + j[2][2])
}

/// `(x, y, z)` on one line, for messages.
pub fn fmt3(v: &Vector3<f64>) -> String {
    format!("({}, {}, {})", v.x, v.y, v.z)
}

/// Reduce an angle to `[0, 2pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Shift `theta` by a multiple of 2pi into `(reference - pi, reference + pi]`.
pub fn unwrap_near(theta: f64, reference: f64) -> f64 {
    let mut d = (theta - reference).rem_euclid(TAU);
    if d > PI {
        d -= TAU;
    }
    reference + d
}

/// Signed distance between two angles on the circle, in `(-pi, pi]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    unwrap_near(a, b) - b
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // degree 2n-1 is exact
            let deg = 2 * n - 2;
            let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = 2.0 / (deg as f64 + 1.0);
            assert!((integral - exact).abs() < 1e-13, "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn gauss_legendre_handles_smooth_integrand() {
        let (x, w) = gauss_legendre(20);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((integral - (1f64.exp() - (-1f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn richardson_is_fourth_order() {
        let f = |s: f64| Ok(s.sin() + 1.0);
        let d2 = derivative(f, 1e-2, false).unwrap();
        let d4 = derivative(f, 1e-2, true).unwrap();
        assert!((d2 - 1.0).abs() > 1e-6);
        assert!((d4 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn curl_of_rotation_field() {
        let f = |x: &Vector3<f64>| Ok(Vector3::new(-x.y, x.x, 0.0));
        let c = curl3(f, &Vector3::new(0.3, -1.0, 2.0), DiffConfig::central(1e-5)).unwrap();
        assert!((c - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-9);
    }

    #[test]
    fn unwrap_picks_nearest_branch() {
        assert!((unwrap_near(0.1, TAU - 0.1) - (TAU + 0.1)).abs() < 1e-15);
        assert!((unwrap_near(TAU - 0.1, 0.1) - (-0.1)).abs() < 1e-15);
        assert!((angle_distance(0.05, TAU - 0.05) - 0.1).abs() < 1e-15);
        assert_eq!(wrap_angle(-1e-300), 0.0);
        assert!((wrap_angle(-PI / 2.0) - 1.5 * PI).abs() < 1e-15);
    }
}
