//! Geometry of the unit field `b = B/|B|`: its gradient, the divergence-free
//! N-field, local perpendicular frames and the gyrogauge vector `R`.
//!
//! Index conventions (all matrices follow `m[(i, j)] = d_i (.)_j`):
//!
//! * `div b = sum_i d_i b_i`
//! * `(b . grad b)_j = sum_i b_i d_i b_j`
//! * `Tr(grad b . grad b) = sum_ij d_i b_j d_j b_i`
//! * `(b . grad b . grad b)_k = sum_j (b . grad b)_j d_j b_k`
//!
//! With these, `curl R = N` holds pointwise for every chart; the tests pin
//! that identity on several fields.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldSample, FieldSpec};
use crate::numerics::{curl3, jacobian3, DiffConfig};

/// `|B|` below this is treated as a null.
pub const NULL_FLOOR: f64 = 1e-12;

/// Charts whose defining cross product falls below this are degenerate.
pub const CHART_FLOOR: f64 = 1e-8;

/// Stencil used to differentiate `e1` when forming `R`.
pub const FRAME_R_DIFF: DiffConfig = DiffConfig::central(1e-5);

/// Stencils for the curl of `R`: `R` is re-differenced with the fourth-order
/// rule so its truncation error does not leak into the curl, and the outer
/// step stays small enough for the torus chart near the z axis.
pub const CURL_R_INNER_DIFF: DiffConfig = DiffConfig::richardson(1e-4);
pub const CURL_R_DIFF: DiffConfig = DiffConfig::richardson(1e-4);

/// Recipe for the local perpendicular unit vector `e1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Chart {
    /// `e1 = normalize(B x e_x)`
    #[serde(rename = "seed-x")]
    SeedX,
    #[serde(rename = "seed-y")]
    SeedY,
    #[serde(rename = "seed-z")]
    SeedZ,
    /// `e1 = normalize(e_R x B)`, cylindrical about the z axis.
    #[serde(rename = "torus-e1")]
    TorusE1,
}

impl Chart {
    pub const ALL: [Chart; 4] = [Chart::SeedX, Chart::SeedY, Chart::SeedZ, Chart::TorusE1];
    pub const SEEDS: [Chart; 3] = [Chart::SeedX, Chart::SeedY, Chart::SeedZ];

    pub fn as_str(self) -> &'static str {
        match self {
            Chart::SeedX => "seed-x",
            Chart::SeedY => "seed-y",
            Chart::SeedZ => "seed-z",
            Chart::TorusE1 => "torus-e1",
        }
    }

    fn seed_axis(self) -> Option<Vector3<f64>> {
        match self {
            Chart::SeedX => Some(Vector3::x()),
            Chart::SeedY => Some(Vector3::y()),
            Chart::SeedZ => Some(Vector3::z()),
            Chart::TorusE1 => None,
        }
    }

    /// Seed axis least aligned with `b(x)`; ties go to the lowest axis.
    pub fn auto(spec: &FieldSpec, x: &Vector3<f64>) -> Result<Chart> {
        let (b, _) = unit_b(&spec.eval(x)?)?;
        let mut best = Chart::SeedX;
        let mut best_dot = f64::INFINITY;
        for chart in Chart::SEEDS {
            let d = b.dot(&chart.seed_axis().unwrap()).abs();
            if d < best_dot {
                best = chart;
                best_dot = d;
            }
        }
        Ok(best)
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Chart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seed-x" => Ok(Chart::SeedX),
            "seed-y" => Ok(Chart::SeedY),
            "seed-z" => Ok(Chart::SeedZ),
            "torus-e1" => Ok(Chart::TorusE1),
            other => Err(Error::InvalidSpec(format!("unknown chart {other:?}"))),
        }
    }
}

/// Right-handed orthonormal triad `(e1, e2, b)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x: Vector3<f64>,
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
    pub b: Vector3<f64>,
    pub chart: Chart,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NSample {
    pub x: Vector3<f64>,
    pub n: Vector3<f64>,
}

/// Unit field and its gradient `grad_b[(i, j)] = d_i b_j`.
pub fn unit_b(sample: &FieldSample) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    unit_b_with_floor(sample, NULL_FLOOR)
}

pub fn unit_b_with_floor(sample: &FieldSample, floor: f64) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let norm = sample.b.norm();
    if norm < floor || !norm.is_finite() {
        return Err(Error::FieldNull {
            x: sample.x.into(),
            norm,
        });
    }
    let b = sample.b / norm;
    // d_i b_j = d_i B_j / |B| - B_j (B_k d_i B_k) / |B|^3
    let along = sample.grad_b * sample.b; // (grad B . B)_i = sum_k d_i B_k B_k
    let grad = sample.grad_b / norm - along * sample.b.transpose() / (norm * norm * norm);
    Ok((b, grad))
}

/// The N-field built from `b` and `grad b`.
pub fn n_from_gradient(b: &Vector3<f64>, grad: &Matrix3<f64>) -> Vector3<f64> {
    let div = grad.trace();
    let b_grad_b = grad.transpose() * b; // sum_i b_i d_i b_j
    let tr = (grad * grad).trace(); // sum_ij d_i b_j d_j b_i
    let b_grad_b_grad_b = grad.transpose() * b_grad_b; // sum_j (b.grad b)_j d_j b_k
    b * (0.5 * (tr - div * div)) + b_grad_b * div - b_grad_b_grad_b
}

pub fn compute_n(spec: &FieldSpec, x: &Vector3<f64>) -> Result<NSample> {
    let (b, grad) = unit_b(&spec.eval(x)?)?;
    Ok(NSample {
        x: *x,
        n: n_from_gradient(&b, &grad),
    })
}

/// Perpendicular frame from the chart's recipe.
pub fn local_frame(spec: &FieldSpec, x: &Vector3<f64>, chart: Chart) -> Result<Frame> {
    let (b, _) = unit_b(&spec.eval(x)?)?;
    frame_from_b(b, x, chart)
}

fn frame_from_b(b: Vector3<f64>, x: &Vector3<f64>, chart: Chart) -> Result<Frame> {
    let raw = match chart.seed_axis() {
        Some(axis) => b.cross(&axis),
        None => {
            let rho = x.xy().norm();
            if rho < CHART_FLOOR {
                Vector3::zeros()
            } else {
                let e_r = Vector3::new(x.x / rho, x.y / rho, 0.0);
                e_r.cross(&b)
            }
        }
    };
    let norm = raw.norm();
    if norm < CHART_FLOOR {
        return Err(Error::ChartDegenerate {
            chart: chart.to_string(),
            x: (*x).into(),
            norm,
        });
    }
    let e1 = raw / norm;
    Ok(Frame {
        x: *x,
        e1,
        e2: b.cross(&e1),
        b,
        chart,
    })
}

/// `R_i = sum_j d_i e1_j e2_j` with `d e1` by central differences in one chart.
pub fn frame_r(spec: &FieldSpec, x: &Vector3<f64>, chart: Chart) -> Result<Vector3<f64>> {
    frame_r_with(spec, x, chart, FRAME_R_DIFF)
}

pub fn frame_r_with(
    spec: &FieldSpec,
    x: &Vector3<f64>,
    chart: Chart,
    cfg: DiffConfig,
) -> Result<Vector3<f64>> {
    let center = local_frame(spec, x, chart)?;
    let de1 = jacobian3(|y| Ok(local_frame(spec, y, chart)?.e1), x, cfg)?;
    Ok(Vector3::new(
        de1[0].dot(&center.e2),
        de1[1].dot(&center.e2),
        de1[2].dot(&center.e2),
    ))
}

/// `R` from the analytic gradient of the chart's defining cross product.
/// Agrees with [`frame_r`] to its differencing accuracy; used where `R`
/// is differentiated again.
pub fn frame_r_exact(spec: &FieldSpec, x: &Vector3<f64>, chart: Chart) -> Result<Vector3<f64>> {
    let (b, grad) = unit_b(&spec.eval(x)?)?;
    let frame = frame_from_b(b, x, chart)?;
    let (raw, d_raw): (Vector3<f64>, [Vector3<f64>; 3]) = match chart.seed_axis() {
        Some(axis) => {
            let rows = [0, 1, 2].map(|i| grad.row(i).transpose().cross(&axis));
            (b.cross(&axis), rows)
        }
        None => {
            let rho = x.xy().norm();
            let e_r = Vector3::new(x.x / rho, x.y / rho, 0.0);
            let r3 = rho * rho * rho;
            let d_er = [
                Vector3::new(x.y * x.y / r3, -x.x * x.y / r3, 0.0),
                Vector3::new(-x.x * x.y / r3, x.x * x.x / r3, 0.0),
                Vector3::zeros(),
            ];
            let rows = [0, 1, 2].map(|i| d_er[i].cross(&b) + e_r.cross(&grad.row(i).transpose()));
            (e_r.cross(&b), rows)
        }
    };
    // d_i e1 . e2 = d_i raw . e2 / |raw| since e2 is orthogonal to raw
    let norm = raw.norm();
    Ok(Vector3::new(
        d_raw[0].dot(&frame.e2) / norm,
        d_raw[1].dot(&frame.e2) / norm,
        d_raw[2].dot(&frame.e2) / norm,
    ))
}

/// Finite-difference curl of `R`; equals N wherever the chart is valid.
pub fn curl_r(spec: &FieldSpec, x: &Vector3<f64>, chart: Chart) -> Result<Vector3<f64>> {
    curl3(|y| frame_r_with(spec, y, chart, CURL_R_INNER_DIFF), x, CURL_R_DIFF)
}
