//! Flux of N through closed surfaces, gyrokinetic monopole charge, and the
//! existence verdict for global perpendicular unit vectors.
//!
//! Homology generators are supplied by the caller: one closed surface per
//! hole of the domain.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::geometry::compute_n;
use crate::numerics::gauss_legendre;

/// `|flux/2pi - round(flux/2pi)|` above this means the surface is not a
/// valid cycle (or the quadrature is unresolved).
pub const INTEGER_TOLERANCE: f64 = 1e-4;

/// Relative two-order discrepancy allowed before a flux is rejected.
pub const QUADRATURE_TOLERANCE: f64 = 1e-6;

pub const DEFAULT_SPHERE_ORDER: usize = 64;
pub const DEFAULT_TORUS_ORDER: usize = 96;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    #[default]
    Outward,
    Inward,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Outward => 1.0,
            Orientation::Inward => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Outward => Orientation::Inward,
            Orientation::Inward => Orientation::Outward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SurfaceShape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Torus {
        center: [f64; 3],
        axis: [f64; 3],
        #[serde(rename = "R0")]
        major_radius: f64,
        a: f64,
    },
}

/// A closed oriented surface used as a homology generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    #[serde(flatten)]
    pub shape: SurfaceShape,
    #[serde(default)]
    pub orientation: Orientation,
}

impl SurfaceSpec {
    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        SurfaceSpec {
            shape: SurfaceShape::Sphere {
                center: center.into(),
                radius,
            },
            orientation: Orientation::Outward,
        }
    }

    pub fn torus(center: Vector3<f64>, axis: Vector3<f64>, major_radius: f64, a: f64) -> Self {
        SurfaceSpec {
            shape: SurfaceShape::Torus {
                center: center.into(),
                axis: axis.into(),
                major_radius,
                a,
            },
            orientation: Orientation::Outward,
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn default_order(&self) -> usize {
        match self.shape {
            SurfaceShape::Sphere { .. } => DEFAULT_SPHERE_ORDER,
            SurfaceShape::Torus { .. } => DEFAULT_TORUS_ORDER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match self.shape {
            SurfaceShape::Sphere { center, radius } => {
                if !finite(&center) || !(radius > 0.0) || !radius.is_finite() {
                    return Err(Error::InvalidSpec("sphere needs a finite center and radius > 0".into()));
                }
            }
            SurfaceShape::Torus {
                center,
                axis,
                major_radius,
                a,
            } => {
                if !finite(&center) || !finite(&axis) || Vector3::from(axis).norm() == 0.0 {
                    return Err(Error::InvalidSpec("torus needs a finite center and nonzero axis".into()));
                }
                if !(a > 0.0) || !(major_radius > a) || !major_radius.is_finite() {
                    return Err(Error::InvalidSpec("torus needs R0 > a > 0".into()));
                }
            }
        }
        Ok(())
    }
}

/// How the first surface parameter is discretized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstAxisRule {
    /// Gauss–Legendre on `[0, pi]` (polar angle, endpoints are poles).
    Polar,
    /// Trapezoid on `[0, 2pi)`.
    Periodic,
}

/// A closed surface given by a map `(s, t) -> x`, with `t` periodic on
/// `[0, 2pi)`.
pub trait SurfaceParameterization: Sync {
    fn first_axis(&self) -> FirstAxisRule;
    /// Node counts `(n_s, n_t)` for a given order.
    fn grid(&self, order: usize) -> (usize, usize);
    fn point(&self, s: f64, t: f64) -> Vector3<f64>;
    /// `dx/ds x dx/dt`, pointing outward.
    fn area_vector(&self, s: f64, t: f64) -> Vector3<f64>;
}

fn orthonormal_pair(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let p = (seed - axis * axis.dot(&seed)).normalize();
    let q = axis.cross(&p);
    (p, q)
}

struct SphereParam {
    center: Vector3<f64>,
    radius: f64,
}

impl SurfaceParameterization for SphereParam {
    fn first_axis(&self) -> FirstAxisRule {
        FirstAxisRule::Polar
    }
    fn grid(&self, order: usize) -> (usize, usize) {
        (order, 2 * order)
    }
    fn point(&self, s: f64, t: f64) -> Vector3<f64> {
        self.center + radial(s, t) * self.radius
    }
    fn area_vector(&self, s: f64, t: f64) -> Vector3<f64> {
        radial(s, t) * (self.radius * self.radius * s.sin())
    }
}

fn radial(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

struct TorusParam {
    center: Vector3<f64>,
    axis: Vector3<f64>,
    p: Vector3<f64>,
    q: Vector3<f64>,
    major_radius: f64,
    a: f64,
}

impl TorusParam {
    fn new(center: Vector3<f64>, axis: Vector3<f64>, major_radius: f64, a: f64) -> Self {
        let axis = axis.normalize();
        let (p, q) = orthonormal_pair(&axis);
        TorusParam {
            center,
            axis,
            p,
            q,
            major_radius,
            a,
        }
    }
}

impl SurfaceParameterization for TorusParam {
    fn first_axis(&self) -> FirstAxisRule {
        FirstAxisRule::Periodic
    }
    fn grid(&self, order: usize) -> (usize, usize) {
        (order, order)
    }
    fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        let e_rho = self.p * u.cos() + self.q * u.sin();
        self.center + e_rho * (self.major_radius + self.a * v.cos()) + self.axis * (self.a * v.sin())
    }
    fn area_vector(&self, u: f64, v: f64) -> Vector3<f64> {
        let e_rho = self.p * u.cos() + self.q * u.sin();
        let normal = e_rho * v.cos() + self.axis * v.sin();
        normal * (self.a * (self.major_radius + self.a * v.cos()))
    }
}

fn parameterization(surface: &SurfaceSpec) -> Box<dyn SurfaceParameterization> {
    match surface.shape {
        SurfaceShape::Sphere { center, radius } => Box::new(SphereParam {
            center: center.into(),
            radius,
        }),
        SurfaceShape::Torus {
            center,
            axis,
            major_radius,
            a,
        } => Box::new(TorusParam::new(center.into(), axis.into(), major_radius, a)),
    }
}

/// One quadrature node: parameters, position, outward area vector, weight.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceNode {
    pub s: f64,
    pub t: f64,
    pub x: Vector3<f64>,
    pub area: Vector3<f64>,
    pub weight: f64,
}

pub fn surface_nodes(surface: &dyn SurfaceParameterization, order: usize) -> Vec<SurfaceNode> {
    let (ns, nt) = surface.grid(order.max(1));
    let (s_nodes, s_weights): (Vec<f64>, Vec<f64>) = match surface.first_axis() {
        FirstAxisRule::Polar => {
            let (x, w) = gauss_legendre(ns);
            (
                x.iter().map(|x| 0.5 * PI * (x + 1.0)).collect(),
                w.iter().map(|w| 0.5 * PI * w).collect(),
            )
        }
        FirstAxisRule::Periodic => (
            (0..ns).map(|i| TAU * i as f64 / ns as f64).collect(),
            vec![TAU / ns as f64; ns],
        ),
    };
    let wt = TAU / nt as f64;
    let mut nodes = Vec::with_capacity(ns * nt);
    for (s, ws) in s_nodes.iter().zip(&s_weights) {
        for k in 0..nt {
            let t = TAU * k as f64 / nt as f64;
            nodes.push(SurfaceNode {
                s: *s,
                t,
                x: surface.point(*s, t),
                area: surface.area_vector(*s, t),
                weight: ws * wt,
            });
        }
    }
    nodes
}

fn surface_error(e: Error) -> Error {
    match e {
        Error::FieldNull { x, .. } => Error::FieldNullOnSurface { x },
        other => other,
    }
}

/// `sum_nodes w * N . dA` at one order, evaluating nodes in parallel.
fn flux_at_order(spec: &FieldSpec, surface: &dyn SurfaceParameterization, order: usize) -> Result<f64> {
    let nodes = surface_nodes(surface, order);
    let terms: Vec<f64> = nodes
        .par_iter()
        .map(|node| {
            let n = compute_n(spec, &node.x).map_err(surface_error)?.n;
            Ok(node.weight * n.dot(&node.area))
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// Flux report for one surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub flux: f64,
    pub q_estimate: f64,
    pub q_rounded: i64,
    pub quantization_residual: f64,
    pub quadrature_error_estimate: f64,
    pub order: usize,
}

impl FluxReport {
    fn new(flux: f64, coarse: f64, order: usize) -> Self {
        let q_estimate = flux / TAU;
        let q_rounded = q_estimate.round();
        FluxReport {
            flux,
            q_estimate,
            q_rounded: q_rounded as i64,
            quantization_residual: (q_estimate - q_rounded).abs(),
            quadrature_error_estimate: (flux - coarse).abs(),
            order,
        }
    }
}

/// Flux of N through a parameterized surface, checked against the half order.
pub fn flux_over(
    spec: &FieldSpec,
    surface: &dyn SurfaceParameterization,
    order: usize,
    sign: f64,
) -> Result<FluxReport> {
    if order < 2 {
        return Err(Error::InvalidSpec("quadrature order must be at least 2".into()));
    }
    let fine = sign * flux_at_order(spec, surface, order)?;
    let coarse = sign * flux_at_order(spec, surface, order / 2)?;
    let discrepancy = (fine - coarse).abs();
    if discrepancy > QUADRATURE_TOLERANCE * fine.abs().max(1.0) {
        return Err(Error::QuadratureNotConverged {
            flux: fine,
            discrepancy,
        });
    }
    Ok(FluxReport::new(fine, coarse, order))
}

pub fn flux_of_n(spec: &FieldSpec, surface: &SurfaceSpec, order: usize) -> Result<FluxReport> {
    surface.validate()?;
    let param = parameterization(surface);
    flux_over(spec, param.as_ref(), order, surface.orientation.sign())
}

/// Pointwise flux density `N . n_hat` on the quadrature grid, for plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensitySample {
    pub s: f64,
    pub t: f64,
    pub x: [f64; 3],
    pub density: f64,
    pub weight: f64,
}

pub fn flux_density(spec: &FieldSpec, surface: &SurfaceSpec, order: usize) -> Result<Vec<DensitySample>> {
    surface.validate()?;
    let param = parameterization(surface);
    let sign = surface.orientation.sign();
    surface_nodes(param.as_ref(), order)
        .into_iter()
        .map(|node| {
            let n = compute_n(spec, &node.x).map_err(surface_error)?.n;
            let area = node.area.norm();
            let density = if area > 0.0 { sign * n.dot(&node.area) / area } else { 0.0 };
            Ok(DensitySample {
                s: node.s,
                t: node.t,
                x: node.x.into(),
                density,
                weight: node.weight * area,
            })
        })
        .collect()
}

pub fn gyro_charge(report: &FluxReport) -> Result<i64> {
    gyro_charge_with_tolerance(report, INTEGER_TOLERANCE)
}

pub fn gyro_charge_with_tolerance(report: &FluxReport, tolerance: f64) -> Result<i64> {
    if report.quantization_residual < tolerance {
        Ok(report.q_rounded)
    } else {
        Err(Error::NotQuantized {
            q_estimate: report.q_estimate,
            tolerance,
        })
    }
}

/// Region removed from the physical domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ExcludedRegion {
    Ball {
        center: [f64; 3],
        radius: f64,
    },
    /// Solid torus.
    Torus {
        center: [f64; 3],
        axis: [f64; 3],
        #[serde(rename = "R0")]
        major_radius: f64,
        a: f64,
    },
}

impl ExcludedRegion {
    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        match *self {
            ExcludedRegion::Ball { center, radius } => (x - Vector3::from(center)).norm() < radius,
            ExcludedRegion::Torus {
                center,
                axis,
                major_radius,
                a,
            } => {
                let d = x - Vector3::from(center);
                let axis = Vector3::from(axis).normalize();
                let along = d.dot(&axis);
                let rho = (d - axis * along).norm();
                ((rho - major_radius).powi(2) + along * along).sqrt() < a
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub generator_surfaces: Vec<SurfaceSpec>,
    #[serde(default)]
    pub excluded_regions: Vec<ExcludedRegion>,
}

impl DomainSpec {
    /// Every generator must be a valid surface that avoids the excluded
    /// regions on its quadrature nodes.
    pub fn validate(&self) -> Result<()> {
        for surface in &self.generator_surfaces {
            surface.validate()?;
            let param = parameterization(surface);
            for node in surface_nodes(param.as_ref(), surface.default_order()) {
                if let Some(region) = self.excluded_regions.iter().position(|r| r.contains(&node.x)) {
                    return Err(Error::SurfaceInExcludedRegion {
                        x: node.x.into(),
                        region,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictStatus {
    Exists,
    Obstructed,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCharge {
    pub surface: SurfaceSpec,
    /// `None` when the flux was not quantized.
    pub charge: Option<i64>,
    pub report: FluxReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// `None` when indeterminate.
    pub exists: Option<bool>,
    pub status: VerdictStatus,
    pub charges: Vec<SurfaceCharge>,
}

/// Global perpendicular unit vectors exist iff every generator carries zero
/// gyrokinetic monopole charge.
pub fn existence_verdict(spec: &FieldSpec, domain: &DomainSpec) -> Result<Verdict> {
    existence_verdict_with_tolerance(spec, domain, INTEGER_TOLERANCE)
}

pub fn existence_verdict_with_tolerance(spec: &FieldSpec, domain: &DomainSpec, tolerance: f64) -> Result<Verdict> {
    domain.validate()?;
    let mut charges = Vec::with_capacity(domain.generator_surfaces.len());
    for surface in &domain.generator_surfaces {
        let report = flux_of_n(spec, surface, surface.default_order())?;
        charges.push(SurfaceCharge {
            surface: *surface,
            charge: gyro_charge_with_tolerance(&report, tolerance).ok(),
            report,
        });
    }
    let status = if charges.iter().any(|c| c.charge.is_none()) {
        VerdictStatus::Indeterminate
    } else if charges.iter().all(|c| c.charge == Some(0)) {
        VerdictStatus::Exists
    } else {
        VerdictStatus::Obstructed
    };
    Ok(Verdict {
        exists: match status {
            VerdictStatus::Exists => Some(true),
            VerdictStatus::Obstructed => Some(false),
            VerdictStatus::Indeterminate => None,
        },
        status,
        charges,
    })
}
