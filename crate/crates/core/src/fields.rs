//! Analytic magnetic-field catalog.
//!
//! All fields are normalized: the charge-to-mass ratio is absorbed into `B`
//! and `A`, so `curl A` has units of frequency. Every field supplies `B`, its
//! closed-form Jacobian and, when one exists on the whole valid domain, a
//! vector potential.
//!
//! Jacobian convention used throughout the crate:
//! `grad_b[(i, j)] = dB_j / dx_i`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default exclusion radius around field nulls and singularities.
pub const DEFAULT_R_MIN: f64 = 1e-3;

/// Smallest admissible `B_z / B0` for the grad-B slab.
const SLAB_MIN_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    Uniform,
    Monopole,
    LinearNull,
    GradBSlab,
    ScrewPinch,
    ToroidalTokamak,
}

impl FieldKind {
    pub const ALL: [FieldKind; 6] = [
        FieldKind::Uniform,
        FieldKind::Monopole,
        FieldKind::LinearNull,
        FieldKind::GradBSlab,
        FieldKind::ScrewPinch,
        FieldKind::ToroidalTokamak,
    ];

    /// Parameter names with their default values.
    pub fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            FieldKind::Uniform => &[("B0", 1.0), ("axis_x", 0.0), ("axis_y", 0.0), ("axis_z", 1.0)],
            FieldKind::Monopole => &[("g", 1.0), ("r_min", DEFAULT_R_MIN)],
            FieldKind::LinearNull => &[("B0", 1.0), ("r_min", DEFAULT_R_MIN)],
            FieldKind::GradBSlab => &[("B0", 1.0), ("L", 100.0)],
            FieldKind::ScrewPinch => &[("B0", 1.0), ("alpha", 0.5)],
            FieldKind::ToroidalTokamak => &[
                ("B0", 1.0),
                ("R0", 3.0),
                ("a", 1.0),
                ("kappa", 0.0),
                ("r_min", DEFAULT_R_MIN),
            ],
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            FieldKind::Uniform => "B = B0 * axis/|axis|",
            FieldKind::Monopole => "B = g * x/|x|^3",
            FieldKind::LinearNull => "B = B0 * (y, z, x)",
            FieldKind::GradBSlab => "B = B0 (1 + x/L) e_z",
            FieldKind::ScrewPinch => "B = B0 e_z + alpha r e_theta",
            FieldKind::ToroidalTokamak => {
                "B = B0 R0/R e_phi + grad(psi) x grad(phi), psi = kappa/2 ((R-R0)^2 + z^2)"
            }
        }
    }

    pub fn domain_description(self) -> &'static str {
        match self {
            FieldKind::Uniform => "all of R^3",
            FieldKind::Monopole => "|x| >= r_min",
            FieldKind::LinearNull => "|x| >= r_min (b is undefined at the null)",
            FieldKind::GradBSlab => "1 + x/L >= 1e-3",
            FieldKind::ScrewPinch => "all of R^3",
            FieldKind::ToroidalTokamak => "cylindrical radius R >= r_min",
        }
    }

    /// Whether the catalog supplies a vector potential valid on the whole
    /// domain. The monopole does not (Dirac string).
    pub fn has_global_potential(self) -> bool {
        !matches!(self, FieldKind::Monopole)
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A catalog field with its parameters. Missing parameters take the
/// defaults listed by [`FieldKind::default_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// B, its Jacobian and (optionally) A at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub x: Vector3<f64>,
    pub b: Vector3<f64>,
    /// `grad_b[(i, j)] = dB_j / dx_i`.
    pub grad_b: Matrix3<f64>,
    pub potential: Option<Vector3<f64>>,
}

impl FieldSample {
    pub fn divergence(&self) -> f64 {
        self.grad_b.trace()
    }
}

impl FieldSpec {
    pub fn new(kind: FieldKind) -> Self {
        FieldSpec {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn uniform() -> Self {
        Self::new(FieldKind::Uniform)
    }
    pub fn monopole() -> Self {
        Self::new(FieldKind::Monopole)
    }
    pub fn linear_null() -> Self {
        Self::new(FieldKind::LinearNull)
    }
    pub fn grad_b_slab(length: f64) -> Self {
        Self::new(FieldKind::GradBSlab).with("L", length)
    }
    pub fn screw_pinch() -> Self {
        Self::new(FieldKind::ScrewPinch)
    }
    pub fn tokamak() -> Self {
        Self::new(FieldKind::ToroidalTokamak)
    }

    pub fn has_global_potential(&self) -> bool {
        self.kind.has_global_potential()
    }

    /// Parameter value, falling back to the catalog default.
    pub fn param(&self, name: &str) -> f64 {
        if let Some(v) = self.params.get(name) {
            return *v;
        }
        self.kind
            .default_params()
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("{} has no parameter {name}", self.kind))
    }

    /// Checks parameter names and ranges.
    pub fn validate(&self) -> Result<()> {
        let defaults = self.kind.default_params();
        for (name, value) in &self.params {
            if !defaults.iter().any(|(n, _)| n == name) {
                return Err(Error::InvalidSpec(format!(
                    "{} does not take parameter {name:?}",
                    self.kind
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidSpec(format!("parameter {name} is not finite")));
            }
        }
        let bad = |msg: &str| Err(Error::InvalidSpec(format!("{}: {msg}", self.kind)));
        match self.kind {
            FieldKind::Uniform => {
                if self.param("B0") == 0.0 {
                    return bad("B0 must be nonzero");
                }
                if self.uniform_axis().norm() == 0.0 {
                    return bad("axis must be nonzero");
                }
            }
            FieldKind::Monopole => {
                if self.param("g") == 0.0 {
                    return bad("g must be nonzero");
                }
                if self.param("r_min") <= 0.0 {
                    return bad("r_min must be positive");
                }
            }
            FieldKind::LinearNull => {
                if self.param("B0") == 0.0 {
                    return bad("B0 must be nonzero");
                }
                if self.param("r_min") <= 0.0 {
                    return bad("r_min must be positive");
                }
            }
            FieldKind::GradBSlab => {
                if self.param("B0") == 0.0 {
                    return bad("B0 must be nonzero");
                }
                if self.param("L") == 0.0 {
                    return bad("L must be nonzero");
                }
            }
            FieldKind::ScrewPinch => {
                if self.param("B0") == 0.0 {
                    return bad("B0 must be nonzero");
                }
            }
            FieldKind::ToroidalTokamak => {
                if self.param("B0") == 0.0 {
                    return bad("B0 must be nonzero");
                }
                if self.param("R0") <= 0.0 || self.param("a") <= 0.0 {
                    return bad("R0 and a must be positive");
                }
                if self.param("r_min") <= 0.0 {
                    return bad("r_min must be positive");
                }
            }
        }
        Ok(())
    }

    fn uniform_axis(&self) -> Vector3<f64> {
        Vector3::new(self.param("axis_x"), self.param("axis_y"), self.param("axis_z"))
    }

    /// Valid-domain predicate; `Err(DomainViolation)` outside.
    pub fn check_domain(&self, x: &Vector3<f64>) -> Result<()> {
        let violation = |reason: String| {
            Err(Error::DomainViolation {
                field: self.kind.to_string(),
                x: [x.x, x.y, x.z],
                reason,
            })
        };
        if !x.iter().all(|c| c.is_finite()) {
            return violation("non-finite coordinates".into());
        }
        match self.kind {
            FieldKind::Uniform | FieldKind::ScrewPinch => Ok(()),
            FieldKind::Monopole | FieldKind::LinearNull => {
                let r_min = self.param("r_min");
                if x.norm() < r_min {
                    violation(format!("|x| < r_min = {r_min}"))
                } else {
                    Ok(())
                }
            }
            FieldKind::GradBSlab => {
                if 1.0 + x.x / self.param("L") < SLAB_MIN_RATIO {
                    violation("1 + x/L below 1e-3".into())
                } else {
                    Ok(())
                }
            }
            FieldKind::ToroidalTokamak => {
                let r_min = self.param("r_min");
                if x.xy().norm() < r_min {
                    violation(format!("R < r_min = {r_min}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Field, Jacobian and potential at `x`.
    pub fn eval(&self, x: &Vector3<f64>) -> Result<FieldSample> {
        self.check_domain(x)?;
        let (b, grad_b, potential) = match self.kind {
            FieldKind::Uniform => {
                let b = self.uniform_axis().normalize() * self.param("B0");
                (b, Matrix3::zeros(), Some(0.5 * b.cross(x)))
            }
            FieldKind::Monopole => {
                let g = self.param("g");
                let r = x.norm();
                let r3 = r * r * r;
                let b = x * (g / r3);
                let grad = (Matrix3::identity() * (1.0 / r3) - x * x.transpose() * (3.0 / (r3 * r * r))) * g;
                (b, grad, None)
            }
            FieldKind::LinearNull => {
                let s = self.param("B0");
                let b = Vector3::new(x.y, x.z, x.x) * s;
                let mut grad = Matrix3::zeros();
                grad[(1, 0)] = s;
                grad[(2, 1)] = s;
                grad[(0, 2)] = s;
                (b, grad, Some(b.cross(x) / 3.0))
            }
            FieldKind::GradBSlab => {
                let b0 = self.param("B0");
                let l = self.param("L");
                let b = Vector3::new(0.0, 0.0, b0 * (1.0 + x.x / l));
                let mut grad = Matrix3::zeros();
                grad[(0, 2)] = b0 / l;
                let a = Vector3::new(0.0, b0 * (x.x + x.x * x.x / (2.0 * l)), 0.0);
                (b, grad, Some(a))
            }
            FieldKind::ScrewPinch => {
                let b0 = self.param("B0");
                let alpha = self.param("alpha");
                let b = Vector3::new(-alpha * x.y, alpha * x.x, b0);
                let mut grad = Matrix3::zeros();
                grad[(1, 0)] = -alpha;
                grad[(0, 1)] = alpha;
                let a = Vector3::new(
                    -0.5 * b0 * x.y,
                    0.5 * b0 * x.x,
                    -0.5 * alpha * (x.x * x.x + x.y * x.y),
                );
                (b, grad, Some(a))
            }
            FieldKind::ToroidalTokamak => self.eval_tokamak(x),
        };
        Ok(FieldSample {
            x: *x,
            b,
            grad_b,
            potential,
        })
    }

    /// Just `B(x)`.
    pub fn b_field(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.eval(x)?.b)
    }

    /// `A(x)`, or `NoGlobalPotential`.
    pub fn potential(&self, x: &Vector3<f64>) -> Result<Vector3<f64>> {
        self.eval(x)?
            .potential
            .ok_or_else(|| Error::NoGlobalPotential(self.kind.to_string()))
    }

    #[allow(clippy::type_complexity)]
    fn eval_tokamak(&self, x: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>, Option<Vector3<f64>>) {
        let b0 = self.param("B0");
        let r0 = self.param("R0");
        let kappa = self.param("kappa");
        let c = b0 * r0;
        let (px, py, pz) = (x.x, x.y, x.z);
        let s = px * px + py * py;
        let r = s.sqrt();
        let s2 = s * s;

        let b = Vector3::new(
            -c * py / s - kappa * pz * px / s,
            c * px / s - kappa * pz * py / s,
            kappa * (1.0 - r0 / r),
        );

        let mut g = Matrix3::zeros();
        g[(0, 0)] = 2.0 * c * px * py / s2 - kappa * pz * (s - 2.0 * px * px) / s2;
        g[(1, 0)] = -c * (s - 2.0 * py * py) / s2 + 2.0 * kappa * px * py * pz / s2;
        g[(2, 0)] = -kappa * px / s;
        g[(0, 1)] = c * (s - 2.0 * px * px) / s2 + 2.0 * kappa * px * py * pz / s2;
        g[(1, 1)] = -2.0 * c * px * py / s2 - kappa * pz * (s - 2.0 * py * py) / s2;
        g[(2, 1)] = -kappa * py / s;
        g[(0, 2)] = kappa * r0 * px / (s * r);
        g[(1, 2)] = kappa * r0 * py / (s * r);

        // A = (psi/R) e_phi - B0 R0 ln(R/R0) e_z
        let psi = 0.5 * kappa * ((r - r0).powi(2) + pz * pz);
        let a = Vector3::new(-psi * py / s, psi * px / s, -c * (r / r0).ln());
        (b, g, Some(a))
    }
}

/// One row of the `fields list` output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CatalogEntry {
    pub kind: FieldKind,
    pub formula: String,
    pub params: BTreeMap<String, f64>,
    pub valid_domain: String,
    pub has_global_potential: bool,
}

pub fn catalog() -> Vec<CatalogEntry> {
    FieldKind::ALL
        .iter()
        .map(|&kind| CatalogEntry {
            kind,
            formula: kind.formula().to_string(),
            params: kind
                .default_params()
                .iter()
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
            valid_domain: kind.domain_description().to_string(),
            has_global_potential: kind.has_global_potential(),
        })
        .collect()
}
