//! The catalog-wide invariant matrix behind `gyrotop verify-all`: every
//! module's suite run against every catalog field.

use nalgebra::Vector3;
use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::run_suite;
use crate::dynamics::{exact_form, pullback_equivalence, vector_field, Coords, GcPointLocal, PhasePoint};
use crate::error::Result;
use crate::fields::{FieldKind, FieldSpec};
use crate::geometry::{compute_n, curl_r, local_frame};
use crate::numerics::{jacobian3, DiffConfig};
use crate::sampling::{random_direction, random_point, random_point_with_charts, usable_charts};
use crate::topology::{flux_of_n, gyro_charge, SurfaceSpec};

pub const SUITES: [&str; 5] = ["bundle", "dynamics", "fields", "geometry", "topology"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub field: FieldKind,
    pub status: SuiteStatus,
    pub max_residual: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub results: Vec<SuiteResult>,
}

/// Runs every suite on every catalog field in parallel; results are sorted
/// by suite name, then by catalog order.
pub fn verify_all(points: usize) -> VerifyReport {
    let jobs: Vec<(&str, FieldKind)> = SUITES
        .iter()
        .flat_map(|&s| FieldKind::ALL.iter().map(move |&k| (s, k)))
        .collect();
    let results: Vec<SuiteResult> = jobs
        .par_iter()
        .map(|&(suite, kind)| run_one(suite, &FieldSpec::new(kind), points))
        .collect();
    VerifyReport {
        passed: results.iter().all(|r| r.status != SuiteStatus::Fail),
        results,
    }
}

pub fn run_one(suite: &str, spec: &FieldSpec, points: usize) -> SuiteResult {
    let seed = 0x5eed ^ spec.kind as u64;
    let outcome = match suite {
        "fields" => fields_suite(spec, points, seed),
        "geometry" => geometry_suite(spec, points, seed),
        "topology" => topology_suite(spec),
        "bundle" => {
            let report = run_suite(spec, points, seed);
            let worst = report
                .checks
                .iter()
                .map(|c| c.max_residual / c.tolerance)
                .fold(0.0, f64::max);
            let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            Ok(Check {
                passed: report.passed,
                residual: worst,
                detail: if failed.is_empty() {
                    format!("{} checks, worst residual/tolerance {worst:.2e}", report.checks.len())
                } else {
                    format!("failed: {}", failed.join(", "))
                },
            })
        }
        "dynamics" => {
            if !spec.kind.has_global_potential() {
                return SuiteResult {
                    suite: suite.to_string(),
                    field: spec.kind,
                    status: SuiteStatus::Skipped,
                    max_residual: 0.0,
                    detail: "no global vector potential".into(),
                };
            }
            dynamics_suite(spec, points, seed)
        }
        other => Ok(Check {
            passed: false,
            residual: f64::NAN,
            detail: format!("unknown suite {other}"),
        }),
    };
    let check = outcome.unwrap_or_else(|e| Check {
        passed: false,
        residual: f64::NAN,
        detail: format!("{}: {e}", e.name()),
    });
    SuiteResult {
        suite: suite.to_string(),
        field: spec.kind,
        status: if check.passed { SuiteStatus::Pass } else { SuiteStatus::Fail },
        max_residual: check.residual,
        detail: check.detail,
    }
}

struct Check {
    passed: bool,
    residual: f64,
    detail: String,
}

fn fields_suite(spec: &FieldSpec, points: usize, seed: u64) -> Result<Check> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut div = 0.0f64;
    let mut jac = 0.0f64;
    for _ in 0..points {
        let x = random_point(spec, &mut rng);
        let s = spec.eval(&x)?;
        let scale = 1.0 + s.grad_b.amax();
        div = div.max(s.divergence().abs() / scale);
        let fd = jacobian3(|y| spec.b_field(y), &x, DiffConfig::central(1e-6))?;
        for (i, row) in fd.iter().enumerate() {
            jac = jac.max((row - s.grad_b.row(i).transpose()).amax() / scale);
        }
    }
    Ok(Check {
        passed: div < 1e-12 && jac < 1e-6,
        residual: div.max(jac),
        detail: format!("div B {div:.1e}, Jacobian vs differences {jac:.1e}"),
    })
}

fn geometry_suite(spec: &FieldSpec, points: usize, seed: u64) -> Result<Check> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut ortho = 0.0f64;
    let mut curl = 0.0f64;
    for _ in 0..points {
        let x = random_point(spec, &mut rng);
        let n = compute_n(spec, &x)?.n;
        for chart in usable_charts(spec, &x) {
            let f = local_frame(spec, &x, chart)?;
            let triad = [
                (f.e1.norm() - 1.0).abs(),
                (f.e2.norm() - 1.0).abs(),
                f.e1.dot(&f.e2).abs(),
                f.e1.dot(&f.b).abs(),
                (f.e1.cross(&f.e2) - f.b).norm(),
            ];
            ortho = triad.iter().copied().fold(ortho, f64::max);
            curl = curl.max((curl_r(spec, &x, chart)? - n).norm());
        }
    }
    Ok(Check {
        passed: ortho < 1e-12 && curl < 1e-5,
        residual: ortho.max(curl),
        detail: format!("frame orthonormality {ortho:.1e}, |curl R - N| {curl:.1e}"),
    })
}

fn topology_suite(spec: &FieldSpec) -> Result<Check> {
    let (surface, expected) = match spec.kind {
        FieldKind::ToroidalTokamak => (
            SurfaceSpec::torus(Vector3::zeros(), Vector3::z(), spec.param("R0"), 0.5 * spec.param("a")),
            0,
        ),
        FieldKind::Monopole | FieldKind::LinearNull => (SurfaceSpec::sphere(Vector3::zeros(), 2.0), -2),
        _ => (SurfaceSpec::sphere(Vector3::zeros(), 2.0), 0),
    };
    let report = flux_of_n(spec, &surface, surface.default_order())?;
    let q = gyro_charge(&report)?;
    Ok(Check {
        passed: q == expected,
        residual: report.quantization_residual,
        detail: format!("flux {:.9}, charge {q} (expected {expected})", report.flux),
    })
}

fn dynamics_suite(spec: &FieldSpec, points: usize, seed: u64) -> Result<Check> {
    let mut rng = StdRng::seed_from_u64(seed);
    let form = exact_form(spec, 1.0)?;
    let mut kernel = 0.0f64;
    let mut pullback = 0.0f64;
    for _ in 0..points {
        let x = random_point(spec, &mut rng);
        let v = random_direction(&mut rng) * rng.gen_range(0.2..2.0);
        let k = vector_field(&form, &PhasePoint::new(x, v, 0.0).coords())?;
        let vdot = v.cross(&spec.b_field(&x)?);
        let expected = Coords::from_column_slice(&[v.x, v.y, v.z, vdot.x, vdot.y, vdot.z, 1.0]);
        kernel = kernel.max((k - expected).norm());

        let (x, charts) = random_point_with_charts(spec, &mut rng, 1);
        let g = GcPointLocal {
            x,
            v_par: rng.gen_range(-1.5..1.5),
            v_perp: rng.gen_range(0.1..1.5),
            theta: rng.gen_range(0.0..std::f64::consts::TAU),
            chart: charts[0],
        };
        let w = Coords::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        pullback = pullback.max(pullback_equivalence(spec, &g, 0.0, &w)?);
    }
    Ok(Check {
        passed: kernel < 1e-8 && pullback < 1e-9,
        residual: kernel.max(pullback),
        detail: format!("exact kernel {kernel:.1e}, pullback equivalence {pullback:.1e}"),
    })
}
