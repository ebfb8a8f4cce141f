//! Random evaluation points inside each catalog field's comfortable
//! interior, used by the property suites and the CLI `verify-all` run.

use nalgebra::Vector3;
use rand::Rng;

use crate::fields::{FieldKind, FieldSpec};
use crate::geometry::{local_frame, Chart};

/// Margin on the defining cross product for a chart to count as usable
/// (stencils around the point stay inside the patch).
pub const CHART_MARGIN: f64 = 0.1;

/// A point well inside the field's valid domain.
pub fn random_point<R: Rng + ?Sized>(spec: &FieldSpec, rng: &mut R) -> Vector3<f64> {
    loop {
        let x = match spec.kind {
            FieldKind::Monopole | FieldKind::LinearNull => {
                let r = rng.gen_range(0.6..4.0);
                random_direction(rng) * r
            }
            FieldKind::ToroidalTokamak => {
                let r0 = spec.param("R0");
                let a = spec.param("a");
                let rho = rng.gen_range(0.0..0.9 * a);
                let pol: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let tor: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let big_r = r0 + rho * pol.cos();
                Vector3::new(big_r * tor.cos(), big_r * tor.sin(), rho * pol.sin())
            }
            FieldKind::GradBSlab => {
                let l = spec.param("L").abs();
                let half = (0.5 * l).min(3.0);
                Vector3::new(
                    rng.gen_range(-half..half),
                    rng.gen_range(-3.0..3.0),
                    rng.gen_range(-3.0..3.0),
                )
            }
            FieldKind::Uniform | FieldKind::ScrewPinch => Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ),
        };
        if spec.check_domain(&x).is_ok() {
            return x;
        }
    }
}

pub fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Charts whose defining cross product exceeds [`CHART_MARGIN`] at `x`.
pub fn usable_charts(spec: &FieldSpec, x: &Vector3<f64>) -> Vec<Chart> {
    Chart::ALL
        .into_iter()
        .filter(|&chart| chart_margin(spec, x, chart) > CHART_MARGIN)
        .collect()
}

fn chart_margin(spec: &FieldSpec, x: &Vector3<f64>, chart: Chart) -> f64 {
    let Ok(frame) = local_frame(spec, x, chart) else {
        return 0.0;
    };
    match chart {
        Chart::SeedX => frame.b.cross(&Vector3::x()).norm(),
        Chart::SeedY => frame.b.cross(&Vector3::y()).norm(),
        Chart::SeedZ => frame.b.cross(&Vector3::z()).norm(),
        Chart::TorusE1 => {
            let rho = x.xy().norm();
            if rho < 0.5 {
                return 0.0;
            }
            let e_r = Vector3::new(x.x / rho, x.y / rho, 0.0);
            e_r.cross(&frame.b).norm()
        }
    }
}

/// A point together with at least `min_charts` usable charts.
pub fn random_point_with_charts<R: Rng + ?Sized>(
    spec: &FieldSpec,
    rng: &mut R,
    min_charts: usize,
) -> (Vector3<f64>, Vec<Chart>) {
    loop {
        let x = random_point(spec, rng);
        let charts = usable_charts(spec, &x);
        if charts.len() >= min_charts {
            return (x, charts);
        }
    }
}
