//! The unit-perpendicular circle bundle `SD = {(x, v) : |v| = 1, v . b(x) = 0}`
//! over the spatial domain.
//!
//! The circle acts by rotating `v` about `b(x)`. The connection
//! `A(x, u, v, a) = a . (b x v)` pulls back along a local section
//! `x -> (x, e1(x))` to the gyrogauge field `R . dx`, whose curl is N.
//!
//! Angle conventions: a bundle chart built on the section `e1` assigns to
//! `(x, v)` the angle `g(x, v)` with `v = cos(g) e1 + sin(g) e2`. The
//! transition function between charts `a` and `b` is
//! `g_ab(x) = g_b(p) - g_a(p)`, so that `A_a = A_b + d g_ab`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::geometry::{frame_r, local_frame, unit_b, Chart, FRAME_R_DIFF};
use crate::numerics::{angle_distance, fmt3, derivative, unwrap_near, wrap_angle, DiffConfig};
use crate::sampling::{random_point_with_charts, random_direction};

/// Tolerance on the `SD` constraints `|v| = 1`, `v . b = 0`.
pub const POINT_TOLERANCE: f64 = 1e-12;
/// Tolerance on the tangency constraints of an `SD` tangent vector.
pub const TANGENT_TOLERANCE: f64 = 1e-10;
/// Stencil for pushforwards along curves in `SD`.
pub const PUSHFORWARD_DIFF: DiffConfig = DiffConfig::richardson(1e-3);
/// Largest jump between unwrapped stencil angles before a branch cut is
/// declared.
const BRANCH_LIMIT: f64 = FRAC_PI_2;

fn field_direction(spec: &FieldSpec, x: &Vector3<f64>) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    unit_b(&spec.eval(x)?)
}

/// A point of `SD`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdPoint {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl SdPoint {
    pub fn new(spec: &FieldSpec, x: Vector3<f64>, v: Vector3<f64>) -> Result<Self> {
        let (b, _) = field_direction(spec, &x)?;
        if (v.norm() - 1.0).abs() > POINT_TOLERANCE || v.dot(&b).abs() > POINT_TOLERANCE {
            return Err(Error::InvariantViolation(format!(
                "({}, {}) is not on SD: |v| - 1 = {:e}, v.b = {:e}",
                fmt3(&x),
                fmt3(&v),
                v.norm() - 1.0,
                v.dot(&b)
            )));
        }
        Ok(SdPoint { x, v })
    }

    /// Projects an arbitrary `v` onto the circle over `x`.
    pub fn project(spec: &FieldSpec, x: Vector3<f64>, v: Vector3<f64>) -> Result<Self> {
        let (b, _) = field_direction(spec, &x)?;
        let perp = v - b * b.dot(&v);
        let n = perp.norm();
        if n < 1e-12 {
            return Err(Error::SingularPoint(format!("{} is parallel to b at {}", fmt3(&v), fmt3(&x))));
        }
        Ok(SdPoint { x, v: perp / n })
    }
}

/// A tangent vector `(u, a)` to `SD` at `base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdTangent {
    pub base: SdPoint,
    pub u: Vector3<f64>,
    pub a: Vector3<f64>,
}

impl SdTangent {
    /// Checks `a . v = 0` and `a . b + v . ((u . grad) b) = 0`.
    pub fn new(spec: &FieldSpec, base: SdPoint, u: Vector3<f64>, a: Vector3<f64>) -> Result<Self> {
        let t = SdTangent { base, u, a };
        let (c1, c2) = t.constraint_defects(spec)?;
        let scale = 1.0 + u.norm() + a.norm();
        if c1.abs() > TANGENT_TOLERANCE * scale || c2.abs() > TANGENT_TOLERANCE * scale {
            return Err(Error::InvariantViolation(format!(
                "not tangent to SD: a.v = {c1:e}, a.b + v.(u.grad b) = {c2:e}"
            )));
        }
        Ok(t)
    }

    /// Tangent with base velocity `u` whose velocity part rotates at rate
    /// `gyration` about `b`; the component of `a` along `b` is fixed by
    /// tangency.
    pub fn with_base_velocity(spec: &FieldSpec, base: SdPoint, u: Vector3<f64>, gyration: f64) -> Result<Self> {
        let (b, grad) = field_direction(spec, &base.x)?;
        let du_b = grad.transpose() * u; // (u . grad) b
        let a = b.cross(&base.v) * gyration - b * base.v.dot(&du_b);
        SdTangent::new(spec, base, u, a)
    }

    pub fn constraint_defects(&self, spec: &FieldSpec) -> Result<(f64, f64)> {
        let (b, grad) = field_direction(spec, &self.base.x)?;
        let du_b = grad.transpose() * self.u;
        Ok((self.a.dot(&self.base.v), self.a.dot(&b) + self.base.v.dot(&du_b)))
    }

    /// A curve in `SD` through `base` with velocity `(u, a)`.
    fn curve(&self, spec: &FieldSpec, s: f64) -> Result<SdPoint> {
        SdPoint::project(spec, self.base.x + self.u * s, self.base.v + self.a * s)
    }
}

/// `Phi_theta(x, v) = (x, exp(theta b_hat) v)`.
pub fn circle_action(spec: &FieldSpec, p: &SdPoint, theta: f64) -> Result<SdPoint> {
    let (b, _) = field_direction(spec, &p.x)?;
    if (p.v.norm() - 1.0).abs() > POINT_TOLERANCE || p.v.dot(&b).abs() > POINT_TOLERANCE {
        return Err(Error::InvariantViolation(format!("({}, {}) is not on SD", fmt3(&p.x), fmt3(&p.v))));
    }
    Ok(SdPoint {
        x: p.x,
        v: p.v * theta.cos() + b.cross(&p.v) * theta.sin(),
    })
}

/// The infinitesimal generator `xi_P` at `p`.
pub fn infinitesimal_generator(spec: &FieldSpec, p: &SdPoint, xi: f64) -> Result<SdTangent> {
    let (b, _) = field_direction(spec, &p.x)?;
    SdTangent::new(spec, *p, Vector3::zeros(), b.cross(&p.v) * xi)
}

pub fn connection_eval(spec: &FieldSpec, t: &SdTangent) -> Result<f64> {
    let t = SdTangent::new(spec, t.base, t.u, t.a)?;
    let (b, _) = field_direction(spec, &t.base.x)?;
    Ok(t.a.dot(&b.cross(&t.base.v)))
}

/// `(Phi_theta)_* t`, by differencing the action along a curve tangent to `t`.
pub fn pushforward_action(spec: &FieldSpec, t: &SdTangent, theta: f64) -> Result<SdTangent> {
    let image = circle_action(spec, &t.base, theta)?;
    let h = PUSHFORWARD_DIFF.step_for(1.0);
    let u = derivative(|s| Ok(circle_action(spec, &t.curve(spec, s)?, theta)?.x), h, true)?;
    let a = derivative(|s| Ok(circle_action(spec, &t.curve(spec, s)?, theta)?.v), h, true)?;
    Ok(SdTangent { base: image, u, a })
}

/// `s_a^* A (w)` evaluated two ways: directly from the section and as `w . R`.
pub fn section_pullback(spec: &FieldSpec, x: &Vector3<f64>, chart: Chart, w: &Vector3<f64>) -> Result<f64> {
    let len = w.norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    let dir = w / len;
    let frame = local_frame(spec, x, chart)?;
    let h = FRAME_R_DIFF.step_for(x.norm());
    let de1 = derivative(|s| Ok(local_frame(spec, &(x + dir * s), chart)?.e1), h, false)?;
    // <(w . grad) e1, b x e1>
    let direct = len * de1.dot(&frame.b.cross(&frame.e1));
    let via_r = w.dot(&frame_r(spec, x, chart)?);
    let difference = (direct - via_r).abs();
    if difference > 1e-5 {
        return Err(Error::ConsistencyFailure {
            what: format!("section pullback vs w.R in chart {chart}"),
            difference,
        });
    }
    Ok(direct)
}

/// Angle `theta` in `[0, 2pi)` with `e1_b = Phi_theta(e1_a)`.
pub fn transition_angle(spec: &FieldSpec, x: &Vector3<f64>, chart_a: Chart, chart_b: Chart) -> Result<f64> {
    if chart_a == chart_b {
        local_frame(spec, x, chart_a)?;
        return Ok(0.0);
    }
    let fa = local_frame(spec, x, chart_a)?;
    let fb = local_frame(spec, x, chart_b)?;
    Ok(wrap_angle(fb.e1.dot(&fa.e2).atan2(fb.e1.dot(&fa.e1))))
}

/// The transition function `g_ab = g_b - g_a` of the bundle charts.
pub fn transition_function(spec: &FieldSpec, x: &Vector3<f64>, chart_a: Chart, chart_b: Chart) -> Result<f64> {
    transition_angle(spec, x, chart_b, chart_a)
}

/// Bundle-chart angle of `p` relative to the section of `chart`.
pub fn chart_angle(spec: &FieldSpec, p: &SdPoint, chart: Chart) -> Result<f64> {
    let f = local_frame(spec, &p.x, chart)?;
    Ok(wrap_angle(p.v.dot(&f.e2).atan2(p.v.dot(&f.e1))))
}

/// Directional derivative of a circle-valued function, differenced on a
/// local branch.
pub fn angle_derivative<F>(f: F, x: &Vector3<f64>, w: &Vector3<f64>, cfg: DiffConfig) -> Result<f64>
where
    F: Fn(&Vector3<f64>) -> Result<f64>,
{
    let len = w.norm();
    if len == 0.0 {
        return Ok(0.0);
    }
    let dir = w / len;
    let center = f(x)?;
    let h = cfg.step_for(x.norm());
    let d = derivative(
        |s| {
            let val = unwrap_near(f(&(x + dir * s))?, center);
            if (val - center).abs() > BRANCH_LIMIT {
                return Err(Error::BranchJump { x: (*x).into() });
            }
            Ok(val)
        },
        h,
        cfg.richardson,
    )?;
    Ok(len * d)
}

/// `|w.R_a - w.R_b - w.grad g_ab|`.
pub fn gauge_law_check(
    spec: &FieldSpec,
    x: &Vector3<f64>,
    chart_a: Chart,
    chart_b: Chart,
    w: &Vector3<f64>,
) -> Result<f64> {
    let ra = frame_r(spec, x, chart_a)?;
    let rb = frame_r(spec, x, chart_b)?;
    let dg = if chart_a == chart_b {
        0.0
    } else {
        angle_derivative(|y| transition_function(spec, y, chart_a, chart_b), x, w, FRAME_R_DIFF)?
    };
    Ok((w.dot(&ra) - w.dot(&rb) - dg).abs())
}

/// `|g_ac - g_ab - g_bc|` measured on the circle.
pub fn cocycle_residual(spec: &FieldSpec, x: &Vector3<f64>, a: Chart, b: Chart, c: Chart) -> Result<f64> {
    let gac = transition_function(spec, x, a, c)?;
    let gab = transition_function(spec, x, a, b)?;
    let gbc = transition_function(spec, x, b, c)?;
    Ok(angle_distance(gab + gbc, gac).abs())
}

/// Bundle-chart representative `(w, xi)` of a tangent vector, plus the
/// chart angle of its base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartRepresentative {
    pub theta: f64,
    pub w: Vector3<f64>,
    pub xi: f64,
    /// `eta = xi + A(w)`, the chart-independent vertical part.
    pub eta: f64,
}

pub fn chart_representative(spec: &FieldSpec, t: &SdTangent, chart: Chart) -> Result<ChartRepresentative> {
    let theta = chart_angle(spec, &t.base, chart)?;
    let h = PUSHFORWARD_DIFF.step_for(1.0);
    let w = derivative(|s| Ok(t.curve(spec, s)?.x), h, true)?;
    let xi = derivative(
        |s| {
            let val = unwrap_near(chart_angle(spec, &t.curve(spec, s)?, chart)?, theta);
            if (val - theta).abs() > BRANCH_LIMIT {
                return Err(Error::BranchJump { x: t.base.x.into() });
            }
            Ok(val)
        },
        h,
        true,
    )?;
    let eta = xi + w.dot(&frame_r(spec, &t.base.x, chart)?);
    Ok(ChartRepresentative { theta, w, xi, eta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeResiduals {
    /// `|w_a - w_b|`
    pub base: f64,
    /// `|eta_a - eta_b|`
    pub vertical: f64,
    /// `|theta_b - theta_a - g_ab|` on the circle.
    pub angle: f64,
}

/// Compares the chart representatives of `field` at the point of chart-`a`
/// angle `theta` over `x`.
pub fn representative_law_check<F>(
    spec: &FieldSpec,
    x: &Vector3<f64>,
    theta: f64,
    field: F,
    chart_a: Chart,
    chart_b: Chart,
) -> Result<RepresentativeResiduals>
where
    F: Fn(&FieldSpec, &SdPoint) -> Result<SdTangent>,
{
    let section = SdPoint::new(spec, *x, local_frame(spec, x, chart_a)?.e1)?;
    let p = circle_action(spec, &section, theta)?;
    let t = field(spec, &p)?;
    let ra = chart_representative(spec, &t, chart_a)?;
    let rb = chart_representative(spec, &t, chart_b)?;
    let g = transition_function(spec, x, chart_a, chart_b)?;
    Ok(RepresentativeResiduals {
        base: (ra.w - rb.w).norm(),
        vertical: (ra.eta - rb.eta).abs(),
        angle: angle_distance(ra.theta + g, rb.theta).abs(),
    })
}

/// Default test vector field: moves the base along `b` and gyrates once
/// per unit time.
pub fn default_test_field(spec: &FieldSpec, p: &SdPoint) -> Result<SdTangent> {
    let (b, _) = field_direction(spec, &p.x)?;
    SdTangent::with_base_velocity(spec, *p, b, 1.0)
}

/// One row of a bundle property-suite report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub evaluations: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleReport {
    pub field: FieldSpec,
    pub points: usize,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

struct Accumulator {
    name: &'static str,
    tolerance: f64,
    evaluations: usize,
    max_residual: f64,
    error: Option<String>,
}

impl Accumulator {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Accumulator {
            name,
            tolerance,
            evaluations: 0,
            max_residual: 0.0,
            error: None,
        }
    }

    fn record(&mut self, residual: Result<f64>) {
        match residual {
            Ok(r) => {
                self.evaluations += 1;
                if !(r <= self.max_residual) {
                    self.max_residual = r;
                }
            }
            Err(e) => {
                if self.error.is_none() {
                    self.error = Some(format!("{}: {e}", e.name()));
                }
            }
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            evaluations: self.evaluations,
            max_residual: self.max_residual,
            tolerance: self.tolerance,
            passed: self.error.is_none() && self.evaluations > 0 && self.max_residual < self.tolerance,
            error: self.error,
        }
    }
}

/// Runs the bundle property suite at `points` random points.
pub fn run_suite(spec: &FieldSpec, points: usize, seed: u64) -> BundleReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut action = Accumulator::new("action_axioms", 1e-12);
    let mut freeness = Accumulator::new("action_free", 1e-10);
    let mut axiom1 = Accumulator::new("connection_vertical", 1e-12);
    let mut axiom2 = Accumulator::new("connection_invariant", 1e-8);
    let mut pullback = Accumulator::new("section_pullback", 1e-5);
    let mut gauge = Accumulator::new("gauge_law", 1e-5);
    let mut cocycle = Accumulator::new("cocycle", 1e-10);
    let mut c1 = Accumulator::new("representative_base", 1e-5);
    let mut c2 = Accumulator::new("representative_vertical", 1e-5);

    for _ in 0..points {
        let (x, charts) = random_point_with_charts(spec, &mut rng, 2);
        let (alpha, beta) = (charts[0], charts[1]);
        let theta1 = rng.gen_range(0.0..std::f64::consts::TAU);
        let theta2 = rng.gen_range(0.0..std::f64::consts::TAU);
        let xi = rng.gen_range(-2.0..2.0);
        let w = random_direction(&mut rng) * rng.gen_range(0.1..2.0);

        let p = local_frame(spec, &x, alpha).and_then(|f| SdPoint::new(spec, x, f.e1));
        let p = match p {
            Ok(p) => p,
            Err(e) => {
                action.record(Err(e));
                continue;
            }
        };

        action.record((|| {
            let composed = circle_action(spec, &circle_action(spec, &p, theta2)?, theta1)?;
            let direct = circle_action(spec, &p, wrap_angle(theta1 + theta2))?;
            let identity = circle_action(spec, &p, 0.0)?;
            Ok((composed.v - direct.v).norm().max((identity.v - p.v).norm()))
        })());

        freeness.record((|| {
            // a nontrivial rotation moves the point by 2|sin(theta/2)|
            let moved = circle_action(spec, &p, theta1)?;
            let expected = 2.0 * (0.5 * theta1).sin().abs();
            Ok(((moved.v - p.v).norm() - expected).abs())
        })());

        axiom1.record((|| {
            let gen = infinitesimal_generator(spec, &p, xi)?;
            Ok((connection_eval(spec, &gen)? - xi).abs())
        })());

        axiom2.record((|| {
            let t = SdTangent::with_base_velocity(spec, p, w, xi)?;
            let pushed = pushforward_action(spec, &t, theta1)?;
            let (b, _) = field_direction(spec, &pushed.base.x)?;
            let after = pushed.a.dot(&b.cross(&pushed.base.v));
            Ok((after - connection_eval(spec, &t)?).abs())
        })());

        pullback.record((|| {
            let value = section_pullback(spec, &x, alpha, &w)?;
            Ok((value - w.dot(&frame_r(spec, &x, alpha)?)).abs())
        })());

        gauge.record(gauge_law_check(spec, &x, alpha, beta, &w));

        if charts.len() >= 3 {
            cocycle.record(cocycle_residual(spec, &x, charts[0], charts[1], charts[2]));
        } else {
            cocycle.record(cocycle_residual(spec, &x, alpha, beta, alpha));
        }

        match representative_law_check(spec, &x, theta1, default_test_field, alpha, beta) {
            Ok(r) => {
                c1.record(Ok(r.base.max(r.angle)));
                c2.record(Ok(r.vertical));
            }
            Err(e) => {
                c1.record(Err(e.clone()));
                c2.record(Err(e));
            }
        }
    }

    let checks: Vec<CheckResult> = [action, freeness, axiom1, axiom2, pullback, gauge, cocycle, c1, c2]
        .into_iter()
        .map(Accumulator::finish)
        .collect();
    BundleReport {
        field: spec.clone(),
        points,
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn action_examples() {
        let spec = FieldSpec::uniform();
        let p = SdPoint::new(&spec, v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0)).unwrap();
        let q = circle_action(&spec, &p, FRAC_PI_2).unwrap();
        assert!((q.v - v(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert_eq!(circle_action(&spec, &p, 0.0).unwrap(), p);
        let q = circle_action(&spec, &p, TAU / 3.0).unwrap();
        assert!((q.v - v(-0.5, 3f64.sqrt() / 2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn action_rejects_points_off_sd() {
        let spec = FieldSpec::uniform();
        let bad = SdPoint { x: Vector3::zeros(), v: v(1.0, 0.0, 0.1) };
        assert_eq!(circle_action(&spec, &bad, 1.0).unwrap_err().name(), "InvariantViolation");
        assert!(SdPoint::new(&spec, Vector3::zeros(), v(2.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn connection_examples() {
        let spec = FieldSpec::screw_pinch();
        let x = v(0.5, 0.2, 0.0);
        let p = SdPoint::new(&spec, x, local_frame(&spec, &x, Chart::SeedX).unwrap().e1).unwrap();
        let zero = SdTangent::with_base_velocity(&spec, p, v(0.3, -1.0, 2.0), 0.0).unwrap();
        // a has only a b-component here
        assert!(connection_eval(&spec, &zero).unwrap().abs() < 1e-15);
        let gen = infinitesimal_generator(&spec, &p, 1.0).unwrap();
        assert!((connection_eval(&spec, &gen).unwrap() - 1.0).abs() < 1e-15);
        let t = SdTangent { base: p, u: Vector3::zeros(), a: v(0.0, 0.0, 1.0) };
        assert!(connection_eval(&spec, &t).is_err());
    }

    #[test]
    fn connection_is_action_invariant() {
        let mut rng = StdRng::seed_from_u64(1);
        for spec in [FieldSpec::screw_pinch(), FieldSpec::monopole(), FieldSpec::linear_null()] {
            for _ in 0..50 {
                let (x, charts) = random_point_with_charts(&spec, &mut rng, 1);
                let e1 = local_frame(&spec, &x, charts[0]).unwrap().e1;
                let p = SdPoint::new(&spec, x, e1).unwrap();
                let t = SdTangent::with_base_velocity(&spec, p, random_direction(&mut rng), rng.gen_range(-1.0..1.0)).unwrap();
                let theta = rng.gen_range(0.0..TAU);
                let pushed = pushforward_action(&spec, &t, theta).unwrap();
                // the pushed vector is again tangent to SD
                let (d1, d2) = pushed.constraint_defects(&spec).unwrap();
                assert!(d1.abs() < 1e-9 && d2.abs() < 1e-9);
                let (b, _) = field_direction(&spec, &pushed.base.x).unwrap();
                let after = pushed.a.dot(&b.cross(&pushed.base.v));
                assert!((after - connection_eval(&spec, &t).unwrap()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn section_pullback_examples() {
        let spec = FieldSpec::uniform();
        assert!(section_pullback(&spec, &v(1.0, 2.0, 3.0), Chart::SeedX, &v(1.0, 1.0, 0.0)).unwrap().abs() < 1e-12);
        let pinch = FieldSpec::screw_pinch();
        let x = v(0.5, 0.0, 0.0);
        let val = section_pullback(&pinch, &x, Chart::SeedX, &Vector3::z()).unwrap();
        let r = frame_r(&pinch, &x, Chart::SeedX).unwrap();
        assert!((val - r.z).abs() < 1e-6);
        assert_eq!(section_pullback(&pinch, &x, Chart::SeedX, &Vector3::zeros()).unwrap(), 0.0);
    }

    #[test]
    fn transition_examples() {
        let spec = FieldSpec::uniform();
        let x = v(0.1, 0.2, 0.3);
        assert_eq!(transition_angle(&spec, &x, Chart::SeedX, Chart::SeedX).unwrap(), 0.0);
        let t = transition_angle(&spec, &x, Chart::SeedX, Chart::SeedY).unwrap();
        assert!((t - FRAC_PI_2).abs() < 1e-15);

        let pinch = FieldSpec::screw_pinch();
        let x = v(0.5, 0.2, -0.4);
        let fa = local_frame(&pinch, &x, Chart::SeedX).unwrap();
        let fb = local_frame(&pinch, &x, Chart::SeedY).unwrap();
        let t = transition_angle(&pinch, &x, Chart::SeedX, Chart::SeedY).unwrap();
        let p = SdPoint::new(&pinch, x, fa.e1).unwrap();
        assert!((circle_action(&pinch, &p, t).unwrap().v - fb.e1).norm() < 1e-12);
        let g = transition_function(&pinch, &x, Chart::SeedX, Chart::SeedY).unwrap();
        assert!(angle_distance(g, -t).abs() < 1e-14);
    }

    #[test]
    fn transition_of_degenerate_chart_fails() {
        let spec = FieldSpec::uniform();
        let err = transition_angle(&spec, &Vector3::zeros(), Chart::SeedX, Chart::SeedZ).unwrap_err();
        assert_eq!(err.name(), "ChartDegenerate");
    }

    #[test]
    fn gauge_law_examples() {
        let x = v(0.5, 0.2, 0.0);
        let w = v(0.3, -0.7, 1.1);
        let pinch = FieldSpec::screw_pinch();
        assert_eq!(gauge_law_check(&pinch, &x, Chart::SeedX, Chart::SeedX, &w).unwrap(), 0.0);
        assert!(gauge_law_check(&FieldSpec::uniform(), &x, Chart::SeedX, Chart::SeedY, &w).unwrap() < 1e-12);
        for w in [Vector3::x(), Vector3::y(), Vector3::z(), w] {
            let r = gauge_law_check(&pinch, &x, Chart::SeedX, Chart::SeedY, &w).unwrap();
            assert!(r < 1e-5, "{r}");
        }
    }

    #[test]
    fn angle_derivative_detects_branch_cut() {
        let f = |y: &Vector3<f64>| Ok(if y.x > 0.0 { 0.0 } else { PI });
        let err = angle_derivative(f, &Vector3::zeros(), &Vector3::x(), FRAME_R_DIFF).unwrap_err();
        assert_eq!(err.name(), "BranchJump");
        // a smooth wrap across 0 = 2pi is fine
        let g = |y: &Vector3<f64>| Ok(wrap_angle(y.x));
        let d = angle_derivative(g, &Vector3::zeros(), &Vector3::x(), FRAME_R_DIFF).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cocycle_holds() {
        let spec = FieldSpec::linear_null();
        let x = v(1.0, -0.5, 0.8);
        let r = cocycle_residual(&spec, &x, Chart::SeedX, Chart::SeedY, Chart::SeedZ).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn representative_law_examples() {
        let vertical = |spec: &FieldSpec, p: &SdPoint| infinitesimal_generator(spec, p, 0.7);
        let pinch = FieldSpec::screw_pinch();
        let x = v(0.5, 0.2, 0.0);
        let t = local_frame(&pinch, &x, Chart::SeedX).unwrap().e1;
        let p = SdPoint::new(&pinch, x, t).unwrap();
        let gen = vertical(&pinch, &p).unwrap();
        let rep = chart_representative(&pinch, &gen, Chart::SeedY).unwrap();
        assert!((rep.eta - 0.7).abs() < 1e-10 && rep.w.norm() < 1e-12);

        let r = representative_law_check(&pinch, &x, 1.0, vertical, Chart::SeedX, Chart::SeedY).unwrap();
        assert!(r.base < 1e-12 && r.vertical < 1e-10 && r.angle < 1e-12);

        let r = representative_law_check(&FieldSpec::uniform(), &x, 2.0, default_test_field, Chart::SeedX, Chart::SeedY).unwrap();
        assert!(r.base < 1e-10 && r.vertical < 1e-10);

        let r = representative_law_check(&pinch, &x, 4.0, default_test_field, Chart::SeedX, Chart::SeedY).unwrap();
        assert!(r.base < 1e-5 && r.vertical < 1e-5 && r.angle < 1e-12, "{r:?}");
    }

    #[test]
    fn suite_passes_on_screw_pinch() {
        let report = run_suite(&FieldSpec::screw_pinch(), 30, 9);
        assert!(report.passed, "{report:#?}");
    }

    #[test]
    fn suite_passes_on_every_catalog_field() {
        for kind in crate::fields::FieldKind::ALL {
            let report = run_suite(&FieldSpec::new(kind), 40, 3);
            assert!(report.passed, "{report:#?}");
        }
    }
}
