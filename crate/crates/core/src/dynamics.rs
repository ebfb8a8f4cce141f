//! Poincaré–Cartan one-forms on extended phase space and the motion they
//! generate.
//!
//! Three forms share one code path: the exact particle form on `(x, v, t)`,
//! the chart-dependent guiding-center form on `(x, v_par, v_perp, theta, t)`
//! and its frame-free counterpart on `(x, v, t)`. Equations of motion are
//! the kernel of the numerically differentiated form, normalized so the
//! time component is 1.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::bundle::{angle_derivative, transition_angle};
use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::geometry::{frame_r_exact, local_frame, unit_b, Chart};
use crate::numerics::{derivative, fmt3, wrap_angle, DiffConfig};

pub const DIM: usize = 7;
pub type Coords = SVector<f64, DIM>;
pub type FormMatrix = SMatrix<f64, DIM, DIM>;

/// `|b x v|` below this fraction of `|v|` is the guiding-center singular set.
pub const V_PERP_MIN_REL: f64 = 1e-6;
/// Stencil for differentiating form coefficients.
pub const EXTERIOR_DIFF: DiffConfig = DiffConfig::richardson(1e-4);
/// Stencil for pushing tangents through the velocity chart map.
pub const CHART_MAP_DIFF: DiffConfig = DiffConfig::richardson(1e-3);
/// Required ratio between the two smallest singular values of `d theta`.
pub const KERNEL_GAP: f64 = 1e3;
/// Largest number of step halvings before an integration gives up.
pub const MAX_HALVINGS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormKind {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "gc-local")]
    GcLocal,
    #[serde(rename = "gc-global")]
    GcGlobal,
}

impl FormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FormKind::Exact => "exact",
            FormKind::GcLocal => "gc-local",
            FormKind::GcGlobal => "gc-global",
        }
    }
}

impl fmt::Display for FormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(FormKind::Exact),
            "gc-local" => Ok(FormKind::GcLocal),
            "gc-global" => Ok(FormKind::GcGlobal),
            other => Err(Error::InvalidSpec(format!(
                "unknown form {other:?}; expected exact, gc-local or gc-global"
            ))),
        }
    }
}

/// Which coordinates a form's 7-vector refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    /// `(x, v, t)`
    Cartesian,
    /// `(x, v_par, v_perp, theta, t)` with `theta` measured from the chart's `e1`.
    Gyro(Chart),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    pub t: f64,
}

impl PhasePoint {
    pub fn new(x: Vector3<f64>, v: Vector3<f64>, t: f64) -> Self {
        PhasePoint { x, v, t }
    }

    pub fn coords(&self) -> Coords {
        Coords::from_column_slice(&[self.x.x, self.x.y, self.x.z, self.v.x, self.v.y, self.v.z, self.t])
    }

    pub fn from_coords(z: &Coords) -> Self {
        PhasePoint {
            x: z.fixed_rows::<3>(0).into(),
            v: z.fixed_rows::<3>(3).into(),
            t: z[6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcPointLocal {
    pub x: Vector3<f64>,
    pub v_par: f64,
    pub v_perp: f64,
    pub theta: f64,
    pub chart: Chart,
}

impl GcPointLocal {
    pub fn coords(&self, t: f64) -> Coords {
        Coords::from_column_slice(&[self.x.x, self.x.y, self.x.z, self.v_par, self.v_perp, self.theta, t])
    }

    pub fn from_coords(z: &Coords, chart: Chart) -> Self {
        GcPointLocal {
            x: z.fixed_rows::<3>(0).into(),
            v_par: z[3],
            v_perp: z[4],
            theta: z[5],
            chart,
        }
    }
}

type CoeffFn = dyn Fn(&Coords) -> Result<Coords> + Send + Sync;

/// A one-form on 7-dimensional extended phase space.
#[derive(Clone)]
pub struct OneForm {
    pub label: String,
    pub kind: FormKind,
    pub coordinates: Coordinates,
    pub field: FieldSpec,
    coeffs: Arc<CoeffFn>,
}

impl fmt::Debug for OneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OneForm")
            .field("label", &self.label)
            .field("coordinates", &self.coordinates)
            .field("field", &self.field)
            .finish_non_exhaustive()
    }
}

impl OneForm {
    pub fn dim(&self) -> usize {
        DIM
    }

    pub fn coefficients(&self, z: &Coords) -> Result<Coords> {
        if z.iter().any(|c| !c.is_finite()) {
            return Err(Error::SingularPoint(format!("non-finite phase point {:?}", z.as_slice())));
        }
        (self.coeffs)(z)
    }

    /// The form applied to a tangent vector at `z`.
    pub fn apply(&self, z: &Coords, w: &Coords) -> Result<f64> {
        Ok(self.coefficients(z)?.dot(w))
    }

    /// Cartesian position and velocity of a point in this form's coordinates.
    pub fn phase_point(&self, z: &Coords) -> Result<PhasePoint> {
        match self.coordinates {
            Coordinates::Cartesian => Ok(PhasePoint::from_coords(z)),
            Coordinates::Gyro(chart) => velocity_chart_map(&self.field, &GcPointLocal::from_coords(z, chart), z[6]),
        }
    }
}

fn require_potential(spec: &FieldSpec) -> Result<()> {
    spec.validate()?;
    if !spec.kind.has_global_potential() {
        return Err(Error::NoGlobalPotential(format!("{} has no global vector potential", spec.kind)));
    }
    Ok(())
}

/// `A . dx + eps v . dx - eps^2 v.v/2 dt`
pub fn exact_form(spec: &FieldSpec, epsilon: f64) -> Result<OneForm> {
    require_potential(spec)?;
    let field = spec.clone();
    Ok(OneForm {
        label: format!("exact(eps={epsilon})"),
        kind: FormKind::Exact,
        coordinates: Coordinates::Cartesian,
        field: spec.clone(),
        coeffs: Arc::new(move |z| {
            let p = PhasePoint::from_coords(z);
            let a = field.potential(&p.x)?;
            let dx = a + p.v * epsilon;
            let mut c = Coords::zeros();
            c.fixed_rows_mut::<3>(0).copy_from(&dx);
            c[6] = -0.5 * epsilon * epsilon * p.v.norm_squared();
            Ok(c)
        }),
    })
}

/// `(A + v_par b - mu R) . dx + mu dtheta - (v_par^2 + v_perp^2)/2 dt`
/// with `mu = v_perp^2 / 2|B|`.
pub fn local_gc_form(spec: &FieldSpec, chart: Chart) -> Result<OneForm> {
    require_potential(spec)?;
    let field = spec.clone();
    Ok(OneForm {
        label: format!("gc-local({chart})"),
        kind: FormKind::GcLocal,
        coordinates: Coordinates::Gyro(chart),
        field: spec.clone(),
        coeffs: Arc::new(move |z| {
            let g = GcPointLocal::from_coords(z, chart);
            check_v_perp(&g)?;
            let sample = field.eval(&g.x)?;
            let (b, _) = unit_b(&sample)?;
            let mu = 0.5 * g.v_perp * g.v_perp / sample.b.norm();
            let r = frame_r_exact(&field, &g.x, chart)?;
            let dx = field.potential(&g.x)? + b * g.v_par - r * mu;
            let mut c = Coords::zeros();
            c.fixed_rows_mut::<3>(0).copy_from(&dx);
            c[5] = mu;
            c[6] = -0.5 * (g.v_par * g.v_par + g.v_perp * g.v_perp);
            Ok(c)
        }),
    })
}

fn check_v_perp(g: &GcPointLocal) -> Result<()> {
    let speed = g.v_par.hypot(g.v_perp);
    if !(g.v_perp > V_PERP_MIN_REL * speed) || speed == 0.0 {
        return Err(Error::SingularPoint(format!(
            "v_perp = {:e} at {} is on the singular set",
            g.v_perp,
            fmt3(&g.x)
        )));
    }
    Ok(())
}

fn perpendicular_velocity(b: &Vector3<f64>, x: &Vector3<f64>, v: &Vector3<f64>) -> Result<(Vector3<f64>, f64)> {
    let bxv = b.cross(v);
    let s2 = bxv.norm_squared();
    if !(s2.sqrt() > V_PERP_MIN_REL * v.norm()) || s2 == 0.0 {
        return Err(Error::SingularPoint(format!("v = {} is parallel to b at {}", fmt3(v), fmt3(x))));
    }
    Ok((bxv, s2))
}

/// The frame-free guiding-center form on `(x, v, t)`. With
/// `mu = |b x v|^2 / 2|B|` and `W = (b x v)(v . b)/|b x v|^2`:
/// dx-block `A + (v.b) b + mu (grad b) W`, dv-block `-mu (b x v)/|b x v|^2`,
/// dt `-v.v/2`. The contraction is `((grad b) W)_i = sum_j d_i b_j W_j`.
pub fn global_gc_form(spec: &FieldSpec) -> Result<OneForm> {
    require_potential(spec)?;
    let field = spec.clone();
    Ok(OneForm {
        label: "gc-global".to_string(),
        kind: FormKind::GcGlobal,
        coordinates: Coordinates::Cartesian,
        field: spec.clone(),
        coeffs: Arc::new(move |z| {
            let p = PhasePoint::from_coords(z);
            let sample = field.eval(&p.x)?;
            let (b, grad) = unit_b(&sample)?;
            let (bxv, s2) = perpendicular_velocity(&b, &p.x, &p.v)?;
            let mu = 0.5 * s2 / sample.b.norm();
            let vb = p.v.dot(&b);
            let w = bxv * (vb / s2);
            let dx = field.potential(&p.x)? + b * vb + grad * w * mu;
            let dv = -bxv * (mu / s2);
            let mut c = Coords::zeros();
            c.fixed_rows_mut::<3>(0).copy_from(&dx);
            c.fixed_rows_mut::<3>(3).copy_from(&dv);
            c[6] = -0.5 * p.v.norm_squared();
            Ok(c)
        }),
    })
}

pub fn form(spec: &FieldSpec, kind: FormKind, chart: Chart) -> Result<OneForm> {
    match kind {
        FormKind::Exact => exact_form(spec, 1.0),
        FormKind::GcLocal => local_gc_form(spec, chart),
        FormKind::GcGlobal => global_gc_form(spec),
    }
}

/// `v = v_par b + v_perp (cos(theta) e1 - sin(theta) e2)`
pub fn velocity_chart_map(spec: &FieldSpec, g: &GcPointLocal, t: f64) -> Result<PhasePoint> {
    let f = local_frame(spec, &g.x, g.chart)?;
    let v = f.b * g.v_par + (f.e1 * g.theta.cos() - f.e2 * g.theta.sin()) * g.v_perp;
    Ok(PhasePoint { x: g.x, v, t })
}

/// Inverse of [`velocity_chart_map`], with `theta` in `[0, 2pi)`.
pub fn velocity_chart_inverse(spec: &FieldSpec, p: &PhasePoint, chart: Chart) -> Result<GcPointLocal> {
    let f = local_frame(spec, &p.x, chart)?;
    Ok(GcPointLocal {
        x: p.x,
        v_par: p.v.dot(&f.b),
        v_perp: f.b.cross(&p.v).norm(),
        theta: wrap_angle((-p.v.dot(&f.e2)).atan2(p.v.dot(&f.e1))),
        chart,
    })
}

/// The same phase point in another chart: `theta' = theta + tau` where
/// `tau` rotates `e1` of the old chart onto `e1` of the new one.
pub fn reexpress_point(spec: &FieldSpec, g: &GcPointLocal, chart: Chart) -> Result<GcPointLocal> {
    let tau = transition_angle(spec, &g.x, g.chart, chart)?;
    Ok(GcPointLocal {
        theta: wrap_angle(g.theta + tau),
        chart,
        ..*g
    })
}

/// A tangent at `g` in the coordinates of another chart.
pub fn reexpress_tangent(spec: &FieldSpec, g: &GcPointLocal, w: &Coords, chart: Chart) -> Result<Coords> {
    let wx: Vector3<f64> = w.fixed_rows::<3>(0).into();
    let dtau = angle_derivative(|y| transition_angle(spec, y, g.chart, chart), &g.x, &wx, CHART_MAP_DIFF)?;
    let mut out = *w;
    out[5] += dtau;
    Ok(out)
}

/// `mu = |Pi v|^2 / 2|B|`
pub fn magnetic_moment(spec: &FieldSpec, p: &PhasePoint) -> Result<f64> {
    let sample = spec.eval(&p.x)?;
    let (b, _) = unit_b(&sample)?;
    Ok(0.5 * b.cross(&p.v).norm_squared() / sample.b.norm())
}

/// `M[(i, j)] = d_i c_j - d_j c_i` by finite differences of the coefficients.
pub fn exterior_derivative_matrix(form: &OneForm, z: &Coords) -> Result<FormMatrix> {
    exterior_derivative_with(form, z, EXTERIOR_DIFF)
}

pub fn exterior_derivative_with(form: &OneForm, z: &Coords, cfg: DiffConfig) -> Result<FormMatrix> {
    form.coefficients(z)?;
    let mut jac = FormMatrix::zeros();
    for i in 0..DIM {
        let h = cfg.step_for(z[i]);
        let e = Coords::ith(i, 1.0);
        let row = derivative(|s| form.coefficients(&(z + e * s)), h, cfg.richardson)?;
        jac.set_row(i, &row.transpose());
    }
    // entries are a - b and b - a of the same floats, so this is exactly antisymmetric
    Ok(jac - jac.transpose())
}

/// Null vector of an antisymmetric matrix, scaled to unit time component.
pub fn kernel_vector(m: &FormMatrix) -> Result<Coords> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::SingularPoint("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..DIM).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let smallest = svd.singular_values[order[0]];
    let second = svd.singular_values[order[1]];
    if !(second > KERNEL_GAP * smallest) {
        return Err(Error::DegenerateKernel { smallest, second });
    }
    let null: Coords = v_t.row(order[0]).transpose();
    let dt = null[DIM - 1];
    if dt.abs() < 1e-10 {
        return Err(Error::NonTemporal { dt_component: dt });
    }
    Ok(null / dt)
}

pub fn vector_field(form: &OneForm, z: &Coords) -> Result<Coords> {
    kernel_vector(&exterior_derivative_matrix(form, z)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    /// Position and velocity in Cartesian form.
    pub x: Vector3<f64>,
    pub v: Vector3<f64>,
    pub mu: f64,
    pub energy: f64,
    pub b_norm: f64,
    /// The point in the form's own coordinates.
    pub coords: Coords,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub rejected_attempts: usize,
    pub max_halvings: u32,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub label: String,
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    /// `max |mu - mu_0| / mu_0` over the samples.
    pub fn mu_drift(&self) -> f64 {
        relative_drift(self.samples.iter().map(|s| s.mu))
    }

    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.samples.iter().map(|s| s.energy))
    }

    pub fn summary(&self) -> TrajectorySummary {
        let first = self.first();
        let last = self.last();
        TrajectorySummary {
            form: self.label.clone(),
            dt: self.dt,
            t_final: last.t,
            samples: self.samples.len(),
            mu_initial: first.mu,
            mu_final: last.mu,
            mu_relative_drift: self.mu_drift(),
            energy_initial: first.energy,
            energy_final: last.energy,
            energy_relative_drift: self.energy_drift(),
            x_final: last.x.into(),
            v_final: last.v.into(),
            stats: self.stats,
        }
    }

    /// CSV with columns `t, x1, x2, x3, v1, v2, v3, mu, energy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x1,x2,x3,v1,v2,v3,mu,energy\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.t, s.x.x, s.x.y, s.x.z, s.v.x, s.v.y, s.v.z, s.mu, s.energy
            ));
        }
        out
    }
}

fn relative_drift(values: impl Iterator<Item = f64>) -> f64 {
    let mut values = values.peekable();
    let Some(&first) = values.peek() else {
        return 0.0;
    };
    let scale = if first.abs() > 0.0 { first.abs() } else { 1.0 };
    values.map(|v| (v - first).abs() / scale).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub form: String,
    pub dt: f64,
    pub t_final: f64,
    pub samples: usize,
    pub mu_initial: f64,
    pub mu_final: f64,
    pub mu_relative_drift: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub energy_relative_drift: f64,
    pub x_final: [f64; 3],
    pub v_final: [f64; 3],
    pub stats: StepStats,
}

fn sample(form: &OneForm, z: &Coords) -> Result<TrajectorySample> {
    let p = form.phase_point(z)?;
    let field = form.field.eval(&p.x)?;
    let b_norm = field.b.norm();
    let (mu, energy) = match form.coordinates {
        Coordinates::Cartesian => (magnetic_moment(&form.field, &p)?, 0.5 * p.v.norm_squared()),
        Coordinates::Gyro(_) => (0.5 * z[4] * z[4] / b_norm, 0.5 * (z[3] * z[3] + z[4] * z[4])),
    };
    Ok(TrajectorySample {
        t: z[DIM - 1],
        x: p.x,
        v: p.v,
        mu,
        energy,
        b_norm,
        coords: *z,
    })
}

fn rk4_step(form: &OneForm, z: &Coords, h: f64) -> Result<Coords> {
    let k1 = vector_field(form, z)?;
    let k2 = vector_field(form, &(z + k1 * (0.5 * h)))?;
    let k3 = vector_field(form, &(z + k2 * (0.5 * h)))?;
    let k4 = vector_field(form, &(z + k3 * h))?;
    Ok(z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::DegenerateKernel { .. } | Error::SingularPoint(_))
}

/// Fixed-step RK4 on the kernel field from `z0` to `t0 + t_final`.
///
/// A step that hits a degenerate kernel or the singular set is retried as
/// 2, 4, ... substeps, up to [`MAX_HALVINGS`] halvings.
pub fn integrate(form: &OneForm, z0: &Coords, t_final: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) || !dt.is_finite() || !t_final.is_finite() {
        return Err(Error::InvalidSpec(format!("need dt > 0 and t_final >= 0, got dt={dt}, t_final={t_final}")));
    }
    vector_field(form, z0)?;
    let t0 = z0[DIM - 1];
    let n_steps = (t_final / dt).round().max(if t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
    let h = if n_steps > 0 { t_final / n_steps as f64 } else { dt };
    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push(sample(form, z0)?);
    let mut stats = StepStats::default();
    let mut z = *z0;
    for step in 0..n_steps {
        let mut halvings = 0;
        z = loop {
            let parts = 1usize << halvings;
            let sub = h / parts as f64;
            let attempt = (0..parts).try_fold(z, |acc, _| rk4_step(form, &acc, sub));
            match attempt {
                Ok(next) => break next,
                Err(e) if recoverable(&e) && halvings < MAX_HALVINGS => {
                    halvings += 1;
                    stats.rejected_attempts += 1;
                }
                Err(e) if recoverable(&e) => {
                    return Err(Error::StepCollapse {
                        t: z[DIM - 1],
                        halvings,
                        cause: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        };
        // pin the clock to the grid so t is exactly increasing by h
        z[DIM - 1] = t0 + (step + 1) as f64 * h;
        stats.steps += 1;
        stats.max_halvings = stats.max_halvings.max(halvings);
        samples.push(sample(form, &z)?);
    }
    Ok(Trajectory {
        label: form.label.clone(),
        dt: h,
        samples,
        stats,
    })
}

/// `|local(w) - global(F_* w)|` where `F` is the velocity chart map.
pub fn pullback_equivalence(spec: &FieldSpec, g: &GcPointLocal, t: f64, w: &Coords) -> Result<f64> {
    let local = local_gc_form(spec, g.chart)?;
    let global = global_gc_form(spec)?;
    let z = g.coords(t);
    let lhs = local.apply(&z, w)?;
    let image = velocity_chart_map(spec, g, t)?.coords();
    let push = pushforward_chart_map(spec, g, t, w)?;
    let rhs = global.apply(&image, &push)?;
    Ok((lhs - rhs).abs())
}

/// Differential of the velocity chart map applied to `w`.
pub fn pushforward_chart_map(spec: &FieldSpec, g: &GcPointLocal, t: f64, w: &Coords) -> Result<Coords> {
    let z = g.coords(t);
    let h = CHART_MAP_DIFF.step_for(1.0);
    derivative(
        |s| {
            let moved = GcPointLocal::from_coords(&(z + w * s), g.chart);
            Ok(velocity_chart_map(spec, &moved, t + w[6] * s)?.coords())
        },
        h,
        CHART_MAP_DIFF.richardson,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gauss_legendre;
    use crate::sampling::{random_direction, random_point_with_charts};
    use rand::{rngs::StdRng, Rng, SeedableRng};
    use std::f64::consts::{PI, TAU};

    fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn exact_form_examples() {
        let spec = FieldSpec::uniform();
        let f = exact_form(&spec, 1.0).unwrap();
        let c = f.coefficients(&PhasePoint::new(Vector3::zeros(), v3(1.0, 0.0, 0.0), 0.0).coords()).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.5]);
        let f0 = exact_form(&spec, 0.0).unwrap();
        let z = PhasePoint::new(v3(1.0, 2.0, 0.0), v3(3.0, 1.0, 2.0), 0.0).coords();
        let c = f0.coefficients(&z).unwrap();
        let a = spec.potential(&v3(1.0, 2.0, 0.0)).unwrap();
        assert!((c.fixed_rows::<3>(0) - a).norm() < 1e-15);
        assert_eq!(c[6], 0.0);
        assert_eq!(exact_form(&FieldSpec::monopole(), 1.0).unwrap_err().name(), "NoGlobalPotential");
    }

    #[test]
    fn local_form_examples() {
        let spec = FieldSpec::uniform();
        let f = local_gc_form(&spec, Chart::SeedX).unwrap();
        let g = GcPointLocal { x: v3(0.3, 0.1, 0.0), v_par: 1.0, v_perp: 1.0, theta: 0.4, chart: Chart::SeedX };
        let c = f.coefficients(&g.coords(0.0)).unwrap();
        assert_eq!(c[5], 0.5);
        let g = GcPointLocal { v_perp: 2.0, ..g };
        assert_eq!(f.coefficients(&g.coords(0.0)).unwrap()[6], -2.5);
        let g = GcPointLocal { v_perp: 0.0, ..g };
        assert_eq!(f.coefficients(&g.coords(0.0)).unwrap_err().name(), "SingularPoint");

        // ScrewPinch, assembled from the geometry module independently
        let pinch = FieldSpec::screw_pinch();
        let g = GcPointLocal { x: v3(0.5, 0.2, -0.3), v_par: 0.7, v_perp: 1.3, theta: 2.0, chart: Chart::SeedX };
        let c = local_gc_form(&pinch, Chart::SeedX).unwrap().coefficients(&g.coords(0.0)).unwrap();
        let s = pinch.eval(&g.x).unwrap();
        let r = crate::geometry::frame_r(&pinch, &g.x, Chart::SeedX).unwrap();
        let expected = pinch.potential(&g.x).unwrap() + s.b / s.b.norm() * 0.7 - r * (0.5 * 1.3 * 1.3 / s.b.norm());
        assert!((c.fixed_rows::<3>(0) - expected).norm() < 1e-9);
    }

    #[test]
    fn global_form_examples() {
        let spec = FieldSpec::uniform();
        let f = global_gc_form(&spec).unwrap();
        let (vperp, vpar) = (1.7, 0.4);
        let c = f.coefficients(&PhasePoint::new(Vector3::zeros(), v3(vperp, 0.0, vpar), 0.0).coords()).unwrap();
        assert!((c.fixed_rows::<3>(3) - v3(0.0, -vperp / 2.0, 0.0)).norm() < 1e-15);
        assert!((c.fixed_rows::<3>(0) - v3(0.0, 0.0, vpar)).norm() < 1e-15);
        let c = f.coefficients(&PhasePoint::new(Vector3::zeros(), v3(1.0, 0.0, 1.0), 0.0).coords()).unwrap();
        assert_eq!(c[6], -1.0);
        let err = f.coefficients(&PhasePoint::new(Vector3::zeros(), v3(0.0, 0.0, 1.0), 0.0).coords()).unwrap_err();
        assert_eq!(err.name(), "SingularPoint");
        assert_eq!(global_gc_form(&FieldSpec::monopole()).unwrap_err().name(), "NoGlobalPotential");
    }

    #[test]
    fn chart_map_examples() {
        let spec = FieldSpec::uniform();
        // for b = e_z the seed-y chart has e1 = -e_x; seed-x has e1 = e_y
        let f = local_frame(&spec, &Vector3::zeros(), Chart::SeedY).unwrap();
        assert!((f.e1 + Vector3::x()).norm() < 1e-15);
        let g = GcPointLocal { x: Vector3::zeros(), v_par: 1.0, v_perp: 1.0, theta: 0.0, chart: Chart::SeedY };
        let p = velocity_chart_map(&spec, &g, 0.0).unwrap();
        assert!((p.v - v3(-1.0, 0.0, 1.0)).norm() < 1e-15);
        let p = velocity_chart_map(&spec, &GcPointLocal { theta: FRAC_PI_2, ..g }, 0.0).unwrap();
        // -sin(theta) e2 with e2 = b x e1 = -e_y
        assert!((p.v - v3(0.0, 1.0, 1.0)).norm() < 1e-15);
    }

    const FRAC_PI_2: f64 = PI / 2.0;

    #[test]
    fn chart_map_round_trips() {
        let mut rng = StdRng::seed_from_u64(4);
        let spec = FieldSpec::screw_pinch();
        for _ in 0..1000 {
            let (x, charts) = random_point_with_charts(&spec, &mut rng, 1);
            let g = GcPointLocal {
                x,
                v_par: rng.gen_range(-2.0..2.0),
                v_perp: rng.gen_range(0.05..2.0),
                theta: rng.gen_range(0.0..TAU),
                chart: charts[0],
            };
            let p = velocity_chart_map(&spec, &g, 0.0).unwrap();
            let back = velocity_chart_inverse(&spec, &p, g.chart).unwrap();
            assert!((back.v_par - g.v_par).abs() < 1e-12);
            assert!((back.v_perp - g.v_perp).abs() < 1e-12);
            assert!(crate::numerics::angle_distance(back.theta, g.theta).abs() < 1e-12);
            let mu = magnetic_moment(&spec, &p).unwrap();
            let b = spec.eval(&x).unwrap().b.norm();
            assert!((mu - 0.5 * g.v_perp * g.v_perp / b).abs() < 1e-12);
        }
    }

    #[test]
    fn magnetic_moment_examples() {
        let spec = FieldSpec::uniform();
        assert_eq!(magnetic_moment(&spec, &PhasePoint::new(Vector3::zeros(), v3(1.0, 0.0, 1.0), 0.0)).unwrap(), 0.5);
        assert_eq!(magnetic_moment(&spec, &PhasePoint::new(Vector3::zeros(), v3(0.0, 0.0, 3.0), 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn constant_coefficients_are_closed() {
        let form = OneForm {
            label: "constant".into(),
            kind: FormKind::Exact,
            coordinates: Coordinates::Cartesian,
            field: FieldSpec::uniform(),
            coeffs: Arc::new(|_| Ok(Coords::from_column_slice(&[1.0, -2.0, 3.0, 0.5, 0.0, 4.0, -1.0]))),
        };
        let m = exterior_derivative_matrix(&form, &Coords::repeat(0.3)).unwrap();
        assert_eq!(m, FormMatrix::zeros());
    }

    #[test]
    fn exact_kernel_examples() {
        let f = exact_form(&FieldSpec::uniform(), 1.0).unwrap();
        let z = PhasePoint::new(Vector3::zeros(), v3(1.0, 0.0, 0.0), 0.0).coords();
        let k = vector_field(&f, &z).unwrap();
        let expected = Coords::from_column_slice(&[1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0]);
        assert!((k - expected).norm() < 1e-10, "{k}");
        let z = PhasePoint::new(v3(0.2, 0.0, 1.0), v3(0.0, 0.0, 2.0), 0.0).coords();
        let k = vector_field(&f, &z).unwrap();
        assert!(k.fixed_rows::<3>(3).norm() < 1e-10);
    }

    #[test]
    fn kernel_reports_degeneracy() {
        let err = kernel_vector(&FormMatrix::zeros()).unwrap_err();
        assert_eq!(err.name(), "DegenerateKernel");
        // a kernel that lies purely in space has no time component
        let mut m = FormMatrix::zeros();
        for (i, j) in [(1, 2), (3, 4), (5, 6)] {
            m[(i, j)] = 1.0;
            m[(j, i)] = -1.0;
        }
        assert_eq!(kernel_vector(&m).unwrap_err().name(), "NonTemporal");
    }

    // Line integral of the form around a coordinate square equals the
    // integral of the exterior derivative over it.
    #[test]
    fn stokes_on_coordinate_squares() {
        let spec = FieldSpec::screw_pinch();
        let forms = [
            exact_form(&spec, 0.8).unwrap(),
            global_gc_form(&spec).unwrap(),
            local_gc_form(&spec, Chart::SeedX).unwrap(),
        ];
        let g = GcPointLocal { x: v3(0.4, -0.3, 0.2), v_par: 0.6, v_perp: 1.1, theta: 1.0, chart: Chart::SeedX };
        let (nodes, weights) = gauss_legendre(12);
        let side = 0.05;
        for form in &forms {
            let center = match form.coordinates {
                Coordinates::Cartesian => velocity_chart_map(&spec, &g, 0.0).unwrap().coords(),
                Coordinates::Gyro(_) => g.coords(0.0),
            };
            for (i, j) in [(0, 1), (0, 4), (2, 5), (3, 5), (1, 6)] {
                let (ei, ej) = (Coords::ith(i, 1.0), Coords::ith(j, 1.0));
                let at = |s: f64, t: f64| center + ei * (s * side / 2.0) + ej * (t * side / 2.0);
                let mut line = 0.0;
                for (&s, &w) in nodes.iter().zip(&weights) {
                    let h = side / 2.0;
                    line += w * h * form.coefficients(&at(s, -1.0)).unwrap()[i];
                    line += w * h * form.coefficients(&at(1.0, s)).unwrap()[j];
                    line -= w * h * form.coefficients(&at(s, 1.0)).unwrap()[i];
                    line -= w * h * form.coefficients(&at(-1.0, s)).unwrap()[j];
                }
                let mut area = 0.0;
                for (&s, &ws) in nodes.iter().zip(&weights) {
                    for (&t, &wt) in nodes.iter().zip(&weights) {
                        let m = exterior_derivative_matrix(form, &at(s, t)).unwrap();
                        area += ws * wt * side * side / 4.0 * m[(i, j)];
                    }
                }
                assert!((line - area).abs() < 1e-9, "{} ({i},{j}): {line} vs {area}", form.label);
            }
        }
    }

    #[test]
    fn uniform_orbit_closes() {
        let f = exact_form(&FieldSpec::uniform(), 1.0).unwrap();
        let z0 = PhasePoint::new(v3(0.0, 1.0, 0.0), v3(1.0, 0.0, 0.0), 0.0).coords();
        let traj = integrate(&f, &z0, TAU, TAU / 1000.0).unwrap();
        assert!((traj.last().x - traj.first().x).norm() < 1e-8);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn global_gc_in_uniform_field_streams_along_b() {
        let f = global_gc_form(&FieldSpec::uniform()).unwrap();
        let z0 = PhasePoint::new(v3(0.3, -0.2, 0.0), v3(0.8, 0.1, 0.5), 0.0).coords();
        let traj = integrate(&f, &z0, 100.0, 0.05).unwrap();
        let transverse = traj.samples.iter().map(|s| (s.x - traj.first().x).xy().norm()).fold(0.0, f64::max);
        assert!(transverse < 1e-10, "{transverse}");
        assert!((traj.last().x.z - 50.0).abs() < 1e-8);
    }

    #[test]
    fn singular_start_is_reported() {
        let f = global_gc_form(&FieldSpec::uniform()).unwrap();
        let z0 = PhasePoint::new(Vector3::zeros(), v3(0.0, 0.0, 1.0), 0.0).coords();
        assert_eq!(integrate(&f, &z0, 1.0, 0.1).unwrap_err().name(), "SingularPoint");
    }

    #[test]
    fn grad_b_drift_matches_analytic_speed() {
        let l = 100.0;
        let spec = FieldSpec::grad_b_slab(l);
        let f = global_gc_form(&spec).unwrap();
        let (vperp, vpar) = (1.0, 0.3);
        let z0 = PhasePoint::new(Vector3::zeros(), v3(vperp, 0.0, vpar), 0.0).coords();
        let k = vector_field(&f, &z0).unwrap();
        let b = spec.eval(&Vector3::zeros()).unwrap().b.norm();
        let analytic = 0.5 * vperp * vperp / (b * b) * (1.0 / l);
        assert!((k[1] - analytic).abs() < 0.02 * analytic, "{} vs {analytic}", k[1]);
        assert!(k[0].abs() < 1e-12);
    }

    #[test]
    fn global_coefficients_are_gyrosymmetric_where_claimed() {
        let mut rng = StdRng::seed_from_u64(12);
        let spec = FieldSpec::screw_pinch();
        let f = global_gc_form(&spec).unwrap();
        for _ in 0..200 {
            let (x, _) = random_point_with_charts(&spec, &mut rng, 1);
            let p = crate::bundle::SdPoint::project(&spec, x, random_direction(&mut rng)).unwrap();
            let vpar = rng.gen_range(-1.0..1.0);
            let (b, _) = unit_b(&spec.eval(&x).unwrap()).unwrap();
            let speed = rng.gen_range(0.2..2.0);
            let v = b * vpar + p.v * speed;
            let rotated = crate::bundle::circle_action(&spec, &p, rng.gen_range(0.0..TAU)).unwrap();
            let w = b * vpar + rotated.v * speed;
            let mu_v = magnetic_moment(&spec, &PhasePoint::new(x, v, 0.0)).unwrap();
            let mu_w = magnetic_moment(&spec, &PhasePoint::new(x, w, 0.0)).unwrap();
            assert!((mu_v - mu_w).abs() < 1e-12);
            let cv = f.coefficients(&PhasePoint::new(x, v, 0.0).coords()).unwrap();
            let cw = f.coefficients(&PhasePoint::new(x, w, 0.0).coords()).unwrap();
            assert!((cv[6] - cw[6]).abs() < 1e-12);
        }
    }

    fn random_gc(spec: &FieldSpec, rng: &mut StdRng, min_charts: usize) -> (GcPointLocal, Vec<Chart>) {
        let (x, charts) = random_point_with_charts(spec, rng, min_charts);
        let g = GcPointLocal {
            x,
            v_par: rng.gen_range(-1.5..1.5),
            v_perp: rng.gen_range(0.1..1.5),
            theta: rng.gen_range(0.0..TAU),
            chart: charts[0],
        };
        (g, charts)
    }

    fn random_tangent(rng: &mut StdRng) -> Coords {
        Coords::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn pullback_equivalence_holds() {
        let mut rng = StdRng::seed_from_u64(21);
        for spec in [FieldSpec::uniform(), FieldSpec::screw_pinch(), FieldSpec::grad_b_slab(100.0)] {
            let tol = if spec.kind == crate::fields::FieldKind::Uniform { 1e-12 } else { 1e-9 };
            for _ in 0..200 {
                let (g, charts) = random_gc(&spec, &mut rng, 2);
                let w = random_tangent(&mut rng);
                let r = pullback_equivalence(&spec, &g, 0.0, &w).unwrap();
                assert!(r < tol, "{:?} {r:e}", spec.kind);
                let g2 = reexpress_point(&spec, &g, charts[1]).unwrap();
                let w2 = reexpress_tangent(&spec, &g, &w, charts[1]).unwrap();
                let r2 = pullback_equivalence(&spec, &g2, 0.0, &w2).unwrap();
                assert!(r2 < tol, "{:?} second chart {r2:e}", spec.kind);
            }
        }
    }

    #[test]
    fn reexpressed_point_is_the_same_phase_point() {
        let mut rng = StdRng::seed_from_u64(5);
        let spec = FieldSpec::screw_pinch();
        for _ in 0..100 {
            let (g, charts) = random_gc(&spec, &mut rng, 2);
            let g2 = reexpress_point(&spec, &g, charts[1]).unwrap();
            let p1 = velocity_chart_map(&spec, &g, 0.0).unwrap();
            let p2 = velocity_chart_map(&spec, &g2, 0.0).unwrap();
            assert!((p1.v - p2.v).norm() < 1e-12);
        }
    }

    #[test]
    fn local_trajectories_agree_across_charts() {
        let spec = FieldSpec::screw_pinch();
        let g = GcPointLocal { x: v3(0.6, 0.3, 0.0), v_par: 0.4, v_perp: 0.8, theta: 0.5, chart: Chart::SeedX };
        let g2 = reexpress_point(&spec, &g, Chart::SeedY).unwrap();
        let ta = integrate(&local_gc_form(&spec, Chart::SeedX).unwrap(), &g.coords(0.0), 2.0, 0.01).unwrap();
        let tb = integrate(&local_gc_form(&spec, Chart::SeedY).unwrap(), &g2.coords(0.0), 2.0, 0.01).unwrap();
        for (a, b) in ta.samples.iter().zip(&tb.samples) {
            assert!((a.coords.fixed_rows::<5>(0) - b.coords.fixed_rows::<5>(0)).norm() < 1e-6);
            let tau = transition_angle(&spec, &a.x, Chart::SeedX, Chart::SeedY).unwrap();
            assert!(crate::numerics::angle_distance(a.coords[5] + tau, b.coords[5]).abs() < 1e-6);
        }
    }
}
