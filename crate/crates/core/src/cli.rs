//! The `gyrotop` command line.
//!
//! Physics inputs come from JSON files; flags only steer the run. Reports go
//! to stdout as JSON, or to `--out` with a `.meta.json` sidecar holding the
//! timestamp so the report itself stays byte-for-byte reproducible.
//!
//! Exit codes: 0 success, 1 physics or domain error (structured JSON on
//! stdout), 2 usage error or unreadable input.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bundle::run_suite;
use crate::dynamics::{form, integrate, velocity_chart_inverse, FormKind, PhasePoint, TrajectorySummary};
use crate::error::Error;
use crate::fields::{catalog, FieldSpec};
use crate::geometry::{compute_n, frame_r, local_frame, Chart};
use crate::topology::{
    existence_verdict_with_tolerance, flux_density, flux_of_n, gyro_charge_with_tolerance, DomainSpec,
    SurfaceSpec, INTEGER_TOLERANCE,
};
use crate::verify::verify_all;

pub const TOL_OVERRIDE_VAR: &str = "GYROTOP_TOL_OVERRIDE";

#[derive(Debug, Parser)]
#[command(name = "gyrotop", version, about = "Gyrophase topology and guiding-center one-forms")]
pub struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Field catalog.
    #[command(subcommand)]
    Fields(FieldsCommand),
    /// Pointwise geometry probes.
    #[command(subcommand)]
    Geom(GeomCommand),
    /// Flux of N and frame-existence verdicts.
    #[command(subcommand)]
    Topo(TopoCommand),
    /// Circle-bundle property suites.
    #[command(subcommand)]
    Bundle(BundleCommand),
    /// Trajectories of the one-forms.
    #[command(subcommand)]
    Dyn(DynCommand),
    /// Every module suite against the whole catalog.
    VerifyAll {
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum FieldsCommand {
    List,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[arg(long)]
    pub field: PathBuf,
    /// Point as `x,y,z`.
    #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
    pub at: Vector3<f64>,
}

#[derive(Debug, Subcommand)]
pub enum GeomCommand {
    /// N at a point.
    N(PointArgs),
    /// Local frame and gyrogauge vector R at a point.
    Frame {
        #[command(flatten)]
        point: PointArgs,
        /// seed-x, seed-y, seed-z, torus-e1 or auto.
        #[arg(long, default_value = "auto")]
        chart: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum TopoCommand {
    Flux {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        surface: PathBuf,
        #[arg(long)]
        order: Option<usize>,
        /// Flux density on the quadrature grid, as CSV.
        #[arg(long)]
        density_csv: Option<PathBuf>,
    },
    Verdict {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        domain: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum BundleCommand {
    Check {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum DynCommand {
    Integrate {
        #[arg(long)]
        field: PathBuf,
        /// exact, gc-local or gc-global.
        #[arg(long)]
        form: String,
        #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
        x0: Vector3<f64>,
        #[arg(long, value_parser = parse_vector, allow_hyphen_values = true)]
        v0: Vector3<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t_final: f64,
        #[arg(long, allow_hyphen_values = true)]
        dt: f64,
        /// Chart for gc-local (default: automatic at x0).
        #[arg(long)]
        chart: Option<String>,
        /// Trajectory CSV: t,x1,x2,x3,v1,v2,v3,mu,energy.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_vector(s: &str) -> std::result::Result<Vector3<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(Vector3::from(out))
}

/// Relaxed tolerances for exploratory runs, read from [`TOL_OVERRIDE_VAR`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    /// Allowed distance of `flux / 2pi` from an integer, in `(0, 0.5)`.
    pub integer_tolerance: Option<f64>,
}

impl ToleranceOverride {
    fn from_env() -> Result<Self, CliError> {
        let Ok(raw) = std::env::var(TOL_OVERRIDE_VAR) else {
            return Ok(Self::default());
        };
        let parsed: ToleranceOverride = serde_json::from_str(&raw)
            .map_err(|e| CliError::Usage(format!("{TOL_OVERRIDE_VAR}: {e}")))?;
        if let Some(t) = parsed.integer_tolerance {
            if !(t > 0.0 && t < 0.5) {
                return Err(CliError::Usage(format!(
                    "{TOL_OVERRIDE_VAR}: integer_tolerance must lie in (0, 0.5), got {t}"
                )));
            }
        }
        Ok(parsed)
    }

    fn integer(&self) -> f64 {
        self.integer_tolerance.unwrap_or(INTEGER_TOLERANCE)
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Physics(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(msg) => CliError::Usage(msg),
            other => CliError::Physics(other),
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
}

#[derive(Serialize)]
struct PointReport {
    field: FieldSpec,
    x: [f64; 3],
    n: [f64; 3],
}

#[derive(Serialize)]
struct FrameReport {
    field: FieldSpec,
    x: [f64; 3],
    chart: Chart,
    e1: [f64; 3],
    e2: [f64; 3],
    b: [f64; 3],
    #[serde(rename = "R")]
    r: [f64; 3],
}

#[derive(Serialize)]
struct FluxOutput {
    field: FieldSpec,
    surface: SurfaceSpec,
    flux: f64,
    q: i64,
    q_estimate: f64,
    quantization_residual: f64,
    quadrature_error_estimate: f64,
    order: usize,
}

#[derive(Serialize)]
struct IntegrateOutput {
    field: FieldSpec,
    form: FormKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    chart: Option<Chart>,
    summary: TrajectorySummary,
}

#[derive(Serialize)]
struct Meta<'a> {
    report: String,
    generator: &'a str,
    version: &'a str,
    unix_time: u64,
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed {what} {}: {e}", path.display())))
}

fn read_field(path: &Path) -> Result<FieldSpec, CliError> {
    let spec: FieldSpec = read_json(path, "field spec")?;
    spec.validate()?;
    Ok(spec)
}

fn parse_chart(s: &str) -> Result<Chart, CliError> {
    s.parse::<Chart>().map_err(|e| CliError::Usage(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Runs the CLI on `args` (including the program name), writing reports to
/// `stdout` and diagnostics to `stderr`. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    let out = cli.out.clone();
    match execute(cli.command) {
        Ok((report, passed)) => match emit(&report, out.as_deref(), stdout) {
            Ok(()) if passed => 0,
            Ok(()) => 1,
            Err(e) => fail(e, stdout, stderr),
        },
        Err(e) => fail(e, stdout, stderr),
    }
}

fn emit(report: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        None => stdout
            .write_all(report.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write report: {e}"))),
        Some(path) => {
            write_file(path, report)?;
            let meta = Meta {
                report: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                generator: "gyrotop",
                version: env!("CARGO_PKG_VERSION"),
                unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            };
            let mut meta_path = path.as_os_str().to_owned();
            meta_path.push(".meta.json");
            write_file(Path::new(&meta_path), &to_json(&meta))
        }
    }
}

fn fail(e: CliError, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match e {
        CliError::Usage(message) => {
            let _ = write!(stderr, "{}", to_json(&ErrorReport { error: "UsageError", message }));
            2
        }
        CliError::Physics(err) => {
            let _ = write!(
                stdout,
                "{}",
                to_json(&ErrorReport {
                    error: err.name(),
                    message: err.to_string(),
                })
            );
            1
        }
    }
}

/// The JSON report and whether the run passed.
fn execute(command: Command) -> Result<(String, bool), CliError> {
    match command {
        Command::Fields(FieldsCommand::List) => Ok((to_json(&catalog()), true)),
        Command::Geom(GeomCommand::N(p)) => {
            let spec = read_field(&p.field)?;
            let n = compute_n(&spec, &p.at)?.n;
            Ok((
                to_json(&PointReport {
                    field: spec,
                    x: p.at.into(),
                    n: n.into(),
                }),
                true,
            ))
        }
        Command::Geom(GeomCommand::Frame { point, chart }) => {
            let spec = read_field(&point.field)?;
            let chart = if chart == "auto" {
                Chart::auto(&spec, &point.at)?
            } else {
                parse_chart(&chart)?
            };
            let frame = local_frame(&spec, &point.at, chart)?;
            let r = frame_r(&spec, &point.at, chart)?;
            Ok((
                to_json(&FrameReport {
                    field: spec,
                    x: point.at.into(),
                    chart,
                    e1: frame.e1.into(),
                    e2: frame.e2.into(),
                    b: frame.b.into(),
                    r: r.into(),
                }),
                true,
            ))
        }
        Command::Topo(TopoCommand::Flux {
            field,
            surface,
            order,
            density_csv,
        }) => {
            let tol = ToleranceOverride::from_env()?;
            let spec = read_field(&field)?;
            let surface: SurfaceSpec = read_json(&surface, "surface spec")?;
            surface.validate()?;
            let order = order.unwrap_or_else(|| surface.default_order());
            let report = flux_of_n(&spec, &surface, order)?;
            let q = gyro_charge_with_tolerance(&report, tol.integer())?;
            if let Some(path) = density_csv {
                let mut csv = String::from("s,t,x1,x2,x3,density,weight\n");
                for d in flux_density(&spec, &surface, order)? {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        d.s, d.t, d.x[0], d.x[1], d.x[2], d.density, d.weight
                    ));
                }
                write_file(&path, &csv)?;
            }
            Ok((
                to_json(&FluxOutput {
                    field: spec,
                    surface,
                    flux: report.flux,
                    q,
                    q_estimate: report.q_estimate,
                    quantization_residual: report.quantization_residual,
                    quadrature_error_estimate: report.quadrature_error_estimate,
                    order: report.order,
                }),
                true,
            ))
        }
        Command::Topo(TopoCommand::Verdict { field, domain }) => {
            let tol = ToleranceOverride::from_env()?;
            let spec = read_field(&field)?;
            let domain: DomainSpec = read_json(&domain, "domain spec")?;
            let verdict = existence_verdict_with_tolerance(&spec, &domain, tol.integer())?;
            Ok((to_json(&verdict), true))
        }
        Command::Bundle(BundleCommand::Check {
            field,
            suite,
            points,
            seed,
        }) => {
            if suite != "all" {
                return Err(CliError::Usage(format!("unknown suite {suite:?}; only \"all\" is available")));
            }
            if points == 0 {
                return Err(CliError::Usage("--points must be positive".into()));
            }
            let spec = read_field(&field)?;
            let report = run_suite(&spec, points, seed);
            Ok((to_json(&report), report.passed))
        }
        Command::Dyn(DynCommand::Integrate {
            field,
            form: form_name,
            x0,
            v0,
            t_final,
            dt,
            chart,
            csv,
        }) => {
            let spec = read_field(&field)?;
            let kind: FormKind = form_name.parse()?;
            if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) {
                return Err(CliError::Usage("--dt and --t-final must be positive".into()));
            }
            let chart = match (kind, chart) {
                (FormKind::GcLocal, Some(c)) => Some(parse_chart(&c)?),
                (FormKind::GcLocal, None) => Some(Chart::auto(&spec, &x0)?),
                (_, Some(_)) => return Err(CliError::Usage("--chart only applies to gc-local".into())),
                (_, None) => None,
            };
            let one_form = form(&spec, kind, chart.unwrap_or(Chart::SeedX))?;
            let start = PhasePoint::new(x0, v0, 0.0);
            let z0 = match chart {
                Some(c) => velocity_chart_inverse(&spec, &start, c)?.coords(0.0),
                None => start.coords(),
            };
            let traj = integrate(&one_form, &z0, t_final, dt)?;
            if let Some(path) = csv {
                write_file(&path, &traj.to_csv())?;
            }
            Ok((
                to_json(&IntegrateOutput {
                    field: spec,
                    form: kind,
                    chart,
                    summary: traj.summary(),
                }),
                true,
            ))
        }
        Command::VerifyAll { points } => {
            if points == 0 {
                return Err(CliError::Usage("--points must be positive".into()));
            }
            let report = verify_all(points);
            Ok((to_json(&report), report.passed))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_parse() {
        assert_eq!(parse_vector("1, -2,3.5").unwrap(), Vector3::new(1.0, -2.0, 3.5));
        assert!(parse_vector("1,2").is_err());
        assert!(parse_vector("1,2,nan").is_err());
        assert!(parse_vector("a,b,c").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
