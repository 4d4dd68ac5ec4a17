use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thetadiv::arakelov::{curve_invariants, ArakelovMetric, GreenEvaluator, METRIC_STEPS};
use thetadiv::curve::quadrature::QuadratureConfig;
use thetadiv::curve::{build_curve_with, CurveModel, CurvePoint};
use thetadiv::gaussmap::eta_with;
use thetadiv::siegel::PeriodMatrix;
use thetadiv::theta::{ThetaEvaluator, DEFAULT_EPS};
use thetadiv::verify::{self, error_exit_code, CurveSummary, InvariantsReport, RunConfig, DELTA_TUPLES};
use thetadiv::{Error, C64};

mod parse;

/// Theta functions, the Gauss map on the theta divisor and Arakelov
/// invariants of genus-2 curves.
#[derive(Parser)]
#[command(name = "thetadiv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Theta value, gradient and Hessian at one point.
    Theta(PointArgs),
    /// The bordered determinant eta at a point of the theta divisor.
    Eta(PointArgs),
    /// Periods, branch points, Riemann constant and Gram matrix of a curve.
    Curve {
        curve_file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Report the change of the periods under refined path integration.
        #[arg(long)]
        refine: bool,
    },
    /// The canonical Green's function at two points.
    Green {
        curve_file: PathBuf,
        /// x-coordinate of the first point.
        #[arg(long, allow_hyphen_values = true)]
        r: String,
        /// x-coordinate of the second point.
        #[arg(long, allow_hyphen_values = true)]
        s: String,
        /// Sheet of the first point (1 or -1).
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        r_sheet: i8,
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        s_sheet: i8,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Delta, Bost's constant (both ways) and the eta integral.
    Invariants {
        curve_file: PathBuf,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Run every identity suite and write the report.
    Verify {
        curve_file: PathBuf,
        /// Divisors in the main-theorem suite.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Output directory for report.json, residuals.csv and timings.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        quad: QuadArgs,
    },
}

#[derive(Args)]
struct PointArgs {
    /// Genus.
    #[arg(long)]
    g: usize,
    /// Period matrix: `diag(a,b,..)` or the g*g entries row by row.
    #[arg(long, allow_hyphen_values = true)]
    tau: String,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
}

#[derive(Args)]
struct QuadArgs {
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Node count of the coarsest quadrature level.
    #[arg(long, default_value_t = 4000)]
    nodes: usize,
    /// Add one quadrature refinement level.
    #[arg(long)]
    refine: bool,
}

impl QuadArgs {
    fn levels(&self) -> usize {
        if self.refine {
            5
        } else {
            4
        }
    }

    fn config(&self) -> Result<QuadratureConfig, Error> {
        QuadratureConfig::new(self.seed, self.nodes, self.levels())
    }
}

fn pair(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

fn print(v: &Value) {
    emit(&serde_json::to_string_pretty(v).expect("json"));
}

/// Write to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn evaluator(a: &PointArgs) -> Result<(ThetaEvaluator, Vec<C64>), Error> {
    let tau = parse::period_matrix(a.g, &a.tau)?;
    let z = parse::complex_list(&a.z)?;
    if z.len() != a.g {
        return Err(Error::Domain(format!("expected {} coordinates, got {}", a.g, z.len())));
    }
    Ok((ThetaEvaluator::new(Arc::new(PeriodMatrix::new(tau)?), a.eps)?, z))
}

fn cmd_theta(a: &PointArgs) -> Result<(), Error> {
    let (ev, z) = evaluator(a)?;
    let jet = ev.jet(&z);
    let scale = jet.log_scale.exp();
    print(&json!({
        "value": pair(jet.value_unscaled()),
        "grad": jet.grad.iter().map(|v| pair(v * scale)).collect::<Vec<_>>(),
        "hess": (0..a.g).map(|i| (0..a.g).map(|j| pair(jet.hess[(i, j)] * scale)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "err_bound": jet.err_bound * scale,
        "log_scale": jet.log_scale,
        "log_norm": ev.log_norm(&z),
    }));
    Ok(())
}

fn cmd_eta(a: &PointArgs) -> Result<(), Error> {
    let (ev, z) = evaluator(a)?;
    let e = eta_with(&ev, &z)?;
    print(&json!({
        "eta": pair(e.eta_unscaled()),
        "eta_norm": e.eta_norm,
        "log_norm": finite(e.log_norm()),
        "theta_residual": e.theta_residual,
        "bound": e.bound,
    }));
    Ok(())
}

fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn load(path: &Path, eps: f64) -> Result<CurveModel, Error> {
    build_curve_with(&verify::load_curve(path)?, eps)
}

/// Period change under refinement accepted by `curve --refine`.
const PERIOD_REFINE_TOL: f64 = 1e-9;

fn cmd_curve(path: &Path, eps: f64, refine: bool) -> Result<i32, Error> {
    let curve = load(path, eps)?;
    let gram = curve.gram();
    let im = curve.tau().im();
    let ev = nalgebra::SymmetricEigen::new(im.clone()).eigenvalues;
    let mut out = json!({
        "summary": serde_json::to_value(CurveSummary::new(&curve)).expect("json"),
        "gram": (0..2).map(|i| (0..2).map(|j| pair(gram[(i, j)])).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "tau_asymmetry": curve.raw_asymmetry(),
        "im_tau_min_eigenvalue": ev.min(),
    });
    let mut code = 0;
    if refine {
        let delta = curve.period_refinement_delta();
        let ok = delta <= PERIOD_REFINE_TOL;
        out["refinement"] = json!({ "period_delta": delta, "tolerance": PERIOD_REFINE_TOL, "passed": ok });
        if !ok {
            code = 3;
        }
    }
    print(&out);
    Ok(code)
}

fn point(curve: &CurveModel, x: &str, sheet: i8) -> Result<CurvePoint, Error> {
    if sheet != 1 && sheet != -1 {
        return Err(Error::Domain(format!("sheet must be 1 or -1, got {sheet}")));
    }
    Ok(curve.point(parse::complex(x)?, sheet))
}

fn cmd_green(path: &Path, r: &str, s: &str, rs: i8, ss: i8, q: &QuadArgs) -> Result<(), Error> {
    let curve = load(path, q.eps)?;
    let (r, s) = (point(&curve, r, rs)?, point(&curve, s, ss)?);
    let ge = GreenEvaluator::new(&curve, q.config()?)?;
    let est = ge.log_green_estimate(&ge.mark(&r), &ge.mark(&s))?;
    print(&json!({
        "log_green": finite(est.value),
        "green": est.value.exp(),
        "error": est.error,
        "bost_a": ge.bost_a(),
        "bost_a_error": ge.bost().error,
    }));
    Ok(())
}

fn cmd_invariants(path: &Path, q: &QuadArgs) -> Result<(), Error> {
    let curve = load(path, q.eps)?;
    let ge = GreenEvaluator::new(&curve, q.config()?)?;
    let m = ArakelovMetric::new(&ge, METRIC_STEPS)?;
    let inv = curve_invariants(&m, DELTA_TUPLES)?;
    print(&serde_json::to_value(InvariantsReport::from(&inv)).expect("json"));
    Ok(())
}

fn cmd_verify(path: &Path, samples: usize, out: Option<PathBuf>, q: &QuadArgs) -> i32 {
    let config = RunConfig {
        curve_file: path.to_path_buf(),
        eps: q.eps,
        seed: q.seed,
        samples,
        nodes: q.nodes,
        refinement_levels: q.levels(),
        output: out,
    };
    let outcome = verify::run(&config);
    if let Some(dir) = &config.output {
        if let Err(e) = verify::write_outputs(&outcome, dir) {
            eprintln!("error: cannot write report to {}: {e}", dir.display());
            return 2;
        }
    } else {
        emit(&outcome.report.to_json());
    }
    for s in &outcome.report.suites {
        eprintln!(
            "{:<20} {} {} = {:.3e} (tolerance {:.1e})",
            s.name,
            if s.passed { "pass" } else { "FAIL" },
            s.statistic_kind,
            s.statistic,
            s.tolerance
        );
    }
    if let Some(e) = &outcome.error {
        eprintln!("error in stage {}: {e}", outcome.report.failed_stage.as_deref().unwrap_or("?"));
    }
    eprintln!("total {:.1} s", outcome.timings.total());
    outcome.exit_code()
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Theta(a) => cmd_theta(&a).map(|_| 0),
        Command::Eta(a) => cmd_eta(&a).map(|_| 0),
        Command::Curve { curve_file, eps, refine } => cmd_curve(&curve_file, eps, refine),
        Command::Green { curve_file, r, s, r_sheet, s_sheet, quad } => {
            cmd_green(&curve_file, &r, &s, r_sheet, s_sheet, &quad).map(|_| 0)
        }
        Command::Invariants { curve_file, quad } => cmd_invariants(&curve_file, &quad).map(|_| 0),
        Command::Verify { curve_file, samples, out, quad } => Ok(cmd_verify(&curve_file, samples, out, &quad)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
