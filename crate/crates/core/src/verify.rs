//! Verification runs: build a curve from its JSON description, compute its
//! invariants and judge every identity against its tolerance.
//!
//! Reports are deterministic for a fixed [`RunConfig`]; wall-clock timings
//! are kept apart in [`Timings`] so that the report itself stays
//! byte-identical across runs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arakelov::{
    curve_invariants, lambda_norm, verify_main_theorem, verify_wronskian_lemma, ArakelovMetric, CurveInvariants,
    GreenEvaluator, LocalChart, Residual, DELTA_SPREAD_REL, LAMBDA_REL_STD, METRIC_STEPS, TOL_LIMIT, TOL_NESTED,
    TOL_SINGLE,
};
use crate::curve::quadrature::QuadratureConfig;
use crate::curve::{build_curve_with, CurveModel, CurvePoint, DivisorOnCurve};
use crate::error::{Error, Result};
use crate::siegel::C64;
use crate::theta::{DEFAULT_EPS, MIN_EPS};

/// Largest theta tolerance accepted by a run.
pub const MAX_EPS: f64 = 1e-6;
/// Tuples behind the delta estimate of a run.
pub const DELTA_TUPLES: usize = 5;
/// Probe pairs behind the `||Lambda||` constancy suite.
pub const LAMBDA_PROBES: usize = 20;
/// Base points of the Green normalization suite.
pub const NORMALIZATION_POINTS: usize = 3;

// salts keep the sample points of different suites apart
const MAIN_SALT: usize = 201;
const WRONSKIAN_SALT: usize = 203;
const LAMBDA_SALT: usize = 205;
const NORMALIZATION_SALT: usize = 207;

/// The curve input file: `{"f_coeffs": [[re, im], ...]}` with six ascending
/// coefficients of a monic quintic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveFile {
    pub f_coeffs: Vec<[f64; 2]>,
}

impl CurveFile {
    pub fn coefficients(&self) -> Vec<C64> {
        self.f_coeffs.iter().map(|c| C64::new(c[0], c[1])).collect()
    }
}

/// Parse a curve description.
pub fn parse_curve(json: &str) -> Result<Vec<C64>> {
    let file: CurveFile =
        serde_json::from_str(json).map_err(|e| Error::Domain(format!("malformed curve file: {e}")))?;
    Ok(file.coefficients())
}

/// Read and parse a curve file.
pub fn load_curve(path: &Path) -> Result<Vec<C64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Domain(format!("cannot read curve file {}: {e}", path.display())))?;
    parse_curve(&text)
}

/// Parameters of a verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub curve_file: PathBuf,
    /// Theta tolerance.
    pub eps: f64,
    pub seed: u64,
    /// Divisors in the main-theorem suite; the Wronskian suite uses half.
    pub samples: usize,
    /// Node count of the coarsest quadrature level.
    pub nodes: usize,
    pub refinement_levels: usize,
    /// Directory receiving the report, the CSV and the timings.
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(curve_file: impl Into<PathBuf>) -> Self {
        Self {
            curve_file: curve_file.into(),
            eps: DEFAULT_EPS,
            seed: 0,
            samples: 20,
            nodes: 4000,
            refinement_levels: 4,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= MIN_EPS && self.eps <= MAX_EPS) {
            return Err(Error::Domain(format!("eps must lie in [{MIN_EPS:e}, {MAX_EPS:e}], got {:e}", self.eps)));
        }
        if self.samples == 0 {
            return Err(Error::Domain("samples must be at least 1".into()));
        }
        QuadratureConfig::new(self.seed, self.nodes, self.refinement_levels)?;
        Ok(())
    }

    pub fn quadrature(&self) -> Result<QuadratureConfig> {
        QuadratureConfig::new(self.seed, self.nodes, self.refinement_levels)
    }
}

/// Run parameters echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub eps: f64,
    pub samples: usize,
    pub nodes: usize,
    pub refinement_levels: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSummary {
    pub f_coeffs: Vec<[f64; 2]>,
    pub branch_points: Vec<[f64; 2]>,
    pub tau: Vec<Vec<[f64; 2]>>,
    pub kappa: Vec<[f64; 2]>,
    pub period_refinement_delta: f64,
}

fn pair(c: C64) -> [f64; 2] {
    [c.re, c.im]
}

impl CurveSummary {
    pub fn new(curve: &CurveModel) -> Self {
        let tau = curve.tau().tau();
        Self {
            f_coeffs: curve.f_coeffs().iter().map(|c| pair(*c)).collect(),
            branch_points: curve.branch_points().iter().map(|c| pair(*c)).collect(),
            tau: (0..2).map(|i| (0..2).map(|j| pair(tau[(i, j)])).collect()).collect(),
            kappa: curve.riemann_constant().iter().map(|c| pair(*c)).collect(),
            period_refinement_delta: curve.period_refinement_delta(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantsReport {
    pub delta: f64,
    pub delta_spread: f64,
    pub bost_a: f64,
    pub bost_a_crosscheck: f64,
    pub eta_integral: f64,
    pub errors: InvariantErrorsReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantErrorsReport {
    pub delta: f64,
    pub bost_a: f64,
    pub bost_a_crosscheck: f64,
    pub eta_integral: f64,
}

impl From<&CurveInvariants> for InvariantsReport {
    fn from(inv: &CurveInvariants) -> Self {
        Self {
            delta: inv.delta,
            delta_spread: inv.delta_spread,
            bost_a: inv.bost_a,
            bost_a_crosscheck: inv.bost_a_crosscheck,
            eta_integral: inv.eta_integral,
            errors: InvariantErrorsReport {
                delta: inv.errors.delta,
                bost_a: inv.errors.bost_a,
                bost_a_crosscheck: inv.errors.bost_a_crosscheck,
                eta_integral: inv.errors.eta_integral,
            },
        }
    }
}

/// One residual: both sides of an identity at one sample.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub label: String,
    /// x-coordinate of the sample point, when there is one.
    pub x: Option<[f64; 2]>,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl Row {
    fn at(label: String, p: &CurvePoint, r: Residual) -> Self {
        Self { label, x: p.x().map(pair), lhs: r.lhs, rhs: r.rhs, residual: r.residual }
    }
}

/// Residuals of one identity and the statistic judged against `tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct Suite {
    pub name: String,
    /// What `statistic` measures.
    pub statistic_kind: String,
    pub statistic: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub rows: Vec<Row>,
}

impl Suite {
    fn max_abs(name: &str, tolerance: f64, rows: Vec<Row>) -> Self {
        let statistic = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        Self::judged(name, "max_abs_residual", statistic, tolerance, rows)
    }

    fn judged(name: &str, kind: &str, statistic: f64, tolerance: f64, rows: Vec<Row>) -> Self {
        let passed = !rows.is_empty() && statistic <= tolerance;
        Self { name: name.into(), statistic_kind: kind.into(), statistic, tolerance, passed, rows }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub config: ConfigEcho,
    pub curve: Option<CurveSummary>,
    pub invariants: Option<InvariantsReport>,
    pub suites: Vec<Suite>,
    pub passed: bool,
    /// Stage at which the run stopped, if it did not complete.
    pub failed_stage: Option<String>,
    pub error: Option<String>,
}

impl VerificationReport {
    pub fn suite(&self, name: &str) -> Option<&Suite> {
        self.suites.iter().find(|s| s.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plot data: one line per residual of every suite.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["suite", "label", "x_re", "x_im", "lhs", "rhs", "residual"]).expect("in-memory write");
        for s in &self.suites {
            for r in &s.rows {
                let (xr, xi) = r.x.map_or((String::new(), String::new()), |x| (x[0].to_string(), x[1].to_string()));
                w.write_record([
                    s.name.clone(),
                    r.label.clone(),
                    xr,
                    xi,
                    r.lhs.to_string(),
                    r.rhs.to_string(),
                    r.residual.to_string(),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub stages: Vec<StageTime>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }
}

/// Report, timings and the error that stopped the run, if any.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: VerificationReport,
    pub timings: Timings,
    pub error: Option<Error>,
}

impl RunOutcome {
    /// 0 when every suite passes, 1 on an identity failure, 2 for input
    /// errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match &self.error {
            Some(e) => error_exit_code(e),
            None if self.report.passed => 0,
            None => 1,
        }
    }
}

/// Exit code of a failed stage.
pub fn error_exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

struct Runner {
    timings: Timings,
    report: VerificationReport,
}

impl Runner {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.stages.push(StageTime { stage: name.into(), seconds: start.elapsed().as_secs_f64() });
        if let Err(e) = &out {
            self.report.failed_stage = Some(name.into());
            self.report.error = Some(e.to_string());
        }
        out
    }
}

/// Run the full pipeline: curve, Bost's constant, invariants, then every
/// identity suite.
pub fn run(config: &RunConfig) -> RunOutcome {
    let mut runner = Runner {
        timings: Timings::default(),
        report: VerificationReport {
            config: ConfigEcho {
                seed: config.seed,
                eps: config.eps,
                samples: config.samples,
                nodes: config.nodes,
                refinement_levels: config.refinement_levels,
            },
            curve: None,
            invariants: None,
            suites: Vec::new(),
            passed: false,
            failed_stage: None,
            error: None,
        },
    };
    let error = run_stages(config, &mut runner).err();
    let report = &mut runner.report;
    report.passed = error.is_none() && report.suites.iter().all(|s| s.passed);
    RunOutcome { report: runner.report, timings: runner.timings, error }
}

fn run_stages(config: &RunConfig, runner: &mut Runner) -> Result<()> {
    runner.stage("config", || config.validate())?;
    let coeffs = runner.stage("load", || load_curve(&config.curve_file))?;
    let curve = runner.stage("curve", || build_curve_with(&coeffs, config.eps))?;
    runner.report.curve = Some(CurveSummary::new(&curve));
    let quad = config.quadrature()?;
    let ge = runner.stage("bost_constant", || GreenEvaluator::new(&curve, quad))?;
    let metric = ArakelovMetric::new(&ge, METRIC_STEPS)?;
    let inv = runner.stage("invariants", || curve_invariants(&metric, DELTA_TUPLES))?;
    runner.report.invariants = Some(InvariantsReport::from(&inv));

    let suite = runner.stage("main_theorem", || main_theorem_suite(&ge, &inv, config.samples))?;
    runner.report.suites.push(suite);
    let suite = runner.stage("wronskian_lemma", || wronskian_suite(&metric, &inv, config.samples.div_ceil(2)))?;
    runner.report.suites.push(suite);
    let suite = runner.stage("lambda_constancy", || lambda_suite(&ge))?;
    runner.report.suites.push(suite);
    let suite = runner.stage("green_normalization", || normalization_suite(&ge))?;
    runner.report.suites.push(suite);
    runner.report.suites.push(crosscheck_suite(&inv));
    runner.report.suites.push(delta_suite(&inv));
    Ok(())
}

/// Draws up to this many candidates per requested sample before giving up.
const DRAWS_PER_SAMPLE: usize = 4;

fn main_theorem_suite(ge: &GreenEvaluator, inv: &CurveInvariants, samples: usize) -> Result<Suite> {
    let curve = ge.curve();
    let mut rows = Vec::new();
    for i in 0..DRAWS_PER_SAMPLE * samples + 8 {
        if rows.len() == samples {
            break;
        }
        let p = curve.sample_point(i, MAIN_SALT);
        match verify_main_theorem(ge, inv, &DivisorOnCurve::point(p)) {
            Ok(r) => rows.push(Row::at(format!("D{i}"), &p, r)),
            Err(Error::Excluded(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Suite::max_abs("main_theorem", TOL_NESTED, rows))
}

fn wronskian_suite(m: &ArakelovMetric, inv: &CurveInvariants, samples: usize) -> Result<Suite> {
    let curve = m.green().curve();
    let mut rows = Vec::new();
    for i in 0..DRAWS_PER_SAMPLE * samples + 8 {
        if rows.len() == samples {
            break;
        }
        let p = curve.sample_point(i, WRONSKIAN_SALT);
        match verify_wronskian_lemma(m, inv, &p, LocalChart::X) {
            Ok(r) => rows.push(Row::at(format!("P{i}"), &p, r)),
            // excluded, or too close to a branch point for the metric's steps
            Err(Error::Excluded(_)) | Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Suite::max_abs("wronskian_lemma", TOL_LIMIT, rows))
}

fn lambda_suite(ge: &GreenEvaluator) -> Result<Suite> {
    let d = ge.curve().sample_point(0, LAMBDA_SALT);
    let divisor = DivisorOnCurve::point(d);
    let values: Vec<f64> = (0..LAMBDA_PROBES)
        .map(|i| {
            let (r, s) = ge.probe_pair(i, LAMBDA_SALT);
            lambda_norm(ge, &divisor, &r, &s)
        })
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let rows = values
        .iter()
        .enumerate()
        .map(|(i, &v)| Row {
            label: format!("probe{i}"),
            x: d.x().map(pair),
            lhs: v,
            rhs: mean,
            residual: v / mean - 1.0,
        })
        .collect();
    Ok(Suite::judged("lambda_constancy", "relative_std", std / mean, LAMBDA_REL_STD, rows))
}

fn normalization_suite(ge: &GreenEvaluator) -> Result<Suite> {
    let mut rows = Vec::new();
    for i in 0..NORMALIZATION_POINTS {
        let p = ge.curve().sample_point(i, NORMALIZATION_SALT);
        let r = ge.normalization_residual(&p)?;
        rows.push(Row { label: format!("P{i}"), x: p.x().map(pair), lhs: r.value, rhs: 0.0, residual: r.value });
    }
    Ok(Suite::max_abs("green_normalization", TOL_SINGLE, rows))
}

fn crosscheck_suite(inv: &CurveInvariants) -> Suite {
    let row = Row {
        label: "A".into(),
        x: None,
        lhs: inv.bost_a_crosscheck,
        rhs: inv.bost_a,
        residual: inv.bost_a_crosscheck - inv.bost_a,
    };
    Suite::max_abs("bost_crosscheck", TOL_NESTED, vec![row])
}

fn delta_suite(inv: &CurveInvariants) -> Suite {
    let rows = inv
        .delta_samples
        .iter()
        .enumerate()
        .map(|(i, &v)| Row { label: format!("tuple{i}"), x: None, lhs: v, rhs: inv.delta, residual: v - inv.delta })
        .collect();
    let tolerance = DELTA_SPREAD_REL * (1.0 + inv.delta.abs());
    Suite::judged("delta_spread", "max_abs_deviation", inv.delta_spread, tolerance, rows)
}

/// Write `report.json`, `residuals.csv` and `timings.json` into `dir`.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), outcome.report.to_json() + "\n")?;
    std::fs::write(dir.join("residuals.csv"), outcome.report.to_csv())?;
    let timings = serde_json::to_string_pretty(&outcome.timings).expect("timings serialize");
    std::fs::write(dir.join("timings.json"), timings + "\n")?;
    Ok(())
}
