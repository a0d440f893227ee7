//! Configuration-driven experiment runs with persisted, reproducible
//! results.
//!
//! A run is described by a single TOML config; every output embeds the
//! SHA-256 hash of the resolved config, and every record names the seed its
//! trials started from, so any row can be regenerated bit-exactly from
//! (config, seed) alone. Trials draw sequential seeds (four per trial: one
//! per summand, one for the conjugating permutation, one for the evaluation
//! point), are computed one at a time in a fixed order, and are summed in
//! that order — no nondeterminism enters anywhere.
//!
//! The two trend runs compare the diagonal Cauchy transform of a sampled
//! sum A + B against the free-sum prediction computed from A and B alone,
//! reporting the mean squared entry difference next to the configured
//! theoretical bound. The verification run dispatches the lemma suite and
//! the assumption checks and aggregates their reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::matrix::HermitianMatrix;
use crate::models::{default_moment_window, pair_constant, ModelFamily, ModelSpec};
use crate::resolvent::{
    cauchy_freesum_series, cauchy_freesum_subordination, cauchy_freesum_truncated, cauchy_matrix,
    frobenius_metric, CauchyValue, DiagonalPoint,
};
use crate::rng::{self, rng_from};
use crate::verify::{
    check_frobenius, frobenius_moment, lemma_suite, markov_bound_check, AssumptionReport,
    LemmaSuiteReport, MarkovReport, RadiusRule,
};

/// Version stamp carried by every run record and summary.
pub const RUN_SCHEMA_VERSION: u32 = 1;
/// Ball cap for the free-sum graph solvers when they are chosen as the
/// free-side method.
const FREE_GRAPH_CAP: usize = 400_000;
/// Seed for the operator-norm power iterations used in validity checks.
const NORM_CHECK_SEED: u64 = 0x0e57;

/// What a config asks the tool to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    TheoremA,
    TheoremB,
    LemmaSuite,
    Assumptions,
}

impl ExperimentKind {
    pub fn slug(self) -> &'static str {
        match self {
            ExperimentKind::TheoremA => "theorem_a",
            ExperimentKind::TheoremB => "theorem_b",
            ExperimentKind::LemmaSuite => "lemma_suite",
            ExperimentKind::Assumptions => "assumptions",
        }
    }
}

/// Recipe for the diagonal evaluation point of a trend run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagonalRecipe {
    /// The scalar point (re + im i) I.
    Scalar { re: f64, im: f64 },
    /// Independent entries i * u with u uniform in [lo, hi], redrawn per
    /// trial from the trial's point seed.
    UniformImaginary { lo: f64, hi: f64 },
}

impl DiagonalRecipe {
    fn validate(&self) -> Result<()> {
        match *self {
            DiagonalRecipe::Scalar { im, .. } if im > 0.0 => Ok(()),
            DiagonalRecipe::Scalar { im, .. } => Err(CoreError::Param(format!(
                "scalar evaluation point needs positive imaginary part, got {im}"
            ))),
            DiagonalRecipe::UniformImaginary { lo, hi } if 0.0 < lo && lo <= hi => Ok(()),
            DiagonalRecipe::UniformImaginary { lo, hi } => Err(CoreError::Param(format!(
                "imaginary range needs 0 < lo <= hi, got [{lo}, {hi}]"
            ))),
        }
    }

    /// Guaranteed lower bound on min |D_i| for any realization.
    fn min_abs_floor(&self) -> f64 {
        match *self {
            DiagonalRecipe::Scalar { re, im } => (re * re + im * im).sqrt(),
            DiagonalRecipe::UniformImaginary { lo, .. } => lo,
        }
    }

    fn realize(&self, n: usize, seed: u64) -> Result<DiagonalPoint> {
        match *self {
            DiagonalRecipe::Scalar { re, im } => DiagonalPoint::scalar(Complex64::new(re, im), n),
            DiagonalRecipe::UniformImaginary { lo, hi } => {
                let mut rg = rng_from(seed);
                let entries = (0..n)
                    .map(|_| Complex64::new(0.0, lo + (hi - lo) * rng::uniform_f64(&mut rg)))
                    .collect();
                DiagonalPoint::new(entries)
            }
        }
    }

    fn describe(&self) -> String {
        match *self {
            DiagonalRecipe::Scalar { re, im } => format!("d={re}{im:+}i"),
            DiagonalRecipe::UniformImaginary { lo, hi } => format!("d=i*U[{lo},{hi}]"),
        }
    }
}

/// Free-side solver choice for the trend runs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SolverChoice {
    /// Subordination fixed point (default; works at any valid point).
    Subordination,
    /// Finite sections of the free-sum graph at the given ball depth.
    Truncated { depth: usize },
    /// Rooted moment series with the given term count; scalar points only.
    Series { terms: usize },
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Subordination
    }
}

fn default_fixed_point_tol() -> f64 {
    crate::resolvent::FIXED_POINT_TOL
}

fn default_c_speed() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

fn default_frobenius_threshold() -> f64 {
    4.0
}

fn default_markov_radii() -> Vec<usize> {
    vec![1]
}

/// Complete description of one experiment run. Unknown keys are rejected so
/// config typos surface instead of silently falling back to defaults.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub model_a: ModelFamily,
    pub model_b: ModelFamily,
    pub n_grid: Vec<usize>,
    /// Scalar evaluation points (re, im) for the first trend run.
    #[serde(default)]
    pub z_points: Vec<[f64; 2]>,
    /// Diagonal evaluation recipe for the second trend run.
    #[serde(default)]
    pub diagonal: Option<DiagonalRecipe>,
    pub trials: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default = "default_fixed_point_tol")]
    pub fixed_point_tol: f64,
    /// Declared convergence radius for the scalar-point bound; measured
    /// from the first draw when absent.
    #[serde(default)]
    pub r0: Option<f64>,
    /// Declared speed constant in the scalar-point bound's exponent. The
    /// bound is recorded for the declared value, never fitted.
    #[serde(default = "default_c_speed")]
    pub c_speed: f64,
    /// Declared moment window for the scalar-point bound; the slow-growth
    /// default ln n / ln ln n when absent.
    #[serde(default)]
    pub m_window: Option<u32>,
    /// Declared sparsity constant for the diagonal-point bound and the
    /// assumption checks; measured from the first draw when absent.
    #[serde(default)]
    pub c_param: Option<f64>,
    /// Run advisory assumption checks before a trend run.
    #[serde(default = "default_true")]
    pub preflight: bool,
    /// Power for the Frobenius assumption check; defaults per size.
    #[serde(default)]
    pub power: Option<u32>,
    #[serde(default = "default_frobenius_threshold")]
    pub frobenius_threshold: f64,
    /// Fixed ball radii for the non-tree-root bound check.
    #[serde(default = "default_markov_radii")]
    pub markov_radii: Vec<usize>,
    /// Where to persist outputs; the CLI may override.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// One measured grid point of a trend run. Columns are schema-stable: new
/// fields are only ever appended, guarded by the schema version.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub config_hash: String,
    pub n_dim: usize,
    pub point: String,
    pub metric_mean: f64,
    pub metric_stderr: f64,
    pub bound: f64,
    pub wall_time_s: f64,
    /// First seed of this record's trial block; trials consume four
    /// sequential seeds each, so the block is fully determined by it.
    pub seed: u64,
    pub trials: usize,
}

/// A full trend run: per-grid-point records plus the cross-size exponent
/// fits.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub config_hash: String,
    /// Least-squares slope of log mean metric against log size, over the
    /// first evaluation point.
    pub fitted_exponent: Option<f64>,
    /// Size exponent of the configured bound, from the declared sparsity
    /// constant.
    pub theoretical_exponent: Option<f64>,
    /// The same exponent recomputed from the measured pair constant of the
    /// first draw, recorded for comparison.
    pub measured_exponent: Option<f64>,
    pub preflight: Vec<AssumptionReport>,
    pub records: Vec<RunRecord>,
}

/// Aggregated verification artifacts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VerifyReportSet {
    pub schema_version: u32,
    pub config_hash: String,
    pub lemmas: Option<LemmaSuiteReport>,
    pub assumptions: Vec<AssumptionReport>,
    pub markov: Vec<MarkovReport>,
    pub passed: bool,
}

/// SHA-256 of the canonical JSON encoding of the config.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let bytes = serde_json::to_vec(config)
        .map_err(|e| CoreError::Format(format!("config not serializable: {e}")))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Parse a TOML config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| CoreError::Format(format!("config {}: {e}", path.display())))
}

fn validate_common(config: &ExperimentConfig) -> Result<()> {
    if config.n_grid.is_empty() {
        return Err(CoreError::Param("size grid must be nonempty".into()));
    }
    if config.trials == 0 {
        return Err(CoreError::Param("at least one trial is required".into()));
    }
    if !(config.fixed_point_tol > 0.0) {
        return Err(CoreError::Param(format!(
            "fixed-point tolerance must be positive, got {}",
            config.fixed_point_tol
        )));
    }
    Ok(())
}

fn solve_free(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    d: &DiagonalPoint,
    solver: SolverChoice,
    tol: f64,
) -> Result<CauchyValue> {
    match solver {
        SolverChoice::Subordination => cauchy_freesum_subordination(a, b, d, tol),
        SolverChoice::Truncated { depth } => {
            Ok(cauchy_freesum_truncated(a, b, d, depth, FREE_GRAPH_CAP)?.value)
        }
        SolverChoice::Series { terms } => {
            let first = d.entries()[0];
            if d.entries().iter().any(|&e| e != first) {
                return Err(CoreError::Param(
                    "series evaluation needs a scalar point".into(),
                ));
            }
            Ok(cauchy_freesum_series(a, b, first, terms, FREE_GRAPH_CAP)?.value)
        }
    }
}

fn annotate_solver(e: CoreError, n: usize, point: &str, seed: u64) -> CoreError {
    match e {
        CoreError::NonConvergence(msg) => {
            CoreError::NonConvergence(format!("n = {n}, point {point}, seed {seed}: {msg}"))
        }
        other => other,
    }
}

fn mean_stderr(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of ln y against ln x over the positive points.
fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

fn max_entry_abs(x: &HermitianMatrix) -> f64 {
    (0..x.n())
        .flat_map(|i| x.row(i).iter().map(|(_, v)| v.norm()))
        .fold(0.0, f64::max)
}

/// Convergence radius from measured constants: sqrt(max(4 C, 2 c^2)) with C
/// the per-power Frobenius constant of the worse summand and c the largest
/// entry modulus.
fn measured_r0(a: &HermitianMatrix, b: &HermitianMatrix, m: u32) -> Result<f64> {
    let mf = f64::from(m);
    let ca = frobenius_moment(a, m)?.powf(1.0 / mf);
    let cb = frobenius_moment(b, m)?.powf(1.0 / mf);
    let c_growth = ca.max(cb);
    let c_entry = max_entry_abs(a).max(max_entry_abs(b));
    Ok((4.0 * c_growth).max(2.0 * c_entry * c_entry).sqrt())
}

fn preflight_reports(config: &ExperimentConfig) -> Result<Vec<AssumptionReport>> {
    let n = *config.n_grid.iter().min().expect("grid validated nonempty");
    let m = config.power.unwrap_or_else(|| default_moment_window(n));
    let mut reports = Vec::new();
    let mut families = vec![config.model_a.clone()];
    if config.model_b != config.model_a {
        families.push(config.model_b.clone());
    }
    for (k, family) in families.into_iter().enumerate() {
        let spec = ModelSpec::new(family, n, rng::mix_seed(config.base_seed, 0x5afe + k as u64));
        reports.push(check_frobenius(&spec, m, 3, config.frobenius_threshold)?);
    }
    Ok(reports)
}

/// Scalar-point trend run: measure the mean squared difference between the
/// diagonal Cauchy transform of A + B and the free-sum prediction across
/// the size grid, at each configured z, with one summand conjugated by a
/// fresh uniform permutation each trial. Records carry the configured
/// bound `(4/|z|^2) (r0/|z|)^(2 c M)` for the declared constants.
pub fn run_theorem_a(config: &ExperimentConfig) -> Result<RunSummary> {
    if config.kind != ExperimentKind::TheoremA {
        return Err(CoreError::Param(format!(
            "config kind {:?} does not match this runner",
            config.kind
        )));
    }
    validate_common(config)?;
    if config.z_points.is_empty() {
        return Err(CoreError::Param("need at least one scalar evaluation point".into()));
    }
    for &[re, im] in &config.z_points {
        if !(im > 0.0) {
            return Err(CoreError::Param(format!(
                "evaluation point {re}{im:+}i is not in the upper half-plane"
            )));
        }
    }
    let hash = config_hash(config)?;
    let preflight = if config.preflight { preflight_reports(config)? } else { Vec::new() };
    let mut records = Vec::new();
    let mut seed = config.base_seed;
    for &n in &config.n_grid {
        let m_window = config.m_window.unwrap_or_else(|| default_moment_window(n));
        for &[re, im] in &config.z_points {
            let z = Complex64::new(re, im);
            let point = format!("z={re}{im:+}i");
            let t0 = Instant::now();
            let rec_seed = seed;
            let mut r0_eff = config.r0;
            let mut vals = Vec::with_capacity(config.trials);
            for _ in 0..config.trials {
                let a = ModelSpec::new(config.model_a.clone(), n, seed).generate()?;
                let b_raw = ModelSpec::new(config.model_b.clone(), n, seed + 1).generate()?;
                let mut rg = rng_from(seed + 2);
                let trial_seed = seed;
                seed += 4;
                let perm = rng::random_permutation(&mut rg, n);
                let b = b_raw.permute_conjugate(&perm)?;
                let r0 = match r0_eff {
                    Some(r) => r,
                    None => {
                        let r = measured_r0(&a, &b, m_window)?;
                        r0_eff = Some(r);
                        r
                    }
                };
                if z.norm() <= r0 {
                    return Err(CoreError::Param(format!(
                        "|z| = {} must exceed the convergence radius r0 = {r0:.4} at n = {n}",
                        z.norm()
                    )));
                }
                let d = DiagonalPoint::scalar(z, n)?;
                let g_matrix = cauchy_matrix(&a.add(&b)?, &d)
                    .map_err(|e| annotate_solver(e, n, &point, trial_seed))?;
                let g_free = solve_free(&a, &b, &d, config.solver, config.fixed_point_tol)
                    .map_err(|e| annotate_solver(e, n, &point, trial_seed))?;
                vals.push(frobenius_metric(&g_matrix, &g_free)?);
            }
            let (mean, stderr) = mean_stderr(&vals);
            let r0 = r0_eff.unwrap_or(0.0);
            let bound = 4.0 / z.norm_sqr()
                * (r0 / z.norm()).powf(2.0 * config.c_speed * f64::from(m_window));
            records.push(RunRecord {
                schema_version: RUN_SCHEMA_VERSION,
                config_hash: hash.clone(),
                n_dim: n,
                point,
                metric_mean: mean,
                metric_stderr: stderr,
                bound,
                wall_time_s: t0.elapsed().as_secs_f64(),
                seed: rec_seed,
                trials: config.trials,
            });
        }
    }
    let first_point = records[0].point.clone();
    let fitted = log_log_slope(
        &records
            .iter()
            .filter(|r| r.point == first_point)
            .map(|r| (r.n_dim as f64, r.metric_mean))
            .collect::<Vec<_>>(),
    );
    Ok(RunSummary {
        schema_version: RUN_SCHEMA_VERSION,
        kind: config.kind,
        config_hash: hash,
        fitted_exponent: fitted,
        theoretical_exponent: None,
        measured_exponent: None,
        preflight,
        records,
    })
}

/// Size exponent of the diagonal-point bound: `2 ln(2C/d) / (1 + 2 ln C)`.
fn diagonal_bound_exponent(c: f64, d: f64) -> Result<f64> {
    if !(c >= 1.0) {
        return Err(CoreError::Param(format!(
            "sparsity constant must be at least 1, got {c}"
        )));
    }
    if !(d > 0.0) {
        return Err(CoreError::Param(format!("point modulus must be positive, got {d}")));
    }
    Ok(2.0 * (2.0 * c / d).ln() / (1.0 + 2.0 * c.ln()))
}

/// Diagonal-point trend run: the same comparison at a diagonal evaluation
/// point, for sparse bounded models. Records carry the bound
/// `(6/d^2) n^exponent` with `d = min |D_i|` and the exponent from the
/// declared sparsity constant; the summary reports the fitted exponent next
/// to the declared-constant and measured-constant theoretical exponents.
pub fn run_theorem_b(config: &ExperimentConfig) -> Result<RunSummary> {
    if config.kind != ExperimentKind::TheoremB {
        return Err(CoreError::Param(format!(
            "config kind {:?} does not match this runner",
            config.kind
        )));
    }
    validate_common(config)?;
    let recipe = config
        .diagonal
        .as_ref()
        .ok_or_else(|| CoreError::Param("need a diagonal evaluation recipe".into()))?;
    recipe.validate()?;
    let hash = config_hash(config)?;
    let preflight = if config.preflight { preflight_reports(config)? } else { Vec::new() };
    let d_floor = recipe.min_abs_floor();
    let point = recipe.describe();
    let mut c_declared = config.c_param;
    let mut c_measured: Option<f64> = None;
    let mut records = Vec::new();
    let mut seed = config.base_seed;
    for &n in &config.n_grid {
        let t0 = Instant::now();
        let rec_seed = seed;
        let mut vals = Vec::with_capacity(config.trials);
        for trial in 0..config.trials {
            let a = ModelSpec::new(config.model_a.clone(), n, seed).generate()?;
            let b_raw = ModelSpec::new(config.model_b.clone(), n, seed + 1).generate()?;
            let mut rg = rng_from(seed + 2);
            let trial_seed = seed;
            let point_seed = seed + 3;
            seed += 4;
            let perm = rng::random_permutation(&mut rg, n);
            let b = b_raw.permute_conjugate(&perm)?;
            if c_measured.is_none() {
                c_measured = Some(pair_constant(&a, &b));
            }
            if c_declared.is_none() {
                c_declared = c_measured;
            }
            let d = recipe.realize(n, point_seed)?;
            if trial == 0 {
                // The hypothesis keeps the point above the measured norms.
                let eta0 = a.power_iteration_norm(120, NORM_CHECK_SEED)
                    + b.power_iteration_norm(120, NORM_CHECK_SEED);
                if d.min_im() <= eta0 {
                    return Err(CoreError::Param(format!(
                        "min Im D = {} must exceed the measured norm sum {eta0:.4} at n = {n}",
                        d.min_im()
                    )));
                }
            }
            let g_matrix = cauchy_matrix(&a.add(&b)?, &d)
                .map_err(|e| annotate_solver(e, n, &point, trial_seed))?;
            let g_free = solve_free(&a, &b, &d, config.solver, config.fixed_point_tol)
                .map_err(|e| annotate_solver(e, n, &point, trial_seed))?;
            vals.push(frobenius_metric(&g_matrix, &g_free)?);
        }
        let (mean, stderr) = mean_stderr(&vals);
        let exponent = diagonal_bound_exponent(c_declared.expect("set on first trial"), d_floor)?;
        let bound = 6.0 / (d_floor * d_floor) * (n as f64).powf(exponent);
        records.push(RunRecord {
            schema_version: RUN_SCHEMA_VERSION,
            config_hash: hash.clone(),
            n_dim: n,
            point: point.clone(),
            metric_mean: mean,
            metric_stderr: stderr,
            bound,
            wall_time_s: t0.elapsed().as_secs_f64(),
            seed: rec_seed,
            trials: config.trials,
        });
    }
    let fitted = log_log_slope(
        &records.iter().map(|r| (r.n_dim as f64, r.metric_mean)).collect::<Vec<_>>(),
    );
    let theoretical = diagonal_bound_exponent(c_declared.expect("set on first trial"), d_floor)?;
    let measured = diagonal_bound_exponent(c_measured.expect("set on first trial"), d_floor)?;
    Ok(RunSummary {
        schema_version: RUN_SCHEMA_VERSION,
        kind: config.kind,
        config_hash: hash,
        fitted_exponent: fitted,
        theoretical_exponent: Some(theoretical),
        measured_exponent: Some(measured),
        preflight,
        records,
    })
}

/// Verification run: the lemma suite for the `lemma_suite` kind; the
/// Frobenius assumption checks (both models) plus the non-tree-root bound
/// checks (when a sparsity constant is declared) for the `assumptions`
/// kind.
pub fn run_verify(config: &ExperimentConfig) -> Result<VerifyReportSet> {
    let hash = config_hash(config)?;
    match config.kind {
        ExperimentKind::LemmaSuite => {
            let lemmas = lemma_suite()?;
            let passed = lemmas.passed;
            Ok(VerifyReportSet {
                schema_version: RUN_SCHEMA_VERSION,
                config_hash: hash,
                lemmas: Some(lemmas),
                assumptions: Vec::new(),
                markov: Vec::new(),
                passed,
            })
        }
        ExperimentKind::Assumptions => {
            validate_common(config)?;
            let mut assumptions = Vec::new();
            let mut offset = 0u64;
            let mut families = vec![config.model_a.clone()];
            if config.model_b != config.model_a {
                families.push(config.model_b.clone());
            }
            for &n in &config.n_grid {
                let m = config.power.unwrap_or_else(|| default_moment_window(n));
                for family in &families {
                    let spec = ModelSpec::new(family.clone(), n, config.base_seed + offset);
                    offset += config.trials as u64;
                    assumptions.push(check_frobenius(
                        &spec,
                        m,
                        config.trials,
                        config.frobenius_threshold,
                    )?);
                }
            }
            let mut markov = Vec::new();
            if let Some(c) = config.c_param {
                for &radius in &config.markov_radii {
                    let report = markov_bound_check(
                        &config.model_a,
                        c,
                        &config.n_grid,
                        RadiusRule::Fixed { radius },
                        config.trials,
                        config.base_seed + offset,
                    )?;
                    offset += 2 * (config.n_grid.len() * config.trials) as u64;
                    markov.push(report);
                }
            }
            let passed =
                assumptions.iter().all(|r| r.passed) && markov.iter().all(|r| r.passed);
            Ok(VerifyReportSet {
                schema_version: RUN_SCHEMA_VERSION,
                config_hash: hash,
                lemmas: None,
                assumptions,
                markov,
                passed,
            })
        }
        other => Err(CoreError::Param(format!(
            "verification runner handles lemma_suite and assumptions, got {other:?}"
        ))),
    }
}

/// Write a trend summary as CSV (records) and JSON (full summary), named by
/// kind and config hash. Returns (csv_path, json_path).
pub fn persist_summary(summary: &RunSummary, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let stem = format!("{}_{}", summary.kind.slug(), &summary.config_hash[..12]);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let mut writer = csv::Writer::from_path(&csv_path)
        .map_err(|e| CoreError::Format(format!("{}: {e}", csv_path.display())))?;
    for record in &summary.records {
        writer
            .serialize(record)
            .map_err(|e| CoreError::Format(format!("{}: {e}", csv_path.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CoreError::Format(format!("{}: {e}", csv_path.display())))?;
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| CoreError::Format(format!("summary not serializable: {e}")))?;
    std::fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}

/// Write a verification report set as JSON, named by kind and config hash.
pub fn persist_verify(set: &VerifyReportSet, kind: ExperimentKind, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("report_{}_{}.json", kind.slug(), &set.config_hash[..12]));
    let json = serde_json::to_string_pretty(set)
        .map_err(|e| CoreError::Format(format!("report not serializable: {e}")))?;
    std::fs::write(&path, json)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trend_config(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            model_a: ModelFamily::DilutedWigner { h: 1.0, eps: 0.5, atom: None },
            model_b: ModelFamily::DilutedWigner { h: 1.0, eps: 0.5, atom: None },
            n_grid: vec![24],
            z_points: vec![[0.0, 4.0]],
            diagonal: None,
            trials: 3,
            base_seed: 11,
            solver: SolverChoice::default(),
            fixed_point_tol: 1e-10,
            r0: None,
            c_speed: 0.1,
            m_window: None,
            c_param: None,
            preflight: false,
            power: None,
            frobenius_threshold: 4.0,
            markov_radii: vec![1],
            out_dir: None,
        }
    }

    #[test]
    fn toml_config_round_trips_and_hashes_stably() {
        let text = r#"
            kind = "theorem_a"
            n_grid = [100, 200]
            z_points = [[0.0, 8.0]]
            trials = 5
            base_seed = 42

            [model_a]
            family = "diluted_wigner"
            h = 1.0
            eps = 0.5

            [model_b]
            family = "diluted_wigner"
            h = 1.0
            eps = 0.5

            [solver]
            method = "subordination"
        "#;
        let config: ExperimentConfig = toml::from_str(text).unwrap();
        assert_eq!(config.kind, ExperimentKind::TheoremA);
        assert_eq!(config.n_grid, vec![100, 200]);
        assert_eq!(config.fixed_point_tol, crate::resolvent::FIXED_POINT_TOL);
        let h1 = config_hash(&config).unwrap();
        let h2 = config_hash(&config.clone()).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        // Unknown keys are configuration errors, not silent defaults.
        let bad = format!("{text}\nbogus_key = 1\n");
        assert!(toml::from_str::<ExperimentConfig>(&bad).is_err());
    }

    #[test]
    fn metric_shrinks_fast_in_the_point_modulus() {
        // Both transforms open as 1/z with matching low moments, so the
        // difference must fall at least like the first mismatched power.
        let mut config = trend_config(ExperimentKind::TheoremA);
        config.z_points = vec![[0.0, 4.0], [0.0, 8.0]];
        let summary = run_theorem_a(&config).unwrap();
        assert_eq!(summary.records.len(), 2);
        let near = summary.records[0].metric_mean;
        let far = summary.records[1].metric_mean;
        assert!(near > 0.0, "metric at the near point should be positive, got {near}");
        assert!(
            far <= near / 10.0,
            "doubling |z| should shrink the metric sharply: {near} -> {far}"
        );
    }

    #[test]
    fn records_reproduce_bit_exactly() {
        let config = trend_config(ExperimentKind::TheoremA);
        let s1 = run_theorem_a(&config).unwrap();
        let s2 = run_theorem_a(&config).unwrap();
        assert_eq!(s1.records.len(), s2.records.len());
        for (r1, r2) in s1.records.iter().zip(&s2.records) {
            assert_eq!(
                r1.metric_mean.to_bits(),
                r2.metric_mean.to_bits(),
                "mean drifted between identical runs"
            );
            assert_eq!(r1.metric_stderr.to_bits(), r2.metric_stderr.to_bits());
            assert_eq!(r1.seed, r2.seed);
        }
    }

    #[test]
    fn summary_persists_csv_and_json() {
        let config = trend_config(ExperimentKind::TheoremA);
        let summary = run_theorem_a(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (csv_path, json_path) = persist_summary(&summary, dir.path()).unwrap();
        let csv_text = std::fs::read_to_string(&csv_path).unwrap();
        let mut lines = csv_text.lines();
        let header = lines.next().unwrap();
        for column in ["config_hash", "n_dim", "point", "metric_mean", "bound", "seed"] {
            assert!(header.contains(column), "missing column {column} in {header}");
        }
        assert_eq!(lines.count(), summary.records.len());
        let back: RunSummary =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(back, summary);
    }

    #[test]
    fn theorem_b_far_point_metric_is_tiny() {
        let mut config = trend_config(ExperimentKind::TheoremB);
        config.model_a = ModelFamily::SparseBounded { c: 2 };
        config.model_b = ModelFamily::SparseBounded { c: 2 };
        config.n_grid = vec![20];
        config.z_points = Vec::new();
        config.diagonal = Some(DiagonalRecipe::Scalar { re: 0.0, im: 200.0 });
        config.trials = 2;
        config.c_param = Some(2.0);
        let summary = run_theorem_b(&config).unwrap();
        assert!(
            summary.records[0].metric_mean <= 1e-10,
            "far point should cancel to leading order, got {}",
            summary.records[0].metric_mean
        );
        let theory = summary.theoretical_exponent.unwrap();
        assert!(theory < 0.0, "d >> 2C makes the exponent negative, got {theory}");
        assert!(summary.fitted_exponent.is_none(), "one size cannot be fitted");
    }

    #[test]
    fn theorem_b_rejects_points_below_the_norm_sum() {
        let mut config = trend_config(ExperimentKind::TheoremB);
        config.model_a = ModelFamily::SparseBounded { c: 2 };
        config.model_b = ModelFamily::SparseBounded { c: 2 };
        config.n_grid = vec![20];
        config.z_points = Vec::new();
        // Norms are 2 each, so Im = 3 sits below the measured sum.
        config.diagonal = Some(DiagonalRecipe::Scalar { re: 0.0, im: 3.0 });
        config.c_param = Some(2.0);
        let err = run_theorem_b(&config).unwrap_err();
        assert!(matches!(err, CoreError::Param(_)), "got {err:?}");
    }

    #[test]
    fn verify_run_aggregates_reports() {
        let mut config = trend_config(ExperimentKind::Assumptions);
        config.model_a = ModelFamily::SparseBounded { c: 1 };
        config.model_b = ModelFamily::SparseBounded { c: 1 };
        config.n_grid = vec![30];
        config.trials = 2;
        config.c_param = Some(1.0);
        config.markov_radii = vec![0];
        let set = run_verify(&config).unwrap();
        assert_eq!(set.assumptions.len(), 1, "identical models are checked once");
        assert_eq!(set.markov.len(), 1);
        assert!(set.markov[0].passed, "radius-0 complements are empty");
        assert!(set.lemmas.is_none());
        let dir = tempfile::tempdir().unwrap();
        let path = persist_verify(&set, config.kind, dir.path()).unwrap();
        let back: VerifyReportSet =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn sparse_er_frobenius_failure_is_flagged() {
        // Constant expected degree keeps fat-tree moments growing with the
        // power, so the per-power constant escapes any fixed threshold at a
        // large enough power; the check must flag it rather than average it
        // away.
        let n = 150;
        let spec = ModelSpec::new(ModelFamily::ErdosRenyi { p: 3.0 / n as f64 }, n, 8100);
        let report = check_frobenius(&spec, 12, 3, 4.0).unwrap();
        assert!(
            !report.passed,
            "sparse regime should exceed the bounded-growth threshold: {:?}",
            report.estimates
        );
    }
}
