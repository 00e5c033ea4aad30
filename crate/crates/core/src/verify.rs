//! Numeric check suites for the defining identities, producing
//! machine-readable [`Report`]s.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{compare_flows, integrate, Integrator};
use crate::error::{Result, ZooError};
use crate::exec::Exec;
use crate::expr::Potential;
use crate::legendre::{LagrangianSpec, VelocityPoint};
use crate::zoo::{
    chain_factor, eval_derivs, standard_energy, Family, HamiltonianSpec, PhasePoint, Sign, SpecJson,
    SystemParams,
};

/// Step for the momentum derivative of the energy-conservation relation.
const NH3_STEP: f64 = 1e-5;

/// Points closer than this to `1 + aF = 0` are skipped for the σ family.
pub const SIGMA_DEGENERACY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    /// The check could not be evaluated (guard fired, quadrature failed...).
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub key: String,
    pub check: String,
    pub subject: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
    /// `(λ, value)` pairs for sequence checks such as limit ladders.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence: Vec<[f64; 2]>,
    pub value: Option<f64>,
    pub tolerance: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl CheckRecord {
    fn measured(key: String, check: &str, subject: &str, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        CheckRecord {
            key,
            check: check.to_string(),
            subject: subject.to_string(),
            point: None,
            sequence: Vec::new(),
            value: Some(value),
            tolerance,
            status,
            message: None,
        }
    }

    fn failed(key: String, check: &str, subject: &str, tolerance: f64, err: &ZooError) -> Self {
        CheckRecord {
            key,
            check: check.to_string(),
            subject: subject.to_string(),
            point: None,
            sequence: Vec::new(),
            value: None,
            tolerance,
            status: Status::Error,
            message: Some(err.to_string()),
        }
    }

    fn skipped(key: String, check: &str, subject: &str, tolerance: f64, why: &str) -> Self {
        CheckRecord {
            key,
            check: check.to_string(),
            subject: subject.to_string(),
            point: None,
            sequence: Vec::new(),
            value: None,
            tolerance,
            status: Status::Skipped,
            message: Some(why.to_string()),
        }
    }

    fn from_result(
        key: String,
        check: &str,
        subject: &str,
        tolerance: f64,
        value: Result<f64>,
    ) -> Self {
        match value {
            Ok(v) => CheckRecord::measured(key, check, subject, v, tolerance),
            Err(e) => CheckRecord::failed(key, check, subject, tolerance, &e),
        }
    }

    fn at(mut self, x: f64, y: f64) -> Self {
        self.point = Some([x, y]);
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub errors: usize,
    pub max_residual: f64,
    /// Fitted log-log slopes keyed by record key.
    pub slopes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub spec: String,
    pub seed: u64,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl Report {
    /// Builds a report, ordering records by key.
    pub fn new(suite: &str, spec: &str, seed: u64, mut records: Vec<CheckRecord>) -> Self {
        records.sort_by(|a, b| a.key.cmp(&b.key));
        let mut summary = Summary {
            total: records.len(),
            ..Summary::default()
        };
        for r in &records {
            match r.status {
                Status::Pass => summary.passed += 1,
                Status::Fail => summary.failed += 1,
                Status::Skipped => summary.skipped += 1,
                Status::Error => summary.errors += 1,
            }
            match r.message.as_deref().and_then(|m| m.strip_prefix("slope = ")) {
                Some(v) => {
                    if let Ok(slope) = v.parse::<f64>() {
                        summary.slopes.insert(r.key.clone(), slope);
                    }
                }
                None => {
                    if let Some(v) = r.value {
                        summary.max_residual = summary.max_residual.max(v);
                    }
                }
            }
        }
        Report {
            suite: suite.to_string(),
            spec: spec.to_string(),
            seed,
            records,
            summary,
        }
    }

    pub fn merge(suite: &str, spec: &str, seed: u64, parts: Vec<Report>) -> Self {
        let records = parts.into_iter().flat_map(|r| r.records).collect();
        Report::new(suite, spec, seed, records)
    }

    /// No failures and no errors. Skipped records do not count against it.
    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0 && self.summary.errors == 0
    }

    pub fn has_overflow(&self) -> bool {
        self.records
            .iter()
            .any(|r| r.status == Status::Error && r.message.as_deref().is_some_and(|m| m.contains("overflow risk")))
    }

    /// Fixed-width summary, one row per (subject, check).
    pub fn summary_table(&self) -> String {
        #[derive(Default)]
        struct Row {
            n: usize,
            pass: usize,
            fail: usize,
            skip: usize,
            err: usize,
            max: f64,
            tol: f64,
        }
        let mut rows: BTreeMap<(String, String), Row> = BTreeMap::new();
        for r in &self.records {
            let row = rows.entry((r.subject.clone(), r.check.clone())).or_default();
            row.n += 1;
            row.tol = r.tolerance;
            match r.status {
                Status::Pass => row.pass += 1,
                Status::Fail => row.fail += 1,
                Status::Skipped => row.skip += 1,
                Status::Error => row.err += 1,
            }
            if let Some(v) = r.value {
                row.max = row.max.max(v);
            }
        }
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<52} {:<22} {:>5} {:>5} {:>5} {:>5} {:>5} {:>11} {:>9}",
            "subject", "check", "n", "pass", "fail", "skip", "err", "max", "tol"
        );
        for ((subject, check), r) in &rows {
            let _ = writeln!(
                out,
                "{:<52} {:<22} {:>5} {:>5} {:>5} {:>5} {:>5} {:>11.3e} {:>9.1e}",
                truncate(subject, 52),
                truncate(check, 22),
                r.n,
                r.pass,
                r.fail,
                r.skip,
                r.err,
                r.max,
                r.tol
            );
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "total {}  pass {}  fail {}  skipped {}  errors {}  max residual {:.3e}",
            s.total, s.passed, s.failed, s.skipped, s.errors, s.max_residual
        );
        out
    }
}

fn truncate(s: &str, n: usize) -> String {
    if s.chars().count() <= n {
        s.to_string()
    } else {
        let mut t: String = s.chars().take(n - 1).collect();
        t.push('~');
        t
    }
}

struct Terms {
    pdot: f64,
    d: crate::zoo::HDerivs,
}

fn terms(spec: &HamiltonianSpec, params: &SystemParams, pot: &Potential, pt: PhasePoint) -> Result<Terms> {
    Ok(Terms {
        pdot: -pot.force_gradient(pt.x)?,
        d: eval_derivs(spec, params, pot, pt)?,
    })
}

fn pde_parts(t: &Terms, m: f64, p: f64) -> (f64, f64, f64) {
    (t.d.hx / m, t.pdot * t.d.hpp, p / m * t.d.hpx)
}

fn pde_scale(t: &Terms, m: f64, p: f64) -> f64 {
    let (a, b, c) = pde_parts(t, m, p);
    1f64.max(a.abs()).max(b.abs()).max(c.abs())
}

fn nh2_raw(spec: &HamiltonianSpec, params: &SystemParams, pot: &Potential, pt: PhasePoint) -> Result<(f64, f64)> {
    let t = terms(spec, params, pot, pt)?;
    let a = t.pdot * t.d.hp;
    let b = pt.p / params.m * t.d.hx;
    Ok((a + b, 1f64.max(a.abs()).max(b.abs())))
}

/// `(1/m) H_x + ṗ H_pp + (p/m) H_px` with `ṗ = -V'(x)`, divided by the
/// largest of 1 and the three term magnitudes.
pub fn pde_residual(spec: &HamiltonianSpec, params: &SystemParams, pot: &Potential, pt: PhasePoint) -> Result<f64> {
    let t = terms(spec, params, pot, pt)?;
    let (a, b, c) = pde_parts(&t, params.m, pt.p);
    Ok((a + b + c).abs() / pde_scale(&t, params.m, pt.p))
}

/// `ṗ H_p + (p/m) H_x`, normalized by its largest term (floor 1).
pub fn nh2_residual(spec: &HamiltonianSpec, params: &SystemParams, pot: &Potential, pt: PhasePoint) -> Result<f64> {
    let (raw, scale) = nh2_raw(spec, params, pot, pt)?;
    Ok(raw.abs() / scale)
}

/// Difference between the central-difference `∂/∂p` of the raw NH2
/// expression and the raw PDE expression, normalized like [`pde_residual`].
pub fn nh3_from_nh2_check(
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    pt: PhasePoint,
) -> Result<f64> {
    let h = NH3_STEP;
    let (up, _) = nh2_raw(spec, params, pot, PhasePoint::new(pt.x, pt.p + h))?;
    let (down, _) = nh2_raw(spec, params, pot, PhasePoint::new(pt.x, pt.p - h))?;
    let fd = (up - down) / (2.0 * h);
    let t = terms(spec, params, pot, pt)?;
    let (a, b, c) = pde_parts(&t, params.m, pt.p);
    Ok((fd - (a + b + c)).abs() / pde_scale(&t, params.m, pt.p))
}

/// For the σ family, true when `|1 + aF| < SIGMA_DEGENERACY` with
/// `a = -1/(mσ²)` and `F` the underlying Cabbatonian value.
pub fn sigma_degenerate(spec: &HamiltonianSpec, params: &SystemParams, pot: &Potential, pt: PhasePoint) -> Result<bool> {
    if spec.family() != Family::Sigma {
        return Ok(false);
    }
    let inner = if spec.level() == 0 {
        HamiltonianSpec::standard()
    } else {
        HamiltonianSpec::cabbatonian(spec.lambdas(), spec.sign())?
    };
    let e = standard_energy(params, pot, pt)?;
    let f = inner.energy_jet(params, e)?.value;
    let sigma = spec.sigma_value().unwrap_or(f64::INFINITY);
    let a = -1.0 / (params.m * sigma * sigma);
    Ok((1.0 + a * f).abs() < SIGMA_DEGENERACY)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 4 {
        return Err(ZooError::Config(format!("lambda grid needs >= 4 values, got {}", grid.len())));
    }
    if grid.iter().any(|v| v.is_nan()) || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] <= 0.0 {
        return Err(ZooError::Config("lambda grid must be positive and increasing".into()));
    }
    Ok(())
}

/// Expected decay rate of every limit ladder error in `λ`.
pub const LADDER_SLOPE: f64 = -2.0;

fn slope_record(key: String, check: &str, subject: &str, grid: &[f64], errors: &[f64], tol: f64) -> CheckRecord {
    let sequence: Vec<[f64; 2]> = grid.iter().zip(errors).map(|(l, e)| [*l, *e]).collect();
    if errors.iter().all(|e| *e == 0.0) {
        let mut r = CheckRecord::measured(key, check, subject, 0.0, tol);
        r.sequence = sequence;
        r.message = Some("limit reproduced exactly".into());
        return r;
    }
    let mut r = match loglog_slope(grid, errors) {
        Some(s) => {
            let mut r = CheckRecord::measured(key, check, subject, (s - LADDER_SLOPE).abs(), tol);
            r.message = Some(format!("slope = {s}"));
            r
        }
        None => CheckRecord::failed(
            key,
            check,
            subject,
            tol,
            &ZooError::Config("not enough non-zero errors to fit a slope".into()),
        ),
    };
    r.sequence = sequence;
    r
}

/// Walks the ordered limit `λ_j → ∞, …, λ_1 → ∞` one level at a time: for
/// level `ℓ` the inner lambdas `λ_1..λ_{ℓ-1}` of `spec` are held fixed,
/// `λ_ℓ` runs over `grid`, and the error `|H_ℓ - sΩ_ℓ - H_{ℓ-1}|` is fitted
/// against `λ_ℓ` in log-log. Each level's record passes when the slope is
/// within `tol` of -2.
pub fn limit_ladder(
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    pt: PhasePoint,
    grid: &[f64],
    tol: f64,
) -> Result<Report> {
    check_grid(grid)?;
    if spec.family() != Family::Cabbatonian || spec.level() == 0 {
        return Err(ZooError::InvalidSpec("limit ladder needs a Cabbatonian with j >= 1".into()));
    }
    let e0 = standard_energy(params, pot, pt)?;
    let s = spec.sign().value();
    let subject = spec.describe();
    let mut records = Vec::new();
    for level in (1..=spec.level()).rev() {
        let inner_lambdas = &spec.lambdas()[..level - 1];
        let key = format!("ladder:{level}");
        let check = format!("limit H{level}->H{}", level - 1);
        let inner = if inner_lambdas.is_empty() {
            Ok(e0)
        } else {
            spec.with_lambdas(inner_lambdas)
                .and_then(|sp| sp.energy_jet(params, e0))
                .map(|j| j.value)
        };
        let errors: Result<Vec<f64>> = inner.and_then(|target| {
            grid.iter()
                .map(|&lambda| {
                    let mut lambdas = inner_lambdas.to_vec();
                    lambdas.push(lambda);
                    let outer = spec.with_lambdas(&lambdas)?.energy_jet(params, e0)?.value;
                    Ok((outer - s * params.m * lambda * lambda - target).abs())
                })
                .collect()
        });
        records.push(match errors {
            Ok(errs) => slope_record(key, &check, &subject, grid, &errs, tol),
            Err(e) => CheckRecord::failed(key, &check, &subject, tol, &e),
        });
    }
    Ok(Report::new("limit_ladder", &subject, 0, records))
}

/// Lagrangian counterpart of [`limit_ladder`]: `|L_ℓ - Ω_ℓ - L_{ℓ-1}|`
/// against `λ_ℓ` for each level of `lagr` with the inner lambdas fixed.
pub fn lagrangian_limit_ladder(lagr: &LagrangianSpec, pt: VelocityPoint, grid: &[f64], tol: f64) -> Result<Report> {
    check_grid(grid)?;
    if lagr.level() == 0 {
        return Err(ZooError::InvalidSpec("Lagrangian ladder needs j >= 1".into()));
    }
    let subject = format!("lagrangian(j={}, lambdas={:?})", lagr.level(), lagr.lambdas());
    let mut records = Vec::new();
    for level in (1..=lagr.level()).rev() {
        let inner = lagr.truncated(level - 1);
        let key = format!("lagrangian_ladder:{level}");
        let check = format!("limit L{level}->L{}", level - 1);
        records.push(match inner.limit_errors(pt, grid) {
            Ok(errs) => slope_record(key, &check, &subject, grid, &errs, tol),
            Err(e) => CheckRecord::failed(key, &check, &subject, tol, &e),
        });
    }
    Ok(Report::new("lagrangian_limit_ladder", &subject, 0, records))
}

/// One row of a λ sweep over the outermost parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub h: f64,
    /// `|H_j - sΩ_j - H_{j-1}|`.
    pub limit_error: f64,
    pub chain_factor: f64,
}

/// Replaces the outermost λ of a Cabbatonian with each grid value in turn.
pub fn lambda_sweep(
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    pt: PhasePoint,
    grid: &[f64],
    exec: Exec,
) -> Result<Vec<SweepRow>> {
    if spec.family() != Family::Cabbatonian || spec.level() == 0 {
        return Err(ZooError::InvalidSpec("sweep needs a Cabbatonian with j >= 1".into()));
    }
    let e0 = standard_energy(params, pot, pt)?;
    let inner_lambdas = &spec.lambdas()[..spec.level() - 1];
    let target = if inner_lambdas.is_empty() {
        e0
    } else {
        spec.with_lambdas(inner_lambdas)?.energy_jet(params, e0)?.value
    };
    let s = spec.sign().value();
    exec.map(grid, |&lambda| {
        let mut lambdas = inner_lambdas.to_vec();
        lambdas.push(lambda);
        let jet = spec.with_lambdas(&lambdas)?.energy_jet(params, e0)?;
        Ok(SweepRow {
            lambda,
            h: jet.value,
            limit_error: (jet.value - s * params.m * lambda * lambda - target).abs(),
            chain_factor: jet.d1,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub pde: f64,
    pub nh2: f64,
    pub nh3: f64,
    pub slope: f64,
    pub conservation: f64,
    pub flow_deviation: f64,
    pub period_ratio: f64,
    pub legendre: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            pde: 1e-8,
            nh2: 1e-8,
            nh3: 1e-6,
            slope: 0.05,
            conservation: 1e-8,
            flow_deviation: 1e-5,
            period_ratio: 1e-4,
            legendre: 1e-8,
        }
    }
}

/// Configuration for [`run_suite`], read from JSON by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: String,
    pub m: f64,
    pub specs: Vec<SpecJson>,
    pub integrator: Integrator,
    pub output_dir: Option<String>,
    pub seed: u64,
    /// Random phase points per spec, drawn from `|x| <= box[0]`, `|p| <= box[1]`.
    pub points: usize,
    #[serde(rename = "box")]
    pub sample_box: [f64; 2],
    pub lambda_grid: Vec<f64>,
    /// Fixed point for limit ladders.
    pub ladder_point: [f64; 2],
    /// Start of the dynamics checks.
    pub start: [f64; 2],
    /// Duration of the dynamics checks in standard time; each flow runs for
    /// `t_end / c` so every member covers the same number of orbits.
    pub t_end: f64,
    /// Side of the square `(x, v)` grid for the Legendre check.
    pub legendre_grid: usize,
    pub legendre_box: [f64; 2],
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        let spec = |family: Family, lambdas: Vec<f64>| SpecJson {
            family,
            j: None,
            lambdas,
            sigma: None,
            sign: -1,
            m: None,
            order: None,
            exponent: None,
        };
        let mut specs = vec![
            spec(Family::Standard, vec![]),
            spec(Family::Cabbatonian, vec![2.0]),
            spec(Family::Cabbatonian, vec![2.0, 3.0]),
            spec(Family::Cabbatonian, vec![2.0, 3.0, 4.0]),
            SpecJson {
                sigma: Some(3.0),
                ..spec(Family::Sigma, vec![])
            },
            SpecJson {
                sigma: Some(5.0),
                ..spec(Family::Sigma, vec![2.0])
            },
            SpecJson {
                order: Some(8),
                ..spec(Family::TruncatedSeries, vec![2.0])
            },
        ];
        for k in 1..=4 {
            specs.push(SpecJson {
                exponent: Some(k),
                ..spec(Family::PowerBase, vec![])
            });
        }
        RunConfig {
            potential: "0.5*x^2".to_string(),
            m: 1.0,
            specs,
            integrator: Integrator::rk45(1e-10),
            output_dir: None,
            seed: 42,
            points: 100,
            sample_box: [2.0, 2.0],
            lambda_grid: vec![10.0, 20.0, 40.0, 80.0],
            ladder_point: [1.0, 1.0],
            start: [1.0, 0.0],
            t_end: 20.0 * PI,
            legendre_grid: 10,
            legendre_box: [1.5, 1.5],
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ZooError::Config(e.to_string()))
    }

    /// Parses the potential and every spec; any failure is a config error.
    pub fn resolve(&self) -> Result<(Potential, Vec<(HamiltonianSpec, SystemParams)>)> {
        let cfg = |e: ZooError| ZooError::Config(e.to_string());
        let pot = Potential::parse(&self.potential).map_err(cfg)?;
        let base = SystemParams::new(self.m).map_err(cfg)?;
        let specs = self
            .specs
            .iter()
            .map(|doc| {
                let params = doc.params().map_err(cfg)?.unwrap_or(base);
                let spec = HamiltonianSpec::try_from(doc.clone()).map_err(cfg)?;
                Ok((spec, params))
            })
            .collect::<Result<Vec<_>>>()?;
        if self.lambda_grid.len() < 4 || self.lambda_grid.iter().any(|v| v.is_nan()) || self.lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ZooError::Config("lambda_grid needs >= 4 increasing values".into()));
        }
        if self.t_end.is_nan() || self.t_end <= 0.0 {
            return Err(ZooError::Config("t_end must be positive".into()));
        }
        Ok((pot, specs))
    }

    /// Seeded uniform points in the sampling box.
    pub fn random_points(&self) -> Vec<PhasePoint> {
        random_points(self.seed, self.points, self.sample_box)
    }
}

pub fn random_points(seed: u64, n: usize, half_widths: [f64; 2]) -> Vec<PhasePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            PhasePoint::new(
                rng.gen_range(-half_widths[0]..=half_widths[0]),
                rng.gen_range(-half_widths[1]..=half_widths[1]),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Pde(usize),
    Nh2(usize),
    Nh3(usize),
    Ladder,
    Conservation,
    Flow,
    Legendre(usize),
}

/// Runs every check in `config` and merges the records by key. Check
/// failures (including guard violations) become records; only an invalid
/// config is an `Err`.
pub fn run_suite(config: &RunConfig, exec: Exec) -> Result<Report> {
    let (pot, specs) = config.resolve()?;
    let points = config.random_points();
    let tol = config.tolerances;
    let n_grid = config.legendre_grid;

    let mut jobs: Vec<(usize, Job)> = Vec::new();
    for (i, (spec, _)) in specs.iter().enumerate() {
        for k in 0..points.len() {
            jobs.extend([(i, Job::Pde(k)), (i, Job::Nh2(k)), (i, Job::Nh3(k))]);
        }
        if spec.family() == Family::Cabbatonian && spec.level() > 0 {
            jobs.push((i, Job::Ladder));
            if spec.sign() == Sign::Minus {
                jobs.extend((0..n_grid * n_grid).map(|g| (i, Job::Legendre(g))));
            }
        }
        jobs.extend([(i, Job::Conservation), (i, Job::Flow)]);
    }

    let start = PhasePoint::new(config.start[0], config.start[1]);
    let grid_axis = |g: usize, half: f64| {
        if n_grid <= 1 {
            0.0
        } else {
            -half + 2.0 * half * g as f64 / (n_grid - 1) as f64
        }
    };

    let records: Vec<Vec<CheckRecord>> = exec.map(&jobs, |&(i, job)| {
        let (spec, params) = &specs[i];
        let subject = spec.describe();
        let key = |name: &str, idx: usize| format!("{i:02}:{name}:{idx:04}");
        match job {
            Job::Pde(k) | Job::Nh2(k) | Job::Nh3(k) => {
                let pt = points[k];
                let (name, tolerance) = match job {
                    Job::Pde(_) => ("pde", tol.pde),
                    Job::Nh2(_) => ("nh2", tol.nh2),
                    _ => ("nh3_from_nh2", tol.nh3),
                };
                match sigma_degenerate(spec, params, &pot, pt) {
                    Ok(true) => {
                        return vec![CheckRecord::skipped(key(name, k), name, &subject, tolerance, "1 + aF ~ 0")
                            .at(pt.x, pt.p)]
                    }
                    Err(e) => return vec![CheckRecord::failed(key(name, k), name, &subject, tolerance, &e).at(pt.x, pt.p)],
                    Ok(false) => {}
                }
                let value = match job {
                    Job::Pde(_) => pde_residual(spec, params, &pot, pt),
                    Job::Nh2(_) => nh2_residual(spec, params, &pot, pt),
                    _ => nh3_from_nh2_check(spec, params, &pot, pt),
                };
                vec![CheckRecord::from_result(key(name, k), name, &subject, tolerance, value).at(pt.x, pt.p)]
            }
            Job::Ladder => {
                let pt = PhasePoint::new(config.ladder_point[0], config.ladder_point[1]);
                match limit_ladder(spec, params, &pot, pt, &config.lambda_grid, tol.slope) {
                    Ok(rep) => rep
                        .records
                        .into_iter()
                        .map(|mut r| {
                            r.key = format!("{i:02}:{}", r.key);
                            r.check = format!("{} slope", r.check);
                            r
                        })
                        .collect(),
                    Err(e) => vec![CheckRecord::failed(key("ladder", 0), "limit slope", &subject, tol.slope, &e)],
                }
            }
            Job::Conservation => vec![conservation_record(
                key("conservation", 0),
                &subject,
                spec,
                params,
                &pot,
                start,
                config,
            )],
            Job::Flow => flow_records(i, &subject, spec, params, &pot, start, config),
            Job::Legendre(g) => {
                let (gx, gv) = (g / n_grid, g % n_grid);
                let pt = VelocityPoint::new(
                    grid_axis(gx, config.legendre_box[0]),
                    grid_axis(gv, config.legendre_box[1]),
                );
                let value = LagrangianSpec::new(spec.lambdas(), *params, pot.clone())
                    .and_then(|l| l.legendre_relative_residual(pt));
                vec![CheckRecord::from_result(key("legendre", g), "legendre", &subject, tol.legendre, value)
                    .at(pt.x, pt.v)]
            }
        }
    });

    let description = format!(
        "potential {}, m = {}, {} specs",
        config.potential,
        config.m,
        specs.len()
    );
    Ok(Report::new(
        "run_suite",
        &description,
        config.seed,
        records.into_iter().flatten().collect(),
    ))
}

fn flow_duration(spec: &HamiltonianSpec, params: &SystemParams, pot: &Potential, start: PhasePoint, t_end: f64) -> Result<Option<f64>> {
    let e = standard_energy(params, pot, start)?;
    let c = chain_factor(spec, params, e)?;
    Ok((c != 0.0 && c.is_finite()).then(|| t_end / c.abs()))
}

fn conservation_record(
    key: String,
    subject: &str,
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    start: PhasePoint,
    config: &RunConfig,
) -> CheckRecord {
    let tol = config.tolerances.conservation;
    let run = || -> Result<Option<f64>> {
        let Some(duration) = flow_duration(spec, params, pot, start, config.t_end)? else {
            return Ok(None);
        };
        let traj = integrate(spec, params, pot, start, duration, config.integrator)?;
        Ok(Some(traj.max_relative_drift().max(traj.max_standard_energy_drift(pot)?)))
    };
    match run() {
        Ok(Some(v)) => CheckRecord::measured(key, "conservation", subject, v, tol),
        Ok(None) => CheckRecord::skipped(key, "conservation", subject, tol, "stationary flow"),
        Err(e) => CheckRecord::failed(key, "conservation", subject, tol, &e),
    }
    .at(start.x, start.p)
}

fn flow_records(
    i: usize,
    subject: &str,
    spec: &HamiltonianSpec,
    params: &SystemParams,
    pot: &Potential,
    start: PhasePoint,
    config: &RunConfig,
) -> Vec<CheckRecord> {
    let tol = config.tolerances;
    let dev_key = format!("{i:02}:flow:0000");
    let per_key = format!("{i:02}:flow:0001");
    let standard = HamiltonianSpec::standard();
    let run = || -> Result<Option<crate::dynamics::RescaleReport>> {
        let Some(duration) = flow_duration(spec, params, pot, start, config.t_end)? else {
            return Ok(None);
        };
        compare_flows(&standard, spec, params, pot, start, duration, config.integrator).map(Some)
    };
    match run() {
        Ok(Some(rep)) => {
            let mut out = vec![CheckRecord::measured(dev_key, "flow deviation", subject, rep.max_deviation, tol.flow_deviation)
                .at(start.x, start.p)];
            let mut period = match rep.measured_period_ratio {
                Some(measured) => CheckRecord::measured(
                    per_key,
                    "period ratio",
                    subject,
                    (measured - rep.predicted_period_ratio).abs(),
                    tol.period_ratio,
                ),
                None => CheckRecord::skipped(per_key, "period ratio", subject, tol.period_ratio, "orbit not closed"),
            };
            period.message.get_or_insert_with(|| {
                format!(
                    "predicted {} measured {:?}",
                    rep.predicted_period_ratio, rep.measured_period_ratio
                )
            });
            out.push(period.at(start.x, start.p));
            out
        }
        Ok(None) => vec![CheckRecord::skipped(dev_key, "flow deviation", subject, tol.flow_deviation, "stationary flow")],
        Err(e) => vec![CheckRecord::failed(dev_key, "flow deviation", subject, tol.flow_deviation, &e)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_potential;

    fn sho() -> Potential {
        parse_potential("0.5*x^2").unwrap()
    }

    #[test]
    fn standard_residuals_vanish() {
        let p = SystemParams::default();
        for pt in [PhasePoint::new(0.3, -1.2), PhasePoint::new(-1.9, 0.0), PhasePoint::new(1.0, 1.0)] {
            assert!(pde_residual(&HamiltonianSpec::standard(), &p, &sho(), pt).unwrap() < 1e-15);
            assert!(nh2_residual(&HamiltonianSpec::standard(), &p, &sho(), pt).unwrap() < 1e-15);
            assert!(nh3_from_nh2_check(&HamiltonianSpec::standard(), &p, &sho(), pt).unwrap() < 1e-10);
        }
    }

    #[test]
    fn nested_residuals() {
        let p = SystemParams::default();
        let quartic = parse_potential("0.25*x^4").unwrap();
        let two = HamiltonianSpec::cabbatonian(&[2.0, 3.0], Sign::Minus).unwrap();
        assert!(pde_residual(&two, &p, &quartic, PhasePoint::new(0.7, -1.1)).unwrap() < 1e-10);
        let sig = HamiltonianSpec::sigma(&[2.0], 5.0, Sign::Minus).unwrap();
        assert!(pde_residual(&sig, &p, &sho(), PhasePoint::new(0.4, 0.9)).unwrap() < 1e-10);
        let three = HamiltonianSpec::cabbatonian(&[2.0, 3.0, 4.0], Sign::Minus).unwrap();
        assert!(nh2_residual(&three, &p, &quartic, PhasePoint::new(-1.3, 0.6)).unwrap() < 1e-10);
        assert_eq!(nh2_residual(&three, &p, &quartic, PhasePoint::new(-1.3, 0.0)).unwrap(), 0.0);
        let one = HamiltonianSpec::cabbatonian(&[2.0], Sign::Minus).unwrap();
        assert!(nh3_from_nh2_check(&one, &p, &sho(), PhasePoint::new(0.5, 0.5)).unwrap() < 1e-6);
        let cube = HamiltonianSpec::power_base(3);
        assert!(nh3_from_nh2_check(&cube, &p, &sho(), PhasePoint::new(0.5, 0.5)).unwrap() < 1e-6);
    }

    #[test]
    fn ladder_slopes_and_exact_case() {
        let p = SystemParams::default();
        let grid = [10.0, 20.0, 40.0, 80.0];
        let one = HamiltonianSpec::cabbatonian(&[2.0], Sign::Minus).unwrap();
        let rep = limit_ladder(&one, &p, &sho(), PhasePoint::new(1.0, 1.0), &grid, 0.05).unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
        assert_eq!(rep.summary.slopes.len(), 1);

        let zero = limit_ladder(&one, &p, &sho(), PhasePoint::new(0.0, 0.0), &grid, 0.05).unwrap();
        assert!(zero.all_passed());
        assert_eq!(zero.records[0].value, Some(0.0));

        assert!(limit_ladder(&one, &p, &sho(), PhasePoint::new(1.0, 1.0), &grid[..3], 0.05).is_err());
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-2.0)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn sweep_rows() {
        let spec = HamiltonianSpec::cabbatonian(&[2.0, 3.0], Sign::Minus).unwrap();
        let rows = lambda_sweep(
            &spec,
            &SystemParams::default(),
            &sho(),
            PhasePoint::new(1.0, 1.0),
            &[10.0, 20.0],
            Exec::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].limit_error < rows[0].limit_error);
    }

    #[test]
    fn empty_suite_succeeds() {
        let cfg = RunConfig {
            specs: vec![],
            ..RunConfig::default()
        };
        let rep = run_suite(&cfg, Exec::default()).unwrap();
        assert_eq!(rep.summary.total, 0);
        assert!(rep.all_passed());
    }

    #[test]
    fn overflow_is_recorded_not_raised() {
        let cfg = RunConfig::from_json(
            r#"{"specs": [{"family": "cabbatonian", "lambdas": [0.1], "sign": 1}], "points": 5, "t_end": 1.0}"#,
        )
        .unwrap();
        let rep = run_suite(&cfg, Exec::default()).unwrap();
        assert!(!rep.all_passed());
        assert!(rep.has_overflow());
    }

    #[test]
    fn config_errors() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let bad_pot = RunConfig {
            potential: "y^2".into(),
            ..RunConfig::default()
        };
        assert!(matches!(run_suite(&bad_pot, Exec::default()), Err(ZooError::Config(_))));
    }
}
