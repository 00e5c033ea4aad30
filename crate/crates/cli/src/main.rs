mod svg;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hamzoo::dynamics::{compare_flows, integrate, Integrator, Method, Trajectory};
use hamzoo::exec::Exec;
use hamzoo::legendre::{LagrangianSpec, VelocityPoint};
use hamzoo::verify::{lambda_sweep, loglog_slope, random_points, run_suite, RunConfig};
use hamzoo::zoo::{parse_spec_json, pascal_row, sierpinski_mask, standard_energy, PASCAL_MAX_ROW};
use hamzoo::{chain_factor, eval_derivs, HamiltonianSpec, PhasePoint, Potential, SystemParams, ZooError};

#[derive(Parser)]
#[command(name = "hamzoo", version, about = "Newton-equivalent Hamiltonians: evaluate, integrate, verify")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value, partials and chain factor of a spec at one phase point.
    Eval(EvalArgs),
    /// Integrate a flow, writing `t,x,p,H` CSV and optionally an SVG portrait.
    Integrate(IntegrateArgs),
    /// Run the check suite and write a JSON report.
    Verify(VerifyArgs),
    /// Lagrangian, momentum and Legendre residual on an (x, v) grid.
    Legendre(LegendreArgs),
    /// Pascal rows or the parity mask as a PGM image.
    Pascal(PascalArgs),
    /// Vary the outermost lambda of a Cabbatonian.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SystemArgs {
    /// Spec as inline JSON or a path to a JSON file.
    #[arg(long, default_value = r#"{"family":"standard"}"#)]
    spec: String,
    /// Potential V(x).
    #[arg(long, default_value = "0.5*x^2", allow_hyphen_values = true)]
    potential: String,
    /// Mass; overrides any mass given in the spec.
    #[arg(long)]
    m: Option<f64>,
    /// Seed for any random choices.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    p: f64,
}

#[derive(Args)]
struct IntegrateArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long, allow_hyphen_values = true)]
    x0: f64,
    #[arg(long, allow_hyphen_values = true)]
    p0: f64,
    #[arg(long)]
    t_end: f64,
    /// rk4, rk45 or implicit_midpoint.
    #[arg(long, default_value = "rk45")]
    method: String,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Second spec overlaid on the first; its flow is compared after time rescaling.
    #[arg(long)]
    compare: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON run configuration; the built-in default when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path. Defaults to `<output_dir>/report.json`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print a summary table to stderr.
    #[arg(long)]
    table: bool,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct LegendreArgs {
    /// Comma-separated lambdas; empty for the standard Lagrangian.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambdas: Vec<f64>,
    #[arg(long, default_value = "0.5*x^2", allow_hyphen_values = true)]
    potential: String,
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// Points per axis of the (x, v) grid.
    #[arg(long, default_value_t = 10)]
    grid: usize,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-1.5, 1.5], allow_hyphen_values = true)]
    x_range: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [-1.5, 1.5], allow_hyphen_values = true)]
    v_range: Vec<f64>,
    /// Use this many seeded random points instead of the grid.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct PascalArgs {
    #[arg(long)]
    rows: usize,
    /// Write the parity mask as a PGM image instead of printing rows.
    #[arg(long)]
    mask: bool,
    /// Image path for --mask.
    #[arg(long, default_value = "pascal_mask.pgm")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    sys: SystemArgs,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    x: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    p: f64,
    /// Values of the outermost lambda.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 40.0, 80.0])]
    lambdas: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<ZooError> for Failure {
    fn from(e: ZooError) -> Self {
        let code = match &e {
            ZooError::Parse { .. } | ZooError::UnknownSymbol { .. } | ZooError::InvalidSpec(_) | ZooError::Config(_) => 2,
            e if e.is_overflow_risk() => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: format!("i/o error: {e}"),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Integrate(a) => cmd_integrate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Legendre(a) => cmd_legendre(a),
        Command::Pascal(a) => cmd_pascal(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("hamzoo: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn read_spec(text: &str) -> Result<(HamiltonianSpec, Option<SystemParams>), Failure> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return Ok(parse_spec_json(trimmed)?);
    }
    let body = fs::read_to_string(text).map_err(|e| usage(format!("cannot read spec `{text}`: {e}")))?;
    Ok(parse_spec_json(&body)?)
}

struct System {
    spec: HamiltonianSpec,
    params: SystemParams,
    pot: Potential,
}

impl SystemArgs {
    fn resolve(&self) -> Result<System, Failure> {
        let (spec, spec_params) = read_spec(&self.spec)?;
        let params = match self.m {
            Some(m) => SystemParams::new(m).map_err(|e| usage(e.to_string()))?,
            None => spec_params.unwrap_or_default(),
        };
        let pot = Potential::parse(&self.potential)?;
        Ok(System { spec, params, pot })
    }
}

/// Opens `path` for writing, or stdout when `None`.
fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(fs::File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let sys = a.sys.resolve()?;
    let pt = PhasePoint::new(a.x, a.p);
    let d = eval_derivs(&sys.spec, &sys.params, &sys.pot, pt)?;
    let e = standard_energy(&sys.params, &sys.pot, pt)?;
    let c = chain_factor(&sys.spec, &sys.params, e)?;
    let mut out = String::new();
    let _ = writeln!(out, "spec          {}", sys.spec.describe());
    for (name, v) in [
        ("H", d.h),
        ("hx", d.hx),
        ("hp", d.hp),
        ("hpp", d.hpp),
        ("hpx", d.hpx),
        ("chain_factor", c),
    ] {
        let _ = writeln!(out, "{name:<13} {v}");
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn build_integrator(method: &str, step: f64, tol: f64) -> Result<Integrator, Failure> {
    let method: Method = method.parse()?;
    Ok(Integrator { method, step, tol })
}

fn phase_points(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.samples.iter().map(|s| (s.x, s.p)).collect()
}

fn cmd_integrate(a: IntegrateArgs) -> CliResult {
    let sys = a.sys.resolve()?;
    let integrator = build_integrator(&a.method, a.step, a.tol)?;
    let start = PhasePoint::new(a.x0, a.p0);
    let traj = integrate(&sys.spec, &sys.params, &sys.pot, start, a.t_end, integrator)?;
    {
        let mut w = sink(a.out.as_deref())?;
        traj.write_csv(&mut w)?;
        w.flush()?;
    }
    let other = match &a.compare {
        Some(text) => {
            let (spec_b, _) = read_spec(text)?;
            let report = compare_flows(&sys.spec, &spec_b, &sys.params, &sys.pot, start, a.t_end, integrator)?;
            eprintln!(
                "compare: speed factor {} predicted period ratio {} measured {} max deviation {:e}",
                report.factor,
                report.predicted_period_ratio,
                report
                    .measured_period_ratio
                    .map_or_else(|| "n/a".to_string(), |v| v.to_string()),
                report.max_deviation
            );
            Some((spec_b.clone(), integrate(&spec_b, &sys.params, &sys.pot, start, a.t_end, integrator)?))
        }
        None => None,
    };
    if let Some(path) = &a.svg {
        let main_pts = phase_points(&traj);
        let main_label = sys.spec.describe();
        let other_pts = other.as_ref().map(|(_, t)| phase_points(t));
        let other_label = other.as_ref().map(|(s, _)| s.describe());
        let mut curves = vec![svg::Curve {
            label: &main_label,
            points: &main_pts,
        }];
        if let (Some(pts), Some(label)) = (&other_pts, &other_label) {
            curves.push(svg::Curve { label, points: pts });
        }
        let title = format!("phase portrait, V(x) = {}", sys.pot.source());
        let mut w = sink(Some(path))?;
        w.write_all(svg::phase_portrait(&title, &curves).as_bytes())?;
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let mut config = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config `{}`: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let target = match (&a.out, &config.output_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => {
            fs::create_dir_all(dir).map_err(|e| usage(format!("output directory `{dir}` is not writable: {e}")))?;
            Some(Path::new(dir).join("report.json"))
        }
        (None, None) => None,
    };
    let report = run_suite(&config, exec(a.sequential))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| usage(e.to_string()))?;
    {
        let mut w = sink(target.as_deref())?;
        writeln!(w, "{json}")?;
        w.flush()?;
    }
    if a.table {
        eprint!("{}", report.summary_table());
    }
    let s = &report.summary;
    eprintln!(
        "verify: {} checks, {} passed, {} failed, {} errors, {} skipped",
        s.total, s.passed, s.failed, s.errors, s.skipped
    );
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn axis(range: &[f64], n: usize, i: usize) -> f64 {
    if n <= 1 {
        0.5 * (range[0] + range[1])
    } else {
        range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64
    }
}

fn cmd_legendre(a: LegendreArgs) -> CliResult {
    let pot = Potential::parse(&a.potential)?;
    let params = SystemParams::new(a.m).map_err(|e| usage(e.to_string()))?;
    let lagr = LagrangianSpec::new(&a.lambdas, params, pot)?;
    let points: Vec<VelocityPoint> = match a.random {
        Some(n) => {
            let half = [
                0.5 * (a.x_range[1] - a.x_range[0]),
                0.5 * (a.v_range[1] - a.v_range[0]),
            ];
            let centre = [
                0.5 * (a.x_range[1] + a.x_range[0]),
                0.5 * (a.v_range[1] + a.v_range[0]),
            ];
            random_points(a.seed, n, half)
                .into_iter()
                .map(|p| VelocityPoint::new(centre[0] + p.x, centre[1] + p.p))
                .collect()
        }
        None => (0..a.grid * a.grid)
            .map(|g| {
                VelocityPoint::new(
                    axis(&a.x_range, a.grid, g / a.grid),
                    axis(&a.v_range, a.grid, g % a.grid),
                )
            })
            .collect(),
    };
    let rows = exec(a.sequential).map(&points, |&pt| -> hamzoo::Result<(f64, f64, f64)> {
        Ok((lagr.lagrangian(pt)?, lagr.momentum(pt)?, lagr.legendre_residual(pt)?))
    });
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "x,v,Lj,pj,legendre_residual")?;
    for (pt, row) in points.iter().zip(rows) {
        let (l, p, r) = row?;
        writeln!(w, "{:.16e},{:.16e},{l:.16e},{p:.16e},{r:.16e}", pt.x, pt.v)?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn write_pgm(path: &Path, rows: usize) -> io::Result<()> {
    let mask = sierpinski_mask(rows);
    let mut w = sink(Some(path))?;
    write!(w, "P5\n{rows} {rows}\n1\n")?;
    let mut line = vec![1u8; rows];
    for n in 0..rows {
        line.fill(1);
        for (k, px) in line.iter_mut().enumerate().take(n + 1) {
            // odd entries are black, everything else white
            if mask.get(n, k) {
                *px = 0;
            }
        }
        w.write_all(&line)?;
    }
    w.flush()
}

fn cmd_pascal(a: PascalArgs) -> CliResult {
    if a.mask {
        write_pgm(&a.out, a.rows)?;
        return Ok(ExitCode::SUCCESS);
    }
    if a.rows > PASCAL_MAX_ROW {
        return Err(usage(format!(
            "--rows {} exceeds {PASCAL_MAX_ROW}: entries would leave the exact integer range; use --mask for parity",
            a.rows
        )));
    }
    let mut out = String::new();
    for k in 0..a.rows {
        let row = pascal_row(k)?;
        let text: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "{}", text.join(" "));
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let sys = a.sys.resolve()?;
    let pt = PhasePoint::new(a.x, a.p);
    let rows = lambda_sweep(&sys.spec, &sys.params, &sys.pot, pt, &a.lambdas, exec(a.sequential))?;
    let mut w = sink(a.out.as_deref())?;
    writeln!(w, "lambda,h,limit_error,chain_factor")?;
    for r in &rows {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", r.lambda, r.h, r.limit_error, r.chain_factor)?;
    }
    w.flush()?;
    let errors: Vec<f64> = rows.iter().map(|r| r.limit_error).collect();
    if let Some(slope) = loglog_slope(&a.lambdas, &errors) {
        eprintln!("sweep: log-log slope of limit error {slope:.4}");
    }
    Ok(ExitCode::SUCCESS)
}
