//! Command-line front end: field generation and IO, class-constant audits,
//! reverse Holder searches, factorizations, and weighted norm scans, all
//! emitting machine-readable reports.
//!
//! Exit codes: 0 on success (all checks passed), 1 on IO or parameter
//! errors, 2 when a checked inequality failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use parweight::factor;
use parweight::gen;
use parweight::pwf;
use parweight::weights::{
    self, ESetConfig, LambdaGrid,
};
use parweight::{FamilySpec, Grid, Lag, RectangleFamily, ScalarField};

#[derive(Parser)]
#[command(name = "parweight", version, about = "parabolic Muckenhoupt weight toolkit")]
struct Cli {
    /// Cap the worker thread pool (results are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a field and write it in PWF v1 format.
    Gen(GenArgs),
    /// Audit a weight: class constants, A-infinity conditions, implications.
    Audit(AuditArgs),
    /// Evaluate a maximal operator and write the result field.
    Maximal(MaximalArgs),
    /// Check or search reverse Holder exponents.
    Rhi(RhiArgs),
    /// Factorize a weight into one-sided A_1 factors.
    Factorize(FactorizeArgs),
    /// Scan the empirical weak-type constant (and the strong-type ratio).
    Weaktype(WeaktypeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Constant,
    ExpTime,
    PowerTime,
    MonotoneRandom,
    Checkerboard,
    Spike,
    LogNormal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Forward,
    Backward,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Cells per axis, time last: e.g. 8,8,32.
    #[arg(long, value_delimiter = ',')]
    shape: Vec<usize>,
    /// Cell widths per axis, time last.
    #[arg(long, value_delimiter = ',')]
    spacing: Vec<f64>,
    /// Lower domain corner per axis, time last.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    origin: Vec<f64>,
    /// Scaling exponent attached to the grid.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    output: PathBuf,
    /// Value of a constant field.
    #[arg(long, default_value_t = 1.0)]
    value: f64,
    /// Rate of exp-time / power-time profiles.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    rate: f64,
    /// Low level of a checkerboard.
    #[arg(long, default_value_t = 1.0)]
    lo: f64,
    /// High level of a checkerboard.
    #[arg(long, default_value_t = 2.0)]
    hi: f64,
    /// Spike amplitude.
    #[arg(long, default_value_t = 10.0)]
    amplitude: f64,
    /// Spike background level.
    #[arg(long, default_value_t = 0.1)]
    background: f64,
    /// Number of spike cells.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Mean of the log-normal exponent.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
    /// Deviation of the log-normal exponent.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Increment scale of the monotone-random profile.
    #[arg(long, default_value_t = 0.25)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct FamilyArgs {
    /// Number of scales in the ladder.
    #[arg(long, default_value_t = 3)]
    scales: usize,
    /// Scale ratio; defaults to 2^(1/p).
    #[arg(long)]
    ratio: Option<f64>,
    /// Spatial center stride as a fraction of the half-side.
    #[arg(long, default_value_t = 0.5)]
    stride_x: f64,
    /// Temporal center stride as a fraction of the part length.
    #[arg(long, default_value_t = 0.5)]
    stride_t: f64,
    /// Smallest half-side; defaults to fitting the largest scale to the
    /// domain.
    #[arg(long)]
    lmin: Option<f64>,
}

impl FamilyArgs {
    fn build(&self, grid: &Grid, gamma: f64) -> anyhow::Result<RectangleFamily> {
        let fitted = FamilySpec::fitted(grid, gamma, self.scales)?;
        let spec = FamilySpec::new(
            grid.p,
            gamma,
            self.lmin.unwrap_or(fitted.l_min),
            self.ratio.unwrap_or(fitted.ratio),
            self.scales,
            self.stride_x,
            self.stride_t,
        )?;
        Ok(RectangleFamily::enumerate(grid, spec)?)
    }
}

#[derive(Args)]
struct ReportOpts {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Omit the wall-clock stamp so identical runs emit identical bytes.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    #[command(flatten)]
    family: FamilyArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    report: ReportOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Lift nonpositive weight values to this floor at load time.
    #[arg(long)]
    clamp_eps: Option<f64>,
    /// Assert the quantitative measure condition with this K (needs --delta).
    #[arg(long)]
    k_bound: Option<f64>,
    /// Exponent for the asserted quantitative measure condition.
    #[arg(long)]
    delta: Option<f64>,
    /// Assert the sublevel condition with this alpha (needs --beta).
    #[arg(long)]
    alpha: Option<f64>,
    /// Threshold factor for the asserted sublevel condition.
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct MaximalArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Dir::Backward)]
    direction: Dir,
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    #[command(flatten)]
    family: FamilyArgs,
    /// Output PWF path (uncovered cells are stored as NaN).
    #[arg(long)]
    output: PathBuf,
    /// Summary report path; stdout when omitted.
    #[arg(long)]
    report_output: Option<PathBuf>,
    #[command(flatten)]
    report: ReportOpts,
}

#[derive(Args)]
struct RhiArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    family: FamilyArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    report: ReportOpts,
    /// Check mode: exponent to verify.
    #[arg(long)]
    eps: Option<f64>,
    /// Check mode: constant to verify against.
    #[arg(long)]
    c: Option<f64>,
    /// Search mode: bisect the largest passing exponent per constant.
    #[arg(long, value_delimiter = ',')]
    c_ladder: Option<Vec<f64>>,
    #[arg(long, default_value_t = 4.0)]
    eps_hi: f64,
    #[arg(long)]
    clamp_eps: Option<f64>,
}

#[derive(Args)]
struct FactorizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    #[command(flatten)]
    family: FamilyArgs,
    /// Operator norm bound; measured from the iterates when omitted.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 32)]
    iterations: usize,
    /// Where to write the factor fields (u, v, eta as PWF triples).
    #[arg(long)]
    output_prefix: Option<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    report: ReportOpts,
    #[arg(long)]
    clamp_eps: Option<f64>,
}

#[derive(Args)]
struct WeaktypeArgs {
    /// Integrand field.
    #[arg(long)]
    input: PathBuf,
    /// Weight field.
    #[arg(long)]
    weight: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 0.25)]
    gamma: f64,
    #[arg(long, default_value_t = 64)]
    lambda_points: usize,
    #[command(flatten)]
    family: FamilyArgs,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    report: ReportOpts,
    #[arg(long)]
    clamp_eps: Option<f64>,
}

#[derive(Serialize)]
struct Envelope<T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at: Option<u64>,
    body: T,
}

fn emit<T: Serialize>(
    report: &ReportOpts,
    output: Option<&PathBuf>,
    body: T,
    scalars: &[(String, f64)],
) -> anyhow::Result<()> {
    let envelope = Envelope {
        tool: "parweight",
        version: env!("CARGO_PKG_VERSION"),
        command: std::env::args().skip(1).collect::<Vec<_>>().join(" "),
        generated_at: if report.no_timestamp {
            None
        } else {
            Some(
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            )
        },
        body,
    };
    let bytes = match report.format {
        Format::Json => {
            let mut s = serde_json::to_vec_pretty(&envelope)?;
            s.push(b'\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("key,value\n");
            for (k, v) in scalars {
                s.push_str(&format!("{k},{v:?}\n"));
            }
            s.into_bytes()
        }
    };
    match output {
        Some(path) => std::fs::write(path, bytes)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(())
}

fn load_weight(path: &std::path::Path, clamp: Option<f64>) -> anyhow::Result<ScalarField> {
    let field = pwf::read_pwf(path, clamp)?;
    field.ensure_positive()?;
    Ok(field)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Maximal(args) => cmd_maximal(args),
        Command::Rhi(args) => cmd_rhi(args),
        Command::Factorize(args) => cmd_factorize(args),
        Command::Weaktype(args) => cmd_weaktype(args),
    }
}

fn cmd_gen(args: GenArgs) -> anyhow::Result<ExitCode> {
    let grid = Grid::new(args.shape.clone(), args.spacing.clone(), args.origin.clone(), args.p)?;
    let field = match args.kind {
        Kind::Constant => gen::constant(grid, args.value)?,
        Kind::ExpTime => gen::exp_time(grid, args.rate)?,
        Kind::PowerTime => gen::power_time(grid, args.rate)?,
        Kind::MonotoneRandom => gen::monotone_random(grid, args.seed, args.step)?,
        Kind::Checkerboard => gen::checkerboard(grid, args.lo, args.hi)?,
        Kind::Spike => gen::spike(grid, args.amplitude, args.background, args.count, args.seed)?,
        Kind::LogNormal => gen::log_normal(grid, args.mu, args.sigma, args.seed)?,
    };
    pwf::write_pwf(&args.output, &field)?;
    println!(
        "wrote {} cells ({} axes) to {}; value range [{}, {}]",
        field.grid().cell_count(),
        field.grid().axes(),
        args.output.display(),
        field.min_value(),
        field.max_value(),
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct AuditBody {
    q: f64,
    gamma: f64,
    class_constant: parweight::report::ConstantReport,
    a1_constant: Option<parweight::report::ConstantReport>,
    gurov_reshetnyak: parweight::report::ConstantReport,
    sublevel_min_alpha: Vec<(f64, f64)>,
    holder_measure_check: weights::MeasureCheckReport,
    gr_implications: weights::GrImplicationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    user_measure_check: Option<weights::MeasureCheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    user_sublevel_check: Option<weights::SublevelReport>,
    seed: u64,
}

fn cmd_audit(args: AuditArgs) -> anyhow::Result<ExitCode> {
    let w = load_weight(&args.input, args.clamp_eps)?;
    let lag = Lag::new(args.gamma)?;
    let fam = args.family.build(w.grid(), args.gamma)?;

    let (class_constant, a1_constant, holder_q) = if args.q == 1.0 {
        let a1 = weights::a1_plus_constant(&w, lag, &fam)?;
        (a1.clone(), Some(weights::a1_via_maximal(&w, lag, &fam)?), 2.0)
    } else {
        (weights::aq_plus_constant(&w, args.q, lag, &fam)?, None, args.q)
    };
    let gr = weights::gurov_reshetnyak(&w, lag, &fam)?;

    let mut sublevel_min_alpha = Vec::new();
    for beta in [0.25, 0.5, 0.75] {
        let rep = weights::sublevel_condition(&w, lag, 0.999_999, beta, &fam)?;
        sublevel_min_alpha.push((beta, rep.min_alpha));
    }

    // Holder direction of the quantitative measure condition, with the
    // measured constant: an implication that must never fail.
    let holder_aq = if args.q == 1.0 {
        weights::aq_plus_constant(&w, holder_q, lag, &fam)?.value
    } else {
        class_constant.value
    };
    let cfg = ESetConfig {
        seed: args.seed,
        ..ESetConfig::default()
    };
    let holder_measure_check = weights::quantitative_measure_check(
        &w,
        lag,
        holder_aq.powf(1.0 / holder_q),
        1.0 / holder_q,
        &fam,
        &cfg,
    )?;
    let gr_implications =
        weights::gr_implication_check(&w, lag, &fam, &[0.3, 0.5, 0.9], 0.5)?;

    let user_measure_check = match (args.k_bound, args.delta) {
        (Some(k), Some(d)) => Some(weights::quantitative_measure_check(&w, lag, k, d, &fam, &cfg)?),
        (None, None) => None,
        _ => anyhow::bail!("--k-bound and --delta must be given together"),
    };
    let user_sublevel_check = match (args.alpha, args.beta) {
        (Some(a), Some(b)) => Some(weights::sublevel_condition(&w, lag, a, b, &fam)?),
        (None, None) => None,
        _ => anyhow::bail!("--alpha and --beta must be given together"),
    };

    let mut failed = !holder_measure_check.passed || !gr_implications.passed;
    if let Some(rep) = &user_measure_check {
        failed |= !rep.passed;
    }
    if let Some(rep) = &user_sublevel_check {
        failed |= !rep.passed;
    }

    let mut scalars = vec![
        ("class_constant".to_string(), class_constant.value),
        ("gurov_reshetnyak".to_string(), gr.value),
        ("holder_worst_ratio".to_string(), holder_measure_check.worst_ratio),
    ];
    for (beta, alpha) in &sublevel_min_alpha {
        scalars.push((format!("sublevel_min_alpha_beta_{beta}"), *alpha));
    }

    let body = AuditBody {
        q: args.q,
        gamma: args.gamma,
        class_constant,
        a1_constant,
        gurov_reshetnyak: gr,
        sublevel_min_alpha,
        holder_measure_check,
        gr_implications,
        user_measure_check,
        user_sublevel_check,
        seed: args.seed,
    };
    emit(&args.report, args.output.as_ref(), body, &scalars)?;
    Ok(if failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

#[derive(Serialize)]
struct MaximalBody {
    direction: String,
    gamma: f64,
    covered_cells: usize,
    total_cells: usize,
    min_value: Option<f64>,
    max_value: Option<f64>,
    family: parweight::report::FamilySummary,
}

fn cmd_maximal(args: MaximalArgs) -> anyhow::Result<ExitCode> {
    let f = pwf::read_pwf(&args.input, None)?;
    let lag = Lag::new(args.gamma)?;
    let fam = args.family.build(f.grid(), args.gamma)?;
    let result = match args.direction {
        Dir::Backward => parweight::maximal_backward(&f, lag, &fam)?,
        Dir::Forward => parweight::maximal_forward(&f, lag, &fam)?,
    };
    pwf::write_pwf_raw(&args.output, f.grid(), result.values_raw())?;
    let body = MaximalBody {
        direction: match args.direction {
            Dir::Backward => "backward".to_string(),
            Dir::Forward => "forward".to_string(),
        },
        gamma: args.gamma,
        covered_cells: result.covered_count(),
        total_cells: result.cell_count(),
        min_value: result.min_value(),
        max_value: result.max_value(),
        family: parweight::report::FamilySummary::new(&fam),
    };
    let scalars = vec![
        ("covered_cells".to_string(), result.covered_count() as f64),
        ("max_value".to_string(), result.max_value().unwrap_or(f64::NAN)),
    ];
    emit(&args.report, args.report_output.as_ref(), body, &scalars)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RhiBody {
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<weights::RhiReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frontier: Option<Vec<weights::RhiFrontier>>,
}

fn cmd_rhi(args: RhiArgs) -> anyhow::Result<ExitCode> {
    let w = load_weight(&args.input, args.clamp_eps)?;
    let fam = args.family.build(w.grid(), 0.0)?;
    match (args.eps, args.c, args.c_ladder) {
        (Some(eps), Some(c), None) => {
            let rep = weights::reverse_holder_check(&w, eps, c, &fam)?;
            let passed = rep.passed;
            let scalars = vec![
                ("worst_ratio".to_string(), rep.worst_ratio),
                ("eps".to_string(), eps),
                ("c".to_string(), c),
            ];
            emit(
                &args.report,
                args.output.as_ref(),
                RhiBody {
                    check: Some(rep),
                    frontier: None,
                },
                &scalars,
            )?;
            Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        (None, None, Some(ladder)) => {
            let frontier = weights::reverse_holder_search(&w, &fam, &ladder, 1e-4, args.eps_hi, 48)?;
            let scalars: Vec<(String, f64)> = frontier
                .iter()
                .map(|p| (format!("max_eps_c_{}", p.c), p.max_eps.unwrap_or(f64::NAN)))
                .collect();
            emit(
                &args.report,
                args.output.as_ref(),
                RhiBody {
                    check: None,
                    frontier: Some(frontier),
                },
                &scalars,
            )?;
            Ok(ExitCode::SUCCESS)
        }
        _ => anyhow::bail!("use either --eps with --c (check) or --c-ladder (search)"),
    }
}

#[derive(Serialize)]
struct FactorizeBody {
    q: f64,
    gamma: f64,
    c_used: f64,
    iterations: usize,
    tail_bound: f64,
    certificates: factor::RdfCertificates,
    u_a1_constant: f64,
    v_a1_minus_constant: f64,
    family: parweight::report::FamilySummary,
}

fn cmd_factorize(args: FactorizeArgs) -> anyhow::Result<ExitCode> {
    let w = load_weight(&args.input, args.clamp_eps)?;
    let lag = Lag::new(args.gamma)?;
    let fam = args.family.build(w.grid(), args.gamma)?;
    let f0 = ScalarField::constant(w.grid().clone(), 1.0)?;
    let result = factor::rdf_factorize(&w, args.q, lag, &fam, &f0, args.c, args.iterations)?;

    if let Some(prefix) = &args.output_prefix {
        let base = prefix.with_extension("pwf");
        pwf::write_pwf(&pwf::with_suffix(&base, "_u"), &result.u)?;
        pwf::write_pwf(&pwf::with_suffix(&base, "_v"), &result.v)?;
        pwf::write_pwf(&pwf::with_suffix(&base, "_eta"), &result.eta)?;
    }

    let u_c = weights::a1_plus_constant(&result.u, lag, &fam)?.value;
    let v_c = weights::a1_minus_constant(&result.v, lag, &fam)?.value;
    let gate = 1.0 + 1e-9;
    let ok = result.certificates.u_margin <= gate
        && result.certificates.v_margin <= gate
        && result.certificates.reconstruction_error <= 1e-12;
    let scalars = vec![
        ("c_used".to_string(), result.c_used),
        ("tail_bound".to_string(), result.tail_bound),
        ("u_margin".to_string(), result.certificates.u_margin),
        ("v_margin".to_string(), result.certificates.v_margin),
        (
            "reconstruction_error".to_string(),
            result.certificates.reconstruction_error,
        ),
        ("u_a1_constant".to_string(), u_c),
        ("v_a1_minus_constant".to_string(), v_c),
    ];
    let body = FactorizeBody {
        q: args.q,
        gamma: args.gamma,
        c_used: result.c_used,
        iterations: result.iterations,
        tail_bound: result.tail_bound,
        certificates: result.certificates,
        u_a1_constant: u_c,
        v_a1_minus_constant: v_c,
        family: parweight::report::FamilySummary::new(&fam),
    };
    emit(&args.report, args.output.as_ref(), body, &scalars)?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

#[derive(Serialize)]
struct WeaktypeBody {
    weak: weights::WeakTypeReport,
    strong: weights::StrongTypeReport,
    family: parweight::report::FamilySummary,
}

fn cmd_weaktype(args: WeaktypeArgs) -> anyhow::Result<ExitCode> {
    let f = pwf::read_pwf(&args.input, None)?;
    let w = load_weight(&args.weight, args.clamp_eps)?;
    let lag = Lag::new(args.gamma)?;
    let fam = args.family.build(f.grid(), args.gamma)?;
    let weak = weights::weak_type_ratio(
        &f,
        &w,
        args.q,
        lag,
        &fam,
        &LambdaGrid::Geometric {
            points: args.lambda_points,
        },
    )?;
    let strong = weights::strong_type_ratio(&f, &w, args.q, lag, &fam)?;
    let scalars = vec![
        ("weak_constant".to_string(), weak.constant),
        ("strong_ratio".to_string(), strong.ratio),
    ];
    let body = WeaktypeBody {
        weak,
        strong,
        family: parweight::report::FamilySummary::new(&fam),
    };
    emit(&args.report, args.output.as_ref(), body, &scalars)?;
    Ok(ExitCode::SUCCESS)
}
