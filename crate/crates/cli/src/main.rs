//! `hessval` command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numeric certification failure,
//! 64 malformed flags.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use hessval::convexfun::ConvexFunction;
use hessval::hessmeasure::{phi_measure, theta_coefficients, BaseSet, Side, DEFAULT_S_GRID};
use hessval::mc::{seed_from_env, DEFAULT_SAMPLES, DEFAULT_SEED};
use hessval::selfcheck::{run_suite, Suite};
use hessval::transforms::{auto_dual_box, conjugate, legendre, moreau_yosida, rotational_episymmetrize};
use hessval::valuations::{homogeneous_components, valuate, valuate_moreau, Route, ValuationSpec};
use hessval::zetaspace::{
    abel_forward, abel_inverse, read_profile_csv, recover_zeta_from_cone_values, synthesize_cone_values,
    write_profile_csv, ProfileCsv, SampledXi, ZetaProfile,
};
use output::{num, Table};

/// Nominal relative tolerance of the adaptive quadratures behind the
/// quadrature and Moreau routes.
const QUAD_REL_TOL: f64 = 1e-10;

#[derive(Parser, Debug)]
#[command(name = "hessval", version, about = "Hessian measures and valuations on convex functions")]
struct Cli {
    /// Emit JSON instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    /// Write the output to a file instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Monte-Carlo seed; overrides HESSVAL_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Legendre transform, Moreau envelope or rotational symmetrization.
    Transform(TransformArgs),
    /// Hessian measures of a region.
    Measure(MeasureArgs),
    /// Evaluate Z_{j,ζ} or its dual.
    Valuate(ValuateArgs),
    /// Homogeneous components of a valuation at a function.
    Decompose(DecomposeArgs),
    /// Recover ζ from cone values, or synthesize cone values from ζ.
    RecoverZeta(RecoverArgs),
    /// Abel transform of a profile or its inverse.
    Abel(AbelArgs),
    /// Run the oracle and identity battery.
    Selfcheck(SelfcheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Op {
    Legendre,
    Moreau,
    Symmetrize,
}

#[derive(Args, Debug)]
struct TransformArgs {
    #[arg(long = "fn", value_name = "FILE")]
    function: PathBuf,
    #[arg(long, value_enum)]
    op: Op,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 64)]
    rotations: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    /// Φ_j of a box from the structured measure.
    Exact,
    /// Monte-Carlo fit of the P_s polynomial over A × ℝⁿ.
    Ps,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long = "fn", value_name = "FILE")]
    function: PathBuf,
    /// Region JSON: {"kind": "box" | "ball" | "sphere", ...}.
    #[arg(long, value_name = "FILE")]
    region: PathBuf,
    /// Degree; all degrees when omitted.
    #[arg(long)]
    j: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Exact)]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SideArg {
    Primal,
    Dual,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RouteArg {
    Quadrature,
    ClosedForm,
    Moreau,
}

#[derive(Args, Debug)]
struct ValuateArgs {
    #[arg(long = "fn", value_name = "FILE")]
    function: PathBuf,
    /// Profile as `s,value` CSV or ZetaProfile JSON.
    #[arg(long, value_name = "FILE")]
    zeta: PathBuf,
    #[arg(long)]
    j: usize,
    #[arg(long, value_enum, default_value_t = SideArg::Primal)]
    side: SideArg,
    #[arg(long, value_enum, default_value_t = RouteArg::Quadrature)]
    route: RouteArg,
    /// λ nodes for the Moreau route, comma separated; `1, …, j+1` by default.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long = "fn", value_name = "FILE")]
    function: PathBuf,
    /// A ValuationSpec JSON object, or an array of them to be summed.
    #[arg(long, value_name = "FILE")]
    valuation: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["cone_values", "from_zeta"])))]
struct RecoverArgs {
    /// Cone values `t,value` with t increasing and the last value zero.
    #[arg(long, value_name = "FILE")]
    cone_values: Option<PathBuf>,
    /// Synthesize cone values from this profile instead.
    #[arg(long, value_name = "FILE")]
    from_zeta: Option<PathBuf>,
    #[arg(long)]
    n: usize,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("direction").required(true).args(["forward", "inverse"])))]
struct AbelArgs {
    /// Profile in, ξ = Aζ out.
    #[arg(long)]
    forward: bool,
    /// ξ in, ζ out.
    #[arg(long)]
    inverse: bool,
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Number of equispaced output nodes on [0, S] for --forward.
    #[arg(long, default_value_t = 2001)]
    count: usize,
}

#[derive(Args, Debug)]
struct SelfcheckArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::Fast)]
    suite: SuiteArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Fast,
    Full,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Certification(String),
    /// Certification failure that still produced a report.
    Report { text: String, message: String },
}

impl From<hessval::Error> for Failure {
    fn from(e: hessval::Error) -> Self {
        if e.is_certification() {
            Failure::Certification(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type Outcome = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn read_function(path: &Path) -> Result<ConvexFunction, Failure> {
    let f: ConvexFunction = read_json(path)?;
    f.validate()?;
    Ok(f)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_zeta(path: &Path) -> Result<ZetaProfile, Failure> {
    if is_json(path) {
        let z: ZetaProfile = read_json(path)?;
        z.validate()?;
        return Ok(z);
    }
    let csv = read_profile_csv(&read(path)?)?;
    let mut z = ZetaProfile::sampled(csv.s, csv.values)?;
    z.class = csv.class;
    Ok(z)
}

fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or_else(|| seed_from_env(DEFAULT_SEED))
}

fn transform(args: &TransformArgs) -> Outcome {
    let f = read_function(&args.function)?;
    let g = match args.op {
        Op::Legendre => match (&f, conjugate(&f)) {
            (_, Some(star)) => star,
            (ConvexFunction::Grid(grid), None) => {
                let (lo, hi, shape) = auto_dual_box(grid);
                ConvexFunction::Grid(legendre(&f, &lo, &hi, &shape)?)
            }
            (other, None) => {
                return Err(Failure::Input(format!(
                    "no conjugate for {}; sample it on a grid first",
                    other.variant_name()
                )))
            }
        },
        Op::Moreau => moreau_yosida(&f, args.lambda)?,
        Op::Symmetrize => rotational_episymmetrize(&f, args.rotations)?,
    };
    let mut text = serde_json::to_string_pretty(&g).map_err(|e| Failure::Input(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn region_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().replace(',', "_")).unwrap_or_else(|| "region".into())
}

fn measure(args: &MeasureArgs, seed: u64, as_json: bool) -> Outcome {
    let f = read_function(&args.function)?;
    let base: BaseSet = read_json(&args.region)?;
    let n = f.dim();
    if base.dim() != n {
        return Err(hessval::Error::DimensionMismatch { expected: n, found: base.dim() }.into());
    }
    let degrees: Vec<usize> = match args.j {
        Some(j) if j > n => return Err(hessval::Error::IndexOutOfRange { index: j, max: n }.into()),
        Some(j) => vec![j],
        None => (0..=n).collect(),
    };
    let label = region_label(&args.region);
    let mut table = Table::new(&["region", "j", "value", "mc_stderr"]).meta("dim", n);
    match args.method {
        Method::Exact => {
            let BaseSet::Box { lo, hi } = &base else {
                return Err(Failure::Input("the exact method measures boxes; use --method ps".into()));
            };
            table = table.meta("method", "exact");
            for j in degrees {
                let v = phi_measure(&f, j)?.mass_in_box(lo, hi)?;
                table.push(vec![label.clone().into(), j.into(), v.into(), 0.0.into()]);
            }
        }
        Method::Ps => {
            table = table.meta("method", "ps").meta("samples", args.samples).meta("seed", seed);
            let fit = theta_coefficients(&f, &base, &DEFAULT_S_GRID, args.samples, seed)?;
            // the coefficient of s^j is Φ_j(u, A)
            for j in degrees {
                table.push(vec![label.clone().into(), j.into(), fit.coefficients[j].into(), fit.std_errors[j].into()]);
            }
            table = table.meta("condition", num(fit.condition));
        }
    }
    Ok(table.render(as_json))
}

fn valuate_cmd(args: &ValuateArgs, as_json: bool) -> Outcome {
    let f = read_function(&args.function)?;
    let zeta = read_zeta(&args.zeta)?;
    let mut spec = ValuationSpec::new(f.dim(), args.j, zeta);
    if let SideArg::Dual = args.side {
        spec = spec.dual();
    }
    spec = spec.with_route(match args.route {
        RouteArg::Quadrature => Route::Quadrature,
        RouteArg::ClosedForm => Route::ClosedForm,
        RouteArg::Moreau => Route::Moreau { lambdas: args.lambdas.clone() },
    });
    spec.validate()?;
    let side = if spec.side == Side::Dual { "dual" } else { "primal" };
    let name = format!("{}_{}", if spec.side == Side::Dual { "Zstar" } else { "Z" }, args.j);
    let mut table = Table::new(&["quantity", "value", "est_error"])
        .meta("dim", spec.dim)
        .meta("j", spec.j)
        .meta("side", side)
        .meta("route", value_name(args.route));
    match &spec.route {
        Route::Moreau { .. } => {
            let m = valuate_moreau(&spec, &f)?;
            let scale = m.envelope_values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let err = m.condition * QUAD_REL_TOL * scale;
            table.push(vec![name.into(), m.value.into(), err.into()]);
            for (i, c) in m.components.iter().enumerate().take(args.j) {
                table.push(vec![format!("Z_{i}").into(), (*c).into(), err.into()]);
            }
            for (l, v) in m.lambdas.iter().zip(&m.envelope_values) {
                table.push(vec![format!("envelope_lambda_{l}").into(), (*v).into(), (QUAD_REL_TOL * v.abs()).into()]);
            }
            table.push(vec!["condition".into(), m.condition.into(), 0.0.into()]);
        }
        Route::ClosedForm => {
            let v = valuate(&spec, &f)?;
            table.push(vec![name.into(), v.into(), 0.0.into()]);
        }
        Route::Quadrature => {
            let v = valuate(&spec, &f)?;
            table.push(vec![name.into(), v.into(), (QUAD_REL_TOL * v.abs()).into()]);
        }
    }
    Ok(table.render(as_json))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ValuationFile {
    One(ValuationSpec),
    Sum(Vec<ValuationSpec>),
}

fn decompose(args: &DecomposeArgs, as_json: bool) -> Outcome {
    let f = read_function(&args.function)?;
    let specs = match read_json::<ValuationFile>(&args.valuation)? {
        ValuationFile::One(s) => vec![s],
        ValuationFile::Sum(v) if !v.is_empty() => v,
        ValuationFile::Sum(_) => return Err(Failure::Input("valuation list is empty".into())),
    };
    let n = f.dim();
    for s in &specs {
        s.validate()?;
        if s.dim != n {
            return Err(hessval::Error::DimensionMismatch { expected: n, found: s.dim }.into());
        }
    }
    let z = |g: &ConvexFunction| specs.iter().map(|s| valuate(s, g)).sum::<hessval::Result<f64>>();
    let c = homogeneous_components(z, &f, n)?;
    let mut table = Table::new(&["quantity", "value", "est_error"]).meta("dim", n).meta("terms", specs.len());
    let err = c.condition * QUAD_REL_TOL * c.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for (i, v) in c.values.iter().enumerate() {
        table.push(vec![format!("Z_{i}").into(), (*v).into(), err.into()]);
    }
    table.push(vec!["sum_residual".into(), c.sum_residual.into(), 0.0.into()]);
    table.push(vec!["condition".into(), c.condition.into(), 0.0.into()]);
    Ok(table.render(as_json))
}

/// `0`, 60 log-spaced nodes up to `0.05`, then a `1e−3` grid up to `top`.
fn cone_nodes(top: f64) -> Vec<f64> {
    hessval::selfcheck::recovery_nodes(top)
}

fn profile_table(data: &ProfileCsv, header: (&'static str, &'static str), extra: &[(&str, String)], as_json: bool) -> String {
    if !as_json && extra.is_empty() {
        return write_profile_csv(data, header);
    }
    let mut table = Table::new(&[header.0, header.1]);
    if let Some(s) = data.support {
        table = table.meta("support", num(s));
    }
    if let Some([j, n]) = data.class {
        table = table.meta("class", format!("H_{j}^{n}"));
    }
    for (k, v) in extra {
        table = table.meta(k, v);
    }
    for (s, v) in data.s.iter().zip(&data.values) {
        table.push(vec![(*s).into(), (*v).into()]);
    }
    table.render(as_json)
}

fn recover(args: &RecoverArgs, as_json: bool) -> Outcome {
    if args.n < 2 {
        return Err(Failure::Input("recovery needs n ≥ 2".into()));
    }
    if let Some(path) = &args.from_zeta {
        let zeta = read_zeta(path)?;
        let t = cone_nodes(zeta.support());
        let values = synthesize_cone_values(&zeta, args.n, &t);
        let data = ProfileCsv { s: t, values, support: None, class: None };
        return Ok(profile_table(&data, ("t", "value"), &[], as_json));
    }
    let path = args.cone_values.as_ref().expect("clap requires one input");
    let input = read_profile_csv(&read(path)?)?;
    let rec = recover_zeta_from_cone_values(&input.s, &input.values, args.n)?;
    let hessval::zetaspace::ZetaShape::Sampled { s, values } = &rec.zeta.shape else {
        unreachable!("recovery returns a sampled profile")
    };
    let data = ProfileCsv { s: s.clone(), values: values.clone(), support: Some(rec.zeta.support()), class: rec.zeta.class };
    let extra = [
        ("limit_certificate", num(rec.limit_certificate)),
        ("limit_expected", num(rec.limit_expected)),
        ("limit_gap", num((rec.limit_certificate - rec.limit_expected).abs())),
    ];
    Ok(profile_table(&data, ("s", "value"), &extra, as_json))
}

fn abel(args: &AbelArgs, as_json: bool) -> Outcome {
    if args.forward {
        if args.count < 3 {
            return Err(Failure::Input("--count must be at least 3".into()));
        }
        let zeta = read_zeta(&args.input)?;
        let top = zeta.support();
        let t: Vec<f64> = (0..args.count).map(|i| top * i as f64 / (args.count - 1) as f64).collect();
        let values = t.iter().map(|&x| abel_forward(&zeta, x)).collect();
        let data = ProfileCsv { s: t, values, support: Some(top), class: None };
        return Ok(profile_table(&data, ("t", "value"), &[], as_json));
    }
    let input = read_profile_csv(&read(&args.input)?)?;
    let xi = SampledXi::new(input.s.clone(), input.values)?;
    let values = abel_inverse(&xi, &input.s)?;
    let data = ProfileCsv { s: input.s.clone(), values, support: input.s.last().copied(), class: None };
    Ok(profile_table(&data, ("s", "value"), &[], as_json))
}

fn selfcheck(args: &SelfcheckArgs, seed: u64, as_json: bool) -> Outcome {
    let suite = match args.suite {
        SuiteArg::Fast => Suite::Fast,
        SuiteArg::Full => Suite::Full,
    };
    let checks = run_suite(suite, seed);
    let mut table = Table::new(&["criterion", "name", "status", "residual", "tolerance"])
        .meta("suite", value_name(args.suite))
        .meta("seed", seed);
    for c in &checks {
        let status = if c.passed { "pass" } else { "fail" };
        table.push(vec![(c.criterion as usize).into(), c.name.clone().into(), status.into(), c.residual.into(), c.tolerance.into()]);
    }
    let text = table.render(as_json);
    if checks.iter().all(|c| c.passed) {
        Ok(text)
    } else {
        let failed: Vec<String> =
            checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.criterion, c.detail)).collect();
        Err(Failure::Report { text, message: format!("failed checks: {}", failed.join("; ")) })
    }
}

fn run(cli: &Cli) -> Outcome {
    let seed = seed(cli);
    match &cli.command {
        Command::Transform(a) => transform(a),
        Command::Measure(a) => measure(a, seed, cli.json),
        Command::Valuate(a) => valuate_cmd(a, cli.json),
        Command::Decompose(a) => decompose(a, cli.json),
        Command::RecoverZeta(a) => recover(a, cli.json),
        Command::Abel(a) => abel(a, cli.json),
        Command::Selfcheck(a) => selfcheck(a, seed, cli.json),
    }
}

fn emit(cli: &Cli, text: &str) -> ExitCode {
    match &cli.out {
        Some(path) => match std::fs::write(path, text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                ExitCode::from(1)
            }
        },
        None => {
            print!("{text}");
            ExitCode::SUCCESS
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(text) => emit(&cli, &text),
        Err(Failure::Report { text, message }) => {
            let code = emit(&cli, &text);
            if code != ExitCode::SUCCESS {
                return code;
            }
            eprintln!("certification failed: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Certification(msg)) => {
            eprintln!("certification failed: {msg}");
            ExitCode::from(2)
        }
    }
}
