//! The `spherica` command-line driver.
//!
//! Every subcommand produces one document, JSON by default or CSV with
//! `--format csv`, written to stdout or to `--out`. Failures print a single
//! line `error: kind=<kind> message="<text>"` on stderr.

use std::fmt::{self, Write as _};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::limits::{powersum_convergence, spherical_convergence, weyl_concentration_sweep, SweepMethod, SweepReport};
use crate::montecarlo::{ambient_laplacian_fd, mc_orbital_exp, mc_spherical_full};
use crate::polya::{mixture_eval, phi_omega, polya_eval, MixtureParam, OmegaParam};
use crate::spherical::{
    heat_kernel, orbital_auto, orbital_integral, orbital_integral_series, radial_laplacian,
    radial_laplacian_divergence, spherical_auto, spherical_det, spherical_series, DiagonalPoint, EvalPath, EvalResult,
    SphericalOptions,
};
use crate::validate::{run_suite, Suite};

/// Sample count used by Monte Carlo paths when `--samples` is absent.
pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "spherica", version, about = "Spherical functions on complex matrices and their large-n limits")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON object of flag values; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PathChoice {
    Auto,
    Det,
    Series,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Spherical,
    Powersum,
    Weyl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMethodChoice {
    Series,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestFunction {
    /// `Σ cos² θ_j`
    Cos2,
    /// `Σ sin² θ_j`
    Sin2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteChoice {
    Special,
    Symfunc,
    Spherical,
    Polya,
    Mc,
    Limits,
    All,
}

impl From<SuiteChoice> for Suite {
    fn from(s: SuiteChoice) -> Self {
        match s {
            SuiteChoice::Special => Suite::Special,
            SuiteChoice::Symfunc => Suite::Symfunc,
            SuiteChoice::Spherical => Suite::Spherical,
            SuiteChoice::Polya => Suite::Polya,
            SuiteChoice::Mc => Suite::Mc,
            SuiteChoice::Limits => Suite::Limits,
            SuiteChoice::All => Suite::All,
        }
    }
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub xi: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spherical function at diagonal points x, xi.
    EvalSpherical {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, value_enum, default_value_t = PathChoice::Auto)]
        path: PathChoice,
        #[arg(long)]
        max_weight: Option<usize>,
    },
    /// Modified Pólya function at each lambda and their product.
    EvalPolya {
        #[arg(long)]
        omega: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambda: Vec<f64>,
    },
    /// Mixture of limit spherical functions at xi.
    EvalMixture {
        #[arg(long)]
        mixture: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        xi: Vec<f64>,
    },
    /// Orbital integral of exp(Re tr(theta U lambda V*)).
    Orbital {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        theta: Vec<f64>,
        #[arg(long, value_enum, default_value_t = PathChoice::Auto)]
        path: PathChoice,
        #[arg(long)]
        max_weight: Option<usize>,
    },
    /// Radial heat kernel at time t.
    HeatKernel {
        #[arg(long)]
        t: f64,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        theta: Vec<f64>,
    },
    /// Radial Laplacian of exp(-|λ|²) against its closed form and the ambient Laplacian.
    LaplacianCheck {
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        lambda: Vec<f64>,
        #[arg(long)]
        fd_step: Option<f64>,
    },
    /// Convergence sweep over a list of dimensions.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[arg(long)]
        omega: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1", allow_negative_numbers = true)]
        xi: Vec<f64>,
        #[arg(long = "n", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, value_enum, default_value_t = SweepMethodChoice::Series)]
        method: SweepMethodChoice,
        /// Power-sum degree or number of Weyl coordinates.
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, value_enum, default_value_t = TestFunction::Cos2)]
        f: TestFunction,
    },
    /// Run invariant suites and print a pass/fail table.
    Validate {
        #[arg(long, value_enum, default_value_t = SuiteChoice::All)]
        suite: SuiteChoice,
    },
}

/// A failure ready for the single-line stderr report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub code: u8,
}

impl CliError {
    fn usage(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.to_string(),
            message: message.into(),
            code: 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Validation(_) | Error::Shape(_) => 1,
            _ => 2,
        };
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
            code,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg: String = self
            .message
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .replace('\\', "\\\\")
            .replace('"', "\\\"");
        write!(f, "error: kind={} message=\"{}\"", self.kind, msg)
    }
}

impl std::error::Error for CliError {}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn has_flag(args: &[String], flag: &str) -> bool {
    args.iter().any(|a| a == flag || a.strip_prefix(flag).is_some_and(|r| r.starts_with('=')))
}

fn config_token(v: &Value) -> Option<String> {
    match v {
        Value::Null | Value::Bool(_) => None,
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(items) => Some(items.iter().filter_map(config_token).collect::<Vec<_>>().join(",")),
        Value::Object(_) => None,
    }
}

/// Appends `--key value` for every config entry whose flag is absent from `args`.
pub fn merge_config(args: &[String]) -> Result<Vec<String>, CliError> {
    let mut out = args.to_vec();
    let Some(path) = config_path(args) else {
        return Ok(out);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::usage("io", format!("{path}: {e}")))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::usage("schema", format!("{path}: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::usage("schema", format!("{path}: config must be a JSON object")));
    };
    for (key, v) in &map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" || has_flag(args, &flag) {
            continue;
        }
        match v {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            other => {
                let token = config_token(other)
                    .ok_or_else(|| CliError::usage("schema", format!("{path}: unsupported value for {key}")))?;
                out.push(format!("{flag}={token}"));
            }
        }
    }
    Ok(out)
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage("io", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        let msg = e.to_string();
        let kind = if msg.starts_with("invalid parameter") { "validation" } else { "schema" };
        CliError::usage(kind, format!("{}: {msg}", path.display()))
    })
}

fn point(v: &[f64]) -> Result<DiagonalPoint, CliError> {
    Ok(DiagonalPoint::new(v.to_vec())?)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

/// A rendered document plus the exit code it implies.
struct Rendered {
    text: String,
    code: u8,
}

fn json_doc<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("output is serializable");
    s.push('\n');
    s
}

fn csv_doc(header: &str, rows: &[String]) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        let _ = writeln!(s, "{r}");
    }
    s
}

fn render_eval(r: &EvalResult, format: Format) -> String {
    match format {
        Format::Json => json_doc(r),
        Format::Csv => {
            let path = match r.path {
                EvalPath::Determinant => "determinant",
                EvalPath::Series => "series",
            };
            csv_doc(
                "value,abs_error,terms_used,path",
                &[format!("{:e},{:e},{},{}", r.value, r.abs_error, r.terms_used, path)],
            )
        }
    }
}

fn series_opts(max_weight: Option<usize>) -> SphericalOptions {
    let mut o = SphericalOptions::default();
    if let Some(w) = max_weight {
        o.max_weight = w;
    }
    o
}

fn eval_spherical(cli: &Cli, pair: &PairArgs, path: PathChoice, max_weight: Option<usize>, format: Format) -> Result<String, CliError> {
    let (x, xi) = (point(&pair.x)?, point(&pair.xi)?);
    let opts = series_opts(max_weight);
    let r = match path {
        PathChoice::Auto => spherical_auto(&x, &xi, &opts)?,
        PathChoice::Det => spherical_det(&x, &xi, &opts)?,
        PathChoice::Series => spherical_series(&x, &xi, opts.max_weight, &opts)?,
        PathChoice::Mc => {
            let samples = cli.samples.unwrap_or(DEFAULT_SAMPLES);
            let (re, im) = mc_spherical_full(&x, &xi, samples, cli.seed)?;
            return Ok(match format {
                Format::Json => json_doc(&json!({
                    "mean": re.mean,
                    "std_error": re.std_error,
                    "imag_mean": im.mean,
                    "imag_std_error": im.std_error,
                    "n_samples": samples,
                    "seed": cli.seed,
                })),
                Format::Csv => csv_doc(
                    "mean,std_error,imag_mean,imag_std_error,n_samples,seed",
                    &[format!(
                        "{:e},{:e},{:e},{:e},{},{}",
                        re.mean, re.std_error, im.mean, im.std_error, samples, cli.seed
                    )],
                ),
            });
        }
    };
    Ok(render_eval(&r, format))
}

fn orbital(
    cli: &Cli,
    lambda: &[f64],
    theta: &[f64],
    path: PathChoice,
    max_weight: Option<usize>,
    format: Format,
) -> Result<String, CliError> {
    let (l, t) = (point(lambda)?, point(theta)?);
    let opts = series_opts(max_weight);
    let r = match path {
        PathChoice::Auto => orbital_auto(&l, &t, &opts)?,
        PathChoice::Det => orbital_integral(&l, &t, &opts)?,
        PathChoice::Series => orbital_integral_series(&l, &t, opts.max_weight, &opts)?,
        PathChoice::Mc => {
            let samples = cli.samples.unwrap_or(DEFAULT_SAMPLES);
            let e = mc_orbital_exp(&l, &t, samples, cli.seed)?;
            return Ok(match format {
                Format::Json => json_doc(&json!({
                    "mean": e.mean,
                    "std_error": e.std_error,
                    "n_samples": samples,
                    "seed": cli.seed,
                })),
                Format::Csv => csv_doc(
                    "mean,std_error,n_samples,seed",
                    &[format!("{:e},{:e},{},{}", e.mean, e.std_error, samples, cli.seed)],
                ),
            });
        }
    };
    Ok(render_eval(&r, format))
}

fn eval_polya(omega: &Path, lambda: &[f64], format: Format) -> Result<String, CliError> {
    let w: OmegaParam = load_json(omega)?;
    if let Some(l) = lambda.iter().find(|l| !l.is_finite()) {
        return Err(Error::Domain(format!("lambda must be finite, got {l}")).into());
    }
    let values: Vec<f64> = lambda.iter().map(|&l| polya_eval(&w, l)).collect();
    let product = phi_omega(&w, lambda);
    Ok(match format {
        Format::Json => json_doc(&json!({ "lambda": lambda, "values": values, "product": product })),
        Format::Csv => csv_doc(
            "lambda,value,product",
            &lambda
                .iter()
                .zip(&values)
                .map(|(l, v)| format!("{l:e},{v:e},{product:e}"))
                .collect::<Vec<_>>(),
        ),
    })
}

fn eval_mixture(mixture: &Path, xi: &[f64], format: Format) -> Result<String, CliError> {
    let mu: MixtureParam = load_json(mixture)?;
    if let Some(l) = xi.iter().find(|l| !l.is_finite()) {
        return Err(Error::Domain(format!("xi must be finite, got {l}")).into());
    }
    let value = mixture_eval(&mu, xi);
    Ok(match format {
        Format::Json => json_doc(&json!({ "xi": xi, "value": value })),
        Format::Csv => csv_doc("xi,value", &[format!("{},{value:e}", fmt_list(xi))]),
    })
}

fn heat(t: f64, lambda: &[f64], theta: &[f64], format: Format) -> Result<String, CliError> {
    let value = heat_kernel(t, &point(lambda)?, &point(theta)?, &SphericalOptions::default())?;
    Ok(match format {
        Format::Json => json_doc(&json!({ "t": t, "value": value })),
        Format::Csv => csv_doc("t,value", &[format!("{t:e},{value:e}")]),
    })
}

fn laplacian_check(lambda: &[f64], fd_step: Option<f64>, format: Format) -> Result<String, CliError> {
    let l = point(lambda)?;
    let opts = SphericalOptions::default();
    let g = |p: &[f64]| (-p.iter().map(|v| v * v).sum::<f64>()).exp();
    let n = l.dim();
    let norm_sq = l.norm_sq();
    let closed_form = (4.0 * norm_sq - 4.0 * (n * n) as f64) * (-norm_sq).exp();
    let radial = radial_laplacian(g, &l, fd_step, &opts)?;
    let divergence = radial_laplacian_divergence(g, &l, fd_step, &opts)?;
    let mut d = DMatrix::<Complex64>::zeros(n, n);
    for (i, v) in l.values().iter().enumerate() {
        d[(i, i)] = Complex64::new(*v, 0.0);
    }
    let frob = |m: &DMatrix<Complex64>| (-m.iter().map(|z| z.norm_sqr()).sum::<f64>()).exp();
    let ambient = ambient_laplacian_fd(frob, &d, fd_step.unwrap_or(1e-4))?;
    let rel = |a: f64| ((a - closed_form) / closed_form).abs();
    let (rr, rd, ra) = (rel(radial), rel(divergence), rel(ambient));
    Ok(match format {
        Format::Json => json_doc(&json!({
            "n": n,
            "closed_form": closed_form,
            "radial": radial,
            "divergence": divergence,
            "ambient": ambient,
            "rel_radial": rr,
            "rel_divergence": rd,
            "rel_ambient": ra,
        })),
        Format::Csv => csv_doc(
            "n,closed_form,radial,divergence,ambient,rel_radial,rel_divergence,rel_ambient",
            &[format!(
                "{n},{closed_form:e},{radial:e},{divergence:e},{ambient:e},{rr:e},{rd:e},{ra:e}"
            )],
        ),
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    cli: &Cli,
    kind: SweepKind,
    omega: Option<&Path>,
    xi: &[f64],
    n_list: &[usize],
    method: SweepMethodChoice,
    m: usize,
    f: TestFunction,
    format: Format,
) -> Result<String, CliError> {
    let samples = cli.samples.unwrap_or(DEFAULT_SAMPLES);
    let need_omega = || -> Result<OmegaParam, CliError> {
        let p = omega.ok_or_else(|| CliError::usage("usage", "this sweep requires --omega"))?;
        load_json(p)
    };
    let report: SweepReport = match kind {
        SweepKind::Spherical => {
            let w = need_omega()?;
            let method = match method {
                SweepMethodChoice::Series => SweepMethod::Series,
                SweepMethodChoice::Mc => SweepMethod::MonteCarlo { samples, seed: cli.seed },
            };
            spherical_convergence(&w, xi, n_list, method, &SphericalOptions::default())?
        }
        SweepKind::Powersum => powersum_convergence(&need_omega()?, m, n_list)?,
        SweepKind::Weyl => {
            let test = move |t: &[f64]| -> f64 {
                match f {
                    TestFunction::Cos2 => t.iter().map(|v| v.cos().powi(2)).sum(),
                    TestFunction::Sin2 => t.iter().map(|v| v.sin().powi(2)).sum(),
                }
            };
            weyl_concentration_sweep(m, n_list, test, samples, cli.seed)?
        }
    };
    Ok(match format {
        Format::Json => {
            let mut s = report.to_json();
            s.push('\n');
            s
        }
        Format::Csv => report.to_csv(),
    })
}

fn dispatch(cli: &Cli) -> Result<Rendered, CliError> {
    let format = cli.format.unwrap_or(Format::Json);
    let ok = |text: String| Ok(Rendered { text, code: 0 });
    match &cli.command {
        Command::EvalSpherical { pair, path, max_weight } => ok(eval_spherical(cli, pair, *path, *max_weight, format)?),
        Command::EvalPolya { omega, lambda } => ok(eval_polya(omega, lambda, format)?),
        Command::EvalMixture { mixture, xi } => ok(eval_mixture(mixture, xi, format)?),
        Command::Orbital {
            lambda,
            theta,
            path,
            max_weight,
        } => ok(orbital(cli, lambda, theta, *path, *max_weight, format)?),
        Command::HeatKernel { t, lambda, theta } => ok(heat(*t, lambda, theta, format)?),
        Command::LaplacianCheck { lambda, fd_step } => ok(laplacian_check(lambda, *fd_step, format)?),
        Command::Sweep {
            kind,
            omega,
            xi,
            n_list,
            method,
            m,
            f,
        } => ok(sweep(cli, *kind, omega.as_deref(), xi, n_list, *method, *m, *f, format)?),
        Command::Validate { suite } => {
            let report = run_suite((*suite).into(), cli.samples.unwrap_or(DEFAULT_SAMPLES), cli.seed);
            let text = match cli.format {
                None => report.to_text(),
                Some(Format::Json) => json_doc(&report),
                Some(Format::Csv) => report.to_csv(),
            };
            Ok(Rendered {
                text,
                code: if report.passed() { 0 } else { 2 },
            })
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// writes its output to `--out` or to `stdout`. Returns the exit code.
pub fn run(args: &[String], stdout: &mut dyn Write) -> Result<u8, CliError> {
    let merged = merge_config(args)?;
    let cli = match Cli::try_parse_from(&merged) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return Ok(0);
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::usage("usage", first.trim_start_matches("error: ")));
        }
    };
    let rendered = dispatch(&cli)?;
    match &cli.out {
        Some(p) => std::fs::write(p, &rendered.text)
            .map_err(|e| CliError::usage("io", format!("{}: {e}", p.display())))?,
        None => stdout
            .write_all(rendered.text.as_bytes())
            .map_err(|e| CliError::usage("io", e.to_string()))?,
    }
    Ok(rendered.code)
}
