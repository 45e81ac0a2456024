mod commands;
mod selftest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "virloe", version, about = "Finite conformal deformations, coherent-state operators and SLE martingale checks")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file `{"command": [...], "args": {flag: value}}`; flags given on
    /// the command line are applied first.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Deformation operators `G_f`.
    #[command(subcommand)]
    Gf(GfCmd),
    /// Verma module computations.
    #[command(subcommand)]
    Verma(VermaCmd),
    /// Coherent-state differential operators and SLE martingales.
    #[command(subcommand)]
    Coherent(CoherentCmd),
    /// Two-hull partition functions.
    #[command(subcommand)]
    Wick(WickCmd),
    /// Chordal SLE simulation and Monte Carlo checks.
    #[command(subcommand)]
    Sle(SleCmd),
    /// Run the exact checks; exits non-zero if any fails.
    Selftest,
}

#[derive(Args, Debug, Clone)]
pub struct GermArgs {
    /// Germ literal `{"basepoint", "scale", "coeffs": {"m": "p/q"}, "truncation"}`,
    /// inline or `@file`. Without it the germ is formal.
    #[arg(long)]
    pub germ: Option<String>,
    /// Basepoint of the formal germ.
    #[arg(long, default_value = "origin")]
    pub basepoint: String,
    /// Truncation grading.
    #[arg(short = 'N', long = "truncation", default_value_t = 3)]
    pub n: usize,
}

#[derive(Subcommand, Debug)]
pub enum GfCmd {
    /// Expand `G_f` (or `G_f⁻¹`) in the PBW basis.
    Expand {
        #[command(flatten)]
        germ: GermArgs,
        #[arg(long)]
        inverse: bool,
    },
    /// `G_f⁻¹ L_m G_f` by the residue formula.
    Conjugate {
        #[command(flatten)]
        germ: GermArgs,
        #[arg(long, allow_hyphen_values = true)]
        m: i32,
    },
}

#[derive(Subcommand, Debug)]
pub enum VermaCmd {
    /// Level-2 singular vector `(−2L₋₂ + (κ/2)L₋₁²)x` at `(c_κ, h_κ)`.
    Singular {
        #[arg(long)]
        kappa: String,
        /// Add this to `h_κ` (a negative control).
        #[arg(long, allow_hyphen_values = true)]
        h_shift: Option<String>,
    },
    /// Shapovalov matrix at one level, as CSV.
    Shapovalov {
        #[arg(long)]
        level: u32,
        #[arg(long)]
        kappa: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        c: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        h: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum CoherentCmd {
    /// The operators `𝒫_n`, `𝒬_n`, `ℛ_n`, `𝒮_n` for a range of `n`.
    Generators {
        /// One of P, Q, R, S.
        #[arg(long)]
        rep: String,
        #[arg(long, allow_hyphen_values = true, default_value_t = -2)]
        from: i32,
        #[arg(long, allow_hyphen_values = true, default_value_t = 2)]
        to: i32,
        #[arg(short = 'N', long = "truncation", default_value_t = 3)]
        n: usize,
        /// Specialise `c`, `h` to `(c_κ, h_κ)`.
        #[arg(long)]
        kappa: Option<String>,
    },
    /// Basis of the martingale polynomials through a level.
    Martingales {
        #[arg(long)]
        kappa: String,
        #[arg(long, default_value_t = 3)]
        level: u32,
    },
}

#[derive(Subcommand, Debug)]
pub enum WickCmd {
    /// Truncated partition function `Z` for one of the hull families.
    Z {
        #[arg(long, default_value = "two-slits")]
        example: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(short = 'N', long = "truncation", default_value_t = 6)]
        n: usize,
        /// Central charge; formal when omitted.
        #[arg(long, allow_hyphen_values = true)]
        c: Option<String>,
    },
    /// `L(A, B)` in closed form and by quadrature.
    L {
        #[arg(long, default_value = "two-slits")]
        example: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Skip the numeric evaluation.
        #[arg(long)]
        closed_only: bool,
        /// Hull interpolation for the numeric value: b-linear, b-quadratic, a.
        #[arg(long, default_value = "b-linear")]
        interpolation: String,
    },
}

#[derive(Args, Debug, Clone)]
pub struct McArgs {
    #[arg(long, default_value = "8/3")]
    pub kappa: String,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum SleCmd {
    /// Driving function and coefficients `f_{−1}, f_{−2}, …` along paths.
    Simulate {
        #[command(flatten)]
        mc: McArgs,
        /// Number of tracked coefficients.
        #[arg(long, default_value_t = 4)]
        coeffs: usize,
        /// Keep every k-th time step.
        #[arg(long, default_value_t = 1)]
        every: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Monte Carlo test of the martingale basis and two controls.
    MartingaleTest {
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, default_value_t = 3)]
        level: u32,
        #[arg(long)]
        csv: bool,
    },
    /// Probability of avoiding a half disc, against `f_A′(0)^{h_κ}`.
    Restriction {
        #[arg(long, default_value_t = 3.0)]
        x0: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value = "8/3")]
        kappa: String,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 50.0)]
        radius: f64,
        #[arg(long, default_value_t = 25.0)]
        inner_radius: f64,
    },
    /// Monte Carlo mean of the partition-function martingale for a half disc.
    Partition {
        #[command(flatten)]
        mc: McArgs,
        #[arg(long, default_value_t = 3.0)]
        x0: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
    },
}

/// What a command produced.
pub enum Output {
    Json(Value),
    Csv(String),
}

/// Failure carrying a machine-readable tag.
#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub detail: Option<Value>,
}

impl Failure {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Failure { kind: kind.into(), message: message.into(), detail: None }
    }
}

impl From<virloe::Error> for Failure {
    fn from(e: virloe::Error) -> Self {
        Failure::new(e.kind(), e.to_string())
    }
}

fn config_argv(cli_args: &[String], path: &PathBuf) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::new("config", e.to_string()))?;
    let command = v["command"]
        .as_array()
        .ok_or_else(|| Failure::new("config", "\"command\" must be an array of words"))?
        .iter()
        .map(|w| w.as_str().map(String::from).ok_or_else(|| Failure::new("config", "command words must be strings")))
        .collect::<Result<Vec<_>, _>>()?;
    // keep the global flags given on the command line, drop --config itself
    let mut argv = vec![cli_args[0].clone()];
    let mut it = cli_args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            it.next();
        } else if !a.starts_with("--config=") {
            argv.push(a.clone());
        }
    }
    argv.extend(command);
    if let Some(args) = v.get("args") {
        let args = args.as_object().ok_or_else(|| Failure::new("config", "\"args\" must be an object"))?;
        for (k, val) in args {
            // short flags are the upper-case single letters (`-N`); `--r`, `--a`, … are long
            let flag = if k.len() == 1 && k.chars().all(|c| c.is_ascii_uppercase()) { format!("-{k}") } else { format!("--{}", k.replace('_', "-")) };
            match val {
                Value::Bool(true) => argv.push(flag),
                Value::Bool(false) | Value::Null => {}
                Value::String(s) => argv.extend([flag, s.clone()]),
                Value::Number(n) => argv.extend([flag, n.to_string()]),
                _ => return Err(Failure::new("config", format!("value of {k:?} must be a scalar"))),
            }
        }
    }
    Ok(argv)
}

fn emit(out: Output, path: Option<&PathBuf>) -> Result<(), Failure> {
    let text = match out {
        Output::Json(v) => serde_json::to_string_pretty(&v).expect("serialisable") + "\n",
        Output::Csv(s) => s,
    };
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::new("io", format!("{}: {e}", p.display()))),
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::new("io", e.to_string())),
            _ => Ok(()),
        },
    }
}

fn run(args: Vec<String>) -> Result<(), Failure> {
    let mut cli = Cli::try_parse_from(&args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            let _ = e.print();
            std::process::exit(0)
        }
        _ => Failure::new("usage", e.to_string().trim_end()),
    })?;
    if let Some(path) = cli.config.clone() {
        let argv = config_argv(&args, &path)?;
        cli = Cli::try_parse_from(&argv).map_err(|e| Failure::new("config", e.to_string().trim_end()))?;
    }
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| Failure::new("threads", e.to_string()))?;
    }
    let cmd = cli.cmd.ok_or_else(|| Failure::new("usage", "no subcommand given"))?;
    let out = match cmd {
        Cmd::Gf(c) => commands::gf(c)?,
        Cmd::Verma(c) => commands::verma(c)?,
        Cmd::Coherent(c) => commands::coherent(c)?,
        Cmd::Wick(c) => commands::wick(c)?,
        Cmd::Sle(c) => commands::sle(c)?,
        Cmd::Selftest => {
            let report = selftest::run();
            let pass = report["pass"].as_bool().unwrap_or(false);
            emit(Output::Json(report.clone()), cli.out.as_ref())?;
            if !pass {
                let mut f = Failure::new("selftest", "one or more checks failed");
                f.detail = Some(report["checks"].clone());
                return Err(f);
            }
            return Ok(());
        }
    };
    emit(out, cli.out.as_ref())
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut rec = json!({ "error": { "kind": f.kind, "message": f.message } });
            if let Some(d) = f.detail {
                rec["error"]["detail"] = d;
            }
            eprintln!("{}", serde_json::to_string(&rec).expect("serialisable"));
            ExitCode::FAILURE
        }
    }
}
