//! Command-line front end. Every JSON artifact is an envelope carrying the
//! schema version, the resolved parameter pack and the flat configuration
//! that produced it; floats are written with 17 significant digits.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::acceptance::{self, Fault, SuiteConfig};
use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::hankel::{check_transform, HankelPlan, Packets};
use crate::linprop::{channel_limit, evolve_linear, kernel_channel, ChannelOptions, KernelChannelOptions};
use crate::modulation::{fit_state, simulate, FitOptions, ModState, ModSystem, SimulateConfig};
use crate::nonlinear::{evolve, two_bubble_experiment, EvolveConfig, Mode, TwoBubbleConfig};
use crate::params::{derive_params, Params};
use crate::projection::{as_value, report, InteriorConvention};
use crate::radialgrid::{fmt17, RadialGrid, StatePair};

/// Version tag of every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable bounding sweep parallelism.
pub const THREADS_ENV: &str = "CHANNELKIT_THREADS";

#[derive(Parser, Debug)]
#[command(name = "channelkit", version, about = "Exterior energy channels and modulation dynamics for the inverse-square wave equation")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Print the derived constant pack.
    Params(ParamsArgs),
    /// Ground-state constants and optional profile CSV.
    Groundstate(GroundstateArgs),
    /// Isometry, inversion and diagonalization of the Hankel transform.
    HankelCheck(HankelArgs),
    /// Propagate a data pair with the free flow.
    EvolveLinear(EvolveLinearArgs),
    /// Extrapolated exterior-energy channel of a data pair.
    Channel(ChannelArgs),
    /// Projection norms and channel values at one radius.
    Project(ProjectArgs),
    /// Fit soliton scales and velocity coefficients to a data pair.
    Fit(FitArgs),
    /// Integrate the modulation ODE.
    Modsim(ModsimArgs),
    /// Run the nonlinear radial solver.
    EvolveNonlinear(EvolveNonlinearArgs),
    /// Compare PDE-extracted and ODE scales for a soliton pair.
    TwoBubble(TwoBubbleArgs),
    /// Run the acceptance criteria.
    Acceptance(AcceptanceArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Params(_) => "params",
            Command::Groundstate(_) => "groundstate",
            Command::HankelCheck(_) => "hankel-check",
            Command::EvolveLinear(_) => "evolve-linear",
            Command::Channel(_) => "channel",
            Command::Project(_) => "project",
            Command::Fit(_) => "fit",
            Command::Modsim(_) => "modsim",
            Command::EvolveNonlinear(_) => "evolve-nonlinear",
            Command::TwoBubble(_) => "two-bubble",
            Command::Acceptance(_) => "acceptance",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct Pack {
    /// Dimension N >= 3.
    #[arg(long)]
    pub dim: usize,
    /// Potential strength a > -(N-2)²/4.
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
}

impl Pack {
    fn params(&self) -> Result<Params> {
        derive_params(self.dim, self.a)
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ParamsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    /// Print the JSON envelope instead of `name = value` lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GroundstateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV with columns r,W,LambdaW,AW on a log grid.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-3)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1e3)]
    pub r_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct HankelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 0.05)]
    pub dr: f64,
    #[arg(long, default_value_t = 800)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvolveLinearArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    /// Pair CSV with columns r,u0,u1.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub t: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ChannelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    /// Pair CSV; omit when using --kernel-exponent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub radius: f64,
    /// Run the kernel-data experiment `(0, r^e)` outside the radius instead.
    #[arg(long, allow_negative_numbers = true)]
    pub kernel_exponent: Option<f64>,
    /// Sample times as multiples of the support radius.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<f64>>,
    #[arg(long)]
    pub fit_terms: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionArg {
    Frozen,
    AsGiven,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ProjectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Frozen)]
    pub convention: ConventionArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    #[arg(long)]
    pub data: PathBuf,
    /// Signs, e.g. `+,-`.
    #[arg(long, value_delimiter = ',')]
    pub signs: Vec<String>,
    /// Initial scales, decreasing.
    #[arg(long, value_delimiter = ',')]
    pub mu: Vec<f64>,
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ModsimArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub signs: Vec<String>,
    /// Initial velocities; zero when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub betas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.9)]
    pub gamma_exit: f64,
    #[arg(long, default_value_t = 1e3)]
    pub t_max: f64,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Nonlinear,
    Linearized,
    Free,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvolveNonlinearArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    /// Pair CSV on a grid `r_i = i dr`; the ground state `W_(λ)` at rest when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Scale of the ground state (initial data and linearization point).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Nonlinear)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 0.02)]
    pub dr: f64,
    #[arg(long, default_value_t = 40.0)]
    pub r_max: f64,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub sponge_fraction: f64,
    #[arg(long)]
    pub snapshot_every: Option<f64>,
    /// Output directory for `t_<index>.csv` and `meta.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TwoBubbleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub pack: Pack,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub signs: Vec<String>,
    /// Defaults to `0.75 λ_J`.
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, default_value_t = 30)]
    pub samples: usize,
    #[arg(long)]
    pub dr: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AcceptanceArgs {
    /// Criterion numbers, names or groups.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    #[arg(long, default_value_t = SuiteConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = SuiteConfig::default().mixed_pairs)]
    pub mixed_pairs: usize,
    /// Fault injection hook: `corrupt-coefficients`.
    #[arg(long)]
    pub inject_fault: Option<String>,
    /// Summary CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// The artifact envelope.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    params: Option<&'a Params>,
    config: &'a Value,
    result: T,
}

/// Pretty JSON with floats pinned to 17 significant digits.
struct Json17<'a>(PrettyFormatter<'a>);

impl Formatter for Json17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt17(v).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        w.write_all(fmt17(v as f64).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes with the pinned float format.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Json17(PrettyFormatter::new()));
    v.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Writes to `path`, or stdout when absent. Files are written whole through
/// a temporary sibling so failures leave no partial artifact.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => match io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn envelope<T: Serialize>(command: &str, params: Option<&Params>, config: &Value, result: T) -> Result<String> {
    to_json(&Envelope { schema_version: SCHEMA_VERSION, command, params, config, result })
}

fn parse_signs(v: &[String]) -> Result<Vec<f64>> {
    v.iter()
        .map(|s| match s.trim() {
            "+" | "+1" | "1" => Ok(1.0),
            "-" | "-1" => Ok(-1.0),
            other => Err(Error::Validation(format!("sign must be + or -, got {other}"))),
        })
        .collect()
}

fn read_pair(dim: usize, path: &Path) -> Result<StatePair> {
    let f = fs::File::open(path).map_err(|e| Error::Validation(format!("cannot open {}: {e}", path.display())))?;
    StatePair::read_csv(dim, io::BufReader::new(f))
}

/// The flat config of a command: its arguments under their flag names.
fn config_of(cmd: &Command) -> Value {
    match serde_json::to_value(cmd) {
        Ok(Value::Object(m)) => m.into_iter().next().map(|(_, v)| v).unwrap_or(Value::Null),
        _ => Value::Null,
    }
}

/// Turns a flat JSON object into command-line tokens: `{"dim": 3}` becomes
/// `--dim 3`, arrays are comma-joined, `true` is a bare flag and `false` or
/// `null` is omitted.
pub fn config_tokens(v: &Value) -> Result<Vec<String>> {
    let obj = v.as_object().ok_or_else(|| Error::Validation("config must be a flat JSON object".into()))?;
    let scalar = |x: &Value| -> Result<String> {
        match x {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(Error::Validation(format!("config values must be flat, got {x}"))),
        }
    };
    let mut out = Vec::new();
    for (k, x) in obj {
        match x {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(format!("--{k}")),
            Value::Array(items) => {
                if !items.is_empty() {
                    out.push(format!("--{k}"));
                    out.push(items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(","));
                }
            }
            other => {
                out.push(format!("--{k}"));
                out.push(scalar(other)?);
            }
        }
    }
    Ok(out)
}

/// Splices `--config file.json` into the argument list right after the
/// subcommand, so explicit flags still win.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(i) = args.iter().position(|a| a == "--config") else {
        return Ok(args);
    };
    let path = args.get(i + 1).ok_or_else(|| Error::Validation("--config needs a file".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read config {path:?}: {e}")))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Validation(format!("config is not JSON: {e}")))?;
    let tokens = config_tokens(&v)?;
    let mut rest: Vec<OsString> = args[..i].iter().chain(&args[i + 2..]).cloned().collect();
    let sub = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1);
    let at = sub.map(|p| p + 1).unwrap_or(rest.len());
    rest.splice(at..at, tokens.into_iter().map(OsString::from));
    Ok(rest)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::Validation(format!("{THREADS_ENV} must be a positive integer, got {v}")))?;
        if n == 0 {
            return Err(Error::Validation(format!("{THREADS_ENV} must be positive")));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on validation errors, 2 on numerical
/// failures or failing acceptance criteria.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let parsed = expand_config(args).and_then(|a| {
        Cli::try_parse_from(a).map_err(|e| match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                let _ = e.print();
                Error::Validation(String::new())
            }
            _ => Error::Validation(e.to_string().lines().next().unwrap_or("bad arguments").trim_start_matches("error: ").to_string()),
        })
    });
    let cli = match parsed {
        Ok(c) => c,
        Err(Error::Validation(msg)) if msg.is_empty() => return 0,
        Err(e) => return report_error(&e),
    };
    match configure_threads().and_then(|_| dispatch(&cli.command)) {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

/// One machine-parsable JSON line on stderr.
fn report_error(e: &Error) -> i32 {
    let line = match e {
        Error::Numerical { module, reason } => serde_json::json!({"error": "numerical", "module": module, "reason": reason}),
        Error::Tail { .. } => serde_json::json!({"error": "numerical", "module": "quadrature", "reason": e.to_string()}),
        Error::Validation(msg) => serde_json::json!({"error": "validation", "reason": msg}),
        _ => serde_json::json!({"error": "validation", "reason": e.to_string()}),
    };
    eprintln!("{line}");
    e.exit_code()
}

fn dispatch(cmd: &Command) -> Result<i32> {
    let config = config_of(cmd);
    let name = cmd.name();
    match cmd {
        Command::Params(a) => {
            let p = a.pack.params()?;
            if a.json {
                emit(None, &envelope(name, Some(&p), &config, p)?)?;
            } else {
                let v = serde_json::to_value(p)?;
                let mut text = String::new();
                for (k, x) in v.as_object().into_iter().flatten() {
                    let shown = match x.as_f64() {
                        Some(f) if x.is_f64() => fmt17(f),
                        _ => x.to_string(),
                    };
                    text.push_str(&format!("{k} = {shown}\n"));
                }
                emit(None, &text)?;
            }
        }
        Command::Groundstate(a) => {
            let p = a.pack.params()?;
            let gs = GroundState::new(p);
            let c = gs.constants()?;
            let profile = match &a.profile {
                Some(_) => {
                    let grid = RadialGrid::log_spaced(p.n, a.r_min, a.r_max, a.points)?;
                    Some(csv_bytes(|buf| {
                        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
                        w.write_record(["r", "W", "LambdaW", "AW"])?;
                        for &r in grid.nodes() {
                            w.write_record([fmt17(r), fmt17(gs.w(r)), fmt17(gs.lambda_w(r)), fmt17(gs.a_w(r))])?;
                        }
                        w.flush()?;
                        Ok(())
                    })?)
                }
                None => None,
            };
            let text = envelope(name, Some(&p), &config, c)?;
            if let (Some(path), Some(bytes)) = (&a.profile, profile) {
                write_atomic(path, &bytes)?;
            }
            emit(a.out.as_deref(), &text)?;
        }
        Command::HankelCheck(a) => {
            let p = a.pack.params()?;
            let grid = RadialGrid::uniform(p.n, a.dr, a.points)?;
            let plan = HankelPlan::for_grid(&p, &grid)?;
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let span = a.dr * a.points as f64;
            let mut checks = Vec::new();
            for _ in 0..a.count {
                let f = Packets::random(&mut rng, 3, 0.15 * span, 0.35 * span);
                let g = Packets::random(&mut rng, 3, 0.15 * span, 0.35 * span);
                checks.push(check_transform(&plan, &f, &g)?);
            }
            let worst = |k: fn(&crate::hankel::TransformCheck) -> f64| checks.iter().map(k).fold(0.0, f64::max);
            let result = serde_json::json!({
                "fields": checks.len(),
                "max_isometry": worst(|c| c.isometry),
                "max_round_trip": worst(|c| c.round_trip),
                "max_diagonalization": worst(|c| c.diagonalization),
                "max_self_adjoint": worst(|c| c.self_adjoint),
                "pass": worst(|c| c.isometry.max(c.round_trip)) <= 1e-3 && worst(|c| c.diagonalization) <= 1e-2,
                "checks": checks,
            });
            emit(a.out.as_deref(), &envelope(name, Some(&p), &config, result)?)?;
        }
        Command::EvolveLinear(a) => {
            let p = a.pack.params()?;
            let s = read_pair(p.n, &a.data)?;
            let out = evolve_linear(&p, &s, a.t)?;
            write_atomic(&a.out, &csv_bytes(|b| out.write_csv(b))?)?;
        }
        Command::Channel(a) => {
            let p = a.pack.params()?;
            let text = if let Some(e) = a.kernel_exponent {
                let mut opts = KernelChannelOptions::default();
                if let Some(s) = &a.schedule {
                    opts.schedule = s.clone();
                }
                if let Some(t) = a.fit_terms {
                    opts.fit_terms = t;
                }
                let rep = kernel_channel(&p, e, a.radius, &opts)?;
                envelope(name, Some(&p), &config, serde_json::json!({"report": rep, "as_f": 0.0, "as_g": 0.0}))?
            } else {
                let path = a.data.as_ref().ok_or_else(|| Error::Validation("channel needs --data or --kernel-exponent".into()))?;
                let s = read_pair(p.n, path)?;
                let mut opts = ChannelOptions::default();
                if let Some(sch) = &a.schedule {
                    opts.schedule = sch.clone();
                }
                if let Some(t) = a.fit_terms {
                    opts.fit_terms = t;
                }
                let rep = channel_limit(&p, &s, a.radius, &opts)?;
                let (as_f, as_g) = as_value(&p, &s, a.radius, InteriorConvention::Frozen)?;
                let ratio = rep.asymptotic_energy / (as_f + as_g);
                envelope(name, Some(&p), &config, serde_json::json!({"report": rep, "as_f": as_f, "as_g": as_g, "ratio_to_as": ratio}))?
            };
            emit(a.out.as_deref(), &text)?;
        }
        Command::Project(a) => {
            let p = a.pack.params()?;
            let s = read_pair(p.n, &a.data)?;
            let conv = match a.convention {
                ConventionArg::Frozen => InteriorConvention::Frozen,
                ConventionArg::AsGiven => InteriorConvention::AsGiven,
            };
            let rep = report(&p, &s, a.radius, conv)?;
            emit(a.out.as_deref(), &envelope(name, Some(&p), &config, rep)?)?;
        }
        Command::Fit(a) => {
            let p = a.pack.params()?;
            let s = read_pair(p.n, &a.data)?;
            let iota = parse_signs(&a.signs)?;
            let gs = GroundState::new(p);
            let rep = fit_state(&gs, &s, &iota, &a.mu, &FitOptions { tol: a.tol, ..Default::default() })?;
            emit(a.out.as_deref(), &envelope(name, Some(&p), &config, rep)?)?;
        }
        Command::Modsim(a) => {
            let p = a.pack.params()?;
            let iota = parse_signs(&a.signs)?;
            let betas = a.betas.clone().unwrap_or_else(|| vec![0.0; a.lambdas.len()]);
            let s0 = ModState::new(a.lambdas.clone(), betas, iota)?;
            let sys = ModSystem::new(&GroundState::new(p))?;
            let cfg = SimulateConfig { t_max: a.t_max, dt: a.dt, gamma_ceiling: a.gamma_exit, record_every: a.record_every, ..Default::default() };
            let tr = simulate(&sys, &s0, &cfg)?;
            write_atomic(&a.out, &csv_bytes(|b| tr.write_csv(b))?)?;
            let summary = serde_json::json!({
                "exit_time": tr.exit_time,
                "halted": tr.halted,
                "hamiltonian_drift": tr.hamiltonian_drift(),
                "system": sys,
                "final_state": tr.last(),
            });
            emit(None, &envelope(name, Some(&p), &config, summary)?)?;
        }
        Command::EvolveNonlinear(a) => {
            let p = a.pack.params()?;
            let mode = match a.mode {
                ModeArg::Nonlinear => Mode::Nonlinear,
                ModeArg::Linearized => Mode::LinearizedAtW { lambda: a.lambda },
                ModeArg::Free => Mode::Free,
            };
            let mut cfg = EvolveConfig {
                t_final: a.t_final,
                dt: a.dt,
                dr: a.dr,
                r_max: a.r_max,
                mode,
                sponge_fraction: a.sponge_fraction,
                snapshot_every: a.snapshot_every,
                ..Default::default()
            };
            let s0 = match &a.data {
                Some(path) => {
                    let s = read_pair(p.n, path)?;
                    cfg.dr = s.grid().min_spacing();
                    cfg.r_max = s.grid().r_max();
                    s
                }
                None => {
                    let gs = GroundState::new(p);
                    let grid = cfg.grid(p.n)?;
                    StatePair::from_fns(&grid, |r| gs.w_scaled(r, a.lambda), |_| 0.0)
                }
            };
            let tr = evolve(&p, &s0, &cfg)?;
            let files: Vec<(String, Vec<u8>)> = tr
                .snapshots
                .iter()
                .enumerate()
                .map(|(i, (_, s))| Ok((format!("t_{i}.csv"), csv_bytes(|b| s.write_csv(b))?)))
                .collect::<Result<_>>()?;
            let meta = serde_json::json!({
                "times": tr.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(),
                "files": files.iter().map(|f| f.0.clone()).collect::<Vec<_>>(),
                "energy": tr.energy,
                "energy_drift": tr.energy_drift(),
                "halted": tr.halted,
                "dt": cfg.time_step(),
            });
            let meta = envelope(name, Some(&p), &config, meta)?;
            fs::create_dir_all(&a.out)?;
            for (f, bytes) in &files {
                write_atomic(&a.out.join(f), bytes)?;
            }
            write_atomic(&a.out.join("meta.json"), meta.as_bytes())?;
        }
        Command::TwoBubble(a) => {
            let p = a.pack.params()?;
            let iota = parse_signs(&a.signs)?;
            let mut cfg = TwoBubbleConfig::new(a.lambdas.clone(), iota);
            if let Some(t) = a.t_final {
                cfg.t_final = t;
            }
            cfg.samples = a.samples;
            cfg.dr = a.dr;
            let rep = two_bubble_experiment(&p, &cfg)?;
            emit(a.out.as_deref(), &envelope(name, Some(&p), &config, rep)?)?;
        }
        Command::Acceptance(a) => {
            let fault = a.inject_fault.as_deref().map(Fault::parse).transpose()?;
            let cfg = SuiteConfig { seed: a.seed, only: a.only.clone(), fault, mixed_pairs: a.mixed_pairs };
            acceptance::selected(&cfg)?;
            let mut outcomes = Vec::new();
            for id in acceptance::selected(&cfg)? {
                let o = acceptance::run_one(id, &cfg);
                emit(None, &format!("{}\n", o.line()))?;
                outcomes.push(o);
            }
            if let Some(path) = &a.out {
                write_atomic(path, &csv_bytes(|b| acceptance::write_csv(&outcomes, b))?)?;
            }
            let failed = outcomes.iter().filter(|o| !o.pass).count();
            emit(None, &format!("acceptance: {}/{} pass\n", outcomes.len() - failed, outcomes.len()))?;
            return Ok(if failed == 0 { 0 } else { 2 });
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_pinned() {
        let s = to_json(&serde_json::json!({"x": 0.1, "y": [1.0, -2.5e-300], "n": 3})).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-2.5000000000000000e-300"));
        assert!(s.contains("\"n\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn config_round_trips_through_tokens() {
        let args = ["channelkit", "modsim", "--dim", "3", "--a", "2", "--lambdas", "1,0.1", "--signs", "+,-", "--out", "x.csv"];
        let cli = Cli::try_parse_from(args).unwrap();
        let cfg = config_of(&cli.command);
        let mut again = vec!["channelkit".to_string(), "modsim".to_string()];
        again.extend(config_tokens(&cfg).unwrap());
        let cli2 = Cli::try_parse_from(&again).unwrap();
        assert_eq!(config_of(&cli2.command), cfg);
        assert_eq!(cfg["lambdas"], serde_json::json!([1.0, 0.1]));
    }

    #[test]
    fn later_flags_override_earlier_ones() {
        let cli = Cli::try_parse_from(["channelkit", "params", "--dim", "5", "--a", "1", "--dim", "3"]).unwrap();
        match cli.command {
            Command::Params(a) => assert_eq!(a.pack.dim, 3),
            _ => unreachable!(),
        }
    }

    #[test]
    fn signs_parse() {
        assert_eq!(parse_signs(&["+".into(), "-".into()]).unwrap(), vec![1.0, -1.0]);
        assert!(parse_signs(&["x".into()]).is_err());
    }
}
