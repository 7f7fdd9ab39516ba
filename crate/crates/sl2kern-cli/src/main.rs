//! `sl2kern`: batch driver for the sl2kern library.
//!
//! Every subcommand reads its parameters from `--config FILE` (a JSON object
//! `{"common": {...}, "params": {...}}`), from flags, or both; flags win. The
//! primary result goes to `--output` or stdout, and a run manifest goes to
//! `--manifest`, `<output>.manifest.json`, or stderr.

mod commands;
mod error;
mod params;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use sl2kern::experiments::{KinvConfig, TheoremConfig};
use sl2kern::numerics::QuadratureSpec;

use commands::Outcome;
use error::CliError;
use params::*;

/// Environment variable for the default worker count.
const THREADS_ENV: &str = "SL2KERN_THREADS";

#[derive(Parser)]
#[command(
    name = "sl2kern",
    version,
    about = "Automorphic kernel computations on SL2(R)"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Serialize, Default)]
struct GlobalFlags {
    /// JSON config file {"common": {...}, "params": {...}}
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Seed for sampled checks
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Relative quadrature tolerance
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_tol: Option<f64>,
    /// Absolute quadrature tolerance
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_tol: Option<f64>,
    /// Gauss-Legendre order per panel
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    panel_order: Option<usize>,
    /// Panel budget of one adaptive integral
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_panels: Option<usize>,
    /// Primary output file (default stdout)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
    /// Worker threads (default $SL2KERN_THREADS, then all cores)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threads: Option<usize>,
    /// Manifest file (default <output>.manifest.json, or stderr)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Convert one group element between charts
    Convert(ConvertFlags),
    /// List Γ₀(q) elements in a ball or entry box
    Enumerate(LatticeFlags),
    /// Count Γ₀(q) elements split by b = 0, c = 0
    Count(LatticeFlags),
    /// Evaluate φ_{ℓ₁,ℓ₂}(a_u, ν)
    Harmonic(HarmonicFlags),
    /// Spectral transforms of a test field on a (ν, ℓ) grid
    TransformTable(TransformFlags),
    /// 𝒦F(τ₁, τ₂) with its main term (config only)
    KernelSum,
    /// ⟨α₁|ΔF|α₂⟩ for point functionals (config only)
    Discrepancy,
    /// The bilinear discrepancy experiment (config only)
    Experiment,
    /// The K-invariant Hecke-twisted experiment (config only)
    KinvExperiment,
    /// Build and certify majorant kernels
    Majorant(MajorantFlags),
    /// Run a verification suite
    Verify(VerifyFlags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Convert(_) => "convert",
            Command::Enumerate(_) => "enumerate",
            Command::Count(_) => "count",
            Command::Harmonic(_) => "harmonic",
            Command::TransformTable(_) => "transform-table",
            Command::KernelSum => "kernel-sum",
            Command::Discrepancy => "discrepancy",
            Command::Experiment => "experiment",
            Command::KinvExperiment => "kinv-experiment",
            Command::Majorant(_) => "majorant",
            Command::Verify(_) => "verify",
        }
    }

    fn flags(&self) -> Result<Value, CliError> {
        Ok(match self {
            Command::Convert(f) => serde_json::to_value(f)?,
            Command::Enumerate(f) | Command::Count(f) => serde_json::to_value(f)?,
            Command::Harmonic(f) => serde_json::to_value(f)?,
            Command::TransformTable(f) => serde_json::to_value(f)?,
            Command::Majorant(f) => serde_json::to_value(f)?,
            Command::Verify(f) => serde_json::to_value(f)?,
            _ => json!({}),
        })
    }
}

#[derive(Args, Serialize)]
struct ConvertFlags {
    /// a,b,c,d with ad − bc = 1
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<Vec<f64>>,
    /// x,y,theta
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    iwasawa: Option<Vec<f64>>,
    /// phi,u,vartheta
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    cartan: Option<Vec<f64>>,
    /// r1,c,r2,sign
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bruhat: Option<Vec<f64>>,
}

#[derive(Args, Serialize)]
struct LatticeFlags {
    /// Level of Γ₀(q)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<u64>,
    /// Ball u_R(γ) ≤ U
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ball_u: Option<f64>,
    /// Skew R of the ball (default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    /// Entry box bounds of |a|,|b|,|c|,|d|
    #[arg(long = "box", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    entry_box: Option<Vec<f64>>,
}

#[derive(Args, Serialize)]
struct HarmonicFlags {
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l1: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l2: Option<i32>,
    /// Re ν
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    /// Im ν
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nu_im: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    u: Option<f64>,
}

#[derive(Args, Serialize)]
struct TransformFlags {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<FieldKind>,
    /// Z of the shell
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    /// δ of the ball or the weight
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    /// A,C,D of the weight
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    scales: Option<Vec<f64>>,
    /// Smoothness order of the weight (default 10)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<u32>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nu_kind: Option<NuKind>,
    /// t for ν = it, ν for exceptional, k for discrete
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    nus: Option<Vec<f64>>,
    /// ℓ₁ values
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ls: Option<Vec<i32>>,
    /// ℓ₂ values (default ℓ₂ = ℓ₁)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l2s: Option<Vec<i32>>,
    /// Panels of the type projection (default 48)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    panels: Option<usize>,
}

#[derive(Args, Serialize)]
struct MajorantFlags {
    /// Z values of k_Z, or the Z of the exceptional kernel
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<Vec<f64>>,
    /// Build the exceptional kernel
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    exceptional: bool,
    /// Angular cutoff L (default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<u32>,
    /// Margin η of the exceptional subgrid (default 0.05)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    /// Widening C of the angular cutoff (default 1)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    widening: Option<f64>,
    /// Exceptional ν values, or t for ν = it with k_Z
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    nus: Option<Vec<f64>>,
    /// CSV file for the transform table
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<String>,
}

#[derive(Args, Serialize)]
struct VerifyFlags {
    /// core | harmonics | kernels | majorants | all
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    suite: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    common: Common,
    #[serde(default = "empty")]
    params: Value,
}

fn empty() -> Value {
    json!({})
}

/// The validated inputs of one run.
struct Run {
    command: &'static str,
    common: Common,
    params: Value,
}

impl Run {
    fn load(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.global.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<ConfigFile>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => ConfigFile {
                common: Common::default(),
                params: json!({}),
            },
        };
        let flags: Common = serde_json::from_value(serde_json::to_value(&cli.global)?)?;
        let common = file.common.merged(&flags);
        let Value::Object(mut params) = file.params else {
            return Err(CliError::Config("params must be a JSON object".into()));
        };
        if let Value::Object(f) = cli.command.flags()? {
            params.extend(f);
        }
        Ok(Run {
            command: cli.command.name(),
            common,
            params: Value::Object(params),
        })
    }

    fn params<P: DeserializeOwned + Serialize>(&mut self) -> Result<P, CliError> {
        let p: P = serde_json::from_value(self.params.clone())
            .map_err(|e| CliError::Config(format!("{} params: {e}", self.command)))?;
        // canonical form, defaults filled in
        self.params = serde_json::to_value(&p)?;
        Ok(p)
    }

    fn spec(&self) -> Result<QuadratureSpec, CliError> {
        let d = QuadratureSpec::default();
        let c = &self.common;
        let s = QuadratureSpec {
            rel_tol: c.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: c.abs_tol.unwrap_or(d.abs_tol),
            max_panels: c.max_panels.unwrap_or(d.max_panels),
            panel_order: c.panel_order.unwrap_or(d.panel_order),
        };
        s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s)
    }

    fn overrides_spec(&self) -> bool {
        let c = &self.common;
        c.rel_tol.is_some()
            || c.abs_tol.is_some()
            || c.max_panels.is_some()
            || c.panel_order.is_some()
    }

    fn canonical(&self) -> Value {
        // output paths do not change results
        let c = &self.common;
        json!({
            "command": self.command,
            "common": { "seed": c.seed, "rel_tol": c.rel_tol, "abs_tol": c.abs_tol,
                        "panel_order": c.panel_order, "max_panels": c.max_panels },
            "params": self.params,
        })
    }
}

fn execute(cli: &Cli, run: &mut Run) -> Result<(Outcome, Option<String>), CliError> {
    // params are validated before the quadrature settings
    let out = match &cli.command {
        Command::Convert(_) => commands::convert(&run.params::<ConvertParams>()?)?,
        Command::Enumerate(_) => commands::enumerate(&run.params::<LatticeParams>()?)?,
        Command::Count(_) => commands::count(&run.params::<LatticeParams>()?)?,
        Command::Harmonic(_) => {
            let p = run.params::<HarmonicParams>()?;
            commands::harmonic(&p, &run.spec()?)?
        }
        Command::TransformTable(_) => {
            let p = run.params::<TransformParams>()?;
            commands::transform_table(&p, &run.spec()?)?
        }
        Command::KernelSum => {
            let p = run.params::<KernelSumParams>()?;
            commands::kernel_sum(&p, &run.spec()?)?
        }
        Command::Discrepancy => {
            let p = run.params::<DiscrepancyParams>()?;
            commands::discrepancy(&p, &run.spec()?)?
        }
        Command::Experiment => {
            let p = run.params::<TheoremConfig>()?;
            commands::experiment(&p, &run.spec()?)?
        }
        Command::KinvExperiment => {
            let p = run.params::<KinvConfig>()?;
            commands::kinv_experiment(&p, &run.spec()?)?
        }
        Command::Majorant(_) => {
            let p = run.params::<MajorantParams>()?;
            return commands::majorant(&p, &run.spec()?);
        }
        Command::Verify(_) => {
            let p = run.params::<VerifyParams>()?;
            let s = if run.overrides_spec() {
                Some(run.spec()?)
            } else {
                None
            };
            commands::verify(&p, run.common.seed, s)?
        }
    };
    Ok((out, None))
}

fn write_csv(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(e.to_string()))
}

fn render(out: &Outcome, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json if out.lines => {
            let mut s = Vec::new();
            for r in out.json.as_array().into_iter().flatten() {
                serde_json::to_writer(&mut s, r)?;
                s.push(b'\n');
            }
            Ok(s)
        }
        Format::Json => {
            let mut s = serde_json::to_vec_pretty(&out.json)?;
            s.push(b'\n');
            Ok(s)
        }
        Format::Csv => match &out.csv {
            Some((h, rows)) => write_csv(h, rows),
            None => Err(CliError::Config("this command has no CSV form".into())),
        },
    }
}

fn emit(path: Option<&str>, bytes: &[u8], fallback: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => fallback.write_all(bytes)?,
    }
    Ok(())
}

fn configure_threads(requested: Option<usize>) -> Result<usize, CliError> {
    let n = match requested {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v} is not a count")))?,
            Err(_) => 0,
        },
    };
    // a second call in one process fails harmlessly
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(rayon::current_num_threads())
}

fn manifest(
    run: &Run,
    spec: Option<QuadratureSpec>,
    threads: usize,
    seconds: f64,
    code: i32,
    extra: &Value,
) -> Value {
    let canonical = run.canonical();
    let hash = Sha256::digest(serde_json::to_vec(&canonical).unwrap_or_default());
    let mut constants = Map::new();
    constants.insert("C_maj".into(), json!(sl2kern::majorants::FROZEN_C_MAJ));
    constants.insert("c_maj".into(), json!(sl2kern::majorants::FROZEN_C_SUPPORT));
    constants.insert("kappa_B".into(), json!(sl2kern::numerics::KAPPA_BRUHAT));
    constants.insert(
        "envelope_C".into(),
        json!(sl2kern::verify::FROZEN_ENVELOPE_C),
    );
    constants.insert(
        "peak_bracket".into(),
        json!(sl2kern::verify::FROZEN_PEAK_BRACKET),
    );
    constants.insert("c0".into(), extra.get("c0").cloned().unwrap_or(Value::Null));
    json!({
        "command": run.command,
        "version": sl2kern::VERSION,
        "config_sha256": format!("{hash:x}"),
        "config": canonical,
        "seed": run.common.seed,
        "quadrature": spec,
        "threads": threads,
        "wall_seconds": seconds,
        "exit_code": code,
        "constants": constants,
        "extra": extra,
    })
}

fn real_main() -> Result<i32, CliError> {
    let cli = Cli::parse();
    let started = Instant::now();
    let mut run = Run::load(&cli)?;
    let threads = configure_threads(run.common.threads)?;
    let default_format = if run.command == "transform-table" {
        Format::Csv
    } else {
        Format::Json
    };
    let format = run.common.format.unwrap_or(default_format);
    let (out, table) = execute(&cli, &mut run)?;
    let bytes = render(&out, format)?;
    emit(run.common.output.as_deref(), &bytes, &mut std::io::stdout())?;
    if let (Some(path), Some((h, rows))) = (table, &out.csv) {
        std::fs::write(path, write_csv(h, rows)?)?;
    }
    let code = if out.failed { 2 } else { 0 };
    let spec = run.spec().ok();
    let m = manifest(
        &run,
        spec,
        threads,
        started.elapsed().as_secs_f64(),
        code,
        &out.extra,
    );
    let mut mbytes = serde_json::to_vec_pretty(&m)?;
    mbytes.push(b'\n');
    let mpath = run.common.manifest.clone().or_else(|| {
        run.common
            .output
            .as_ref()
            .map(|o| format!("{o}.manifest.json"))
    });
    emit(mpath.as_deref(), &mbytes, &mut std::io::stderr())?;
    Ok(code)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("sl2kern: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
