use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use refstd_cli::api::{self, ApiError, ApiResult};
use refstd_cli::server;
use refstd_core::lcm::EtaSource;
use refstd_core::sweep::{self, OtherCovariance, SweepAxis, SweepParam, DEFAULT_POINTS};
use refstd_core::{verify, BoundsContext, ExportFormat, PopulationSpec, Quantity};

/// Accuracy deviations of diagnostic test evaluation methods without a gold standard.
#[derive(Parser)]
#[command(name = "refstd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate methods at one population and print one JSON record per method.
    Compute {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        methods: MethodArgs,
    },
    /// Sweep one parameter and export the deviation curves.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        axis: AxisArgs,
        #[command(flatten)]
        methods: MethodArgs,
        #[arg(long, default_value = "csv", value_parser = enum_arg::<ExportFormat>)]
        format: ExportFormat,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate crossings between method curves along a sweep.
    Crossovers {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        axis: AxisArgs,
        #[command(flatten)]
        methods: MethodArgs,
        /// delta_se, delta_sp, abs_delta_se or abs_delta_sp; all when omitted.
        #[arg(long, value_parser = enum_arg::<Quantity>)]
        quantity: Option<Quantity>,
    },
    /// Admissible covariance intervals for the spec's accuracies and prevalence.
    Bounds {
        #[command(flatten)]
        spec: SpecArgs,
        /// basic_joint, lcm_hci or lcm_hci_bar.
        #[arg(long, default_value = "basic_joint", value_parser = enum_arg::<BoundsContext>)]
        context: BoundsContext,
    },
    /// Check closed forms against exhaustive enumeration on random populations.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Read a CSV or JSON sweep export and write it in the requested format.
    Import {
        /// Input file, or - for stdin.
        input: PathBuf,
        #[arg(long, default_value = "json", value_parser = enum_arg::<ExportFormat>)]
        format: ExportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API and, optionally, the explorer UI bundle.
    Serve {
        #[arg(long, env = "REFSTD_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// Population parameters; each defaults to the baseline setting.
#[derive(Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 0.9)]
    se_x: f64,
    #[arg(long, default_value_t = 0.9)]
    sp_x: f64,
    #[arg(long, default_value_t = 0.6)]
    se_z1: f64,
    #[arg(long, default_value_t = 0.95)]
    sp_z1: f64,
    #[arg(long, default_value_t = 0.6)]
    se_z2: f64,
    #[arg(long, default_value_t = 0.95)]
    sp_z2: f64,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    xi: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    eps: f64,
}

impl SpecArgs {
    fn spec(&self) -> PopulationSpec {
        PopulationSpec {
            se_x: self.se_x,
            sp_x: self.sp_x,
            se_z1: self.se_z1,
            sp_z1: self.sp_z1,
            se_z2: self.se_z2,
            sp_z2: self.sp_z2,
            eta: self.eta,
            xi: self.xi,
            eps: self.eps,
        }
    }
}

#[derive(Args)]
struct MethodArgs {
    /// Comma-separated method tags, or "all". Defaults to IGS,CRS_A,CRS_O,DA.
    #[arg(long)]
    methods: Option<String>,
    /// Prevalence used inside the latent class estimators: population or estimated.
    #[arg(long, default_value = "population", value_parser = enum_arg::<EtaSource>)]
    eta_source: EtaSource,
}

impl MethodArgs {
    fn tags(&self) -> Option<Vec<String>> {
        self.methods
            .as_ref()
            .map(|m| m.split(',').map(|s| s.trim().to_string()).collect())
    }
}

#[derive(Args)]
struct AxisArgs {
    /// se_z1, sp_z1, se_z2, sp_z2, eta, xi or eps.
    #[arg(long)]
    axis: String,
    #[arg(long, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, allow_hyphen_values = true)]
    hi: f64,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    /// Move se_z2 (sp_z2) together with se_z1 (sp_z1).
    #[arg(long)]
    linked: bool,
    /// Value of the covariance that is not swept: base or zero.
    #[arg(long, default_value = "base", value_parser = enum_arg::<OtherCovariance>)]
    other_covariance: OtherCovariance,
}

impl AxisArgs {
    fn axis(&self) -> ApiResult<SweepAxis> {
        let parameter: SweepParam = self.axis.parse().map_err(|e: refstd_core::Error| {
            ApiError::bad_request(e.to_string(), "axis.parameter")
        })?;
        Ok(SweepAxis::new(parameter, self.lo, self.hi, self.points).linked(self.linked))
    }
}

/// Parse a snake_case enum value through its serde representation.
fn enum_arg<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    let norm = s.trim().to_ascii_lowercase().replace('-', "_");
    serde_json::from_value(serde_json::Value::String(norm)).map_err(|e| e.to_string())
}

fn emit(bytes: &[u8], out: Option<&PathBuf>) -> ApiResult<()> {
    let written = match out {
        Some(path) => std::fs::write(path, bytes),
        None => io::stdout().lock().write_all(bytes),
    };
    written.map_err(|e| ApiError::bad_request(format!("cannot write output: {e}"), "out"))
}

fn run(command: Command) -> ApiResult<i32> {
    match command {
        Command::Compute { spec, methods } => {
            let out = api::compute(&api::ComputeRequest {
                spec: spec.spec(),
                methods: methods.tags(),
                eta_source: methods.eta_source,
            })?;
            emit(&out.body, None)?;
            if let Some(err) = &out.method_error {
                eprintln!("{}: {}", err.code, err.message);
            }
            Ok(out.exit_code())
        }
        Command::Sweep {
            spec,
            axis,
            methods,
            format,
            out,
        } => {
            let bytes = api::run_sweep(&api::SweepRequest {
                spec: spec.spec(),
                axis: axis.axis()?,
                methods: methods.tags(),
                format,
                other_covariance: axis.other_covariance,
                eta_source: methods.eta_source,
            })?;
            emit(&bytes, out.as_ref())?;
            Ok(0)
        }
        Command::Crossovers {
            spec,
            axis,
            methods,
            quantity,
        } => {
            let bytes = api::crossovers(&api::CrossoverRequest {
                spec: spec.spec(),
                axis: axis.axis()?,
                methods: methods.tags(),
                quantity,
                other_covariance: axis.other_covariance,
                eta_source: methods.eta_source,
            })?;
            emit(&bytes, None)?;
            Ok(0)
        }
        Command::Bounds { spec, context } => {
            let bytes = api::bounds(&api::BoundsRequest {
                spec: spec.spec(),
                context: Some(context),
            })?;
            emit(&bytes, None)?;
            Ok(0)
        }
        Command::Verify { samples, seed } => {
            let report = verify::verify(samples, seed)?;
            emit(api::verify_summary(&report).as_bytes(), None)?;
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Import { input, format, out } => {
            let mut bytes = Vec::new();
            let read = if input.as_os_str() == "-" {
                io::stdin().read_to_end(&mut bytes).map(|_| ())
            } else {
                std::fs::read(&input).map(|b| bytes = b)
            };
            read.map_err(|e| {
                ApiError::bad_request(format!("cannot read {}: {e}", input.display()), "input")
            })?;
            let data = sweep::import(&bytes)?;
            emit(&data.export(format), out.as_ref())?;
            Ok(0)
        }
        Command::Serve {
            port,
            host,
            static_dir,
        } => {
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| ApiError::bad_request(format!("cannot start runtime: {e}"), ""))?;
            runtime
                .block_on(server::serve(SocketAddr::new(host, port), static_dir))
                .map_err(|e| ApiError::bad_request(format!("server error: {e}"), "port"))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            let _ = io::stderr().write_all(&err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
