//! `sparse-mut`: decompose free-space reflection sweeps into individual
//! reflections and invert them into permittivity, loss tangent and thickness.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sparse_mut_cli::ingest::{ColumnSpec, CsvKind};
use sparse_mut_cli::pipeline::{
    dump_traces, run_characterize, run_synthetic, AnalysisConfig, S0Policy, SynthSpec,
};
use sparse_mut_cli::report::{emit_report, ReportFormat};
use sparse_mut_core::forward_model::Window;
use sparse_mut_core::material::Method;
use sparse_mut_core::solvers::{Step2Order, Step2Residual, TauWindowPolicy};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sparse-mut",
    version,
    about = "Sparse decomposition of free-space reflection sweeps and material parameter inversion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Characterize a measured MUT sweep against a metal-plate reference.
    Characterize(CharacterizeArgs),
    /// Generate a synthetic slab measurement and run the full pipeline on it.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CharacterizeArgs {
    /// MUT measurement (.s1p or .csv).
    #[arg(long = "mut", value_name = "PATH")]
    mut_path: PathBuf,
    /// Metal-plate reference measurement on the same grid.
    #[arg(long = "ref", value_name = "PATH")]
    ref_path: PathBuf,
    /// CSV column names as freq,a,b.
    #[arg(long, value_name = "F,A,B", default_value = "freq_hz,re,im")]
    csv_cols: String,
    /// Interpret CSV value columns as magnitude and phase in degrees.
    #[arg(long)]
    csv_mag_phase: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Relative permittivity of the slab.
    #[arg(long = "eps")]
    epsilon_real: f64,
    /// Loss tangent.
    #[arg(long = "tand", default_value_t = 0.0)]
    tan_delta: f64,
    /// Slab thickness in millimetres.
    #[arg(long = "thickness-mm")]
    thickness_mm: f64,
    /// Antenna-to-front-face distance in millimetres.
    #[arg(long = "standoff-mm", default_value_t = 50.0)]
    standoff_mm: f64,
    /// Number of modeled internal round trips.
    #[arg(long, default_value_t = 5)]
    bounces: usize,
    /// Swept band in GHz as LO:HI.
    #[arg(long, value_name = "LO:HI", default_value = "75:110")]
    band: String,
    /// Number of frequency steps.
    #[arg(long, default_value_t = 1001)]
    n: usize,
    /// Per-sample complex noise variance added to both sweeps.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Snap the slab geometry onto the analysis delay grid.
    #[arg(long)]
    on_grid: bool,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WindowArg {
    None,
    Hann,
    Hamming,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TauWArg {
    HalfGrid,
    FullGrid,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Step2OrderArg {
    DecreasingMagnitude,
    AscendingIndex,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Step2ResidualArg {
    LeaveOneOut,
    Progressive,
}

#[derive(Args)]
struct CommonArgs {
    /// Comma-separated list of methods to run.
    #[arg(long, value_name = "fd,du,l2", default_value = "fd,du,l2")]
    methods: String,
    /// Fixed sparsity level (disables the sweep).
    #[arg(long, conflicts_with = "s0_sweep")]
    s0: Option<usize>,
    /// Sparsity sweep range as LO:HI.
    #[arg(long, value_name = "LO:HI", default_value = "2:8")]
    s0_sweep: String,
    /// Residual-energy convergence threshold (unit-peak reference scale).
    #[arg(long, default_value_t = 1e-2)]
    epsilon: f64,
    /// Maximum dictionary-update iterations.
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    /// Amplitude taper before the inverse transform.
    #[arg(long, value_enum, default_value_t = WindowArg::None)]
    window: WindowArg,
    /// Zero-padding factor for the inverse transform.
    #[arg(long, default_value_t = 4)]
    pad: usize,
    /// Number of CIR bins kept for the analysis.
    #[arg(long, default_value_t = 512)]
    l_keep: usize,
    /// Mini-grid step divisor: tau_mg = grid step / DIV.
    #[arg(long = "tau-mg-div", default_value_t = 50)]
    tau_mg_div: u32,
    /// Refinement search window width.
    #[arg(long, value_enum, default_value_t = TauWArg::HalfGrid)]
    tau_w_policy: TauWArg,
    /// Atom processing order inside the update pass.
    #[arg(long, value_enum, default_value_t = Step2OrderArg::DecreasingMagnitude)]
    step2_order: Step2OrderArg,
    /// Residual the update pass correlates against.
    #[arg(long, value_enum, default_value_t = Step2ResidualArg::LeaveOneOut)]
    step2_residual: Step2ResidualArg,
    /// Re-solve amplitudes after each accepted replacement.
    #[arg(long)]
    step2_refit: bool,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Dump CIR and atom traces as CSV into this directory.
    #[arg(long, value_name = "DIR")]
    dump_traces: Option<PathBuf>,
    /// RNG seed; falls back to SPARSE_MUT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Linearly resample non-uniform input grids.
    #[arg(long)]
    resample: bool,
    /// Run the requested methods concurrently.
    #[arg(long)]
    parallel: bool,
}

fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    let mut methods = Vec::new();
    for tok in spec.split(',') {
        let method = match tok.trim().to_ascii_lowercase().as_str() {
            "fd" => Method::Fd,
            "du" => Method::Du,
            "l2" | "l2nm" => Method::L2Nm,
            other => bail!("unknown method '{other}' (expected fd, du or l2)"),
        };
        if !methods.contains(&method) {
            methods.push(method);
        }
    }
    if methods.is_empty() {
        bail!("at least one method is required");
    }
    Ok(methods)
}

fn parse_pair(spec: &str, what: &str) -> Result<(f64, f64)> {
    let (lo, hi) = spec
        .split_once(':')
        .with_context(|| format!("{what} must be LO:HI, got '{spec}'"))?;
    Ok((
        lo.trim()
            .parse()
            .with_context(|| format!("bad {what} lower bound '{lo}'"))?,
        hi.trim()
            .parse()
            .with_context(|| format!("bad {what} upper bound '{hi}'"))?,
    ))
}

fn seed_from(args: &CommonArgs) -> Result<u64> {
    if let Some(seed) = args.seed {
        return Ok(seed);
    }
    match std::env::var("SPARSE_MUT_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .context("SPARSE_MUT_SEED must be an unsigned integer"),
        Err(_) => Ok(0),
    }
}

fn build_config(args: &CommonArgs, columns: ColumnSpec) -> Result<AnalysisConfig> {
    let s0 = match args.s0 {
        Some(fixed) => S0Policy::Fixed(fixed),
        None => {
            let (lo, hi) = parse_pair(&args.s0_sweep, "--s0-sweep")?;
            let (lo, hi) = (lo as usize, hi as usize);
            if lo < 1 || hi < lo {
                bail!("--s0-sweep bounds must satisfy 1 <= LO <= HI");
            }
            S0Policy::Sweep(lo, hi)
        }
    };
    Ok(AnalysisConfig {
        methods: parse_methods(&args.methods)?,
        s0,
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        window: match args.window {
            WindowArg::None => Window::None,
            WindowArg::Hann => Window::Hann,
            WindowArg::Hamming => Window::Hamming,
        },
        pad_factor: args.pad,
        l_keep: args.l_keep,
        tau_mg_divisor: args.tau_mg_div,
        tau_w_policy: match args.tau_w_policy {
            TauWArg::HalfGrid => TauWindowPolicy::HalfGridStep,
            TauWArg::FullGrid => TauWindowPolicy::FullGridStep,
        },
        step2_order: match args.step2_order {
            Step2OrderArg::DecreasingMagnitude => Step2Order::DecreasingMagnitude,
            Step2OrderArg::AscendingIndex => Step2Order::AscendingIndex,
        },
        step2_residual: match args.step2_residual {
            Step2ResidualArg::LeaveOneOut => Step2Residual::LeaveOneOut,
            Step2ResidualArg::Progressive => Step2Residual::Progressive,
        },
        step2_refit: args.step2_refit,
        seed: seed_from(args)?,
        resample: args.resample,
        parallel: args.parallel,
        columns,
    })
}

fn csv_columns(args: &CharacterizeArgs) -> Result<ColumnSpec> {
    let parts: Vec<&str> = args.csv_cols.split(',').map(str::trim).collect();
    if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
        bail!("--csv-cols must name three columns as F,A,B");
    }
    Ok(ColumnSpec {
        frequency: parts[0].into(),
        a: parts[1].into(),
        b: parts[2].into(),
        kind: if args.csv_mag_phase {
            CsvKind::MagnitudePhaseDeg
        } else {
            CsvKind::RealImag
        },
    })
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    let (analysis, common) = match &cli.command {
        Command::Characterize(args) => {
            let cfg = build_config(&args.common, csv_columns(args)?)?;
            let analysis = run_characterize(&args.mut_path, &args.ref_path, &cfg)?;
            (analysis, &args.common)
        }
        Command::Synth(args) => {
            let cfg = build_config(&args.common, ColumnSpec::default())?;
            let (lo_ghz, hi_ghz) = parse_pair(&args.band, "--band")?;
            let spec = SynthSpec {
                epsilon_real: args.epsilon_real,
                tan_delta: args.tan_delta,
                thickness: args.thickness_mm * 1e-3,
                standoff: args.standoff_mm * 1e-3,
                n_bounces: args.bounces,
                f_lo: lo_ghz * 1e9,
                f_hi: hi_ghz * 1e9,
                n_steps: args.n,
                noise_variance: args.noise,
                on_grid: args.on_grid,
            };
            let analysis = run_synthetic(&spec, &cfg)?;
            (analysis, &args.common)
        }
    };

    if let Some(dir) = &common.dump_traces {
        dump_traces(&analysis, dir)
            .with_context(|| format!("cannot write traces to {}", dir.display()))?;
    }
    let format = match common.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Text => ReportFormat::Text,
    };
    emit_report(&analysis.report, format, common.out.as_deref()).with_context(
        || match &common.out {
            Some(p) => format!("cannot write report to {}", p.display()),
            None => "cannot write report to stdout".into(),
        },
    )?;
    Ok(analysis.report.any_ok())
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("sparse-mut: every requested method failed; see the report for details");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("sparse-mut: {e:#}");
            ExitCode::FAILURE
        }
    }
}
