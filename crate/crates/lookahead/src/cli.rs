//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit code.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lookahead_core::{
    epsilon_n, eval_t_infinity, eval_t_n, kkt_residuals, solve_finite, solve_infinite,
    verify_structure, AllocationSequence, KktResidualReport, SolverReport, StructureReport,
    SystemParams, DEFAULT_TOL,
};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::figures::{sweep_window, xi_table};
use crate::render;
use crate::simulator::{compare, simulate, simulate_with_trace, ThroughputReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

pub const DEFAULT_SLOTS: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(
    name = "lookahead",
    version,
    about = "Optimal look-ahead power control for energy harvesting links"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal drought allocation sequence.
    Solve(SolveArgs),
    /// Evaluate the throughput of a given allocation sequence.
    Eval(EvalArgs),
    /// Simulate the policy and compare with the analytic throughput.
    Simulate(SimulateArgs),
    /// Optimal throughput for a range of window sizes next to the offline bound.
    SweepWindow(SweepArgs),
    /// Optimal sequences for several finite horizons and the infinite one.
    XiTable(XiTableArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Channel {
    /// Arrival probability per slot.
    #[arg(short = 'p', long = "prob")]
    pub p: f64,
    /// Channel gain.
    #[arg(short = 'g', long = "gamma")]
    pub gamma: f64,
    /// Battery capacity, also the size of each arrival.
    #[arg(short = 'B', long = "battery")]
    pub battery: f64,
    /// Solver tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub channel: Channel,
    /// Look-ahead window in slots.
    #[arg(short = 'w', long = "window")]
    pub window: usize,
    /// Solve the N-term problem instead of the infinite one.
    #[arg(long = "finite-N")]
    pub finite_n: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub channel: Channel,
    #[arg(short = 'w', long = "window")]
    pub window: usize,
    /// Comma-separated sequence values.
    #[arg(long, conflicts_with = "xi_file", required_unless_present = "xi_file")]
    pub xi: Option<String>,
    /// CSV file with an `xi` column, as written by `solve --format csv`.
    #[arg(long)]
    pub xi_file: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: Channel,
    #[arg(short = 'w', long = "window")]
    pub window: usize,
    /// Number of slots per run.
    #[arg(short = 'T', long = "slots", default_value_t = DEFAULT_SLOTS)]
    pub slots: usize,
    #[arg(long, default_value_t = DEFAULT_SEED, conflicts_with = "seeds")]
    pub seed: u64,
    /// Comma-separated seeds; runs are pooled.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Battery level at slot 1; defaults to full.
    #[arg(long)]
    pub initial_battery: Option<f64>,
    /// Exit with status 3 if |z| exceeds the threshold.
    #[arg(long)]
    pub check: bool,
    #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
    pub z_threshold: f64,
    /// Write a per-slot CSV trace here (single seed only).
    #[arg(long, conflicts_with = "seeds")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub channel: Channel,
    #[arg(long, default_value_t = 1)]
    pub w_min: usize,
    #[arg(long, default_value_t = 10)]
    pub w_max: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct XiTableArgs {
    #[command(flatten)]
    pub channel: Channel,
    #[arg(short = 'w', long = "window")]
    pub window: usize,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    pub n_list: Vec<usize>,
    #[command(flatten)]
    pub output: Output,
}

impl Channel {
    fn params(&self, window: usize) -> Result<SystemParams> {
        Ok(SystemParams::new(self.p, self.gamma, self.battery, window)?)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli.command, stdout) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK,
        Err(e) => {
            let message = serde_json::json!({ "error": e.to_string() });
            let _ = writeln!(stderr, "{message}");
            EXIT_DOMAIN
        }
    }
}

/// Runs one command; `Ok(false)` means a requested check failed.
pub fn execute(command: &Command, stdout: &mut dyn Write) -> Result<bool> {
    match command {
        Command::Solve(args) => solve(args, stdout).map(|_| true),
        Command::Eval(args) => eval(args, stdout).map(|_| true),
        Command::Simulate(args) => simulate_cmd(args, stdout),
        Command::SweepWindow(args) => {
            let params = args.channel.params(args.w_min.max(1))?;
            let rows = sweep_window(&params, args.w_min, args.w_max, args.channel.tol)?;
            emit(&args.output, stdout, &rows, |out| {
                render::sweep_csv(&rows, out)
            })
            .map(|_| true)
        }
        Command::XiTable(args) => {
            let params = args.channel.params(args.window)?;
            let table = xi_table(&params, &args.n_list, args.channel.tol)?;
            emit(&args.output, stdout, &table, |out| {
                render::xi_table_csv(&table, out)
            })
            .map(|_| true)
        }
    }
}

/// Writes JSON for `text`, or calls `csv` for `csv`, to `--out` or stdout.
fn emit<T: Serialize>(
    output: &Output,
    stdout: &mut dyn Write,
    value: &T,
    csv: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    let mut file;
    let out: &mut dyn Write = match &output.out {
        Some(path) => {
            file = BufWriter::new(create(path)?);
            &mut file
        }
        None => stdout,
    };
    match output.format {
        Format::Text => {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)?;
        }
        Format::Csv => csv(&mut *out)?,
    }
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::from(e).context(path.display().to_string()))
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub params: SystemParams,
    pub report: SolverReport,
    pub structure: StructureReport,
}

fn solve(args: &SolveArgs, stdout: &mut dyn Write) -> Result<()> {
    let params = args.channel.params(args.window)?;
    let tol = args.channel.tol;
    let report = match args.finite_n {
        Some(n) => solve_finite(&params, n, tol)?,
        None => solve_infinite(&params, tol)?,
    };
    let structure = verify_structure(&params, &report.xi, report.horizon);
    let output = SolveOutput {
        params,
        report,
        structure,
    };
    emit(&args.output, stdout, &output, |out| {
        render::solver_csv(&output.report, out)
    })
}

#[derive(Debug, Serialize)]
pub struct EvalOutput {
    pub params: SystemParams,
    pub length: usize,
    pub t_n: f64,
    pub t_infinity: f64,
    pub epsilon_n: f64,
    /// Absent when some entry sits on the boundary.
    pub kkt: Option<KktResidualReport>,
}

fn read_xi(args: &EvalArgs, capacity: f64) -> Result<AllocationSequence> {
    let values = match (&args.xi, &args.xi_file) {
        (Some(list), _) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Input(format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?,
        (None, Some(path)) => {
            let mut reader = csv::Reader::from_path(path)
                .map_err(|e| Error::from(e).context(path.display().to_string()))?;
            let column = reader
                .headers()?
                .iter()
                .position(|h| h == "xi")
                .ok_or_else(|| Error::Input(format!("{}: no xi column", path.display())))?;
            reader
                .records()
                .map(|r| {
                    let r = r?;
                    let cell = r.get(column).unwrap_or_default();
                    cell.parse::<f64>()
                        .map_err(|e| Error::Input(format!("{cell:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?
        }
        (None, None) => return Err(Error::Input("no sequence given".into())),
    };
    Ok(AllocationSequence::new(values, capacity)?)
}

fn eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let params = args.channel.params(args.window)?;
    let xi = read_xi(args, params.battery_capacity())?;
    let output = EvalOutput {
        params,
        length: xi.len(),
        t_n: eval_t_n(&params, &xi)?,
        t_infinity: eval_t_infinity(&params, &xi, args.channel.tol)?,
        epsilon_n: epsilon_n(&params, xi.len()),
        kkt: kkt_residuals(&params, &xi).ok(),
    };
    emit(&args.output, stdout, &output, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "length",
            "t_n",
            "t_infinity",
            "epsilon_n",
            "max_kkt_residual",
        ])?;
        w.write_record([
            output.length.to_string(),
            render::float(output.t_n),
            render::float(output.t_infinity),
            render::float(output.epsilon_n),
            output
                .kkt
                .as_ref()
                .map_or(String::new(), |k| render::float(k.relative_max())),
        ])?;
        w.flush()?;
        Ok(())
    })
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum SimulationOutput {
    Single(ThroughputReport),
    Pooled(crate::simulator::Comparison),
}

fn simulate_cmd(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<bool> {
    let params = args.channel.params(args.window)?;
    let xi = solve_infinite(&params, args.channel.tol)?.xi;
    let b1 = args.initial_battery.unwrap_or(params.battery_capacity());
    let output = match &args.seeds {
        Some(seeds) => SimulationOutput::Pooled(compare(&params, &xi, args.slots, seeds, b1)?),
        None => {
            let report = match &args.trace {
                Some(path) => {
                    let (report, records) =
                        simulate_with_trace(&params, &xi, args.slots, args.seed, b1)?;
                    render::trace_csv(&records, BufWriter::new(create(path)?))?;
                    report
                }
                None => simulate(&params, &xi, args.slots, args.seed, b1)?,
            };
            SimulationOutput::Single(report)
        }
    };
    let (runs, z) = match &output {
        SimulationOutput::Single(r) => (std::slice::from_ref(r), r.z_score),
        SimulationOutput::Pooled(c) => (c.runs.as_slice(), c.pooled_z_score),
    };
    emit(&args.output, stdout, &output, |out| {
        render::throughput_csv(runs, out)
    })?;
    Ok(!args.check || z.abs() <= args.z_threshold)
}
