//! Command-line front end: `simulate`, `fit`, `verify`, `predict` and
//! `export-plot`.
//!
//! Exit codes: 0 on success, 1 when a verification or fit target fails,
//! 2 on usage, IO or dimension errors (with a one-line message on stderr).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::datagen::{
    gen_almost_periodic_history, gen_periodic_trajectory, simulate_wave_1d, InitialProfile, WaveConfig,
};
use crate::error::Error;
use crate::io::{read_model, read_snapshots, write_model, write_snapshots, SnapshotFormat};
use crate::linalg::CMat;
use crate::ohf::SnapshotHistory;
use crate::rom::{fit, predict, verify_mimetic, FitMode, FitOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const RULE: &str = "-------------------------------------------------------------";

#[derive(Debug, Parser)]
#[command(name = "sclrom", version, about = "Circular reduced order models from snapshot histories")]
struct Cli {
    /// `paper` adds the banner lines of the original experiment logs.
    #[arg(long, value_enum, global = true, default_value_t = LogStyle::Plain)]
    log_style: LogStyle,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LogStyle {
    Plain,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Binary,
    Csv,
}

impl From<Format> for SnapshotFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Binary => SnapshotFormat::Binary,
            Format::Csv => SnapshotFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Monomial,
    Lsq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Profile {
    Sine,
    Gaussian,
    Zero,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a snapshot history.
    Simulate {
        #[command(subcommand)]
        kind: Simulate,
    },
    /// Fit a model to a snapshot file.
    Fit {
        snapshots: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Monomial)]
        mode: Mode,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
        #[arg(long, default_value_t = 1e-12)]
        rank_tol: f64,
        /// Drop trailing snapshots until the history has full rank.
        #[arg(long)]
        truncate_rank: bool,
        #[arg(long)]
        period: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a model's predictions against a snapshot file.
    Verify {
        model: PathBuf,
        snapshots: PathBuf,
        /// Defaults to the tolerance stored with the model.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Write predictions for steps `from..=to`.
    Predict {
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        from: usize,
        #[arg(long)]
        to: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Binary)]
        format: Format,
    },
    /// CSV of per-step residuals and selected state components.
    ExportPlot {
        snapshots: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Comma-separated state indices.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        components: Vec<usize>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Output {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Binary)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Simulate {
    /// Finite difference wave equation on [0, L] with fixed ends.
    Wave {
        #[arg(long, default_value_t = 100)]
        nx: usize,
        #[arg(long, default_value_t = 40)]
        nt: usize,
        #[arg(long, default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Defaults to one period of the fundamental mode, `2 L / (c nt)`.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, value_enum, default_value_t = Profile::Sine)]
        profile: Profile,
        #[arg(long, default_value_t = 1)]
        mode: u32,
        #[arg(long, default_value_t = 0.5)]
        center: f64,
        #[arg(long, default_value_t = 0.05)]
        width: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Exactly periodic trajectory.
    Periodic {
        #[arg(long)]
        n: usize,
        #[arg(long = "T")]
        period: usize,
        /// Number of snapshots, defaults to one period.
        #[arg(long)]
        len: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Periodic trajectory plus a perturbation of fixed norm per snapshot.
    AlmostPeriodic {
        #[arg(long)]
        n: usize,
        #[arg(long = "T")]
        period: usize,
        #[arg(long)]
        eps: f64,
        /// Number of snapshots, defaults to two periods.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the unperturbed trajectory here.
        #[arg(long)]
        clean_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

/// Five significant digits with a signed two-digit exponent, e.g. `7.4542e-13`.
pub fn format_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn banner(out: &mut dyn Write, style: LogStyle, title: &str) -> std::io::Result<()> {
    if style == LogStyle::Paper {
        writeln!(out, "{RULE}\n{title}\n{RULE}")?;
    }
    Ok(())
}

enum Failure {
    Usage(String),
    Lib(Error),
    Write(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Write(e)
    }
}

/// Runs the command line `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let text = e.render().to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(err, "{line}");
            return EXIT_USAGE;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(failure) => {
            let msg = match failure {
                Failure::Usage(msg) => msg,
                Failure::Lib(e) => e.to_string(),
                Failure::Write(e) => format!("cannot write output: {e}"),
            };
            let _ = writeln!(err, "error: {}", msg.replace('\n', " "));
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let style = cli.log_style;
    match cli.command {
        Command::Simulate { kind } => {
            banner(out, style, "                     Running simulation:")?;
            simulate(kind, out)
        }
        Command::Fit {
            snapshots,
            mode,
            eps,
            rank_tol,
            truncate_rank,
            period,
            out: path,
        } => {
            let h = read_snapshots(&snapshots)?;
            banner(out, style, " Computing circular matrix representations in C[U[v1|vm]]:")?;
            let opts = FitOptions {
                mode: match mode {
                    Mode::Monomial => FitMode::Monomial,
                    Mode::Lsq => FitMode::LeastSquares,
                },
                epsilon: eps,
                rank_tol,
                truncate_rank,
                period,
            };
            let (model, report) = fit(&h, &opts)?;
            write_model(&model, &path)?;
            writeln!(out, "Fitted model: n = {}, m = {}, period = {}", model.n(), model.m(), model.period())?;
            writeln!(out, "Snapshots used = {}", report.snapshots_used)?;
            let relation = if report.target_met { "<=" } else { ">" };
            writeln!(out, "epsilon achieved = {} {relation} {}", format_sci(report.epsilon_achieved), format_sci(eps))?;
            Ok(if report.target_met { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Verify { model, snapshots, eps } => {
            let model = read_model(&model)?;
            let h = read_snapshots(&snapshots)?;
            let eps = eps.unwrap_or(model.epsilon_target());
            let report = verify_mimetic(&model, &h, eps)?;
            banner(out, style, " Verifying circular mimetic constraints for C[U[v1|vm]]:")?;
            let (status, relation) = if report.pass { ("passed", "<=") } else { ("failed", ">") };
            writeln!(out, "Verification {status}...")?;
            writeln!(
                out,
                "max{{||K U^k T x0 - xk|| | 1<=k<=m}} = {} {relation} eps",
                format_sci(report.max_residual)
            )?;
            if style == LogStyle::Paper {
                writeln!(out, "{RULE}")?;
            }
            writeln!(out, "For m = {}", report.m)?;
            writeln!(out, "For n = {}", report.n)?;
            writeln!(out, "For eps = {}", format_sci(report.eps))?;
            if style == LogStyle::Paper {
                writeln!(out, "{RULE}")?;
            }
            Ok(if report.pass { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Predict {
            model,
            from,
            to,
            out: path,
            format,
        } => {
            if to < from {
                return Err(Failure::Usage(format!("--to {to} is before --from {from}")));
            }
            let model = read_model(&model)?;
            let columns: Vec<_> = (from..=to).map(|t| predict(&model, t)).collect();
            let h = SnapshotHistory::new(CMat::from_columns(&columns))?;
            write_snapshots(&h, &path, format.into())?;
            writeln!(out, "Wrote {} predictions (t = {from}..={to}) to {}", columns.len(), path.display())?;
            Ok(EXIT_OK)
        }
        Command::ExportPlot {
            snapshots,
            model,
            components,
            out: path,
        } => {
            let h = read_snapshots(&snapshots)?;
            let model = model.map(read_model).transpose()?;
            if let Some(bad) = components.iter().find(|&&i| i >= h.n()) {
                return Err(Failure::Usage(format!("component {bad} out of range for n = {}", h.n())));
            }
            if let Some(model) = &model {
                if model.n() != h.n() {
                    return Err(Error::DimensionMismatch(format!(
                        "model has n = {}, snapshots have n = {}",
                        model.n(),
                        h.n()
                    ))
                    .into());
                }
            }
            let csv = plot_csv(&h, model.as_ref(), &components);
            match path {
                Some(path) => std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?,
                None => out.write_all(csv.as_bytes())?,
            }
            Ok(EXIT_OK)
        }
    }
}

fn simulate(kind: Simulate, out: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let (h, output) = match kind {
        Simulate::Wave {
            nx,
            nt,
            length,
            speed,
            dt,
            profile,
            mode,
            center,
            width,
            output,
        } => {
            let mut cfg = WaveConfig::one_period(nx, nt);
            cfg.length = length;
            cfg.speed = speed;
            cfg.dt = dt.unwrap_or(2.0 * length / (speed * nt as f64));
            cfg.profile = match profile {
                Profile::Sine => InitialProfile::SineMode(mode),
                Profile::Gaussian => InitialProfile::Gaussian { center, width },
                Profile::Zero => InitialProfile::Zero,
            };
            (simulate_wave_1d(&cfg)?, output)
        }
        Simulate::Periodic {
            n,
            period,
            len,
            seed,
            output,
        } => (gen_periodic_trajectory(n, period, len.unwrap_or(period), seed)?, output),
        Simulate::AlmostPeriodic {
            n,
            period,
            eps,
            horizon,
            seed,
            clean_out,
            output,
        } => {
            let pair = gen_almost_periodic_history(n, period, eps, horizon.unwrap_or(2 * period), seed)?;
            if let Some(path) = clean_out {
                write_snapshots(&pair.clean, &path, output.format.into())?;
            }
            (pair.noisy, output)
        }
    };
    write_snapshots(&h, &output.out, output.format.into())?;
    writeln!(out, "Wrote {} snapshots of dimension {} to {}", h.m(), h.n(), output.out.display())?;
    Ok(EXIT_OK)
}

fn plot_csv(h: &SnapshotHistory, model: Option<&crate::rom::SclRomModel>, components: &[usize]) -> String {
    let mut header = vec!["t".to_string()];
    if model.is_some() {
        header.push("residual".into());
    }
    for i in components {
        header.push(format!("x{i}_re"));
        header.push(format!("x{i}_im"));
        if model.is_some() {
            header.push(format!("pred{i}_re"));
            header.push(format!("pred{i}_im"));
        }
    }
    let mut csv = header.join(",") + "\n";
    for t in 0..h.m() {
        let x = h.column(t);
        let prediction = model.map(|m| predict(m, t));
        let mut row = vec![t.to_string()];
        if let Some(p) = &prediction {
            row.push(format!("{:e}", (p - &x).norm()));
        }
        for &i in components {
            row.push(format!("{:e}", x[i].re));
            row.push(format!("{:e}", x[i].im));
            if let Some(p) = &prediction {
                row.push(format!("{:e}", p[i].re));
                row.push(format!("{:e}", p[i].im));
            }
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    csv
}
