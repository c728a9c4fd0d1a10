use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use fopid_reactor::fracfilter::generate_fgn;
use fopid_reactor::reactor::{dc_gain, linearize, to_transfer_function, ReactorParams, TABLE1_POWERS};
use fopid_reactor::sim::{run_grid, run_scenario, write_grid_csv, write_series_csv, GridOptions, GridSection, Scenario};
use fopid_reactor::stochastic::rs_hurst;
use fopid_reactor::tuner::{tune, GaConfig};
use fopid_reactor::Error;

/// Fuzzy fractional-order PID control of a point-kinetics reactor.
#[derive(Parser)]
#[command(name = "fopid-reactor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the linearized plant at a built-in operating point as JSON.
    Linearize {
        /// Operating power in percent: 100, 80, 60, 40 or 20.
        power: u32,
    },
    /// Run one closed-loop scenario.
    Simulate {
        scenario: PathBuf,
        /// Series CSV destination; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Summary JSON destination; stderr when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Tune the six controller parameters with the genetic algorithm.
    Tune {
        scenario: PathBuf,
        ga: PathBuf,
        /// Result JSON destination; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate the Hurst exponent of a series by rescaled-range analysis.
    ///
    /// Accepts one number per line, or a CSV with a header row.
    Hurst {
        file: PathBuf,
        /// CSV column to analyse; defaults to the last column.
        #[arg(long)]
        column: Option<String>,
    },
    /// Generate fractional Gaussian noise as an `index,value` CSV.
    Noisegen {
        #[arg(allow_hyphen_values = true)]
        beta: f64,
        n: usize,
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Sample period used to place the shaping filter's band.
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a batch grid: `section-4`, `section-5` or `section-6`.
    Grid {
        section: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated operating powers to include.
        #[arg(long, value_delimiter = ',')]
        powers: Option<Vec<u32>>,
        /// Scenario used as the template for every cell.
        #[arg(long)]
        base: Option<PathBuf>,
        /// Directory receiving one series CSV per cell.
        #[arg(long)]
        series_dir: Option<PathBuf>,
        /// Grid CSV destination; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DivergedSimulation { .. } | Error::NonFiniteState { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        // A closed downstream pipe is a normal way to stop reading.
        let code = if e.kind() == io::ErrorKind::BrokenPipe { 0 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 2, message }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&Path>, fallback: Box<dyn Write>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => fallback,
    })
}

fn write_json(value: &impl serde::Serialize, mut out: Box<dyn Write>) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_series(path: &Path, column: Option<&str>) -> Result<Vec<f64>, Failure> {
    let text = read_input(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let parse = |s: &str, line: usize| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| config_error(format!("{}:{line}: not a number: {s:?}", path.display())))
    };
    if first.trim().parse::<f64>().is_ok() {
        return text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| parse(l, i + 1))
            .collect();
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| config_error(e.to_string()))?.clone();
    let index = match column {
        Some(c) => headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| config_error(format!("{}: no column {c:?}", path.display())))?,
        None => headers.len().saturating_sub(1),
    };
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| config_error(e.to_string()))?;
            parse(rec.get(index).unwrap_or(""), i + 2)
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Linearize { power } => {
            let params = ReactorParams::table1(power)
                .ok_or_else(|| config_error(format!("power must be one of 100, 80, 60, 40, 20, got {power}")))?;
            let ss = linearize(&params)?;
            let tf = to_transfer_function(&ss);
            let roots = |v: &[num_complex::Complex64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
            let out = json!({
                "power_percent": power,
                "gain": tf.gain,
                "zeros": roots(&tf.zeros),
                "poles": roots(&tf.poles),
                "dc_gain": dc_gain(&ss)?,
            });
            write_json(&out, Box::new(io::stdout().lock()))
        }
        Command::Simulate { scenario, csv, summary } => {
            let scn = Scenario::from_json(&read_input(&scenario)?)?;
            let res = run_scenario(&scn)?;
            write_series_csv(&res, sink(csv.as_deref(), Box::new(io::stdout().lock()))?)?;
            let out = json!({ "summary": res.summary, "scenario": scn });
            write_json(&out, sink(summary.as_deref(), Box::new(io::stderr().lock()))?)
        }
        Command::Tune { scenario, ga, output } => {
            let scn = Scenario::from_json(&read_input(&scenario)?)?;
            let ga: GaConfig = serde_json::from_str(&read_input(&ga)?).map_err(|e| config_error(e.to_string()))?;
            let res = tune(&scn, &ga)?;
            write_json(&res, sink(output.as_deref(), Box::new(io::stdout().lock()))?)
        }
        Command::Hurst { file, column } => {
            let series = read_series(&file, column.as_deref())?;
            let est = rs_hurst(&series, None)?;
            write_json(&est, Box::new(io::stdout().lock()))
        }
        Command::Noisegen {
            beta,
            n,
            seed,
            sigma,
            dt,
            output,
        } => {
            let w = generate_fgn(beta, n, sigma, dt, seed)?;
            let mut out = csv::Writer::from_writer(sink(output.as_deref(), Box::new(io::stdout().lock()))?);
            let csv_err = |e: csv::Error| Failure { code: 1, message: e.to_string() };
            out.write_record(["index", "value"]).map_err(csv_err)?;
            for (k, v) in w.iter().enumerate() {
                out.write_record([k.to_string(), v.to_string()]).map_err(csv_err)?;
            }
            out.flush()?;
            Ok(())
        }
        Command::Grid {
            section,
            seed,
            powers,
            base,
            series_dir,
            output,
        } => {
            let mut opts = GridOptions::new(section.parse::<GridSection>()?);
            opts.seed = seed;
            if let Some(p) = powers {
                if let Some(bad) = p.iter().find(|v| !TABLE1_POWERS.contains(v)) {
                    return Err(config_error(format!("power must be one of 100, 80, 60, 40, 20, got {bad}")));
                }
                opts.powers = p;
            }
            if let Some(b) = base {
                opts.base = Scenario::from_json(&read_input(&b)?)?;
            }
            opts.series_dir = series_dir;
            let rows = run_grid(&opts)?;
            write_grid_csv(&rows, sink(output.as_deref(), Box::new(io::stdout().lock()))?)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.code == 0 => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
