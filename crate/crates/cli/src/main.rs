//! `pole-bounds`: spectral and exit-time estimates for rotationally
//! symmetric model manifolds, driven by JSON scenario files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pole_bounds::pipeline::{run_analyze, run_simulate, run_sweep, sweep_csv, Report, Run};
use pole_bounds::scenario::{OutputFormat, Scenario};

#[derive(Parser)]
#[command(name = "pole-bounds", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full analysis of one scenario.
    Analyze(Common),
    /// One analysis per value of a single parameter; CSV output.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter name: k, H0, r_phi, m, l, poly[i], exp_poly[i], coefficients[i], ...
        #[arg(long)]
        param: String,
        /// Comma-separated values; `inf` is accepted for r_phi.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Monte Carlo exit times compared with the model values.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    scenario: PathBuf,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    r_cap: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl Common {
    fn load(&self) -> Result<Scenario> {
        let text = fs::read_to_string(&self.scenario)
            .with_context(|| format!("reading {}", self.scenario.display()))?;
        let mut sc = Scenario::from_json(&text)?;
        if let Some(t) = self.tol {
            sc.analysis.tol = t;
        }
        if let Some(r) = self.r_cap {
            sc.analysis.r_cap = r;
        }
        if let (Some(seed), Some(mc)) = (self.seed, sc.mc.as_mut()) {
            mc.seed = seed;
        }
        if let Some(f) = self.format {
            sc.output.format = match f {
                Format::Json => OutputFormat::Json,
                Format::Csv => OutputFormat::Csv,
                Format::Both => OutputFormat::Both,
            };
        }
        sc.validate()?;
        Ok(sc)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Analyze(c) => {
            let sc = c.load()?;
            let run = run_analyze(&sc, !c.no_timings)?;
            emit(&c, &sc, &run, analyze_csv(&run.report))?;
            Ok(run.exit_code() as u8)
        }
        Command::Simulate(c) => {
            let sc = c.load()?;
            let run = run_simulate(&sc, !c.no_timings)?;
            emit(&c, &sc, &run, simulate_csv(&run.report))?;
            Ok(run.exit_code() as u8)
        }
        Command::Sweep { common, param, values } => {
            let sc = common.load()?;
            let rows = run_sweep(&sc, &param, &values)?;
            let csv = sweep_csv(&param, &rows);
            match &common.out {
                Some(dir) => write(dir, "sweep.csv", &csv)?,
                None => print!("{csv}"),
            }
            if let Some(row) = rows.iter().find(|r| r.error.is_some()) {
                bail!("sweep value `{}` failed: {}", row.value, row.error.as_deref().unwrap_or(""));
            }
            let violated = rows.iter().any(|r| r.report.as_ref().is_some_and(|e| e.hypotheses_violated()));
            Ok(if violated { 2 } else { 0 })
        }
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(c: &Common, sc: &Scenario, run: &Run, csv: String) -> Result<()> {
    let json = serde_json::to_string_pretty(&run.report)? + "\n";
    let format = sc.output.format;
    match &c.out {
        Some(dir) => {
            if format != OutputFormat::Csv {
                write(dir, "report.json", &json)?;
            }
            if format != OutputFormat::Json {
                write(dir, "report.csv", &csv)?;
            }
            for (name, body) in &run.artifacts {
                write(dir, name, body)?;
            }
        }
        None => {
            if !run.artifacts.is_empty() {
                eprintln!("note: table dumps need --out; skipped");
            }
            match format {
                OutputFormat::Json => print!("{json}"),
                OutputFormat::Csv => print!("{csv}"),
                OutputFormat::Both => print!("{json}{csv}"),
            }
        }
    }
    Ok(())
}

fn analyze_csv(report: &Report) -> String {
    let rows = vec![pole_bounds::pipeline::SweepRow {
        value: String::new(),
        report: report.estimate.clone(),
        error: None,
    }];
    sweep_csv("", &rows)
}

fn simulate_csv(report: &Report) -> String {
    let mut out = String::from("R,rho0,n_paths,dt,mean_tau,stderr_tau,n_censored,model_exit_time,tolerance,pass\n");
    for c in report.mc.iter().flatten() {
        let e = &c.estimate;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            e.r, e.rho0, e.n_paths, e.dt, e.mean_tau, e.stderr_tau, e.n_censored, c.model_exit_time, c.tolerance, c.pass
        );
    }
    out
}
