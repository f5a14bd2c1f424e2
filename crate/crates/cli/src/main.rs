//! `mfb`: verify scenarios, integrate geodesics, compute fiber spectra and
//! averaged metrics.
//!
//! Exit codes: 0 success (all entries pass), 1 some entry fails, 2 usage,
//! parse or validation error.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mfb_core::harness::{kk_start_velocity, resolve_scenario, run_suite, Scenario, Suite, DEFAULT_SEED};
use mfb_core::kaluza::{average_metric, fiber_spectrum, geodesic_integrate, SpectrumFiber};
use mfb_core::Verdict;

#[derive(Parser)]
#[command(name = "mfb", version, about = "Multi-fiber bundle geometry verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and print one line per entry.
    Verify {
        /// Built-in scenario name or path to a JSON scenario.
        scenario: String,
        #[arg(long, default_value = "all")]
        suite: String,
        /// Tolerance override, repeatable.
        #[arg(long = "tol", value_name = "NAME=VAL", value_parser = parse_tol)]
        tol: Vec<(String, f64)>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a geodesic and write the trajectory as CSV.
    Integrate {
        scenario: String,
        /// Start point, comma separated.
        #[arg(long, value_parser = parse_point, value_delimiter = ',', allow_hyphen_values = true)]
        start: Vec<f64>,
        /// Start velocity; defaults to the scenario's charged start or its
        /// unit time reference.
        #[arg(long, value_parser = parse_point, value_delimiter = ',', allow_hyphen_values = true)]
        velocity: Option<Vec<f64>>,
        #[arg(long)]
        tend: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Laplacian spectrum of the fiber through a point.
    Spectrum {
        scenario: String,
        #[arg(long, value_enum)]
        fiber: FiberArg,
        /// Point, comma separated; defaults to the first sample.
        #[arg(long, value_parser = parse_point, value_delimiter = ',', allow_hyphen_values = true)]
        at: Option<Vec<f64>>,
        /// Grid nodes for s1, eigenvalue levels for s3.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Metric averaged over the flow of the potential.
    Average {
        scenario: String,
        #[arg(long, value_parser = parse_point, value_delimiter = ',', allow_hyphen_values = true)]
        at: Option<Vec<f64>>,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FiberArg {
    S1,
    S3,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (name, val) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VAL, got `{s}`"))?;
    let v: f64 = val.parse().map_err(|e| format!("tolerance `{val}`: {e}"))?;
    Ok((name.to_string(), v))
}

fn parse_point(s: &str) -> Result<f64, String> {
    s.trim().parse().map_err(|e| format!("coordinate `{s}`: {e}"))
}

fn point(s: &Scenario, at: Option<Vec<f64>>) -> Result<Vec<f64>, String> {
    let p = at.unwrap_or_else(|| s.samples[0].clone());
    if p.len() != s.dim() {
        return Err(format!("point has {} coordinates, scenario has {}", p.len(), s.dim()));
    }
    Ok(p)
}

fn default_velocity(s: &Scenario, x: &[f64]) -> Vec<f64> {
    if let Some(l) = &s.spec.lorentz {
        return kk_start_velocity(&s.metric.matrix(x), &l.start_velocity, l.charge_ratio).1;
    }
    let g = s.metric.matrix(x);
    let v = &s.time_reference;
    let n2: f64 = (0..v.len())
        .map(|a| (0..v.len()).map(|b| v[a] * g[(a, b)] * v[b]).sum::<f64>())
        .sum();
    let scale = if n2 != 0.0 { 1.0 / n2.abs().sqrt() } else { 1.0 };
    v.iter().map(|c| c * scale).collect()
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string_pretty(v).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Verify {
            scenario,
            suite,
            tol,
            seed,
            out,
        } => {
            let suite: Suite = suite
                .parse()
                .map_err(|e: mfb_core::harness::HarnessError| e.to_string())?;
            let s = resolve_scenario(&scenario, seed).map_err(|e| e.to_string())?;
            let overrides: BTreeMap<String, f64> = tol.into_iter().collect();
            let report = run_suite(&s, suite, &overrides, seed);
            let stdout = io::stdout();
            let mut w = stdout.lock();
            for e in &report.entries {
                let tag = match e.verdict {
                    Verdict::Pass => "PASS",
                    Verdict::Fail => "FAIL",
                };
                let err = e.error.as_deref().map(|m| format!("  ({m})")).unwrap_or_default();
                writeln!(
                    w,
                    "{tag} {:<40} {:>11.3e} <= {:<9.1e}{err}",
                    e.identity, e.residual, e.tolerance
                )
                .map_err(|e| e.to_string())?;
            }
            writeln!(
                w,
                "{}: {} entries, {} failed",
                report.scenario,
                report.entries.len(),
                report.failures().count()
            )
            .map_err(|e| e.to_string())?;
            if let Some(path) = out {
                std::fs::write(&path, to_json(&report)?).map_err(|e| format!("{}: {e}", path.display()))?;
            }
            Ok(report.passed())
        }
        Command::Integrate {
            scenario,
            start,
            velocity,
            tend,
            step,
            out,
        } => {
            let s = resolve_scenario(&scenario, DEFAULT_SEED).map_err(|e| e.to_string())?;
            let x = point(&s, Some(start))?;
            let v = velocity.unwrap_or_else(|| default_velocity(&s, &x));
            let traj = geodesic_integrate(&s.manifold, &s.metric, &s.killing, &x, &v, tend, step)
                .map_err(|e| e.to_string())?;
            let file = File::create(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            traj.write_csv(BufWriter::new(file)).map_err(|e| e.to_string())?;
            eprintln!("{} rows, speed drift {:.3e}", traj.rows.len(), traj.speed_drift());
            Ok(true)
        }
        Command::Spectrum {
            scenario,
            fiber,
            at,
            resolution,
        } => {
            let s = resolve_scenario(&scenario, DEFAULT_SEED).map_err(|e| e.to_string())?;
            let bundle = s.bundle.as_ref().ok_or("scenario has no bundle")?;
            let x = point(&s, at)?;
            let (fiber, default_res) = match fiber {
                FiberArg::S1 => (SpectrumFiber::S1, 256),
                FiberArg::S3 => (SpectrumFiber::S3, 4),
            };
            let sp = fiber_spectrum(bundle, &s.metric, &x, fiber, resolution.unwrap_or(default_res))
                .map_err(|e| e.to_string())?;
            println!("{}", to_json(&sp)?);
            Ok(true)
        }
        Command::Average { scenario, at, nodes } => {
            let s = resolve_scenario(&scenario, DEFAULT_SEED).map_err(|e| e.to_string())?;
            let bundle = s.bundle.as_ref().ok_or("scenario has no bundle")?;
            let x = point(&s, at)?;
            let avg = average_metric(bundle, &s.metric, &x, nodes).map_err(|e| e.to_string())?;
            println!("{}", to_json(&avg)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
