//! `vtolsim`: runs closed-loop scenarios, sweeps linearized stability
//! over airspeed, and executes the library's property selftests.
//!
//! Exit codes: 0 on success, 2 when a run's acceptance metrics (or a
//! stability sweep / selftest) fail, 1 on errors.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use vtol_core::linearize::linearize_closed_loop;
use vtol_core::scenario::{load_scenario, Scenario};
use vtol_core::sim::{emit_outputs, run_scenario, MetricsThresholds};

#[derive(Parser)]
#[command(name = "vtolsim", about = "Compound-VTOL flight control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the log, metrics and figure data.
    Run {
        /// Scenario file (sections `[vehicle]`, `[controller]`, `[gains]`,
        /// `[environment]`, `[mission]`).
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory for log.tsv, metrics.txt and fig_*.tsv.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's duration, s.
        #[arg(long)]
        duration: Option<f64>,
        /// Additional `section.key=value` overrides (repeatable).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Find closed-loop trims over an airspeed sweep and report the
    /// linearized eigenvalues.
    Linearize {
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Sweep specification `lo:step:hi` in m/s.
        #[arg(long = "airspeed-sweep", default_value = "0:2:20")]
        sweep: String,
    },
    /// Run the library property suites.
    Selftest,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, out, seed, duration, overrides } => {
            run(scenario, out, seed, duration, overrides)
        }
        Command::Linearize { scenario, sweep } => linearize(scenario, &sweep),
        Command::Selftest => selftest(),
    }
}

fn run(
    path: PathBuf,
    out_dir: PathBuf,
    seed: Option<u64>,
    duration: Option<f64>,
    overrides: Vec<String>,
) -> ExitCode {
    let mut scenario = match load_scenario(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(duration) = duration {
        scenario.duration = duration;
    }
    for spec in &overrides {
        if let Err(e) = scenario.apply_override(spec) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if let Err(e) = scenario.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    let started = std::time::Instant::now();
    let output = match run_scenario(&scenario) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let elapsed = started.elapsed().as_secs_f64();

    match emit_outputs(&output, &out_dir) {
        Ok(files) => {
            println!(
                "simulated {:.1} s of flight in {elapsed:.2} s, wrote {} files to {}",
                scenario.duration,
                files.len(),
                out_dir.display()
            );
        }
        Err(e) => {
            eprintln!("error writing outputs: {e}");
            return ExitCode::from(1);
        }
    }
    print!("{}", output.metrics.to_kv_lines());

    let failures = output.metrics.acceptance_failures(&MetricsThresholds::default());
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("acceptance metrics failed: {}", failures.join(", "));
        ExitCode::from(2)
    }
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("sweep '{spec}' is not lo:step:hi"));
    }
    let lo: f64 = parts[0].parse().map_err(|_| format!("bad sweep lo '{}'", parts[0]))?;
    let step: f64 = parts[1].parse().map_err(|_| format!("bad sweep step '{}'", parts[1]))?;
    let hi: f64 = parts[2].parse().map_err(|_| format!("bad sweep hi '{}'", parts[2]))?;
    if step <= 0.0 || hi < lo {
        return Err("sweep needs step > 0 and hi >= lo".into());
    }
    let mut v = lo;
    let mut out = Vec::new();
    while v <= hi + 1e-9 {
        out.push(v);
        v += step;
    }
    Ok(out)
}

fn linearize(path: Option<PathBuf>, sweep: &str) -> ExitCode {
    let scenario = match path {
        Some(p) => match load_scenario(&p) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        },
        None => Scenario::default(),
    };
    let airspeeds = match parse_sweep(sweep) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    println!("airspeed  max_dyn_re  kernel  trim_residual  dim");
    let mut stable = true;
    for v in airspeeds {
        match linearize_closed_loop(&scenario, v) {
            Ok(r) => {
                println!(
                    "{v:>8.1}  {:>10.4}  {:>6}  {:>13.2e}  {:>3}",
                    r.max_dynamical_real_part, r.kernel_dim, r.trim_residual, r.dim
                );
                if r.max_dynamical_real_part >= 0.0 || (r.kernel_dim > 0 && !r.kernel_verified) {
                    stable = false;
                }
            }
            Err(e) => {
                eprintln!("error at {v} m/s: {e}");
                return ExitCode::from(1);
            }
        }
    }
    if stable {
        ExitCode::SUCCESS
    } else {
        eprintln!("stability sweep failed");
        ExitCode::from(2)
    }
}

fn selftest() -> ExitCode {
    let results = vtol_core::selftest::run_all();
    let mut all_ok = true;
    for r in &results {
        println!("{} {:<32} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        all_ok &= r.passed;
    }
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

#[cfg(test)]
mod tests {
    use super::parse_sweep;

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("0:2:6").unwrap(), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(parse_sweep("5:5:5").unwrap(), vec![5.0]);
        assert!(parse_sweep("0:0:10").is_err());
        assert!(parse_sweep("10:1:0").is_err());
        assert!(parse_sweep("1:2").is_err());
        assert!(parse_sweep("a:b:c").is_err());
    }
}
