use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gyrosgi::scenario::config::ScenarioConfig;
use gyrosgi::scenario::output::{write_json, write_rows_csv, write_trajectory_csv};
use gyrosgi::scenario::presets::{preset, PRESETS};
use gyrosgi::scenario::spin_check::{spin_check, DEFAULT_MARGIN_FACTOR, DEFAULT_RABI_THRESHOLD};
use gyrosgi::scenario::sweep::{omega0_curve_from_run, run_sweep, SweepAxis};
use gyrosgi::scenario::{emit_outputs, parse_config, run_scenario};
use gyrosgi::translational::{close_interferometer, ClosureOptions, TranslationalModel};
use gyrosgi::{Error, FieldProtocol};

#[derive(Parser)]
#[command(
    name = "gyrosgi",
    version,
    about = "Stern-Gerlach interferometer of a spinning nanodiamond"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trajectory and report.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run one scenario per grid value of a parameter.
    Sweep {
        config: PathBuf,
        /// omega0 (Hz), dp (ħ), n, mass (kg) or nv_offset (nm)
        #[arg(long)]
        axis: String,
        /// Comma-separated values, or start:stop:count for a linear grid.
        #[arg(long)]
        grid: String,
        /// Use logarithmic spacing for start:stop:count grids.
        #[arg(long)]
        log: bool,
        /// Output CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the stage times τ₃, τ₄ that close the interferometer.
    Close { config: PathBuf },
    /// Check the spin levels stay off resonance.
    SpinCheck {
        config: PathBuf,
        /// Evolution window in microseconds.
        #[arg(long, default_value_t = 10.0)]
        window_us: f64,
        #[arg(long, default_value_t = DEFAULT_MARGIN_FACTOR)]
        margin: f64,
        #[arg(long, default_value_t = DEFAULT_RABI_THRESHOLD)]
        rabi_threshold: f64,
    },
    /// Run a built-in figure preset.
    Reproduce {
        /// fig3, fig4, figA1, figA2 or figA4
        name: String,
        /// Directory for the outputs.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Trajectory row stride.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Print the preset configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Parse and validate a configuration.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct OutputArgs {
    /// Trajectory CSV path (overrides the config).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Report JSON path (overrides the config).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Trajectory row stride (overrides the config).
    #[arg(long)]
    stride: Option<usize>,
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_config(&text)
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("serializable report")
    );
}

fn warn(cfg_warnings: &[String]) {
    for w in cfg_warnings {
        eprintln!("warning: {w}");
    }
}

fn parse_grid(spec: &str, log: bool) -> Result<Vec<f64>, Error> {
    let bad = |m: String| Error::Config(vec![m]);
    if let Some((a, rest)) = spec.split_once(':') {
        let (b, n) = rest
            .split_once(':')
            .ok_or_else(|| bad(format!("grid `{spec}` must be start:stop:count")))?;
        let a: f64 = a
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad grid start `{a}`")))?;
        let b: f64 = b
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad grid stop `{b}`")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad grid count `{n}`")))?;
        if n == 0 {
            return Err(bad("grid count must be positive".into()));
        }
        if n == 1 {
            return Ok(vec![a]);
        }
        if log && !(a > 0.0 && b > 0.0) {
            return Err(bad("logarithmic grids need positive bounds".into()));
        }
        Ok((0..n)
            .map(|k| {
                let f = k as f64 / (n - 1) as f64;
                if log {
                    a * (b / a).powf(f)
                } else {
                    a + (b - a) * f
                }
            })
            .collect())
    } else {
        spec.split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| bad(format!("bad grid value `{v}`")))
            })
            .collect()
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            warn(&cfg.warnings);
            print_json(&cfg.to_document());
        }
        Command::Simulate { config, out } => {
            let mut cfg = load(&config)?;
            warn(&cfg.warnings);
            if out.csv.is_some() {
                cfg.outputs.trajectory_csv = out.csv;
            }
            if out.report.is_some() {
                cfg.outputs.report_json = out.report;
            }
            if let Some(s) = out.stride {
                cfg.outputs.stride = s.max(1);
            }
            let result = run_scenario(&cfg)?;
            for p in emit_outputs(&result, &cfg.outputs)? {
                eprintln!("wrote {}", p.display());
            }
            warn(&result.warnings);
            if cfg.outputs.report_json.is_none() {
                print_json(&result);
            }
        }
        Command::Sweep {
            config,
            axis,
            grid,
            log,
            out,
        } => {
            let cfg = load(&config)?;
            warn(&cfg.warnings);
            let axis: SweepAxis = axis.parse()?;
            let grid = parse_grid(&grid, log)?;
            let rows = run_sweep(&cfg, axis, &grid)?;
            let failed = rows.iter().filter(|r| !r.ok).count();
            match out {
                Some(p) => {
                    write_rows_csv(&p, &rows)?;
                    eprintln!(
                        "wrote {} ({} rows, {failed} failed)",
                        p.display(),
                        rows.len()
                    );
                }
                None => print_json(&rows),
            }
        }
        Command::Close { config } => {
            let cfg = load(&config)?;
            warn(&cfg.warnings);
            let f = cfg.field;
            let model = TranslationalModel::new(
                cfg.constants,
                cfg.particle,
                FieldProtocol::new(f.b0, f.b1, f.eta, cfg.protocol.taus)?,
            )?;
            let c = close_interferometer(
                &model,
                &cfg.scheme.branches(),
                &ClosureOptions::for_mass(cfg.particle.mass),
            )?;
            print_json(&serde_json::json!({
                "tau1_s": c.protocol.tau1,
                "tau2_s": c.protocol.tau2,
                "tau3_s": c.protocol.tau3,
                "tau4_s": c.protocol.tau4,
                "residual_z_m": c.residual_z,
                "residual_v_m_s": c.residual_p / cfg.particle.mass,
                "iterations": c.iterations,
            }));
        }
        Command::SpinCheck {
            config,
            window_us,
            margin,
            rabi_threshold,
        } => {
            let cfg = load(&config)?;
            warn(&cfg.warnings);
            if window_us.is_nan() || window_us <= 0.0 {
                return Err(Error::Config(vec!["--window-us must be positive".into()]));
            }
            let report = spin_check(&cfg, window_us * 1e-6, margin, rabi_threshold)?;
            print_json(&report);
            if !report.passed {
                eprintln!("warning: spin levels are not safely off resonance");
            }
        }
        Command::Reproduce {
            name,
            out_dir,
            stride,
            print_config,
        } => {
            let cfg = preset(&name)?;
            if print_config {
                let src = PRESETS
                    .iter()
                    .find(|(n, _)| n.eq_ignore_ascii_case(&name))
                    .map(|(_, s)| *s);
                print!("{}", src.unwrap_or_default());
                return Ok(());
            }
            let result = run_scenario(&cfg)?;
            let stem = cfg.name.clone().unwrap_or(name);
            let traj = out_dir.join(format!("{stem}_trajectory.csv"));
            let report = out_dir.join(format!("{stem}_report.json"));
            write_trajectory_csv(&traj, &result.trajectory, stride)?;
            write_json(&report, &result)?;
            eprintln!("wrote {}", traj.display());
            eprintln!("wrote {}", report.display());
            if stem == "fig4" {
                let omegas: Vec<f64> = (1..=40).map(|k| 2.5e3 * k as f64).collect();
                let rows =
                    omega0_curve_from_run(&cfg, &result, &omegas, &[1.0, 3.0, 7.0], &[0.0, 20.0])?;
                let curve = out_dir.join("fig4_contrast_curve.csv");
                write_rows_csv(&curve, &rows)?;
                eprintln!("wrote {}", curve.display());
            }
            warn(&result.warnings);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1,2,3", false).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_grid("0:10:3", false).unwrap(), vec![0.0, 5.0, 10.0]);
        let g = parse_grid("1:100:3", true).unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert!(parse_grid("1:2", false).is_err());
        assert!(parse_grid("a,b", false).is_err());
        assert!(parse_grid("0:1:3", true).is_err());
    }
}
