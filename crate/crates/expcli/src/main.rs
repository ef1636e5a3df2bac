use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use endo_core::acd::{simulate_acd, AcdParams};
use endo_core::diagnostics::{compare_kernels, ks_uniform_test, residual_process};
use endo_core::estimate::{fit_hawkes, BiasTable};
use endo_core::hawkes::{simulate_branching, simulate_thinning, HawkesParams, Kernel, KernelFamily};
use endo_core::rng::RngSpec;
use endo_core::EventSeries;
use endo_expcli::config::SweepConfig;
use endo_expcli::error::{HarnessError, Result};
use endo_expcli::ingest::{extract_pot_events, ingest_events, read_values, EventFormat};
use endo_expcli::output::{self, write_file, Manifest};
use endo_expcli::{run_bias_study, run_grid, run_table1, run_zeta_sweep, with_jobs};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "endo", version, about = "Hawkes calibration experiments on ACD(1,1) and Hawkes event series")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Replica-count multiplier.
    #[arg(long, global = true)]
    scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// ζ sweep over the configured cases (figure 3 and 4 data).
    Sweep,
    /// (α, β) grid with α + β ≤ 1 (figure 5 data).
    Grid,
    /// Finite-sample bias study of the exponential MLE (figure 7 data and bias table).
    Bias,
    /// Exponential versus power-law kernel comparison (table 1 and figure 6 data).
    Table1,
    /// Fit a Hawkes model to an event file.
    Fit {
        events: PathBuf,
        #[arg(long, value_enum)]
        format: Option<EventFormat>,
        #[arg(long, default_value = "exponential")]
        family: KernelFamily,
        /// Fit both kernels and select by AIC.
        #[arg(long)]
        compare: bool,
        /// Bias table used to correct the branching ratio.
        #[arg(long)]
        bias_table: Option<PathBuf>,
    },
    /// Simulate a Hawkes or ACD(1,1) event series.
    Simulate(SimulateArgs),
    /// Residual KS test of an event file against fitted or given parameters.
    Gof {
        events: PathBuf,
        #[arg(long, value_enum)]
        format: Option<EventFormat>,
        /// JSON parameters; fitted when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value = "exponential")]
        family: KernelFamily,
    },
    /// Validate an event file and write it as JSON.
    Ingest {
        events: PathBuf,
        #[arg(long, value_enum)]
        format: Option<EventFormat>,
    },
    /// Peak-over-threshold events of a value series.
    Pot {
        values: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        lower: f64,
        #[arg(long, default_value_t = 0.9)]
        upper: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Hawkes,
    Branching,
    Acd,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "hawkes")]
    model: Model,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Observation window of the branching simulator.
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Power-law kernel offset; selects the power-law kernel together with `--phi`.
    #[arg(long, requires = "phi")]
    c: Option<f64>,
    #[arg(long, requires = "c")]
    phi: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, default_value_t = 0.25)]
    beta: f64,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Grid => "grid",
            Command::Bias => "bias",
            Command::Table1 => "table1",
            Command::Fit { .. } => "fit",
            Command::Simulate(_) => "simulate",
            Command::Gof { .. } => "gof",
            Command::Ingest { .. } => "ingest",
            Command::Pot { .. } => "pot",
        }
    }
}

fn load_config(common: &Common) -> Result<SweepConfig> {
    let mut cfg = match &common.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::default(),
    };
    if let Some(out) = &common.out {
        if cfg.bias_table == SweepConfig::default().bias_table {
            cfg.bias_table = Some(out.join("bias_table.json"));
        }
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.jobs.is_some() {
        cfg.jobs = common.jobs;
    }
    if let Some(scale) = common.scale {
        cfg.scale = scale;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec_pretty(value).expect("serializable")
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", String::from_utf8(json_bytes(value)).expect("utf-8"));
}

fn simulate(args: &SimulateArgs, seed: u64) -> Result<(EventSeries, String)> {
    let rng = RngSpec::new(seed, args.stream);
    let kernel = match (args.c, args.phi) {
        (Some(c), Some(phi)) => Kernel::power_law(args.eta, c, phi),
        _ => Kernel::exponential(args.eta, args.tau),
    };
    let (events, detail) = match args.model {
        Model::Hawkes => {
            let params = HawkesParams::new(args.mu, kernel)?;
            let events = simulate_thinning(&params, args.n + args.burn_in, rng)?;
            let csv = events.to_csv();
            (events, csv)
        }
        Model::Branching => {
            let params = HawkesParams::new(args.mu, kernel)?;
            let r = simulate_branching(&params, args.horizon, rng)?;
            let csv = r.to_csv();
            (r.events, csv)
        }
        Model::Acd => {
            let params = AcdParams::new(args.omega, args.alpha, args.beta)?;
            let r = simulate_acd(&params, args.n + args.burn_in, rng)?;
            let csv = r.to_csv();
            (r.events, csv)
        }
    };
    if args.burn_in > 0 && !matches!(args.model, Model::Branching) {
        let kept = events.discard_burn_in(args.burn_in)?;
        let csv = kept.to_csv();
        return Ok((kept, csv));
    }
    Ok((events, detail))
}

fn run(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let cfg = load_config(&cli.common)?;
    let dir = cfg.out_dir.clone();
    let mut manifest = Manifest::new(cli.command.name(), &cfg);
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut verdict = Ok(());

    with_jobs(cfg.jobs, || -> Result<()> {
        match &cli.command {
            Command::Sweep => {
                let result = run_zeta_sweep(&cfg)?;
                outputs.extend(output::write_sweep_outputs(&result, &dir)?);
                if let Some(p) = &cfg.bias_table {
                    manifest.notes.push(format!("bias table: {}", p.display()));
                }
                verdict = result.check();
            }
            Command::Grid => {
                let result = run_grid(&cfg)?;
                outputs.extend(output::write_grid_outputs(&result, &dir)?);
                manifest.notes.push("reject_5pct marks cells whose mean KS p-value is below 0.05".into());
                verdict = result.check();
            }
            Command::Bias => {
                let study = run_bias_study(&cfg)?;
                outputs.extend(output::write_bias_outputs(&study, &dir)?);
            }
            Command::Table1 => {
                let result = run_table1(&cfg)?;
                outputs.extend(output::write_table1_outputs(&result, &dir)?);
                print_json(&result.summaries);
            }
            Command::Fit { events, format, family, compare, bias_table } => {
                let series = ingest_events(events, *format)?;
                let value = if *compare {
                    serde_json::to_value(compare_kernels(&series, &cfg.fit)?)
                } else {
                    let mut fit = fit_hawkes(&series, &cfg.fit.with_family(*family))?;
                    if let Some(path) = bias_table {
                        fit = fit.with_bias_correction(&BiasTable::load(path)?)?;
                    }
                    serde_json::to_value(fit)
                }
                .expect("serializable");
                outputs.push(write_file(&dir, "fit.json", &json_bytes(&value))?);
                print_json(&value);
            }
            Command::Simulate(args) => {
                let (events, csv) = simulate(args, cfg.seed)?;
                outputs.push(write_file(&dir, "events.csv", csv.as_bytes())?);
                outputs.push(write_file(&dir, "events.json", events.to_json()?.as_bytes())?);
                println!("{} events on [0, {}]", events.len(), events.horizon());
            }
            Command::Gof { events, format, params, family } => {
                let series = ingest_events(events, *format)?;
                let params: HawkesParams = match params {
                    Some(path) => {
                        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                        let p: HawkesParams = serde_json::from_str(&text)
                            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                        HawkesParams::new(p.mu, p.kernel)?
                    }
                    None => fit_hawkes(&series, &cfg.fit.with_family(*family))?.params,
                };
                let residuals = residual_process(&series, &params);
                let report = ks_uniform_test(&residuals.u)?;
                let mut csv = String::from("index,xi,u\n");
                for (i, (x, u)) in residuals.xi.iter().zip(&residuals.u).enumerate() {
                    csv.push_str(&format!("{i},{x},{u}\n"));
                }
                let value = serde_json::json!({ "params": params, "gof": report });
                outputs.push(write_file(&dir, "residuals.csv", csv.as_bytes())?);
                outputs.push(write_file(&dir, "gof.json", &json_bytes(&value))?);
                print_json(&value);
            }
            Command::Ingest { events, format } => {
                let series = ingest_events(events, *format)?;
                outputs.push(write_file(&dir, "events.json", series.to_json()?.as_bytes())?);
                println!("{} events on [0, {}]", series.len(), series.horizon());
            }
            Command::Pot { values, lower, upper } => {
                let v = read_values(values)?;
                let series = extract_pot_events(&v, *lower, *upper)?;
                manifest.notes.push("event times are 1-based observation indices; horizon is the series length".into());
                outputs.push(write_file(&dir, "events.csv", series.to_csv().as_bytes())?);
                outputs.push(write_file(&dir, "events.json", series.to_json()?.as_bytes())?);
                println!("{} of {} observations are events", series.len(), v.len());
            }
        }
        Ok(())
    })??;

    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.outputs = outputs.iter().map(|p| display_name(p, &dir)).collect();
    manifest.write(&dir)?;
    verdict
}

fn display_name(path: &Path, dir: &Path) -> String {
    path.strip_prefix(dir).unwrap_or(path).display().to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
