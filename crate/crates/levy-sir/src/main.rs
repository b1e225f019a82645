//! Command-line surface: threshold analytics, single-path simulation,
//! Monte Carlo ensembles, jump-sampler self-tests and hypothesis checks.

use clap::{Args, Parser, Subcommand};
use levy_sir::analytics::{verdict_ensemble, verdict_path, DetectorSettings, VerdictSettings};
use levy_sir::config::{parse_config, preset, ExperimentConfig, PRESET_NAMES};
use levy_sir::engine::{
    run_ensemble, simulate_ensemble_member, simulate_path, ProbeSettings, SimConfig,
};
use levy_sir::model::{check_hypotheses, classify_regime, ThresholdReport};
use levy_sir::output::{
    emit_outputs, ensemble_summary_text, threshold_report_text, verdict_text, write_jump_train,
    RunArtifacts,
};
use levy_sir::quad::QuadratureSettings;
use levy_sir::sampler::{cumulant, sample_jump_train, RngStream};
use std::error::Error;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "levy-sir",
    version,
    about = "Stochastic SIR epidemic model with correlated Brownian noise and \
             tempered stable jumps: threshold analytics and Monte Carlo simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where the experiment configuration comes from, plus value overrides.
#[derive(Args)]
struct Source {
    /// Configuration file in the `section.key = value` format.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario preset (see `preset-list`).
    #[arg(long)]
    preset: Option<String>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the simulation horizon.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Override the time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the analysis moment order p.
    #[arg(long)]
    p: Option<f64>,
    /// Override the ensemble size.
    #[arg(long)]
    paths: Option<usize>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig, Box<dyn Error>> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(file), None) => parse_config(&std::fs::read_to_string(file)?)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => return Err("pass --preset <name> or --config <file>".into()),
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        };
        if let Some(seed) = self.seed {
            cfg.sim.seed = seed;
        }
        if let Some(t_end) = self.t_end {
            cfg.sim.t_end = t_end;
        }
        if let Some(dt) = self.dt {
            cfg.sim.dt = dt;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(paths) = self.paths {
            cfg.ensemble_size = paths;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the threshold report (R0, beta_i, R0_bar, hypotheses, regime).
    Analyze {
        #[command(flatten)]
        source: Source,
        /// Directory to write threshold_report.txt into.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a single path and compare it against the threshold prediction.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV row stride; 0 picks one keeping at most ~5000 rows.
        #[arg(long, default_value_t = 0)]
        csv_stride: usize,
    },
    /// Run a Monte Carlo ensemble and report cross-path statistics.
    Ensemble {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of member paths to dump as CSVs when --out is given.
        #[arg(long, default_value_t = 2)]
        dump_paths: usize,
        #[arg(long, default_value_t = 0)]
        csv_stride: usize,
    },
    /// Sample jump trains and check their moments against the cumulants.
    SampleTs {
        #[command(flatten)]
        source: Source,
        /// Number of unit-horizon trains for the moment self-test.
        #[arg(long, default_value_t = 10_000)]
        trains: usize,
        /// Directory to dump the first train into.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the hypothesis conditions gating the threshold theorems.
    Check {
        #[command(flatten)]
        source: Source,
    },
    /// List the built-in presets.
    PresetList,
}

fn analyze_config(cfg: &ExperimentConfig) -> Result<ThresholdReport, Box<dyn Error>> {
    Ok(classify_regime(
        &cfg.sim.model,
        &cfg.sim.noise,
        cfg.p,
        1e-6,
        &QuadratureSettings::default(),
    )?)
}

fn auto_stride(sim: &SimConfig, requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        (sim.n_steps() / 5000).max(1)
    }
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::PresetList => {
            for name in PRESET_NAMES {
                let cfg = preset(name)?;
                let n = &cfg.sim.noise;
                println!(
                    "{name}: alpha = {}, sigma = ({}, {}, {}), brownian = {}",
                    n.ts.alpha,
                    n.jump_loadings[0],
                    n.jump_loadings[1],
                    n.jump_loadings[2],
                    if n.covariance.iter().flatten().all(|v| *v == 0.0) {
                        "off"
                    } else {
                        "on"
                    }
                );
            }
        }
        Command::Analyze { source, out } => {
            let cfg = source.load()?;
            let report = analyze_config(&cfg)?;
            print!("{}", threshold_report_text(&report));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                levy_sir::output::write_threshold_report(
                    &report,
                    &dir.join("threshold_report.txt"),
                )?;
                println!("wrote {}", dir.join("threshold_report.txt").display());
            }
        }
        Command::Check { source } => {
            let cfg = source.load()?;
            let h = check_hypotheses(&cfg.sim.model, &cfg.sim.noise, cfg.p);
            println!("p: {}", h.p);
            println!("H1 (square-integrable loadings): {}", h.h1);
            println!("H2 (jumps bounded below -1):     {}", h.h2);
            match h.h3_bound {
                Some(b) => println!(
                    "H3 (mu > (p-1)/2 ||rho|| + lambda(p)/p): {} (mu = {}, bound = {b:.6})",
                    h.h3, cfg.sim.model.mortality
                ),
                None => println!("H3: {}", h.h3),
            }
            println!("H4 (p-variation of jump factor): {}", h.h4);
            println!("H5 (square-integrable log jumps): {}", h.h5);
            println!("all pass: {}", h.all_pass());
        }
        Command::Simulate {
            source,
            out,
            csv_stride,
        } => {
            let cfg = source.load()?;
            let report = analyze_config(&cfg)?;
            let path = simulate_path(&cfg.sim)?;
            let detector = DetectorSettings::for_horizon(cfg.sim.t_end);
            let verdict = verdict_path(&path, &report, &detector, &VerdictSettings::default());
            println!("r0_bar: {}", report.r0_bar);
            println!("predicted regime: {}", report.regime);
            print!("{}", verdict_text(&verdict));
            println!("jumps applied: {}", path.jump_count);
            println!("floor activations: {}", path.floor_activations);
            if let Some(dir) = out {
                let files = emit_outputs(
                    &dir,
                    &RunArtifacts {
                        config: &cfg,
                        report: &report,
                        verdict: &verdict,
                        paths: &[(0, path)],
                        summary: None,
                        csv_stride: auto_stride(&cfg.sim, csv_stride),
                    },
                )?;
                println!("wrote {} files to {}", files.len(), dir.display());
            }
        }
        Command::Ensemble {
            source,
            out,
            dump_paths,
            csv_stride,
        } => {
            let cfg = source.load()?;
            let report = analyze_config(&cfg)?;
            let probe = ProbeSettings {
                p: cfg.p,
                ..ProbeSettings::for_config(&cfg.sim)
            };
            let detector = DetectorSettings::for_horizon(cfg.sim.t_end);
            let summary = run_ensemble(&cfg.sim, cfg.ensemble_size, &probe, &detector)?;
            let verdict = verdict_ensemble(&summary, &report, &VerdictSettings::default());
            println!("r0_bar: {}", report.r0_bar);
            println!("predicted regime: {}", report.regime);
            print!("{}", ensemble_summary_text(&summary, &verdict));
            if let Some(dir) = out {
                let n_dump = dump_paths.min(cfg.ensemble_size);
                let mut paths = Vec::with_capacity(n_dump);
                for k in 0..n_dump {
                    paths.push((k, simulate_ensemble_member(&cfg.sim, k as u64)?));
                }
                let files = emit_outputs(
                    &dir,
                    &RunArtifacts {
                        config: &cfg,
                        report: &report,
                        verdict: &verdict,
                        paths: &paths,
                        summary: Some(&summary),
                        csv_stride: auto_stride(&cfg.sim, csv_stride),
                    },
                )?;
                println!("wrote {} files to {}", files.len(), dir.display());
            }
        }
        Command::SampleTs {
            source,
            trains,
            out,
        } => {
            let cfg = source.load()?;
            let ts = &cfg.sim.noise.ts;
            let horizon = 1.0;
            let trunc_eps = cfg.sim.trunc_eps;
            let n = trains.max(2);
            let mut mean = 0.0;
            let mut m2 = 0.0;
            let mut jump_total = 0usize;
            for i in 0..n {
                let train = sample_jump_train(
                    ts,
                    horizon,
                    trunc_eps,
                    RngStream::new(cfg.sim.seed, i as u64),
                )?;
                jump_total += train.jumps.len();
                let y = train.terminal_value();
                let delta = y - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (y - mean);
            }
            let var = m2 / (n - 1) as f64;
            let kappa1 = cumulant(ts, 1)?;
            let kappa2 = cumulant(ts, 2)?;
            let kappa4 = cumulant(ts, 4)?;
            let se_mean = (kappa2 / n as f64).sqrt();
            let se_var = ((kappa4 + 2.0 * kappa2 * kappa2) / n as f64).sqrt();
            println!("trains: {n}, horizon: {horizon}, trunc_eps: {trunc_eps}");
            println!("mean jumps per train: {:.1}", jump_total as f64 / n as f64);
            println!(
                "sample mean: {mean:.6}  expected kappa1: {kappa1:.6}  z: {:+.2}",
                (mean - kappa1) / se_mean
            );
            println!(
                "sample variance: {var:.6}  expected kappa2: {kappa2:.6}  z: {:+.2}",
                (var - kappa2) / se_var
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                let train =
                    sample_jump_train(ts, horizon, trunc_eps, RngStream::new(cfg.sim.seed, 0))?;
                let file = dir.join("jump_train.txt");
                write_jump_train(&train, &file)?;
                println!("wrote {}", file.display());
            }
        }
    }
    Ok(())
}
