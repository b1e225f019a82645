//! File emission: path CSVs, plot data, threshold reports, ensemble
//! summaries and jump-train dumps. Numbers are written with 17 significant
//! digits so re-reading reproduces the f64 values exactly.

use crate::analytics::RegimeVerdict;
use crate::config::{emit_config, ExperimentConfig};
use crate::engine::{EnsembleSummary, SirPath};
use crate::model::ThresholdReport;
use crate::sampler::JumpTrain;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns of a path CSV, as written by [`write_path_csv`].
#[derive(Debug, Clone, Default)]
pub struct PathTable {
    pub times: Vec<f64>,
    pub susceptible: Vec<f64>,
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
    pub avg_susceptible: Vec<f64>,
    pub avg_infected: Vec<f64>,
    pub avg_recovered: Vec<f64>,
}

/// Writes `t,S,I,R,avgS,avgI,avgR` rows, keeping every `stride`-th grid
/// point plus the final one.
pub fn write_path_csv(path: &SirPath, file: &Path, stride: usize) -> io::Result<()> {
    let stride = stride.max(1);
    let mut w = BufWriter::new(fs::File::create(file)?);
    writeln!(w, "t,S,I,R,avgS,avgI,avgR")?;
    let last = path.times.len() - 1;
    let mut k = 0;
    while k <= last {
        write_row(&mut w, path, k)?;
        if k == last {
            break;
        }
        k = (k + stride).min(last);
    }
    w.flush()
}

fn write_row<W: Write>(w: &mut W, path: &SirPath, k: usize) -> io::Result<()> {
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        num(path.times[k]),
        num(path.susceptible[k]),
        num(path.infected[k]),
        num(path.recovered[k]),
        num(path.avg_susceptible[k]),
        num(path.avg_infected[k]),
        num(path.avg_recovered[k]),
    )
}

/// Reads a path CSV back into columns.
pub fn read_path_csv(file: &Path) -> io::Result<PathTable> {
    let text = fs::read_to_string(file)?;
    let mut table = PathTable::default();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            continue; // header
        }
        let mut fields = line.split(',');
        let mut next = || -> io::Result<f64> {
            fields
                .next()
                .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "short row"))?
                .trim()
                .parse::<f64>()
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        };
        table.times.push(next()?);
        table.susceptible.push(next()?);
        table.infected.push(next()?);
        table.recovered.push(next()?);
        table.avg_susceptible.push(next()?);
        table.avg_infected.push(next()?);
        table.avg_recovered.push(next()?);
    }
    Ok(table)
}

/// Plot-ready data: the path columns plus constant reference columns at the
/// predicted long-run limits.
pub fn write_plot_data(
    path: &SirPath,
    report: &ThresholdReport,
    file: &Path,
    stride: usize,
) -> io::Result<()> {
    let stride = stride.max(1);
    let mut w = BufWriter::new(fs::File::create(file)?);
    writeln!(w, "t,S,I,R,avgS,avgI,avgR,refS,refI,refR")?;
    let refs = report.predicted_limits;
    let last = path.times.len() - 1;
    let mut k = 0;
    while k <= last {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            num(path.times[k]),
            num(path.susceptible[k]),
            num(path.infected[k]),
            num(path.recovered[k]),
            num(path.avg_susceptible[k]),
            num(path.avg_infected[k]),
            num(path.avg_recovered[k]),
            num(refs[0]),
            num(refs[1]),
            num(refs[2]),
        )?;
        if k == last {
            break;
        }
        k = (k + stride).min(last);
    }
    w.flush()
}

/// The cross-path moment curve t -> mean (1+U_t)^p.
pub fn write_moment_curve(summary: &EnsembleSummary, file: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(file)?);
    writeln!(w, "t,mean_moment_p{}", summary.moment_probe_p)?;
    for (t, m) in &summary.moment_curve {
        writeln!(w, "{},{}", num(*t), num(*m))?;
    }
    w.flush()
}

pub fn threshold_report_text(report: &ThresholdReport) -> String {
    let h = &report.hypotheses;
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k}: {v}\n"));
    line("r0", num(report.r0));
    line("beta_1", num(report.beta_noise[0]));
    line("beta_2", num(report.beta_noise[1]));
    line("beta_3", num(report.beta_noise[2]));
    line("r0_bar", num(report.r0_bar));
    line("p", num(report.p));
    line(
        "lambda_p",
        report.lambda_p.map(num).unwrap_or_else(|| "divergent".into()),
    );
    line("rho_inf_norm", num(report.rho_inf_norm));
    line("H1", h.h1.to_string());
    line("H2", h.h2.to_string());
    line(
        "H3",
        match h.h3_bound {
            Some(bound) => format!("{} (mu vs bound {})", h.h3, num(bound)),
            None => h.h3.to_string(),
        },
    );
    line("H4", h.h4.to_string());
    line("H5", h.h5.to_string());
    line("regime", report.regime.to_string());
    line("predicted_avg_s", num(report.predicted_limits[0]));
    line("predicted_avg_i", num(report.predicted_limits[1]));
    line("predicted_avg_r", num(report.predicted_limits[2]));
    if let Some(reason) = &report.indeterminate_reason {
        line("indeterminate_reason", reason.clone());
    }
    out
}

pub fn write_threshold_report(report: &ThresholdReport, file: &Path) -> io::Result<()> {
    fs::write(file, threshold_report_text(report))
}

pub fn verdict_text(verdict: &RegimeVerdict) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k}: {v}\n"));
    line("detected_regime", verdict.detected.to_string());
    line(
        "extinction_time",
        verdict
            .extinction_time
            .map(num)
            .unwrap_or_else(|| "none".into()),
    );
    line("empirical_avg_s", num(verdict.empirical_limits[0]));
    line("empirical_avg_i", num(verdict.empirical_limits[1]));
    line("empirical_avg_r", num(verdict.empirical_limits[2]));
    line("deviation_s", num(verdict.deviations[0]));
    line("deviation_i", num(verdict.deviations[1]));
    line("deviation_r", num(verdict.deviations[2]));
    out
}

pub fn ensemble_summary_text(summary: &EnsembleSummary, verdict: &RegimeVerdict) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k}: {v}\n"));
    line("paths", summary.n_paths.to_string());
    line("t_end", num(summary.t_end));
    line("dt", num(summary.dt));
    line("seed", summary.seed.to_string());
    line("mean_terminal_s", num(summary.mean_terminal[0]));
    line("mean_terminal_i", num(summary.mean_terminal[1]));
    line("mean_terminal_r", num(summary.mean_terminal[2]));
    line("mean_avg_s", num(summary.mean_time_avg[0]));
    line("mean_avg_i", num(summary.mean_time_avg[1]));
    line("mean_avg_r", num(summary.mean_time_avg[2]));
    line(
        "terminal_i_q10_q50_q90",
        format!(
            "{}, {}, {}",
            num(summary.terminal_infected_quantiles[0]),
            num(summary.terminal_infected_quantiles[1]),
            num(summary.terminal_infected_quantiles[2])
        ),
    );
    line(
        "avg_i_q10_q50_q90",
        format!(
            "{}, {}, {}",
            num(summary.avg_infected_quantiles[0]),
            num(summary.avg_infected_quantiles[1]),
            num(summary.avg_infected_quantiles[2])
        ),
    );
    line("extinct_fraction", num(summary.extinct_fraction));
    line(
        "median_extinction_time",
        summary
            .median_extinction_time
            .map(num)
            .unwrap_or_else(|| "none".into()),
    );
    line(
        "floor_activation_fraction",
        num(summary.floor_activation_fraction),
    );
    line(
        "max_conservation_error",
        num(summary.max_conservation_error),
    );
    out.push_str(&verdict_text(verdict));
    out
}

/// Dumps a jump train as delimited text with drift and truncation metadata.
pub fn write_jump_train(train: &JumpTrain, file: &Path) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(file)?);
    writeln!(w, "# horizon = {}", num(train.horizon))?;
    writeln!(w, "# trunc_eps = {}", num(train.trunc_eps))?;
    writeln!(w, "# drift_per_unit_time = {}", num(train.drift))?;
    writeln!(w, "u,size")?;
    for &(u, size) in &train.jumps {
        writeln!(w, "{},{}", num(u), num(size))?;
    }
    w.flush()
}

/// Everything a `simulate` or `ensemble` run writes to its output directory.
pub struct RunArtifacts<'a> {
    pub config: &'a ExperimentConfig,
    pub report: &'a ThresholdReport,
    pub verdict: &'a RegimeVerdict,
    /// Fully stored paths to dump as CSVs (path index, series).
    pub paths: &'a [(usize, SirPath)],
    pub summary: Option<&'a EnsembleSummary>,
    /// CSV row stride for the dumped paths.
    pub csv_stride: usize,
}

/// Writes all artifacts into `dir`, creating it if needed. Returns the list
/// of files written.
pub fn emit_outputs(dir: &Path, artifacts: &RunArtifacts) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut record = |p: PathBuf| -> PathBuf {
        written.push(p.clone());
        p
    };

    fs::write(
        record(dir.join("config.txt")),
        emit_config(artifacts.config),
    )?;
    write_threshold_report(artifacts.report, &record(dir.join("threshold_report.txt")))?;

    for (index, path) in artifacts.paths {
        write_path_csv(
            path,
            &record(dir.join(format!("path_{index:03}.csv"))),
            artifacts.csv_stride,
        )?;
    }
    if let Some((_, first)) = artifacts.paths.first() {
        write_plot_data(
            first,
            artifacts.report,
            &record(dir.join("plot_data.csv")),
            artifacts.csv_stride,
        )?;
    }
    match artifacts.summary {
        Some(summary) => {
            fs::write(
                record(dir.join("ensemble_summary.txt")),
                ensemble_summary_text(summary, artifacts.verdict),
            )?;
            write_moment_curve(summary, &record(dir.join("plot_moments.csv")))?;
        }
        None => {
            fs::write(
                record(dir.join("path_summary.txt")),
                verdict_text(artifacts.verdict),
            )?;
        }
    }
    Ok(written)
}
