//! Euler-Maruyama time stepping of the jump SIR system and path-parallel
//! Monte Carlo ensembles.
//!
//! Each path owns two RNG streams derived from the configured seed: stream
//! 2k drives the jump series of path k, stream 2k+1 its Gaussian increments.
//! A jump at u in (t_k, t_{k+1}] is applied at the end of step k using the
//! pre-jump state, matching the left-limit convention of the dynamics.
//! Ensembles aggregate per-path statistics in path order, so parallel and
//! sequential runs produce bit-identical summaries.

use crate::analytics::{DetectorSettings, ExtinctionTracker};
use crate::model::{ModelParams, NoiseSpec};
use crate::sampler::{
    brownian_factor, gaussian_step, is_zero_matrix, streamed_increments, NeumaierSum, RngStream,
    SamplerError,
};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Error)]
pub enum EngineError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(
        "two-sided jump measure with positive loadings: states could jump \
         negative; construct the noise one-sided or zero the loadings"
    )]
    TwoSidedJumps,
    #[error("state diverged at t = {t}: ({susceptible}, {infected}, {recovered})")]
    StepDiverged {
        t: f64,
        susceptible: f64,
        infected: f64,
        recovered: f64,
    },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Compartment state at a point in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirState {
    pub t: f64,
    pub susceptible: f64,
    pub infected: f64,
    pub recovered: f64,
}

/// Full simulation configuration for one path or ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: ModelParams,
    pub noise: NoiseSpec,
    /// Initial (S, I, R), strictly positive.
    pub initial: [f64; 3],
    pub t_end: f64,
    pub dt: f64,
    /// Envelope truncation threshold of the jump series.
    pub trunc_eps: f64,
    /// Relative positivity floor: each component is clamped at
    /// `floor * previous value` and activations are counted.
    pub floor: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |msg: String| Err(EngineError::InvalidConfig(msg));
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return fail(format!("sim.t_end must be positive, got {}", self.t_end));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_end) {
            return fail(format!("sim.dt must lie in (0, t_end], got {}", self.dt));
        }
        let n = self.t_end / self.dt;
        if (n - n.round()).abs() > 1e-6 || n.round() < 1.0 {
            return fail(format!(
                "sim.t_end / sim.dt must be integral within rounding, got {n}"
            ));
        }
        for v in self.initial {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("sim.initial must be strictly positive, got {v}"));
            }
        }
        if !(self.trunc_eps > 0.0) {
            return fail(format!(
                "sim.trunc_eps must be positive, got {}",
                self.trunc_eps
            ));
        }
        if !(0.0..1.0).contains(&self.floor) {
            return fail(format!("sim.floor must lie in [0, 1), got {}", self.floor));
        }
        Ok(())
    }

    fn screen_jumps(&self) -> Result<(), EngineError> {
        if self.noise.has_jumps() && !self.noise.ts.is_one_sided_positive() {
            return Err(EngineError::TwoSidedJumps);
        }
        Ok(())
    }
}

/// One Euler step of the full system; the driver increments are passed in.
/// Returns the new state and the number of floor clamps applied (0..=3).
#[inline]
pub fn euler_step(
    state: &SirState,
    m: &ModelParams,
    loadings: &[f64; 3],
    db: &[f64; 3],
    dy: f64,
    dt: f64,
    floor: f64,
) -> Result<(SirState, u32), EngineError> {
    let (s, i, r) = (state.susceptible, state.infected, state.recovered);
    let infection = m.transmission * s * i;
    let mut s_next =
        s + (m.influx - m.mortality * s - infection) * dt + s * db[0] + loadings[0] * s * dy;
    let mut i_next =
        i + (infection - m.removal_rate() * i) * dt + i * db[1] + loadings[1] * i * dy;
    let mut r_next =
        r + (m.recovery * i - m.mortality * r) * dt + r * db[2] + loadings[2] * r * dy;

    let mut clamps = 0u32;
    if s_next < floor * s {
        s_next = floor * s;
        clamps += 1;
    }
    if i_next < floor * i {
        i_next = floor * i;
        clamps += 1;
    }
    if r_next < floor * r {
        r_next = floor * r;
        clamps += 1;
    }
    if !(s_next.is_finite() && i_next.is_finite() && r_next.is_finite()) {
        return Err(EngineError::StepDiverged {
            t: state.t,
            susceptible: s,
            infected: i,
            recovered: r,
        });
    }
    Ok((
        SirState {
            t: state.t + dt,
            susceptible: s_next,
            infected: i_next,
            recovered: r_next,
        },
        clamps,
    ))
}

/// A simulated path with running time-averages on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SirPath {
    pub times: Vec<f64>,
    pub susceptible: Vec<f64>,
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
    pub avg_susceptible: Vec<f64>,
    pub avg_infected: Vec<f64>,
    pub avg_recovered: Vec<f64>,
    pub jump_count: usize,
    pub floor_activations: usize,
    /// Sum of driver increments applied across the grid.
    pub driver_total: f64,
    /// Terminal value of the generated driver (jump mass + drift * horizon).
    pub train_total: f64,
}

/// Shared stepping core. `observe` is called after every step with
/// (step index from 1, time, state, running averages).
fn run_path<F: FnMut(usize, f64, [f64; 3], [f64; 3])>(
    cfg: &SimConfig,
    path_index: u64,
    mut observe: F,
) -> Result<PathCore, EngineError> {
    cfg.validate()?;
    cfg.screen_jumps()?;
    let n = cfg.n_steps();
    let dt = cfg.dt;

    let jump_deltas = if cfg.noise.has_jumps() {
        let (deltas, stats) = streamed_increments(
            &cfg.noise.ts,
            cfg.t_end,
            cfg.trunc_eps,
            n,
            RngStream::new(cfg.seed, 2 * path_index),
        )?;
        Some((deltas, stats))
    } else {
        None
    };
    let gaussian = if is_zero_matrix(&cfg.noise.covariance) {
        None
    } else {
        Some((
            brownian_factor(&cfg.noise.covariance, dt)?,
            RngStream::new(cfg.seed, 2 * path_index + 1).rng(),
        ))
    };

    let mut state = SirState {
        t: 0.0,
        susceptible: cfg.initial[0],
        infected: cfg.initial[1],
        recovered: cfg.initial[2],
    };
    let mut floor_activations = 0usize;
    let mut driver_total = NeumaierSum::default();
    let mut int_s = 0.0f64;
    let mut int_i = 0.0f64;
    let mut int_r = 0.0f64;
    let mut gaussian = gaussian;

    for k in 0..n {
        let db = match gaussian.as_mut() {
            Some((l, rng)) => gaussian_step(l, rng),
            None => [0.0; 3],
        };
        let dy = match &jump_deltas {
            Some((deltas, _)) => deltas[k],
            None => 0.0,
        };
        int_s += state.susceptible * dt;
        int_i += state.infected * dt;
        int_r += state.recovered * dt;
        let (next, clamps) =
            euler_step(&state, &cfg.model, &cfg.noise.jump_loadings, &db, dy, dt, cfg.floor)?;
        floor_activations += clamps as usize;
        driver_total.add(dy);
        state = next;
        state.t = (k + 1) as f64 * dt;
        let t = state.t;
        observe(
            k + 1,
            t,
            [state.susceptible, state.infected, state.recovered],
            [int_s / t, int_i / t, int_r / t],
        );
    }

    let (jump_count, train_total) = match &jump_deltas {
        Some((_, stats)) => (stats.count, stats.jump_mass + stats.drift * cfg.t_end),
        None => (0, 0.0),
    };
    Ok(PathCore {
        terminal: [state.susceptible, state.infected, state.recovered],
        time_avg: [
            int_s / cfg.t_end,
            int_i / cfg.t_end,
            int_r / cfg.t_end,
        ],
        floor_activations,
        jump_count,
        driver_total: driver_total.value(),
        train_total,
        steps: n,
    })
}

struct PathCore {
    terminal: [f64; 3],
    time_avg: [f64; 3],
    floor_activations: usize,
    jump_count: usize,
    driver_total: f64,
    train_total: f64,
    steps: usize,
}

impl PathCore {
    /// |applied - generated| relative to the driver scale; both sum the same
    /// jumps, so this measures bucketing and accumulation error only.
    fn conservation_error(&self) -> f64 {
        (self.driver_total - self.train_total).abs()
            / self.train_total.abs().max(1.0)
    }
}

/// Simulates a single path, recording the full grid. Equivalent to ensemble
/// member 0 of the same config.
pub fn simulate_path(cfg: &SimConfig) -> Result<SirPath, EngineError> {
    simulate_ensemble_member(cfg, 0)
}

/// Full-grid simulation of ensemble member `path_index`, reproducing exactly
/// the path that [`run_ensemble`] folds over.
pub fn simulate_ensemble_member(
    cfg: &SimConfig,
    path_index: u64,
) -> Result<SirPath, EngineError> {
    let n = cfg.n_steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut s = Vec::with_capacity(n + 1);
    let mut i = Vec::with_capacity(n + 1);
    let mut r = Vec::with_capacity(n + 1);
    let mut avg_s = Vec::with_capacity(n + 1);
    let mut avg_i = Vec::with_capacity(n + 1);
    let mut avg_r = Vec::with_capacity(n + 1);
    times.push(0.0);
    s.push(cfg.initial[0]);
    i.push(cfg.initial[1]);
    r.push(cfg.initial[2]);
    avg_s.push(cfg.initial[0]);
    avg_i.push(cfg.initial[1]);
    avg_r.push(cfg.initial[2]);

    let core = run_path(cfg, path_index, |_, t, state, avgs| {
        times.push(t);
        s.push(state[0]);
        i.push(state[1]);
        r.push(state[2]);
        avg_s.push(avgs[0]);
        avg_i.push(avgs[1]);
        avg_r.push(avgs[2]);
    })?;

    Ok(SirPath {
        times,
        susceptible: s,
        infected: i,
        recovered: r,
        avg_susceptible: avg_s,
        avg_infected: avg_i,
        avg_recovered: avg_r,
        jump_count: core.jump_count,
        floor_activations: core.floor_activations,
        driver_total: core.driver_total,
        train_total: core.train_total,
    })
}

/// Moment probe settings: records (1 + S + I + R)^p at strided grid points.
#[derive(Debug, Clone, Copy)]
pub struct ProbeSettings {
    pub p: f64,
    pub stride_steps: usize,
}

impl ProbeSettings {
    /// One sample per unit of model time, p = 2.5.
    pub fn for_config(cfg: &SimConfig) -> Self {
        Self {
            p: 2.5,
            stride_steps: ((1.0 / cfg.dt).round() as usize).max(1),
        }
    }
}

/// Per-path statistics collected without storing the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    pub terminal: [f64; 3],
    pub time_avg: [f64; 3],
    pub extinction_time: Option<f64>,
    pub floor_activations: usize,
    pub steps: usize,
    pub jump_count: usize,
    pub conservation_error: f64,
    /// (1 + U)^p at the probe times.
    pub moment_probe: Vec<f64>,
}

fn path_stats(
    cfg: &SimConfig,
    path_index: u64,
    probe: &ProbeSettings,
    detector: &DetectorSettings,
) -> Result<PathStats, EngineError> {
    let mut tracker = ExtinctionTracker::new(detector.threshold);
    tracker.observe(0.0, cfg.initial[1]);
    let mut moment_probe = Vec::with_capacity(cfg.n_steps() / probe.stride_steps + 1);
    let p = probe.p;
    let stride = probe.stride_steps.max(1);
    let core = run_path(cfg, path_index, |k, t, state, _| {
        tracker.observe(t, state[1]);
        if k % stride == 0 {
            let u = state[0] + state[1] + state[2];
            moment_probe.push((1.0 + u).powf(p));
        }
    })?;
    Ok(PathStats {
        terminal: core.terminal,
        time_avg: core.time_avg,
        extinction_time: tracker.finish(cfg.t_end, detector.window),
        floor_activations: core.floor_activations,
        steps: core.steps,
        jump_count: core.jump_count,
        conservation_error: core.conservation_error(),
        moment_probe,
    })
}

/// Cross-path aggregation of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub mean_terminal: [f64; 3],
    pub mean_time_avg: [f64; 3],
    /// (q10, q50, q90) of terminal infected values.
    pub terminal_infected_quantiles: [f64; 3],
    /// (q10, q50, q90) of horizon <I> values.
    pub avg_infected_quantiles: [f64; 3],
    /// Fraction of paths with a detected extinction.
    pub extinct_fraction: f64,
    pub median_extinction_time: Option<f64>,
    /// Floor clamps relative to 3 * steps * paths.
    pub floor_activation_fraction: f64,
    pub max_conservation_error: f64,
    pub moment_probe_p: f64,
    /// (t, cross-path mean of (1+U_t)^p) at the probe times.
    pub moment_curve: Vec<(f64, f64)>,
    pub per_path: Vec<PathStats>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn aggregate(
    cfg: &SimConfig,
    probe: &ProbeSettings,
    per_path: Vec<PathStats>,
) -> EnsembleSummary {
    let n = per_path.len();
    let nf = n as f64;
    let mut mean_terminal = [0.0; 3];
    let mut mean_time_avg = [0.0; 3];
    for stats in &per_path {
        for k in 0..3 {
            mean_terminal[k] += stats.terminal[k] / nf;
            mean_time_avg[k] += stats.time_avg[k] / nf;
        }
    }
    let mut terminal_i: Vec<f64> = per_path.iter().map(|p| p.terminal[1]).collect();
    let mut avg_i: Vec<f64> = per_path.iter().map(|p| p.time_avg[1]).collect();
    terminal_i.sort_by(f64::total_cmp);
    avg_i.sort_by(f64::total_cmp);

    let mut extinction_times: Vec<f64> =
        per_path.iter().filter_map(|p| p.extinction_time).collect();
    extinction_times.sort_by(f64::total_cmp);
    let extinct_fraction = extinction_times.len() as f64 / nf;
    let median_extinction_time = if extinction_times.is_empty() {
        None
    } else {
        Some(extinction_times[extinction_times.len() / 2])
    };

    let total_steps: usize = per_path.iter().map(|p| p.steps).sum();
    let total_clamps: usize = per_path.iter().map(|p| p.floor_activations).sum();
    let floor_activation_fraction = total_clamps as f64 / (3.0 * total_steps as f64);
    let max_conservation_error = per_path
        .iter()
        .map(|p| p.conservation_error)
        .fold(0.0f64, f64::max);

    let probe_len = per_path.iter().map(|p| p.moment_probe.len()).min().unwrap_or(0);
    let mut moment_curve = Vec::with_capacity(probe_len);
    for j in 0..probe_len {
        let mean = per_path.iter().map(|p| p.moment_probe[j]).sum::<f64>() / nf;
        let t = ((j + 1) * probe.stride_steps) as f64 * cfg.dt;
        moment_curve.push((t, mean));
    }

    EnsembleSummary {
        n_paths: n,
        t_end: cfg.t_end,
        dt: cfg.dt,
        seed: cfg.seed,
        mean_terminal,
        mean_time_avg,
        terminal_infected_quantiles: [
            quantile(&terminal_i, 0.1),
            quantile(&terminal_i, 0.5),
            quantile(&terminal_i, 0.9),
        ],
        avg_infected_quantiles: [
            quantile(&avg_i, 0.1),
            quantile(&avg_i, 0.5),
            quantile(&avg_i, 0.9),
        ],
        extinct_fraction,
        median_extinction_time,
        floor_activation_fraction,
        max_conservation_error,
        moment_probe_p: probe.p,
        moment_curve,
        per_path,
    }
}

/// Runs an ensemble sequentially; the reference implementation the parallel
/// variant must match bit for bit.
pub fn run_ensemble_sequential(
    cfg: &SimConfig,
    n_paths: usize,
    probe: &ProbeSettings,
    detector: &DetectorSettings,
) -> Result<EnsembleSummary, EngineError> {
    if n_paths == 0 {
        return Err(EngineError::InvalidConfig("ensemble needs >= 1 path".into()));
    }
    let per_path: Result<Vec<_>, _> = (0..n_paths)
        .map(|k| path_stats(cfg, k as u64, probe, detector))
        .collect();
    Ok(aggregate(cfg, probe, per_path?))
}

/// Runs an ensemble, path-parallel when the `parallel` feature is enabled.
/// Path statistics are collected in path order, so the result is identical
/// to the sequential variant.
pub fn run_ensemble(
    cfg: &SimConfig,
    n_paths: usize,
    probe: &ProbeSettings,
    detector: &DetectorSettings,
) -> Result<EnsembleSummary, EngineError> {
    #[cfg(feature = "parallel")]
    {
        if n_paths == 0 {
            return Err(EngineError::InvalidConfig("ensemble needs >= 1 path".into()));
        }
        let per_path: Result<Vec<_>, _> = (0..n_paths)
            .into_par_iter()
            .map(|k| path_stats(cfg, k as u64, probe, detector))
            .collect();
        Ok(aggregate(cfg, probe, per_path?))
    }
    #[cfg(not(feature = "parallel"))]
    run_ensemble_sequential(cfg, n_paths, probe, detector)
}
