//! Post-processing: running time-averages, extinction detection on paths
//! and ensembles, and comparison of empirical long-run values against the
//! threshold predictions.

use crate::engine::{EnsembleSummary, SirPath};
use crate::model::ThresholdReport;

/// Finite-horizon extinction detector parameters.
#[derive(Debug, Clone, Copy)]
pub struct DetectorSettings {
    /// Population level below which the infected class counts as extinct.
    pub threshold: f64,
    /// The infected series must stay below the threshold on a trailing
    /// window of at least this length.
    pub window: f64,
}

impl DetectorSettings {
    pub fn for_horizon(horizon: f64) -> Self {
        Self {
            threshold: 1e-3,
            window: 0.1 * horizon,
        }
    }
}

/// Streaming form of [`detect_extinction`], usable inside a simulation loop.
#[derive(Debug, Clone, Copy)]
pub struct ExtinctionTracker {
    threshold: f64,
    /// Earliest time from which the series has stayed below the threshold.
    candidate: Option<f64>,
    started: bool,
}

impl ExtinctionTracker {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            candidate: None,
            started: false,
        }
    }

    pub fn observe(&mut self, t: f64, infected: f64) {
        if infected >= self.threshold {
            self.candidate = None;
        } else if self.candidate.is_none() {
            self.candidate = Some(if self.started { t } else { 0.0 });
        }
        self.started = true;
    }

    /// Earliest time from which I stayed below threshold through the
    /// horizon, provided the trailing stretch is at least `window` long.
    pub fn finish(&self, horizon: f64, window: f64) -> Option<f64> {
        self.candidate
            .filter(|t| horizon - t >= window - 1e-12 * horizon.max(1.0))
    }
}

/// Left-endpoint running average <f>_t = (1/t) integral_0^t f ds on a
/// uniform grid; exact for series that are constant on each step. The t = 0
/// entry is defined as f(0).
pub fn running_time_average(values: &[f64], dt: f64) -> Vec<f64> {
    assert!(!values.is_empty(), "empty series");
    assert!(dt > 0.0);
    let mut out = Vec::with_capacity(values.len());
    out.push(values[0]);
    let mut integral = 0.0;
    for k in 1..values.len() {
        integral += values[k - 1] * dt;
        out.push(integral / (k as f64 * dt));
    }
    out
}

/// Earliest grid time t such that I_s < threshold for all s in [t, horizon],
/// requiring horizon - t >= window. None if the infected series recovers too
/// late or never drops.
pub fn detect_extinction(path: &SirPath, threshold: f64, window: f64) -> Option<f64> {
    let mut tracker = ExtinctionTracker::new(threshold);
    for (t, i) in path.times.iter().zip(&path.infected) {
        tracker.observe(*t, *i);
    }
    tracker.finish(*path.times.last().unwrap(), window)
}

/// Empirical regime classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectedRegime {
    Extinct,
    Persistent,
    Undecided,
}

impl std::fmt::Display for DetectedRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Extinct => write!(f, "Extinct"),
            Self::Persistent => write!(f, "Persistent"),
            Self::Undecided => write!(f, "Undecided"),
        }
    }
}

/// Thresholds for turning finite-horizon statistics into a verdict.
///
/// Persistence is declared from ensemble-mean time-averages rather than
/// single paths; heavy-tailed jumps make per-path averages noisy.
#[derive(Debug, Clone, Copy)]
pub struct VerdictSettings {
    /// Minimum horizon time-average of I to call the disease persistent.
    pub persist_threshold: f64,
    /// Fraction of paths that must individually go extinct to call the
    /// ensemble extinct.
    pub extinct_fraction: f64,
}

impl Default for VerdictSettings {
    fn default() -> Self {
        Self {
            persist_threshold: 1e-3,
            extinct_fraction: 0.5,
        }
    }
}

/// Outcome of comparing empirical behaviour against the threshold theory.
#[derive(Debug, Clone)]
pub struct RegimeVerdict {
    pub detected: DetectedRegime,
    /// Extinction time: the path's own for a single path, the median over
    /// extinct paths for an ensemble.
    pub extinction_time: Option<f64>,
    /// Horizon time-averages (<S>, <I>, <R>).
    pub empirical_limits: [f64; 3],
    /// Deviation from the predicted limits, relative where the prediction is
    /// nonzero, absolute otherwise.
    pub deviations: [f64; 3],
}

fn deviations(empirical: &[f64; 3], predicted: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = if predicted[k] != 0.0 {
            (empirical[k] - predicted[k]) / predicted[k]
        } else {
            empirical[k]
        };
    }
    out
}

/// Verdict for a single simulated path.
pub fn verdict_path(
    path: &SirPath,
    report: &ThresholdReport,
    detector: &DetectorSettings,
    settings: &VerdictSettings,
) -> RegimeVerdict {
    let extinction_time = detect_extinction(path, detector.threshold, detector.window);
    let empirical = [
        *path.avg_susceptible.last().unwrap(),
        *path.avg_infected.last().unwrap(),
        *path.avg_recovered.last().unwrap(),
    ];
    let detected = if extinction_time.is_some() {
        DetectedRegime::Extinct
    } else if empirical[1] >= settings.persist_threshold {
        DetectedRegime::Persistent
    } else {
        DetectedRegime::Undecided
    };
    RegimeVerdict {
        detected,
        extinction_time,
        empirical_limits: empirical,
        deviations: deviations(&empirical, &report.predicted_limits),
    }
}

/// Verdict for an ensemble, from per-path extinction detections and the
/// ensemble mean of the horizon time-averages.
pub fn verdict_ensemble(
    summary: &EnsembleSummary,
    report: &ThresholdReport,
    settings: &VerdictSettings,
) -> RegimeVerdict {
    let empirical = summary.mean_time_avg;
    let detected = if summary.extinct_fraction >= settings.extinct_fraction {
        DetectedRegime::Extinct
    } else if empirical[1] >= settings.persist_threshold {
        DetectedRegime::Persistent
    } else {
        DetectedRegime::Undecided
    };
    RegimeVerdict {
        detected,
        extinction_time: summary.median_extinction_time,
        empirical_limits: empirical,
        deviations: deviations(&empirical, &report.predicted_limits),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SirPath;

    fn synthetic_path(dt: f64, infected: Vec<f64>) -> SirPath {
        let n = infected.len();
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let ones = vec![1.0; n];
        let avg_i = running_time_average(&infected, dt);
        SirPath {
            times,
            susceptible: ones.clone(),
            infected: infected.clone(),
            recovered: ones.clone(),
            avg_susceptible: ones.clone(),
            avg_infected: avg_i,
            avg_recovered: ones,
            jump_count: 0,
            floor_activations: 0,
            driver_total: 0.0,
            train_total: 0.0,
        }
    }

    #[test]
    fn running_average_examples() {
        // Constant series averages to itself.
        let avg = running_time_average(&vec![3.25; 100], 0.1);
        assert!(avg.iter().all(|v| (v - 3.25).abs() < 1e-14));

        // f(t) = t averages to ~ t/2 with O(dt) error.
        let dt = 1e-3;
        let vals: Vec<f64> = (0..1001).map(|k| k as f64 * dt).collect();
        let avg = running_time_average(&vals, dt);
        let t = 1.0;
        assert!((avg[1000] - t / 2.0).abs() < dt);

        // Indicator of [0, T/2]: <f>_T ~ 1/2 up to one step.
        let n = 1000;
        let vals: Vec<f64> = (0..=n).map(|k| if k <= n / 2 { 1.0 } else { 0.0 }).collect();
        let avg = running_time_average(&vals, dt);
        // Direct-sum oracle over the same grid.
        let oracle: f64 = vals[..n].iter().sum::<f64>() * dt / (n as f64 * dt);
        assert!((avg[n] - oracle).abs() < 1e-14);
        assert!((avg[n] - 0.5).abs() <= dt / (n as f64 * dt) + 1e-3);
    }

    #[test]
    fn running_average_bounded_by_supremum() {
        let vals: Vec<f64> = (0..500).map(|k| ((k as f64) * 0.37).sin().abs()).collect();
        let sup = vals.iter().cloned().fold(0.0f64, f64::max);
        let avg = running_time_average(&vals, 0.01);
        assert!(avg.iter().all(|v| *v >= 0.0 && *v <= sup + 1e-14));
    }

    #[test]
    fn detect_extinction_examples() {
        // I constant at 0.5 never goes extinct.
        let path = synthetic_path(0.1, vec![0.5; 201]);
        assert_eq!(detect_extinction(&path, 1e-3, 5.0), None);

        // I(t) = e^{-t} crosses 1e-3 at t = ln 1000 ~ 6.908.
        let dt = 1e-3;
        let n = 20_000;
        let vals: Vec<f64> = (0..=n).map(|k| (-(k as f64) * dt).exp()).collect();
        let path = synthetic_path(dt, vals);
        let t = detect_extinction(&path, 1e-3, 5.0).expect("goes extinct");
        assert!((t - 6.908).abs() < 2.0 * dt, "{t}");

        // Window longer than the trailing quiet stretch: no detection.
        assert_eq!(detect_extinction(&path, 1e-3, 14.0), None);
    }

    #[test]
    fn detect_extinction_monotone_in_threshold() {
        let dt = 0.01;
        let vals: Vec<f64> = (0..=2000)
            .map(|k| (-(k as f64) * dt).exp() * (1.1 + ((k as f64) * 0.37).sin()))
            .collect();
        let path = synthetic_path(dt, vals);
        let mut prev: Option<f64> = None;
        for &thr in &[1e-4, 1e-3, 1e-2, 1e-1] {
            let t = detect_extinction(&path, thr, 0.5);
            if let (Some(p), Some(c)) = (prev, t) {
                assert!(c <= p + 1e-12, "larger threshold gave later time");
            }
            if t.is_some() {
                prev = t;
            }
        }
    }

    #[test]
    fn tracker_matches_batch_detection() {
        let dt = 0.01;
        let vals: Vec<f64> = (0..=500)
            .map(|k| if k < 300 { 0.4 } else { 1e-5 })
            .collect();
        let path = synthetic_path(dt, vals.clone());
        let batch = detect_extinction(&path, 1e-3, 1.0);
        let mut tracker = ExtinctionTracker::new(1e-3);
        for (k, v) in vals.iter().enumerate() {
            tracker.observe(k as f64 * dt, *v);
        }
        assert_eq!(batch, tracker.finish(5.0, 1.0));
        assert!((batch.unwrap() - 3.0).abs() < 1.5 * dt);
    }
}
