//! Threshold analytics for the jump SIR system
//!
//! ```text
//! dS = (Lambda - mu S - beta S I) dt + S dZ1
//! dI = (beta S I - (mu + eta + eps) I) dt + I dZ2
//! dR = (eta I - mu R) dt + R dZ3
//! ```
//!
//! with Z_i = correlated Brownian motion (covariance rho) plus a shared
//! tempered stable jump driver entering through linear loadings
//! gamma_i(z) = sigma_i z. The long-run behaviour is decided by
//!
//! ```text
//! R0_bar = R0 - beta_2 / (mu + eps + eta),
//! beta_i = rho_ii / 2 + integral (sigma_i z - log(1 + sigma_i z)) nu(dz),
//! ```
//!
//! extinction for R0_bar < 1 and persistence in the mean for R0_bar > 1,
//! subject to the hypothesis checks H1-H5 implemented here.

use crate::quad::{levy_integral, QuadratureError, QuadratureSettings};
use crate::special::gamma;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("divergent moment: order {p} requires p > alpha = {alpha}")]
    DivergentMoment { p: f64, alpha: f64 },
    #[error(
        "two-sided jump measure with loading sigma_{component} > 0: \
         gamma_i(z) = sigma_i z would reach -1"
    )]
    TwoSidedLoading { component: usize },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn require(cond: bool, name: &'static str, message: &str) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            message: message.to_string(),
        })
    }
}

/// Deterministic SIR rates. All strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Population influx into the susceptible compartment (Lambda).
    pub influx: f64,
    /// Natural mortality rate of all compartments (mu).
    pub mortality: f64,
    /// Transmission rate (beta).
    pub transmission: f64,
    /// Disease-induced death rate of infected individuals (epsilon).
    pub disease_death: f64,
    /// Recovery rate (eta).
    pub recovery: f64,
}

impl ModelParams {
    pub fn new(
        influx: f64,
        mortality: f64,
        transmission: f64,
        disease_death: f64,
        recovery: f64,
    ) -> Result<Self, ModelError> {
        for (name, v) in [
            ("model.lambda", influx),
            ("model.mu", mortality),
            ("model.beta", transmission),
            ("model.epsilon", disease_death),
            ("model.eta", recovery),
        ] {
            require(v.is_finite() && v > 0.0, "model", &format!("{name} must be finite and > 0, got {v}"))?;
        }
        Ok(Self {
            influx,
            mortality,
            transmission,
            disease_death,
            recovery,
        })
    }

    /// mu + epsilon + eta, the total removal rate from the infected class.
    pub fn removal_rate(&self) -> f64 {
        self.mortality + self.disease_death + self.recovery
    }
}

/// Tempered stable jump measure parameters for
/// nu(dz) = k- |z|^{-a-1} e^{-l-|z|} dz + k+ z^{-a-1} e^{-l+ z} dz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperedStableParams {
    /// Stability index alpha in (0,2), alpha != 1.
    pub alpha: f64,
    pub k_plus: f64,
    pub lambda_plus: f64,
    pub k_minus: f64,
    pub lambda_minus: f64,
    /// Whether sampled paths are centred so the jump part is a martingale.
    pub compensated: bool,
}

impl TemperedStableParams {
    pub fn new(
        alpha: f64,
        k_plus: f64,
        lambda_plus: f64,
        k_minus: f64,
        lambda_minus: f64,
        compensated: bool,
    ) -> Result<Self, ModelError> {
        require(
            alpha.is_finite() && alpha > 0.0 && alpha < 2.0,
            "jumps.alpha",
            &format!("stability index must lie in (0,2), got {alpha}"),
        )?;
        require(
            alpha != 1.0,
            "jumps.alpha",
            "alpha = 1 is excluded (no series representation branch)",
        )?;
        require(
            k_plus >= 0.0 && k_plus.is_finite(),
            "jumps.k_plus",
            &format!("mass must be >= 0, got {k_plus}"),
        )?;
        require(
            k_minus >= 0.0 && k_minus.is_finite(),
            "jumps.k_minus",
            &format!("mass must be >= 0, got {k_minus}"),
        )?;
        require(
            k_plus + k_minus > 0.0,
            "jumps",
            "at least one side must carry mass (k_plus + k_minus > 0)",
        )?;
        if k_plus > 0.0 {
            require(
                lambda_plus.is_finite() && lambda_plus > 0.0,
                "jumps.lambda_plus",
                &format!("tempering must be > 0 on the active side, got {lambda_plus}"),
            )?;
        }
        if k_minus > 0.0 {
            require(
                lambda_minus.is_finite() && lambda_minus > 0.0,
                "jumps.lambda_minus",
                &format!("tempering must be > 0 on the active side, got {lambda_minus}"),
            )?;
        }
        Ok(Self {
            alpha,
            k_plus,
            lambda_plus,
            k_minus,
            lambda_minus,
            compensated,
        })
    }

    /// Positive-jump-only measure, the form used by the SIR experiments.
    pub fn one_sided(
        alpha: f64,
        k_plus: f64,
        lambda_plus: f64,
        compensated: bool,
    ) -> Result<Self, ModelError> {
        Self::new(alpha, k_plus, lambda_plus, 0.0, 1.0, compensated)
    }

    pub fn is_one_sided_positive(&self) -> bool {
        self.k_minus == 0.0
    }
}

/// Noise specification: Gaussian covariance, jump loadings, jump measure.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Symmetric positive semidefinite 3x3 covariance of the Brownian part.
    pub covariance: [[f64; 3]; 3],
    /// Jump loadings sigma = (sigma_1, sigma_2, sigma_3), all >= 0.
    pub jump_loadings: [f64; 3],
    pub ts: TemperedStableParams,
}

impl NoiseSpec {
    pub fn new(
        covariance: [[f64; 3]; 3],
        jump_loadings: [f64; 3],
        ts: TemperedStableParams,
    ) -> Result<Self, ModelError> {
        let scale = (0..3).map(|i| covariance[i][i].abs()).fold(0.0f64, f64::max);
        #[allow(clippy::needless_range_loop)]
        for i in 0..3 {
            for j in 0..3 {
                require(
                    covariance[i][j].is_finite(),
                    "noise.rho",
                    "covariance entries must be finite",
                )?;
                require(
                    (covariance[i][j] - covariance[j][i]).abs() <= 1e-12 * scale.max(1.0),
                    "noise.rho",
                    &format!("covariance must be symmetric, entries ({i},{j})/({j},{i}) differ"),
                )?;
            }
        }
        require(
            cholesky_psd(&covariance).is_some(),
            "noise.rho",
            "covariance must be positive semidefinite",
        )?;
        for (i, &s) in jump_loadings.iter().enumerate() {
            require(
                s.is_finite() && s >= 0.0,
                "noise.sigma",
                &format!("sigma_{} must be >= 0, got {s}", i + 1),
            )?;
        }
        Ok(Self {
            covariance,
            jump_loadings,
            ts,
        })
    }

    /// Largest jump loading, the sigma-bar of lambda(p).
    pub fn max_loading(&self) -> f64 {
        self.jump_loadings.iter().cloned().fold(0.0, f64::max)
    }

    pub fn has_jumps(&self) -> bool {
        self.max_loading() > 0.0
    }
}

/// Lower-triangular factor L with L L^T = m for a symmetric PSD matrix,
/// tolerating zero (semidefinite) directions. None if m is indefinite.
#[allow(clippy::needless_range_loop)]
pub(crate) fn cholesky_psd(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let scale = (0..3).map(|i| m[i][i].abs()).fold(0.0f64, f64::max).max(1e-300);
    let tol = 1e-12 * scale;
    let mut l = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut d = m[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d < -tol {
            return None;
        }
        let d = d.max(0.0);
        l[j][j] = d.sqrt();
        for i in (j + 1)..3 {
            let mut off = m[i][j];
            for k in 0..j {
                off -= l[i][k] * l[j][k];
            }
            if l[j][j] > tol.sqrt() {
                l[i][j] = off / l[j][j];
            } else if off.abs() > tol.sqrt() * scale.sqrt() {
                return None;
            }
        }
    }
    Some(l)
}

/// R0 = beta Lambda / (mu (mu + eps + eta)).
pub fn basic_reproduction_number(m: &ModelParams) -> f64 {
    m.transmission * m.influx / (m.mortality * m.removal_rate())
}

/// Equilibria of the deterministic system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibria {
    /// Disease-free equilibrium E0 = (Lambda/mu, 0, 0).
    pub disease_free: [f64; 3],
    /// Endemic equilibrium E*, present iff R0 > 1.
    pub endemic: Option<[f64; 3]>,
}

pub fn deterministic_equilibria(m: &ModelParams) -> Equilibria {
    let r0 = basic_reproduction_number(m);
    let disease_free = [m.influx / m.mortality, 0.0, 0.0];
    let endemic = (r0 > 1.0).then(|| {
        [
            m.removal_rate() / m.transmission,
            m.mortality / m.transmission * (r0 - 1.0),
            m.recovery / m.transmission * (r0 - 1.0),
        ]
    });
    Equilibria {
        disease_free,
        endemic,
    }
}

/// Absolute moment integral |z|^p nu(dz) in closed form, finite for p > alpha.
pub fn jump_moment(ts: &TemperedStableParams, p: f64) -> Result<f64, ModelError> {
    if !(p > ts.alpha) {
        return Err(ModelError::DivergentMoment { p, alpha: ts.alpha });
    }
    let gam = gamma(p - ts.alpha);
    let mut moment = 0.0;
    if ts.k_plus > 0.0 {
        moment += ts.k_plus * gam * ts.lambda_plus.powf(ts.alpha - p);
    }
    if ts.k_minus > 0.0 {
        moment += ts.k_minus * gam * ts.lambda_minus.powf(ts.alpha - p);
    }
    Ok(moment)
}

/// x - log(1 + x) without cancellation for small x.
pub(crate) fn excess_over_log(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // x - log(1+x) = x^2/2 - x^3/3 + x^4/4 - x^5/5 + ...
        let x2 = x * x;
        x2 * (0.5 + x * (-1.0 / 3.0 + x * (0.25 + x * (-0.2 + x / 6.0))))
    } else {
        x - x.ln_1p()
    }
}

/// Noise intensity beta_i = rho_ii/2 + integral (sigma_i z - log(1+sigma_i z)) nu(dz).
///
/// `component` is zero-based: 0 = S, 1 = I, 2 = R. Components with zero
/// loading skip the quadrature entirely.
pub fn beta_noise_intensity(
    n: &NoiseSpec,
    component: usize,
    settings: &QuadratureSettings,
) -> Result<f64, ModelError> {
    assert!(component < 3, "component index out of range");
    let half = 0.5 * n.covariance[component][component];
    let sigma = n.jump_loadings[component];
    if sigma == 0.0 {
        return Ok(half);
    }
    if !n.ts.is_one_sided_positive() {
        return Err(ModelError::TwoSidedLoading { component });
    }
    let integral = levy_integral(|z| excess_over_log(sigma * z), &n.ts, settings)?;
    Ok(half + integral.value)
}

/// R0_bar = R0 - beta_2 / (mu + eps + eta).
pub fn modified_reproduction_number(
    m: &ModelParams,
    n: &NoiseSpec,
    settings: &QuadratureSettings,
) -> Result<f64, ModelError> {
    let beta2 = beta_noise_intensity(n, 1, settings)?;
    Ok(basic_reproduction_number(m) - beta2 / m.removal_rate())
}

/// lambda(p) = c_p sigma_bar^2 M_2 + c_p sigma_bar^p M_p with
/// c_p = p (p-1) max(2^{p-3}, 1) / 2 and M_q the absolute jump moments.
///
/// Requires p > 1; for sigma_bar > 0 additionally p > alpha (the moments
/// must exist). With sigma_bar = 0 the value is exactly 0 for any p > 1.
pub fn lambda_p(n: &NoiseSpec, p: f64) -> Result<f64, ModelError> {
    if !(p > 1.0) {
        return Err(ModelError::InvalidParameter {
            name: "analysis.p",
            message: format!("lambda(p) requires p > 1, got {p}"),
        });
    }
    let sigma_bar = n.max_loading();
    if sigma_bar == 0.0 {
        return Ok(0.0);
    }
    let c_p = p * (p - 1.0) * 2f64.powf(p - 3.0).max(1.0) / 2.0;
    let m2 = jump_moment(&n.ts, 2.0)?;
    let mp = jump_moment(&n.ts, p)?;
    Ok(c_p * sigma_bar * sigma_bar * m2 + c_p * sigma_bar.powf(p) * mp)
}

/// Infinity norm max_i sum_j |rho_ij| of the Brownian covariance.
pub fn rho_inf_norm(rho: &[[f64; 3]; 3]) -> f64 {
    rho.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypothesisStatus {
    Pass,
    Fail,
    /// The condition cannot be evaluated for this configuration.
    Inapplicable,
}

impl std::fmt::Display for HypothesisStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Pass => write!(f, "pass"),
            Self::Fail => write!(f, "fail"),
            Self::Inapplicable => write!(f, "inapplicable"),
        }
    }
}

/// Results of the H1-H5 checks gating the threshold theorems.
///
/// H1, H2, H4, H5 are decided symbolically from the linear-loading plus
/// tempered-stable structure; only H3 is numeric.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypotheses {
    /// H1: square-integrable loadings. Always holds for alpha < 2.
    pub h1: HypothesisStatus,
    /// H2: gamma_i(z) > -1 nu-a.e.; requires one-sided positive jumps.
    pub h2: HypothesisStatus,
    /// H3(p): mu > (p-1)/2 ||rho||_inf + lambda(p)/p.
    pub h3: HypothesisStatus,
    /// H4(p): integral |(1+gamma_bar)^p - 1| finite; requires alpha < 1.
    pub h4: HypothesisStatus,
    /// H5: integral (log(1+gamma_i))^2 finite.
    pub h5: HypothesisStatus,
    /// The p at which H3 and H4 were evaluated.
    pub p: f64,
    /// Right-hand side of H3(p) when it could be computed.
    pub h3_bound: Option<f64>,
}

impl Hypotheses {
    pub fn all_pass(&self) -> bool {
        [self.h1, self.h2, self.h3, self.h4, self.h5]
            .iter()
            .all(|s| *s == HypothesisStatus::Pass)
    }

    pub fn failing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, s) in [
            ("H1", self.h1),
            ("H2", self.h2),
            ("H3", self.h3),
            ("H4", self.h4),
            ("H5", self.h5),
        ] {
            if s != HypothesisStatus::Pass {
                out.push(name);
            }
        }
        out
    }
}

pub fn check_hypotheses(m: &ModelParams, n: &NoiseSpec, p: f64) -> Hypotheses {
    use HypothesisStatus::*;
    let jumps = n.has_jumps();
    let one_sided = n.ts.is_one_sided_positive();

    let h1 = Pass; // alpha < 2 by construction, so sigma^2 M_2 < infinity
    let h2 = if !jumps || one_sided { Pass } else { Fail };
    let h4 = if !jumps || n.ts.alpha < 1.0 { Pass } else { Fail };
    // With two-sided loadings log(1 + gamma) is undefined on a set of
    // positive measure, so H5 cannot even be evaluated.
    let h5 = if !jumps || one_sided { Pass } else { Inapplicable };

    let (h3, h3_bound) = if !(p > 1.0) {
        (Inapplicable, None)
    } else {
        match lambda_p(n, p) {
            Ok(lp) => {
                let bound = 0.5 * (p - 1.0) * rho_inf_norm(&n.covariance) + lp / p;
                (if m.mortality > bound { Pass } else { Fail }, Some(bound))
            }
            // lambda(p) diverges: the bound is infinite.
            Err(ModelError::DivergentMoment { .. }) => (Fail, None),
            Err(_) => (Inapplicable, None),
        }
    };

    Hypotheses {
        h1,
        h2,
        h3,
        h4,
        h5,
        p,
        h3_bound,
    }
}

/// Long-run regime predicted by the threshold theorems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Extinction,
    Persistence,
    Indeterminate,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Extinction => write!(f, "Extinction"),
            Self::Persistence => write!(f, "Persistence"),
            Self::Indeterminate => write!(f, "Indeterminate"),
        }
    }
}

/// Full threshold analysis of a model/noise pair.
#[derive(Debug, Clone)]
pub struct ThresholdReport {
    pub r0: f64,
    /// Noise intensities (beta_1, beta_2, beta_3).
    pub beta_noise: [f64; 3],
    pub r0_bar: f64,
    /// lambda(p) at the requested p, when finite.
    pub lambda_p: Option<f64>,
    pub p: f64,
    pub rho_inf_norm: f64,
    pub hypotheses: Hypotheses,
    pub regime: Regime,
    /// Predicted long-run (<S>, <I>, <R>): the persistence limits when
    /// R0_bar > 1, the extinction limits (Lambda/mu, 0, 0) otherwise.
    pub predicted_limits: [f64; 3],
    /// Why the regime was downgraded to Indeterminate, if it was.
    pub indeterminate_reason: Option<String>,
}

/// Classifies the long-run regime from R0_bar against 1 within a relative
/// tolerance band; hypothesis failures downgrade the verdict.
pub fn classify_regime(
    m: &ModelParams,
    n: &NoiseSpec,
    p: f64,
    tol: f64,
    settings: &QuadratureSettings,
) -> Result<ThresholdReport, ModelError> {
    let r0 = basic_reproduction_number(m);
    let mut beta_noise = [0.0; 3];
    for (i, b) in beta_noise.iter_mut().enumerate() {
        *b = beta_noise_intensity(n, i, settings)?;
    }
    let r0_bar = r0 - beta_noise[1] / m.removal_rate();
    let hypotheses = check_hypotheses(m, n, p);

    let boundary = (r0_bar - 1.0).abs() <= tol;
    let persistent = r0_bar > 1.0 && !boundary;

    let predicted_limits = if persistent {
        let s_star = m.removal_rate() / m.transmission;
        [
            s_star + beta_noise[1] / m.transmission,
            m.mortality / m.transmission * (r0_bar - 1.0),
            m.recovery / m.transmission * (r0_bar - 1.0),
        ]
    } else {
        [m.influx / m.mortality, 0.0, 0.0]
    };

    let (regime, indeterminate_reason) = if !hypotheses.all_pass() {
        (
            Regime::Indeterminate,
            Some(format!(
                "hypotheses not satisfied: {}",
                hypotheses.failing().join(", ")
            )),
        )
    } else if boundary {
        (
            Regime::Indeterminate,
            Some(format!("R0_bar = {r0_bar} within tolerance {tol} of 1")),
        )
    } else if persistent {
        (Regime::Persistence, None)
    } else {
        (Regime::Extinction, None)
    };

    Ok(ThresholdReport {
        r0,
        beta_noise,
        r0_bar,
        lambda_p: lambda_p(n, p).ok(),
        p,
        rho_inf_norm: rho_inf_norm(&n.covariance),
        hypotheses,
        regime,
        predicted_limits,
        indeterminate_reason,
    })
}

/// Rescales jump loadings so the jump-size variance sigma^2 M_2 is preserved
/// when moving the stability index from ts_src.alpha to alpha_target at the
/// same k_plus, lambda_plus.
pub fn variance_matched_sigma(
    sigma_src: [f64; 3],
    ts_src: &TemperedStableParams,
    alpha_target: f64,
) -> Result<[f64; 3], ModelError> {
    require(
        alpha_target > 0.0 && alpha_target < 2.0,
        "alpha_target",
        &format!("target index must lie in (0,2), got {alpha_target}"),
    )?;
    require(
        ts_src.is_one_sided_positive() && ts_src.k_plus > 0.0,
        "ts_src",
        "variance matching is defined for one-sided positive measures",
    )?;
    let lam = ts_src.lambda_plus;
    let ratio = gamma(2.0 - ts_src.alpha) * lam.powf(ts_src.alpha - 2.0)
        / (gamma(2.0 - alpha_target) * lam.powf(alpha_target - 2.0));
    let f = ratio.sqrt();
    Ok([sigma_src[0] * f, sigma_src[1] * f, sigma_src[2] * f])
}
