//! Adaptive integration against the singular tempered stable jump density
//!
//! ```text
//! nu(dz) = k- |z|^{-alpha-1} e^{-lambda- |z|} dz   on z < 0
//!        + k+  z^{-alpha-1}  e^{-lambda+  z}  dz   on z > 0
//! ```
//!
//! The density is not integrable at the origin, so integrands g must vanish
//! there; integrals split at `split_point` (delta). On (0, delta] the
//! substitution z = delta * u^{1/(2-alpha)} flattens the z^{-alpha-1} factor
//! against quadratic integrands; the transformed integral is evaluated over
//! dyadic blocks in u with geometric extrapolation of the remaining tail,
//! which also detects non-integrable (divergent) behaviour. On [delta, inf)
//! doubling blocks with 15-point Gauss-Kronrod refinement run until the
//! exponential temper makes further contributions negligible.

use crate::model::TemperedStableParams;
use crate::special::{gamma, lower_gamma};
use thiserror::Error;

/// Controls for [`levy_integral`].
#[derive(Debug, Clone)]
pub struct QuadratureSettings {
    /// Split between the origin treatment and the tail treatment.
    pub split_point: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Refinement depth cap, shared by the Gauss-Kronrod bisection and the
    /// dyadic origin blocks.
    pub max_depth: u32,
    /// Polynomial order used by the series origin rule.
    pub origin_order: usize,
    pub origin_rule: OriginRule,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            split_point: 1e-2,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_depth: 60,
            origin_order: 4,
            origin_rule: OriginRule::Substitution,
        }
    }
}

/// How the singular piece on (0, delta] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OriginRule {
    /// Power substitution flattening the singularity (default).
    Substitution,
    /// Polynomial expansion of g at the origin against exact truncated
    /// moments of the density; cross-check mode.
    SeriesExpansion,
}

#[derive(Debug, Clone, Error)]
pub enum QuadratureError {
    #[error("integral did not converge: achieved {value} with error estimate {error:e}")]
    NonConvergence { value: f64, error: f64 },
    #[error("divergent integrand near the origin: {0}")]
    DivergentIntegrand(String),
    #[error("moment of order {p} diverges at the origin for index alpha = {alpha}")]
    DivergentMoment { p: f64, alpha: f64 },
    #[error("invalid quadrature settings: {0}")]
    InvalidSettings(String),
}

/// Integral value with an error estimate.
#[derive(Debug, Clone, Copy)]
pub struct IntegralEstimate {
    pub value: f64,
    pub error: f64,
}

/// Integrates g against the tempered stable density over both active sides.
///
/// Requires g(0) = 0 with g(z)/z^2 bounded near the origin for full accuracy;
/// integrands behaving like |z|^c with c > alpha are still handled, more
/// slowly. Divergent integrands (c <= alpha) are detected and rejected.
pub fn levy_integral<F: Fn(f64) -> f64>(
    g: F,
    ts: &TemperedStableParams,
    settings: &QuadratureSettings,
) -> Result<IntegralEstimate, QuadratureError> {
    validate(settings)?;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;

    if ts.k_plus > 0.0 {
        let side = integrate_side(&|z| g(z), ts.alpha, ts.lambda_plus, settings)?;
        value += ts.k_plus * side.value;
        error += ts.k_plus * side.error;
        converged &= side.converged;
    }
    if ts.k_minus > 0.0 {
        let side = integrate_side(&|z| g(-z), ts.alpha, ts.lambda_minus, settings)?;
        value += ts.k_minus * side.value;
        error += ts.k_minus * side.error;
        converged &= side.converged;
    }

    if !value.is_finite() {
        return Err(QuadratureError::DivergentIntegrand(
            "non-finite integrand value".into(),
        ));
    }
    let budget = settings.abs_tol.max(settings.rel_tol * value.abs());
    if !converged && error > budget {
        return Err(QuadratureError::NonConvergence { value, error });
    }
    Ok(IntegralEstimate { value, error })
}

/// Mean jump mass per unit time, integral of z nu(dz), in closed form.
///
/// Finite only for alpha < 1; used to centre the alpha in (0,1) series.
pub fn compensator_rate(ts: &TemperedStableParams) -> Result<f64, QuadratureError> {
    if ts.alpha >= 1.0 {
        return Err(QuadratureError::DivergentMoment {
            p: 1.0,
            alpha: ts.alpha,
        });
    }
    let gam = gamma(1.0 - ts.alpha);
    let plus = if ts.k_plus > 0.0 {
        ts.k_plus * gam * ts.lambda_plus.powf(ts.alpha - 1.0)
    } else {
        0.0
    };
    let minus = if ts.k_minus > 0.0 {
        ts.k_minus * gam * ts.lambda_minus.powf(ts.alpha - 1.0)
    } else {
        0.0
    };
    Ok(plus - minus)
}

fn validate(s: &QuadratureSettings) -> Result<(), QuadratureError> {
    if !(s.split_point > 0.0) {
        return Err(QuadratureError::InvalidSettings(
            "split_point must be positive".into(),
        ));
    }
    if !(s.rel_tol > 0.0 && s.abs_tol > 0.0) {
        return Err(QuadratureError::InvalidSettings(
            "tolerances must be positive".into(),
        ));
    }
    if s.max_depth < 1 {
        return Err(QuadratureError::InvalidSettings(
            "max_depth must be at least 1".into(),
        ));
    }
    Ok(())
}

struct PieceResult {
    value: f64,
    error: f64,
    converged: bool,
}

/// One-sided integral of g(z) z^{-alpha-1} e^{-lambda z} over (0, inf),
/// without the k prefactor.
fn integrate_side<F: Fn(f64) -> f64>(
    g: &F,
    alpha: f64,
    lambda: f64,
    s: &QuadratureSettings,
) -> Result<PieceResult, QuadratureError> {
    let origin = match s.origin_rule {
        OriginRule::Substitution => origin_substitution(g, alpha, lambda, s)?,
        OriginRule::SeriesExpansion => origin_series(g, alpha, lambda, s)?,
    };
    let tail = tail_blocks(g, alpha, lambda, s);
    Ok(PieceResult {
        value: origin.value + tail.value,
        error: origin.error + tail.error,
        converged: origin.converged && tail.converged,
    })
}

/// Origin piece via z = delta u^{1/(2-alpha)}. In u the integrand becomes
/// q delta^{2-alpha} (g(z)/z^2) e^{-lambda z}, bounded whenever g ~ z^2.
fn origin_substitution<F: Fn(f64) -> f64>(
    g: &F,
    alpha: f64,
    lambda: f64,
    s: &QuadratureSettings,
) -> Result<PieceResult, QuadratureError> {
    let delta = s.split_point;
    let q = 1.0 / (2.0 - alpha);
    let scale = q * delta.powf(2.0 - alpha);
    let h = |u: f64| {
        let z = delta * u.powf(q);
        scale * (g(z) / (z * z)) * (-lambda * z).exp()
    };

    let max_blocks = s.max_depth.max(8) as usize;
    let block_abs = s.abs_tol / 64.0;
    let block_rel = s.rel_tol * 0.25;

    let mut acc = 0.0;
    let mut err = 0.0;
    let mut prev_block: Option<f64> = None;
    let mut prev_ratio: Option<f64> = None;
    let mut grow_count = 0u32;
    let mut zero_count = 0u32;

    for m in 0..max_blocks {
        let hi = 0.5f64.powi(m as i32);
        let lo = 0.5 * hi;
        let (block, block_err, ok) = adaptive_gk15(&h, lo, hi, block_abs, block_rel, s.max_depth);
        if !block.is_finite() {
            return Err(QuadratureError::DivergentIntegrand(
                "non-finite value in origin blocks".into(),
            ));
        }
        acc += block;
        err += block_err;
        if !ok {
            err += block.abs() * 1e-8;
        }

        // Blocks at the rounding floor of the accumulated value carry no
        // information; treating them as zero avoids mistaking evaluation
        // noise for structure.
        if block == 0.0 || block.abs() <= 16.0 * f64::EPSILON * acc.abs() {
            zero_count += 1;
            if zero_count >= 2 {
                return Ok(PieceResult {
                    value: acc,
                    error: err,
                    converged: true,
                });
            }
            prev_block = Some(block);
            prev_ratio = None;
            continue;
        }
        zero_count = 0;

        if let Some(prev) = prev_block {
            if prev != 0.0 {
                let ratio = block / prev;
                if ratio >= 0.999 {
                    grow_count += 1;
                    if grow_count >= 4 {
                        return Err(QuadratureError::DivergentIntegrand(format!(
                            "origin blocks not decaying (ratio {ratio:.4}); \
                             integrand behaves like z^c with c <= alpha = {alpha}"
                        )));
                    }
                } else {
                    grow_count = 0;
                    if let Some(pr) = prev_ratio {
                        let drift = (ratio - pr).abs();
                        let remainder = block * ratio / (1.0 - ratio);
                        let rem_err = block.abs() * drift / ((1.0 - ratio) * (1.0 - ratio))
                            + remainder.abs() * 1e-12;
                        let budget = s.abs_tol.max(s.rel_tol * (acc + remainder).abs());
                        if m >= 4 && ratio > 0.0 && rem_err + err <= budget {
                            return Ok(PieceResult {
                                value: acc + remainder,
                                error: err + rem_err,
                                converged: true,
                            });
                        }
                        // Also stop once the raw blocks are negligible.
                        if block.abs() + remainder.abs() <= 0.25 * budget {
                            return Ok(PieceResult {
                                value: acc + remainder,
                                error: err + rem_err + remainder.abs(),
                                converged: true,
                            });
                        }
                    }
                }
                prev_ratio = Some(ratio);
            }
        }
        prev_block = Some(block);
    }

    // Block budget exhausted: report the best estimate with the extrapolated
    // remainder folded into the error.
    let remainder = match (prev_block, prev_ratio) {
        (Some(b), Some(r)) if r > 0.0 && r < 1.0 => b * r / (1.0 - r),
        _ => 0.0,
    };
    Ok(PieceResult {
        value: acc + remainder,
        error: err + remainder.abs(),
        converged: false,
    })
}

/// Origin piece via a polynomial fit of g at 0 integrated against exact
/// truncated moments of z^{-alpha-1} e^{-lambda z}.
fn origin_series<F: Fn(f64) -> f64>(
    g: &F,
    alpha: f64,
    lambda: f64,
    s: &QuadratureSettings,
) -> Result<PieceResult, QuadratureError> {
    let delta = s.split_point;
    let order = s.origin_order.clamp(2, 8);
    // Interpolate g on (0, delta/2] through `order` nodes, no constant term.
    let fit_scale = 0.5 * delta;
    let nodes: Vec<f64> = (1..=order)
        .map(|i| fit_scale * i as f64 / order as f64)
        .collect();
    let rhs: Vec<f64> = nodes.iter().map(|&z| g(z)).collect();
    let coeffs = solve_vandermonde(&nodes, &rhs, fit_scale)
        .ok_or_else(|| QuadratureError::InvalidSettings("degenerate origin fit".into()))?;

    let g_scale = rhs
        .iter()
        .zip(&nodes)
        .map(|(v, z)| (v / (z * z)).abs())
        .fold(0.0f64, f64::max);
    let mut value = 0.0;
    for (j, &c) in coeffs.iter().enumerate() {
        let power = (j + 1) as f64;
        if power - alpha <= 0.0 {
            if c.abs() > 1e-10 * g_scale.max(1e-300) {
                return Err(QuadratureError::DivergentIntegrand(format!(
                    "linear term {c:.3e} with alpha = {alpha} makes the origin \
                     integral diverge"
                )));
            }
            continue;
        }
        // integral_0^delta z^{power-alpha-1} e^{-lambda z} dz
        value += c * lambda.powf(alpha - power) * lower_gamma(power - alpha, lambda * delta);
    }
    // Heuristic truncation error: magnitude of the highest fitted term.
    let top = coeffs[order - 1].abs()
        * lambda.powf(alpha - order as f64)
        * lower_gamma(order as f64 - alpha, lambda * delta);
    Ok(PieceResult {
        value,
        error: top.max(value.abs() * 1e-9),
        converged: true,
    })
}

/// Solves sum_j c_j z^j = rhs for j = 1..=n on the given nodes.
#[allow(clippy::needless_range_loop)]
fn solve_vandermonde(nodes: &[f64], rhs: &[f64], scale: f64) -> Option<Vec<f64>> {
    let n = nodes.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = rhs.to_vec();
    for (i, &z) in nodes.iter().enumerate() {
        let w = z / scale;
        let mut p = w;
        for j in 0..n {
            a[i][j] = p;
            p *= w;
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..n {
        let piv = (col..n).max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut c = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * c[k];
        }
        c[row] = s / a[row][row];
    }
    // Undo the node scaling: coefficient of z^j is c_j / scale^j.
    for (j, cj) in c.iter_mut().enumerate() {
        *cj /= scale.powi(j as i32 + 1);
    }
    Some(c)
}

/// Tail [delta, inf) in doubling blocks until the exponential temper makes
/// the remainder negligible.
fn tail_blocks<F: Fn(f64) -> f64>(
    g: &F,
    alpha: f64,
    lambda: f64,
    s: &QuadratureSettings,
) -> PieceResult {
    let f = |z: f64| g(z) * z.powf(-alpha - 1.0) * (-lambda * z).exp();
    let block_abs = s.abs_tol / 64.0;
    let block_rel = s.rel_tol * 0.25;

    let mut acc = 0.0;
    let mut err = 0.0;
    let mut converged = true;
    let mut lo = s.split_point;
    for _ in 0..160 {
        let hi = 2.0 * lo;
        let (block, block_err, ok) = adaptive_gk15(&f, lo, hi, block_abs, block_rel, s.max_depth);
        acc += block;
        err += block_err;
        converged &= ok;
        let budget = s.abs_tol.max(s.rel_tol * acc.abs());
        if lambda * hi >= 5.0 && block.abs() <= 0.125 * budget {
            // Bound the dropped remainder by geometric decay of e^{-lambda z}.
            err += block.abs();
            return PieceResult {
                value: acc,
                error: err,
                converged,
            };
        }
        lo = hi;
        if lo > 1e280 {
            break;
        }
    }
    PieceResult {
        value: acc,
        error: err + acc.abs() * 1e-6,
        converged: false,
    }
}

/// Stack-based adaptive bisection on 15-point Gauss-Kronrod estimates.
/// Returns (value, error estimate, converged).
fn adaptive_gk15<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
) -> (f64, f64, bool) {
    let whole = gk15(f, a, b);
    let mut stack = vec![(a, b, whole.0, whole.1, 0u32)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    while let Some((a, b, v, e, depth)) = stack.pop() {
        let tol = abs_tol.max(rel_tol * v.abs());
        if e <= tol || depth >= max_depth {
            if e > tol {
                converged = false;
            }
            value += v;
            error += e;
            continue;
        }
        let mid = 0.5 * (a + b);
        let left = gk15(f, a, mid);
        let right = gk15(f, mid, b);
        stack.push((a, mid, left.0, left.1, depth + 1));
        stack.push((mid, b, right.0, right.1, depth + 1));
    }
    (value, error, converged)
}

/// QUADPACK 15-point Gauss-Kronrod pair on [a, b]: (value, error estimate).
#[allow(clippy::excessive_precision, clippy::needless_range_loop)]
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    const XGK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022_935_322_010_529_225,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_18,
        0.140_653_259_715_525_92,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_727_83,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_94,
        0.417_959_183_673_469_4,
    ];

    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_gauss = WG[3] * f_center;
    let mut res_kronrod = WGK[7] * f_center;
    let mut res_abs = WGK[7] * f_center.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..3 {
        let idx = 2 * j + 1;
        let x = half * XGK[idx];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[idx] = f1;
        fv2[idx] = f2;
        res_gauss += WG[j] * (f1 + f2);
        res_kronrod += WGK[idx] * (f1 + f2);
        res_abs += WGK[idx] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let idx = 2 * j;
        let x = half * XGK[idx];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[idx] = f1;
        fv2[idx] = f2;
        res_kronrod += WGK[idx] * (f1 + f2);
        res_abs += WGK[idx] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_kronrod - res_gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}
