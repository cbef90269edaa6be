//! Two-parameter Mittag-Leffler function on the non-positive real axis.
//!
//! E_{ρ,μ}(z) = Σ_k z^k / Γ(ρk + μ), evaluated for 0 < ρ ≤ 1, μ > 0 and
//! z = −t ≤ 0. Three regimes are combined:
//!
//! * the power series while its largest term stays moderate
//!   (t^{1/ρ} ≲ 4, so cancellation costs at most a couple of digits);
//! * the algebraic asymptotic expansion
//!   E_{ρ,μ}(−t) ≈ Σ_{j≥1} (−1)^{j+1} t^{−j} / Γ(μ − ρj), truncated where
//!   the term envelope Γ(1 − μ + ρj)/(π t^j) is smallest and accepted only
//!   when that envelope is well below tolerance;
//! * otherwise the real-line integral representation, valid for
//!   0 < ρ < 1 and 0 < μ ≤ 1,
//!
//!   ```text
//!   E_{ρ,μ}(−t) = (1/π) ∫_0^∞ e^{−r} r^{ρ−μ}
//!                 [r^ρ sin(π(1−μ)) + t sin(π(1−μ+ρ))]
//!                 / (r^{2ρ} + 2 r^ρ t cos(πρ) + t²) dr,
//!   ```
//!
//!   with larger μ reached through the upward recurrence
//!   E_{ρ,μ+ρ}(−t) = (1/Γ(μ) − E_{ρ,μ}(−t)) / t.
//!
//! For ρ = 1 the function is e^{−t} when μ = 1 and a Poisson-weighted
//! Kummer series otherwise.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::special::{ln_gamma, rgamma};

/// Arguments of one evaluation of E_{ρ,μ}(z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlQuery {
    pub rho: f64,
    pub mu: f64,
    pub z: f64,
}

impl MlQuery {
    pub fn new(rho: f64, mu: f64, z: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(invalid(format!("Mittag-Leffler order rho = {rho} not in (0, 1]")));
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("Mittag-Leffler parameter mu = {mu} must be > 0")));
        }
        if !(z <= 0.0) {
            return Err(invalid(format!("Mittag-Leffler argument z = {z} must be <= 0")));
        }
        Ok(Self { rho, mu, z })
    }
}

/// Evaluation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlConfig {
    /// Upper bound on |z| for the power series.
    pub series_cutoff: f64,
    /// Maximum number of asymptotic terms.
    pub asym_terms: usize,
    /// Target absolute accuracy.
    pub abs_tol: f64,
}

impl Default for MlConfig {
    fn default() -> Self {
        Self {
            series_cutoff: 5.0,
            asym_terms: 60,
            abs_tol: 1e-12,
        }
    }
}

impl MlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(invalid("abs_tol must be positive"));
        }
        if self.asym_terms < 1 {
            return Err(invalid("asym_terms must be at least 1"));
        }
        if !(self.series_cutoff >= 0.0) {
            return Err(invalid("series_cutoff must be non-negative"));
        }
        Ok(())
    }
}

/// Which branch produced a value; exposed for diagnostics and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Exact,
    Series,
    Asymptotic,
    Integral,
    Kummer,
}

/// A value with its error estimate and the regime that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlValue {
    pub value: f64,
    pub err: f64,
    pub regime: Regime,
}

// Largest t^{1/ρ} for which the alternating series is summed directly.
const SERIES_GROWTH_LIMIT: f64 = 4.0;
const SERIES_MAX_TERMS: usize = 400;

/// E_{ρ,μ}(z) to absolute accuracy `cfg.abs_tol`.
pub fn ml_eval(q: &MlQuery, cfg: &MlConfig) -> Result<f64> {
    ml_eval_detailed(q, cfg).map(|v| v.value)
}

/// Like [`ml_eval`], also reporting the error estimate and regime.
pub fn ml_eval_detailed(q: &MlQuery, cfg: &MlConfig) -> Result<MlValue> {
    let MlQuery { rho, mu, z } = *q;
    let t = -z;
    if t == 0.0 {
        return Ok(MlValue {
            value: rgamma(mu),
            err: 0.0,
            regime: Regime::Exact,
        });
    }
    let tol = cfg.abs_tol;
    let fail = |estimate: f64| Error::AccuracyNotReached {
        rho,
        mu,
        z,
        estimate,
        tol,
    };

    if rho == 1.0 && mu == 1.0 {
        return Ok(MlValue {
            value: (-t).exp(),
            err: 0.0,
            regime: Regime::Exact,
        });
    }

    if t <= cfg.series_cutoff && t.powf(1.0 / rho) <= SERIES_GROWTH_LIMIT {
        let v = series(rho, mu, t, tol);
        if v.err <= tol {
            return Ok(v);
        }
    }

    if let Some(v) = asymptotic(rho, mu, t, cfg.asym_terms) {
        if v.err <= 1e-2 * tol {
            return Ok(v);
        }
    }

    let v = if rho == 1.0 {
        kummer(mu, t)
    } else {
        integral_with_recurrence(rho, mu, t, tol)
    };
    if v.err <= tol {
        Ok(v)
    } else {
        Err(fail(v.err))
    }
}

/// Convenience wrapper with the default configuration.
pub fn mittag_leffler(rho: f64, mu: f64, z: f64) -> Result<f64> {
    ml_eval(&MlQuery::new(rho, mu, z)?, &MlConfig::default())
}

/// Largest disagreement between the independent branches valid at E_{ρ,μ}(−t),
/// 0 < ρ < 1: series against the integral representation where the series
/// converges cleanly, asymptotic against integral where the envelope is small.
/// `None` when only one branch applies.
pub fn regime_agreement(rho: f64, mu: f64, t: f64) -> Result<Option<f64>> {
    MlQuery::new(rho, mu, -t)?;
    if rho >= 1.0 || t <= 0.0 {
        return Err(invalid("regime_agreement needs 0 < rho < 1 and t > 0"));
    }
    let tol = 1e-13;
    let reference = integral_with_recurrence(rho, mu, t, tol);
    let mut worst: Option<f64> = None;
    let s = series(rho, mu, t, tol);
    if s.err <= tol {
        worst = Some((s.value - reference.value).abs());
    }
    if let Some(a) = asymptotic(rho, mu, t, 60) {
        if a.err <= tol {
            let d = (a.value - reference.value).abs();
            worst = Some(worst.map_or(d, |w| w.max(d)));
        }
    }
    Ok(worst)
}

/// The Duhamel kernel t^{ρ−1} E_{ρ,ρ}(−λ t^ρ) for t > 0.
pub fn ml_kernel(rho: f64, lam: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("kernel time t = {t} must be > 0")));
    }
    if !(lam >= 0.0) {
        return Err(invalid(format!("kernel eigenvalue {lam} must be >= 0")));
    }
    let e = mittag_leffler(rho, rho, -lam * t.powf(rho))?;
    Ok(t.powf(rho - 1.0) * e)
}

/// |E_{ρ,μ}(−t) − 1/Γ(μ) + t E_{ρ,μ+ρ}(−t)|.
pub fn recurrence_residual(rho: f64, mu: f64, t: f64) -> Result<f64> {
    let lhs = mittag_leffler(rho, mu, -t)?;
    let shifted = mittag_leffler(rho, mu + rho, -t)?;
    Ok((lhs - rgamma(mu) + t * shifted).abs())
}

/// |∫_0^t η^{ρ−1} E_{ρ,ρ}(−λη^ρ) dη − t^ρ E_{ρ,ρ+1}(−λt^ρ)|, the left side by
/// adaptive quadrature of (1/ρ) ∫_0^{t^ρ} E_{ρ,ρ}(−λs) ds.
pub fn integral_identity_residual(rho: f64, lam: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !(lam >= 0.0) {
        return Err(invalid(format!("identity needs t > 0 and λ >= 0, got t = {t}, λ = {lam}")));
    }
    let q = MlQuery::new(rho, rho, 0.0)?;
    let cfg = MlConfig::default();
    let mut failure = None;
    let est = quad::adaptive(
        |s| match ml_eval(&MlQuery { z: -lam * s, ..q }, &cfg) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        t.powf(rho),
        &[],
        1e-13,
        1e-13,
        2000,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let closed = t.powf(rho) * mittag_leffler(rho, rho + 1.0, -lam * t.powf(rho))?;
    Ok((est.value / rho - closed).abs())
}

fn series(rho: f64, mu: f64, t: f64, tol: f64) -> MlValue {
    // Neumaier-compensated sum of (−t)^k / Γ(ρk + μ)
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut power = 1.0;
    let mut largest: f64 = 0.0;
    let mut last = f64::INFINITY;
    let mut k = 0usize;
    while k < SERIES_MAX_TERMS {
        let term = power * rgamma(rho * k as f64 + mu);
        largest = largest.max(term.abs());
        let s = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - s) + term;
        } else {
            comp += (term - s) + sum;
        }
        sum = s;
        last = term.abs();
        k += 1;
        // stop once past the peak and the terms are negligible
        if term.abs() < 1e-3 * tol && (rho * k as f64 + mu) > t.powf(1.0 / rho) {
            break;
        }
        power *= -t;
    }
    let tail = if k >= SERIES_MAX_TERMS { last } else { 0.0 };
    MlValue {
        value: sum + comp,
        err: 4.0 * f64::EPSILON * largest * (k as f64).sqrt() + tail,
        regime: Regime::Series,
    }
}

fn asymptotic(rho: f64, mu: f64, t: f64, max_terms: usize) -> Option<MlValue> {
    // Terms carry a factor sin(π(μ − ρj)) that can make a single term tiny
    // without the remainder being small, so truncation follows the envelope
    // Γ(1 − μ + ρj) / (π t^j) instead of the terms themselves.
    let ln_t = t.ln();
    let envelope = |j: usize| {
        let a = 1.0 - mu + rho * j as f64;
        let ln_env = if a > 0.0 {
            ln_gamma(a) - PI.ln()
        } else {
            rgamma(mu - rho * j as f64).abs().ln()
        };
        (ln_env - j as f64 * ln_t).exp()
    };
    let mut sum = 0.0;
    let mut power = 1.0;
    let mut prev = f64::INFINITY;
    for j in 1..=max_terms {
        let env = envelope(j);
        if env > prev {
            return Some(MlValue {
                value: sum,
                err: env,
                regime: Regime::Asymptotic,
            });
        }
        power /= t;
        let term = power * rgamma(mu - rho * j as f64);
        if !term.is_finite() {
            return None;
        }
        sum += if j % 2 == 1 { term } else { -term };
        prev = env;
    }
    Some(MlValue {
        value: sum,
        err: envelope(max_terms + 1),
        regime: Regime::Asymptotic,
    })
}

fn integral_with_recurrence(rho: f64, mu: f64, t: f64, tol: f64) -> MlValue {
    let mut shifts = 0usize;
    let mut base = mu;
    if mu > 1.0 {
        shifts = ((mu - 1.0) / rho - 1e-12).ceil() as usize;
        base = mu - shifts as f64 * rho;
    }
    // each upward step divides the error by t; ask for headroom when t < 1
    let headroom = t.min(1.0).powi(shifts as i32);
    let mut v = integral(rho, base, t, tol * headroom);
    let mut m = base;
    for _ in 0..shifts {
        v.value = (rgamma(m) - v.value) / t;
        v.err /= t;
        m += rho;
    }
    v.err += 4.0 * f64::EPSILON * (v.value.abs() + rgamma(mu).abs());
    v
}

/// E_{ρ,μ}(−t) for 0 < ρ < 1, 0 < μ ≤ 1 via the real-line representation.
///
/// The substitution r = w^q, q = 1/(1+ρ−μ), removes the r^{ρ−μ}
/// endpoint singularity.
fn integral(rho: f64, mu: f64, t: f64, tol: f64) -> MlValue {
    let q = 1.0 / (1.0 + rho - mu);
    let s1 = (PI * (1.0 - mu)).sin();
    let s2 = (PI * (1.0 - mu + rho)).sin();
    let c = (PI * rho).cos();
    let t2 = t * t;
    let integrand = |w: f64| {
        if w == 0.0 {
            return if q == 1.0 { s2 / t } else { q * s2 / t };
        }
        let r = w.powf(q);
        let rr = r.powf(rho);
        q * (-r).exp() * (rr * s1 + t * s2) / (rr * rr + 2.0 * rr * t * c + t2)
    };
    // e^{-r} below 1e-30 of the peak beyond r = 70
    let r_max: f64 = 70.0;
    let w_max = r_max.powf(1.0 / q);
    let mut breaks = vec![1.0f64.min(w_max * 0.5)];
    if c < 0.0 {
        // denominator minimum at r^ρ = −t cos(πρ)
        let peak = (-t * c).powf(1.0 / rho);
        if peak < r_max {
            let wp = peak.powf(1.0 / q);
            let width = (t * (PI * rho).sin()).max(1e-3 * peak).powf(1.0 / rho).min(peak);
            breaks.push(wp);
            breaks.push((peak - width).max(0.0).powf(1.0 / q));
            breaks.push((peak + width).powf(1.0 / q));
        }
    }
    let est = quad::adaptive(integrand, 0.0, w_max, &breaks, 0.05 * tol, 1e-15, 2000);
    MlValue {
        value: est.value / PI,
        err: est.abs_err / PI,
        regime: Regime::Integral,
    }
}

/// ρ = 1: E_{1,μ}(−t) = e^{−t} ₁F₁(μ−1; μ; t) / Γ(μ)
///        = (1/Γ(μ)) Σ_n (μ−1)/(μ−1+n) · e^{−t} t^n / n!.
fn kummer(mu: f64, t: f64) -> MlValue {
    let a = mu - 1.0;
    let spread = 40.0 * t.sqrt() + 40.0;
    let lo = (t - spread).max(0.0).floor() as usize;
    let hi = (t + spread).ceil() as usize;
    let ln_t = t.ln();
    let mut sum = 0.0;
    for n in lo..=hi {
        let nf = n as f64;
        let weight = (-t + nf * ln_t - ln_gamma(nf + 1.0)).exp();
        sum += a / (a + nf) * weight;
    }
    // log-space Poisson weights carry ~eps·t relative error
    let err = (f64::EPSILON * (t + 10.0)) * sum.abs().max(1.0) * rgamma(mu).abs();
    MlValue {
        value: rgamma(mu) * sum,
        err,
        regime: Regime::Kummer,
    }
}
