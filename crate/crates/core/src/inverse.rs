//! Inverse source problem: recover f in F = f(x) g(t) from u(x, t0) = φ0(x).

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::eigenbasis::Mode;
use crate::error::{invalid, Error, Result};
use crate::forward::{analyze_solvability, solve_forward, ForwardOptions, ForwardSolution, ProblemParams, Source};
use crate::mlf::mittag_leffler;
use crate::transforms::{i_k_alpha, i_k_rho, sign_check, synthesize, QuadratureSpec, Sign, SpectralField, TimeFunction};

pub const DEFAULT_C0: f64 = 1.0;
/// Margin (in units of zero_tol) inside which a nonzero Δ_k is flagged.
pub const PRECISION_MARGIN: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct InverseProblem {
    pub params: ProblemParams,
    pub g: TimeFunction,
    pub t0: f64,
    /// Coefficients of u(·, t0).
    pub phi0: SpectralField,
    sign: Sign,
    /// min and max of |g| on [−α, β]
    m: f64,
    big_m: f64,
}

impl InverseProblem {
    pub fn new(params: ProblemParams, g: TimeFunction, t0: f64, phi0: SpectralField) -> Result<Self> {
        params.validate()?;
        if !(t0 > 0.0 && t0 < params.beta) {
            return Err(invalid(format!("t0 = {t0} not in (0, {})", params.beta)));
        }
        let s = sign_check(&g, -params.alpha, params.beta)?;
        let (m, big_m) = match s.sign {
            Sign::Positive => (s.min, s.max),
            Sign::Negative => (-s.max, -s.min),
            Sign::SignChanging => {
                return Err(Error::SignChanging {
                    lo: -params.alpha,
                    hi: params.beta,
                    min: s.min,
                    max: s.max,
                })
            }
        };
        let fw = analyze_solvability(&params, &phi0.modes)?;
        if !fw.resonant_set.is_empty() {
            return Err(invalid(format!(
                "forward denominators vanish for modes {:?}; the inverse problem needs all δ_k ≠ 0",
                fw.resonant_set
            )));
        }
        Ok(Self {
            params,
            g,
            t0,
            phi0,
            sign: s.sign,
            m,
            big_m,
        })
    }

    pub fn g_sign(&self) -> Sign {
        self.sign
    }

    /// (min |g|, max |g|) on [−α, β].
    pub fn g_bounds(&self) -> (f64, f64) {
        (self.m, self.big_m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseOptions {
    /// f_k for modes in 𝕂₀, by 1-based index; missing ones are 0.
    pub free_f: BTreeMap<usize, f64>,
    /// |φ0_k| allowed on 𝕂₀, relative to ‖φ0‖.
    pub ortho_tol: f64,
    /// Constant of the Mittag-Leffler decay bound used by the diagnostics only.
    pub c0: f64,
    pub quad: QuadratureSpec,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            free_f: BTreeMap::new(),
            ortho_tol: crate::forward::DEFAULT_ORTHO_TOL,
            c0: DEFAULT_C0,
            quad: QuadratureSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorReport {
    /// Δ_k(t0)
    pub delta: Vec<f64>,
    /// E_{ρ,1}(−λ_k t0^ρ) I_k(α)
    pub term1: Vec<f64>,
    /// δ_k I_{k,ρ}(t0)
    pub term2: Vec<f64>,
    /// e^{−λ_kα} − λ
    pub delta_fw: Vec<f64>,
    /// 1-based indices with Δ_k(t0) = 0 to tolerance.
    pub k0: Vec<usize>,
    /// Nonzero Δ_k within `PRECISION_MARGIN` of the zero threshold.
    pub precision_loss: Vec<usize>,
    pub m: f64,
    pub big_m: f64,
    pub c0: f64,
    /// C0/λ_1 (1 + M/m)
    pub t0_threshold: f64,
    /// t0^ρ > t0_threshold
    pub t0_condition: bool,
    /// First index with t0^ρ > C0/λ_k (1 + M/m).
    pub k_l: Option<usize>,
    /// First index (0 < λ < 1) with (λ − e^{−λ_kα}) m/λ_k exceeding
    /// C0/(λ_k² t0^ρ) (M(1 − e^{−λ_kα}) + (λ − e^{−λ_kα}) m).
    pub k_r: Option<usize>,
}

/// Δ_k(t0) split into its two terms.
pub fn denominator_terms(
    params: &ProblemParams,
    g: &TimeFunction,
    eigenvalue: f64,
    t0: f64,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let e = mittag_leffler(params.rho, 1.0, -eigenvalue * t0.powf(params.rho))?;
    let ia = i_k_alpha(g, eigenvalue, params.alpha)?;
    let ir = i_k_rho(g, eigenvalue, params.rho, t0, quad)?;
    Ok((e * ia, params.delta(eigenvalue) * ir))
}

pub fn compute_denominators(prob: &InverseProblem, modes: &[Mode], opts: &InverseOptions) -> Result<DenominatorReport> {
    opts.quad.validate()?;
    if !(opts.c0 > 0.0) {
        return Err(invalid(format!("C0 = {} must be positive", opts.c0)));
    }
    let p = &prob.params;
    let terms = modes
        .par_iter()
        .map(|m| denominator_terms(p, &prob.g, m.eigenvalue, prob.t0, &opts.quad))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let term1: Vec<f64> = terms.iter().map(|t| t.0).collect();
    let term2: Vec<f64> = terms.iter().map(|t| t.1).collect();
    let delta: Vec<f64> = terms.iter().map(|t| t.0 + t.1).collect();
    let mut k0 = Vec::new();
    let mut precision_loss = Vec::new();
    for (i, (t1, t2)) in terms.iter().enumerate() {
        let threshold = p.zero_tol * (t1.abs() + t2.abs());
        if delta[i].abs() <= threshold {
            k0.push(modes[i].index);
        } else if delta[i].abs() <= PRECISION_MARGIN * threshold {
            precision_loss.push(modes[i].index);
        }
    }
    let (m, big_m) = prob.g_bounds();
    let t0r = prob.t0.powf(p.rho);
    let ratio = 1.0 + big_m / m;
    let t0_threshold = opts.c0 / modes[0].eigenvalue * ratio;
    let k_l = modes
        .iter()
        .find(|md| t0r > opts.c0 / md.eigenvalue * ratio)
        .map(|md| md.index);
    let k_r = if p.lambda > 0.0 && p.lambda < 1.0 {
        modes
            .iter()
            .find(|md| {
                let lk = md.eigenvalue;
                let e = (-lk * p.alpha).exp();
                let lhs = (p.lambda - e) * m / lk;
                let rhs = opts.c0 / (lk * lk * t0r) * (big_m * (1.0 - e) + (p.lambda - e) * m);
                lhs > rhs
            })
            .map(|md| md.index)
    } else {
        None
    };
    Ok(DenominatorReport {
        delta,
        term1,
        term2,
        delta_fw: modes.iter().map(|md| p.delta(md.eigenvalue)).collect(),
        k0,
        precision_loss,
        m,
        big_m,
        c0: opts.c0,
        t0_threshold,
        t0_condition: t0r > t0_threshold,
        k_l,
        k_r,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseSolution {
    pub f: SpectralField,
    pub u: ForwardSolution,
    /// Members of 𝕂₀ whose f_k were taken from the free coefficients.
    pub free_indices: Vec<usize>,
    pub report: DenominatorReport,
    pub warnings: Vec<String>,
}

/// f_k = δ_k φ0_k / Δ_k(t0) off 𝕂₀; free values on 𝕂₀, which needs φ0_k ≈ 0.
pub fn solve_inverse(prob: &InverseProblem, opts: &InverseOptions) -> Result<InverseSolution> {
    let modes = prob.phi0.modes.clone();
    let report = compute_denominators(prob, &modes, opts)?;
    let phi = &prob.phi0.coeffs;
    let scale = prob.phi0.norm();
    let offending: Vec<usize> = report
        .k0
        .iter()
        .copied()
        .filter(|k| phi[k - 1].abs() > opts.ortho_tol * scale)
        .collect();
    if !offending.is_empty() {
        let values = offending.iter().map(|k| phi[k - 1]).collect();
        return Err(Error::NoSolution {
            indices: offending,
            values,
        });
    }
    let coeffs: Vec<f64> = modes
        .iter()
        .enumerate()
        .map(|(i, md)| {
            if report.k0.contains(&md.index) {
                opts.free_f.get(&md.index).copied().unwrap_or(0.0)
            } else {
                report.delta_fw[i] * phi[i] / report.delta[i]
            }
        })
        .collect();
    let f = SpectralField::new(modes.clone(), coeffs)?;
    let warnings = report
        .precision_loss
        .iter()
        .map(|k| {
            format!(
                "precision loss: |Δ_{k}(t0)| = {:e} is within {PRECISION_MARGIN:e} zero thresholds",
                report.delta[k - 1].abs()
            )
        })
        .collect();
    let fw_opts = ForwardOptions {
        quad: opts.quad,
        ..ForwardOptions::default()
    };
    let u = solve_forward(
        &prob.params,
        modes,
        &Source::Separable {
            f: f.clone(),
            g: prob.g.clone(),
        },
        &fw_opts,
    )?;
    Ok(InverseSolution {
        f,
        u,
        free_indices: report.k0.clone(),
        report,
        warnings,
    })
}

/// max over `points` of |u(x, t0) − φ0(x)|.
pub fn verify_overdetermination(sol: &InverseSolution, prob: &InverseProblem, points: &[Vec<f64>]) -> Result<f64> {
    let values = sol.u.mode_values(prob.t0)?;
    let mut worst = 0.0f64;
    for x in points {
        worst = worst.max((sol.u.synthesize(&values, x)? - synthesize(&prob.phi0, x)).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub k: usize,
    pub eigenvalue: f64,
    /// |Δ_k(t0)| λ_k
    pub scaled: f64,
    /// Whether the lower bound |Δ_k| ≥ C/λ_k is claimed for this k.
    pub in_regime: bool,
    /// In regime, but Δ_k is zero or has the wrong sign.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundTable {
    pub rows: Vec<BoundRow>,
    /// inf of |Δ_k| λ_k over the rows in regime.
    pub empirical_c: Option<f64>,
}

/// |Δ_k| λ_k per mode with the regime each bound claims: every k for λ < 0
/// (Δ_k has the sign of g), every k when t0^ρ exceeds `t0_threshold` and k ≥ k_l otherwise for
/// λ ≥ 1, and k ≥ k_r for 0 < λ < 1 (Δ_k has the sign of −g in both).
pub fn bound_diagnostics(prob: &InverseProblem, report: &DenominatorReport, modes: &[Mode]) -> BoundTable {
    let lam = prob.params.lambda;
    let g_sign = if prob.g_sign() == Sign::Negative { -1.0 } else { 1.0 };
    let (first, expected) = if lam < 0.0 {
        (Some(1), g_sign)
    } else if lam >= 1.0 {
        (if report.t0_condition { Some(1) } else { report.k_l }, -g_sign)
    } else {
        (report.k_r, -g_sign)
    };
    let rows: Vec<BoundRow> = modes
        .iter()
        .zip(&report.delta)
        .map(|(md, d)| {
            let in_regime = first.is_some_and(|f| md.index >= f);
            BoundRow {
                k: md.index,
                eigenvalue: md.eigenvalue,
                scaled: d.abs() * md.eigenvalue,
                in_regime,
                violated: in_regime && !(d * expected > 0.0),
            }
        })
        .collect();
    let empirical_c = rows
        .iter()
        .filter(|r| r.in_regime)
        .map(|r| r.scaled)
        .reduce(f64::min);
    BoundTable { rows, empirical_c }
}

/// Bisection on t0 ↦ Δ_k(t0) over a sign-changing bracket, run until the
/// midpoint coincides with an endpoint. Returns the endpoint with smaller |Δ_k|.
pub fn bisect_root(
    params: &ProblemParams,
    g: &TimeFunction,
    eigenvalue: f64,
    mut lo: f64,
    mut hi: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid(format!("bracket [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let eval = |t: f64| denominator_terms(params, g, eigenvalue, t, quad).map(|(a, b)| a + b);
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(invalid(format!(
            "Δ does not change sign on [{lo}, {hi}] ({f_lo:e}, {f_hi:e})"
        )));
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = eval(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::{enumerate_modes, BoxDomain};
    use crate::forward::eval_u;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    const ROOT_T0: f64 = 1.700468428861618e-3;

    fn modes_1d(k: usize) -> Arc<[Mode]> {
        enumerate_modes(&BoxDomain::unit(1).unwrap(), k).unwrap().into()
    }

    fn params(rho: f64, lambda: f64, k: usize) -> ProblemParams {
        ProblemParams::new(rho, 1.0, 1.0, lambda, k).unwrap()
    }

    fn grid() -> Vec<Vec<f64>> {
        (0..=20).map(|i| vec![i as f64 / 20.0]).collect()
    }

    /// φ0 = u(·, t0) for the source f g.
    fn data(p: &ProblemParams, modes: &Arc<[Mode]>, f: &[f64], g: &TimeFunction, t0: f64) -> SpectralField {
        let src = Source::Separable {
            f: SpectralField::new(modes.clone(), f.to_vec()).unwrap(),
            g: g.clone(),
        };
        let sol = solve_forward(p, modes.clone(), &src, &ForwardOptions::default()).unwrap();
        SpectralField::new(modes.clone(), sol.mode_values(t0).unwrap()).unwrap()
    }

    #[test]
    fn problem_validation() {
        let modes = modes_1d(4);
        let phi = SpectralField::zeros(modes);
        let g = TimeFunction::Constant(1.0);
        assert!(InverseProblem::new(params(0.5, -1.0, 4), g.clone(), 0.0, phi.clone()).is_err());
        assert!(InverseProblem::new(params(0.5, -1.0, 4), g.clone(), 1.0, phi.clone()).is_err());
        let changing = TimeFunction::Polynomial(vec![0.0, 1.0]);
        assert!(matches!(
            InverseProblem::new(params(0.5, -1.0, 4), changing, 0.5, phi.clone()),
            Err(Error::SignChanging { .. })
        ));
        let resonant = params(0.5, (-std::f64::consts::PI.powi(2)).exp(), 4);
        assert!(InverseProblem::new(resonant, g.clone(), 0.5, phi.clone()).is_err());
        let neg = InverseProblem::new(params(0.5, 2.0, 4), TimeFunction::Constant(-2.0), 0.5, phi).unwrap();
        assert_eq!(neg.g_bounds(), (2.0, 2.0));
    }

    #[test]
    fn negative_lambda_denominators_are_positive() {
        let modes = modes_1d(50);
        let prob = InverseProblem::new(params(0.5, -1.0, 50), TimeFunction::Constant(1.0), 0.5, SpectralField::zeros(modes.clone())).unwrap();
        let r = compute_denominators(&prob, &modes, &InverseOptions::default()).unwrap();
        assert_abs_diff_eq!(r.delta[0], 0.10132558540412016, epsilon = 1e-14);
        assert!(r.delta.iter().all(|d| *d > 0.0));
        assert!(r.k0.is_empty());
        // both terms decay like 1/λ_k
        let scaled: Vec<f64> = r.delta.iter().zip(modes.iter()).map(|(d, m)| d * m.eigenvalue).collect();
        assert!(scaled.iter().all(|s| *s > 0.5 && *s < 2.5), "{scaled:?}");
        let table = bound_diagnostics(&prob, &r, &modes);
        assert!(table.rows.iter().all(|r| r.in_regime && !r.violated));
        assert!(table.empirical_c.unwrap() > 0.0);
    }

    #[test]
    fn engineered_root_is_detected() {
        let modes = modes_1d(10);
        let p = params(0.5, 2.0, 10);
        let g = TimeFunction::Constant(1.0);
        let t = bisect_root(&p, &g, modes[0].eigenvalue, 1e-4, 1e-2, &QuadratureSpec::default()).unwrap();
        assert!((t - ROOT_T0).abs() <= 1e-14, "{t}");
        let prob = InverseProblem::new(p, g, t, SpectralField::zeros(modes.clone())).unwrap();
        let r = compute_denominators(&prob, &modes, &InverseOptions::default()).unwrap();
        assert_eq!(r.k0, vec![1]);
        assert!(!r.t0_condition);
        assert_eq!(r.k_l, Some(3));
        let table = bound_diagnostics(&prob, &r, &modes);
        assert!(!table.rows[0].in_regime && !table.rows[1].in_regime && table.rows[2].in_regime);
        assert!(table.rows.iter().all(|r| !r.violated));
        assert!(bisect_root(&p, &TimeFunction::Constant(1.0), modes[0].eigenvalue, 0.1, 0.5, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn zero_data_gives_zero_source() {
        let modes = modes_1d(8);
        let prob = InverseProblem::new(params(0.5, -1.0, 8), TimeFunction::Constant(1.0), 0.5, SpectralField::zeros(modes.clone())).unwrap();
        let sol = solve_inverse(&prob, &InverseOptions::default()).unwrap();
        assert!(sol.f.coeffs.iter().all(|c| *c == 0.0));
        assert_eq!(eval_u(&sol.u, &[0.3], 0.2).unwrap(), 0.0);
        assert_eq!(verify_overdetermination(&sol, &prob, &grid()).unwrap(), 0.0);
    }

    #[test]
    fn manufactured_round_trip() {
        let modes = modes_1d(8);
        let p = params(0.5, -1.0, 8);
        let g = TimeFunction::Constant(1.0);
        let mut f = vec![0.0; 8];
        f[0] = 1.0;
        let phi0 = data(&p, &modes, &f, &g, 0.5);
        let prob = InverseProblem::new(p, g, 0.5, phi0).unwrap();
        let sol = solve_inverse(&prob, &InverseOptions::default()).unwrap();
        assert!((sol.f.coeffs[0] - 1.0).abs() <= 1e-8);
        assert!(sol.f.coeffs[1..].iter().all(|c| c.abs() <= 1e-12));
        for (i, fk) in sol.f.coeffs.iter().enumerate() {
            let lhs = fk * sol.report.delta[i] - sol.report.delta_fw[i] * prob.phi0.coeffs[i];
            assert!(lhs.abs() <= 1e-10);
        }
        assert!(verify_overdetermination(&sol, &prob, &grid()).unwrap() <= 1e-6);

        // a perturbed source moves u(·, t0) by 0.1 Δ_1/δ_1 v_1
        let mut bad = sol.clone();
        bad.f.coeffs[0] *= 1.1;
        bad.u = solve_forward(
            &prob.params,
            modes.clone(),
            &Source::Separable { f: bad.f.clone(), g: prob.g.clone() },
            &ForwardOptions::default(),
        )
        .unwrap();
        let shift = verify_overdetermination(&bad, &prob, &grid()).unwrap();
        let expected = 0.1 * (sol.report.delta[0] / sol.report.delta_fw[0]).abs() * 2f64.sqrt();
        assert!((shift - expected).abs() <= 1e-3 * expected, "{shift} vs {expected}");
    }

    #[test]
    fn non_uniqueness_at_root() {
        let modes = modes_1d(8);
        let p = params(0.5, 2.0, 8);
        let g = TimeFunction::Constant(1.0);
        let t0 = bisect_root(&p, &g, modes[0].eigenvalue, 1e-4, 1e-2, &QuadratureSpec::default()).unwrap();
        let f = [0.0, 0.5, 0.0, -0.25, 0.0, 0.0, 0.0, 0.0];
        let phi0 = data(&p, &modes, &f, &g, t0);
        assert_eq!(phi0.coeffs[0], 0.0);
        let prob = InverseProblem::new(p, g.clone(), t0, phi0).unwrap();
        let mut f1 = Vec::new();
        for free in [0.0, 1.0] {
            let opts = InverseOptions {
                free_f: BTreeMap::from([(1, free)]),
                ..Default::default()
            };
            let sol = solve_inverse(&prob, &opts).unwrap();
            assert_eq!(sol.free_indices, vec![1]);
            assert!(verify_overdetermination(&sol, &prob, &grid()).unwrap() <= 1e-6);
            f1.push(sol.f.coeffs[0]);
            assert!((sol.f.coeffs[1] - 0.5).abs() <= 1e-8 && (sol.f.coeffs[3] + 0.25).abs() <= 1e-8);
        }
        assert_ne!(f1[0], f1[1]);

        let mut f = f;
        f[0] = 1.0;
        let phi0 = data(&p, &modes, &f, &g, 0.3);
        let prob = InverseProblem::new(p, g, t0, phi0).unwrap();
        match solve_inverse(&prob, &InverseOptions::default()) {
            Err(Error::NoSolution { indices, .. }) => assert_eq!(indices, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unique_solution_ignores_free_values() {
        let modes = modes_1d(6);
        let p = params(0.3, 0.5, 6);
        let g = TimeFunction::Exponential { scale: 1.0, rate: 0.3 };
        let phi0 = data(&p, &modes, &[1.0, 0.2, 0.0, 0.1, 0.0, 0.05], &g, 0.7);
        let prob = InverseProblem::new(p, g, 0.7, phi0).unwrap();
        let a = solve_inverse(&prob, &InverseOptions::default()).unwrap();
        let b = solve_inverse(
            &prob,
            &InverseOptions {
                free_f: BTreeMap::from([(1, 9.0)]),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(a.report.k0.is_empty());
        let bits = |s: &InverseSolution| s.f.coeffs.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn large_t0_bound_holds_for_all_modes() {
        let modes = modes_1d(200);
        let prob = InverseProblem::new(params(0.5, 2.0, 200), TimeFunction::Constant(1.0), 0.9, SpectralField::zeros(modes.clone())).unwrap();
        let r = compute_denominators(&prob, &modes, &InverseOptions::default()).unwrap();
        assert!(r.t0_condition);
        let table = bound_diagnostics(&prob, &r, &modes);
        assert!(table.rows.iter().all(|r| r.in_regime && !r.violated));
        assert!(table.empirical_c.unwrap() > 0.0);
    }

    #[test]
    fn unit_interval_threshold() {
        let modes = modes_1d(30);
        let prob = InverseProblem::new(params(0.5, 0.5, 30), TimeFunction::Constant(1.0), 0.5, SpectralField::zeros(modes.clone())).unwrap();
        let r = compute_denominators(&prob, &modes, &InverseOptions::default()).unwrap();
        let kr = r.k_r.unwrap();
        let table = bound_diagnostics(&prob, &r, &modes);
        assert!(table.rows[kr - 1..].iter().all(|r| r.in_regime && !r.violated));
    }
}
