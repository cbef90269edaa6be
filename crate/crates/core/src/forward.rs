//! Forward problem: per-mode denominators, resonance detection and the
//! two-sided series solution.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::eigenbasis::Mode;
use crate::error::{invalid, Error, Result};
use crate::mlf::mittag_leffler;
use crate::oracle::{caputo_l1_derivative, central_derivative, ModeTrace, TimeGrid};
use crate::transforms::{duhamel, fstar_k, history, i_k_alpha, QuadratureSpec, SpectralField, TimeFunction};

pub const DEFAULT_ZERO_TOL: f64 = 1e-12;
pub const DEFAULT_ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mode_count: usize,
    /// Relative threshold for declaring a denominator zero.
    pub zero_tol: f64,
}

impl ProblemParams {
    pub fn new(rho: f64, alpha: f64, beta: f64, lambda: f64, mode_count: usize) -> Result<Self> {
        let p = Self {
            rho,
            alpha,
            beta,
            lambda,
            mode_count,
            zero_tol: DEFAULT_ZERO_TOL,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid(format!("rho = {} not in (0, 1)", self.rho)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha = {} must be positive", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta = {} must be positive", self.beta)));
        }
        if self.lambda == 0.0 || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda = {} must be finite and nonzero", self.lambda)));
        }
        if self.mode_count == 0 {
            return Err(invalid("mode_count must be positive"));
        }
        if !(self.zero_tol >= 0.0 && self.zero_tol < 1.0) {
            return Err(invalid(format!("zero_tol = {} not in [0, 1)", self.zero_tol)));
        }
        Ok(())
    }

    pub fn lambda_class(&self) -> LambdaClass {
        if self.lambda < 0.0 {
            LambdaClass::Negative
        } else if self.lambda >= 1.0 {
            LambdaClass::GeOne
        } else {
            LambdaClass::UnitInterval
        }
    }

    /// δ = e^{−λ_k α} − λ.
    pub fn delta(&self, eigenvalue: f64) -> f64 {
        (-eigenvalue * self.alpha).exp() - self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaClass {
    Negative,
    GeOne,
    UnitInterval,
}

impl LambdaClass {
    pub fn name(&self) -> &'static str {
        match self {
            LambdaClass::Negative => "neg",
            LambdaClass::GeOne => "ge_one",
            LambdaClass::UnitInterval => "unit_interval",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolvabilityReport {
    pub delta: Vec<f64>,
    pub lambda_class: LambdaClass,
    /// −ln(λ)/α for 0 < λ < 1.
    pub lambda0: Option<f64>,
    /// 1-based indices with a vanishing δ.
    pub resonant_set: Vec<usize>,
    /// Lower bound on |δ_k|: |λ| for λ < 0, λ − e^{−λ_1α} for λ ≥ 1, λ/2
    /// from `threshold_index` on for 0 < λ < 1.
    pub lower_bound: f64,
    /// |λ| + e^{−λ_1α}, the constant printed for the λ < 0 case. It exceeds
    /// the actual |δ_k| for every k ≥ 2, so it is reported, not asserted.
    pub printed_bound: Option<f64>,
    /// First index from which e^{−λ_kα} ≤ λ/2.
    pub threshold_index: Option<usize>,
}

pub fn analyze_solvability(params: &ProblemParams, modes: &[Mode]) -> Result<SolvabilityReport> {
    params.validate()?;
    if modes.is_empty() {
        return Err(invalid("no modes"));
    }
    let lam = params.lambda;
    let class = params.lambda_class();
    let delta: Vec<f64> = modes.iter().map(|m| params.delta(m.eigenvalue)).collect();
    let e1 = (-modes[0].eigenvalue * params.alpha).exp();
    let mut report = SolvabilityReport {
        delta,
        lambda_class: class,
        lambda0: None,
        resonant_set: Vec::new(),
        lower_bound: 0.0,
        printed_bound: None,
        threshold_index: None,
    };
    match class {
        LambdaClass::Negative => {
            report.lower_bound = lam.abs();
            report.printed_bound = Some(lam.abs() + e1);
        }
        LambdaClass::GeOne => report.lower_bound = lam - e1,
        LambdaClass::UnitInterval => {
            report.lambda0 = Some(-lam.ln() / params.alpha);
            report.lower_bound = lam / 2.0;
            report.threshold_index = modes
                .iter()
                .find(|m| (-m.eigenvalue * params.alpha).exp() <= lam / 2.0)
                .map(|m| m.index);
            report.resonant_set = modes
                .iter()
                .zip(&report.delta)
                .filter(|(m, d)| d.abs() <= params.zero_tol * ((-m.eigenvalue * params.alpha).exp() + lam.abs()))
                .map(|(m, _)| m.index)
                .collect();
        }
    }
    Ok(report)
}

/// Right-hand side F(x, t).
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// F = f(x) g(t).
    Separable { f: SpectralField, g: TimeFunction },
    /// F_k(t) for each mode in order.
    PerMode(Vec<TimeFunction>),
}

impl Source {
    pub fn zero() -> Self {
        Source::PerMode(Vec::new())
    }

    fn mode_forcing(&self, k: usize) -> TimeFunction {
        match self {
            Source::Separable { f, g } => match f.coeffs.get(k) {
                Some(c) if *c != 0.0 => g.scaled(*c),
                _ => TimeFunction::zero(),
            },
            Source::PerMode(fk) => fk.get(k).cloned().unwrap_or_else(TimeFunction::zero),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOptions {
    /// Coefficients a_k for resonant modes, by 1-based index; missing ones are 0.
    pub free: BTreeMap<usize, f64>,
    /// |F*_k| allowed on a resonant mode, relative to ‖F*‖.
    pub ortho_tol: f64,
    pub quad: QuadratureSpec,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            free: BTreeMap::new(),
            ortho_tol: DEFAULT_ORTHO_TOL,
            quad: QuadratureSpec::default(),
        }
    }
}

/// T_k on both sides of t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub k: usize,
    pub eigenvalue: f64,
    pub a_k: f64,
    pub is_free: bool,
    pub forcing: TimeFunction,
    rho: f64,
    quad: QuadratureSpec,
}

impl ModeSolution {
    /// a_k E_{ρ,1}(−λ_k t^ρ) + ∫_0^t s^{ρ−1}E_{ρ,ρ}(−λ_k s^ρ)F_k(t−s)ds, t ≥ 0.
    pub fn t_pos(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(invalid(format!("t_pos needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(self.a_k);
        }
        let mut v = 0.0;
        if self.a_k != 0.0 {
            v += self.a_k * mittag_leffler(self.rho, 1.0, -self.eigenvalue * t.powf(self.rho))?;
        }
        if !self.forcing.is_zero() {
            v += duhamel(&self.forcing, self.eigenvalue, self.rho, t, &self.quad)?;
        }
        Ok(v)
    }

    /// a_k e^{λ_k t} − ∫_t^0 F_k(s) e^{λ_k(t−s)} ds, t ≤ 0.
    pub fn t_neg(&self, t: f64) -> Result<f64> {
        if !(t <= 0.0) {
            return Err(invalid(format!("t_neg needs t <= 0, got {t}")));
        }
        let mut v = self.a_k * (self.eigenvalue * t).exp();
        if !self.forcing.is_zero() && t < 0.0 {
            v -= history(&self.forcing, self.eigenvalue, t)?;
        }
        Ok(v)
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        if t >= 0.0 {
            self.t_pos(t)
        } else {
            self.t_neg(t)
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.a_k == 0.0 && self.forcing.is_zero()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// ‖a‖ over the last tenth of the modes divided by ‖a‖.
    pub tail_fraction: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    pub params: ProblemParams,
    pub modes: Arc<[Mode]>,
    pub report: SolvabilityReport,
    pub fstar: Vec<f64>,
    pub mode_solutions: Vec<ModeSolution>,
    pub diagnostics: Diagnostics,
}

/// Builds the series solution. Resonant modes need F*_k ≈ 0 and take a_k
/// from `opts.free`.
pub fn solve_forward(
    params: &ProblemParams,
    modes: Arc<[Mode]>,
    source: &Source,
    opts: &ForwardOptions,
) -> Result<ForwardSolution> {
    opts.quad.validate()?;
    if !(opts.ortho_tol >= 0.0) {
        return Err(invalid(format!("ortho_tol = {} must be >= 0", opts.ortho_tol)));
    }
    if let Source::Separable { f, .. } = source {
        if f.coeffs.len() > modes.len() {
            return Err(invalid("source has more coefficients than modes"));
        }
    }
    let report = analyze_solvability(params, &modes)?;
    let forcing: Vec<TimeFunction> = (0..modes.len()).map(|k| source.mode_forcing(k)).collect();
    let fstar = modes
        .par_iter()
        .zip(forcing.par_iter())
        .map(|(m, fk)| match (source, fk.is_zero()) {
            (_, true) => Ok(0.0),
            (Source::Separable { f, g }, false) => {
                Ok(f.coeffs[m.index - 1] * i_k_alpha(g, m.eigenvalue, params.alpha)?)
            }
            (Source::PerMode(_), false) => fstar_k(fk, m.eigenvalue, params.alpha),
        })
        .collect::<Result<Vec<f64>>>()?;

    let scale = fstar.iter().map(|v| v * v).sum::<f64>().sqrt();
    let offending: Vec<usize> = report
        .resonant_set
        .iter()
        .copied()
        .filter(|k| fstar[k - 1].abs() > opts.ortho_tol * scale)
        .collect();
    if !offending.is_empty() {
        let values = offending.iter().map(|k| fstar[k - 1]).collect();
        return Err(Error::NoSolution {
            indices: offending,
            values,
        });
    }

    let mode_solutions: Vec<ModeSolution> = modes
        .iter()
        .zip(forcing)
        .enumerate()
        .map(|(i, (m, fk))| {
            let is_free = report.resonant_set.contains(&m.index);
            let a_k = if is_free {
                opts.free.get(&m.index).copied().unwrap_or(0.0)
            } else {
                fstar[i] / report.delta[i]
            };
            ModeSolution {
                k: m.index,
                eigenvalue: m.eigenvalue,
                a_k,
                is_free,
                forcing: fk,
                rho: params.rho,
                quad: opts.quad,
            }
        })
        .collect();

    let mut warnings = Vec::new();
    if let Source::Separable { f, .. } = source {
        if let Some(w) = decay_warning(f) {
            warnings.push(w);
        }
    }
    let a: Vec<f64> = mode_solutions.iter().map(|s| s.a_k).collect();
    let diagnostics = Diagnostics {
        tail_fraction: tail_fraction(&a),
        warnings,
    };
    Ok(ForwardSolution {
        params: *params,
        modes,
        report,
        fstar,
        mode_solutions,
        diagnostics,
    })
}

fn tail_fraction(a: &[f64]) -> f64 {
    let total = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if total == 0.0 {
        return 0.0;
    }
    let tail = a.len().div_ceil(10);
    a[a.len() - tail..].iter().map(|v| v * v).sum::<f64>().sqrt() / total
}

/// Flags a source whose weighted coefficients |f_k| λ_k^{τ/2}, τ = N/2 + 1,
/// are larger over the second half of the modes than over the first.
pub fn decay_warning(f: &SpectralField) -> Option<String> {
    let n = f.coeffs.len();
    if n < 4 {
        return None;
    }
    let dims = f.modes[0].multi_index.len() as f64;
    let tau = dims / 2.0 + 1.0;
    let w: Vec<f64> = f
        .coeffs
        .iter()
        .zip(f.modes.iter())
        .map(|(c, m)| c.abs() * m.eigenvalue.powf(tau / 2.0))
        .collect();
    let head = w[..n / 2].iter().copied().fold(0.0, f64::max);
    let tail = w[n / 2..].iter().copied().fold(0.0, f64::max);
    (tail > head).then(|| {
        format!("source coefficients weighted by eigenvalue^{:.2} grow ({head:.3e} -> {tail:.3e}); the series may not converge in the classical sense", tau / 2.0)
    })
}

impl ForwardSolution {
    fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = (-self.params.alpha, self.params.beta);
        if !(t >= lo && t <= hi) {
            return Err(Error::TimeOutOfRange { t, lo, hi });
        }
        Ok(())
    }

    /// T_k(t) for every mode, in mode order.
    pub fn mode_values(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        self.mode_solutions
            .par_iter()
            .map(|s| if s.is_trivial() { Ok(0.0) } else { s.value(t) })
            .collect()
    }

    /// Σ_k T_k v_k(x) for precomputed mode values.
    pub fn synthesize(&self, values: &[f64], x: &[f64]) -> Result<f64> {
        let mut u = 0.0;
        for (m, v) in self.modes.iter().zip(values) {
            if *v != 0.0 {
                u += v * m.eval(x)?;
            }
        }
        Ok(u)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.mode_solutions.iter().map(|s| s.a_k).collect()
    }
}

/// u(x, t) from the truncated series.
pub fn eval_u(sol: &ForwardSolution, x: &[f64], t: f64) -> Result<f64> {
    let values = sol.mode_values(t)?;
    sol.synthesize(&values, x)
}

/// Residuals of the solution against the problem's conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    /// max |u(x, −α) − λ u(x, 0)|
    pub dezin: f64,
    /// max |u(x, +0) − u(x, −0)|, both branches evaluated at |t| = `GLUING_EPS_LIMIT`
    pub gluing: f64,
    /// max |u(x, ε) − u(x, −ε)| at ε = 1e−9
    pub gluing_fine: f64,
    /// the same at ε = 1e−6
    pub gluing_coarse: f64,
    /// max |u| on boundary points
    pub boundary: f64,
    /// max over modes and t ∈ [β/2, β] of |D^ρT + λT − F| with the L1
    /// derivative, relative to max |λT| + |F| of the mode
    pub pde_pos: f64,
    /// max over modes and t ∈ [−α, 0] of |T′ − λT − F| with central
    /// differences, relative in the same way
    pub pde_neg: f64,
}

impl ConditionReport {
    /// log10(gap(1e−6) / gap(1e−9)) / 3, the observed power of ε in the
    /// gluing gap; `None` when both gaps vanish.
    pub fn gluing_rate(&self) -> Option<f64> {
        (self.gluing_fine > 0.0 && self.gluing_coarse > 0.0)
            .then(|| (self.gluing_coarse / self.gluing_fine).log10() / 3.0)
    }
}

pub const GLUING_EPS_LIMIT: f64 = 1e-300;
pub const GLUING_EPS_FINE: f64 = 1e-9;
pub const GLUING_EPS_COARSE: f64 = 1e-6;

/// Evaluates the conditions at `points`; per-mode residuals use `steps`
/// time steps on each side.
pub fn check_conditions(sol: &ForwardSolution, points: &[Vec<f64>], steps: usize) -> Result<ConditionReport> {
    let p = &sol.params;
    let field_gap = |ta: f64, tb: f64, scale: f64| -> Result<f64> {
        let va = sol.mode_values(ta)?;
        let vb = sol.mode_values(tb)?;
        let mut worst = 0.0f64;
        for x in points {
            worst = worst.max((sol.synthesize(&va, x)? - scale * sol.synthesize(&vb, x)?).abs());
        }
        Ok(worst)
    };
    let gap = |eps: f64| field_gap(eps.min(p.beta), -eps.min(p.alpha), 1.0);
    let dezin = field_gap(-p.alpha, 0.0, p.lambda)?;
    let gluing = gap(GLUING_EPS_LIMIT)?;
    let gluing_fine = gap(GLUING_EPS_FINE)?;
    let gluing_coarse = gap(GLUING_EPS_COARSE)?;

    let lengths = sol.modes[0].lengths().to_vec();
    let mut boundary = 0.0f64;
    for t in [-p.alpha, -0.5 * p.alpha, 0.0, 0.5 * p.beta, p.beta] {
        let values = sol.mode_values(t)?;
        for x in points {
            for (d, l) in lengths.iter().enumerate() {
                for edge in [0.0, *l] {
                    let mut y = x.clone();
                    y[d] = edge;
                    boundary = boundary.max(sol.synthesize(&values, &y)?.abs());
                }
            }
        }
    }

    let pos_grid = TimeGrid::new(0.0, p.beta, steps)?;
    let neg_grid = TimeGrid::new(-p.alpha, 0.0, steps)?;
    let residuals = sol
        .mode_solutions
        .par_iter()
        .filter(|s| !s.is_trivial())
        .map(|s| mode_residuals(s, &pos_grid, &neg_grid))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let pde_pos = residuals.iter().map(|r| r.0).fold(0.0, f64::max);
    let pde_neg = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(ConditionReport {
        dezin,
        gluing,
        gluing_fine,
        gluing_coarse,
        boundary,
        pde_pos,
        pde_neg,
    })
}

/// Relative per-mode equation residuals of the closed form on uniform grids.
pub fn mode_residuals(s: &ModeSolution, pos: &TimeGrid, neg: &TimeGrid) -> Result<(f64, f64)> {
    let sample = |g: &TimeGrid| -> Result<ModeTrace> {
        let values = g.nodes().into_iter().map(|t| s.value(t)).collect::<Result<Vec<_>>>()?;
        ModeTrace::new(*g, values)
    };
    let tp = sample(pos)?;
    let d = caputo_l1_derivative(&tp, s.rho)?;
    let half = pos.t_end / 2.0;
    let (mut r_pos, mut scale_pos) = (0.0f64, 0.0f64);
    for j in 1..=pos.steps {
        let t = pos.node(j);
        if t >= half {
            let (lt, f) = (s.eigenvalue * tp.values[j], s.forcing.eval(t));
            r_pos = r_pos.max((d.values[j] + lt - f).abs());
            scale_pos = scale_pos.max(lt.abs() + f.abs());
        }
    }
    let tn = sample(neg)?;
    let d = central_derivative(&tn);
    let (mut r_neg, mut scale_neg) = (0.0f64, 0.0f64);
    for j in 0..=neg.steps {
        let t = neg.node(j);
        let (lt, f) = (s.eigenvalue * tn.values[j], s.forcing.eval(t));
        r_neg = r_neg.max((d.values[j] - lt - f).abs());
        scale_neg = scale_neg.max(lt.abs() + f.abs());
    }
    let rel = |r: f64, scale: f64| if scale > 0.0 { r / scale } else { r };
    let (pde_pos, pde_neg) = (rel(r_pos, scale_pos), rel(r_neg, scale_neg));
    Ok((pde_pos, pde_neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::{enumerate_modes, BoxDomain};
    use crate::transforms::project;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const E_PI2: f64 = 5.1723186203812304e-05;

    fn modes_1d(k: usize) -> Arc<[Mode]> {
        enumerate_modes(&BoxDomain::unit(1).unwrap(), k).unwrap().into()
    }

    fn params(rho: f64, lambda: f64) -> ProblemParams {
        ProblemParams::new(rho, 1.0, 1.0, lambda, 12).unwrap()
    }

    fn unit_source(modes: &Arc<[Mode]>, k: usize) -> Source {
        Source::Separable {
            f: SpectralField::unit(modes.clone(), k),
            g: TimeFunction::Constant(1.0),
        }
    }

    fn grid() -> Vec<Vec<f64>> {
        (1..20).map(|i| vec![i as f64 / 20.0]).collect()
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(0.5, 1.0, 1.0, 0.0, 4).is_err());
        assert!(ProblemParams::new(1.0, 1.0, 1.0, 2.0, 4).is_err());
        assert!(ProblemParams::new(0.5, -1.0, 1.0, 2.0, 4).is_err());
        assert!(ProblemParams::new(0.5, 1.0, 1.0, 2.0, 0).is_err());
        assert_eq!(params(0.5, -1.0).lambda_class(), LambdaClass::Negative);
        assert_eq!(params(0.5, 1.0).lambda_class(), LambdaClass::GeOne);
        assert_eq!(params(0.5, 0.3).lambda_class(), LambdaClass::UnitInterval);
    }

    #[test]
    fn solvability_examples() {
        let modes = modes_1d(12);
        let r = analyze_solvability(&params(0.5, -1.0), &modes).unwrap();
        assert_abs_diff_eq!(r.delta[0], 1.0000517231862038, epsilon = 1e-15);
        assert_eq!(r.lambda_class, LambdaClass::Negative);
        assert!(r.resonant_set.is_empty() && r.lambda0.is_none());
        assert_eq!(r.lower_bound, 1.0);
        assert!(r.delta.iter().all(|d| d.abs() >= r.lower_bound));
        assert!(r.delta[1..].iter().all(|d| d.abs() < r.printed_bound.unwrap()));

        let r = analyze_solvability(&params(0.5, E_PI2), &modes).unwrap();
        assert!(r.delta[0].abs() < 1e-18);
        assert_eq!(r.resonant_set, vec![1]);
        assert_abs_diff_eq!(r.lambda0.unwrap(), PI * PI, epsilon = 1e-12);
        assert_eq!(r.threshold_index, Some(2));

        let r = analyze_solvability(&params(0.5, 2.0), &modes).unwrap();
        assert_eq!(r.lambda_class, LambdaClass::GeOne);
        assert_abs_diff_eq!(r.lower_bound, 1.9999482768137962, epsilon = 1e-15);
        assert!(r.resonant_set.is_empty());
        assert!(r.delta.iter().all(|d| d.abs() >= r.lower_bound));
    }

    #[test]
    fn resonance_scale_handles_underflow() {
        // e^{−λ_kα} underflows for large k while δ_k stays ≈ −λ
        let modes = modes_1d(200);
        let r = analyze_solvability(&params(0.5, 1e-300), &modes).unwrap();
        assert!(r.resonant_set.is_empty());
    }

    #[test]
    fn homogeneous_problem_is_zero() {
        let modes = modes_1d(12);
        let sol = solve_forward(&params(0.5, -1.0), modes, &Source::zero(), &ForwardOptions::default()).unwrap();
        assert!(sol.coefficients().iter().all(|a| *a == 0.0));
        assert_eq!(eval_u(&sol, &[0.3], 0.7).unwrap(), 0.0);
        assert_eq!(eval_u(&sol, &[0.3], -0.7).unwrap(), 0.0);
        let c = check_conditions(&sol, &grid(), 64).unwrap();
        assert_eq!((c.dezin, c.gluing, c.boundary, c.pde_pos, c.pde_neg), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn manufactured_mode_one() {
        let modes = modes_1d(12);
        let p = params(0.5, -1.0);
        let sol = solve_forward(&p, modes.clone(), &unit_source(&modes, 0), &ForwardOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.mode_solutions[0].a_k, 0.10131070287554058, epsilon = 1e-16);
        assert!(sol.coefficients()[1..].iter().all(|a| *a == 0.0));
        let s = &sol.mode_solutions[0];
        assert!((s.t_neg(-1.0).unwrap() - p.lambda * s.t_pos(0.0).unwrap()).abs() <= 1e-10);
        let x = [0.37];
        let gap = (eval_u(&sol, &x, 1e-9).unwrap() - eval_u(&sol, &x, -1e-9).unwrap()).abs();
        assert!(gap <= 1e-6, "{gap}");
        assert!(eval_u(&sol, &[1.0], 0.4).unwrap().abs() <= 1e-12);
        assert!(matches!(eval_u(&sol, &x, 1.5), Err(Error::TimeOutOfRange { .. })));
        assert!(matches!(eval_u(&sol, &x, -1.5), Err(Error::TimeOutOfRange { .. })));
        assert!(eval_u(&sol, &[1.5], 0.4).is_err());

        let c = check_conditions(&sol, &grid(), 1024).unwrap();
        assert!(c.dezin <= 1e-6 && c.gluing <= 1e-6 && c.gluing_fine <= 1e-6 && c.boundary <= 1e-12, "{c:?}");
        assert!(c.pde_pos <= 1e-6 && c.pde_neg <= 1e-4, "{c:?}");
        assert!(c.gluing_rate().unwrap() > 0.0, "{c:?}");
    }

    #[test]
    fn corrupted_coefficient_is_detected() {
        let modes = modes_1d(12);
        let mut sol =
            solve_forward(&params(0.5, -1.0), modes.clone(), &unit_source(&modes, 0), &ForwardOptions::default()).unwrap();
        sol.mode_solutions[0].a_k *= 1.1;
        let c = check_conditions(&sol, &grid(), 256).unwrap();
        assert!(c.dezin > 1e-3, "{c:?}");
    }

    #[test]
    fn resonant_mode_needs_orthogonal_source() {
        let modes = modes_1d(12);
        let p = params(0.5, E_PI2);
        let err = solve_forward(&p, modes.clone(), &unit_source(&modes, 0), &ForwardOptions::default()).unwrap_err();
        match err {
            Error::NoSolution { indices, .. } => assert_eq!(indices, vec![1]),
            e => panic!("unexpected {e:?}"),
        }

        let src = unit_source(&modes, 1);
        let mut reports = Vec::new();
        for a1 in [0.0, 0.7] {
            let opts = ForwardOptions {
                free: BTreeMap::from([(1, a1)]),
                ..Default::default()
            };
            let sol = solve_forward(&p, modes.clone(), &src, &opts).unwrap();
            assert!(sol.mode_solutions[0].is_free);
            assert_eq!(sol.mode_solutions[0].a_k, a1);
            let c = check_conditions(&sol, &grid(), 1024).unwrap();
            assert!(c.dezin <= 1e-6 && c.gluing <= 1e-6 && c.boundary <= 1e-12, "{c:?}");
            assert!(c.pde_pos <= 1e-3 && c.pde_neg <= 1e-3, "{c:?}");
            assert!(c.gluing_fine < c.gluing_coarse, "{c:?}");
            reports.push(eval_u(&sol, &[0.5], 0.5).unwrap());
        }
        assert!((reports[0] - reports[1]).abs() > 1e-3);
    }

    #[test]
    fn free_coefficients_ignored_without_resonance() {
        let modes = modes_1d(12);
        let p = params(0.3, 2.0);
        let src = Source::Separable {
            f: SpectralField::new(modes.clone(), (0..12).map(|k| 1.0 / (k as f64 + 1.0).powi(3)).collect()).unwrap(),
            g: TimeFunction::Polynomial(vec![1.0, 0.5]),
        };
        let a = solve_forward(&p, modes.clone(), &src, &ForwardOptions::default()).unwrap();
        let opts = ForwardOptions {
            free: BTreeMap::from([(1, 3.0), (2, -1.0)]),
            ..Default::default()
        };
        let b = solve_forward(&p, modes, &src, &opts).unwrap();
        let bits = |s: &ForwardSolution| s.coefficients().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn per_mode_source_matches_separable() {
        let modes = modes_1d(6);
        let p = params(0.7, 0.4);
        let g = TimeFunction::Exponential { scale: 1.0, rate: -0.5 };
        let f: Vec<f64> = vec![1.0, 0.0, -0.5, 0.0, 0.25, 0.0];
        let sep = Source::Separable {
            f: SpectralField::new(modes.clone(), f.clone()).unwrap(),
            g: g.clone(),
        };
        let per = Source::PerMode(f.iter().map(|c| g.scaled(*c)).collect());
        let a = solve_forward(&p, modes.clone(), &sep, &ForwardOptions::default()).unwrap();
        let b = solve_forward(&p, modes, &per, &ForwardOptions::default()).unwrap();
        for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
        }
        for t in [-0.8, -0.1, 0.2, 0.9] {
            assert_abs_diff_eq!(eval_u(&a, &[0.3], t).unwrap(), eval_u(&b, &[0.3], t).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn decay_diagnostic() {
        let d = BoxDomain::unit(1).unwrap();
        let modes: Arc<[Mode]> = enumerate_modes(&d, 40).unwrap().into();
        let rough = project(|_| 1.0, &d, modes.clone(), &QuadratureSpec::default()).unwrap();
        assert!(decay_warning(&rough).is_some());
        let smooth = project(|x| (x[0] * (1.0 - x[0])).powi(3), &d, modes, &QuadratureSpec::default()).unwrap();
        assert!(decay_warning(&smooth).is_none());
    }

    #[test]
    fn tail_fraction_examples() {
        assert_eq!(tail_fraction(&[0.0; 5]), 0.0);
        assert_eq!(tail_fraction(&[1.0, 0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(tail_fraction(&[3.0, 4.0]), 0.8, epsilon = 1e-15);
    }
}
