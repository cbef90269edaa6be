//! Scalar building blocks of the eigenfunction series: spatial projections,
//! exponentially weighted history integrals and the weakly singular
//! Duhamel convolution with the Mittag-Leffler kernel.

use std::sync::Arc;

use crate::eigenbasis::{BoxDomain, Mode};
use crate::error::{invalid, Result};
use crate::mlf::mittag_leffler;
use crate::quad::{self, GaussLegendre};
use crate::special::rgamma;

/// Interpolation used between the nodes of a sampled table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interp {
    #[default]
    Linear,
    /// Natural cubic spline.
    Cubic,
}

/// Samples (t_i, v_i) with strictly increasing t_i.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTable {
    t: Vec<f64>,
    v: Vec<f64>,
    interp: Interp,
    // second derivatives at the nodes, cubic only
    m2: Vec<f64>,
}

impl SampledTable {
    pub fn new(t: Vec<f64>, v: Vec<f64>, interp: Interp) -> Result<Self> {
        if t.len() != v.len() || t.len() < 2 {
            return Err(invalid("a table needs at least two (t, value) rows of equal length"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("table abscissae must be strictly increasing"));
        }
        if t.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(invalid("table entries must be finite"));
        }
        let m2 = match interp {
            Interp::Linear => Vec::new(),
            Interp::Cubic => natural_spline(&t, &v),
        };
        Ok(Self { t, v, interp, m2 })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn range(&self) -> (f64, f64) {
        (self.t[0], self.t[self.t.len() - 1])
    }

    /// Interpolated value; constant extrapolation outside the nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            return self.v[0];
        }
        if x >= self.t[n - 1] {
            return self.v[n - 1];
        }
        let i = self.t.partition_point(|ti| *ti <= x) - 1;
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let a = (t1 - x) / h;
        let b = (x - t0) / h;
        let lin = a * self.v[i] + b * self.v[i + 1];
        match self.interp {
            Interp::Linear => lin,
            Interp::Cubic => {
                lin + ((a * a * a - a) * self.m2[i] + (b * b * b - b) * self.m2[i + 1]) * h * h / 6.0
            }
        }
    }
}

fn natural_spline(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut m2 = vec![0.0; n];
    if n < 3 {
        return m2;
    }
    // tridiagonal solve for interior second derivatives
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = t[i] - t[i - 1];
        let h1 = t[i + 1] - t[i];
        diag[i] = 2.0 * (h0 + h1);
        rhs[i] = 6.0 * ((v[i + 1] - v[i]) / h1 - (v[i] - v[i - 1]) / h0);
    }
    for i in 2..n - 1 {
        let h = t[i] - t[i - 1];
        let w = h / diag[i - 1];
        diag[i] -= w * h;
        rhs[i] -= w * rhs[i - 1];
    }
    for i in (1..n - 1).rev() {
        let h1 = t[i + 1] - t[i];
        m2[i] = (rhs[i] - h1 * m2[i + 1]) / diag[i];
    }
    m2
}

/// A scalar function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeFunction {
    Constant(f64),
    /// c_0 + c_1 t + … + c_n t^n
    Polynomial(Vec<f64>),
    /// scale · e^{rate·t}
    Exponential { scale: f64, rate: f64 },
    Table(Arc<SampledTable>),
}

impl TimeFunction {
    pub fn zero() -> Self {
        TimeFunction::Constant(0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant(c) => *c,
            TimeFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| acc * t + ci),
            TimeFunction::Exponential { scale, rate } => scale * (rate * t).exp(),
            TimeFunction::Table(tab) => tab.eval(t),
        }
    }

    /// `c · self`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            TimeFunction::Constant(v) => TimeFunction::Constant(c * v),
            TimeFunction::Polynomial(p) => TimeFunction::Polynomial(p.iter().map(|x| c * x).collect()),
            TimeFunction::Exponential { scale, rate } => TimeFunction::Exponential {
                scale: c * scale,
                rate: *rate,
            },
            TimeFunction::Table(tab) => TimeFunction::Table(Arc::new(SampledTable {
                t: tab.t.clone(),
                v: tab.v.iter().map(|x| c * x).collect(),
                interp: tab.interp,
                m2: tab.m2.iter().map(|x| c * x).collect(),
            })),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TimeFunction::Constant(c) => *c == 0.0,
            TimeFunction::Polynomial(p) => p.iter().all(|c| *c == 0.0),
            TimeFunction::Exponential { scale, .. } => *scale == 0.0,
            TimeFunction::Table(tab) => tab.v.iter().all(|c| *c == 0.0),
        }
    }

    /// Points where the function is not smooth.
    pub fn kinks(&self) -> &[f64] {
        match self {
            TimeFunction::Table(tab) => &tab.t,
            _ => &[],
        }
    }
}

/// Composite Gauss–Legendre controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Panels per axis (space) or on [0, t] (time).
    pub panels: usize,
    /// Polynomial order of the rule: 2, 4 or 8.
    pub order: usize,
    /// Mesh exponent for s_j = t (j/J)^grading; `None` uses 1/ρ.
    pub grading: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            panels: 256,
            order: 4,
            grading: None,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.panels < 1 {
            return Err(invalid("quadrature needs at least one panel"));
        }
        if ![2, 4, 8].contains(&self.order) {
            return Err(invalid(format!("quadrature order {} not in {{2, 4, 8}}", self.order)));
        }
        if let Some(g) = self.grading {
            if !(g >= 1.0) {
                return Err(invalid(format!("mesh grading {g} must be >= 1")));
            }
        }
        Ok(())
    }

    fn rule(&self) -> GaussLegendre {
        GaussLegendre::new(self.order / 2)
    }
}

/// Coefficients of a function against a mode list.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub modes: Arc<[Mode]>,
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(modes: Arc<[Mode]>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != modes.len() {
            return Err(invalid(format!(
                "{} coefficients for {} modes",
                coeffs.len(),
                modes.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("spectral coefficients must be finite"));
        }
        Ok(Self { modes, coeffs })
    }

    pub fn zeros(modes: Arc<[Mode]>) -> Self {
        let n = modes.len();
        Self {
            modes,
            coeffs: vec![0.0; n],
        }
    }

    /// The field with a single unit coefficient at 0-based position `k`.
    pub fn unit(modes: Arc<[Mode]>, k: usize) -> Self {
        let mut f = Self::zeros(modes);
        f.coeffs[k] = 1.0;
        f
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Projects `h` onto the modes with a tensor composite Gauss rule.
pub fn project(
    h: impl Fn(&[f64]) -> f64,
    domain: &BoxDomain,
    modes: Arc<[Mode]>,
    quad: &QuadratureSpec,
) -> Result<SpectralField> {
    quad.validate()?;
    let rule = quad.rule();
    let axes: Vec<Vec<(f64, f64)>> = domain
        .lengths()
        .iter()
        .map(|&l| {
            let width = l / quad.panels as f64;
            (0..quad.panels)
                .flat_map(|p| {
                    let a = p as f64 * width;
                    rule.nodes
                        .iter()
                        .zip(&rule.weights)
                        .map(move |(x, w)| (a + 0.5 * width * (x + 1.0), 0.5 * width * w))
                        .collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    // one-dimensional sine factors per mode and axis
    let factors: Vec<Vec<Vec<f64>>> = modes
        .iter()
        .map(|m| {
            axes.iter()
                .enumerate()
                .map(|(d, nodes)| {
                    let w = m.multi_index[d] as f64 * std::f64::consts::PI / domain.lengths()[d];
                    nodes.iter().map(|(x, _)| (w * x).sin()).collect()
                })
                .collect()
        })
        .collect();
    let mut coeffs = vec![0.0; modes.len()];
    let dims = domain.dims();
    let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
    let mut idx = vec![0usize; dims];
    let mut x = vec![0.0; dims];
    'grid: loop {
        let mut weight = 1.0;
        for d in 0..dims {
            x[d] = axes[d][idx[d]].0;
            weight *= axes[d][idx[d]].1;
        }
        let hw = weight * h(&x);
        if hw != 0.0 {
            for (k, m) in modes.iter().enumerate() {
                let mut v = m.norm_const * hw;
                for d in 0..dims {
                    v *= factors[k][d][idx[d]];
                }
                coeffs[k] += v;
            }
        }
        for d in (0..dims).rev() {
            idx[d] += 1;
            if idx[d] < sizes[d] {
                continue 'grid;
            }
            idx[d] = 0;
        }
        break;
    }
    SpectralField::new(modes, coeffs)
}

/// Σ_k c_k v_k(x).
pub fn synthesize(field: &SpectralField, x: &[f64]) -> f64 {
    field
        .modes
        .iter()
        .zip(&field.coeffs)
        .filter(|(_, c)| **c != 0.0)
        .map(|(m, c)| c * m.eval_unchecked(x))
        .sum()
}

/// ∫_a^b F(s) e^{−λ(s−a)} ds for λ ≥ 0, a ≤ b.
///
/// Closed forms cover constants, polynomials, exponentials and linear
/// tables; other inputs use adaptive quadrature on the stretch where the
/// weight is above 1e−18.
pub fn exp_weighted(f: &TimeFunction, lam: f64, a: f64, b: f64) -> Result<f64> {
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(invalid(format!("decay rate {lam} must be finite and >= 0")));
    }
    if !(b >= a) {
        return Err(invalid(format!("interval [{a}, {b}] is reversed")));
    }
    let len = b - a;
    if len == 0.0 {
        return Ok(0.0);
    }
    Ok(match f {
        TimeFunction::Constant(c) => c * moment(0, lam, len),
        TimeFunction::Polynomial(p) => {
            // re-expand around a: Σ d_j (s − a)^j
            let shifted = shift_polynomial(p, a);
            shifted
                .iter()
                .enumerate()
                .map(|(j, d)| d * moment(j, lam, len))
                .sum()
        }
        TimeFunction::Exponential { scale, rate } => {
            let c = rate - lam;
            let base = rate * a;
            if c == 0.0 {
                scale * base.exp() * len
            } else if c * len > 700.0 {
                scale * ((base + c * len).exp() - base.exp()) / c
            } else {
                scale * base.exp() * (c * len).exp_m1() / c
            }
        }
        TimeFunction::Table(tab) if tab.interp == Interp::Linear => {
            let mut pts: Vec<f64> = vec![a];
            pts.extend(tab.t.iter().copied().filter(|t| *t > a && *t < b));
            pts.push(b);
            let mut total = 0.0;
            for w in pts.windows(2) {
                let (s0, s1) = (w[0], w[1]);
                let decay = (-lam * (s0 - a)).exp();
                if decay == 0.0 {
                    break;
                }
                let f0 = tab.eval(s0);
                let slope = (tab.eval(s1) - f0) / (s1 - s0);
                let h = s1 - s0;
                total += decay * (f0 * moment(0, lam, h) + slope * moment(1, lam, h));
            }
            total
        }
        TimeFunction::Table(_) => {
            // weight below 1e-18 of its peak past u = 41.5/λ
            let end = if lam > 0.0 { b.min(a + 41.5 / lam) } else { b };
            let breaks: Vec<f64> = f.kinks().to_vec();
            quad::adaptive(
                |s| f.eval(s) * (-lam * (s - a)).exp(),
                a,
                end,
                &breaks,
                1e-13,
                1e-14,
                4000,
            )
            .value
        }
    })
}

/// ∫_0^L v^j e^{−λv} dv.
fn moment(j: usize, lam: f64, len: f64) -> f64 {
    let x = lam * len;
    if x == 0.0 {
        return len.powi(j as i32 + 1) / (j as f64 + 1.0);
    }
    let a = j as f64 + 1.0;
    // lower incomplete gamma γ(j+1, x) / λ^{j+1}
    let gamma_lower = if x <= a + 1.0 {
        // x^a e^{−x} Σ x^n / (a (a+1) … (a+n)), positive terms
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 1.0;
        while term > 1e-17 * sum {
            term *= x / (a + n);
            sum += term;
            n += 1.0;
        }
        sum * (a * x.ln() - x).exp()
    } else {
        // j! (1 − e^{−x} Σ_{i≤j} x^i / i!)
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..=j {
            term *= x / i as f64;
            sum += term;
        }
        let fact: f64 = (1..=j).map(|i| i as f64).product();
        fact * (1.0 - (-x).exp() * sum)
    };
    gamma_lower / lam.powi(j as i32 + 1)
}

fn shift_polynomial(p: &[f64], a: f64) -> Vec<f64> {
    // Horner-style Taylor shift: coefficients of p(v + a) in v
    let mut d = p.to_vec();
    let n = d.len();
    for i in 0..n {
        for k in (i..n - 1).rev() {
            d[k] += a * d[k + 1];
        }
    }
    d
}

/// I_k(α) = ∫_{−α}^0 g(s) e^{λ(−α−s)} ds.
pub fn i_k_alpha(g: &TimeFunction, lam: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha = {alpha} must be positive")));
    }
    exp_weighted(g, lam, -alpha, 0.0)
}

/// F*_k = ∫_{−α}^0 F_k(s) e^{λ(−α−s)} ds.
pub fn fstar_k(fk: &TimeFunction, lam: f64, alpha: f64) -> Result<f64> {
    i_k_alpha(fk, lam, alpha)
}

/// ∫_t^0 F(s) e^{λ(t−s)} ds for t ≤ 0.
pub fn history(fk: &TimeFunction, lam: f64, t: f64) -> Result<f64> {
    if t > 0.0 {
        return Err(invalid(format!("history integral needs t <= 0, got {t}")));
    }
    exp_weighted(fk, lam, t, 0.0)
}

/// ∫_0^t s^{ρ−1} E_{ρ,ρ}(−λ s^ρ) F(t−s) ds.
///
/// Constants and polynomials are exact through
/// ∫_0^t (t−s)^m s^{ρ−1} E_{ρ,ρ}(−λs^ρ) ds = m! t^{ρ+m} E_{ρ,ρ+m+1}(−λt^ρ).
/// Other inputs subtract F(t) and integrate the bounded remainder on a
/// graded composite Gauss mesh.
pub fn duhamel(fk: &TimeFunction, lam: f64, rho: f64, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_kernel_args(lam, rho, t)?;
    if t == 0.0 || fk.is_zero() {
        return Ok(0.0);
    }
    match fk {
        TimeFunction::Constant(c) => Ok(c * kernel_moment(0, lam, rho, t)?),
        TimeFunction::Polynomial(p) => {
            let mut total = 0.0;
            for (m, c) in p.iter().enumerate() {
                if *c != 0.0 {
                    total += c * kernel_moment(m, lam, rho, t)?;
                }
            }
            Ok(total)
        }
        _ => duhamel_graded(fk, lam, rho, t, quad),
    }
}

/// I_{k,ρ}(t0) = ∫_0^{t0} s^{ρ−1} E_{ρ,ρ}(−λ s^ρ) g(t0−s) ds.
pub fn i_k_rho(g: &TimeFunction, lam: f64, rho: f64, t0: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(t0 > 0.0) {
        return Err(invalid(format!("t0 = {t0} must be positive")));
    }
    duhamel(g, lam, rho, t0, quad)
}

fn check_kernel_args(lam: f64, rho: f64, t: f64) -> Result<()> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("order rho = {rho} not in (0, 1]")));
    }
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(invalid(format!("eigenvalue {lam} must be finite and >= 0")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time {t} must be >= 0")));
    }
    Ok(())
}

/// ∫_0^t (t−s)^m s^{ρ−1} E_{ρ,ρ}(−λs^ρ) ds = m! t^{ρ+m} E_{ρ,ρ+m+1}(−λt^ρ).
fn kernel_moment(m: usize, lam: f64, rho: f64, t: f64) -> Result<f64> {
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    let tr = t.powf(rho);
    Ok(fact * tr * t.powi(m as i32) * mittag_leffler(rho, rho + m as f64 + 1.0, -lam * tr)?)
}

fn duhamel_graded(fk: &TimeFunction, lam: f64, rho: f64, t: f64, quad: &QuadratureSpec) -> Result<f64> {
    quad.validate()?;
    let grading = quad.grading.unwrap_or(1.0 / rho).max(1.0);
    let panels = quad.panels;
    let mut mesh: Vec<f64> = (0..=panels)
        .map(|j| t * (j as f64 / panels as f64).powf(grading))
        .collect();
    // geometric refinement around the kernel's transition at λ s^ρ ≈ 1
    if lam > 0.0 {
        let mut w = 2f64.powi(-10) / lam;
        while w.powf(1.0 / rho) < t {
            mesh.push(w.powf(1.0 / rho));
            w *= 2.0;
        }
    }
    // align with kinks of F(t − s)
    mesh.extend(
        fk.kinks()
            .iter()
            .map(|tau| t - tau)
            .filter(|s| *s > 0.0 && *s < t),
    );
    mesh.sort_by(f64::total_cmp);
    mesh.dedup();
    let ft = fk.eval(t);
    let head = ft * kernel_moment(0, lam, rho, t)?;
    let rule = quad.rule();
    let mut total = 0.0;
    for w in mesh.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut panel = 0.0;
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let s = mid + half * x;
            let k = s.powf(rho - 1.0) * mittag_leffler(rho, rho, -lam * s.powf(rho))?;
            panel += wt * k * (fk.eval(t - s) - ft);
        }
        total += panel * half;
    }
    Ok(head + total)
}

/// Sign class of a function on an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
    SignChanging,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignReport {
    pub sign: Sign,
    pub min: f64,
    pub max: f64,
}

const SIGN_GRID: usize = 4000;

/// Minimum and maximum of `g` on [lo, hi] from a dense grid refined by
/// golden-section search around the discrete extrema.
pub fn sign_check(g: &TimeFunction, lo: f64, hi: f64) -> Result<SignReport> {
    if !(hi > lo) {
        return Err(invalid(format!("interval [{lo}, {hi}] is empty")));
    }
    let mut pts: Vec<f64> = (0..=SIGN_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / SIGN_GRID as f64)
        .collect();
    pts.extend(g.kinks().iter().copied().filter(|t| *t > lo && *t < hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let vals: Vec<f64> = pts.iter().map(|t| g.eval(*t)).collect();
    let argmin = (0..vals.len()).min_by(|i, j| vals[*i].total_cmp(&vals[*j])).expect("non-empty");
    let argmax = (0..vals.len()).max_by(|i, j| vals[*i].total_cmp(&vals[*j])).expect("non-empty");
    let bracket = |i: usize| (pts[i.saturating_sub(1)], pts[(i + 1).min(pts.len() - 1)]);
    let (a, b) = bracket(argmin);
    let min = vals[argmin].min(golden(|t| g.eval(t), a, b));
    let (a, b) = bracket(argmax);
    let max = vals[argmax].max(-golden(|t| -g.eval(t), a, b));
    let sign = if min > 0.0 {
        Sign::Positive
    } else if max < 0.0 {
        Sign::Negative
    } else {
        Sign::SignChanging
    };
    Ok(SignReport { sign, min, max })
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}

/// t^ρ E_{ρ,ρ+1}(−λt^ρ), the integral of the kernel over (0, t].
pub fn kernel_integral(lam: f64, rho: f64, t: f64) -> Result<f64> {
    check_kernel_args(lam, rho, t)?;
    if lam == 0.0 {
        return Ok(t.powf(rho) * rgamma(rho + 1.0));
    }
    kernel_moment(0, lam, rho, t)
}
