//! Independent per-mode reference solvers: the L1 scheme for the Caputo
//! mode equation, an exponential integrator for the backward parabolic
//! side, and discrete derivatives for residual checks.

use crate::error::{invalid, Result};
use crate::special::gamma;
use crate::transforms::TimeFunction;

/// Uniform grid t_j = t_start + j h, j = 0..=steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(invalid(format!("time grid needs at least 2 steps, got {steps}")));
        }
        if !(t_start < t_end) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(invalid(format!("time grid [{t_start}, {t_end}] is empty")));
        }
        Ok(Self { t_start, t_end, steps })
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / self.steps as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.steps {
            self.t_end
        } else {
            self.t_start + j as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.node(j)).collect()
    }

    /// The same interval with twice as many steps.
    pub fn refined(&self) -> Self {
        Self {
            steps: 2 * self.steps,
            ..*self
        }
    }
}

/// Values of a mode coefficient on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrace {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl ModeTrace {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps + 1 {
            return Err(invalid(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.steps + 1
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid nodes.
    pub fn sample(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(invalid(format!("order rho = {rho} not in (0, 1)")));
    }
    Ok(())
}

fn l1_weights(rho: f64, n: usize) -> Vec<f64> {
    let e = 1.0 - rho;
    (0..n).map(|j| ((j + 1) as f64).powf(e) - (j as f64).powf(e)).collect()
}

/// Implicit L1 scheme for D^ρT + λT = q on [0, β] with T(0) = T0.
pub fn l1_caputo_solve(lam: f64, rho: f64, q: &TimeFunction, t0: f64, grid: &TimeGrid) -> Result<ModeTrace> {
    check_rho(rho)?;
    if !lam.is_finite() {
        return Err(invalid(format!("eigenvalue {lam} must be finite")));
    }
    let n = grid.steps;
    let h = grid.step();
    let c = h.powf(-rho) / gamma(2.0 - rho)?;
    let b = l1_weights(rho, n);
    let mut v = Vec::with_capacity(n + 1);
    v.push(t0);
    for m in 1..=n {
        let mut memory = 0.0;
        for j in 1..m {
            memory += b[j] * (v[m - j] - v[m - j - 1]);
        }
        let rhs = q.eval(grid.node(m)) + c * v[m - 1] - c * memory;
        v.push(rhs / (c + lam));
    }
    ModeTrace::new(*grid, v)
}

/// L1 approximation of the Caputo derivative at every node; zero at the first.
pub fn caputo_l1_derivative(trace: &ModeTrace, rho: f64) -> Result<ModeTrace> {
    check_rho(rho)?;
    let n = trace.grid.steps;
    let c = trace.grid.step().powf(-rho) / gamma(2.0 - rho)?;
    let b = l1_weights(rho, n);
    let v = &trace.values;
    let mut d = vec![0.0; n + 1];
    for m in 1..=n {
        let mut s = 0.0;
        for j in 0..m {
            s += b[j] * (v[m - j] - v[m - j - 1]);
        }
        d[m] = c * s;
    }
    ModeTrace::new(trace.grid, d)
}

/// (1 − e^{−x}(1 + x)) / x², stable near zero.
fn phi1_scaled(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0 + x.powi(4) / 144.0
    } else {
        (-(-x).exp_m1() - x * (-x).exp()) / (x * x)
    }
}

/// Backward exponential integrator for T′ − λT = q on [−α, 0] from T(0) = T0,
/// with q linear on each step.
pub fn parabolic_solve(lam: f64, q: &TimeFunction, t0: f64, grid: &TimeGrid) -> Result<ModeTrace> {
    if !(lam >= 0.0 && lam.is_finite()) {
        return Err(invalid(format!("eigenvalue {lam} must be finite and >= 0")));
    }
    if grid.t_end != 0.0 {
        return Err(invalid(format!("backward grid must end at 0, got {}", grid.t_end)));
    }
    let n = grid.steps;
    let h = grid.step();
    let x = lam * h;
    let decay = (-x).exp();
    let phi0 = if x == 0.0 { h } else { -(-x).exp_m1() / lam };
    let phi1 = h * phi1_scaled(x);
    let mut v = vec![0.0; n + 1];
    v[n] = t0;
    for i in (0..n).rev() {
        let (qi, qj) = (q.eval(grid.node(i)), q.eval(grid.node(i + 1)));
        v[i] = decay * v[i + 1] - (qi * phi0 + (qj - qi) * phi1);
    }
    ModeTrace::new(*grid, v)
}

/// Second-order finite-difference first derivative.
pub fn central_derivative(trace: &ModeTrace) -> ModeTrace {
    let v = &trace.values;
    let n = trace.grid.steps;
    let h = trace.grid.step();
    let mut d = vec![0.0; n + 1];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    d[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
    for j in 1..n {
        d[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
    }
    ModeTrace {
        grid: trace.grid,
        values: d,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub max_abs: f64,
    /// sqrt(h Σ e_j²)
    pub l2: f64,
    /// log2 of the max-error ratio between the coarse and the refined trace.
    pub order: Option<f64>,
}

fn errors(closed: &impl Fn(f64) -> f64, trace: &ModeTrace) -> (f64, f64) {
    let mut max_abs = 0.0f64;
    let mut sq = 0.0;
    for (j, v) in trace.values.iter().enumerate() {
        let e = (closed(trace.grid.node(j)) - v).abs();
        max_abs = max_abs.max(e);
        sq += e * e;
    }
    (max_abs, (trace.grid.step() * sq).sqrt())
}

/// Error norms of `trace` against `closed`; with a refined trace also the
/// empirical order.
pub fn compare_mode(
    closed: impl Fn(f64) -> f64,
    trace: &ModeTrace,
    refined: Option<&ModeTrace>,
) -> Result<ErrorSummary> {
    let (max_abs, l2) = errors(&closed, trace);
    let order = match refined {
        None => None,
        Some(fine) => {
            let g = &trace.grid;
            let f = &fine.grid;
            if f.t_start != g.t_start || f.t_end != g.t_end || f.steps != 2 * g.steps {
                return Err(invalid("refined trace must halve the step on the same interval"));
            }
            let (fine_max, _) = errors(&closed, fine);
            Some((max_abs / fine_max).log2())
        }
    };
    Ok(ErrorSummary { max_abs, l2, order })
}
