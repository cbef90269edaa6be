//! The five run modes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dezin_core::forward::{
    analyze_solvability, check_conditions, solve_forward, ConditionReport, ForwardOptions, ForwardSolution, Source,
    SolvabilityReport,
};
use dezin_core::inverse::{
    bound_diagnostics, compute_denominators, solve_inverse, verify_overdetermination, BoundTable, DenominatorReport,
    InverseOptions, InverseProblem,
};
use dezin_core::mlf::{ml_eval_detailed, MlConfig, MlQuery, Regime};
use dezin_core::transforms::{synthesize, SpectralField, TimeFunction};
use dezin_core::Error;

use crate::config::{spatial_field, time_function, RunConfig, Setup, SpatialSpec};
use crate::output::{coord_header, csv_row, linspace, spatial_grid, write_file, Report};
use crate::{selftest, CliError, Outcome};

pub(crate) struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub base: &'a Path,
    pub out_dir: &'a Path,
    pub modes: Option<usize>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Self {
        Self { dir, files: Vec::new() }
    }

    fn put(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_file(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, exit_code: i32, summary: String) -> Outcome {
        Outcome {
            exit_code,
            out_dir: self.dir.to_path_buf(),
            files: self.files,
            summary,
        }
    }
}

fn problem_lines(r: &mut Report, mode: &str, s: &Setup) {
    let p = &s.params;
    r.str("mode", mode);
    r.num("rho", p.rho);
    r.num("alpha", p.alpha);
    r.num("beta", p.beta);
    r.num("lambda", p.lambda);
    r.int("modes", p.mode_count);
    r.num("zero_tol", p.zero_tol);
    r.nums("lengths", s.domain.lengths());
    let ev: Vec<f64> = s.modes.iter().map(|m| m.eigenvalue).collect();
    r.nums("eigenvalues", &ev);
}

fn solvability_lines(r: &mut Report, s: &SolvabilityReport) {
    r.str("lambda_class", s.lambda_class.name());
    r.nums("delta", &s.delta);
    r.opt_num("lambda0", s.lambda0);
    r.ints("resonant_set", &s.resonant_set);
    r.num("lower_bound", s.lower_bound);
    r.opt_num("printed_bound", s.printed_bound);
    r.opt_int("threshold_index", s.threshold_index);
}

fn denominator_lines(r: &mut Report, d: &DenominatorReport, bounds: &BoundTable) {
    r.nums("denominator", &d.delta);
    r.nums("denominator_term1", &d.term1);
    r.nums("denominator_term2", &d.term2);
    r.ints("k0", &d.k0);
    r.ints("precision_loss", &d.precision_loss);
    r.num("g_min", d.m);
    r.num("g_max", d.big_m);
    r.num("c0", d.c0);
    r.num("t0_threshold", d.t0_threshold);
    r.bool("t0_condition", d.t0_condition);
    r.opt_int("k_l", d.k_l);
    r.opt_int("k_r", d.k_r);
    let scaled: Vec<f64> = bounds.rows.iter().map(|b| b.scaled).collect();
    let in_regime: Vec<bool> = bounds.rows.iter().map(|b| b.in_regime).collect();
    let violated: Vec<usize> = bounds.rows.iter().filter(|b| b.violated).map(|b| b.k).collect();
    r.nums("bound_scaled", &scaled);
    r.bools("bound_in_regime", &in_regime);
    r.ints("bound_violations", &violated);
    r.opt_num("empirical_c", bounds.empirical_c);
}

fn forward_lines(r: &mut Report, sol: &ForwardSolution) {
    r.nums("fstar", &sol.fstar);
    r.nums("a", &sol.coefficients());
    let free: Vec<usize> = sol.mode_solutions.iter().filter(|m| m.is_free).map(|m| m.k).collect();
    r.ints("free_modes", &free);
    r.num("tail_fraction", sol.diagnostics.tail_fraction);
}

fn no_solution_lines(r: &mut Report, indices: &[usize], values: &[f64]) {
    r.str("status", "no_solution");
    r.ints("offending_indices", indices);
    r.nums("offending_values", values);
}

fn residual_text(c: &ConditionReport, overdetermination: Option<f64>) -> String {
    let mut r = Report::new();
    r.num("dezin", c.dezin);
    r.num("gluing", c.gluing);
    r.num("gluing_fine", c.gluing_fine);
    r.num("gluing_coarse", c.gluing_coarse);
    r.opt_num("gluing_rate", c.gluing_rate());
    r.num("boundary", c.boundary);
    r.num("pde_pos", c.pde_pos);
    r.num("pde_neg", c.pde_neg);
    if let Some(o) = overdetermination {
        r.num("overdetermination", o);
    }
    r.as_str().to_string()
}

/// Values of every mode at every grid point, one row per point.
fn basis_rows(s: &Setup, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .par_iter()
        .map(|x| s.modes.iter().map(|m| m.eval_unchecked(x)).collect())
        .collect()
}

fn u_csv(sol: &ForwardSolution, s: &Setup, cfg: &RunConfig) -> Result<String, CliError> {
    let points = spatial_grid(s.domain.lengths(), cfg.grid.points);
    let basis = basis_rows(s, &points);
    let mut out = coord_header(s.domain.dims()).join(",");
    out.push_str(",t,u\n");
    for t in linspace(-s.params.alpha, s.params.beta, cfg.grid.times) {
        let values = sol.mode_values(t)?;
        for (x, row) in points.iter().zip(&basis) {
            let u: f64 = row.iter().zip(&values).map(|(b, v)| b * v).sum();
            let mut fields = x.clone();
            fields.extend([t, u]);
            csv_row(&mut out, &fields);
        }
    }
    Ok(out)
}

fn f_csv(f: &SpectralField, s: &Setup, cfg: &RunConfig) -> String {
    let points = spatial_grid(s.domain.lengths(), cfg.grid.points);
    let mut out = coord_header(s.domain.dims()).join(",");
    out.push_str(",f\n");
    for x in &points {
        let mut fields = x.clone();
        fields.push(synthesize(f, x));
        csv_row(&mut out, &fields);
    }
    out
}

fn check_points(s: &Setup, cfg: &RunConfig) -> Vec<Vec<f64>> {
    spatial_grid(s.domain.lengths(), cfg.grid.check_points)
}

fn time_fn(ctx: &Context, name: &str) -> Result<TimeFunction, CliError> {
    let spec = ctx
        .cfg
        .functions
        .g
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("functions.g is required for {name}")))?;
    time_function(spec, ctx.base)
}

fn forward_options(s: &Setup) -> ForwardOptions {
    ForwardOptions {
        free: s.forward_free.clone(),
        ortho_tol: s.forward_ortho_tol,
        quad: s.quad,
    }
}

pub(crate) fn forward(ctx: &Context) -> Result<Outcome, CliError> {
    let s = Setup::build(ctx.cfg, ctx.modes)?;
    let source = match (&ctx.cfg.functions.f, &ctx.cfg.functions.g) {
        (None, None) => Source::zero(),
        (Some(f), Some(_)) => Source::Separable {
            f: spatial_field(f, &s, ctx.base)?,
            g: time_fn(ctx, "forward")?,
        },
        _ => return Err(CliError::Config("give both functions.f and functions.g, or neither".into())),
    };
    let solvability = analyze_solvability(&s.params, &s.modes)?;
    let mut w = Writer::new(ctx.out_dir);
    let mut r = Report::new();
    problem_lines(&mut r, "forward", &s);
    solvability_lines(&mut r, &solvability);
    match solve_forward(&s.params, s.modes.clone(), &source, &forward_options(&s)) {
        Err(Error::NoSolution { indices, values }) => {
            no_solution_lines(&mut r, &indices, &values);
            w.put("report.txt", r.as_str())?;
            Ok(w.finish(2, format!("no solution: orthogonality fails for modes {indices:?}")))
        }
        Err(e) => Err(e.into()),
        Ok(sol) => {
            r.str("status", "ok");
            forward_lines(&mut r, &sol);
            r.strs("warnings", &sol.diagnostics.warnings);
            let cond = check_conditions(&sol, &check_points(&s, ctx.cfg), ctx.cfg.grid.check_steps)?;
            w.put("report.txt", r.as_str())?;
            w.put("u.csv", &u_csv(&sol, &s, ctx.cfg)?)?;
            w.put("residuals.txt", &residual_text(&cond, None))?;
            Ok(w.finish(0, format!("forward solution with {} modes", s.params.mode_count)))
        }
    }
}

/// φ0 coefficients, solving the forward problem first for `from_forward`.
fn phi0_field(ctx: &Context, s: &Setup, g: &TimeFunction, t0: f64) -> Result<SpectralField, CliError> {
    match &ctx.cfg.functions.phi0 {
        None => Err(CliError::Config("functions.phi0 is required".into())),
        Some(SpatialSpec::FromForward { f }) => {
            let source = Source::Separable {
                f: spatial_field(f, s, ctx.base)?,
                g: g.clone(),
            };
            let sol = solve_forward(&s.params, s.modes.clone(), &source, &forward_options(s))?;
            Ok(SpectralField::new(s.modes.clone(), sol.mode_values(t0)?)?)
        }
        Some(spec) => spatial_field(spec, s, ctx.base),
    }
}

fn inverse_problem(ctx: &Context, s: &Setup, need_phi0: bool) -> Result<(InverseProblem, InverseOptions), CliError> {
    let inv = s
        .inverse
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"inverse\" section".into()))?;
    let g = time_fn(ctx, "the inverse problem")?;
    let phi0 = if need_phi0 || ctx.cfg.functions.phi0.is_some() {
        phi0_field(ctx, s, &g, inv.t0)?
    } else {
        SpectralField::zeros(s.modes.clone())
    };
    let prob = InverseProblem::new(s.params, g, inv.t0, phi0).map_err(CliError::from_setup)?;
    let opts = InverseOptions {
        free_f: inv.free_f.clone(),
        ortho_tol: inv.ortho_tol,
        c0: inv.c0,
        quad: s.quad,
    };
    Ok((prob, opts))
}

pub(crate) fn inverse(ctx: &Context) -> Result<Outcome, CliError> {
    let s = Setup::build(ctx.cfg, ctx.modes)?;
    let (prob, opts) = inverse_problem(ctx, &s, true)?;
    let solvability = analyze_solvability(&s.params, &s.modes)?;
    let mut w = Writer::new(ctx.out_dir);
    let mut r = Report::new();
    problem_lines(&mut r, "inverse", &s);
    r.num("t0", prob.t0);
    solvability_lines(&mut r, &solvability);
    match solve_inverse(&prob, &opts) {
        Err(Error::NoSolution { indices, values }) => {
            let d = compute_denominators(&prob, &s.modes, &opts)?;
            denominator_lines(&mut r, &d, &bound_diagnostics(&prob, &d, &s.modes));
            no_solution_lines(&mut r, &indices, &values);
            w.put("report.txt", r.as_str())?;
            Ok(w.finish(2, format!("no solution: orthogonality fails for modes {indices:?}")))
        }
        Err(e) => Err(e.into()),
        Ok(sol) => {
            denominator_lines(&mut r, &sol.report, &bound_diagnostics(&prob, &sol.report, &s.modes));
            r.str("status", "ok");
            r.nums("f", &sol.f.coeffs);
            r.ints("free_f_modes", &sol.free_indices);
            forward_lines(&mut r, &sol.u);
            let mut warnings = sol.warnings.clone();
            warnings.extend(sol.u.diagnostics.warnings.iter().cloned());
            r.strs("warnings", &warnings);
            let points = check_points(&s, ctx.cfg);
            let cond = check_conditions(&sol.u, &points, ctx.cfg.grid.check_steps)?;
            let over = verify_overdetermination(&sol, &prob, &points)?;
            w.put("report.txt", r.as_str())?;
            w.put("u.csv", &u_csv(&sol.u, &s, ctx.cfg)?)?;
            w.put("f.csv", &f_csv(&sol.f, &s, ctx.cfg))?;
            w.put("residuals.txt", &residual_text(&cond, Some(over)))?;
            Ok(w.finish(0, format!("recovered f on {} modes", s.params.mode_count)))
        }
    }
}

pub(crate) fn analyze(ctx: &Context) -> Result<Outcome, CliError> {
    let s = Setup::build(ctx.cfg, ctx.modes)?;
    let solvability = analyze_solvability(&s.params, &s.modes)?;
    let mut w = Writer::new(ctx.out_dir);
    let mut r = Report::new();
    problem_lines(&mut r, "analyze", &s);
    solvability_lines(&mut r, &solvability);
    if s.inverse.is_some() {
        let (prob, opts) = inverse_problem(ctx, &s, false)?;
        let d = compute_denominators(&prob, &s.modes, &opts)?;
        r.num("t0", prob.t0);
        denominator_lines(&mut r, &d, &bound_diagnostics(&prob, &d, &s.modes));
    }
    w.put("report.txt", r.as_str())?;
    let summary = format!(
        "lambda class {}, resonant modes {:?}",
        solvability.lambda_class.name(),
        solvability.resonant_set
    );
    Ok(w.finish(0, summary))
}

fn regime_name(r: Regime) -> String {
    match r {
        Regime::Exact => "exact",
        Regime::Series => "series",
        Regime::Asymptotic => "asymptotic",
        Regime::Integral => "integral",
        Regime::Kummer => "kummer",
    }
    .to_string()
}

pub(crate) fn ml(ctx: &Context) -> Result<Outcome, CliError> {
    let m = ctx
        .cfg
        .ml
        .as_ref()
        .ok_or_else(|| CliError::Config("missing \"ml\" section".into()))?;
    let queries = m
        .z
        .iter()
        .map(|&z| MlQuery::new(m.rho, m.mu, z).map_err(CliError::from_setup))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = MlConfig::default();
    let values = queries
        .par_iter()
        .map(|q| ml_eval_detailed(q, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut r = Report::new();
    r.str("mode", "ml");
    r.num("rho", m.rho);
    r.num("mu", m.mu);
    r.nums("z", &m.z);
    r.nums("value", &values.iter().map(|v| v.value).collect::<Vec<_>>());
    r.nums("error_estimate", &values.iter().map(|v| v.err).collect::<Vec<_>>());
    r.strs("regime", &values.iter().map(|v| regime_name(v.regime)).collect::<Vec<_>>());
    let mut w = Writer::new(ctx.out_dir);
    w.put("report.txt", r.as_str())?;
    Ok(w.finish(0, format!("{} Mittag-Leffler values", values.len())))
}

pub(crate) fn selftest(ctx: &Context) -> Result<Outcome, CliError> {
    let checks = selftest::run_checks()?;
    let mut r = Report::new();
    r.str("mode", "selftest");
    for c in &checks {
        r.num(&format!("{}.value", c.name), c.value);
        r.num(&format!("{}.limit", c.name), c.limit);
        r.str(
            &format!("{}.status", c.name),
            match (c.passed(), c.gating) {
                (true, _) => "pass",
                (false, true) => "fail",
                (false, false) => "below_target",
            },
        );
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c.gating && !c.passed())
        .map(|c| c.name.as_str())
        .collect();
    let below = checks.iter().filter(|c| !c.gating && !c.passed()).count();
    r.str("status", if failed.is_empty() { "pass" } else { "fail" });
    let mut w = Writer::new(ctx.out_dir);
    w.put("report.txt", r.as_str())?;
    let summary = format!(
        "{} checks, {} failed, {} recorded below target",
        checks.len(),
        failed.len(),
        below
    );
    Ok(w.finish(if failed.is_empty() { 0 } else { 1 }, summary))
}
