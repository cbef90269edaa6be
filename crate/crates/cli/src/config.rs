//! JSON run configuration and its translation into solver inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use dezin_core::eigenbasis::{enumerate_modes, BoxDomain, Mode as Eigenmode};
use dezin_core::forward::{ProblemParams, DEFAULT_ORTHO_TOL, DEFAULT_ZERO_TOL};
use dezin_core::inverse::DEFAULT_C0;
use dezin_core::transforms::{project, Interp, QuadratureSpec, SampledTable, SpectralField, TimeFunction};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Forward,
    Inverse,
    Analyze,
    Ml,
    Selftest,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Inverse => "inverse",
            Mode::Analyze => "analyze",
            Mode::Ml => "ml",
            Mode::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub problem: Option<ProblemSection>,
    pub domain: Option<DomainSection>,
    #[serde(default)]
    pub functions: Functions,
    #[serde(default)]
    pub forward: ForwardSection,
    pub inverse: Option<InverseSection>,
    #[serde(default)]
    pub quadrature: QuadSection,
    #[serde(default)]
    pub projection: ProjectionSection,
    #[serde(default)]
    pub grid: GridSection,
    pub ml: Option<MlSection>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub modes: usize,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
}

fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Functions {
    pub f: Option<SpatialSpec>,
    pub g: Option<TimeSpec>,
    pub phi0: Option<SpatialSpec>,
}

/// A function of time.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeSpec {
    Const { c: f64 },
    /// c_0 + c_1 t + …
    Poly { coeffs: Vec<f64> },
    /// a e^{b t}
    Exp { a: f64, b: f64 },
    /// Two-column CSV (t, value).
    Table {
        path: PathBuf,
        #[serde(default)]
        interp: InterpName,
    },
}

/// A function on the box. Poly and table act on each coordinate and
/// multiply; exp is a e^{b (x_1 + … + x_N)}.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialSpec {
    Const { c: f64 },
    Poly { coeffs: Vec<f64> },
    Exp { a: f64, b: f64 },
    /// The j-th eigenfunction (1-based).
    SineMode {
        j: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Two-column CSV (x, value).
    Table {
        path: PathBuf,
        #[serde(default)]
        interp: InterpName,
    },
    /// Spectral coefficients given directly.
    Coeffs { values: Vec<f64> },
    /// u(·, t0) of the forward problem with source f·g (φ0 only).
    FromForward { f: Box<SpatialSpec> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpName {
    #[default]
    Linear,
    Cubic,
}

impl From<InterpName> for Interp {
    fn from(i: InterpName) -> Self {
        match i {
            InterpName::Linear => Interp::Linear,
            InterpName::Cubic => Interp::Cubic,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSection {
    /// Free coefficients a_k of resonant modes, keyed by 1-based index.
    #[serde(default)]
    pub free: BTreeMap<String, f64>,
    pub ortho_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSection {
    pub t0: f64,
    pub c0: Option<f64>,
    pub ortho_tol: Option<f64>,
    #[serde(default)]
    pub free_f: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSection {
    #[serde(default = "default_panels")]
    pub panels: usize,
    #[serde(default = "default_order")]
    pub order: usize,
    pub grading: Option<f64>,
}

fn default_panels() -> usize {
    QuadratureSpec::default().panels
}

fn default_order() -> usize {
    QuadratureSpec::default().order
}

impl Default for QuadSection {
    fn default() -> Self {
        Self {
            panels: default_panels(),
            order: default_order(),
            grading: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSection {
    #[serde(default = "default_projection_panels")]
    pub panels: usize,
    #[serde(default = "default_projection_order")]
    pub order: usize,
}

fn default_projection_panels() -> usize {
    64
}

fn default_projection_order() -> usize {
    8
}

impl Default for ProjectionSection {
    fn default() -> Self {
        Self {
            panels: default_projection_panels(),
            order: default_projection_order(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Points per axis, boundary included.
    #[serde(default = "default_points")]
    pub points: usize,
    /// Times spanning [−α, β].
    #[serde(default = "default_times")]
    pub times: usize,
    /// Time steps per side for the per-mode residuals.
    #[serde(default = "default_check_steps")]
    pub check_steps: usize,
    /// Points per axis where the conditions are checked.
    #[serde(default = "default_check_points")]
    pub check_points: usize,
}

fn default_check_points() -> usize {
    11
}

fn default_points() -> usize {
    101
}

fn default_times() -> usize {
    201
}

fn default_check_steps() -> usize {
    1024
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            points: default_points(),
            times: default_times(),
            check_steps: default_check_steps(),
            check_points: default_check_points(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlSection {
    pub rho: f64,
    pub mu: f64,
    pub z: Vec<f64>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| config_error(format!("invalid configuration: {e}")))
    }
}

/// Everything the forward, inverse and analyze pipelines need.
#[derive(Debug, Clone)]
pub struct Setup {
    pub params: ProblemParams,
    pub domain: BoxDomain,
    pub modes: Arc<[Eigenmode]>,
    pub quad: QuadratureSpec,
    pub projection: QuadratureSpec,
    pub forward_free: BTreeMap<usize, f64>,
    pub forward_ortho_tol: f64,
    pub inverse: Option<InverseSetup>,
}

#[derive(Debug, Clone)]
pub struct InverseSetup {
    pub t0: f64,
    pub c0: f64,
    pub ortho_tol: f64,
    pub free_f: BTreeMap<usize, f64>,
}

fn index_map(map: &BTreeMap<String, f64>, what: &str) -> Result<BTreeMap<usize, f64>, CliError> {
    map.iter()
        .map(|(k, v)| match k.trim().parse::<usize>() {
            Ok(i) if i >= 1 => Ok((i, *v)),
            _ => Err(config_error(format!("{what}: key {k:?} is not a 1-based mode index"))),
        })
        .collect()
}

impl Setup {
    pub fn build(cfg: &RunConfig, modes_override: Option<usize>) -> Result<Self, CliError> {
        let p = cfg
            .problem
            .as_ref()
            .ok_or_else(|| config_error("missing \"problem\" section"))?;
        let count = modes_override.unwrap_or(p.modes);
        let mut params = ProblemParams::new(p.rho, p.alpha, p.beta, p.lambda, count).map_err(CliError::from_setup)?;
        params.zero_tol = p.zero_tol;
        params.validate().map_err(CliError::from_setup)?;
        let domain = match &cfg.domain {
            Some(d) => BoxDomain::new(d.lengths.clone()),
            None => BoxDomain::unit(1),
        }
        .map_err(CliError::from_setup)?;
        let modes: Arc<[Eigenmode]> = enumerate_modes(&domain, count).map_err(CliError::from_setup)?.into();
        let quad = QuadratureSpec {
            panels: cfg.quadrature.panels,
            order: cfg.quadrature.order,
            grading: cfg.quadrature.grading,
        };
        quad.validate().map_err(CliError::from_setup)?;
        let projection = QuadratureSpec {
            panels: cfg.projection.panels,
            order: cfg.projection.order,
            grading: None,
        };
        projection.validate().map_err(CliError::from_setup)?;
        let inverse = match &cfg.inverse {
            None => None,
            Some(s) => Some(InverseSetup {
                t0: s.t0,
                c0: s.c0.unwrap_or(DEFAULT_C0),
                ortho_tol: s.ortho_tol.unwrap_or(DEFAULT_ORTHO_TOL),
                free_f: index_map(&s.free_f, "inverse.free_f")?,
            }),
        };
        if [cfg.grid.points, cfg.grid.times, cfg.grid.check_steps, cfg.grid.check_points].iter().any(|n| *n < 2) {
            return Err(config_error("grid sizes must be at least 2"));
        }
        Ok(Self {
            params,
            domain,
            modes,
            quad,
            projection,
            forward_free: index_map(&cfg.forward.free, "forward.free")?,
            forward_ortho_tol: cfg.forward.ortho_tol.unwrap_or(DEFAULT_ORTHO_TOL),
            inverse,
        })
    }
}

fn read_table(path: &Path, base: &Path, interp: InterpName) -> Result<SampledTable, CliError> {
    let full = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    let text = std::fs::read_to_string(&full)
        .map_err(|e| config_error(format!("cannot read table {}: {e}", full.display())))?;
    let mut t = Vec::new();
    let mut v = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [a, b] => a.parse::<f64>().ok().zip(b.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((a, b)) => {
                t.push(a);
                v.push(b);
            }
            // a header line
            None if t.is_empty() && n == 0 => continue,
            None => {
                return Err(config_error(format!(
                    "{}:{}: expected two numeric columns",
                    full.display(),
                    n + 1
                )))
            }
        }
    }
    SampledTable::new(t, v, interp.into())
        .map_err(|e| config_error(format!("table {}: {e}", full.display())))
}

pub fn time_function(spec: &TimeSpec, base: &Path) -> Result<TimeFunction, CliError> {
    Ok(match spec {
        TimeSpec::Const { c } => TimeFunction::Constant(*c),
        TimeSpec::Poly { coeffs } => {
            if coeffs.is_empty() {
                return Err(config_error("poly needs at least one coefficient"));
            }
            TimeFunction::Polynomial(coeffs.clone())
        }
        TimeSpec::Exp { a, b } => TimeFunction::Exponential { scale: *a, rate: *b },
        TimeSpec::Table { path, interp } => TimeFunction::Table(Arc::new(read_table(path, base, *interp)?)),
    })
}

/// Coefficients of a spatial function. `FromForward` is resolved by the caller.
pub fn spatial_field(spec: &SpatialSpec, setup: &Setup, base: &Path) -> Result<SpectralField, CliError> {
    let modes = setup.modes.clone();
    let project_fn = |h: &dyn Fn(&[f64]) -> f64| {
        project(h, &setup.domain, modes.clone(), &setup.projection).map_err(CliError::from_setup)
    };
    match spec {
        SpatialSpec::Const { c } => project_fn(&|_| *c),
        SpatialSpec::Poly { coeffs } => {
            let p = TimeFunction::Polynomial(coeffs.clone());
            project_fn(&|x| x.iter().map(|xi| p.eval(*xi)).product())
        }
        SpatialSpec::Exp { a, b } => project_fn(&|x| a * (b * x.iter().sum::<f64>()).exp()),
        SpatialSpec::SineMode { j, scale } => {
            if *j == 0 || *j > modes.len() {
                return Err(config_error(format!("sine_mode j = {j} not in 1..={}", modes.len())));
            }
            let mut f = SpectralField::unit(modes, j - 1);
            f.coeffs[j - 1] = *scale;
            Ok(f)
        }
        SpatialSpec::Table { path, interp } => {
            let tab = read_table(path, base, *interp)?;
            project_fn(&|x| x.iter().map(|xi| tab.eval(*xi)).product())
        }
        SpatialSpec::Coeffs { values } => {
            if values.len() > modes.len() {
                return Err(config_error(format!(
                    "{} coefficients given for {} modes",
                    values.len(),
                    modes.len()
                )));
            }
            let mut c = values.clone();
            c.resize(modes.len(), 0.0);
            SpectralField::new(modes, c).map_err(CliError::from_setup)
        }
        SpatialSpec::FromForward { .. } => Err(config_error("from_forward is only valid for phi0")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::parse(
            r#"{
                "mode": "inverse",
                "problem": {"rho": 0.5, "alpha": 1, "beta": 1, "lambda": -1, "modes": 6},
                "domain": {"lengths": [1.0, 2.0]},
                "functions": {
                    "g": {"kind": "exp", "a": 1, "b": -0.5},
                    "phi0": {"kind": "from_forward", "f": {"kind": "sine_mode", "j": 2}}
                },
                "inverse": {"t0": 0.5, "free_f": {"1": 0.25}},
                "grid": {"points": 11}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.mode, Some(Mode::Inverse));
        assert_eq!(cfg.grid.points, 11);
        assert_eq!(cfg.grid.times, 201);
        let setup = Setup::build(&cfg, Some(4)).unwrap();
        assert_eq!(setup.modes.len(), 4);
        assert_eq!(setup.params.zero_tol, DEFAULT_ZERO_TOL);
        assert_eq!(setup.inverse.unwrap().free_f, BTreeMap::from([(1, 0.25)]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("{"), Err(CliError::Config(_))));
        assert!(matches!(RunConfig::parse(r#"{"unknown": 1}"#), Err(CliError::Config(_))));
        let cfg = RunConfig::parse(r#"{"problem": {"rho": 1.5, "alpha": 1, "beta": 1, "lambda": 2, "modes": 3}}"#).unwrap();
        assert!(matches!(Setup::build(&cfg, None), Err(CliError::Config(_))));
        let cfg = RunConfig::parse(
            r#"{"problem": {"rho": 0.5, "alpha": 1, "beta": 1, "lambda": 2, "modes": 3}, "forward": {"free": {"zero": 1}}}"#,
        )
        .unwrap();
        assert!(matches!(Setup::build(&cfg, None), Err(CliError::Config(_))));
    }

    #[test]
    fn builtin_functions() {
        let cfg = RunConfig::parse(r#"{"problem": {"rho": 0.5, "alpha": 1, "beta": 1, "lambda": 2, "modes": 5}}"#).unwrap();
        let setup = Setup::build(&cfg, None).unwrap();
        let base = Path::new(".");
        let f = spatial_field(&SpatialSpec::SineMode { j: 2, scale: 3.0 }, &setup, base).unwrap();
        assert_eq!(f.coeffs, vec![0.0, 3.0, 0.0, 0.0, 0.0]);
        assert!(spatial_field(&SpatialSpec::SineMode { j: 6, scale: 1.0 }, &setup, base).is_err());
        let c = spatial_field(&SpatialSpec::Const { c: 1.0 }, &setup, base).unwrap();
        // ∫_0^1 √2 sin(πx) dx = 2√2/π
        assert!((c.coeffs[0] - 2.0 * 2f64.sqrt() / std::f64::consts::PI).abs() < 1e-13);
        assert!(c.coeffs[1].abs() < 1e-13);

        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("g.csv"), "t,value\n-1,1\n0,2\n1,3\n").unwrap();
        let g = time_function(
            &TimeSpec::Table {
                path: "g.csv".into(),
                interp: InterpName::Linear,
            },
            dir.path(),
        )
        .unwrap();
        assert_eq!(g.eval(0.5), 2.5);
        std::fs::write(dir.path().join("bad.csv"), "0,1\n1,x\n").unwrap();
        assert!(time_function(
            &TimeSpec::Table {
                path: "bad.csv".into(),
                interp: InterpName::Linear,
            },
            dir.path(),
        )
        .is_err());
    }
}
