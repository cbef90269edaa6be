//! Batch front end for the mixed fractional/parabolic Dezin problem solver.
//!
//! [`run`] executes one pipeline described by a JSON [`config::RunConfig`] and
//! writes its report, CSV tables and residual summary into an output
//! directory. The `dezin-solve` binary is a thin wrapper around it.

pub mod config;
pub mod output;
mod pipelines;
pub mod selftest;

use std::path::PathBuf;

use thiserror::Error;

pub use config::Mode;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Solver(#[from] dezin_core::Error),
}

impl CliError {
    /// Parameter errors raised while building the problem are configuration errors.
    pub fn from_setup(e: dezin_core::Error) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Solver(dezin_core::Error::NoSolution { .. }) => 2,
            CliError::Io(_) | CliError::Solver(_) => 1,
        }
    }
}

/// One invocation of the front end.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub mode: Mode,
    pub config: Option<PathBuf>,
    /// Overrides `output_dir` from the configuration.
    pub out: Option<PathBuf>,
    /// Overrides `problem.modes`.
    pub modes: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// 0 success, 1 failed self-test, 2 no solution.
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub const DEFAULT_OUTPUT_DIR: &str = "dezin-out";

pub fn run(inv: &Invocation) -> Result<Outcome, CliError> {
    let (cfg, base) = match &inv.config {
        Some(path) => {
            let cfg = config::RunConfig::load(path)?;
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            (cfg, base)
        }
        None if inv.mode == Mode::Selftest => (config::RunConfig::default(), PathBuf::new()),
        None => return Err(CliError::Config("--config is required for this mode".into())),
    };
    if let Some(m) = cfg.mode {
        if m != inv.mode {
            return Err(CliError::Config(format!(
                "configuration is for mode {}, invoked as {}",
                m.name(),
                inv.mode.name()
            )));
        }
    }
    let out_dir = inv
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let ctx = pipelines::Context {
        cfg: &cfg,
        base: &base,
        out_dir: &out_dir,
        modes: inv.modes,
    };
    match inv.mode {
        Mode::Forward => pipelines::forward(&ctx),
        Mode::Inverse => pipelines::inverse(&ctx),
        Mode::Analyze => pipelines::analyze(&ctx),
        Mode::Ml => pipelines::ml(&ctx),
        Mode::Selftest => pipelines::selftest(&ctx),
    }
}
