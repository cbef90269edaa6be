//! Acceptance criteria for the solver, run with `cargo test -p dezin-validation`.
//!
//! The suite lives in `tests/acceptance.rs` and prints one PASS/FAIL line per
//! criterion.
