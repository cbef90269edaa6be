//! Deterministic text output: `key = value` reports and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        // drop the sign of −0
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

#[derive(Debug, Default, Clone)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    fn line(&mut self, key: &str, value: &str) {
        let _ = writeln!(self.text, "{key} = {value}");
    }

    pub fn str(&mut self, key: &str, value: &str) {
        self.line(key, value);
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.line(key, &num(value));
    }

    pub fn int(&mut self, key: &str, value: usize) {
        self.line(key, &value.to_string());
    }

    pub fn bool(&mut self, key: &str, value: bool) {
        self.line(key, if value { "true" } else { "false" });
    }

    pub fn opt_num(&mut self, key: &str, value: Option<f64>) {
        match value {
            Some(v) => self.num(key, v),
            None => self.line(key, "none"),
        }
    }

    pub fn opt_int(&mut self, key: &str, value: Option<usize>) {
        match value {
            Some(v) => self.int(key, v),
            None => self.line(key, "none"),
        }
    }

    pub fn nums(&mut self, key: &str, values: &[f64]) {
        let body: Vec<String> = values.iter().map(|v| num(*v)).collect();
        self.line(key, &format!("[{}]", body.join(", ")));
    }

    pub fn ints(&mut self, key: &str, values: &[usize]) {
        let body: Vec<String> = values.iter().map(usize::to_string).collect();
        self.line(key, &format!("[{}]", body.join(", ")));
    }

    pub fn bools(&mut self, key: &str, values: &[bool]) {
        let body: Vec<&str> = values.iter().map(|b| if *b { "true" } else { "false" }).collect();
        self.line(key, &format!("[{}]", body.join(", ")));
    }

    pub fn strs(&mut self, key: &str, values: &[String]) {
        let body: Vec<String> = values.iter().map(|s| format!("{s:?}")).collect();
        self.line(key, &format!("[{}]", body.join(", ")));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.text)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Evenly spaced nodes on [lo, hi], endpoints exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let last = n - 1;
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => lo + (hi - lo) * i as f64 / last as f64,
        })
        .collect()
}

/// Tensor grid of `n` points per axis, first axis slowest.
pub fn spatial_grid(lengths: &[f64], n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = lengths.iter().map(|&l| linspace(0.0, l, n)).collect();
    let mut points = vec![Vec::new()];
    for axis in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}

pub fn coord_header(dims: usize) -> Vec<String> {
    if dims == 1 {
        vec!["x".to_string()]
    } else {
        (1..=dims).map(|d| format!("x{d}")).collect()
    }
}

pub fn csv_row(out: &mut String, fields: &[f64]) {
    let body: Vec<String> = fields.iter().map(|v| num(*v)).collect();
    out.push_str(&body.join(","));
    out.push('\n');
}
