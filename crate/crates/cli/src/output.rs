//! Deterministic artifact writers: CSV traces with 15 significant digits
//! and LF line endings, and plain-text key=value reports. Identical inputs
//! produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use crnctl_core::sim::Trajectory;
use crnctl_core::ssa::SsaTrajectory;

/// 15 significant digits, scientific notation. Negative zero is
/// normalized so that algebraically equal results render identically.
pub fn fmt_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.14e}")
}

/// `t,<species...>` rows over the output grid.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push('t');
    for name in traj.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, &t) in traj.times().iter().enumerate() {
        out.push_str(&fmt_float(t));
        for j in 0..traj.n_cols() {
            out.push(',');
            out.push_str(&fmt_float(traj.value(i, j)));
        }
        out.push('\n');
    }
    out
}

/// Counts trace of a stochastic run.
pub fn ssa_csv(traj: &SsaTrajectory) -> String {
    let mut out = String::new();
    out.push('t');
    for name in &traj.names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, &t) in traj.times.iter().enumerate() {
        out.push_str(&fmt_float(t));
        for s in 0..traj.n_species {
            let _ = write!(out, ",{}", traj.count(i, s));
        }
        out.push('\n');
    }
    out
}

/// Side-by-side ideal/compiled comparison over mapped signal columns.
pub fn comparison_csv(ideal: &Trajectory, dsd: &Trajectory, map: &[(usize, usize)]) -> String {
    let mut out = String::new();
    out.push('t');
    for &(ci, _) in map {
        let name = &ideal.names()[ci];
        let _ = write!(out, ",{name}.ideal,{name}.dsd,{name}.absdev");
    }
    out.push('\n');
    for (i, &t) in ideal.times().iter().enumerate() {
        out.push_str(&fmt_float(t));
        let state = dsd.sample_at(t);
        for &(ci, cd) in map {
            let a = ideal.value(i, ci);
            let b = state[cd];
            let _ = write!(
                out,
                ",{},{},{}",
                fmt_float(a),
                fmt_float(b),
                fmt_float((a - b).abs())
            );
        }
        out.push('\n');
    }
    out
}

/// Ordered key = value document.
#[derive(Debug, Default, Clone)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.lines.push((key.into(), value.into()));
    }

    pub fn push_float(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, fmt_float(value));
    }

    pub fn push_bool(&mut self, key: impl Into<String>, value: bool) {
        self.push(key, value.to_string());
    }

    pub fn push_complex_list(&mut self, key: impl Into<String>, values: &[crnctl_core::nalgebra::Complex<f64>]) {
        let mut sorted: Vec<_> = values.to_vec();
        sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let rendered: Vec<String> = sorted
            .iter()
            .map(|z| {
                if z.im >= 0.0 {
                    format!("{}+{}j", fmt_float(z.re), fmt_float(z.im))
                } else {
                    format!("{}{}j", fmt_float(z.re), fmt_float(z.im))
                }
            })
            .collect();
        self.push(key, rendered.join(" "));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create directory {}", parent.display()))?;
    }
    std::fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}
