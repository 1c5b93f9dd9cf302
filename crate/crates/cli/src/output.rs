//! File writers. Every numeric file starts with a `# columns:` header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chainbath::{ChainBath, ChainTransform, TimeGrid};
use serde::Serialize;

use crate::error::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = toml::to_string(value)
        .map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    write_text(path, &text)
}

/// CSV with a time column followed by `columns`; values use the shortest
/// round-trip representation in scientific notation.
pub fn csv(grid: &TimeGrid, columns: &[(&str, &[f64])]) -> String {
    let mut out = String::from("# columns: t");
    for (name, values) in columns {
        assert_eq!(
            values.len(),
            grid.len,
            "column {name} does not match the grid"
        );
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for n in 0..grid.len {
        write!(out, "{:e}", grid.time(n)).unwrap();
        for (_, values) in columns {
            write!(out, ",{:e}", values[n]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, grid: &TimeGrid, columns: &[(&str, &[f64])]) -> Result<(), CliError> {
    write_text(path, &csv(grid, columns))
}

/// Chain description written by `transform`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ChainFile {
    /// Tracer-to-first-site coupling `D`.
    pub system_coupling: f64,
    /// `Ω_j²`, `j = 1..N`.
    pub omega_sq: Vec<f64>,
    /// `Ω_j`.
    pub omega: Vec<f64>,
    /// `D_j`, `j = 1..N-1`.
    pub couplings: Vec<f64>,
    /// Rows of the orthogonal map `X = O q`.
    pub transform: Vec<Vec<f64>>,
}

impl ChainFile {
    pub fn new(chain: &ChainBath, transform: &ChainTransform) -> Self {
        Self {
            system_coupling: chain.system_coupling,
            omega_sq: chain.omega_sq.clone(),
            omega: chain.omega(),
            couplings: chain.couplings.clone(),
            transform: transform.rows(),
        }
    }
}

/// Run metadata written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub n_modes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub method: String,
    pub quadrature: String,
    pub files: Vec<String>,
}

pub fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter_map(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let grid = TimeGrid::new(0.5, 3).unwrap();
        let text = csv(&grid, &[("x", &[1.0, 0.25, -3.0])]);
        assert_eq!(text, "# columns: t,x\n0e0,1e0\n5e-1,2.5e-1\n1e0,-3e0\n");
    }

    #[test]
    fn csv_values_roundtrip() {
        let grid = TimeGrid::new(0.1, 2).unwrap();
        let v = [std::f64::consts::PI, 1.0 / 3.0];
        let text = csv(&grid, &[("x", &v)]);
        let parsed: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(parsed, v);
    }
}
