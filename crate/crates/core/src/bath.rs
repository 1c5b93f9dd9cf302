//! Independent-oscillator bath: data, validation, discretization and the
//! global stability test.
//!
//! Units are dimensionless with unit masses. The tracer obeys
//! `ẍ = -Ω² x + Σ c_k q_k` and each bath mode `q̈_k = -ω_k² q_k + c_k x`.
//! The supplied `Ω` is the renormalized frequency; no counter-term is added.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::BathError;

/// Relative tolerance under which two bath frequencies count as equal.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Smallest admissible eigenvalue of the quadratic form in [`stability_check`].
pub const STABILITY_TOLERANCE: f64 = -1e-10;

/// Spectrum `ω_k` and couplings `c_k` of the independent-oscillator model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoBath {
    pub omega: Vec<f64>,
    pub c: Vec<f64>,
}

impl IoBath {
    pub fn new(omega: Vec<f64>, c: Vec<f64>) -> Result<Self, BathError> {
        if omega.len() != c.len() {
            return Err(BathError::LengthMismatch {
                omega: omega.len(),
                c: c.len(),
            });
        }
        if omega.is_empty() {
            return Err(BathError::Empty);
        }
        Ok(Self { omega, c })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega_sq(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w * w).collect()
    }

    /// System-chain coupling `D = ‖c‖`.
    pub fn total_coupling(&self) -> f64 {
        self.c.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `Σ c_k² / ω_k²`, the counter-term stiffness (and `η(0)`).
    pub fn counter_term(&self) -> f64 {
        self.omega
            .iter()
            .zip(&self.c)
            .map(|(w, c)| c * c / (w * w))
            .sum()
    }

    /// Copy with every coupling multiplied by `factor`.
    pub fn with_scaled_couplings(&self, factor: f64) -> Self {
        Self {
            omega: self.omega.clone(),
            c: self.c.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Harmonic tracer with unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemOscillator {
    pub omega: f64,
}

impl SystemOscillator {
    pub fn new(omega: f64) -> Result<Self, BathError> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(BathError::InvalidSystemFrequency(omega));
        }
        Ok(Self { omega })
    }
}

/// Initial positions and velocities of tracer and bath modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x0: f64,
    pub v0: f64,
    pub q0: Vec<f64>,
    pub qdot0: Vec<f64>,
}

impl PhaseState {
    pub fn new(x0: f64, v0: f64, q0: Vec<f64>, qdot0: Vec<f64>) -> Result<Self, BathError> {
        if q0.len() != qdot0.len() {
            return Err(BathError::PhaseDimension {
                expected: q0.len(),
                got: qdot0.len(),
            });
        }
        Ok(Self { x0, v0, q0, qdot0 })
    }

    /// Tracer displaced, bath at rest.
    pub fn tracer_only(x0: f64, v0: f64, n: usize) -> Self {
        Self {
            x0,
            v0,
            q0: vec![0.0; n],
            qdot0: vec![0.0; n],
        }
    }

    pub fn ensure_len(&self, n: usize) -> Result<(), BathError> {
        for got in [self.q0.len(), self.qdot0.len()] {
            if got != n {
                return Err(BathError::PhaseDimension { expected: n, got });
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x0: self.x0 * factor,
            v0: self.v0 * factor,
            q0: self.q0.iter().map(|v| v * factor).collect(),
            qdot0: self.qdot0.iter().map(|v| v * factor).collect(),
        }
    }

    /// Same positions, all velocities negated.
    pub fn reversed(&self) -> Self {
        Self {
            x0: self.x0,
            v0: -self.v0,
            q0: self.q0.clone(),
            qdot0: self.qdot0.iter().map(|v| -v).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    LengthMismatch { omega: usize, c: usize },
    Empty,
    NonPositiveFrequency { index: usize, value: f64 },
    NotIncreasing { index: usize },
    DuplicateFrequency { index: usize, value: f64 },
    ZeroCoupling { index: usize },
    NonFinite { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { omega, c } => {
                write!(f, "length mismatch: {omega} frequencies, {c} couplings")
            }
            Violation::Empty => write!(f, "empty bath"),
            Violation::NonPositiveFrequency { index, value } => {
                write!(f, "non-positive frequency omega[{index}] = {value}")
            }
            Violation::NotIncreasing { index } => {
                write!(f, "not increasing at omega[{index}]")
            }
            Violation::DuplicateFrequency { index, value } => {
                write!(f, "duplicate frequency omega[{index}] = {value}")
            }
            Violation::ZeroCoupling { index } => write!(f, "zero coupling c[{index}]"),
            Violation::NonFinite { index } => write!(f, "non-finite entry at index {index}"),
        }
    }
}

/// Outcome of [`validate_bath`]; empty means valid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Only zero couplings are reported; the spectrum itself is fine.
    pub fn only_zero_couplings(&self) -> bool {
        self.violations
            .iter()
            .all(|v| matches!(v, Violation::ZeroCoupling { .. }))
    }

    pub fn has_duplicates(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::DuplicateFrequency { .. }))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

pub fn validate_bath(bath: &IoBath) -> ValidationReport {
    let mut violations = Vec::new();
    if bath.omega.len() != bath.c.len() {
        violations.push(Violation::LengthMismatch {
            omega: bath.omega.len(),
            c: bath.c.len(),
        });
    }
    if bath.omega.is_empty() {
        violations.push(Violation::Empty);
    }
    for (index, w) in bath.omega.iter().enumerate() {
        if !w.is_finite() {
            violations.push(Violation::NonFinite { index });
        } else if *w <= 0.0 {
            violations.push(Violation::NonPositiveFrequency { index, value: *w });
        }
    }
    for (index, pair) in bath.omega.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let scale = a.abs().max(b.abs());
        if (b - a).abs() <= DUPLICATE_TOLERANCE * scale {
            violations.push(Violation::DuplicateFrequency {
                index: index + 1,
                value: b,
            });
        } else if b < a {
            violations.push(Violation::NotIncreasing { index: index + 1 });
        }
    }
    for (index, c) in bath.c.iter().enumerate() {
        if !c.is_finite() {
            violations.push(Violation::NonFinite { index });
        } else if *c == 0.0 {
            violations.push(Violation::ZeroCoupling { index });
        }
    }
    ValidationReport { violations }
}

// ---------------------------------------------------------------------------
// Spectral densities

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpectralKind {
    /// `J(ω) = coupling_scale · ω · exp(-ω / cutoff)`.
    OhmicExponentialCutoff,
    /// Frequencies and couplings given verbatim.
    UserTable { omega: Vec<f64>, c: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyGrid {
    Linear,
    Logarithmic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensitySpec {
    pub kind: SpectralKind,
    pub coupling_scale: f64,
    pub cutoff: f64,
    pub n_modes: usize,
    pub grid: FrequencyGrid,
}

/// The logarithmic grid starts at this fraction of the upper edge `4·cutoff`.
pub const LOG_GRID_LOWER_FRACTION: f64 = 1e-3;

impl SpectralDensitySpec {
    pub fn ohmic(coupling_scale: f64, cutoff: f64, n_modes: usize, grid: FrequencyGrid) -> Self {
        Self {
            kind: SpectralKind::OhmicExponentialCutoff,
            coupling_scale,
            cutoff,
            n_modes,
            grid,
        }
    }

    pub fn density(&self, omega: f64) -> f64 {
        self.coupling_scale * omega * (-omega / self.cutoff).exp()
    }
}

/// Discretizes a spectral density into a finite bath.
///
/// Cells tile `(0, 4·cutoff]` (linear) or `[4·cutoff·1e-3, 4·cutoff]`
/// (logarithmic); each mode sits on the right edge of its cell and carries
/// `c_k² = (2/π) J(ω_k) ω_k Δω_k`.
pub fn discretize_spectral_density(spec: &SpectralDensitySpec) -> Result<IoBath, BathError> {
    if let SpectralKind::UserTable { omega, c } = &spec.kind {
        return IoBath::new(omega.clone(), c.clone());
    }
    if spec.n_modes == 0 {
        return Err(BathError::ZeroModes);
    }
    if !(spec.cutoff.is_finite() && spec.cutoff > 0.0) {
        return Err(BathError::InvalidSpec(format!(
            "cutoff must be positive, got {}",
            spec.cutoff
        )));
    }
    if !(spec.coupling_scale.is_finite() && spec.coupling_scale > 0.0) {
        return Err(BathError::InvalidSpec(format!(
            "coupling_scale must be positive, got {}",
            spec.coupling_scale
        )));
    }
    let n = spec.n_modes;
    let top = 4.0 * spec.cutoff;
    let edges: Vec<f64> = match spec.grid {
        FrequencyGrid::Linear => (0..=n).map(|k| top * k as f64 / n as f64).collect(),
        FrequencyGrid::Logarithmic => {
            let lo = top * LOG_GRID_LOWER_FRACTION;
            let ratio = (top / lo).ln();
            (0..=n)
                .map(|k| {
                    if k == n {
                        top
                    } else {
                        lo * (ratio * k as f64 / n as f64).exp()
                    }
                })
                .collect()
        }
    };
    let (omega, c): (Vec<f64>, Vec<f64>) = edges
        .windows(2)
        .map(|cell| {
            let w = cell[1];
            let width = cell[1] - cell[0];
            let c_sq = 2.0 / PI * spec.density(w) * w * width;
            (w, c_sq.sqrt())
        })
        .unzip();
    IoBath::new(omega, c)
}

// ---------------------------------------------------------------------------
// Stability

/// Potential-energy matrix of the full system, ordered `(x, q_1, …, q_N)`.
pub fn quadratic_form(bath: &IoBath, sys: &SystemOscillator) -> DMatrix<f64> {
    let n = bath.len();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a[(0, 0)] = sys.omega * sys.omega;
    for k in 0..n {
        a[(0, k + 1)] = -bath.c[k];
        a[(k + 1, 0)] = -bath.c[k];
        a[(k + 1, k + 1)] = bath.omega[k] * bath.omega[k];
    }
    a
}

/// Smallest eigenvalue of [`quadratic_form`].
pub fn smallest_mode(bath: &IoBath, sys: &SystemOscillator) -> f64 {
    SymmetricEigen::new(quadratic_form(bath, sys))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// True iff the full quadratic form is positive semi-definite, i.e. the
/// motion stays bounded.
pub fn stability_check(bath: &IoBath, sys: &SystemOscillator) -> bool {
    smallest_mode(bath, sys) >= STABILITY_TOLERANCE
}
