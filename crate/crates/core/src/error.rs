use thiserror::Error;

use crate::bath::ValidationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("time step must be finite and positive, got {0}")]
    InvalidStep(f64),
    #[error("a trajectory needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("grid mismatch: (t0, dt, len) {left:?} vs {right:?}")]
    Mismatch {
        left: (f64, f64, usize),
        right: (f64, f64, usize),
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BathError {
    #[error("omega has {omega} entries but c has {c}")]
    LengthMismatch { omega: usize, c: usize },
    #[error("a bath needs at least one mode")]
    Empty,
    #[error("spectral density discretization needs n_modes >= 1")]
    ZeroModes,
    #[error("invalid spectral density spec: {0}")]
    InvalidSpec(String),
    #[error("phase state has {got} bath entries, expected {expected}")]
    PhaseDimension { expected: usize, got: usize },
    #[error("system frequency must be finite and >= 0, got {0}")]
    InvalidSystemFrequency(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IepError {
    #[error("invalid bath: {0}")]
    InvalidBath(ValidationReport),
    #[error("all couplings vanish; the tracer is decoupled from the bath")]
    ZeroCoupling,
    #[error("Lanczos breakdown at step {step}: effective chain length {effective_len}")]
    Breakdown { step: usize, effective_len: usize },
    #[error("polynomial recurrence unstable: |value| = {magnitude:e} at row {row}")]
    Unstable { row: usize, magnitude: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("kernel level {level}: frequency {new} clashes with existing frequency {existing}")]
    NearDegenerate {
        level: usize,
        new: f64,
        existing: f64,
    },
    #[error("kernel level {level}: sine-sum gain {gain:e} too large for a closed form")]
    IllConditioned { level: usize, gain: f64 },
    #[error("frequency {0} must be strictly positive for the integral form")]
    ZeroFrequency(f64),
    #[error("expected {expected} chain trajectories, got {got}")]
    ModeCount { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("unstable motion: |x| = {value:e} at t = {time}")]
    Unstable { time: f64, value: f64 },
    #[error(
        "resolvent frequencies are not real (mu2^2 = {mu2_sq:e}, Delta = {delta:e}); x(t) would be multi-valued"
    )]
    MultiValued { delta: f64, mu2_sq: f64 },
    #[error("degenerate resolvent: mu1 = mu2 = {mu}")]
    DegenerateResolvent { mu: f64 },
    #[error("integration needs {0} steps, more than the 1e8 limit")]
    TooManySteps(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
