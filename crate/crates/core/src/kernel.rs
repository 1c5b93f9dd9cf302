//! Nested memory kernels and the forcing terms of the tracer's integral
//! equation.
//!
//! Substituting the integral form of each chain mode into the tracer
//! equation level by level gives, after `n` substitutions,
//!
//! ```text
//! x(t) = f̃_n(t) + Σ_{i=1}^{n} m_i ∫_0^t K_i(t-s) X_{i-1}(s) ds
//!               + P_n ∫_0^t K_n(t-s) X_{n+1}(s) ds
//! ```
//!
//! with `X_0 = x`, `K_0(τ) = sin(Ωτ)`, `K_i = K_{i-1} * sin(Ω_i ·)`,
//! `P_i = Π_{l=0}^{i} D_l/Ω_l` (`D_0 = D`, `Ω_0 = Ω`) and memory
//! coefficients `m_i = P_{i-1} D_{i-1} / Ω_i`. The last form has the
//! vanishing `D_N` already cancelled.

use serde::{Deserialize, Serialize};

use crate::bath::{IoBath, PhaseState, SystemOscillator};
use crate::chain::{ChainBath, ChainState, ChainTransform};
use crate::error::{GridError, KernelError};
use crate::grid::{TimeGrid, Trajectory};
use crate::quadrature::{convolve, convolve_with_derivative, derivative, Quadrature};

/// Relative separation below which two kernel frequencies clash.
pub const FREQUENCY_CLASH: f64 = 1e-9;

/// Largest `Σ|a_m|` accepted for a closed-form kernel. Beyond it the
/// cancellation between terms costs more digits than the quadrature.
pub const MAX_SERIES_GAIN: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub frequency: f64,
}

/// Kernel written as `K(τ) = Σ a_m sin(ν_m τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSeries {
    pub terms: Vec<SineTerm>,
    pub level: usize,
}

impl KernelSeries {
    /// `K_0(τ) = sin(Ωτ)`.
    pub fn base(omega: f64) -> Self {
        Self {
            terms: vec![SineTerm {
                amplitude: 1.0,
                frequency: omega,
            }],
            level: 0,
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amplitude * (t.frequency * tau).sin())
            .sum()
    }

    pub fn eval_derivative(&self, tau: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.amplitude * t.frequency * (t.frequency * tau).cos())
            .sum()
    }

    /// `Σ |a_m|`, an upper bound on `|K|` and on the cancellation loss.
    pub fn gain(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.abs()).sum()
    }

    pub fn sample(&self, grid: &TimeGrid) -> Trajectory {
        grid.sample(|t| self.eval(t))
    }

    pub fn sample_derivative(&self, grid: &TimeGrid) -> Trajectory {
        grid.sample(|t| self.eval_derivative(t))
    }
}

/// `f_i(t) = X_i(0) cos(Ω_i t) + Ẋ_i(0) sin(Ω_i t)/Ω_i`; free motion
/// `X_i(0) + Ẋ_i(0) t` when `Ω_i = 0`.
pub fn free_term(omega: f64, x0: f64, v0: f64, t: f64) -> f64 {
    if omega == 0.0 {
        x0 + v0 * t
    } else {
        x0 * (omega * t).cos() + v0 * (omega * t).sin() / omega
    }
}

/// Closed form of `K_i(τ) = ∫_0^τ K_{i-1}(τ-u) sin(Ω_i u) du`.
///
/// Each term `a sin(ντ)` becomes
/// `a Ω_i/(Ω_i²-ν²) sin(ντ) - a ν/(Ω_i²-ν²) sin(Ω_i τ)`.
pub fn next_kernel(prev: &KernelSeries, omega_i: f64) -> Result<KernelSeries, KernelError> {
    let level = prev.level + 1;
    if omega_i <= 0.0 {
        return Err(KernelError::ZeroFrequency(omega_i));
    }
    for t in &prev.terms {
        let scale = t.frequency.abs().max(omega_i);
        if (t.frequency - omega_i).abs() <= FREQUENCY_CLASH * scale {
            return Err(KernelError::NearDegenerate {
                level,
                new: omega_i,
                existing: t.frequency,
            });
        }
    }
    let w2 = omega_i * omega_i;
    let mut terms = Vec::with_capacity(prev.terms.len() + 1);
    let mut new_amplitude = 0.0;
    for t in &prev.terms {
        let denom = w2 - t.frequency * t.frequency;
        terms.push(SineTerm {
            amplitude: t.amplitude * omega_i / denom,
            frequency: t.frequency,
        });
        new_amplitude -= t.amplitude * t.frequency / denom;
    }
    terms.push(SineTerm {
        amplitude: new_amplitude,
        frequency: omega_i,
    });
    let next = KernelSeries { terms, level };
    let gain = next.gain();
    if !(gain.is_finite() && gain <= MAX_SERIES_GAIN) {
        return Err(KernelError::IllConditioned { level, gain });
    }
    Ok(next)
}

/// Sampled evaluation of the same convolution, for kernels that have no
/// usable closed form.
pub fn kernel_quadrature(prev: &Trajectory, omega_i: f64, rule: Quadrature) -> Trajectory {
    let sine: Vec<f64> = prev
        .times()
        .map(|t| (omega_i * (t - prev.t0)).sin())
        .collect();
    Trajectory {
        t0: prev.t0,
        dt: prev.dt,
        values: convolve(&prev.values, &sine, prev.dt, rule),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Series(KernelSeries),
    Sampled { level: usize, samples: Trajectory },
}

impl Kernel {
    pub fn level(&self) -> usize {
        match self {
            Kernel::Series(s) => s.level,
            Kernel::Sampled { level, .. } => *level,
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, Kernel::Series(_))
    }
}

/// `K_0 … K_N` together with their samples on a common grid.
#[derive(Debug, Clone)]
pub struct KernelLadder {
    pub kernels: Vec<Kernel>,
    samples: Vec<Trajectory>,
    derivatives: Vec<Trajectory>,
}

impl KernelLadder {
    /// Builds the ladder for frequencies `Ω_0 = Ω, Ω_1, …, Ω_N`. Levels stay in
    /// closed form while [`next_kernel`] succeeds; from the first failure on,
    /// every deeper level is computed by [`kernel_quadrature`].
    pub fn build(
        frequencies: &[f64],
        grid: &TimeGrid,
        rule: Quadrature,
    ) -> Result<Self, KernelError> {
        let (&first, rest) = frequencies
            .split_first()
            .expect("kernel ladder needs at least the tracer frequency");
        if first <= 0.0 {
            return Err(KernelError::ZeroFrequency(first));
        }
        let base = KernelSeries::base(first);
        let mut samples = vec![base.sample(grid)];
        let mut derivatives = vec![base.sample_derivative(grid)];
        let mut kernels = vec![Kernel::Series(base)];
        for (i, &w) in rest.iter().enumerate() {
            if w <= 0.0 {
                return Err(KernelError::ZeroFrequency(w));
            }
            let level = i + 1;
            let next = match &kernels[i] {
                Kernel::Series(prev) => match next_kernel(prev, w) {
                    Ok(series) => Some(series),
                    Err(
                        KernelError::NearDegenerate { .. } | KernelError::IllConditioned { .. },
                    ) => {
                        log::debug!("kernel level {level}: falling back to quadrature");
                        None
                    }
                    Err(e) => return Err(e),
                },
                Kernel::Sampled { .. } => None,
            };
            match next {
                Some(series) => {
                    samples.push(series.sample(grid));
                    derivatives.push(series.sample_derivative(grid));
                    kernels.push(Kernel::Series(series));
                }
                None => {
                    let sampled = kernel_quadrature(&samples[i], w, rule);
                    derivatives.push(Trajectory {
                        values: derivative(&sampled.values, sampled.dt),
                        ..sampled.clone()
                    });
                    samples.push(sampled.clone());
                    kernels.push(Kernel::Sampled {
                        level,
                        samples: sampled,
                    });
                }
            }
        }
        Ok(Self {
            kernels,
            samples,
            derivatives,
        })
    }

    pub fn depth(&self) -> usize {
        self.kernels.len() - 1
    }

    pub fn samples(&self, level: usize) -> &Trajectory {
        &self.samples[level]
    }

    /// `K_i'`, analytic for closed-form levels.
    pub fn derivative_samples(&self, level: usize) -> &Trajectory {
        &self.derivatives[level]
    }
}

/// Level products and memory coefficients of the nested expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCoefficients {
    /// `Ω_0 = Ω, Ω_1, …, Ω_N`.
    pub frequencies: Vec<f64>,
    /// `D_0 = D, D_1, …, D_{N-1}`.
    pub couplings: Vec<f64>,
}

impl ChainCoefficients {
    pub fn new(sys: &SystemOscillator, chain: &ChainBath) -> Result<Self, KernelError> {
        let mut frequencies = vec![sys.omega];
        frequencies.extend(chain.omega());
        if let Some(&w) = frequencies.iter().find(|w| !(**w > 0.0)) {
            return Err(KernelError::ZeroFrequency(w));
        }
        let mut couplings = vec![chain.system_coupling];
        couplings.extend_from_slice(&chain.couplings);
        Ok(Self {
            frequencies,
            couplings,
        })
    }

    pub fn chain_len(&self) -> usize {
        self.frequencies.len() - 1
    }

    /// `P_i = Π_{l=0}^{i} D_l / Ω_l`; zero for `i ≥ N` since `D_N = 0`.
    pub fn prefix(&self, i: usize) -> f64 {
        if i >= self.chain_len() {
            return 0.0;
        }
        (0..=i)
            .map(|l| self.couplings[l] / self.frequencies[l])
            .product()
    }

    /// `m_i = P_{i-1} D_{i-1} / Ω_i` for `1 ≤ i ≤ N`.
    pub fn memory(&self, i: usize) -> f64 {
        assert!(
            i >= 1 && i <= self.chain_len(),
            "memory level {i} out of range"
        );
        self.prefix(i - 1) * self.couplings[i - 1] / self.frequencies[i]
    }
}

/// Tracer and chain-mode initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPhase {
    pub x0: f64,
    pub v0: f64,
    pub modes: ChainState,
}

impl ChainPhase {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x0: self.x0 * factor,
            v0: self.v0 * factor,
            modes: ChainState {
                x0: self.modes.x0.iter().map(|v| v * factor).collect(),
                xdot0: self.modes.xdot0.iter().map(|v| v * factor).collect(),
            },
        }
    }
}

/// Kernels and coefficients for one tracer + chain on one grid.
#[derive(Debug, Clone)]
pub struct KernelEngine {
    pub coefficients: ChainCoefficients,
    pub ladder: KernelLadder,
    pub grid: TimeGrid,
    pub rule: Quadrature,
}

impl KernelEngine {
    pub fn new(
        sys: &SystemOscillator,
        chain: &ChainBath,
        grid: TimeGrid,
        rule: Quadrature,
    ) -> Result<Self, KernelError> {
        let coefficients = ChainCoefficients::new(sys, chain)?;
        let ladder = KernelLadder::build(&coefficients.frequencies, &grid, rule)?;
        Ok(Self {
            coefficients,
            ladder,
            grid,
            rule,
        })
    }

    pub fn chain_len(&self) -> usize {
        self.coefficients.chain_len()
    }

    fn conv(&self, level: usize, signal: &[f64]) -> Vec<f64> {
        convolve_with_derivative(
            &self.ladder.samples(level).values,
            &self.ladder.derivative_samples(level).values,
            signal,
            self.grid.dt,
            self.rule,
        )
    }

    fn check(&self, traj: &Trajectory) -> Result<(), GridError> {
        self.grid.zeros().ensure_same_grid(traj)
    }

    /// `f̃_0, …, f̃_N` with
    /// `f̃_i = f̃_{i-1} + P_{i-1} ∫_0^t K_{i-1}(t-s) f_i(s) ds`.
    pub fn free_forcing_levels(&self, phase: &ChainPhase) -> Result<Vec<Trajectory>, KernelError> {
        let n = self.chain_len();
        if phase.modes.x0.len() != n || phase.modes.xdot0.len() != n {
            return Err(KernelError::ModeCount {
                expected: n,
                got: phase.modes.x0.len().min(phase.modes.xdot0.len()),
            });
        }
        let freqs = &self.coefficients.frequencies;
        let mut current = self
            .grid
            .sample(|t| free_term(freqs[0], phase.x0, phase.v0, t));
        let mut levels = Vec::with_capacity(n + 1);
        levels.push(current.clone());
        for i in 1..=n {
            let (x0, v0) = (phase.modes.x0[i - 1], phase.modes.xdot0[i - 1]);
            if x0 != 0.0 || v0 != 0.0 {
                let f_i: Vec<f64> = self
                    .grid
                    .times()
                    .map(|t| free_term(freqs[i], x0, v0, t))
                    .collect();
                current.add_scaled(self.coefficients.prefix(i - 1), &self.conv(i - 1, &f_i));
            }
            levels.push(current.clone());
        }
        Ok(levels)
    }

    /// `F_N = f̃_N + Σ_{i=2}^{N} m_i ∫_0^t K_i(t-s) X_{i-1}(s) ds`.
    pub fn forcing(
        &self,
        ftilde: &Trajectory,
        modes: &[Trajectory],
    ) -> Result<Trajectory, KernelError> {
        let n = self.chain_len();
        if modes.len() != n {
            return Err(KernelError::ModeCount {
                expected: n,
                got: modes.len(),
            });
        }
        self.check(ftilde)?;
        let mut out = ftilde.clone();
        for i in 2..=n {
            let mode = &modes[i - 2];
            self.check(mode)?;
            out.add_scaled(self.coefficients.memory(i), &self.conv(i, &mode.values));
        }
        Ok(out)
    }

    /// Right-hand side of the level-`n` expansion evaluated with given
    /// trajectories of `x` and `X_1 … X_N`. Every `n` reproduces `x` exactly
    /// in the continuum.
    pub fn truncated_expansion(
        &self,
        n: usize,
        free_levels: &[Trajectory],
        x: &Trajectory,
        modes: &[Trajectory],
    ) -> Result<Trajectory, KernelError> {
        let len = self.chain_len();
        assert!(n >= 1 && n <= len, "expansion level {n} out of range");
        if modes.len() != len {
            return Err(KernelError::ModeCount {
                expected: len,
                got: modes.len(),
            });
        }
        self.check(x)?;
        let signal = |j: usize| if j == 0 { x } else { &modes[j - 1] };
        let mut out = free_levels[n].clone();
        for i in 1..=n {
            out.add_scaled(
                self.coefficients.memory(i),
                &self.conv(i, &signal(i - 1).values),
            );
        }
        if n < len {
            out.add_scaled(
                self.coefficients.prefix(n),
                &self.conv(n, &signal(n + 1).values),
            );
        }
        Ok(out)
    }
}

/// `f̃_N` on `grid`.
pub fn accumulate_free_forcing(
    sys: &SystemOscillator,
    chain: &ChainBath,
    phase: &ChainPhase,
    grid: TimeGrid,
    rule: Quadrature,
) -> Result<Trajectory, KernelError> {
    let engine = KernelEngine::new(sys, chain, grid, rule)?;
    let mut levels = engine.free_forcing_levels(phase)?;
    Ok(levels.pop().expect("at least f̃_0"))
}

/// `F_N` from `f̃_N` and trajectories of `X_1 … X_N`.
pub fn forcing_fn(
    sys: &SystemOscillator,
    chain: &ChainBath,
    modes: &[Trajectory],
    ftilde: &Trajectory,
    rule: Quadrature,
) -> Result<Trajectory, KernelError> {
    let engine = KernelEngine::new(sys, chain, ftilde.grid(), rule)?;
    engine.forcing(ftilde, modes)
}

/// Chain modes built from the free motion of the bath oscillators,
/// `X_j(s) = Σ_k O_{jk} [q_k(0) cos ω_k s + q̇_k(0) sin(ω_k s)/ω_k]`.
pub fn chain_modes_free(
    transform: &ChainTransform,
    bath: &IoBath,
    phase: &PhaseState,
    grid: &TimeGrid,
) -> Result<Vec<Trajectory>, KernelError> {
    let n = bath.len();
    if transform.dim() != n || phase.q0.len() != n || phase.qdot0.len() != n {
        return Err(KernelError::ModeCount {
            expected: n,
            got: phase.q0.len(),
        });
    }
    let free: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            grid.times()
                .map(|t| free_term(bath.omega[k], phase.q0[k], phase.qdot0[k], t))
                .collect()
        })
        .collect();
    Ok((0..n)
        .map(|j| {
            let mut traj = grid.zeros();
            for (k, q) in free.iter().enumerate() {
                traj.add_scaled(transform.o[(j, k)], q);
            }
            traj
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_term_examples() {
        for t in [0.0, 0.3, 2.0] {
            assert_eq!(free_term(1.7, 1.0, 0.0, t), (1.7 * t).cos());
            assert_eq!(free_term(1.7, 0.0, 0.0, t), 0.0);
        }
        assert!((free_term(1.0, 0.0, 1.0, PI / 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(free_term(0.0, 2.0, 3.0, 1.5), 6.5);
    }

    #[test]
    fn first_kernel_matches_two_sine_form() {
        // K_1 = [Ω_1 sin(Ωτ) - Ω sin(Ω_1 τ)] / (Ω_1² - Ω²) with Ω = 2, Ω_1 = 1.
        let k1 = next_kernel(&KernelSeries::base(2.0), 1.0).unwrap();
        assert_eq!(k1.level, 1);
        assert_eq!(k1.terms.len(), 2);
        assert!((k1.terms[0].frequency - 2.0).abs() < 1e-15);
        assert!((k1.terms[0].amplitude - 1.0 / (1.0 - 4.0)).abs() < 1e-14);
        assert!((k1.terms[1].frequency - 1.0).abs() < 1e-15);
        assert!((k1.terms[1].amplitude - (-2.0) / (1.0 - 4.0)).abs() < 1e-14);

        assert!(k1.eval(PI).abs() < 1e-14);
        // Leading Taylor term Ω Ω_1 τ³ / 6.
        let tau = 1e-3;
        assert!((k1.eval(tau) / tau.powi(3) - 2.0 / 6.0).abs() < 1e-4);
    }

    #[test]
    fn clashing_frequency_is_rejected() {
        let base = KernelSeries::base(1.5);
        assert!(matches!(
            next_kernel(&base, 1.5 * (1.0 + 1e-11)),
            Err(KernelError::NearDegenerate { level: 1, .. })
        ));
        assert!(matches!(
            next_kernel(&base, 1.5 * (1.0 + 1e-7)),
            Err(KernelError::IllConditioned { level: 1, .. })
        ));
    }

    #[test]
    fn quadrature_of_zero_kernel_is_zero() {
        let grid = TimeGrid::new(0.01, 200).unwrap();
        let out = kernel_quadrature(&grid.zeros(), 1.3, Quadrature::Trapezoid);
        assert!(out.max_abs() < 1e-14);
    }

    #[test]
    fn ladder_falls_back_on_degenerate_chain() {
        // The two-mode golden chain has Ω_1 = Ω_2.
        let chain = ChainBath {
            omega_sq: vec![2.5, 2.5],
            couplings: vec![1.5],
            system_coupling: 2f64.sqrt(),
        };
        let sys = SystemOscillator::new(3.0).unwrap();
        let grid = TimeGrid::covering(1e-3, 5.0).unwrap();
        let engine = KernelEngine::new(&sys, &chain, grid, Quadrature::EndCorrected).unwrap();
        assert!(engine.ladder.kernels[1].is_closed_form());
        assert!(!engine.ladder.kernels[2].is_closed_form());
        // Compare with the confluent closed form of K_1 * sin(w ·) with K_1
        // already containing sin(w τ): integrate by brute-force Simpson.
        let k1 = match &engine.ladder.kernels[1] {
            Kernel::Series(s) => s.clone(),
            _ => unreachable!(),
        };
        let w = 2.5f64.sqrt();
        let tau = 4.0;
        let m = 20_000;
        let h = tau / m as f64;
        let f = |u: f64| k1.eval(tau - u) * (w * u).sin();
        let mut simpson = f(0.0) + f(tau);
        for j in 1..m {
            simpson += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
        }
        simpson *= h / 3.0;
        let idx = (tau / 1e-3).round() as usize;
        assert!((engine.ladder.samples(2).values[idx] - simpson).abs() < 1e-9);
    }

    #[test]
    fn coefficients_cancel_the_missing_coupling() {
        let chain = ChainBath {
            omega_sq: vec![1.0, 4.0],
            couplings: vec![0.5],
            system_coupling: 0.3,
        };
        let c = ChainCoefficients::new(&SystemOscillator::new(3.0).unwrap(), &chain).unwrap();
        assert!((c.prefix(0) - 0.1).abs() < 1e-16);
        assert!((c.prefix(1) - 0.1 * 0.5).abs() < 1e-16);
        assert_eq!(c.prefix(2), 0.0);
        assert!((c.memory(1) - 0.3 * 0.3 / (3.0 * 1.0)).abs() < 1e-16);
        // D D_1² / (Ω Ω_1 Ω_2)
        assert!((c.memory(2) - 0.3 * 0.25 / (3.0 * 1.0 * 2.0)).abs() < 1e-16);
    }
}
