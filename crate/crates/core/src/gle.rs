//! Generalized Langevin equation of the tracer, used as an independent check.
//!
//! Eliminating the bath coordinates and integrating the response by parts
//! gives
//!
//! ```text
//! ẍ(t) + ∫_0^t η(t-s) ẋ(s) ds + (Ω² - η(0)) x(t) = g(t)
//! η(t) = Σ_k (c_k²/ω_k²) cos(ω_k t)
//! g(t) = Σ_k c_k [q_k(0) cos ω_k t + q̇_k(0) sin(ω_k t)/ω_k] - x(0) η(t)
//! ```
//!
//! The `-η(0) x` term appears because `Ω` already is the renormalized
//! frequency of the equations of motion.

use serde::{Deserialize, Serialize};

use crate::bath::{IoBath, PhaseState, SystemOscillator};
use crate::error::{BathError, GridError};
use crate::grid::{TimeGrid, Trajectory};
use crate::kernel::free_term;
use crate::quadrature::{convolve, derivative, second_derivative, Quadrature};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineTerm {
    pub weight: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GleComponents {
    /// Friction kernel as a cosine sum.
    pub eta: Vec<CosineTerm>,
    /// Noise term for the given initial data.
    pub g: Trajectory,
    /// `Ω² - η(0)`.
    pub stiffness: f64,
}

impl GleComponents {
    pub fn eta_at(&self, t: f64) -> f64 {
        self.eta
            .iter()
            .map(|c| c.weight * (c.frequency * t).cos())
            .sum()
    }

    pub fn eta_zero(&self) -> f64 {
        self.eta.iter().map(|c| c.weight).sum()
    }

    pub fn eta_samples(&self, grid: &TimeGrid) -> Trajectory {
        grid.sample(|t| self.eta_at(t))
    }
}

pub fn build_gle(
    bath: &IoBath,
    sys: &SystemOscillator,
    phase: &PhaseState,
    grid: &TimeGrid,
) -> Result<GleComponents, BathError> {
    phase.ensure_len(bath.len())?;
    let eta: Vec<CosineTerm> = bath
        .omega
        .iter()
        .zip(&bath.c)
        .map(|(w, c)| CosineTerm {
            weight: c * c / (w * w),
            frequency: *w,
        })
        .collect();
    let eta_fn = |t: f64| -> f64 { eta.iter().map(|c| c.weight * (c.frequency * t).cos()).sum() };
    let g = grid.sample(|t| {
        let homogeneous: f64 = (0..bath.len())
            .map(|k| bath.c[k] * free_term(bath.omega[k], phase.q0[k], phase.qdot0[k], t))
            .sum();
        homogeneous - phase.x0 * eta_fn(t)
    });
    let eta_zero: f64 = eta.iter().map(|c| c.weight).sum();
    Ok(GleComponents {
        stiffness: sys.omega * sys.omega - eta_zero,
        eta,
        g,
    })
}

/// `r(t) = ẍ + ∫_0^t η(t-s) ẋ(s) ds + (Ω² - η(0)) x - g`, with
/// finite-difference derivatives and a trapezoidal convolution.
pub fn gle_residual(x: &Trajectory, components: &GleComponents) -> Result<Trajectory, GridError> {
    x.ensure_same_grid(&components.g)?;
    if x.len() < 4 {
        return Err(GridError::TooShort(x.len()));
    }
    let dt = x.dt;
    let acceleration = second_derivative(&x.values, dt);
    let velocity = derivative(&x.values, dt);
    let eta = components.eta_samples(&x.grid());
    let friction = convolve(&eta.values, &velocity, dt, Quadrature::Trapezoid);
    let values = (0..x.len())
        .map(|n| {
            acceleration[n] + friction[n] + components.stiffness * x.values[n]
                - components.g.values[n]
        })
        .collect();
    Ok(Trajectory {
        t0: x.t0,
        dt,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_at_zero() {
        let bath = IoBath::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let sys = SystemOscillator::new(2.0).unwrap();
        let grid = TimeGrid::new(0.01, 10).unwrap();
        let gle = build_gle(&bath, &sys, &PhaseState::tracer_only(0.0, 0.0, 2), &grid).unwrap();
        assert!((gle.eta_zero() - 1.25).abs() < 1e-15);
        assert!((gle.eta_at(0.0) - 1.25).abs() < 1e-15);
        assert_eq!(gle.g.max_abs(), 0.0);
        assert!((gle.stiffness - 2.75).abs() < 1e-15);
    }

    #[test]
    fn decoupled_components_vanish() {
        let bath = IoBath::new(vec![1.0, 3.0], vec![0.0, 0.0]).unwrap();
        let sys = SystemOscillator::new(1.4).unwrap();
        let grid = TimeGrid::covering(1e-3, 5.0).unwrap();
        let phase = PhaseState::new(1.0, 0.5, vec![1.0, -1.0], vec![0.3, 0.2]).unwrap();
        let gle = build_gle(&bath, &sys, &phase, &grid).unwrap();
        assert_eq!(gle.g.max_abs(), 0.0);
        assert_eq!(gle.eta_samples(&grid).max_abs(), 0.0);
        let x = grid.sample(|t| (1.4 * t).cos());
        let r = gle_residual(&x, &gle).unwrap();
        // One-sided end stencil: error ~ 11/12 Ω⁴ dt².
        assert!(r.max_abs() < 1e-5, "{}", r.max_abs());
    }

    #[test]
    fn eta_is_bounded_by_its_origin_value() {
        let bath = IoBath::new(vec![0.5, 1.3, 2.9], vec![0.2, 0.7, 0.4]).unwrap();
        let sys = SystemOscillator::new(2.0).unwrap();
        let grid = TimeGrid::covering(0.01, 50.0).unwrap();
        let gle = build_gle(&bath, &sys, &PhaseState::tracer_only(1.0, 0.0, 3), &grid).unwrap();
        let eta0 = gle.eta_zero();
        for t in grid.times() {
            assert!(gle.eta_at(t).abs() <= eta0 + 1e-15);
            assert_eq!(gle.eta_at(t), gle.eta_at(-t));
        }
    }
}
