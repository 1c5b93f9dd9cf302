//! Star-to-chain mapping of independent-oscillator baths and exact
//! non-Markovian dynamics of a harmonic tracer.
//!
//! The pipeline runs bath → chain (inverse eigenvalue problem) → nested
//! memory kernels → forcing `F_N` → closed-form resolvent solution, with
//! direct ODE integration and the generalized Langevin equation as
//! independent checks.
//!
//! ```
//! use chainbath::*;
//!
//! let bath = IoBath::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
//! let sys = SystemOscillator::new(1.5).unwrap();
//! let (chain, transform) = solve_iep(&bath).unwrap();
//!
//! let phase = PhaseState::new(1.0, 0.0, vec![0.1, -0.2], vec![0.0, 0.3]).unwrap();
//! let modes = map_state(&transform, &phase).unwrap();
//! let phase = ChainPhase { x0: 1.0, v0: 0.0, modes };
//!
//! let cfg = IntegratorConfig::new(1e-3, 5.0, IntegratorMethod::Rk4).unwrap();
//! let sol = exact_from_chain(&sys, &chain, &phase, &cfg, Quadrature::EndCorrected).unwrap();
//! let x = sol.x.unwrap();
//! assert!(x.max_abs_diff(&sol.ode.x) < 1e-6);
//! ```

pub mod bath;
pub mod chain;
pub mod dynamics;
pub mod error;
pub mod gle;
pub mod grid;
pub mod kernel;
pub mod quadrature;

pub use bath::{
    discretize_spectral_density, stability_check, validate_bath, FrequencyGrid, IoBath, PhaseState,
    SpectralDensitySpec, SpectralKind, SystemOscillator, ValidationReport, Violation,
};
pub use chain::{
    chain_spectrum, charpoly_sequence, map_state, solve_iep, transform_from_polynomials,
    unmap_state, ChainBath, ChainState, ChainTransform,
};
pub use dynamics::{
    exact_from_chain, integrate_chain, integrate_io, resolvent_params, solve_exact, solve_volterra,
    ExactSolution, IntegratorConfig, IntegratorMethod, OdeSolution, ResolventParams,
};
pub use error::{BathError, DynamicsError, GridError, IepError, KernelError};
pub use gle::{build_gle, gle_residual, CosineTerm, GleComponents};
pub use grid::{TimeGrid, Trajectory};
pub use kernel::{
    accumulate_free_forcing, chain_modes_free, forcing_fn, free_term, kernel_quadrature,
    next_kernel, ChainCoefficients, ChainPhase, Kernel, KernelEngine, KernelLadder, KernelSeries,
};
pub use quadrature::Quadrature;
