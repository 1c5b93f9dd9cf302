//! Tracer trajectories: direct integration of both models, the Volterra
//! equation `x = m_1 K_1 * x + F_N` and its closed-form resolvent solution.

use serde::{Deserialize, Serialize};

use crate::bath::{stability_check, IoBath, PhaseState, SystemOscillator};
use crate::chain::ChainBath;
use crate::error::DynamicsError;
use crate::grid::{TimeGrid, Trajectory};
use crate::kernel::{kernel_quadrature, next_kernel, ChainPhase, KernelEngine, KernelSeries};
use crate::quadrature::{convolve_with_derivative, derivative, Quadrature};

/// Largest number of integration steps accepted.
pub const MAX_STEPS: f64 = 1e8;

/// `|x|` beyond which an integration is declared unstable.
pub const INSTABILITY_THRESHOLD: f64 = 1e12;

/// Relative separation below which `μ1` and `μ2` count as equal.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorMethod {
    Rk4,
    #[default]
    VelocityVerlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: IntegratorMethod,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64, method: IntegratorMethod) -> Result<Self, DynamicsError> {
        let cfg = Self { dt, t_end, method };
        cfg.grid()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<TimeGrid, DynamicsError> {
        let steps = self.t_end / self.dt;
        if steps.is_finite() && steps > MAX_STEPS {
            return Err(DynamicsError::TooManySteps(steps));
        }
        Ok(TimeGrid::covering(self.dt, self.t_end)?)
    }
}

/// Stiffness of `ÿ = -A y` in one of the two sparse shapes that occur.
#[derive(Debug, Clone, PartialEq)]
enum Stiffness {
    /// Tracer (index 0) coupled to every other coordinate:
    /// `ÿ_0 = -a_0 y_0 + Σ g_k y_k`, `ÿ_k = -a_k y_k + g_k y_0`.
    Star { diag: Vec<f64>, coupling: Vec<f64> },
    /// Nearest neighbours: `ÿ_j = -a_j y_j + g_{j-1} y_{j-1} + g_j y_{j+1}`.
    Chain { diag: Vec<f64>, coupling: Vec<f64> },
}

impl Stiffness {
    fn dim(&self) -> usize {
        match self {
            Stiffness::Star { diag, .. } | Stiffness::Chain { diag, .. } => diag.len(),
        }
    }

    fn acceleration(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Stiffness::Star { diag, coupling } => {
                let mut a0 = -diag[0] * y[0];
                for (k, g) in coupling.iter().enumerate() {
                    a0 += g * y[k + 1];
                    out[k + 1] = -diag[k + 1] * y[k + 1] + g * y[0];
                }
                out[0] = a0;
            }
            Stiffness::Chain { diag, coupling } => {
                for j in 0..diag.len() {
                    out[j] = -diag[j] * y[j];
                }
                for (j, g) in coupling.iter().enumerate() {
                    out[j] += g * y[j + 1];
                    out[j + 1] += g * y[j];
                }
            }
        }
    }

    fn potential(&self, y: &[f64]) -> f64 {
        let (diag, cross) = match self {
            Stiffness::Star { diag, coupling } => (
                diag,
                coupling
                    .iter()
                    .enumerate()
                    .map(|(k, g)| g * y[0] * y[k + 1])
                    .sum::<f64>(),
            ),
            Stiffness::Chain { diag, coupling } => (
                diag,
                coupling
                    .iter()
                    .enumerate()
                    .map(|(j, g)| g * y[j] * y[j + 1])
                    .sum::<f64>(),
            ),
        };
        let on: f64 = diag.iter().zip(y).map(|(a, v)| a * v * v).sum();
        0.5 * on - cross
    }

    fn energy(&self, y: &[f64], v: &[f64]) -> f64 {
        0.5 * v.iter().map(|u| u * u).sum::<f64>() + self.potential(y)
    }
}

/// Output of a direct integration.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub x: Trajectory,
    /// Bath coordinates `q_k` or chain coordinates `X_j`.
    pub modes: Vec<Trajectory>,
    /// Total energy at every grid point.
    pub energy: Vec<f64>,
    /// Positions at `t_end`, tracer first.
    pub final_positions: Vec<f64>,
    /// Velocities at `t_end`, tracer first.
    pub final_velocities: Vec<f64>,
}

impl OdeSolution {
    /// `max_t |E(t) - E(0)| / |E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        let scale = if e0.abs() > 0.0 { e0.abs() } else { 1.0 };
        self.energy
            .iter()
            .fold(0.0_f64, |m, e| m.max((e - e0).abs()))
            / scale
    }
}

fn integrate(
    stiffness: &Stiffness,
    y0: Vec<f64>,
    v0: Vec<f64>,
    cfg: &IntegratorConfig,
) -> Result<OdeSolution, DynamicsError> {
    let grid = cfg.grid()?;
    let n = stiffness.dim();
    if y0.len() != n || v0.len() != n {
        return Err(DynamicsError::Dimension {
            expected: n,
            got: y0.len().min(v0.len()),
        });
    }
    let dt = grid.dt;
    let mut y = y0;
    let mut v = v0;
    let mut samples: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(grid.len)).collect();
    let mut energy = Vec::with_capacity(grid.len);
    let record = |y: &[f64], samples: &mut Vec<Vec<f64>>| {
        for (s, value) in samples.iter_mut().zip(y) {
            s.push(*value);
        }
    };
    record(&y, &mut samples);
    energy.push(stiffness.energy(&y, &v));

    let mut acc = vec![0.0; n];
    stiffness.acceleration(&y, &mut acc);
    // RK4 stage buffers.
    let mut ky = vec![vec![0.0; n]; 4];
    let mut kv = vec![vec![0.0; n]; 4];
    let mut tmp = vec![0.0; n];

    for step in 1..grid.len {
        match cfg.method {
            IntegratorMethod::VelocityVerlet => {
                for i in 0..n {
                    v[i] += 0.5 * dt * acc[i];
                    y[i] += dt * v[i];
                }
                stiffness.acceleration(&y, &mut acc);
                for i in 0..n {
                    v[i] += 0.5 * dt * acc[i];
                }
            }
            IntegratorMethod::Rk4 => {
                let fractions = [0.0, 0.5, 0.5, 1.0];
                for stage in 0..4 {
                    let h = fractions[stage] * dt;
                    let (ys, vs): (Vec<f64>, Vec<f64>) = if stage == 0 {
                        (y.clone(), v.clone())
                    } else {
                        (
                            (0..n).map(|i| y[i] + h * ky[stage - 1][i]).collect(),
                            (0..n).map(|i| v[i] + h * kv[stage - 1][i]).collect(),
                        )
                    };
                    stiffness.acceleration(&ys, &mut tmp);
                    ky[stage].copy_from_slice(&vs);
                    kv[stage].copy_from_slice(&tmp);
                }
                for i in 0..n {
                    y[i] += dt / 6.0 * (ky[0][i] + 2.0 * ky[1][i] + 2.0 * ky[2][i] + ky[3][i]);
                    v[i] += dt / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
                }
            }
        }
        if !(y[0].abs() <= INSTABILITY_THRESHOLD) {
            return Err(DynamicsError::Unstable {
                time: grid.time(step),
                value: y[0].abs(),
            });
        }
        record(&y, &mut samples);
        energy.push(stiffness.energy(&y, &v));
    }

    let mut trajectories = samples.into_iter().map(|values| Trajectory {
        t0: 0.0,
        dt,
        values,
    });
    let x = trajectories.next().expect("tracer coordinate");
    Ok(OdeSolution {
        x,
        modes: trajectories.collect(),
        energy,
        final_positions: y,
        final_velocities: v,
    })
}

/// Integrates `ẍ = -Ω²x + Σ c_k q_k`, `q̈_k = -ω_k² q_k + c_k x`.
pub fn integrate_io(
    bath: &IoBath,
    sys: &SystemOscillator,
    phase: &PhaseState,
    cfg: &IntegratorConfig,
) -> Result<OdeSolution, DynamicsError> {
    if phase.q0.len() != bath.len() || phase.qdot0.len() != bath.len() {
        return Err(DynamicsError::Dimension {
            expected: bath.len(),
            got: phase.q0.len().min(phase.qdot0.len()),
        });
    }
    if !stability_check(bath, sys) {
        log::warn!("quadratic form is not positive semi-definite; the motion may grow");
    }
    let mut diag = vec![sys.omega * sys.omega];
    diag.extend(bath.omega_sq());
    let stiffness = Stiffness::Star {
        diag,
        coupling: bath.c.clone(),
    };
    let mut y0 = vec![phase.x0];
    y0.extend_from_slice(&phase.q0);
    let mut v0 = vec![phase.v0];
    v0.extend_from_slice(&phase.qdot0);
    integrate(&stiffness, y0, v0, cfg)
}

/// Integrates `ẍ = -Ω²x + D X_1`,
/// `Ẍ_j = -Ω_j² X_j + D_{j-1} X_{j-1} + D_j X_{j+1}` (`X_0 = x`, `D_0 = D`).
pub fn integrate_chain(
    chain: &ChainBath,
    sys: &SystemOscillator,
    phase: &ChainPhase,
    cfg: &IntegratorConfig,
) -> Result<OdeSolution, DynamicsError> {
    let n = chain.len();
    if phase.modes.x0.len() != n || phase.modes.xdot0.len() != n {
        return Err(DynamicsError::Dimension {
            expected: n,
            got: phase.modes.x0.len().min(phase.modes.xdot0.len()),
        });
    }
    let mut diag = vec![sys.omega * sys.omega];
    diag.extend_from_slice(&chain.omega_sq);
    let mut coupling = vec![chain.system_coupling];
    coupling.extend_from_slice(&chain.couplings);
    let stiffness = Stiffness::Chain { diag, coupling };
    let mut y0 = vec![phase.x0];
    y0.extend_from_slice(&phase.modes.x0);
    let mut v0 = vec![phase.v0];
    v0.extend_from_slice(&phase.modes.xdot0);
    integrate(&stiffness, y0, v0, cfg)
}

/// Frequencies of the resolvent of `x = m_1 K_1 * x + F_N`.
///
/// `μ1², μ2²` are the roots of `(μ² - Ω²)(μ² - Ω_1²) = D²`, so that
/// `Δ = (Ω² - Ω_1²)² + 4D²` and `μ1² μ2² = Ω² Ω_1² - D²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventParams {
    pub mu1: f64,
    pub mu2: f64,
    pub delta: f64,
    /// `D²`.
    pub coupling_sq: f64,
}

impl ResolventParams {
    pub fn from_parts(omega: f64, omega_1: f64, d: f64) -> Result<Self, DynamicsError> {
        let (w2, w12, d2) = (omega * omega, omega_1 * omega_1, d * d);
        let delta = (w2 - w12).powi(2) + 4.0 * d2;
        let mu1_sq = 0.5 * (w2 + w12 + delta.sqrt());
        // Product form avoids the cancellation in (w2 + w12 - √Δ)/2.
        let mu2_sq = (w2 * w12 - d2) / mu1_sq;
        if !(mu2_sq > 0.0) {
            return Err(DynamicsError::MultiValued { delta, mu2_sq });
        }
        let (mu1, mu2) = (mu1_sq.sqrt(), mu2_sq.sqrt());
        if mu1 - mu2 <= DEGENERACY_TOLERANCE * mu1 {
            return Err(DynamicsError::DegenerateResolvent { mu: mu1 });
        }
        Ok(Self {
            mu1,
            mu2,
            delta,
            coupling_sq: d2,
        })
    }

    /// `R(τ) = D²/(μ1 μ2 (μ2² - μ1²)) (μ2 sin μ1τ - μ1 sin μ2τ)`.
    pub fn kernel(&self, tau: f64) -> f64 {
        let (m1, m2) = (self.mu1, self.mu2);
        let prefactor = self.coupling_sq / (m1 * m2 * (m2 * m2 - m1 * m1));
        prefactor * (m2 * (m1 * tau).sin() - m1 * (m2 * tau).sin())
    }

    pub fn kernel_derivative(&self, tau: f64) -> f64 {
        let (m1, m2) = (self.mu1, self.mu2);
        let prefactor = self.coupling_sq / (m1 * m2 * (m2 * m2 - m1 * m1));
        prefactor * m1 * m2 * ((m1 * tau).cos() - (m2 * tau).cos())
    }

    pub fn swapped(&self) -> Self {
        Self {
            mu1: self.mu2,
            mu2: self.mu1,
            ..*self
        }
    }
}

pub fn resolvent_params(
    sys: &SystemOscillator,
    chain: &ChainBath,
) -> Result<ResolventParams, DynamicsError> {
    let omega_1 = chain
        .omega_sq
        .first()
        .ok_or(DynamicsError::Dimension {
            expected: 1,
            got: 0,
        })?
        .sqrt();
    ResolventParams::from_parts(sys.omega, omega_1, chain.system_coupling)
}

/// `x(t) = F_N(t) + ∫_0^t R(t-s) F_N(s) ds`.
pub fn solve_exact(forcing: &Trajectory, params: &ResolventParams, rule: Quadrature) -> Trajectory {
    let kernel: Vec<f64> = (0..forcing.len())
        .map(|n| params.kernel(n as f64 * forcing.dt))
        .collect();
    let dkernel: Vec<f64> = (0..forcing.len())
        .map(|n| params.kernel_derivative(n as f64 * forcing.dt))
        .collect();
    let mut x = forcing.clone();
    x.add_scaled(
        1.0,
        &convolve_with_derivative(&kernel, &dkernel, &forcing.values, forcing.dt, rule),
    );
    x
}

/// Marches `x(t) = m_1 ∫_0^t K_1(t-s) x(s) ds + F_N(t)` forward on the grid
/// of `forcing`, with `m_1 = D²/(Ω Ω_1)`.
///
/// `K_1(0) = K_1'(0) = 0`, so every step is explicit. With a closed-form
/// `K_1` the history sums are carried as running sums (linear cost).
pub fn solve_volterra(
    forcing: &Trajectory,
    sys: &SystemOscillator,
    chain: &ChainBath,
    rule: Quadrature,
) -> Result<Trajectory, DynamicsError> {
    let engine_grid = forcing.grid();
    let omega_1 = chain
        .omega_sq
        .first()
        .ok_or(DynamicsError::Dimension {
            expected: 1,
            got: 0,
        })?
        .sqrt();
    let d = chain.system_coupling;
    if d == 0.0 {
        return Ok(forcing.clone());
    }
    let m1 = d * d / (sys.omega * omega_1);
    let dt = forcing.dt;
    let f = &forcing.values;
    let len = f.len();
    let corrected = rule == Quadrature::EndCorrected && len >= 3;
    let df0 = derivative(f, dt)[0];
    let end = |k: f64, dk: f64, x0: f64| {
        if corrected {
            dt * dt / 12.0 * (-dk * x0 + k * df0)
        } else {
            0.0
        }
    };

    let base = KernelSeries::base(sys.omega);
    let mut x = vec![0.0; len];
    x[0] = f[0];
    match next_kernel(&base, omega_1) {
        Ok(k1) => {
            let mut c = vec![0.0; k1.terms.len()];
            let mut s = vec![0.0; k1.terms.len()];
            for n in 1..len {
                let j = n - 1;
                let tj = j as f64 * dt;
                let w = if j == 0 { 0.5 } else { 1.0 };
                for (m, term) in k1.terms.iter().enumerate() {
                    let phase = term.frequency * tj;
                    c[m] += w * x[j] * phase.cos();
                    s[m] += w * x[j] * phase.sin();
                }
                let tn = n as f64 * dt;
                let history: f64 = k1
                    .terms
                    .iter()
                    .enumerate()
                    .map(|(m, term)| {
                        let phase = term.frequency * tn;
                        term.amplitude * (phase.sin() * c[m] - phase.cos() * s[m])
                    })
                    .sum();
                let integral = dt * history + end(k1.eval(tn), k1.eval_derivative(tn), x[0]);
                x[n] = f[n] + m1 * integral;
            }
        }
        Err(_) => {
            log::debug!("first kernel has no usable closed form; marching with samples");
            let k0 = base.sample(&engine_grid);
            let k = kernel_quadrature(&k0, omega_1, rule).values;
            let dk = derivative(&k, dt);
            for n in 1..len {
                let mut history = 0.5 * k[n] * x[0];
                for j in 1..n {
                    history += k[n - j] * x[j];
                }
                x[n] = f[n] + m1 * (dt * history + end(k[n], dk[n], x[0]));
            }
        }
    }
    Ok(Trajectory {
        t0: forcing.t0,
        dt,
        values: x,
    })
}

/// Results of the production pipeline: chain integration, `F_N` from the
/// integrated chain modes, and the resolvent solution.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub ode: OdeSolution,
    pub free_forcing: Trajectory,
    pub forcing: Trajectory,
    pub params: Result<ResolventParams, DynamicsError>,
    pub x: Option<Trajectory>,
}

pub fn exact_from_chain(
    sys: &SystemOscillator,
    chain: &ChainBath,
    phase: &ChainPhase,
    cfg: &IntegratorConfig,
    rule: Quadrature,
) -> Result<ExactSolution, DynamicsError> {
    let ode = integrate_chain(chain, sys, phase, cfg)?;
    let engine = KernelEngine::new(sys, chain, ode.x.grid(), rule)?;
    let free_forcing = engine
        .free_forcing_levels(phase)?
        .pop()
        .expect("at least the tracer level");
    let forcing = engine.forcing(&free_forcing, &ode.modes)?;
    let params = resolvent_params(sys, chain);
    let x = params.as_ref().ok().map(|p| solve_exact(&forcing, p, rule));
    Ok(ExactSolution {
        ode,
        free_forcing,
        forcing,
        params,
        x,
    })
}
