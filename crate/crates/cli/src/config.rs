//! Run configuration read from a TOML file.

use std::path::{Path, PathBuf};

use chainbath::{
    discretize_spectral_density, FrequencyGrid, IntegratorConfig, IntegratorMethod, IoBath,
    PhaseState, Quadrature, SpectralDensitySpec, SystemOscillator,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub bath: BathSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega: f64,
}

/// Either explicit `omega`/`c` lists or a `[bath.spectral]` table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub omega: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub spectral: Option<SpectralSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralShape {
    /// `J(ω) = coupling_scale · ω · exp(-ω / cutoff)`.
    Ohmic,
}

fn linear_grid() -> FrequencyGrid {
    FrequencyGrid::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    pub kind: SpectralShape,
    pub coupling_scale: f64,
    pub cutoff: f64,
    pub n_modes: usize,
    #[serde(default = "linear_grid")]
    pub grid: FrequencyGrid,
}

fn one() -> f64 {
    1.0
}

/// Initial data. Bath arrays that are not given are drawn from a seeded
/// generator when a seed is present and are zero otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub v0: f64,
    pub q0: Option<Vec<f64>>,
    pub qdot0: Option<Vec<f64>>,
    pub seed: Option<u64>,
    /// Standard deviation of `ω_k q_k(0)` and `q̇_k(0)` for seeded draws.
    #[serde(default = "one")]
    pub amplitude: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            x0: 0.0,
            v0: 0.0,
            q0: None,
            qdot0: None,
            seed: None,
            amplitude: 1.0,
        }
    }
}

fn default_dt() -> f64 {
    1e-3
}

fn default_t_end() -> f64 {
    10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub method: IntegratorMethod,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_end: default_t_end(),
            method: IntegratorMethod::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    #[default]
    Exact,
    Volterra,
    OdeIo,
    OdeChain,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Exact => "exact",
            Solver::Volterra => "volterra",
            Solver::OdeIo => "ode-io",
            Solver::OdeChain => "ode-chain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub quadrature: Quadrature,
}

/// Validated model inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub bath: IoBath,
    pub sys: SystemOscillator,
    pub phase: PhaseState,
    pub integrator: IntegratorConfig,
    pub quadrature: Quadrature,
    pub solver: Solver,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn output_dir(&self, cli_override: Option<&Path>) -> PathBuf {
        cli_override
            .map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn build_bath(&self) -> Result<IoBath, CliError> {
        let b = &self.bath;
        match (&b.omega, &b.c, &b.spectral) {
            (Some(omega), Some(c), None) => {
                if omega.len() != c.len() {
                    return Err(CliError::Config(format!(
                        "bath.omega has {} entries but bath.c has {}",
                        omega.len(),
                        c.len()
                    )));
                }
                Ok(IoBath::new(omega.clone(), c.clone())?)
            }
            (None, None, Some(s)) => {
                let spec =
                    SpectralDensitySpec::ohmic(s.coupling_scale, s.cutoff, s.n_modes, s.grid);
                discretize_spectral_density(&spec)
                    .map_err(|e| CliError::Config(format!("bath.spectral: {e}")))
            }
            (Some(_), None, _) | (None, Some(_), _) => Err(CliError::Config(
                "bath needs both `omega` and `c`".to_string(),
            )),
            (Some(_), Some(_), Some(_)) => Err(CliError::Config(
                "bath: give either `omega`/`c` or [bath.spectral], not both".to_string(),
            )),
            (None, None, None) => Err(CliError::Config(
                "bath: missing `omega`/`c` or [bath.spectral]".to_string(),
            )),
        }
    }

    fn build_phase(&self, bath: &IoBath, seed: Option<u64>) -> Result<PhaseState, CliError> {
        let init = &self.initial;
        let n = bath.len();
        for (name, values) in [("q0", &init.q0), ("qdot0", &init.qdot0)] {
            if let Some(v) = values {
                if v.len() != n {
                    return Err(CliError::Config(format!(
                        "initial.{name} has {} entries, the bath has {n} modes",
                        v.len()
                    )));
                }
            }
        }
        let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
        let mut draw = |scale: &dyn Fn(usize) -> f64| -> Vec<f64> {
            match rng.as_mut() {
                Some(rng) => (0..n)
                    .map(|k| {
                        let z: f64 = StandardNormal.sample(rng);
                        init.amplitude * z * scale(k)
                    })
                    .collect(),
                None => vec![0.0; n],
            }
        };
        let q0 = match &init.q0 {
            Some(v) => v.clone(),
            None => draw(&|k| 1.0 / bath.omega[k]),
        };
        let qdot0 = match &init.qdot0 {
            Some(v) => v.clone(),
            None => draw(&|_| 1.0),
        };
        Ok(PhaseState::new(init.x0, init.v0, q0, qdot0)?)
    }

    /// Checks every section and builds the model inputs. `seed_override`
    /// replaces `initial.seed`.
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<Resolved, CliError> {
        let sys = SystemOscillator::new(self.system.omega)
            .map_err(|e| CliError::Config(format!("system.omega: {e}")))?;
        let bath = self.build_bath()?;
        let seed = seed_override.or(self.initial.seed);
        let phase = self.build_phase(&bath, seed)?;
        let i = &self.integrator;
        if !(i.dt.is_finite() && i.dt > 0.0) {
            return Err(CliError::Config(format!(
                "integrator.dt must be positive, got {}",
                i.dt
            )));
        }
        if !(i.t_end.is_finite() && i.t_end > 0.0) {
            return Err(CliError::Config(format!(
                "integrator.t_end must be positive, got {}",
                i.t_end
            )));
        }
        let integrator = IntegratorConfig::new(i.dt, i.t_end, i.method)
            .map_err(|e| CliError::Config(format!("integrator: {e}")))?;
        Ok(Resolved {
            bath,
            sys,
            phase,
            integrator,
            quadrature: self.simulate.quadrature,
            solver: self.simulate.solver,
            seed,
        })
    }
}
