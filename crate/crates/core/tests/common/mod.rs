#![allow(dead_code)]

use chainbath::{
    map_state, solve_iep, ChainBath, ChainPhase, ChainTransform, IoBath, PhaseState,
    SystemOscillator,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Frequencies uniform in [0.5, 3] (sorted), couplings uniform in [0.03, 0.3].
pub fn random_bath(rng: &mut ChaCha8Rng, n: usize) -> IoBath {
    let mut omega: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
    omega.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c = (0..n).map(|_| 0.3 * rng.gen_range(0.1..1.0)).collect();
    IoBath::new(omega, c).unwrap()
}

/// Tracer whose dressed frequency `Ω² - Σ c²/ω²` equals 1.
pub fn stable_system(bath: &IoBath) -> SystemOscillator {
    SystemOscillator::new((bath.counter_term() + 1.0).sqrt()).unwrap()
}

pub fn random_phase(rng: &mut ChaCha8Rng, n: usize) -> PhaseState {
    let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let (x0, v0) = (draw(1)[0], draw(1)[0]);
    PhaseState::new(x0, v0, draw(n), draw(n)).unwrap()
}

pub struct Mapped {
    pub chain: ChainBath,
    pub transform: ChainTransform,
    pub phase: ChainPhase,
}

pub fn map(bath: &IoBath, phase: &PhaseState) -> Mapped {
    let (chain, transform) = solve_iep(bath).unwrap();
    let modes = map_state(&transform, phase).unwrap();
    Mapped {
        chain,
        transform,
        phase: ChainPhase {
            x0: phase.x0,
            v0: phase.v0,
            modes,
        },
    }
}
