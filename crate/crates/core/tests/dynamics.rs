mod common;

use chainbath::{
    build_gle, exact_from_chain, free_term, gle_residual, integrate_chain, integrate_io,
    resolvent_params, solve_exact, solve_volterra, ChainPhase, ChainState, DynamicsError,
    IntegratorConfig, IntegratorMethod, IoBath, PhaseState, Quadrature, SystemOscillator,
};
use common::{map, random_bath, random_phase, stable_system};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(dt: f64, t_end: f64, method: IntegratorMethod) -> IntegratorConfig {
    IntegratorConfig::new(dt, t_end, method).unwrap()
}

#[test]
fn decoupled_chain_follows_the_free_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bath = random_bath(&mut rng, 3);
    let sys = stable_system(&bath);
    let phase = random_phase(&mut rng, 3);
    let m = map(&bath, &phase);
    let chain = m.chain.with_system_coupling(0.0);
    let sol = integrate_chain(
        &chain,
        &sys,
        &m.phase,
        &cfg(1e-3, 10.0, IntegratorMethod::Rk4),
    )
    .unwrap();
    let expected = sol
        .x
        .grid()
        .sample(|t| free_term(sys.omega, phase.x0, phase.v0, t));
    assert!(sol.x.max_abs_diff(&expected) < 1e-10);
}

#[test]
fn chain_energy_is_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let bath = random_bath(&mut rng, 6);
    let sys = stable_system(&bath);
    let m = map(&bath, &random_phase(&mut rng, 6));
    let sol = integrate_chain(
        &m.chain,
        &sys,
        &m.phase,
        &cfg(1e-4, 10.0, IntegratorMethod::VelocityVerlet),
    )
    .unwrap();
    assert!(sol.energy_drift() < 1e-7);
}

#[test]
fn reversed_run_retraces_the_forward_run() {
    // Integrate forward, flip every velocity, integrate again: the system
    // returns to its initial positions and x runs backwards in time.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let bath = random_bath(&mut rng, 4);
    let sys = stable_system(&bath);
    let phase = random_phase(&mut rng, 4);
    for (method, dt, tol) in [
        (IntegratorMethod::VelocityVerlet, 1e-3, 1e-10),
        (IntegratorMethod::Rk4, 1e-3, 1e-10),
    ] {
        let config = cfg(dt, 10.0, method);
        let forward = integrate_io(&bath, &sys, &phase, &config).unwrap();
        let p = &forward.final_positions;
        let v = &forward.final_velocities;
        let back_phase = PhaseState::new(
            p[0],
            -v[0],
            p[1..].to_vec(),
            v[1..].iter().map(|u| -u).collect(),
        )
        .unwrap();
        let back = integrate_io(&bath, &sys, &back_phase, &config).unwrap();
        let n = forward.x.len();
        let retrace = (0..n).fold(0.0_f64, |m, i| {
            m.max((back.x.values[i] - forward.x.values[n - 1 - i]).abs())
        });
        assert!(retrace < tol, "{method:?}: {retrace:e}");
        assert!((back.final_positions[0] - phase.x0).abs() < tol);
        for (q, q0) in back.final_positions[1..].iter().zip(&phase.q0) {
            assert!((q - q0).abs() < tol);
        }
    }
}

#[test]
fn velocity_negation_mirrors_the_trajectory_in_time() {
    // Negating only the initial velocities gives x(-t).
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let bath = random_bath(&mut rng, 3);
    let sys = stable_system(&bath);
    let phase = random_phase(&mut rng, 3);
    let config = cfg(1e-3, 5.0, IntegratorMethod::Rk4);
    let forward = integrate_io(&bath, &sys, &phase, &config).unwrap();
    let mirrored = integrate_io(&bath, &sys, &phase.reversed(), &config).unwrap();
    // Central differences across t = 0 built from both runs reproduce the
    // initial velocity and the initial acceleration from the equations of motion.
    let h = 1e-3;
    let xd = (forward.x.values[1] - mirrored.x.values[1]) / (2.0 * h);
    assert!((xd - phase.v0).abs() < 1e-5);
    let xdd = (forward.x.values[1] - 2.0 * forward.x.values[0] + mirrored.x.values[1]) / (h * h);
    let coupling: f64 = bath.c.iter().zip(&phase.q0).map(|(c, q)| c * q).sum();
    let expected = -sys.omega.powi(2) * phase.x0 + coupling;
    assert!((xdd - expected).abs() < 1e-5);
}

#[test]
fn resolvent_solution_converges_at_second_order_with_trapezoid() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let bath = random_bath(&mut rng, 4);
    let sys = stable_system(&bath);
    let phase = random_phase(&mut rng, 4);
    let m = map(&bath, &phase);
    let err = |dt: f64| {
        let exact = exact_from_chain(
            &sys,
            &m.chain,
            &m.phase,
            &cfg(dt, 10.0, IntegratorMethod::Rk4),
            Quadrature::Trapezoid,
        )
        .unwrap();
        exact.x.unwrap().max_abs_diff(&exact.ode.x)
    };
    let order = (err(4e-3) / err(2e-3)).log2();
    assert!(order > 1.9 && order < 2.2, "order {order}");
}

#[test]
fn volterra_and_resolvent_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let bath = random_bath(&mut rng, 4);
    let sys = stable_system(&bath);
    let m = map(&bath, &random_phase(&mut rng, 4));
    for rule in [Quadrature::Trapezoid, Quadrature::EndCorrected] {
        let exact = exact_from_chain(
            &sys,
            &m.chain,
            &m.phase,
            &cfg(1e-3, 20.0, IntegratorMethod::Rk4),
            rule,
        )
        .unwrap();
        let marched = solve_volterra(&exact.forcing, &sys, &m.chain, rule).unwrap();
        let x = exact.x.unwrap();
        assert!(marched.max_abs_diff(&x) < 1e-8, "{rule:?}");
    }
}

#[test]
fn volterra_handles_degenerate_first_kernel() {
    // Ω = Ω_1: the closed-form first kernel does not exist.
    let bath = IoBath::new(vec![1.0, 2.0], vec![0.3, 0.3]).unwrap();
    let m = map(&bath, &PhaseState::tracer_only(1.0, 0.0, 2));
    let sys = SystemOscillator::new(m.chain.omega_sq[0].sqrt()).unwrap();
    let exact = exact_from_chain(
        &sys,
        &m.chain,
        &m.phase,
        &cfg(1e-3, 3.0, IntegratorMethod::Rk4),
        Quadrature::EndCorrected,
    )
    .unwrap();
    let marched = solve_volterra(&exact.forcing, &sys, &m.chain, Quadrature::EndCorrected).unwrap();
    assert!(marched.max_abs_diff(&exact.ode.x) < 1e-8);
    assert!(exact.x.unwrap().max_abs_diff(&exact.ode.x) < 1e-8);
}

#[test]
fn strong_coupling_is_reported_as_multivalued() {
    let bath = IoBath::new(vec![1.0, 2.0], vec![3.0, 3.0]).unwrap();
    let sys = SystemOscillator::new(1.0).unwrap();
    let m = map(&bath, &PhaseState::tracer_only(1.0, 0.0, 2));
    let err = resolvent_params(&sys, &m.chain).unwrap_err();
    assert!(matches!(err, DynamicsError::MultiValued { .. }));
    assert!(err.to_string().contains("multi-valued"));
}

#[test]
fn resolvent_solution_satisfies_the_langevin_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let bath = random_bath(&mut rng, 4);
    let sys = stable_system(&bath);
    let phase = random_phase(&mut rng, 4);
    let m = map(&bath, &phase);
    let exact = exact_from_chain(
        &sys,
        &m.chain,
        &m.phase,
        &cfg(1e-3, 10.0, IntegratorMethod::Rk4),
        Quadrature::EndCorrected,
    )
    .unwrap();
    let x = exact.x.unwrap();
    let gle = build_gle(&bath, &sys, &phase, &x.grid()).unwrap();
    let chain_residual = gle_residual(&x, &gle).unwrap().max_abs();
    let io = integrate_io(&bath, &sys, &phase, &cfg(1e-3, 10.0, IntegratorMethod::Rk4)).unwrap();
    let io_residual = gle_residual(&io.x, &gle).unwrap().max_abs();
    assert!(chain_residual < 1e-4);
    assert!((chain_residual - io_residual).abs() < 1e-7);
}

#[test]
fn exact_solution_with_silent_forcing_is_zero() {
    let chain_phase = ChainPhase {
        x0: 0.0,
        v0: 0.0,
        modes: ChainState::zeros(2),
    };
    let bath = IoBath::new(vec![1.0, 2.0], vec![0.3, 0.4]).unwrap();
    let m = map(&bath, &PhaseState::tracer_only(0.0, 0.0, 2));
    let sys = SystemOscillator::new(2.0).unwrap();
    let exact = exact_from_chain(
        &sys,
        &m.chain,
        &chain_phase,
        &cfg(1e-2, 5.0, IntegratorMethod::Rk4),
        Quadrature::EndCorrected,
    )
    .unwrap();
    assert!(exact.x.unwrap().max_abs() < 1e-15);
    let grid = exact.forcing.grid();
    let p = resolvent_params(&sys, &m.chain).unwrap();
    assert!(solve_exact(&grid.zeros(), &p, Quadrature::Trapezoid).max_abs() < 1e-15);
}

#[test]
fn forcing_does_not_depend_on_where_the_grid_ends() {
    let bath = chainbath::discretize_spectral_density(&chainbath::SpectralDensitySpec::ohmic(
        0.2,
        2.0,
        16,
        chainbath::FrequencyGrid::Linear,
    ))
    .unwrap();
    let sys = SystemOscillator::new(1.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m = map(&bath, &random_phase(&mut rng, 16));
    let solve = |t_end: f64| {
        exact_from_chain(
            &sys,
            &m.chain,
            &m.phase,
            &cfg(1e-3, t_end, IntegratorMethod::Rk4),
            Quadrature::EndCorrected,
        )
        .unwrap()
    };
    let short = solve(10.0);
    let long = solve(10.01);
    let last = short.forcing.len() - 1;
    for n in last - 3..=last {
        let diff = (short.forcing.values[n] - long.forcing.values[n]).abs();
        assert!(diff < 1e-9, "sample {n}: {diff:e}");
    }
}
