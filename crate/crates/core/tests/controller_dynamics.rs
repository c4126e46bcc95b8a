//! The closed-loop construction against its defining rate equations, the
//! invariance of the controller-off set, and the Hill-variant limit.

mod common;

use common::*;
use crnctl_core::controller::{
    attach_hill_controller, attach_integral_controller, ControllerParams, HillParams,
};
use crnctl_core::network::{Network, ReactionDef, Species};
use crnctl_core::sim::{integrate, integrate_network, Schedule, SimOptions};
use nalgebra::DVector;

#[test]
fn closed_loop_equals_rate_equations_on_random_states() {
    // ẋ = Ax + e1·k·v, v̇ = αv(μ − q) for the gene-expression plant,
    // evaluated through the generic mass-action right-hand side.
    let plant = gene_expression_nominal();
    let lin = plant.linearize(&DVector::zeros(3)).unwrap();
    let params = ControllerParams::new(2.0, 0.081, 10.0).unwrap();
    let closed = attach_integral_controller(plant, params).unwrap();
    let mut rng = rng(0x1234);
    for _ in 0..100 {
        let state = DVector::from_fn(4, |_, _| 5.0 * rng.next_f64());
        let f = closed.network().evaluate_rhs(&state).unwrap();
        let x = state.rows(0, 3).into_owned();
        let v = state[3];
        let expected_x = &lin.a * &x + &lin.input * (params.k * v);
        let expected_v = params.alpha * v * (params.mu - x[2]);
        for i in 0..3 {
            assert!(
                (f[i] - expected_x[i]).abs() <= 1e-13 * (1.0 + expected_x[i].abs()),
                "x component {i}"
            );
        }
        assert!((f[3] - expected_v).abs() <= 1e-13 * (1.0 + expected_v.abs()));
    }
}

#[test]
fn controller_state_stays_positive() {
    let closed = attach_integral_controller(
        gene_expression_nominal(),
        ControllerParams::new(2.0, 0.081, 10.0).unwrap(),
    )
    .unwrap();
    let traj = integrate(
        &closed,
        None,
        &Schedule::empty(),
        200.0,
        &SimOptions::default(),
    )
    .unwrap();
    let v_col = closed.v_index();
    assert!(
        traj.column_min(v_col) > 0.0,
        "v(t) must stay strictly positive from v0 > 0"
    );
}

#[test]
fn v_zero_is_invariant_and_misses_the_setpoint() {
    // Built by hand with v(0) = 0 (the validated constructor rejects it):
    // v stays 0 and the output settles at the plant-only equilibrium
    // k_b/γ = 2, not at μ = 5.
    let net = Network::new(
        vec![Species::new("x", 0.0), Species::new("v", 0.0)],
        vec![
            ReactionDef::mass_action(&[], &[("x", 1)], 1.0),
            ReactionDef::mass_action(&[("x", 1)], &[], 0.5),
            ReactionDef::mass_action(&[("v", 1)], &[("v", 2)], 1.0 * 5.0),
            ReactionDef::mass_action(&[("v", 1), ("x", 1)], &[("x", 1)], 1.0),
            ReactionDef::mass_action(&[("v", 1)], &[("v", 1), ("x", 1)], 10.0),
        ],
        "x",
        "x",
    )
    .unwrap();
    let traj = integrate_network(&net, &Schedule::empty(), 40.0, &SimOptions::default()).unwrap();
    assert_eq!(traj.column_min(1), 0.0);
    assert!(traj.column(1).iter().all(|&v| v == 0.0));
    let x_end = traj.last_row()[0];
    assert!((x_end - 2.0).abs() < 1e-6, "settles at k_b/γ, got {x_end}");
}

#[test]
fn gene_expression_closed_loop_dimension() {
    let closed = attach_integral_controller(
        gene_expression_nominal(),
        ControllerParams::new(2.0, 0.081, 10.0).unwrap(),
    )
    .unwrap();
    assert_eq!(closed.dim(), 4);
    assert_eq!(closed.state_names(), vec!["m", "p", "q", "v"]);
    assert_eq!(closed.output_index(), 2);
}

fn hill_gap(theta: f64) -> f64 {
    let params = ControllerParams::new(2.0, 1.0, 10.0).unwrap();
    let ideal = attach_integral_controller(death_process(1.0), params).unwrap();
    let hill = attach_hill_controller(
        death_process(1.0),
        params,
        HillParams::new(theta).unwrap(),
    )
    .unwrap();
    let opts = SimOptions {
        samples: 400,
        ..Default::default()
    };
    let a = integrate(&ideal, None, &Schedule::empty(), 25.0, &opts).unwrap();
    let b = integrate(&hill, None, &Schedule::empty(), 25.0, &opts).unwrap();
    let mut gap = 0.0_f64;
    for i in 0..a.n_rows() {
        for j in 0..a.n_cols() {
            gap = gap.max((a.value(i, j) - b.value(i, j)).abs());
        }
    }
    gap
}

#[test]
fn hill_converges_to_ideal_with_theta() {
    let g2 = hill_gap(1e2);
    let g4 = hill_gap(1e4);
    let g6 = hill_gap(1e6);
    assert!(g2 > g4 && g4 > g6, "gaps: {g2} > {g4} > {g6} expected");
    // At θ = 1e9 the trajectories agree to 1e-5 relative.
    let gap = hill_gap(1e9);
    assert!(gap < 1e-5 * 2.0, "θ = 1e9 gap {gap}");
}

#[test]
fn hill_equilibrium_closed_form() {
    // k = 10, θ = 100, μ = 2, γ = 1 → ρ = 500;
    // x*_ρ = (μρ/2)(−1 + √(1 + 4/ρ)), v*_ρ = (ρμγ/2k)(−1 + √(1 + 4/ρ)).
    let params = ControllerParams::new(2.0, 1.0, 10.0).unwrap();
    let hill = HillParams::new(100.0).unwrap();
    assert!((hill.rho(&params, 1.0) - 500.0).abs() < 1e-12);
    let closed = attach_hill_controller(death_process(1.0), params, hill).unwrap();
    let traj = integrate(
        &closed,
        None,
        &Schedule::empty(),
        120.0,
        &SimOptions::default(),
    )
    .unwrap();
    let rho = 500.0_f64;
    let shrink = -1.0 + (1.0 + 4.0 / rho).sqrt();
    let x_expected = 2.0 * rho / 2.0 * shrink;
    let v_expected = rho * 2.0 * 1.0 / (2.0 * 10.0) * shrink;
    let end = traj.last_row();
    assert!((x_expected - 1.99602).abs() < 1e-5);
    assert!((v_expected - 0.199602).abs() < 1e-6);
    assert!(
        (end[0] - x_expected).abs() < 1e-6,
        "x settles at {} vs {x_expected}",
        end[0]
    );
    assert!(
        (end[1] - v_expected).abs() < 1e-6,
        "v settles at {} vs {v_expected}",
        end[1]
    );
    // Within 0.5% of the ideal-controller equilibrium (μ, μγ/k).
    assert!((end[0] - 2.0).abs() / 2.0 < 5e-3);
    assert!((end[1] - 0.2).abs() / 0.2 < 5e-3);
}
