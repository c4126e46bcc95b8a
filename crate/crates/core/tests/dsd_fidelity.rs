//! Quasi-steady-state fidelity of compiled circuits and gate bookkeeping.

mod common;

use common::*;
use crnctl_core::controller::{attach_integral_controller, ControllerParams};
use crnctl_core::dsd::{compile_to_dsd, compare_traces, gate_report};
use crnctl_core::network::{Network, ReactionDef, Species};
use crnctl_core::sim::{integrate, integrate_network, Event, Schedule, SimOptions, Target};

const OMEGA: f64 = 1e4; // 10 µM in nM
const LAMBDA_FAST: f64 = 0.01;

fn fig5_loop() -> crnctl_core::controller::ClosedLoop {
    attach_integral_controller(
        death_process(0.002),
        ControllerParams::new(1.0, 3e-4, 0.01).unwrap(),
    )
    .unwrap()
}

fn dsd_opts() -> SimOptions {
    SimOptions {
        rtol: 1e-6,
        atol: 1e-9,
        samples: 600,
        ..Default::default()
    }
}

/// Build the two-step cascade for one formal reaction of the compiled
/// circuit plus its signal species, and compare against the formal
/// single-reaction network.
fn qss_single_reaction(formal_reaction: usize, t_end: f64) {
    let closed = fig5_loop();
    let circuit = compile_to_dsd(&closed, OMEGA, LAMBDA_FAST).unwrap();
    let formal = closed.network();
    let expanded = circuit.network();
    let expansion = circuit.expansions[formal_reaction];

    // Formal single-reaction network.
    let formal_species: Vec<Species> = formal
        .species()
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if s.initial_concentration == 0.0 {
                s.initial_concentration = 0.5; // give products/outputs mass
            }
            s
        })
        .collect();
    let r = &formal.reactions()[formal_reaction];
    let def = ReactionDef {
        reactants: r
            .reactants()
            .iter()
            .map(|&(i, c)| (formal.species()[i].name.clone(), c))
            .collect(),
        products: r
            .products()
            .iter()
            .map(|&(i, c)| (formal.species()[i].name.clone(), c))
            .collect(),
        rate_constant: r.rate_constant(),
        rate_law: r.rate_law(),
    };
    let single = Network::new(
        formal_species.clone(),
        vec![def],
        &formal.species()[formal.controlled_index()].name,
        &formal.species()[formal.actuated_index()].name,
    )
    .unwrap();

    // Matching expanded sub-network: the cascade's two reactions plus the
    // species they touch, with the same signal initial conditions.
    let mut sub_species: Vec<Species> = expanded.species().to_vec();
    for s in &mut sub_species {
        if let Some(f) = formal_species.iter().find(|f| f.name == s.name) {
            s.initial_concentration = f.initial_concentration;
        }
    }
    let sub_defs: Vec<ReactionDef> = [expansion.recruit, expansion.release]
        .iter()
        .map(|&k| {
            let r = &expanded.reactions()[k];
            ReactionDef {
                reactants: r
                    .reactants()
                    .iter()
                    .map(|&(i, c)| (expanded.species()[i].name.clone(), c))
                    .collect(),
                products: r
                    .products()
                    .iter()
                    .map(|&(i, c)| (expanded.species()[i].name.clone(), c))
                    .collect(),
                rate_constant: r.rate_constant(),
                rate_law: r.rate_law(),
            }
        })
        .collect();
    let sub = Network::new(
        sub_species,
        sub_defs,
        &expanded.species()[expanded.controlled_index()].name,
        &expanded.species()[expanded.actuated_index()].name,
    )
    .unwrap();

    let opts = dsd_opts();
    let formal_traj = integrate_network(&single, &Schedule::empty(), t_end, &opts).unwrap();
    let dsd_traj = integrate_network(&sub, &Schedule::empty(), t_end, &opts).unwrap();

    for (j, s) in single.species().iter().enumerate() {
        let dsd_col = dsd_traj.column_index(&s.name).unwrap();
        let scale = formal_traj
            .column(j)
            .into_iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1e-12);
        for (i, &t) in formal_traj.times().iter().enumerate() {
            let dev = (formal_traj.value(i, j) - dsd_traj.sample_at(t)[dsd_col]).abs();
            assert!(
                dev <= 0.01 * scale,
                "reaction {formal_reaction}, species {}: dev {dev} at t = {t} (scale {scale})",
                s.name
            );
        }
    }
    // Gates stayed in excess throughout.
    for g in [expansion.gate, Some(expansion.translator)].into_iter().flatten() {
        let name = &expanded.species()[g].name;
        if let Some(col) = dsd_traj.column_index(name) {
            assert!(
                dsd_traj.column_min(col) > 0.9 * OMEGA,
                "gate {name} depleted below 0.9 Ω"
            );
        }
    }
}

#[test]
fn qss_fidelity_per_formal_reaction() {
    let closed = fig5_loop();
    let n = closed.network().reactions().len();
    for k in 0..n {
        qss_single_reaction(k, 4000.0);
    }
}

#[test]
fn full_circuit_tracks_ideal_loop() {
    let closed = fig5_loop();
    let circuit = compile_to_dsd(&closed, OMEGA, LAMBDA_FAST).unwrap();
    let opts = dsd_opts();
    let t_end = 8000.0;
    let ideal = integrate(&closed, None, &Schedule::empty(), t_end, &opts).unwrap();
    let dsd = integrate_network(circuit.network(), &Schedule::empty(), t_end, &opts).unwrap();
    let metrics = compare_traces(&ideal, &dsd, &circuit.signal_map(), 0.05).unwrap();
    assert!(
        metrics.max_abs_deviation < 0.05,
        "max deviation {} above 5% of μ = 1 nM",
        metrics.max_abs_deviation
    );
    assert!(metrics.divergence_time.is_none());
}

#[test]
fn gates_are_nonincreasing() {
    let closed = fig5_loop();
    let circuit = compile_to_dsd(&closed, OMEGA, LAMBDA_FAST).unwrap();
    let traj = integrate_network(circuit.network(), &Schedule::empty(), 5000.0, &dsd_opts()).unwrap();
    for &g in &circuit.gate_species {
        let col = circuit.network().species()[g].name.clone();
        let col = traj.column_index(&col).unwrap();
        let series = traj.column(col);
        for w in series.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9 * OMEGA,
                "gate concentration increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn waste_removal_does_not_change_signals() {
    let closed = fig5_loop();
    let circuit = compile_to_dsd(&closed, OMEGA, LAMBDA_FAST).unwrap();
    let expanded = circuit.network();
    let waste_name = expanded.species()[circuit.waste_species].name.clone();

    let species: Vec<Species> = expanded
        .species()
        .iter()
        .filter(|s| s.name != waste_name)
        .cloned()
        .collect();
    let defs: Vec<ReactionDef> = expanded
        .reactions()
        .iter()
        .map(|r| ReactionDef {
            reactants: r
                .reactants()
                .iter()
                .map(|&(i, c)| (expanded.species()[i].name.clone(), c))
                .collect(),
            products: r
                .products()
                .iter()
                .filter(|&&(i, _)| i != circuit.waste_species)
                .map(|&(i, c)| (expanded.species()[i].name.clone(), c))
                .collect(),
            rate_constant: r.rate_constant(),
            rate_law: r.rate_law(),
        })
        .collect();
    let stripped = Network::new(
        species,
        defs,
        &expanded.species()[expanded.controlled_index()].name,
        &expanded.species()[expanded.actuated_index()].name,
    )
    .unwrap();

    let opts = dsd_opts();
    let a = integrate_network(expanded, &Schedule::empty(), 3000.0, &opts).unwrap();
    let b = integrate_network(&stripped, &Schedule::empty(), 3000.0, &opts).unwrap();
    for name in ["x", "v"] {
        let ca = a.column_index(name).unwrap();
        let cb = b.column_index(name).unwrap();
        // Dropping a state changes the error-norm dimension, so the two
        // runs only agree to integration accuracy, not bit-exactly.
        for i in 0..a.n_rows() {
            assert!(
                (a.value(i, ca) - b.value(i, cb)).abs() < 1e-5,
                "signal {name} differs without waste: {} vs {}",
                a.value(i, ca),
                b.value(i, cb)
            );
        }
    }
}

#[test]
fn deviation_shrinks_with_gate_supply() {
    let closed = fig5_loop();
    let opts = dsd_opts();
    let t_end = 20_000.0;
    let ideal = integrate(&closed, None, &Schedule::empty(), t_end, &opts).unwrap();
    let mut deviations = Vec::new();
    for omega in [1.5e3, 5e3, 1e4] {
        let circuit = compile_to_dsd(&closed, omega, LAMBDA_FAST).unwrap();
        let dsd = integrate_network(circuit.network(), &Schedule::empty(), t_end, &opts).unwrap();
        let metrics = compare_traces(&ideal, &dsd, &circuit.signal_map(), 0.05).unwrap();
        deviations.push(metrics.max_abs_deviation);
    }
    assert!(
        deviations[0] >= deviations[1] && deviations[1] >= deviations[2],
        "max deviation must be nonincreasing in Ω: {deviations:?}"
    );
}

#[test]
fn schedule_translation_maps_into_recruit_rates() {
    let closed = fig5_loop();
    let circuit = compile_to_dsd(&closed, OMEGA, LAMBDA_FAST).unwrap();
    let formal_schedule = Schedule::new(vec![
        Event {
            time: 100.0,
            target: Target::RateConstant(0), // plant decay γ
            value: 0.004,
        },
        Event {
            time: 200.0,
            target: Target::Mu,
            value: 2.0,
        },
        Event {
            time: 300.0,
            target: Target::Alpha,
            value: 6e-4,
        },
    ])
    .unwrap();
    let translated = circuit.translate_schedule(&closed, &formal_schedule).unwrap();
    let events = translated.events();
    // γ update: recruit rate 0.004/Ω on the decay cascade.
    assert_eq!(events[0].target, Target::RateConstant(circuit.expansions[0].recruit));
    assert!((events[0].value - 0.004 / OMEGA).abs() < 1e-18);
    // μ update: reference recruit rate αμ'/Ω.
    assert!((events[1].value - 3e-4 * 2.0 / OMEGA).abs() < 1e-18);
    // α update fans out to reference and measurement cascades.
    assert_eq!(events.len(), 4);
    assert_eq!(events[2].time, events[3].time);
    assert!((events[2].value - 6e-4 * 2.0 / OMEGA).abs() < 1e-18);
    assert!((events[3].value - 6e-4).abs() < 1e-18);
}

#[test]
fn gate_report_with_depletion_section() {
    let closed = fig5_loop();
    let circuit = compile_to_dsd(&closed, 1.5e3, LAMBDA_FAST).unwrap();
    let traj =
        integrate_network(circuit.network(), &Schedule::empty(), 20_000.0, &dsd_opts()).unwrap();
    let report = gate_report(&circuit, Some(&traj));
    assert!(report.contains("gate depletion"));
    assert!(report.contains("first gate below 10% of Omega"));
}

#[test]
fn starved_supply_crosses_the_depletion_threshold() {
    // Integral action self-limits gate consumption (the effective rates
    // shrink with the gates), so reaching 10% of Ω takes roughly
    // 2.3·Ω/(γ·x̄) seconds. A harsh supply keeps that at desk scale.
    let closed = fig5_loop();
    let circuit = compile_to_dsd(&closed, 80.0, LAMBDA_FAST).unwrap();
    let traj =
        integrate_network(circuit.network(), &Schedule::empty(), 1.5e5, &dsd_opts()).unwrap();
    let report = gate_report(&circuit, Some(&traj));
    assert!(
        report.contains("first gate below 10% of Omega: G")
            || report.contains("first gate below 10% of Omega: S"),
        "expected a 10% crossing in:\n{report}"
    );
    // The detuned circuit has lost its designed characteristics.
    let ideal = integrate(&closed, None, &Schedule::empty(), 1.5e5, &dsd_opts()).unwrap();
    let metrics = compare_traces(&ideal, &traj, &circuit.signal_map(), 0.05).unwrap();
    assert!(metrics.divergence_time.is_some());
}
