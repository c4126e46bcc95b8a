//! Compilation of a formal mass-action closed loop into a DNA strand
//! displacement (DSD) reaction network.
//!
//! Every formal reaction expands to a two-step cascade of bimolecular (or
//! unimolecular, for gate decay) DNA reactions:
//!
//! ```text
//! recruit:  reactant(s) (+ gate G_i)  ->  messenger U_i + waste
//! release:  U_i + translator S_i      ->  formal products + waste
//! ```
//!
//! Gates and translators are supplied in excess at concentration Ω and are
//! only consumed, never produced. While they remain near Ω and the release
//! step is fast, quasi-steady-state reduction of the cascade recovers the
//! formal rate law:
//!
//! * zeroth/first order, rate `q`: the recruit step runs against the gate
//!   at Ω, so its rate constant is calibrated to `λ_i = q/Ω`;
//! * second order, rate `q`: both reactants meet in the recruit step
//!   directly and `λ_i = q`, with the release step fast.
//!
//! Catalytic reactions (e.g. the measurement reaction `v + y -> y`)
//! consume both reactants in the recruit step and regenerate the catalyst
//! from the translator in the release step.

use crate::controller::{ClosedLoop, REFERENCE_OFFSET};
use crate::error::{Error, Result};
use crate::network::{Network, RateLaw, ReactionDef, Species};
use crate::sim::{Event, Schedule, Target, Trajectory};

/// Role of a single-stranded DNA species.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrandRole {
    /// Carries a formal species' concentration (two toeholds + one
    /// specificity domain).
    Signal,
    /// Intermediate released by a recruit step.
    Messenger,
    /// Inert displacement byproduct.
    Waste,
}

/// A single-stranded species with its abstract domain labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Strand {
    pub name: String,
    pub role: StrandRole,
    pub domains: Vec<String>,
}

/// Which step of a formal reaction's cascade a complex serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateStage {
    Recruit,
    Release,
}

/// A multi-stranded auxiliary complex supplied at Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    /// Index of the formal reaction this complex serves.
    pub consumed_by: usize,
    pub initial_concentration: f64,
    pub stage: GateStage,
}

/// Expansion record of one formal reaction.
#[derive(Debug, Clone, Copy)]
pub struct FormalExpansion {
    pub formal_reaction: usize,
    /// Index of the recruit reaction in the expanded network.
    pub recruit: usize,
    /// Index of the release reaction in the expanded network.
    pub release: usize,
    /// Species index of the recruit gate, absent for bimolecular formal
    /// reactions (both reactants meet directly).
    pub gate: Option<usize>,
    /// Species index of the translator.
    pub translator: usize,
}

/// A compiled DSD circuit: strands, gates, and the expanded mass-action
/// network, plus the calibration of the tuned rate constants.
#[derive(Debug, Clone)]
pub struct DsdCircuit {
    pub strands: Vec<Strand>,
    pub gates: Vec<Gate>,
    network: Network,
    pub omega: f64,
    pub lambda_fast: f64,
    /// Calibrated recruit rate constant per formal reaction.
    pub tuned_rates: Vec<f64>,
    pub expansions: Vec<FormalExpansion>,
    /// Expanded species index of each formal species (identity: signals
    /// come first and keep their order).
    pub signal_species: Vec<usize>,
    /// Expanded species indices of all gates and translators.
    pub gate_species: Vec<usize>,
    /// Expanded species index of the waste sink.
    pub waste_species: usize,
    /// Human-readable rendering of each formal reaction, for reports.
    pub formal_rendered: Vec<String>,
}

impl DsdCircuit {
    /// The expanded network (all reactions ≤ bimolecular, mass-action).
    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Pairs `(formal column, expanded column)` for trajectory comparison
    /// over the signal species.
    pub fn signal_map(&self) -> Vec<(usize, usize)> {
        self.signal_species
            .iter()
            .enumerate()
            .map(|(i, &j)| (i, j))
            .collect()
    }

    /// Recalibrate one formal reaction's recruit rate for a new formal
    /// rate constant.
    pub fn recruit_rate_for(&self, formal_reaction: usize, formal_rate: f64, order: u32) -> f64 {
        let _ = formal_reaction;
        if order <= 1 {
            formal_rate / self.omega
        } else {
            formal_rate
        }
    }

    /// Translate a closed-loop schedule into events on the expanded
    /// network's recruit reactions.
    ///
    /// `Mu`, `Alpha`, `Gain`, and plant `RateConstant` events are mapped to
    /// the corresponding recruit-rate updates (an `Alpha` event touches
    /// both the reference and the measurement cascades, producing two
    /// simultaneous events). Hill and disturbance targets have no DSD
    /// realization and are rejected.
    pub fn translate_schedule(&self, closed: &ClosedLoop, schedule: &Schedule) -> Result<Schedule> {
        let formal = closed.network();
        let mut mu = closed.params().mu;
        let mut alpha = closed.params().alpha;
        let mut out = Vec::new();
        for e in schedule.events() {
            match e.target {
                Target::RateConstant(i) => {
                    if i >= closed.plant().reactions().len() {
                        return Err(Error::Schedule(format!(
                            "plant reaction index {i} out of range"
                        )));
                    }
                    let order = formal.reactions()[i].order();
                    out.push(Event {
                        time: e.time,
                        target: Target::RateConstant(self.expansions[i].recruit),
                        value: self.recruit_rate_for(i, e.value, order),
                    });
                }
                Target::Mu => {
                    mu = e.value;
                    let r = closed.controller_reaction(REFERENCE_OFFSET);
                    out.push(Event {
                        time: e.time,
                        target: Target::RateConstant(self.expansions[r].recruit),
                        value: self.recruit_rate_for(r, alpha * mu, 1),
                    });
                }
                Target::Alpha => {
                    alpha = e.value;
                    let r = closed.controller_reaction(REFERENCE_OFFSET);
                    let m = closed.controller_reaction(crate::controller::MEASUREMENT_OFFSET);
                    out.push(Event {
                        time: e.time,
                        target: Target::RateConstant(self.expansions[r].recruit),
                        value: self.recruit_rate_for(r, alpha * mu, 1),
                    });
                    out.push(Event {
                        time: e.time,
                        target: Target::RateConstant(self.expansions[m].recruit),
                        value: self.recruit_rate_for(m, alpha, 2),
                    });
                }
                Target::Gain => {
                    let a = closed.controller_reaction(crate::controller::ACTUATION_OFFSET);
                    out.push(Event {
                        time: e.time,
                        target: Target::RateConstant(self.expansions[a].recruit),
                        value: self.recruit_rate_for(a, e.value, 1),
                    });
                }
                Target::Theta | Target::DisturbanceAmplitude(_) => {
                    return Err(Error::Schedule(format!(
                        "target {:?} has no DSD realization",
                        e.target
                    )));
                }
            }
        }
        Schedule::with_simultaneous(out)
    }
}

/// Compile a formal closed loop into a DSD circuit with gate supply Ω and
/// fast release constant λ̃.
///
/// Requirements: every formal reaction mass-action and at most
/// bimolecular, Ω > 0, λ̃ > 0. The Hill reference variant is rejected.
pub fn compile_to_dsd(closed: &ClosedLoop, omega: f64, lambda_fast: f64) -> Result<DsdCircuit> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Dsd(format!("gate supply Ω must be > 0, got {omega}")));
    }
    if !(lambda_fast > 0.0) || !lambda_fast.is_finite() {
        return Err(Error::Dsd(format!(
            "fast rate constant λ̃ must be > 0, got {lambda_fast}"
        )));
    }
    let formal = closed.network();
    for (k, r) in formal.reactions().iter().enumerate() {
        if !matches!(r.rate_law(), RateLaw::MassAction) {
            return Err(Error::Dsd(format!(
                "reaction {k} uses a Hill rate law; only mass-action reactions compile to DSD"
            )));
        }
        if r.order() > 2 {
            return Err(Error::Dsd(format!(
                "reaction {k} is termolecular (order {}); DSD cascades are at most bimolecular",
                r.order()
            )));
        }
    }

    let signal_names: Vec<String> = formal.species_names();
    let mut species: Vec<Species> = formal.species().to_vec();
    let mut strands: Vec<Strand> = Vec::new();
    for (j, s) in formal.species().iter().enumerate() {
        strands.push(Strand {
            name: s.name.clone(),
            role: StrandRole::Signal,
            domains: vec![
                format!("t{}", 2 * j + 1),
                format!("D{j}"),
                format!("t{}", 2 * j + 2),
            ],
        });
    }

    let mut gates: Vec<Gate> = Vec::new();
    let mut expansions: Vec<FormalExpansion> = Vec::new();
    let mut defs: Vec<ReactionDef> = Vec::new();
    let mut tuned_rates: Vec<f64> = Vec::new();
    let mut gate_species: Vec<usize> = Vec::new();

    let waste = "W".to_string();
    let reserved = |name: &str| signal_names.iter().any(|s| s == name);
    if reserved(&waste) {
        return Err(Error::Dsd("species name `W` is reserved for waste".into()));
    }

    for (i, r) in formal.reactions().iter().enumerate() {
        let gate_name = format!("G{i}");
        let messenger_name = format!("U{i}");
        let translator_name = format!("S{i}");
        for n in [&gate_name, &messenger_name, &translator_name] {
            if reserved(n) {
                return Err(Error::Dsd(format!(
                    "species name `{n}` collides with an auxiliary complex name"
                )));
            }
        }

        let order = r.order();
        let lambda = if order <= 1 {
            r.rate_constant() / omega
        } else {
            r.rate_constant()
        };
        tuned_rates.push(lambda);

        let gate_index = if order <= 1 {
            species.push(Species::new(gate_name.clone(), omega));
            gates.push(Gate {
                name: gate_name.clone(),
                consumed_by: i,
                initial_concentration: omega,
                stage: GateStage::Recruit,
            });
            gate_species.push(species.len() - 1);
            Some(species.len() - 1)
        } else {
            None
        };

        species.push(Species::new(messenger_name.clone(), 0.0));
        strands.push(Strand {
            name: messenger_name.clone(),
            role: StrandRole::Messenger,
            domains: vec![format!("tm{i}"), format!("M{i}")],
        });

        species.push(Species::new(translator_name.clone(), omega));
        gates.push(Gate {
            name: translator_name.clone(),
            consumed_by: i,
            initial_concentration: omega,
            stage: GateStage::Release,
        });
        gate_species.push(species.len() - 1);
        let translator_index = species.len() - 1;

        // Recruit step.
        let mut recruit_reactants: Vec<(String, u32)> = r
            .reactants()
            .iter()
            .map(|&(s, c)| (signal_names[s].clone(), c))
            .collect();
        if order <= 1 {
            recruit_reactants.push((gate_name, 1));
        }
        defs.push(ReactionDef {
            reactants: recruit_reactants,
            products: vec![(messenger_name.clone(), 1), (waste.clone(), 1)],
            rate_constant: lambda,
            rate_law: RateLaw::MassAction,
        });
        let recruit = defs.len() - 1;

        // Release step: translator hands out the formal products.
        let mut release_products: Vec<(String, u32)> = r
            .products()
            .iter()
            .map(|&(s, c)| (signal_names[s].clone(), c))
            .collect();
        release_products.push((waste.clone(), 1));
        defs.push(ReactionDef {
            reactants: vec![(messenger_name, 1), (translator_name, 1)],
            products: release_products,
            rate_constant: lambda_fast,
            rate_law: RateLaw::MassAction,
        });
        let release = defs.len() - 1;

        expansions.push(FormalExpansion {
            formal_reaction: i,
            recruit,
            release,
            gate: gate_index,
            translator: translator_index,
        });
    }

    species.push(Species::new(waste.clone(), 0.0));
    strands.push(Strand {
        name: waste,
        role: StrandRole::Waste,
        domains: vec!["w".to_string()],
    });
    let waste_species = species.len() - 1;

    let controlled = signal_names[formal.controlled_index()].clone();
    let actuated = signal_names[formal.actuated_index()].clone();
    let network = Network::new(species, defs, &controlled, &actuated)?;
    let signal_species = (0..signal_names.len()).collect();
    let formal_rendered = (0..formal.reactions().len())
        .map(|k| formal.format_reaction(k))
        .collect();

    Ok(DsdCircuit {
        strands,
        gates,
        network,
        omega,
        lambda_fast,
        tuned_rates,
        expansions,
        signal_species,
        gate_species,
        waste_species,
        formal_rendered,
    })
}

/// Per-species deviation between an ideal and a compiled trajectory.
#[derive(Debug, Clone)]
pub struct SpeciesDeviation {
    pub name: String,
    pub max_abs: f64,
    pub rms: f64,
}

/// Deviation metrics over the signal species of a compiled circuit.
#[derive(Debug, Clone)]
pub struct ComparisonMetrics {
    pub per_species: Vec<SpeciesDeviation>,
    pub max_abs_deviation: f64,
    pub rms_deviation: f64,
    /// First time any mapped species deviates by more than the band, if
    /// that ever happens.
    pub divergence_time: Option<f64>,
    pub band: f64,
}

/// Compare two trajectories over mapped columns `(ideal, dsd)` on the
/// ideal trajectory's grid (the compiled trace is resampled by linear
/// interpolation). Gates, messengers, and waste are not compared.
pub fn compare_traces(
    ideal: &Trajectory,
    dsd: &Trajectory,
    map: &[(usize, usize)],
    band: f64,
) -> Result<ComparisonMetrics> {
    if !(band > 0.0) {
        return Err(Error::Dsd(format!("comparison band must be > 0, got {band}")));
    }
    let times = ideal.times();
    let mut per_species: Vec<SpeciesDeviation> = map
        .iter()
        .map(|&(ci, _)| SpeciesDeviation {
            name: ideal.names()[ci].clone(),
            max_abs: 0.0,
            rms: 0.0,
        })
        .collect();
    let mut divergence_time = None;
    let mut total_sq = 0.0;
    for (row, &t) in times.iter().enumerate() {
        let dsd_state = dsd.sample_at(t);
        let mut worst = 0.0_f64;
        for (m, &(ci, cd)) in map.iter().enumerate() {
            let dev = (ideal.value(row, ci) - dsd_state[cd]).abs();
            per_species[m].max_abs = per_species[m].max_abs.max(dev);
            per_species[m].rms += dev * dev;
            total_sq += dev * dev;
            worst = worst.max(dev);
        }
        if divergence_time.is_none() && worst > band {
            divergence_time = Some(t);
        }
    }
    let n = times.len() as f64;
    for s in &mut per_species {
        s.rms = (s.rms / n).sqrt();
    }
    let rms_deviation = (total_sq / (n * map.len() as f64)).sqrt();
    let max_abs_deviation = per_species
        .iter()
        .map(|s| s.max_abs)
        .fold(0.0_f64, f64::max);
    Ok(ComparisonMetrics {
        per_species,
        max_abs_deviation,
        rms_deviation,
        divergence_time,
        band,
    })
}

/// Plain-text inventory of a compiled circuit: what has to be added to the
/// test tube, the expanded reactions, and (when a simulated trajectory is
/// supplied) how far each gate has been depleted.
pub fn gate_report(circuit: &DsdCircuit, traj: Option<&Trajectory>) -> String {
    use std::fmt::Write;

    let net = circuit.network();
    let mut out = String::new();
    let _ = writeln!(out, "DSD circuit inventory");
    let _ = writeln!(out, "=====================");
    let _ = writeln!(
        out,
        "gate supply Omega = {:e} nM, fast rate = {:e} /nM/s",
        circuit.omega, circuit.lambda_fast
    );
    let _ = writeln!(out);

    let _ = writeln!(out, "signal strands (initially added):");
    for s in circuit.strands.iter().filter(|s| s.role == StrandRole::Signal) {
        let idx = net.species_index(&s.name).unwrap();
        let _ = writeln!(
            out,
            "  {:<8} {:>12e} nM   domains [{}]",
            s.name,
            net.species()[idx].initial_concentration,
            s.domains.join(" ")
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "auxiliary complexes (initially added at Omega):");
    for g in &circuit.gates {
        let stage = match g.stage {
            GateStage::Recruit => "recruit gate",
            GateStage::Release => "translator",
        };
        let _ = writeln!(
            out,
            "  {:<8} {:<13} for formal reaction {}: {}",
            g.name,
            stage,
            g.consumed_by,
            circuit.formal_rendered[g.consumed_by]
        );
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "expanded reactions:");
    for k in 0..net.reactions().len() {
        let _ = writeln!(out, "  {}", net.format_reaction(k));
    }

    if let Some(traj) = traj {
        let _ = writeln!(out);
        let _ = writeln!(out, "gate depletion:");
        let mut first_crossing: Option<(f64, String)> = None;
        for g in &circuit.gates {
            let col = match traj.column_index(&g.name) {
                Some(c) => c,
                None => continue,
            };
            let column = traj.column(col);
            let last = column.last().copied().unwrap_or(f64::NAN);
            let min = column.iter().copied().fold(f64::INFINITY, f64::min);
            let threshold = 0.1 * circuit.omega;
            let crossing = traj
                .times()
                .iter()
                .zip(&column)
                .find(|(_, &v)| v < threshold)
                .map(|(&t, _)| t);
            if let Some(t) = crossing {
                if first_crossing.as_ref().is_none_or(|(t0, _)| t < *t0) {
                    first_crossing = Some((t, g.name.clone()));
                }
            }
            let _ = writeln!(
                out,
                "  {:<8} remaining {:>6.2}% at t_end, minimum {:>6.2}%, below 10% of Omega: {}",
                g.name,
                100.0 * last / circuit.omega,
                100.0 * min / circuit.omega,
                crossing.map_or("never".to_string(), |t| format!("t = {t:.6e}")),
            );
        }
        let _ = writeln!(
            out,
            "first gate below 10% of Omega: {}",
            first_crossing.map_or("none".to_string(), |(t, name)| format!(
                "{name} at t = {t:.6e}"
            )),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{attach_hill_controller, attach_integral_controller, ControllerParams, HillParams};
    use crate::network::Species;

    fn death_loop() -> ClosedLoop {
        // X --γ--> 0 with the fig5a scenario's controller parameters.
        let plant = Network::new(
            vec![Species::new("x", 0.0)],
            vec![ReactionDef::mass_action(&[("x", 1)], &[], 0.002)],
            "x",
            "x",
        )
        .unwrap();
        attach_integral_controller(plant, ControllerParams::new(1.0, 3e-4, 0.01).unwrap()).unwrap()
    }

    #[test]
    fn death_process_expansion_counts() {
        let circuit = compile_to_dsd(&death_loop(), 1e4, 0.01).unwrap();
        // 4 formal reactions -> 8 expanded reactions.
        assert_eq!(circuit.network().reactions().len(), 8);
        // Unimolecular reactions carry gate + translator, the bimolecular
        // measurement reaction a translator only: 3·2 + 1 = 7 complexes.
        assert_eq!(circuit.gates.len(), 7);
        let recruit_gates = circuit
            .gates
            .iter()
            .filter(|g| g.stage == GateStage::Recruit)
            .count();
        assert_eq!(recruit_gates, 3);
        // Species: 2 signals + 7 complexes + 4 messengers + waste.
        assert_eq!(circuit.network().dim(), 14);
    }

    #[test]
    fn reference_lambda_calibration() {
        // Reference reaction rate αμ = 3e-4 at Ω = 1e4: λ = 3e-8.
        let circuit = compile_to_dsd(&death_loop(), 1e4, 0.01).unwrap();
        let closed = death_loop();
        let r = closed.controller_reaction(REFERENCE_OFFSET);
        assert!((circuit.tuned_rates[r] - 3e-8).abs() < 1e-20);
    }

    #[test]
    fn measurement_keeps_bimolecular_rate() {
        let circuit = compile_to_dsd(&death_loop(), 1e4, 0.01).unwrap();
        let closed = death_loop();
        let m = closed.controller_reaction(crate::controller::MEASUREMENT_OFFSET);
        assert!((circuit.tuned_rates[m] - 3e-4).abs() < 1e-18);
        assert!(circuit.expansions[m].gate.is_none());
    }

    #[test]
    fn catalyst_regenerated_in_release() {
        let circuit = compile_to_dsd(&death_loop(), 1e4, 0.01).unwrap();
        let closed = death_loop();
        let m = closed.controller_reaction(crate::controller::MEASUREMENT_OFFSET);
        let release = &circuit.network().reactions()[circuit.expansions[m].release];
        let x = circuit.network().species_index("x").unwrap();
        assert!(release.products().iter().any(|&(s, _)| s == x));
    }

    #[test]
    fn waste_is_products_only() {
        let circuit = compile_to_dsd(&death_loop(), 1e4, 0.01).unwrap();
        let w = circuit.waste_species;
        for r in circuit.network().reactions() {
            assert!(r.reactants().iter().all(|&(s, _)| s != w));
        }
    }

    #[test]
    fn hill_and_termolecular_rejected() {
        let plant = Network::new(
            vec![Species::new("x", 0.0)],
            vec![ReactionDef::mass_action(&[("x", 1)], &[], 0.002)],
            "x",
            "x",
        )
        .unwrap();
        let hill_loop = attach_hill_controller(
            plant.clone(),
            ControllerParams::new(1.0, 3e-4, 0.01).unwrap(),
            HillParams::new(100.0).unwrap(),
        )
        .unwrap();
        assert!(compile_to_dsd(&hill_loop, 1e4, 0.01).is_err());

        let ter = Network::new(
            vec![Species::new("x", 0.0)],
            vec![ReactionDef::mass_action(&[("x", 3)], &[], 1.0)],
            "x",
            "x",
        )
        .unwrap();
        let ter_loop =
            attach_integral_controller(ter, ControllerParams::new(1.0, 1.0, 1.0).unwrap())
                .unwrap();
        assert!(compile_to_dsd(&ter_loop, 1e4, 0.01).is_err());
        assert!(compile_to_dsd(&death_loop(), 0.0, 0.01).is_err());
        assert!(compile_to_dsd(&death_loop(), 1e4, -1.0).is_err());
    }

    #[test]
    fn identical_traces_have_zero_metrics() {
        use crate::sim::{integrate_network, SimOptions};
        let circuit = compile_to_dsd(&death_loop(), 1e4, 0.01).unwrap();
        let traj = integrate_network(
            circuit.network(),
            &Schedule::empty(),
            10.0,
            &SimOptions {
                samples: 50,
                ..Default::default()
            },
        )
        .unwrap();
        let map: Vec<(usize, usize)> = (0..2).map(|i| (i, i)).collect();
        let metrics = compare_traces(&traj, &traj, &map, 0.05).unwrap();
        assert_eq!(metrics.max_abs_deviation, 0.0);
        assert_eq!(metrics.rms_deviation, 0.0);
        assert!(metrics.divergence_time.is_none());
    }

    #[test]
    fn report_without_trajectory_omits_depletion() {
        let circuit = compile_to_dsd(&death_loop(), 1e4, 0.01).unwrap();
        let report = gate_report(&circuit, None);
        assert!(report.contains("signal strands"));
        assert!(report.contains("auxiliary complexes"));
        assert!(!report.contains("gate depletion"));
        // 7 complexes listed.
        assert_eq!(report.matches("for formal reaction").count(), 7);
    }
}
