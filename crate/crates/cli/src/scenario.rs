//! Scenario files: a single JSON document that fully determines a run.
//!
//! Unknown keys are rejected everywhere, and every module-level
//! precondition reachable from a file is checked at load time so that
//! failures surface as diagnostics, not crashes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use crnctl_core::controller::{
    attach_hill_controller, attach_integral_controller, ClosedLoop, ControllerParams, HillParams,
};
use crnctl_core::network::{Network, RateLaw, ReactionDef, Species};
use crnctl_core::sim::{Event, InputDisturbance, Schedule, SimOptions, Target};
use crnctl_core::nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub network: NetworkSpec,
    pub controller: ControllerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<EventSpec>,
    pub simulation: SimulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsd: Option<DsdSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub species: Vec<SpeciesSpec>,
    pub reactions: Vec<ReactionSpec>,
    pub controlled: String,
    pub actuated: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub name: String,
    #[serde(default)]
    pub initial: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reactants: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub products: BTreeMap<String, u32>,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub mu: f64,
    pub alpha: f64,
    pub k: f64,
    #[serde(default = "default_v0")]
    pub v0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

fn default_v0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    /// One column per channel, each with one entry per plant species.
    pub e_columns: Vec<Vec<f64>>,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub time: f64,
    /// Dotted parameter path: `controller.mu`, `controller.alpha`,
    /// `controller.k`, `controller.theta`, `network.rate.<name-or-index>`,
    /// or `disturbance.d.<channel>`.
    pub target: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub t_end: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume_scale: Option<f64>,
}

fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_samples() -> usize {
    1000
}
fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DsdSpec {
    /// Gate supply Ω (same concentration unit as the network, nM by
    /// convention).
    pub omega: f64,
    #[serde(default = "default_lambda_fast")]
    pub lambda_fast: f64,
    /// Divergence band for the ideal-vs-compiled comparison, as a
    /// fraction of the initial set-point μ.
    #[serde(default = "default_band_fraction")]
    pub band_fraction: f64,
}

fn default_lambda_fast() -> f64 {
    0.01
}
fn default_band_fraction() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsSpec {
    pub kappa_r: f64,
    pub kappa_m: f64,
    pub kappa_a: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario file {}", path.display()))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| {
            anyhow!(
                "scenario parse error in {} at line {} column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            )
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Mirror of the module-level preconditions, so that a bad file fails
    /// here with a named field instead of deeper in the pipeline.
    pub fn validate(&self) -> Result<()> {
        self.build_network()
            .context("network block is invalid")?;
        self.controller_params()
            .context("controller block is invalid")?;
        if let Some(theta) = self.controller.theta {
            if !(theta > 0.0) {
                bail!("controller.theta must be > 0, got {theta}");
            }
        }
        self.build_disturbance()
            .context("disturbance block is invalid")?;
        if !(self.simulation.t_end > 0.0) {
            bail!("simulation.t_end must be > 0, got {}", self.simulation.t_end);
        }
        if self.simulation.samples < 2 {
            bail!("simulation.samples must be at least 2");
        }
        if !(self.simulation.rtol > 0.0) || !(self.simulation.atol > 0.0) {
            bail!(
                "simulation tolerances must be positive (rtol = {}, atol = {})",
                self.simulation.rtol,
                self.simulation.atol
            );
        }
        if let Some(v) = self.simulation.volume_scale {
            if !(v > 0.0) {
                bail!("simulation.volume_scale must be > 0, got {v}");
            }
        }
        if let Some(dsd) = &self.dsd {
            if !(dsd.omega > 0.0) {
                bail!("dsd.omega must be > 0, got {}", dsd.omega);
            }
            if !(dsd.lambda_fast > 0.0) {
                bail!("dsd.lambda_fast must be > 0, got {}", dsd.lambda_fast);
            }
            if !(dsd.band_fraction > 0.0) {
                bail!("dsd.band_fraction must be > 0, got {}", dsd.band_fraction);
            }
        }
        if let Some(c) = &self.costs {
            for (name, v) in [
                ("kappa_r", c.kappa_r),
                ("kappa_m", c.kappa_m),
                ("kappa_a", c.kappa_a),
            ] {
                if !(v >= 0.0) {
                    bail!("costs.{name} must be nonnegative, got {v}");
                }
            }
        }
        self.build_schedule().context("schedule is invalid")?;
        Ok(())
    }

    pub fn build_network(&self) -> Result<Network> {
        let species: Vec<Species> = self
            .network
            .species
            .iter()
            .map(|s| Species::new(s.name.clone(), s.initial))
            .collect();
        let defs: Vec<ReactionDef> = self
            .network
            .reactions
            .iter()
            .map(|r| ReactionDef {
                reactants: r.reactants.iter().map(|(n, &c)| (n.clone(), c)).collect(),
                products: r.products.iter().map(|(n, &c)| (n.clone(), c)).collect(),
                rate_constant: r.rate,
                rate_law: RateLaw::MassAction,
            })
            .collect();
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.network.reactions {
            if let Some(name) = &r.name {
                if seen.contains(&name.as_str()) {
                    bail!("duplicate reaction name `{name}`");
                }
                seen.push(name);
            }
        }
        Network::new(
            species,
            defs,
            &self.network.controlled,
            &self.network.actuated,
        )
        .map_err(Into::into)
    }

    pub fn controller_params(&self) -> Result<ControllerParams> {
        Ok(
            ControllerParams::new(self.controller.mu, self.controller.alpha, self.controller.k)?
                .with_v0(self.controller.v0)?,
        )
    }

    pub fn build_closed_loop(&self) -> Result<ClosedLoop> {
        let network = self.build_network()?;
        let params = self.controller_params()?;
        match self.controller.theta {
            None => Ok(attach_integral_controller(network, params)?),
            Some(theta) => Ok(attach_hill_controller(
                network,
                params,
                HillParams::new(theta)?,
            )?),
        }
    }

    pub fn build_disturbance(&self) -> Result<Option<InputDisturbance>> {
        let Some(spec) = &self.disturbance else {
            return Ok(None);
        };
        let d_species = self.network.species.len();
        if spec.e_columns.len() != spec.d.len() {
            bail!(
                "disturbance has {} columns but {} amplitudes",
                spec.e_columns.len(),
                spec.d.len()
            );
        }
        if spec.e_columns.is_empty() {
            return Ok(None);
        }
        for (j, col) in spec.e_columns.iter().enumerate() {
            if col.len() != d_species {
                bail!(
                    "disturbance column {j} has {} entries, network has {d_species} species",
                    col.len()
                );
            }
        }
        let e = DMatrix::from_fn(d_species, spec.e_columns.len(), |i, j| spec.e_columns[j][i]);
        let d = DVector::from_vec(spec.d.clone());
        Ok(Some(InputDisturbance::new(e, d)?))
    }

    /// Resolve a dotted schedule/override path to a closed-loop target.
    pub fn resolve_target(&self, path: &str) -> Result<Target> {
        match path {
            "controller.mu" => return Ok(Target::Mu),
            "controller.alpha" => return Ok(Target::Alpha),
            "controller.k" => return Ok(Target::Gain),
            "controller.theta" => return Ok(Target::Theta),
            _ => {}
        }
        if let Some(rest) = path.strip_prefix("network.rate.") {
            return Ok(Target::RateConstant(self.reaction_index(rest)?));
        }
        if let Some(rest) = path.strip_prefix("disturbance.d.") {
            let i: usize = rest
                .parse()
                .map_err(|_| anyhow!("bad disturbance channel `{rest}` in `{path}`"))?;
            let n = self.disturbance.as_ref().map_or(0, |d| d.d.len());
            if i >= n {
                bail!("disturbance channel {i} out of range (scenario has {n})");
            }
            return Ok(Target::DisturbanceAmplitude(i));
        }
        bail!("unknown schedule target `{path}`");
    }

    pub fn reaction_index(&self, key: &str) -> Result<usize> {
        if let Ok(i) = key.parse::<usize>() {
            if i >= self.network.reactions.len() {
                bail!(
                    "reaction index {i} out of range ({} reactions)",
                    self.network.reactions.len()
                );
            }
            return Ok(i);
        }
        self.network
            .reactions
            .iter()
            .position(|r| r.name.as_deref() == Some(key))
            .ok_or_else(|| anyhow!("no reaction named `{key}`"))
    }

    pub fn build_schedule(&self) -> Result<Schedule> {
        let mut events = Vec::with_capacity(self.schedule.len());
        for e in &self.schedule {
            events.push(Event {
                time: e.time,
                target: self.resolve_target(&e.target)?,
                value: e.value,
            });
        }
        Schedule::new(events).map_err(Into::into)
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            rtol: self.simulation.rtol,
            atol: self.simulation.atol,
            samples: self.simulation.samples,
            ..Default::default()
        }
    }

    pub fn costs(&self) -> Result<Option<crnctl_core::analysis::MetabolicCosts>> {
        match &self.costs {
            None => Ok(None),
            Some(c) => Ok(Some(crnctl_core::analysis::MetabolicCosts::new(
                c.kappa_r, c.kappa_m, c.kappa_a,
            )?)),
        }
    }

    /// Apply one `--set path=value` override in place.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("override `{assignment}` is not of the form path=value"))?;
        let value: f64 = raw
            .parse()
            .map_err(|_| anyhow!("override value `{raw}` is not a number"))?;
        match path {
            "controller.mu" => self.controller.mu = value,
            "controller.alpha" => self.controller.alpha = value,
            "controller.k" => self.controller.k = value,
            "controller.v0" => self.controller.v0 = value,
            "controller.theta" => self.controller.theta = Some(value),
            "simulation.t_end" => self.simulation.t_end = value,
            "simulation.rtol" => self.simulation.rtol = value,
            "simulation.atol" => self.simulation.atol = value,
            "simulation.samples" => self.simulation.samples = value as usize,
            "simulation.seed" => self.simulation.seed = value as u64,
            "simulation.volume_scale" => self.simulation.volume_scale = Some(value),
            "dsd.omega" => {
                self.dsd
                    .as_mut()
                    .ok_or_else(|| anyhow!("scenario has no dsd block"))?
                    .omega = value
            }
            "dsd.lambda_fast" => {
                self.dsd
                    .as_mut()
                    .ok_or_else(|| anyhow!("scenario has no dsd block"))?
                    .lambda_fast = value
            }
            "costs.kappa_r" | "costs.kappa_m" | "costs.kappa_a" => {
                let c = self.costs.get_or_insert(CostsSpec {
                    kappa_r: 1.0,
                    kappa_m: 1.0,
                    kappa_a: 1.0,
                });
                match path {
                    "costs.kappa_r" => c.kappa_r = value,
                    "costs.kappa_m" => c.kappa_m = value,
                    _ => c.kappa_a = value,
                }
            }
            _ => {
                if let Some(rest) = path.strip_prefix("network.rate.") {
                    let i = self.reaction_index(rest)?;
                    self.network.reactions[i].rate = value;
                } else if let Some(rest) = path.strip_prefix("disturbance.d.") {
                    let i: usize = rest
                        .parse()
                        .map_err(|_| anyhow!("bad disturbance channel in `{path}`"))?;
                    let d = self
                        .disturbance
                        .as_mut()
                        .ok_or_else(|| anyhow!("scenario has no disturbance block"))?;
                    if i >= d.d.len() {
                        bail!("disturbance channel {i} out of range");
                    }
                    d.d[i] = value;
                } else {
                    bail!("unknown override path `{path}`");
                }
            }
        }
        Ok(())
    }
}

/// Serialize a core network back into the scenario `network` block format
/// (the round-trippable on-disk form, also used for compiled circuits).
pub fn network_to_spec(network: &Network, names: Option<Vec<Option<String>>>) -> NetworkSpec {
    let species = network
        .species()
        .iter()
        .map(|s| SpeciesSpec {
            name: s.name.clone(),
            initial: s.initial_concentration,
        })
        .collect();
    let reactions = network
        .reactions()
        .iter()
        .enumerate()
        .map(|(k, r)| ReactionSpec {
            name: names.as_ref().and_then(|n| n.get(k).cloned().flatten()),
            reactants: r
                .reactants()
                .iter()
                .map(|&(i, c)| (network.species()[i].name.clone(), c))
                .collect(),
            products: r
                .products()
                .iter()
                .map(|&(i, c)| (network.species()[i].name.clone(), c))
                .collect(),
            rate: r.rate_constant(),
        })
        .collect();
    NetworkSpec {
        species,
        reactions,
        controlled: network.species()[network.controlled_index()].name.clone(),
        actuated: network.species()[network.actuated_index()].name.clone(),
    }
}

/// Parse a standalone network file (the `network` block as its own JSON
/// document) back into a core network.
pub fn network_from_spec(spec: &NetworkSpec) -> Result<Network> {
    let scenario_like = Scenario {
        name: "network".into(),
        description: None,
        network: spec.clone(),
        controller: ControllerSpec {
            mu: 1.0,
            alpha: 1.0,
            k: 1.0,
            v0: 1.0,
            theta: None,
        },
        disturbance: None,
        schedule: vec![],
        simulation: SimulationSpec {
            t_end: 1.0,
            rtol: default_rtol(),
            atol: default_atol(),
            samples: default_samples(),
            seed: default_seed(),
            volume_scale: None,
        },
        dsd: None,
        costs: None,
        output: None,
    };
    scenario_like.build_network()
}
