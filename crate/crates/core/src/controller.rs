//! The nonlinear positive integral controller and its interconnection
//! with a plant network.
//!
//! The controller adds one species `v` and three reactions:
//!
//! ```text
//! v -> 2v        rate α·μ        (reference)
//! v + y -> y     rate α          (measurement, y = controlled species)
//! v -> v + x_a   rate k          (actuation, x_a = actuated species)
//! ```
//!
//! so that the closed-loop rate equations are
//! `ẋ = f(x) + e_a k v`, `v̇ = α v (μ − y)`.
//!
//! The practical variant replaces the reference rate constant by the
//! saturating law `h_θ(v) = αθμ/(θ+v)`, which recovers the ideal
//! controller as `θ → ∞`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::network::{Network, RateLaw, ReactionDef, Species};

/// Name given to the appended controller species.
pub const CONTROLLER_SPECIES: &str = "v";

/// The three positive control parameters plus the controller's initial
/// concentration.
///
/// `v0` must be strictly positive: the set `v = 0` is invariant, so a
/// controller started at zero never activates and the output settles at
/// the plant-only equilibrium instead of `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    /// Reference (desired set-point for the controlled species).
    pub mu: f64,
    /// Stability coefficient.
    pub alpha: f64,
    /// Gain.
    pub k: f64,
    /// Initial controller concentration.
    pub v0: f64,
}

impl ControllerParams {
    pub fn new(mu: f64, alpha: f64, k: f64) -> Result<Self> {
        let p = Self {
            mu,
            alpha,
            k,
            v0: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_v0(mut self, v0: f64) -> Result<Self> {
        self.v0 = v0;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("mu", self.mu),
            ("alpha", self.alpha),
            ("k", self.k),
            ("v0", self.v0),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "controller parameter {name} must be a positive finite number, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Saturation scale of the practical (Hill) reference reaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HillParams {
    pub theta: f64,
}

impl HillParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "theta must be a positive finite number, got {theta}"
            )));
        }
        Ok(Self { theta })
    }

    /// Dimensionless saturation ratio `ρ = kθ/(μγ)` of the controlled
    /// birth-death process with degradation rate `γ`.
    pub fn rho(&self, params: &ControllerParams, gamma: f64) -> f64 {
        params.k * self.theta / (params.mu * gamma)
    }
}

/// A plant with the integral controller attached.
///
/// Species order of the combined network is the plant species followed by
/// the controller species `v`; the controller reactions are appended after
/// the plant reactions in the order reference, measurement, actuation.
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    plant: Network,
    params: ControllerParams,
    hill: Option<HillParams>,
    combined: Network,
}

/// Offsets of the controller reactions inside the combined reaction list.
pub const REFERENCE_OFFSET: usize = 0;
pub const MEASUREMENT_OFFSET: usize = 1;
pub const ACTUATION_OFFSET: usize = 2;

fn build_combined(
    plant: &Network,
    params: &ControllerParams,
    hill: Option<&HillParams>,
) -> Result<Network> {
    if plant.species_index(CONTROLLER_SPECIES).is_some() {
        return Err(Error::InvalidParameter(format!(
            "plant already declares a species named `{CONTROLLER_SPECIES}`"
        )));
    }
    let mut species = plant.species().to_vec();
    species.push(Species::new(CONTROLLER_SPECIES, params.v0));

    let controlled = plant.species()[plant.controlled_index()].name.clone();
    let actuated = plant.species()[plant.actuated_index()].name.clone();

    let mut reactions: Vec<ReactionDef> = plant
        .reactions()
        .iter()
        .map(|r| ReactionDef {
            reactants: r
                .reactants()
                .iter()
                .map(|&(i, c)| (plant.species()[i].name.clone(), c))
                .collect(),
            products: r
                .products()
                .iter()
                .map(|&(i, c)| (plant.species()[i].name.clone(), c))
                .collect(),
            rate_constant: r.rate_constant(),
            rate_law: r.rate_law(),
        })
        .collect();

    let v = CONTROLLER_SPECIES;
    let reference_law = match hill {
        None => RateLaw::MassAction,
        Some(h) => RateLaw::HillRepressed {
            theta: h.theta,
            numerator: params.alpha * h.theta * params.mu,
        },
    };
    reactions.push(ReactionDef {
        reactants: vec![(v.into(), 1)],
        products: vec![(v.into(), 2)],
        rate_constant: params.alpha * params.mu,
        rate_law: reference_law,
    });
    reactions.push(ReactionDef::mass_action(
        &[(v, 1), (&controlled, 1)],
        &[(&controlled, 1)],
        params.alpha,
    ));
    reactions.push(ReactionDef::mass_action(
        &[(v, 1)],
        &[(v, 1), (&actuated, 1)],
        params.k,
    ));

    Network::new(species, reactions, &controlled, &actuated)
}

/// Attach the ideal integral controller to a plant.
pub fn attach_integral_controller(plant: Network, params: ControllerParams) -> Result<ClosedLoop> {
    params.validate()?;
    let combined = build_combined(&plant, &params, None)?;
    Ok(ClosedLoop {
        plant,
        params,
        hill: None,
        combined,
    })
}

/// Attach the practical controller whose reference reaction saturates as
/// `h_θ(v) = αθμ/(θ+v)`.
pub fn attach_hill_controller(
    plant: Network,
    params: ControllerParams,
    hill: HillParams,
) -> Result<ClosedLoop> {
    params.validate()?;
    let combined = build_combined(&plant, &params, Some(&hill))?;
    Ok(ClosedLoop {
        plant,
        params,
        hill: Some(hill),
        combined,
    })
}

impl ClosedLoop {
    pub fn plant(&self) -> &Network {
        &self.plant
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn hill(&self) -> Option<&HillParams> {
        self.hill.as_ref()
    }

    /// The combined plant + controller network.
    pub fn network(&self) -> &Network {
        &self.combined
    }

    /// Total state dimension (plant species plus `v`).
    pub fn dim(&self) -> usize {
        self.plant.dim() + 1
    }

    /// Index of the controller species in the combined state.
    pub fn v_index(&self) -> usize {
        self.plant.dim()
    }

    /// Index of the controlled output in the combined state.
    pub fn output_index(&self) -> usize {
        self.plant.controlled_index()
    }

    pub fn initial_state(&self) -> DVector<f64> {
        self.combined.initial_state()
    }

    /// Column names of a closed-loop trajectory: plant species then `v`.
    pub fn state_names(&self) -> Vec<String> {
        self.combined.species_names()
    }

    /// Index of a controller reaction within the combined reaction list.
    pub fn controller_reaction(&self, offset: usize) -> usize {
        self.plant.reactions().len() + offset
    }

    /// Rebuild with a new parameter set (used by scheduled runs).
    pub fn with_params(&self, params: ControllerParams) -> Result<Self> {
        params.validate()?;
        let combined = build_combined(&self.plant, &params, self.hill.as_ref())?;
        Ok(Self {
            plant: self.plant.clone(),
            params,
            hill: self.hill,
            combined,
        })
    }

    /// Rebuild with a new Hill saturation scale. Errors when the loop was
    /// built with the ideal (non-saturating) reference reaction.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        if self.hill.is_none() {
            return Err(Error::InvalidParameter(
                "theta is only meaningful for the Hill controller variant".into(),
            ));
        }
        let hill = HillParams::new(theta)?;
        let combined = build_combined(&self.plant, &self.params, Some(&hill))?;
        Ok(Self {
            plant: self.plant.clone(),
            params: self.params,
            hill: Some(hill),
            combined,
        })
    }

    /// Rebuild with a new rate constant on plant reaction `k`.
    pub fn with_plant_rate(&self, reaction: usize, rate: f64) -> Result<Self> {
        if reaction >= self.plant.reactions().len() {
            return Err(Error::InvalidParameter(format!(
                "plant reaction index {reaction} out of range"
            )));
        }
        let mut plant = self.plant.clone();
        plant.set_rate_constant(reaction, rate)?;
        let combined = build_combined(&plant, &self.params, self.hill.as_ref())?;
        Ok(Self {
            plant,
            params: self.params,
            hill: self.hill,
            combined,
        })
    }
}
