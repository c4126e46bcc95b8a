//! Deterministic mass-action reaction networks.
//!
//! A [`Network`] is an ordered list of species plus a list of reactions.
//! Species order is declaration order and fixes vector indexing everywhere:
//! state vectors, Jacobians, trajectory columns, and CSV output all use it.
//!
//! The right-hand side of the reaction rate equations is
//! `f(x) = Σ_k λ_k(x) ζ_k`, where `λ_k` is the propensity of reaction `k`
//! and `ζ_k` its net stoichiometric change.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// A molecular species with its initial concentration (nM by convention).
#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub initial_concentration: f64,
}

impl Species {
    pub fn new(name: impl Into<String>, initial_concentration: f64) -> Self {
        Self {
            name: name.into(),
            initial_concentration,
        }
    }
}

/// Kinetic law of a reaction.
///
/// Units of the rate constant follow reaction order: s⁻¹ for first-order,
/// conc⁻¹s⁻¹ for second-order, conc·s⁻¹ for zeroth-order. No unit algebra
/// is performed anywhere in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateLaw {
    /// Propensity `rate · Π x_i^{c_i}` over the reactant multiset.
    MassAction,
    /// Repressive saturation on a single reactant `r`:
    /// propensity `numerator · x_r / (theta + x_r)`.
    ///
    /// Used for the practical (Hill) variant of the controller reference
    /// reaction; the DSD compiler and the SSA engine reject it explicitly.
    HillRepressed { theta: f64, numerator: f64 },
}

/// A reaction written against species names, before resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionDef {
    pub reactants: Vec<(String, u32)>,
    pub products: Vec<(String, u32)>,
    pub rate_constant: f64,
    pub rate_law: RateLaw,
}

impl ReactionDef {
    pub fn mass_action(
        reactants: &[(&str, u32)],
        products: &[(&str, u32)],
        rate_constant: f64,
    ) -> Self {
        Self {
            reactants: reactants.iter().map(|(n, c)| (n.to_string(), *c)).collect(),
            products: products.iter().map(|(n, c)| (n.to_string(), *c)).collect(),
            rate_constant,
            rate_law: RateLaw::MassAction,
        }
    }
}

/// A validated reaction with species resolved to indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    reactants: Vec<(usize, u32)>,
    products: Vec<(usize, u32)>,
    rate_constant: f64,
    rate_law: RateLaw,
    /// Net stoichiometric change ζ, sparse over touched species.
    delta: Vec<(usize, f64)>,
}

impl Reaction {
    pub fn reactants(&self) -> &[(usize, u32)] {
        &self.reactants
    }

    pub fn products(&self) -> &[(usize, u32)] {
        &self.products
    }

    pub fn rate_constant(&self) -> f64 {
        self.rate_constant
    }

    pub fn rate_law(&self) -> RateLaw {
        self.rate_law
    }

    /// Total reactant molecularity (0 = zeroth order, 1 = unimolecular, ...).
    pub fn order(&self) -> u32 {
        self.reactants.iter().map(|&(_, c)| c).sum()
    }

    /// Propensity λ(x) for nonnegative states. Mass-action states that dip
    /// slightly negative inside integrator stages are evaluated as the same
    /// polynomial, which keeps the right-hand side smooth.
    fn propensity(&self, x: &[f64]) -> f64 {
        match self.rate_law {
            RateLaw::MassAction => {
                let mut p = self.rate_constant;
                for &(i, c) in &self.reactants {
                    p *= x[i].powi(c as i32);
                }
                p
            }
            RateLaw::HillRepressed { theta, numerator } => {
                let (i, _) = self.reactants[0];
                numerator * x[i] / (theta + x[i])
            }
        }
    }

    /// ∂λ/∂x_j, analytic.
    fn propensity_grad(&self, x: &[f64], j: usize) -> f64 {
        match self.rate_law {
            RateLaw::MassAction => {
                let mut found = false;
                let mut g = self.rate_constant;
                for &(i, c) in &self.reactants {
                    if i == j {
                        found = true;
                        g *= c as f64
                            * if c > 1 {
                                x[i].powi(c as i32 - 1)
                            } else {
                                1.0
                            };
                    } else {
                        g *= x[i].powi(c as i32);
                    }
                }
                if found {
                    g
                } else {
                    0.0
                }
            }
            RateLaw::HillRepressed { theta, numerator } => {
                let (i, _) = self.reactants[0];
                if i == j {
                    numerator * theta / ((theta + x[i]) * (theta + x[i]))
                } else {
                    0.0
                }
            }
        }
    }
}

/// A validated reaction network with designated controlled and actuated species.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    controlled: usize,
    actuated: usize,
}

impl Network {
    /// Build and validate a network. Species order is preserved as given.
    ///
    /// Fails on duplicate species names, reactions referencing undeclared
    /// species, and nonpositive rate constants.
    pub fn new(
        species: Vec<Species>,
        reactions: Vec<ReactionDef>,
        controlled: &str,
        actuated: &str,
    ) -> Result<Self> {
        for s in &species {
            if s.initial_concentration < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "species `{}` has negative initial concentration",
                    s.name
                )));
            }
        }
        for (i, s) in species.iter().enumerate() {
            if species[..i].iter().any(|t| t.name == s.name) {
                return Err(Error::DuplicateSpecies(s.name.clone()));
            }
        }
        let index_of = |name: &str, reaction: usize| -> Result<usize> {
            species
                .iter()
                .position(|s| s.name == name)
                .ok_or_else(|| Error::UnknownSpecies {
                    reaction,
                    name: name.to_string(),
                })
        };

        let mut resolved = Vec::with_capacity(reactions.len());
        for (k, def) in reactions.iter().enumerate() {
            if !(def.rate_constant > 0.0) {
                return Err(Error::NonPositiveRate {
                    reaction: k,
                    rate: def.rate_constant,
                });
            }
            // Participant lists are canonicalized by species index so that
            // structurally equal reactions compare equal.
            let mut reactants = Vec::with_capacity(def.reactants.len());
            for (name, c) in &def.reactants {
                reactants.push((index_of(name, k)?, *c));
            }
            reactants.sort_by_key(|&(i, _)| i);
            let mut products = Vec::with_capacity(def.products.len());
            for (name, c) in &def.products {
                products.push((index_of(name, k)?, *c));
            }
            products.sort_by_key(|&(i, _)| i);
            if let RateLaw::HillRepressed { theta, numerator } = def.rate_law {
                if reactants.len() != 1 || reactants[0].1 != 1 {
                    return Err(Error::InvalidRateLaw {
                        reaction: k,
                        reason: "hill_repressed requires exactly one reactant of count 1".into(),
                    });
                }
                if !(theta > 0.0) || !(numerator > 0.0) {
                    return Err(Error::InvalidRateLaw {
                        reaction: k,
                        reason: format!("theta ({theta}) and numerator ({numerator}) must be > 0"),
                    });
                }
            }
            let mut delta: Vec<(usize, f64)> = Vec::new();
            let mut bump = |i: usize, d: f64| {
                if let Some(e) = delta.iter_mut().find(|(j, _)| *j == i) {
                    e.1 += d;
                } else {
                    delta.push((i, d));
                }
            };
            for &(i, c) in &reactants {
                bump(i, -(c as f64));
            }
            for &(i, c) in &products {
                bump(i, c as f64);
            }
            delta.retain(|&(_, d)| d != 0.0);
            resolved.push(Reaction {
                reactants,
                products,
                rate_constant: def.rate_constant,
                rate_law: def.rate_law,
                delta,
            });
        }

        let controlled = index_of(controlled, usize::MAX).map_err(|_| {
            Error::InvalidParameter(format!("controlled species `{controlled}` not declared"))
        })?;
        let actuated = index_of(actuated, usize::MAX).map_err(|_| {
            Error::InvalidParameter(format!("actuated species `{actuated}` not declared"))
        })?;

        Ok(Self {
            species,
            reactions: resolved,
            controlled,
            actuated,
        })
    }

    pub fn dim(&self) -> usize {
        self.species.len()
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.name.clone()).collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn controlled_index(&self) -> usize {
        self.controlled
    }

    pub fn actuated_index(&self) -> usize {
        self.actuated
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.species.iter().map(|s| s.initial_concentration),
        )
    }

    /// True when every reaction is mass-action of order ≤ 1.
    pub fn is_unimolecular(&self) -> bool {
        self.reactions
            .iter()
            .all(|r| r.rate_law == RateLaw::MassAction && r.order() <= 1)
    }

    pub fn is_mass_action(&self) -> bool {
        self.reactions
            .iter()
            .all(|r| r.rate_law == RateLaw::MassAction)
    }

    pub fn max_order(&self) -> u32 {
        self.reactions.iter().map(Reaction::order).max().unwrap_or(0)
    }

    /// Replace the rate constant of reaction `k`. For a Hill-rate reaction
    /// the saturation numerator is scaled along with the nominal constant.
    pub fn set_rate_constant(&mut self, k: usize, rate: f64) -> Result<()> {
        if k >= self.reactions.len() {
            return Err(Error::InvalidParameter(format!(
                "reaction index {k} out of range"
            )));
        }
        if !(rate > 0.0) {
            return Err(Error::NonPositiveRate { reaction: k, rate });
        }
        let r = &mut self.reactions[k];
        if let RateLaw::HillRepressed { numerator, .. } = &mut r.rate_law {
            *numerator *= rate / r.rate_constant;
        }
        r.rate_constant = rate;
        Ok(())
    }

    /// Propensities λ_k(x) of every reaction, unvalidated state.
    pub fn propensities(&self, x: &[f64]) -> Vec<f64> {
        self.reactions.iter().map(|r| r.propensity(x)).collect()
    }

    /// In-place right-hand side without the nonnegativity check. Used by
    /// the integrator, whose stages may probe slightly negative states.
    pub(crate) fn rhs_into_unchecked(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for r in &self.reactions {
            let p = r.propensity(x);
            for &(i, d) in &r.delta {
                out[i] += p * d;
            }
        }
    }

    /// Evaluate the reaction rate equations `f(x)`.
    ///
    /// The state must be entrywise nonnegative; this guarantees the
    /// positivity condition `f_i(x) ≥ 0` whenever `x_i = 0`.
    pub fn evaluate_rhs(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state has {} entries, network has {} species",
                x.len(),
                self.dim()
            )));
        }
        for (i, &v) in x.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeState { index: i, value: v });
            }
        }
        let mut out = DVector::zeros(self.dim());
        self.rhs_into_unchecked(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Analytic Jacobian ∂f/∂x at `x`.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let mut jac = DMatrix::zeros(d, d);
        for r in &self.reactions {
            for &(j, _) in r.reactants() {
                let g = r.propensity_grad(x.as_slice(), j);
                if g != 0.0 {
                    for &(i, dlt) in &r.delta {
                        jac[(i, j)] += g * dlt;
                    }
                }
            }
        }
        jac
    }

    /// Linearize the network around `point`: `f(x) ≈ A x + b` with
    /// `A = ∂f/∂x(point)` and `b = f(point) − A·point`.
    ///
    /// For unimolecular networks the representation is exact and
    /// point-independent; `b` is then taken as `f(0)` so that no
    /// cancellation noise enters the offset.
    pub fn linearize(&self, point: &DVector<f64>) -> Result<LinearForm> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "linearization point has {} entries, network has {} species",
                point.len(),
                self.dim()
            )));
        }
        for (i, &v) in point.iter().enumerate() {
            if v < 0.0 {
                return Err(Error::NegativeState { index: i, value: v });
            }
        }
        let d = self.dim();
        let a = self.jacobian(point);
        let unimolecular = self.is_unimolecular();
        let offset = if unimolecular {
            let zero = vec![0.0; d];
            let mut b = vec![0.0; d];
            self.rhs_into_unchecked(&zero, &mut b);
            DVector::from_vec(b)
        } else {
            let mut f = vec![0.0; d];
            self.rhs_into_unchecked(point.as_slice(), &mut f);
            DVector::from_vec(f) - &a * point
        };
        let mut input = DVector::zeros(d);
        input[self.actuated] = 1.0;
        let mut output = RowDVector::zeros(d);
        output[self.controlled] = 1.0;
        Ok(LinearForm {
            a,
            offset,
            input,
            output,
            dist: DMatrix::zeros(d, 0),
            unimolecular,
        })
    }

    /// Human-readable rendering of reaction `k`, e.g. `x + v -> x  [9e-1]`.
    pub fn format_reaction(&self, k: usize) -> String {
        let side = |terms: &[(usize, u32)]| -> String {
            if terms.is_empty() {
                return "0".to_string();
            }
            terms
                .iter()
                .map(|&(i, c)| {
                    if c == 1 {
                        self.species[i].name.clone()
                    } else {
                        format!("{}{}", c, self.species[i].name)
                    }
                })
                .collect::<Vec<_>>()
                .join(" + ")
        };
        let r = &self.reactions[k];
        let law = match r.rate_law {
            RateLaw::MassAction => format!("{:e}", r.rate_constant),
            RateLaw::HillRepressed { theta, numerator } => {
                format!("hill({:e}, theta={:e})", numerator, theta)
            }
        };
        format!(
            "{} -> {}  [{}]",
            side(&r.reactants),
            side(&r.products),
            law
        )
    }
}

/// Linear state-space form `ẋ = A x + b + B u + E d`, `y = C x` of a plant.
///
/// `A` is the state matrix, `offset` the constant production vector `b`,
/// `input` the actuation direction `B`, `output` the measurement row `C`,
/// and `dist` the disturbance input matrix `E` (one column per channel,
/// zero columns when no disturbance is modeled).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub a: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub input: DVector<f64>,
    pub output: RowDVector<f64>,
    pub dist: DMatrix<f64>,
    pub unimolecular: bool,
}

/// Hurwitz margin: eigenvalues must lie left of `−HURWITZ_MARGIN`.
pub const HURWITZ_MARGIN: f64 = 1e-9;

/// Condition-number estimate above which `A` is reported near-singular.
pub const CONDITION_LIMIT: f64 = 1e12;

impl LinearForm {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Attach disturbance input columns.
    pub fn with_disturbance(mut self, e: DMatrix<f64>) -> Result<Self> {
        if e.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "disturbance matrix has {} rows, plant has {} states",
                e.nrows(),
                self.dim()
            )));
        }
        self.dist = e;
        Ok(self)
    }

    /// Solve `A z = rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let lu = self.a.clone().lu();
        lu.solve(rhs)
            .ok_or_else(|| Error::SingularSystem("A is singular".into()))
    }

    /// Static gain `g = −C A⁻¹ B`, computed through a linear solve.
    pub fn static_gain(&self) -> Result<f64> {
        let z = self.solve(&self.input)?;
        Ok(-(&self.output * z)[0])
    }

    /// `C A⁻¹ v` for an arbitrary vector, via linear solve.
    pub fn output_response(&self, v: &DVector<f64>) -> Result<f64> {
        let z = self.solve(v)?;
        Ok((&self.output * z)[0])
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.a.clone().complex_eigenvalues().iter().copied().collect()
    }

    pub fn is_metzler(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| i == j || self.a[(i, j)] >= 0.0))
    }

    pub fn is_hurwitz(&self) -> bool {
        self.eigenvalues()
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
            < -HURWITZ_MARGIN
    }
}

/// Structural flags of a linearized plant.
#[derive(Debug, Clone)]
pub struct StructureReport {
    pub is_unimolecular: bool,
    pub is_metzler: bool,
    pub is_hurwitz: bool,
    /// `−max Re λ(A)`; positive for Hurwitz matrices.
    pub spectral_margin: f64,
    pub is_output_controllable: bool,
    pub static_gain: Option<f64>,
    pub eigenvalues_of_a: Vec<Complex<f64>>,
    /// Set when `g` could not be trusted (singular or ill-conditioned `A`).
    pub diagnostic: Option<String>,
}

/// Compute structural flags from a linear form: Metzler sign pattern,
/// Hurwitz spectrum, and output controllability `g = −C A⁻¹ B ≠ 0`.
pub fn structural_checks(linear: &LinearForm) -> StructureReport {
    let eigenvalues = linear.eigenvalues();
    let max_re = eigenvalues
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let is_hurwitz = max_re < -HURWITZ_MARGIN;
    let is_metzler = linear.is_metzler();

    let svd = linear.a.clone().svd(false, false);
    let sv = &svd.singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let (static_gain, is_output_controllable, diagnostic) = if condition > CONDITION_LIMIT {
        (
            None,
            false,
            Some(format!(
                "A is singular or near-singular (condition estimate {condition:.3e}); \
                 static gain undefined"
            )),
        )
    } else {
        match linear.static_gain() {
            Ok(g) => {
                let scale = 1.0 + smax;
                if g.abs() <= 1e-12 * scale {
                    (
                        Some(g),
                        false,
                        Some(format!(
                            "static gain {g:.3e} is numerically zero; output does not \
                             respond to the actuated species"
                        )),
                    )
                } else {
                    (Some(g), true, None)
                }
            }
            Err(e) => (None, false, Some(e.to_string())),
        }
    };

    StructureReport {
        is_unimolecular: linear.unimolecular,
        is_metzler,
        is_hurwitz,
        spectral_margin: -max_re,
        is_output_controllable,
        static_gain,
        eigenvalues_of_a: eigenvalues,
        diagnostic,
    }
}
