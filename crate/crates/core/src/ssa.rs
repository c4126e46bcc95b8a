//! Stochastic simulation (Gillespie direct method) of a closed loop at
//! finite copy numbers.
//!
//! Concentrations are converted to counts through a volume scale factor
//! (counts per concentration unit). The controller species `v` has an
//! absorbing state at zero: the measurement reaction can deplete it
//! entirely and no reaction produces `v` from nothing, so once the count
//! hits zero the controller is dead and the output decays. The first
//! passage to zero is reported as the extinction time.

use crate::controller::ClosedLoop;
use crate::error::{Error, Result};
use crate::network::{Network, RateLaw};

/// SplitMix64: tiny, seedable, reproducible. Not cryptographic.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in (0, 1].
    pub fn next_f64(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) / (1u64 << 53) as f64
    }

    /// Exponential waiting time with the given total rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -self.next_f64().ln() / rate
    }
}

/// Options for one SSA run.
#[derive(Debug, Clone, Copy)]
pub struct SsaOptions {
    pub t_end: f64,
    pub seed: u64,
    /// Number of fixed-grid snapshots over `[0, t_end]`.
    pub samples: usize,
    pub max_events: u64,
}

impl Default for SsaOptions {
    fn default() -> Self {
        Self {
            t_end: 100.0,
            seed: 1,
            samples: 1000,
            max_events: 50_000_000,
        }
    }
}

/// A sampled stochastic trajectory in molecule counts.
#[derive(Debug, Clone)]
pub struct SsaTrajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// Row-major counts, one row per sample time.
    pub counts: Vec<i64>,
    pub n_species: usize,
    /// First time the controller species count reached zero, if it did.
    pub extinction_time: Option<f64>,
    pub n_events: u64,
    pub final_counts: Vec<i64>,
}

impl SsaTrajectory {
    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.counts[i * self.n_species..(i + 1) * self.n_species]
    }

    pub fn count(&self, i: usize, species: usize) -> i64 {
        self.counts[i * self.n_species + species]
    }

    /// Concentration-scale column (counts divided by the volume scale).
    pub fn concentration_column(&self, species: usize, volume_scale: f64) -> Vec<f64> {
        (0..self.n_rows())
            .map(|i| self.count(i, species) as f64 / volume_scale)
            .collect()
    }
}

fn propensity_counts(network: &Network, k: usize, counts: &[i64], volume_scale: f64) -> Result<f64> {
    let r = &network.reactions()[k];
    let q = r.rate_constant();
    let p = match r.order() {
        0 => q * volume_scale,
        1 => {
            let (i, _) = r.reactants()[0];
            q * counts[i] as f64
        }
        2 => {
            if r.reactants().len() == 2 {
                let (i, _) = r.reactants()[0];
                let (j, _) = r.reactants()[1];
                q / volume_scale * counts[i] as f64 * counts[j] as f64
            } else {
                // 2A → …: propensity (q/V)·n(n−1) reproduces ẋ = −2q x².
                let (i, _) = r.reactants()[0];
                q / volume_scale * counts[i] as f64 * (counts[i] - 1) as f64
            }
        }
        order => {
            return Err(Error::Stochastic(format!(
                "reaction {k} has order {order}; SSA supports at most bimolecular reactions"
            )))
        }
    };
    Ok(p)
}

/// Gillespie direct-method simulation of a closed loop.
///
/// `volume_scale` converts concentrations to counts (counts = conc ×
/// scale). Initial concentrations must land on integers within 1e-9.
/// The Hill reference variant has no counts-based propensity here and is
/// rejected. Identical seeds reproduce the event sequence bit for bit.
pub fn ssa_simulate(
    closed: &ClosedLoop,
    volume_scale: f64,
    opts: &SsaOptions,
) -> Result<SsaTrajectory> {
    let network = closed.network();
    ssa_simulate_network(network, Some(closed.v_index()), volume_scale, opts)
}

/// SSA over a plain network; `watch` optionally designates a species whose
/// first passage to zero is recorded as the extinction time.
pub fn ssa_simulate_network(
    network: &Network,
    watch: Option<usize>,
    volume_scale: f64,
    opts: &SsaOptions,
) -> Result<SsaTrajectory> {
    if !(volume_scale > 0.0) || !volume_scale.is_finite() {
        return Err(Error::Stochastic(format!(
            "volume scale must be positive and finite, got {volume_scale}"
        )));
    }
    if !(opts.t_end > 0.0) || opts.samples < 2 {
        return Err(Error::Stochastic(
            "t_end must be positive and samples at least 2".into(),
        ));
    }
    if network
        .reactions()
        .iter()
        .any(|r| !matches!(r.rate_law(), RateLaw::MassAction))
    {
        return Err(Error::Stochastic(
            "SSA requires mass-action kinetics; the Hill reference reaction is not supported"
                .into(),
        ));
    }

    let n = network.dim();
    let mut counts: Vec<i64> = Vec::with_capacity(n);
    for s in network.species() {
        let c = s.initial_concentration * volume_scale;
        if (c - c.round()).abs() > 1e-9 * (1.0 + c.abs()) {
            return Err(Error::Stochastic(format!(
                "initial count for `{}` is not an integer ({} × {} = {})",
                s.name, s.initial_concentration, volume_scale, c
            )));
        }
        counts.push(c.round() as i64);
    }

    let n_reactions = network.reactions().len();
    let mut rng = SplitMix64::new(opts.seed);
    let grid: Vec<f64> = (0..opts.samples)
        .map(|i| opts.t_end * i as f64 / (opts.samples - 1) as f64)
        .collect();

    let mut sampled: Vec<i64> = Vec::with_capacity(opts.samples * n);
    let mut next_sample = 0usize;
    let mut t = 0.0;
    let mut n_events = 0u64;
    let mut extinction_time = watch.and_then(|w| (counts[w] == 0).then_some(0.0));

    let mut propensities = vec![0.0; n_reactions];
    loop {
        let mut total = 0.0;
        for (k, slot) in propensities.iter_mut().enumerate() {
            *slot = propensity_counts(network, k, &counts, volume_scale)?;
            total += *slot;
        }

        let t_next = if total > 0.0 {
            t + rng.exponential(total)
        } else {
            f64::INFINITY
        };

        // The state holds on [t, t_next); samples at exactly t_next pick up
        // the post-jump state on the next pass.
        while next_sample < grid.len() && grid[next_sample] < t_next {
            sampled.extend_from_slice(&counts);
            next_sample += 1;
        }

        if t_next > opts.t_end || !t_next.is_finite() {
            break;
        }
        t = t_next;
        n_events += 1;
        if n_events > opts.max_events {
            return Err(Error::Stochastic(format!(
                "event count exceeded {} before t_end",
                opts.max_events
            )));
        }

        let mut pick = rng.next_f64() * total;
        let mut chosen = n_reactions - 1;
        for (k, &p) in propensities.iter().enumerate() {
            pick -= p;
            if pick <= 0.0 {
                chosen = k;
                break;
            }
        }
        let reaction = &network.reactions()[chosen];
        for &(i, c) in reaction.reactants() {
            counts[i] -= c as i64;
            if counts[i] < 0 {
                return Err(Error::Stochastic(format!(
                    "species {} count went negative; propensity bookkeeping is inconsistent",
                    network.species()[i].name
                )));
            }
        }
        for &(i, c) in reaction.products() {
            counts[i] += c as i64;
            if counts[i] > i64::MAX / 2 {
                return Err(Error::Stochastic(format!(
                    "species {} count overflow",
                    network.species()[i].name
                )));
            }
        }
        if let Some(w) = watch {
            if extinction_time.is_none() && counts[w] == 0 {
                extinction_time = Some(t);
            }
        }
    }

    while next_sample < grid.len() {
        sampled.extend_from_slice(&counts);
        next_sample += 1;
    }

    Ok(SsaTrajectory {
        times: grid,
        names: network.species_names(),
        counts: sampled,
        n_species: n,
        extinction_time,
        n_events,
        final_counts: counts,
    })
}
