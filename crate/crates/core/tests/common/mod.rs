//! Shared fixtures for the integration tests: the case-study networks and
//! the independent oracles (finite differences, eigenvalue bisection)
//! used to cross-check the analytic paths.
#![allow(dead_code)]

use crnctl_core::network::{LinearForm, Network, ReactionDef, Species};
use crnctl_core::ssa::SplitMix64;
use nalgebra::{DMatrix, DVector, RowDVector};

// Nominal gene-expression parameters (mRNA decay, translation, protein
// decay, maturation, mature-protein decay).
pub const GE_GAMMA_M: f64 = 1.2337;
pub const GE_K_P: f64 = 1.4513;
pub const GE_GAMMA_P: f64 = 3.0155;
pub const GE_K_Q: f64 = 2.3679;
pub const GE_GAMMA_Q: f64 = 1.1114;

/// Closed-form static gain of the gene-expression plant:
/// `g = k_p k_q / (γ_m (γ_p + k_q) γ_q)`.
pub fn gene_expression_gain(gm: f64, kp: f64, gp: f64, kq: f64, gq: f64) -> f64 {
    kp * kq / (gm * (gp + kq) * gq)
}

/// `∅ -> x` at `k_b`, `x -> ∅` at `γ`; controlled = actuated = x.
pub fn birth_death(k_b: f64, gamma: f64) -> Network {
    Network::new(
        vec![Species::new("x", 0.0)],
        vec![
            ReactionDef::mass_action(&[], &[("x", 1)], k_b),
            ReactionDef::mass_action(&[("x", 1)], &[], gamma),
        ],
        "x",
        "x",
    )
    .unwrap()
}

/// Pure death process `x -> ∅` at `γ` (the DSD case study's plant).
pub fn death_process(gamma: f64) -> Network {
    Network::new(
        vec![Species::new("x", 0.0)],
        vec![ReactionDef::mass_action(&[("x", 1)], &[], gamma)],
        "x",
        "x",
    )
    .unwrap()
}

/// Gene expression with maturation. Species m, p, q; the transcription
/// input is the actuation channel, so no constitutive production reaction
/// is part of the plant. Reactions (in index order):
/// 0: m decay, 1: translation, 2: p decay, 3: maturation, 4: q decay.
pub fn gene_expression(gm: f64, kp: f64, gp: f64, kq: f64, gq: f64) -> Network {
    Network::new(
        vec![
            Species::new("m", 0.0),
            Species::new("p", 0.0),
            Species::new("q", 0.0),
        ],
        vec![
            ReactionDef::mass_action(&[("m", 1)], &[], gm),
            ReactionDef::mass_action(&[("m", 1)], &[("m", 1), ("p", 1)], kp),
            ReactionDef::mass_action(&[("p", 1)], &[], gp),
            ReactionDef::mass_action(&[("p", 1)], &[("q", 1)], kq),
            ReactionDef::mass_action(&[("q", 1)], &[], gq),
        ],
        "q",
        "m",
    )
    .unwrap()
}

pub fn gene_expression_nominal() -> Network {
    gene_expression(GE_GAMMA_M, GE_K_P, GE_GAMMA_P, GE_K_Q, GE_GAMMA_Q)
}

pub const GE_TRANSLATION_REACTION: usize = 1;
pub const GE_MATURE_DECAY_REACTION: usize = 4;

/// Reversible dimerization: x1 decays, 2·x1 ⇌ x2, x2 decays. The protein
/// x1 is actuated, the homodimer x2 is controlled.
pub fn dimerization(g1: f64, k12: f64, g2: f64, k21: f64) -> Network {
    Network::new(
        vec![Species::new("x1", 0.0), Species::new("x2", 0.0)],
        vec![
            ReactionDef::mass_action(&[("x1", 1)], &[], g1),
            ReactionDef::mass_action(&[("x1", 2)], &[("x2", 1)], k12),
            ReactionDef::mass_action(&[("x2", 1)], &[("x1", 2)], k21),
            ReactionDef::mass_action(&[("x2", 1)], &[], g2),
        ],
        "x2",
        "x1",
    )
    .unwrap()
}

pub const DIMER_G1_REACTION: usize = 0;

/// Central finite-difference Jacobian, the independent oracle for the
/// analytic one.
pub fn fd_jacobian(net: &Network, x: &DVector<f64>) -> DMatrix<f64> {
    let d = net.dim();
    let mut jac = DMatrix::zeros(d, d);
    for j in 0..d {
        let h = 1e-6 * (1.0 + x[j].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] = (xm[j] - h).max(0.0);
        let span = xp[j] - xm[j];
        let fp = net.evaluate_rhs(&xp).unwrap();
        let fm = net.evaluate_rhs(&xm).unwrap();
        for i in 0..d {
            jac[(i, j)] = (fp[i] - fm[i]) / span;
        }
    }
    jac
}

/// Spectral abscissa of the positive-equilibrium Jacobian at a given α,
/// built directly from (A, B, C, μ) — the eigenvalue route, independent
/// of the crossing-polynomial construction.
pub fn abscissa_direct(lin: &LinearForm, mu: f64, alpha: f64) -> f64 {
    let d = lin.a.nrows();
    let a_inv = lin.a.clone().try_inverse().expect("A invertible");
    let g = -(&lin.output * &a_inv * &lin.input)[0];
    let v_star = mu / g; // k = 1
    let mut m = DMatrix::<f64>::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(&lin.a);
    for i in 0..d {
        m[(i, d)] = lin.input[i];
    }
    for j in 0..d {
        m[(d, j)] = -alpha * v_star * lin.output[j];
    }
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Brute-force stability threshold by geometric scan plus bisection on the
/// spectral abscissa. Returns `f64::INFINITY` when the loop stays stable
/// up to α = 1e12.
pub fn alpha_bar_bisect(lin: &LinearForm, mu: f64) -> f64 {
    let chi = |alpha: f64| abscissa_direct(lin, mu, alpha);
    let mut lo = 1e-9;
    assert!(chi(lo) < 0.0, "loop must be stable for tiny alpha");
    let mut hi = None;
    let mut a = lo;
    while a < 1e12 {
        let next = a * 1.02;
        if chi(next) >= 0.0 {
            lo = a;
            hi = Some(next);
            break;
        }
        a = next;
    }
    let Some(mut hi) = hi else {
        return f64::INFINITY;
    };
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-9 * lo {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Random Hurwitz–Metzler triplet (A, B, C). Diagonal dominance makes A
/// Hurwitz by construction; cascade-shaped triplets guarantee relative
/// degree ≥ d, which produces finite thresholds.
pub fn random_triplet(rng: &mut SplitMix64, d: usize, cascade: bool) -> LinearForm {
    let uniform = |rng: &mut SplitMix64| rng.next_f64();
    let mut a = DMatrix::<f64>::zeros(d, d);
    if cascade {
        for i in 1..d {
            a[(i, i - 1)] = 0.2 + 2.0 * uniform(rng);
        }
    } else {
        for i in 0..d {
            for j in 0..d {
                if i != j && uniform(rng) < 0.7 {
                    a[(i, j)] = uniform(rng);
                }
            }
        }
    }
    for i in 0..d {
        let row_sum: f64 = (0..d).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        a[(i, i)] = -(row_sum + 0.1 + 2.0 * uniform(rng));
    }
    let mut input = DVector::zeros(d);
    let mut output = RowDVector::zeros(d);
    if cascade {
        input[0] = 1.0;
        output[d - 1] = 1.0;
    } else {
        input[(uniform(rng) * d as f64) as usize % d] = 1.0;
        output[(uniform(rng) * d as f64) as usize % d] = 1.0;
    }
    LinearForm {
        a,
        offset: DVector::zeros(d),
        input,
        output,
        dist: DMatrix::zeros(d, 0),
        unimolecular: true,
    }
}

/// Random mass-action network over `n` species with mixed reaction orders.
pub fn random_network(rng: &mut SplitMix64, n: usize, reactions: usize) -> Network {
    let species: Vec<Species> = (0..n)
        .map(|i| Species::new(format!("s{i}"), 2.0 * rng.next_f64()))
        .collect();
    let names: Vec<String> = species.iter().map(|s| s.name.clone()).collect();
    let mut defs = Vec::with_capacity(reactions);
    for _ in 0..reactions {
        let order = (rng.next_f64() * 3.0) as u32 % 3;
        let mut reactants: Vec<(String, u32)> = Vec::new();
        for _ in 0..order {
            let s = (rng.next_f64() * n as f64) as usize % n;
            if let Some(e) = reactants.iter_mut().find(|(name, _)| *name == names[s]) {
                e.1 += 1;
            } else {
                reactants.push((names[s].clone(), 1));
            }
        }
        let n_products = (rng.next_f64() * 2.0) as usize + if order == 0 { 1 } else { 0 };
        let mut products: Vec<(String, u32)> = Vec::new();
        for _ in 0..n_products {
            let s = (rng.next_f64() * n as f64) as usize % n;
            if let Some(e) = products.iter_mut().find(|(name, _)| *name == names[s]) {
                e.1 += 1;
            } else {
                products.push((names[s].clone(), 1));
            }
        }
        defs.push(ReactionDef {
            reactants,
            products,
            rate_constant: 0.1 + 2.0 * rng.next_f64(),
            rate_law: crnctl_core::network::RateLaw::MassAction,
        });
    }
    Network::new(species, defs, &names[n - 1], &names[0]).unwrap()
}

/// Max of |column − target|/target over grid times in [from, to].
pub fn max_tracking_error(
    traj: &crnctl_core::sim::Trajectory,
    col: usize,
    target: f64,
    from: f64,
    to: f64,
) -> f64 {
    let mut worst = 0.0_f64;
    for (i, &t) in traj.times().iter().enumerate() {
        if t >= from && t <= to {
            worst = worst.max((traj.value(i, col) - target).abs() / target);
        }
    }
    worst
}

/// For each schedule segment, the worst tracking error beyond the settling
/// window (`fraction` of the segment length). `segments` are
/// (start, end, target) triples.
pub fn settled_errors(
    traj: &crnctl_core::sim::Trajectory,
    col: usize,
    segments: &[(f64, f64, f64)],
    fraction: f64,
) -> Vec<f64> {
    segments
        .iter()
        .map(|&(start, end, target)| {
            let window_start = start + fraction * (end - start);
            max_tracking_error(traj, col, target, window_start, end)
        })
        .collect()
}

/// Worst tracking error in the tail of each segment (the last tenth),
/// the "settled before the switch" reading of the tracking checks.
pub fn pre_switch_errors(
    traj: &crnctl_core::sim::Trajectory,
    col: usize,
    segments: &[(f64, f64, f64)],
) -> Vec<f64> {
    segments
        .iter()
        .map(|&(start, end, target)| {
            let tail = end - 0.1 * (end - start);
            max_tracking_error(traj, col, target, tail, end)
        })
        .collect()
}

pub fn max_rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::new(seed)
}
