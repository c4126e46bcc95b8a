//! Closed-form and numerical analysis of the controlled network:
//! equilibria, local stability, the stability threshold ᾱ, controller
//! tuning, disturbance rejection, and metabolic power.
//!
//! All operations are pure functions over immutable inputs and may run
//! concurrently for different parameter sets.

use nalgebra::{Complex, DMatrix, DVector};

use crate::controller::{ClosedLoop, ControllerParams};
use crate::error::{Error, Result};
use crate::network::{LinearForm, HURWITZ_MARGIN};
use crate::polynomial;

/// The two equilibria of the closed loop built on a linear plant.
///
/// The positive equilibrium satisfies `C x* = μ` exactly; it exists when
/// the effective reference `μ + C A⁻¹ b` is positive (always the case for
/// plants without constant production, `b = 0`).
#[derive(Debug, Clone)]
pub struct EquilibriumPair {
    /// Equilibrium with the controller switched off (`v = 0`).
    pub zero: (DVector<f64>, f64),
    /// The unique equilibrium in the open positive orthant, when it exists.
    pub positive: Option<(DVector<f64>, f64)>,
    /// `μ + C A⁻¹ b`; equals `μ` when the plant has no constant production.
    pub mu_effective: f64,
    /// Static gain `g = −C A⁻¹ B`.
    pub static_gain: f64,
}

/// Closed-form equilibria of the closed loop `ẋ = Ax + b + Bkv`,
/// `v̇ = αv(μ − Cx)`.
pub fn equilibria(linear: &LinearForm, params: &ControllerParams) -> Result<EquilibriumPair> {
    params.validate()?;
    let g = linear.static_gain()?;
    if g == 0.0 {
        return Err(Error::NotOutputControllable(
            "static gain is exactly zero".into(),
        ));
    }
    let zero_x = -linear.solve(&linear.offset)?;
    let mu_effective = params.mu + linear.output_response(&linear.offset)?;
    let positive = if mu_effective > 0.0 {
        let v_star = mu_effective / (g * params.k);
        let total = &linear.offset + &linear.input * (params.k * v_star);
        let x_star = -linear.solve(&total)?;
        Some((x_star, v_star))
    } else {
        None
    };
    Ok(EquilibriumPair {
        zero: (zero_x, 0.0),
        positive,
        mu_effective,
        static_gain: g,
    })
}

/// Spectrum of the closed loop linearized about the zero equilibrium:
/// `λ(A) ∪ {αμ}`. The eigenvalue `αμ > 0` makes the zero equilibrium
/// unstable for every admissible parameter set, so the controller always
/// activates from any `v0 > 0`.
pub fn zero_equilibrium_spectrum(
    linear: &LinearForm,
    params: &ControllerParams,
) -> Vec<Complex<f64>> {
    let mut eig = linear.eigenvalues();
    eig.push(Complex::new(params.alpha * params.mu, 0.0));
    eig
}

/// Spectrum of the closed loop linearized about the positive equilibrium,
/// `M_p = [[A, Bk], [−α v* C, 0]]`.
///
/// The spectrum is invariant under the gain `k` (similarity by
/// `diag(I, k)`), which is what frees `k` for metabolic-load tuning.
pub fn positive_equilibrium_spectrum(
    linear: &LinearForm,
    params: &ControllerParams,
) -> Result<Vec<Complex<f64>>> {
    let eq = equilibria(linear, params)?;
    let (_, v_star) = eq.positive.ok_or_else(|| {
        Error::InvalidParameter(format!(
            "positive equilibrium does not exist (effective reference {} ≤ 0)",
            eq.mu_effective
        ))
    })?;
    let d = linear.dim();
    let mut m = DMatrix::<f64>::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(&linear.a);
    for i in 0..d {
        m[(i, d)] = linear.input[i] * params.k;
    }
    for j in 0..d {
        m[(d, j)] = -params.alpha * v_star * linear.output[j];
    }
    Ok(m.complex_eigenvalues().iter().copied().collect())
}

/// Result of the stability-crossing computation.
#[derive(Debug, Clone)]
pub struct AlphaBar {
    /// Supremum of stability-preserving α; `f64::INFINITY` when the
    /// normalized loop transfer function is weakly strictly positive real.
    pub alpha_bar: f64,
    /// Crossing frequency paired with `alpha_bar` (None when ᾱ = ∞).
    pub omega_star: Option<f64>,
    pub weakly_spr: bool,
    /// Coefficients of the crossing polynomial `Q` in `u = ω²`, ascending.
    pub q_coefficients: Vec<f64>,
    /// Sampled `min_ω Re H_n(jω)` diagnostic, only computed when no
    /// crossing exists.
    pub spr_margin: Option<f64>,
}

/// Compute the stability threshold ᾱ(μ) of the positive equilibrium.
///
/// Builds the normalized loop transfer function
/// `H_n(s) = C(sI−A)⁻¹B / (−CA⁻¹B)` as exact rational polynomials
/// (Faddeev–LeVerrier), forms the crossing polynomial
/// `Q(ω) = N_I D_I + N_R D_R = Re[N(jω) conj(D(jω))]`, and evaluates the
/// crossing value `α(ω) = D_I(ω)·ω / (μ N_R(ω))` (or the companion branch
/// `−D_R(ω)·ω / (μ N_I(ω))`) at every positive real root. ᾱ is the
/// smallest positive crossing value. No positive root means no crossing:
/// ᾱ = ∞ and the transfer function is weakly strictly positive real.
pub fn alpha_bar(linear: &LinearForm, mu: f64) -> Result<AlphaBar> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be > 0, got {mu}")));
    }
    let eig = linear.eigenvalues();
    let abscissa = eig.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= -HURWITZ_MARGIN {
        return Err(Error::NotHurwitz { abscissa });
    }
    let g = linear.static_gain()?;
    if g.abs() < 1e-14 {
        return Err(Error::NotOutputControllable(format!(
            "static gain {g:.3e} too small for a meaningful threshold"
        )));
    }

    let (den, num_raw) = polynomial::transfer_function(&linear.a, &linear.input, &linear.output);
    let num: Vec<f64> = num_raw.iter().map(|c| c / g).collect();
    debug_assert!(
        (num[0] - den[0]).abs() <= 1e-8 * (1.0 + den[0].abs()),
        "normalization should give H_n(0) = 1"
    );

    // Q(ω) = Re[N(jω) conj(D(jω))] is even in ω; express it in u = ω².
    let r = polynomial::mul(&num, &polynomial::flip_argument(&den));
    let q: Vec<f64> = r
        .iter()
        .step_by(2)
        .enumerate()
        .map(|(m, &c)| if m % 2 == 1 { -c } else { c })
        .collect();

    let q_scale = q.iter().fold(0.0_f64, |m, &c| m.max(c.abs()));
    let q_deriv: Vec<f64> = q
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, &c)| m as f64 * c)
        .collect();

    let mut crossings: Vec<(f64, f64)> = Vec::new(); // (alpha, omega)
    for root in polynomial::roots(&q) {
        let omega_c = root.sqrt();
        let omega0 = omega_c.re;
        if !(omega0 > 1e-9) || omega_c.im.abs() >= 1e-8 * (1.0 + omega0.abs()) {
            continue;
        }
        // Polish the root of Q(u) with a few Newton steps; companion
        // eigenvalues of high-degree polynomials lose a few digits.
        let mut u = omega0 * omega0;
        for _ in 0..5 {
            let f = polynomial::eval(&q, u);
            let df = polynomial::eval(&q_deriv, u);
            if df == 0.0 {
                break;
            }
            let step = f / df;
            u -= step;
            if step.abs() <= 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        if !(u > 0.0) || polynomial::eval(&q, u).abs() > 1e-6 * (1.0 + q_scale) {
            continue;
        }
        let omega = u.sqrt();
        let (n_re, n_im) = polynomial::eval_imaginary_axis(&num, omega);
        let (d_re, d_im) = polynomial::eval_imaginary_axis(&den, omega);
        let branch_re = (n_re != 0.0).then(|| d_im * omega / (mu * n_re));
        let branch_im = (n_im != 0.0).then(|| -d_re * omega / (mu * n_im));
        let alpha = match (branch_re, branch_im) {
            (Some(a), Some(b)) => {
                debug_assert!(
                    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-30),
                    "crossing branches disagree: {a} vs {b}"
                );
                if n_re.abs() >= n_im.abs() {
                    a
                } else {
                    b
                }
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => continue,
        };
        if alpha > 0.0 && alpha.is_finite() {
            crossings.push((alpha, omega));
        }
    }

    match crossings
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
    {
        Some((alpha, omega)) => Ok(AlphaBar {
            alpha_bar: alpha,
            omega_star: Some(omega),
            weakly_spr: false,
            q_coefficients: q,
            spr_margin: None,
        }),
        None => {
            // Diagnostic only: sample Re H_n over a broad log grid.
            let mut min_re = f64::INFINITY;
            for i in 0..=400 {
                let omega = 10f64.powf(-6.0 + 12.0 * i as f64 / 400.0);
                let (n_re, n_im) = polynomial::eval_imaginary_axis(&num, omega);
                let (d_re, d_im) = polynomial::eval_imaginary_axis(&den, omega);
                let re_h = (n_re * d_re + n_im * d_im) / (d_re * d_re + d_im * d_im);
                min_re = min_re.min(re_h);
            }
            Ok(AlphaBar {
                alpha_bar: f64::INFINITY,
                omega_star: None,
                weakly_spr: true,
                q_coefficients: q,
                spr_margin: Some(min_re),
            })
        }
    }
}

/// Spectral abscissa (max real part) of a spectrum.
pub fn spectral_abscissa(spectrum: &[Complex<f64>]) -> f64 {
    spectrum
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Result of the convergence-rate tuning search.
#[derive(Debug, Clone, Copy)]
pub struct BestAlpha {
    pub alpha: f64,
    /// Spectral abscissa of the positive-equilibrium Jacobian at `alpha`.
    pub abscissa: f64,
    /// The stability threshold the search interval was derived from.
    pub alpha_bar: f64,
}

/// Default search cap used when ᾱ = ∞.
pub const BEST_ALPHA_CAP: f64 = 1e3;

/// Pick the α in `(0, ᾱ)` minimizing the spectral abscissa of the
/// positive-equilibrium Jacobian: 200-point geometric grid on
/// `(ᾱ·1e-4, ᾱ·0.999)` followed by golden-section refinement around the
/// grid minimum. When ᾱ = ∞ the interval is `(cap·1e-4, cap)`.
pub fn best_alpha(linear: &LinearForm, mu: f64, cap: Option<f64>) -> Result<BestAlpha> {
    let ab = alpha_bar(linear, mu)?;
    let hi = if ab.alpha_bar.is_finite() {
        ab.alpha_bar * 0.999
    } else {
        cap.unwrap_or(BEST_ALPHA_CAP)
    };
    let lo = hi * 1e-4;
    let chi = |alpha: f64| -> Result<f64> {
        let params = ControllerParams {
            mu,
            alpha,
            k: 1.0,
            v0: 1.0,
        };
        Ok(spectral_abscissa(&positive_equilibrium_spectrum(
            linear, &params,
        )?))
    };

    let n = 200;
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut best_i = 0;
    let mut best_chi = f64::INFINITY;
    let mut grid = Vec::with_capacity(n);
    let mut a = lo;
    for i in 0..n {
        grid.push(a);
        let c = chi(a)?;
        if c < best_chi {
            best_chi = c;
            best_i = i;
        }
        a *= ratio;
    }

    // Golden-section refinement inside the bracketing grid cells.
    let mut left = grid[best_i.saturating_sub(1)];
    let mut right = grid[(best_i + 1).min(n - 1)];
    let inv_phi = 0.618_033_988_749_894_9;
    let mut x1 = right - inv_phi * (right - left);
    let mut x2 = left + inv_phi * (right - left);
    let mut f1 = chi(x1)?;
    let mut f2 = chi(x2)?;
    for _ in 0..200 {
        if right - left <= 1e-8 * (1.0 + right) {
            break;
        }
        if f1 <= f2 {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - inv_phi * (right - left);
            f1 = chi(x1)?;
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + inv_phi * (right - left);
            f2 = chi(x2)?;
        }
    }
    let (alpha, abscissa) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let (alpha, abscissa) = if best_chi < abscissa {
        (grid[best_i], best_chi)
    } else {
        (alpha, abscissa)
    };
    Ok(BestAlpha {
        alpha,
        abscissa,
        alpha_bar: ab.alpha_bar,
    })
}

/// A numerically located equilibrium of a (generally nonlinear) closed loop.
#[derive(Debug, Clone)]
pub struct NewtonEquilibrium {
    pub state: DVector<f64>,
    pub spectrum: Vec<Complex<f64>>,
    pub stable: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton root of the full closed-loop right-hand side with the
/// analytic Jacobian.
///
/// Convergence criterion `‖f‖∞ < 1e-12·(1 + ‖x‖∞)`, at most 100 iterations,
/// step damping by halving (at most 40 halvings per step). Convergence to a
/// point outside the open positive orthant is reported as an error rather
/// than silently accepted.
pub fn solve_equilibrium_nonlinear(
    closed: &ClosedLoop,
    guess: &DVector<f64>,
) -> Result<NewtonEquilibrium> {
    let net = closed.network();
    let n = net.dim();
    if guess.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "guess has {} entries, closed loop has {} states",
            guess.len(),
            n
        )));
    }
    if guess.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter(
            "Newton guess must be strictly positive".into(),
        ));
    }

    let rhs = |x: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::zeros(n);
        net.rhs_into_unchecked(x.as_slice(), out.as_mut_slice());
        out
    };

    let mut x = guess.clone();
    let mut fx = rhs(&x);
    let mut residual = fx.amax();
    for iteration in 0..100 {
        let tol = 1e-12 * (1.0 + x.amax());
        if residual < tol {
            let min_component = x.min();
            if min_component <= 0.0 {
                return Err(Error::NewtonNonPositive { min_component });
            }
            let jac = net.jacobian(&x);
            let spectrum: Vec<Complex<f64>> =
                jac.complex_eigenvalues().iter().copied().collect();
            let stable = spectral_abscissa(&spectrum) < -HURWITZ_MARGIN;
            return Ok(NewtonEquilibrium {
                state: x,
                spectrum,
                stable,
                iterations: iteration,
                residual,
            });
        }
        let jac = net.jacobian(&x);
        let step = jac
            .lu()
            .solve(&(-&fx))
            .ok_or_else(|| Error::SingularSystem("singular Jacobian in Newton step".into()))?;
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..=40 {
            let candidate = &x + &step * damping;
            let f_candidate = rhs(&candidate);
            let r = f_candidate.amax();
            if r < residual || r < tol {
                x = candidate;
                fx = f_candidate;
                residual = r;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonNoConvergence {
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::NewtonNoConvergence {
        iterations: 100,
        residual,
    })
}

/// Constant input disturbance acting through `E d`, with the admissibility
/// test, the shifted stability threshold, and the perturbed equilibria.
#[derive(Debug, Clone)]
pub struct DisturbanceModel {
    pub e: DMatrix<f64>,
    pub d: DVector<f64>,
    /// `C A⁻¹ E d` (nonpositive for positive systems and `d ≥ 0`).
    pub output_shift: f64,
    /// `d ∈ D_μ`, i.e. `μ + C A⁻¹ E d > 0`.
    pub admissible: bool,
    /// Undisturbed threshold ᾱ(μ).
    pub alpha_bar: f64,
    /// Shifted threshold `ᾱ_d = μ/(μ + C A⁻¹ E d) · ᾱ ≥ ᾱ`, for admissible d.
    pub alpha_bar_d: Option<f64>,
    pub perturbed_zero: (DVector<f64>, f64),
    pub perturbed_positive: Option<(DVector<f64>, f64)>,
}

/// Analyze a constant input disturbance `d` entering through `E`.
///
/// The plant's own constant production `b` is folded into the perturbed
/// equilibria and the threshold shift exactly like an additional channel,
/// so the formulas reduce to the disturbance-free ones when `b = d = 0`.
pub fn disturbance_analysis(
    linear: &LinearForm,
    params: &ControllerParams,
    e: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<DisturbanceModel> {
    params.validate()?;
    if e.nrows() != linear.dim() {
        return Err(Error::DimensionMismatch(format!(
            "E has {} rows, plant has {} states",
            e.nrows(),
            linear.dim()
        )));
    }
    if e.ncols() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "E has {} columns but d has {} entries",
            e.ncols(),
            d.len()
        )));
    }
    if let Some(&bad) = d.iter().find(|&&v| v < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "disturbance amplitudes must be nonnegative, got {bad}"
        )));
    }
    if e.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter(
            "disturbance input matrix E must be entrywise nonnegative".into(),
        ));
    }

    let ed = e * d;
    let output_shift = linear.output_response(&ed)?;
    let offset_shift = linear.output_response(&linear.offset)?;
    let admissible = params.mu + output_shift > 0.0;

    let ab = alpha_bar(linear, params.mu)?;
    let mu_total = params.mu + output_shift + offset_shift;
    let alpha_bar_d = if admissible {
        Some(if ab.alpha_bar.is_finite() {
            params.mu / (params.mu + output_shift) * ab.alpha_bar
        } else {
            f64::INFINITY
        })
    } else {
        None
    };

    let total_const = &linear.offset + &ed;
    let perturbed_zero = (-linear.solve(&total_const)?, 0.0);
    let perturbed_positive = if admissible && mu_total > 0.0 {
        let g = linear.static_gain()?;
        let v_star = mu_total / (g * params.k);
        let forcing = &total_const + &linear.input * (params.k * v_star);
        Some((-linear.solve(&forcing)?, v_star))
    } else {
        None
    };

    Ok(DisturbanceModel {
        e: e.clone(),
        d: d.clone(),
        output_shift,
        admissible,
        alpha_bar: ab.alpha_bar,
        alpha_bar_d,
        perturbed_zero,
        perturbed_positive,
    })
}

/// Elementary metabolic costs per reaction event of the reference,
/// measurement, and actuation reactions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetabolicCosts {
    pub kappa_r: f64,
    pub kappa_m: f64,
    pub kappa_a: f64,
}

impl MetabolicCosts {
    pub fn new(kappa_r: f64, kappa_m: f64, kappa_a: f64) -> Result<Self> {
        for (name, v) in [("kappa_r", kappa_r), ("kappa_m", kappa_m), ("kappa_a", kappa_a)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            kappa_r,
            kappa_m,
            kappa_a,
        })
    }

    pub fn uniform(kappa: f64) -> Result<Self> {
        Self::new(kappa, kappa, kappa)
    }
}

/// Stationary controller power split into the cost of adaptation and the
/// constitutive limit.
#[derive(Debug, Clone, Copy)]
pub struct PowerBreakdown {
    /// `αμ(κ_r + κ_m) v*`; vanishes as `k → ∞`.
    pub adaptation_cost: f64,
    /// `κ_a k v*`, the cost of the actuation reaction alone — the floor
    /// any controller achieving `y* = μ` must pay.
    pub constitutive_limit: f64,
    pub total: f64,
}

/// Power breakdown at an equilibrium with controller concentration `v*`
/// and output on target (`y* = μ`).
pub fn stationary_power_at(
    params: &ControllerParams,
    costs: &MetabolicCosts,
    v_star: f64,
) -> PowerBreakdown {
    let adaptation_cost = params.alpha * params.mu * (costs.kappa_r + costs.kappa_m) * v_star;
    let constitutive_limit = costs.kappa_a * params.k * v_star;
    PowerBreakdown {
        adaptation_cost,
        constitutive_limit,
        total: adaptation_cost + constitutive_limit,
    }
}

/// Stationary controller power for a linear plant:
/// `P* = αμ²(κ_r+κ_m)/(kg) + μκ_a/g`.
///
/// Asymptotic stability of the positive equilibrium is the caller's
/// responsibility; for unstable parameterizations use the time-average of
/// a simulated power trace instead.
pub fn stationary_power(
    linear: &LinearForm,
    params: &ControllerParams,
    costs: &MetabolicCosts,
) -> Result<PowerBreakdown> {
    let eq = equilibria(linear, params)?;
    let (_, v_star) = eq.positive.ok_or_else(|| {
        Error::InvalidParameter("positive equilibrium does not exist".into())
    })?;
    Ok(stationary_power_at(params, costs, v_star))
}

/// Aggregate stability summary used by reports.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub threshold: AlphaBar,
    pub zero_spectrum: Vec<Complex<f64>>,
    pub positive_spectrum: Vec<Complex<f64>>,
    pub positive_stable: bool,
    pub tuned: BestAlpha,
}

/// Run the full stability analysis for one parameter set.
pub fn stability_report(
    linear: &LinearForm,
    params: &ControllerParams,
) -> Result<StabilityReport> {
    let threshold = alpha_bar(linear, params.mu)?;
    let zero_spectrum = zero_equilibrium_spectrum(linear, params);
    let positive_spectrum = positive_equilibrium_spectrum(linear, params)?;
    let positive_stable = spectral_abscissa(&positive_spectrum) < -HURWITZ_MARGIN;
    let tuned = best_alpha(linear, params.mu, None)?;
    Ok(StabilityReport {
        threshold,
        zero_spectrum,
        positive_spectrum,
        positive_stable,
        tuned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Network, ReactionDef, Species};

    fn decay_linear(gamma: f64) -> LinearForm {
        let net = Network::new(
            vec![Species::new("x", 0.0)],
            vec![ReactionDef::mass_action(&[("x", 1)], &[], gamma)],
            "x",
            "x",
        )
        .unwrap();
        net.linearize(&DVector::zeros(1)).unwrap()
    }

    #[test]
    fn decay_equilibria() {
        let lin = decay_linear(1.0);
        let params = ControllerParams::new(2.0, 0.5, 10.0).unwrap();
        let eq = equilibria(&lin, &params).unwrap();
        let (x, v) = eq.positive.unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        assert!((v - 0.2).abs() < 1e-14); // v* = μγ/k
        assert_eq!(eq.zero.1, 0.0);
    }

    #[test]
    fn zero_spectrum_block_triangular() {
        let lin = decay_linear(1.0);
        let params = ControllerParams::new(1.0, 0.5, 1.0).unwrap();
        let mut re: Vec<f64> = zero_equilibrium_spectrum(&lin, &params)
            .iter()
            .map(|l| l.re)
            .collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 1.0).abs() < 1e-12);
        assert!((re[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decay_is_weakly_spr() {
        // 1/(s+γ): Q(ω) = γ² > 0 everywhere, no crossing, ᾱ = ∞.
        let lin = decay_linear(1.3);
        let ab = alpha_bar(&lin, 2.0).unwrap();
        assert!(ab.alpha_bar.is_infinite());
        assert!(ab.weakly_spr);
        assert!(ab.omega_star.is_none());
        assert!(ab.spr_margin.unwrap() > 0.0);
        // Q in u = ω² for 1/(s+γ) normalized: up to scale, γ² + 0·u... the
        // constant must be positive.
        assert!(ab.q_coefficients[0] > 0.0);
    }

    #[test]
    fn mu_zero_degenerates() {
        let lin = decay_linear(1.0);
        assert!(alpha_bar(&lin, 0.0).is_err());
        assert!(ControllerParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn power_formula_decay() {
        // P* = μ/γ (αμ(κr+κm)/k + κa) for the decay plant.
        let lin = decay_linear(0.5);
        let params = ControllerParams::new(2.0, 0.3, 10.0).unwrap();
        let costs = MetabolicCosts::uniform(1.0).unwrap();
        let p = stationary_power(&lin, &params, &costs).unwrap();
        let g = 1.0 / 0.5;
        let expected = params.alpha * params.mu * params.mu * 2.0 / (params.k * g)
            + params.mu * 1.0 / g;
        assert!((p.total - expected).abs() < 1e-12);
        assert!(p.total > p.constitutive_limit);
    }

    #[test]
    fn negative_disturbance_rejected() {
        let lin = decay_linear(1.0);
        let params = ControllerParams::new(2.0, 0.5, 1.0).unwrap();
        let e = DMatrix::from_row_slice(1, 1, &[1.0]);
        let d = DVector::from_vec(vec![-0.5]);
        assert!(disturbance_analysis(&lin, &params, &e, &d).is_err());
    }

    #[test]
    fn zero_disturbance_is_identity() {
        let lin = decay_linear(1.0);
        let params = ControllerParams::new(2.0, 0.5, 1.0).unwrap();
        let e = DMatrix::from_row_slice(1, 1, &[1.0]);
        let d = DVector::from_vec(vec![0.0]);
        let dm = disturbance_analysis(&lin, &params, &e, &d).unwrap();
        assert!(dm.admissible);
        assert_eq!(dm.alpha_bar_d.unwrap(), dm.alpha_bar);
        let eq = equilibria(&lin, &params).unwrap();
        let (x0, v0) = eq.positive.unwrap();
        let (xd, vd) = dm.perturbed_positive.unwrap();
        assert!((x0[0] - xd[0]).abs() < 1e-14);
        assert!((v0 - vd).abs() < 1e-14);
    }
}
