//! Small dense polynomial helpers used by the stability analysis.
//!
//! Polynomials are coefficient vectors in ascending order:
//! `p = [c0, c1, c2]` means `c0 + c1 s + c2 s²`.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};

/// Multiply two polynomials (convolution of coefficients).
pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Evaluate at a real argument (Horner).
pub fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Substitute `s -> −s`: flips the sign of odd coefficients.
pub fn flip_argument(p: &[f64]) -> Vec<f64> {
    p.iter()
        .enumerate()
        .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
        .collect()
}

/// Real and imaginary parts of `p(jω)` by parity split of coefficients.
pub fn eval_imaginary_axis(p: &[f64], omega: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    let mut w_pow = 1.0; // ω^k
    for (k, &c) in p.iter().enumerate() {
        // j^k cycles 1, j, −1, −j.
        match k % 4 {
            0 => re += c * w_pow,
            1 => im += c * w_pow,
            2 => re -= c * w_pow,
            _ => im -= c * w_pow,
        }
        w_pow *= omega;
    }
    (re, im)
}

/// Characteristic polynomial of `A` and the numerator polynomial of
/// `C (sI − A)⁻¹ B`, via the Faddeev–LeVerrier recursion.
///
/// Returns `(den, num)` in ascending order with `den` monic of degree `d`
/// and `num` of degree at most `d − 1`, such that
/// `C (sI − A)⁻¹ B = num(s) / den(s)` exactly (adjugate expansion).
pub fn transfer_function(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &RowDVector<f64>,
) -> (Vec<f64>, Vec<f64>) {
    let d = a.nrows();
    assert!(d > 0, "transfer_function requires a nonempty matrix");

    // den[k] holds the coefficient of s^k; descending recursion fills
    // c_{d-1}, c_{d-2}, ... while m_k accumulates adj(sI − A) terms.
    let mut den = vec![0.0; d + 1];
    den[d] = 1.0;
    let mut num = vec![0.0; d];

    let mut m = DMatrix::<f64>::identity(d, d);
    for k in 1..=d {
        // adj(sI − A) = Σ_{k=1..d} M_k s^{d−k}
        num[d - k] = (c * &m * b)[0];
        let am = a * &m;
        let coeff = -am.trace() / k as f64;
        den[d - k] = coeff;
        if k < d {
            m = am + DMatrix::<f64>::identity(d, d) * coeff;
        }
    }
    (den, num)
}

/// All complex roots via companion-matrix eigenvalues.
///
/// Leading coefficients smaller than `1e-12` relative to the largest
/// coefficient are trimmed first. Returns an empty list for constant
/// polynomials.
pub fn roots(p: &[f64]) -> Vec<Complex<f64>> {
    let scale = p.iter().fold(0.0_f64, |m, &c| m.max(c.abs()));
    if scale == 0.0 {
        return vec![];
    }
    let mut coeffs = p.to_vec();
    while coeffs.len() > 1 && coeffs.last().unwrap().abs() < 1e-12 * scale {
        coeffs.pop();
    }
    let n = coeffs.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = coeffs[n];
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[i] / lead;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}
