//! Bernoulli functions and the two-party estimator moments.
//!
//! A parameter vector `x` in [0,1]^n induces independent coordinate draws;
//! `chi(i, x)` is the probability of observing exactly `i`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bits::{BitVector, ParamVector};
use crate::error::{check_dim, invalid, Result};
use crate::rng::Stream;

pub fn chi(i: &BitVector, x: &ParamVector) -> Result<f64> {
    check_dim(i.len(), x.len())?;
    Ok(x.values()
        .iter()
        .enumerate()
        .map(|(s, &v)| if i.get(s) { v } else { 1.0 - v })
        .product())
}

/// Monomial Π_{i_s = 1} x_s: probability that the draw from `x` covers `i`.
pub fn pi(i: &BitVector, x: &ParamVector) -> Result<f64> {
    check_dim(i.len(), x.len())?;
    Ok(i.support().iter().map(|&s| x.values()[s]).product())
}

/// Law of the number of ones drawn on the coordinates selected by `i`.
/// Entry r is psi_{i,r}(x); the vector has length |i| + 1.
pub fn psi_all(i: &BitVector, x: &ParamVector) -> Result<Vec<f64>> {
    check_dim(i.len(), x.len())?;
    let mut dp = vec![1.0];
    for s in i.support() {
        let p = x.values()[s];
        let mut next = vec![0.0; dp.len() + 1];
        for (r, &w) in dp.iter().enumerate() {
            next[r] += w * (1.0 - p);
            next[r + 1] += w * p;
        }
        dp = next;
    }
    Ok(dp)
}

pub fn psi(i: &BitVector, r: usize, x: &ParamVector) -> Result<f64> {
    let all = psi_all(i, x)?;
    Ok(all.get(r).copied().unwrap_or(0.0))
}

pub fn ln_choose(r: u64, l: u64) -> f64 {
    if l > r {
        return f64::NEG_INFINITY;
    }
    if r <= 30 {
        return (choose_exact(r, l) as f64).ln();
    }
    ln_gamma(r as f64 + 1.0) - ln_gamma(l as f64 + 1.0) - ln_gamma((r - l) as f64 + 1.0)
}

fn choose_exact(r: u64, l: u64) -> u64 {
    let l = l.min(r - l);
    let mut c: u64 = 1;
    for t in 0..l {
        c = c * (r - t) / (t + 1);
    }
    c
}

/// beta_{l,r}(theta) = C(r,l) theta^l (1-theta)^(r-l).
pub fn beta(l: u64, r: u64, theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid(format!("theta = {theta} outside [0,1]")));
    }
    if l > r {
        return Ok(0.0);
    }
    if r <= 30 {
        let c = choose_exact(r, l) as f64;
        return Ok(c * theta.powi(l as i32) * (1.0 - theta).powi((r - l) as i32));
    }
    if theta == 0.0 {
        return Ok(if l == 0 { 1.0 } else { 0.0 });
    }
    if theta == 1.0 {
        return Ok(if l == r { 1.0 } else { 0.0 });
    }
    let lg = ln_choose(r, l) + l as f64 * theta.ln() + (r - l) as f64 * (1.0 - theta).ln();
    Ok(lg.exp())
}

pub fn draw(x: &ParamVector, rng: &mut Stream) -> BitVector {
    let bits: Vec<bool> = x.values().iter().map(|&p| rng.bernoulli(p)).collect();
    BitVector::from_bools(&bits)
}

/// Draw from x/k for a binary `x`: each one of `x` is kept with probability 1/k.
pub fn draw_scaled(x: &BitVector, k: f64, rng: &mut Stream) -> BitVector {
    let mut out = BitVector::zeros(x.len());
    let p = 1.0 / k;
    for s in x.support() {
        if rng.bernoulli(p) {
            out.set(s, true);
        }
    }
    out
}

/// V_A = x . j / n.
pub fn v_a_hat(x: &ParamVector, j: &BitVector) -> Result<f64> {
    check_dim(x.len(), j.len())?;
    let n = x.len() as f64;
    Ok(j.support().iter().map(|&s| x.values()[s]).sum::<f64>() / n)
}

/// V_B = i . y / n.
pub fn v_b_hat(i: &BitVector, y: &ParamVector) -> Result<f64> {
    v_a_hat(y, i)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub gap: f64,
}

/// Closed-form moments of V_A and V_B when i ~ B(x/k) and j ~ B(y/k).
pub fn moments(x: &ParamVector, y: &ParamVector, k: f64) -> Result<Moments> {
    check_dim(x.len(), y.len())?;
    if !(k >= 1.0) {
        return Err(invalid(format!("k = {k} must be >= 1")));
    }
    let n = x.len() as f64;
    let (mut dot, mut va, mut vb, mut gap) = (0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.values().iter().zip(y.values()) {
        dot += a * b;
        va += a * a * b * (1.0 - b / k);
        vb += b * b * a * (1.0 - a / k);
        gap += a * b * (a + b - 2.0 * a * b / k);
    }
    Ok(Moments {
        mean: dot / (n * k),
        var_a: va / (n * n * k),
        var_b: vb / (n * n * k),
        gap: gap / (n * n * k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn chi_zero_vector_is_probability_of_no_draw() {
        let x = pv(&[0.2, 0.5, 0.9]);
        let c = chi(&BitVector::zeros(3), &x).unwrap();
        assert!((c - 0.8 * 0.5 * 0.1).abs() < 1e-15);
        assert_eq!(pi(&BitVector::zeros(3), &x).unwrap(), 1.0);
    }

    #[test]
    fn beta_switches_to_log_gamma_smoothly() {
        for l in 0..=31u64 {
            let a = beta(l, 31, 0.3).unwrap();
            let lg = (ln_choose(31, l) + l as f64 * 0.3f64.ln() + (31 - l) as f64 * 0.7f64.ln()).exp();
            assert!((a - lg).abs() < 1e-12 * lg.max(1e-300));
        }
        assert_eq!(beta(3, 2, 0.5).unwrap(), 0.0);
        assert!(beta(1, 2, 1.5).is_err());
    }

    #[test]
    fn psi_sums_to_one() {
        let x = pv(&[0.1, 0.7, 0.3, 0.9]);
        let i: BitVector = "1101".parse().unwrap();
        let all = psi_all(&i, &x).unwrap();
        assert_eq!(all.len(), 4);
        assert!((all.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(psi(&i, 9, &x).unwrap(), 0.0);
    }

    #[test]
    fn dimension_checked() {
        let x = pv(&[0.1, 0.2]);
        assert!(chi(&BitVector::zeros(3), &x).is_err());
        assert!(moments(&x, &pv(&[0.1]), 2.0).is_err());
        assert!(moments(&x, &x, 0.5).is_err());
    }
}
