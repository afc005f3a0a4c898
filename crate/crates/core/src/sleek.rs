//! Permutative sleeking: T_gamma[Phi] = sum_sigma gamma(|sigma|) Phi o sigma.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::dist::Dist;
use crate::error::{check_dim, invalid, Error, Result};
use crate::perm::{binomial, count_of_size, derangements, for_each_perm, Permutation};
use crate::quad::{quad_matrix, QuadMatrix};
use crate::rng::Stream;

pub const EXACT_MAX_N: usize = 7;
pub const DEFAULT_BUDGET: usize = 256;
const MASS_TOL: f64 = 1e-12;

/// Mass per support size; `w[1]` is always zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SleekKernel {
    n: usize,
    w: Vec<f64>,
}

impl SleekKernel {
    pub fn new(n: usize, w: Vec<f64>) -> Result<Self> {
        check_dim(n + 1, w.len())?;
        if w.iter().any(|&x| !(x >= 0.0)) {
            return Err(invalid("kernel masses must be non-negative"));
        }
        if n >= 1 && w[1] != 0.0 {
            return Err(invalid("no permutation has support size 1"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("kernel mass {total} differs from 1")));
        }
        Ok(SleekKernel { n, w })
    }

    pub fn identity(n: usize) -> Self {
        let mut w = vec![0.0; n + 1];
        w[0] = 1.0;
        SleekKernel { n, w }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size_weights(&self) -> &[f64] {
        &self.w
    }

    /// Weight of a single permutation of support size `s`.
    pub fn per_perm(&self, s: usize) -> f64 {
        if self.w[s] == 0.0 {
            0.0
        } else {
            self.w[s] / count_of_size(self.n, s)
        }
    }
}

pub fn dirac_kernel(n: usize, ell: usize) -> Result<SleekKernel> {
    if ell == 1 || ell > n {
        return Err(invalid(format!("support size {ell} impossible in S_{n}")));
    }
    let mut w = vec![0.0; n + 1];
    w[ell] = 1.0;
    Ok(SleekKernel { n, w })
}

pub fn sample_sigma(kernel: &SleekKernel, rng: &mut Stream) -> Permutation {
    let n = kernel.n;
    let mut u = rng.uniform();
    let mut ell = 0;
    for (s, &w) in kernel.w.iter().enumerate() {
        if w > 0.0 {
            ell = s;
            if u < w {
                break;
            }
            u -= w;
        }
    }
    let mut coords: Vec<usize> = (0..n).collect();
    for t in 0..ell {
        let r = t + rng.below(n - t);
        coords.swap(t, r);
    }
    let mut support = coords[..ell].to_vec();
    support.sort_unstable();
    Permutation::random_derangement_on(n, &support, rng).expect("kernel never selects size 1")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SleekMode {
    Exact,
    Sampled,
}

fn accumulate(acc: &mut HashMap<BitVector, f64>, phi: &Dist, sigma: &Permutation, weight: f64) {
    for (x, w) in phi.points() {
        *acc.entry(sigma.apply(x).expect("dimension checked")).or_insert(0.0) += weight * w;
    }
}

pub fn sleek(phi: &Dist, kernel: &SleekKernel, mode: SleekMode, budget: usize, rng: &mut Stream) -> Result<Dist> {
    check_dim(phi.n(), kernel.n)?;
    let n = phi.n();
    let mut acc: HashMap<BitVector, f64> = HashMap::new();
    match mode {
        SleekMode::Exact => {
            if n > EXACT_MAX_N {
                return Err(Error::Capability(format!("exact sleeking needs n <= {EXACT_MAX_N}, got {n}")));
            }
            let weights: Vec<f64> = (0..=n).map(|s| kernel.per_perm(s)).collect();
            for_each_perm(n, |p| {
                let g = weights[p.size()];
                if g > 0.0 {
                    accumulate(&mut acc, phi, p, g);
                }
            });
        }
        SleekMode::Sampled => {
            if budget == 0 {
                return Err(invalid("sampling budget must be positive"));
            }
            let g = 1.0 / budget as f64;
            for _ in 0..budget {
                let p = sample_sigma(kernel, rng);
                accumulate(&mut acc, phi, &p, g);
            }
        }
    }
    Dist::from_weighted(n, acc)
}

/// Kernel of T_g1 o T_g2, checking that the coefficient of each permutation
/// depends only on its support size.
pub fn compose_check(g1: &SleekKernel, g2: &SleekKernel) -> Result<SleekKernel> {
    check_dim(g1.n, g2.n)?;
    let n = g1.n;
    if n > EXACT_MAX_N {
        return Err(Error::Capability(format!("composition check needs n <= {EXACT_MAX_N}, got {n}")));
    }
    let mut perms = Vec::new();
    for_each_perm(n, |p| perms.push(p.clone()));
    let index: HashMap<Permutation, usize> = perms.iter().cloned().enumerate().map(|(t, p)| (p, t)).collect();
    let a: Vec<f64> = perms.iter().map(|p| g1.per_perm(p.size())).collect();
    let b: Vec<f64> = perms.iter().map(|p| g2.per_perm(p.size())).collect();
    let mut coef = vec![0.0; perms.len()];
    for (si, sigma) in perms.iter().enumerate() {
        if a[si] == 0.0 {
            continue;
        }
        for (ti, tau) in perms.iter().enumerate() {
            if b[ti] == 0.0 {
                continue;
            }
            let s = tau.compose(sigma).expect("same n");
            coef[index[&s]] += a[si] * b[ti];
        }
    }
    let mut per_size: Vec<Option<f64>> = vec![None; n + 1];
    let mut w = vec![0.0; n + 1];
    for (p, &c) in perms.iter().zip(&coef) {
        let s = p.size();
        match per_size[s] {
            None => per_size[s] = Some(c),
            Some(c0) if (c - c0).abs() > 1e-12 => {
                return Err(Error::Consistency(format!(
                    "composed coefficient varies within support size {s}: {c0} vs {c} at {:?}",
                    p.map()
                )))
            }
            _ => {}
        }
        w[s] += c;
    }
    SleekKernel::new(n, w)
}

/// Kernel of T_g1 o T_g2 per support size, without the class-function check.
pub fn compose_sizes(g1: &SleekKernel, g2: &SleekKernel) -> Result<Vec<f64>> {
    check_dim(g1.n, g2.n)?;
    let n = g1.n;
    if n > EXACT_MAX_N {
        return Err(Error::Capability(format!("composition needs n <= {EXACT_MAX_N}, got {n}")));
    }
    let mut perms = Vec::new();
    for_each_perm(n, |p| perms.push(p.clone()));
    let mut w = vec![0.0; n + 1];
    for sigma in &perms {
        let a = g1.per_perm(sigma.size());
        if a == 0.0 {
            continue;
        }
        for tau in &perms {
            let b = g2.per_perm(tau.size());
            if b > 0.0 {
                w[tau.compose(sigma)?.size()] += a * b;
            }
        }
    }
    Ok(w)
}

/// E[(x.y - x.sigma(y))^2] for x ~ Phi, y ~ Phi', from the quadratic matrices.
pub fn sigma_term(m: &QuadMatrix, m2: &QuadMatrix, sigma: &Permutation) -> f64 {
    let n = m.n();
    let s = sigma.map();
    let mut acc = 0.0;
    for u in 0..n {
        for v in 0..n {
            let nn = m2.get(u, v) - m2.get(u, s[v]) - m2.get(s[u], v) + m2.get(s[u], s[v]);
            acc += m.get(u, v) * nn;
        }
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub exact: bool,
}

/// Delta_gamma(Phi, Phi') = sum_sigma gamma(|sigma|) E[(x.y - x.sigma(y))^2].
pub fn delta_gamma(phi: &Dist, phi2: &Dist, kernel: &SleekKernel, trials: usize, rng: &mut Stream) -> Result<Estimate> {
    check_dim(phi.n(), phi2.n())?;
    check_dim(phi.n(), kernel.n)?;
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let n = phi.n();
    let (m, m2) = (quad_matrix(phi), quad_matrix(phi2));
    if n <= EXACT_MAX_N {
        let weights: Vec<f64> = (0..=n).map(|s| kernel.per_perm(s)).collect();
        let mut acc = 0.0;
        for_each_perm(n, |p| {
            let g = weights[p.size()];
            if g > 0.0 {
                acc += g * sigma_term(&m, &m2, p);
            }
        });
        return Ok(Estimate { value: acc, std_err: 0.0, exact: true });
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..trials {
        let t = sigma_term(&m, &m2, &sample_sigma(kernel, rng));
        s1 += t;
        s2 += t * t;
    }
    let k = trials as f64;
    let mean = s1 / k;
    let var = if trials > 1 { (s2 / k - mean * mean).max(0.0) * k / (k - 1.0) } else { 0.0 };
    Ok(Estimate { value: mean, std_err: (var / k).sqrt(), exact: false })
}

/// Arrangements A_n^s = n! / (n - s)!.
pub fn arrangements(n: usize, s: usize) -> f64 {
    (0..s).map(|t| (n - t) as f64).product()
}

/// Leading term of the Delta_gamma expansion and the per-unit O(n) scale.
pub fn delta_gamma_expansion(kernel: &SleekKernel, delta0: f64) -> (f64, f64) {
    let n = kernel.n;
    let d = derangements(n);
    let mut main = 0.0;
    let mut scale = 0.0;
    for s in 0..=n {
        let w = kernel.w[s];
        if w == 0.0 || d[s] == 0.0 {
            continue;
        }
        let g = w / (binomial(n, s) * d[s]);
        let a = arrangements(n, s);
        main += g * a * (s * s) as f64 * delta0 / std::f64::consts::E;
        scale += g * a * n as f64;
    }
    (main, scale)
}

/// l0 = alpha^10 / (9 * 2^18).
pub fn lemma3_l0(alpha: f64) -> f64 {
    alpha.powi(10) / (9.0 * 2f64.powi(18))
}

fn valid_size(n: usize, x: f64) -> usize {
    let ell = (x.round().max(0.0) as usize).min(n);
    if ell == 1 {
        2.min(n)
    } else {
        ell
    }
}

/// (outer, inner) kernels of the composite T_outer o T_inner: the Dirac kernel
/// at round(eps_prime * n) applied after the kernel at round(l0 * n).
pub fn lemma3_preset(n: usize, alpha: f64, eps_prime: f64) -> Result<(SleekKernel, SleekKernel)> {
    if !(0.0..=1.0).contains(&eps_prime) {
        return Err(invalid(format!("eps' = {eps_prime} outside [0,1]")));
    }
    let outer = dirac_kernel(n, valid_size(n, eps_prime * n as f64))?;
    let inner = dirac_kernel(n, valid_size(n, lemma3_l0(alpha) * n as f64))?;
    Ok((outer, inner))
}

pub fn apply_preset(phi: &Dist, preset: &(SleekKernel, SleekKernel), budget: usize, rng: &mut Stream) -> Result<Dist> {
    let mode = if phi.n() <= EXACT_MAX_N { SleekMode::Exact } else { SleekMode::Sampled };
    let inner = sleek(phi, &preset.1, mode, budget, rng)?;
    sleek(&inner, &preset.0, mode, budget, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_size_example() {
        assert_eq!(count_of_size(5, 3), 20.0);
        assert!(dirac_kernel(5, 1).is_err());
    }

    #[test]
    fn transposition_squared_is_not_a_size_class_function() {
        let t = dirac_kernel(4, 2).unwrap();
        assert!(matches!(compose_check(&t, &t), Err(Error::Consistency(_))));
        let w = compose_sizes(&t, &t).unwrap();
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(w[2], 0.0);
        assert!((w[3] - 4.0 / 6.0).abs() < 1e-12);
        assert!((w[4] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn identity_composes_to_self() {
        let g = SleekKernel::new(5, vec![0.2, 0.0, 0.3, 0.1, 0.0, 0.4]).unwrap();
        let c = compose_check(&SleekKernel::identity(5), &g).unwrap();
        for (a, b) in c.size_weights().iter().zip(g.size_weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_requires_small_n() {
        let phi = Dist::dirac(BitVector::ones(8));
        let mut rng = Stream::new(0);
        assert!(sleek(&phi, &SleekKernel::identity(8), SleekMode::Exact, 1, &mut rng).is_err());
    }

    #[test]
    fn preset_sizes_avoid_one() {
        let (outer, inner) = lemma3_preset(8, 0.01, 0.125).unwrap();
        assert_eq!(outer.size_weights()[2], 1.0);
        assert_eq!(inner.size_weights()[0], 1.0);
    }
}
