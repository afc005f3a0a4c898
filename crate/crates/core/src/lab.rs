//! Structural operations on distributions: the zeta(alpha) test,
//! Delta_0, the permutative gap, tidying and synchronization.

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::{check_dim, invalid, Result};
use crate::perm::{binomial, Permutation};
use crate::quad::{c_norm, mbar, quad_matrix, CNorm, QuadMatrix, SearchMode};
use crate::rng::Stream;
use crate::search;
use crate::split;

/// Largest C(n, n/2) for which tidying enumerates every balanced split.
pub const TIDY_EXACT_LIMIT: f64 = 1e6;
pub const SEARCH_RESTARTS: usize = 16;

/// ||M - Mbar||_c for the law `phi`.
pub fn centered_norm(phi: &Dist, mode: SearchMode, rng: &mut Stream) -> Result<CNorm> {
    let m = quad_matrix(phi);
    c_norm(&m.sub(&mbar(&m))?, mode, rng)
}

/// Membership in zeta(alpha). With a heuristic search, `true` is certified
/// and `false` means no witness subset was found.
pub fn zeta_member(phi: &Dist, alpha: f64, mode: SearchMode, rng: &mut Stream) -> Result<bool> {
    if !(alpha > 0.0) {
        return Err(invalid(format!("alpha = {alpha} must be positive")));
    }
    Ok(centered_norm(phi, mode, rng)?.value >= alpha.sqrt())
}

/// c-norm of the centered matrix of a Dirac law with r ones.
pub fn dirac_norm(n: usize, r: usize) -> f64 {
    let nn = (n * (n - 1)) as f64;
    if 2 * r < n {
        (r * r.saturating_sub(1)) as f64 / nn
    } else {
        ((n - r) * (n - r).saturating_sub(1)) as f64 / nn
    }
}

/// Precomputed pieces of Delta_0 for a fixed pair of matrices.
pub struct DeltaParts<'a> {
    m: &'a QuadMatrix,
    m2: &'a QuadMatrix,
    rows: Vec<f64>,
    rows2: Vec<f64>,
    first: f64,
}

impl<'a> DeltaParts<'a> {
    pub fn new(m: &'a QuadMatrix, m2: &'a QuadMatrix) -> Self {
        let n = m.n() as f64;
        DeltaParts { m, m2, rows: m.row_sums(), rows2: m2.row_sums(), first: m.total() * m2.total() / n.powi(4) }
    }

    /// Delta_0(Phi, Phi' o sigma).
    pub fn at(&self, sigma: &Permutation) -> f64 {
        let n = self.m.n() as f64;
        let s = sigma.map();
        let mid: f64 = self.rows.iter().enumerate().map(|(u, r)| r * self.rows2[s[u]]).sum();
        self.first - 2.0 * mid / n.powi(3) + self.m.dot_permuted(self.m2, sigma) / (n * n)
    }
}

/// Delta_0(Phi, Phi') = E[(|x||y|/n^2 - x.y/n)^2].
pub fn delta0(phi: &Dist, phi2: &Dist) -> Result<f64> {
    check_dim(phi.n(), phi2.n())?;
    let (m, m2) = (quad_matrix(phi), quad_matrix(phi2));
    Ok(DeltaParts::new(&m, &m2).at(&Permutation::identity(phi.n())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub value: f64,
    pub sigma: Permutation,
    pub exact: bool,
}

/// max_sigma |M.M' - M.sigma(M')|.
pub fn perm_gap(phi: &Dist, phi2: &Dist, mode: SearchMode, rng: &mut Stream) -> Result<GapResult> {
    check_dim(phi.n(), phi2.n())?;
    let (m, m2) = (quad_matrix(phi), quad_matrix(phi2));
    Ok(perm_gap_matrices(&m, &m2, mode, rng))
}

pub fn perm_gap_matrices(m: &QuadMatrix, m2: &QuadMatrix, mode: SearchMode, rng: &mut Stream) -> GapResult {
    let n = m.n();
    let base = m.dot(m2).expect("same dimension");
    let exact = match mode {
        SearchMode::Exact => true,
        SearchMode::Heuristic => false,
        SearchMode::Auto => n <= search::EXHAUSTIVE_MAX_N,
    };
    let f = |p: &Permutation| m.dot_permuted(m2, p);
    let (hi, lo) = if exact {
        (search::exhaustive(n, true, f), search::exhaustive(n, false, f))
    } else {
        (
            search::climb(n, true, SEARCH_RESTARTS, None, rng, f),
            search::climb(n, false, SEARCH_RESTARTS, None, rng, f),
        )
    };
    let (dh, dl) = ((hi.1 - base).abs(), (lo.1 - base).abs());
    if dh >= dl {
        GapResult { value: dh, sigma: hi.0, exact }
    } else {
        GapResult { value: dl, sigma: lo.0, exact }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tidied {
    pub sigma: Permutation,
    pub dist: Dist,
    /// Mass of the tidied matrix on I0 x complement(I0).
    pub cross: f64,
    pub exact: bool,
}

/// Permutation sending the split J to the first half, both halves in increasing order.
pub fn split_permutation(n: usize, j: &[usize]) -> Permutation {
    let mask = split::mask_of(n, j);
    let mut map: Vec<usize> = (0..n).filter(|&u| mask[u]).collect();
    map.extend((0..n).filter(|&u| !mask[u]));
    Permutation::new(map).expect("split is a bijection")
}

/// Minimizes the I0 x complement(I0) mass of the relabeled matrix; ties go to
/// the lexicographically smallest mapping.
pub fn tidy_matrix(m: &QuadMatrix, mode: SearchMode, rng: &mut Stream) -> Result<(Permutation, f64, bool)> {
    let n = m.n();
    if n % 2 != 0 || n < 2 {
        return Err(invalid(format!("tidying needs even n >= 2, got {n}")));
    }
    let exact = match mode {
        SearchMode::Exact => true,
        SearchMode::Heuristic => false,
        SearchMode::Auto => binomial(n, n / 2) <= TIDY_EXACT_LIMIT,
    };
    let (j, c) = if exact {
        split::exact(m.data(), n, false)
    } else {
        let start = vec![(0..n / 2).collect::<Vec<_>>()];
        split::climb(m.data(), n, false, &start, SEARCH_RESTARTS, rng)
    };
    Ok((split_permutation(n, &j), c, exact))
}

pub fn tidy(phi: &Dist, mode: SearchMode, rng: &mut Stream) -> Result<Tidied> {
    let (sigma, cross, exact) = tidy_matrix(&quad_matrix(phi), mode, rng)?;
    let dist = phi.permute(&sigma)?;
    Ok(Tidied { sigma, dist, cross, exact })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    pub sigma: Permutation,
    pub achieved: f64,
    /// (alpha/4 - 1/n)^2
    pub threshold: f64,
    /// (alpha/4 - 1/n^2), the alternative printed form
    pub threshold_alt: f64,
    /// sqrt(achieved) >= alpha/4 - 1/n
    pub synchronized: bool,
    pub exact: bool,
}

pub fn sync_threshold(alpha: f64, n: usize) -> f64 {
    (alpha / 4.0 - 1.0 / n as f64).powi(2)
}

pub fn sync_met(achieved: f64, alpha: f64, n: usize) -> bool {
    achieved.max(0.0).sqrt() >= alpha / 4.0 - 1.0 / n as f64
}

/// argmax_sigma Delta_0(Phi, Phi' o sigma).
pub fn synchronize(phi: &Dist, phi2: &Dist, alpha: f64, mode: SearchMode, rng: &mut Stream) -> Result<SyncResult> {
    check_dim(phi.n(), phi2.n())?;
    let n = phi.n();
    let (m, m2) = (quad_matrix(phi), quad_matrix(phi2));
    let parts = DeltaParts::new(&m, &m2);
    let exact = match mode {
        SearchMode::Exact => true,
        SearchMode::Heuristic => false,
        SearchMode::Auto => n <= search::EXHAUSTIVE_MAX_N,
    };
    let (sigma, achieved) = if exact {
        search::exhaustive(n, true, |p| parts.at(p))
    } else {
        search::climb(n, true, SEARCH_RESTARTS, None, rng, |p| parts.at(p))
    };
    let nf = n as f64;
    Ok(SyncResult {
        sigma,
        achieved,
        threshold: sync_threshold(alpha, n),
        threshold_alt: alpha / 4.0 - 1.0 / (nf * nf),
        synchronized: sync_met(achieved, alpha, n),
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitVector;

    fn brute_delta0(phi: &Dist, phi2: &Dist) -> f64 {
        let n = phi.n() as f64;
        let mut acc = 0.0;
        for (x, w) in phi.points() {
            for (y, w2) in phi2.points() {
                let d = (x.weight() * y.weight()) as f64 / (n * n) - x.dot(y) as f64 / n;
                acc += w * w2 * d * d;
            }
        }
        acc
    }

    #[test]
    fn delta0_matrix_form_matches_direct_sum() {
        let mut rng = Stream::new(9);
        for _ in 0..20 {
            let a = Dist::from_weighted(
                6,
                (0..4).map(|_| (BitVector::random(6, 0.5, &mut rng), rng.uniform())),
            )
            .unwrap();
            let b = Dist::from_weighted(
                6,
                (0..3).map(|_| (BitVector::random(6, 0.4, &mut rng), rng.uniform())),
            )
            .unwrap();
            assert!((delta0(&a, &b).unwrap() - brute_delta0(&a, &b)).abs() < 1e-14);
            let s = Permutation::random(6, &mut rng);
            let m = quad_matrix(&a);
            let m2 = quad_matrix(&b);
            let via = DeltaParts::new(&m, &m2).at(&s);
            assert!((via - brute_delta0(&a, &b.permute(&s).unwrap())).abs() < 1e-14);
        }
    }

    #[test]
    fn exchangeable_law_tidies_to_identity() {
        let u = Dist::uniform(6).unwrap();
        let mut rng = Stream::new(0);
        let t = tidy(&u, SearchMode::Auto, &mut rng).unwrap();
        assert!(t.sigma.is_identity());
    }

    #[test]
    fn tidy_groups_correlated_coordinates() {
        let x: BitVector = "101010".parse().unwrap();
        let mut rng = Stream::new(0);
        let t = tidy(&Dist::dirac(x), SearchMode::Auto, &mut rng).unwrap();
        assert_eq!(t.sigma.map(), &[0, 2, 4, 1, 3, 5]);
        assert_eq!(t.dist.points()[0].0.to_string(), "111000");
        assert_eq!(t.cross, 0.0);
    }
}
