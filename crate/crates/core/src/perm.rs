//! Permutations of the coordinate set {0..n}.
//!
//! A permutation acts on vectors by `sigma(x)_s = x_{sigma(s)}` and on
//! matrices by `M_sigma(u, v) = M(sigma(u), sigma(v))`.

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{check_dim, invalid, Result};
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl TryFrom<Vec<usize>> for Permutation {
    type Error = crate::error::Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || seen[m] {
                return Err(invalid(format!("not a bijection: {map:?}")));
            }
            seen[m] = true;
        }
        Ok(Permutation(map))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut p = Self::identity(n);
        p.0.swap(a, b);
        p
    }

    pub fn random(n: usize, rng: &mut Stream) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        for t in (1..n).rev() {
            let r = rng.below(t + 1);
            map.swap(t, r);
        }
        Permutation(map)
    }

    /// Uniform permutation whose moved set is exactly `support` (a derangement on it).
    /// Rejection sampling; `support` must not have size 1.
    pub fn random_derangement_on(n: usize, support: &[usize], rng: &mut Stream) -> Result<Self> {
        if support.len() == 1 {
            return Err(invalid("no permutation moves exactly one point"));
        }
        let mut map: Vec<usize> = (0..n).collect();
        if support.is_empty() {
            return Ok(Permutation(map));
        }
        let m = support.len();
        let mut local: Vec<usize> = (0..m).collect();
        loop {
            for t in (1..m).rev() {
                let r = rng.below(t + 1);
                local.swap(t, r);
            }
            if local.iter().enumerate().all(|(a, &b)| a != b) {
                break;
            }
        }
        for (a, &b) in local.iter().enumerate() {
            map[support[a]] = support[b];
        }
        Ok(Permutation(map))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.0
    }

    pub fn at(&self, s: usize) -> usize {
        self.0[s]
    }

    /// Number of moved points; never equal to 1.
    pub fn size(&self) -> usize {
        self.0.iter().enumerate().filter(|(a, &b)| *a != b).count()
    }

    pub fn is_identity(&self) -> bool {
        self.size() == 0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (a, &b) in self.0.iter().enumerate() {
            inv[b] = a;
        }
        Permutation(inv)
    }

    /// (self o other)(s) = self(other(s)).
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        check_dim(self.len(), other.len())?;
        Ok(Permutation(other.0.iter().map(|&s| self.0[s]).collect()))
    }

    pub fn apply(&self, x: &BitVector) -> Result<BitVector> {
        check_dim(self.len(), x.len())?;
        let mut out = BitVector::zeros(x.len());
        for (s, &t) in self.0.iter().enumerate() {
            if x.get(t) {
                out.set(s, true);
            }
        }
        Ok(out)
    }

    pub fn apply_slice<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.0.iter().map(|&t| x[t]).collect()
    }

    pub fn swap_entries(&mut self, a: usize, b: usize) {
        self.0.swap(a, b);
    }

    /// Advances to the next permutation in lexicographic order; false after the last.
    pub fn next_lex(&mut self) -> bool {
        let v = &mut self.0;
        let n = v.len();
        if n < 2 {
            return false;
        }
        let mut i = n - 1;
        while i > 0 && v[i - 1] >= v[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while v[j] <= v[i - 1] {
            j -= 1;
        }
        v.swap(i - 1, j);
        v[i..].reverse();
        true
    }
}

/// Visits every element of S_n in lexicographic order.
pub fn for_each_perm(n: usize, mut f: impl FnMut(&Permutation)) {
    let mut p = Permutation::identity(n);
    loop {
        f(&p);
        if !p.next_lex() {
            break;
        }
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|t| t as f64).product()
}

/// Derangement counts D(0..=n): D0 = 1, D1 = 0, D(s) = (s-1)(D(s-1) + D(s-2)).
pub fn derangements(n: usize) -> Vec<f64> {
    let mut d = vec![1.0, 0.0];
    for s in 2..=n {
        d.push((s - 1) as f64 * (d[s - 1] + d[s - 2]));
    }
    d.truncate(n + 1);
    d
}

pub fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |c, t| c * (n - t) as f64 / (t + 1) as f64)
}

/// Number of permutations of S_n that move exactly s points.
pub fn count_of_size(n: usize, s: usize) -> f64 {
    binomial(n, s) * derangements(s)[s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lex_enumeration_covers_s4() {
        let mut seen = Vec::new();
        for_each_perm(4, |p| seen.push(p.clone()));
        assert_eq!(seen.len(), 24);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
        let by_size: Vec<usize> = (0..=4)
            .map(|s| seen.iter().filter(|p| p.size() == s).count())
            .collect();
        assert_eq!(by_size, vec![1, 0, 6, 8, 9]);
        for s in 0..=4 {
            assert_eq!(count_of_size(4, s) as usize, by_size[s]);
        }
    }

    #[test]
    fn compose_matches_vector_action() {
        let mut rng = Stream::new(1);
        let a = Permutation::random(9, &mut rng);
        let b = Permutation::random(9, &mut rng);
        let x = BitVector::random(9, 0.5, &mut rng);
        let lhs = a.compose(&b).unwrap().apply(&x).unwrap();
        let rhs = b.apply(&a.apply(&x).unwrap()).unwrap();
        assert_eq!(lhs, rhs);
        assert!(a.compose(&a.inverse()).unwrap().is_identity());
    }

    #[test]
    fn derangement_has_exact_support() {
        let mut rng = Stream::new(2);
        let sup = [1, 4, 6];
        for _ in 0..50 {
            let p = Permutation::random_derangement_on(8, &sup, &mut rng).unwrap();
            assert_eq!(p.size(), 3);
            for s in 0..8 {
                assert_eq!(p.at(s) != s, sup.contains(&s));
            }
        }
        assert!(Permutation::random_derangement_on(8, &[2], &mut rng).is_err());
        assert!(Permutation::new(vec![0, 0]).is_err());
    }
}
