//! Predefined seed distributions.

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::dist::Dist;
use crate::error::{invalid, Result};
use crate::lab::centered_norm;
use crate::perm::binomial;
use crate::quad::SearchMode;
use crate::rng::Stream;

/// Largest n for which Phi0 is built with its full support.
pub const PHI0_EXACT_MAX_N: usize = 16;
pub const PHI0_SAMPLES: usize = 4096;

/// Two independent half blocks; each block weight t is uniform on 0..=n/2 and
/// the block is uniform among vectors of weight t.
pub fn phi0(n: usize, rng: &mut Stream) -> Result<Dist> {
    if n % 2 != 0 || n < 2 {
        return Err(invalid(format!("Phi0 needs even n >= 2, got {n}")));
    }
    let h = n / 2;
    if n <= PHI0_EXACT_MAX_N {
        let tw = 1.0 / (h + 1) as f64;
        let block: Vec<(u64, f64)> = (0..1u64 << h)
            .map(|m| (m, tw / binomial(h, m.count_ones() as usize)))
            .collect();
        let mut items = Vec::with_capacity(block.len() * block.len());
        for &(a, wa) in &block {
            for &(b, wb) in &block {
                items.push((BitVector::from_mask(n, a | (b << h)), wa * wb));
            }
        }
        return Dist::from_weighted(n, items);
    }
    let lo: Vec<usize> = (0..h).collect();
    let hi: Vec<usize> = (h..n).collect();
    let items = (0..PHI0_SAMPLES).map(|_| {
        let t1 = rng.below(h + 1);
        let t2 = rng.below(h + 1);
        let a = BitVector::random_weight_in(n, &lo, t1, rng);
        let b = BitVector::random_weight_in(n, &hi, t2, rng);
        let mut x = a;
        for s in b.support() {
            x.set(s, true);
        }
        (x, 1.0)
    });
    Dist::from_weighted(n, items.collect::<Vec<_>>())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedEntry {
    pub name: String,
    pub dist: Dist,
    pub norm: f64,
    pub member: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedLibrary {
    pub n: usize,
    pub alpha: f64,
    pub entries: Vec<SeedEntry>,
}

fn prefix(n: usize, r: usize) -> BitVector {
    BitVector::from_support(n, &(0..r).collect::<Vec<_>>())
}

fn stride(n: usize, r: usize) -> BitVector {
    BitVector::from_support(n, &(0..r).map(|t| (2 * t) % n).collect::<Vec<_>>())
}

impl SeedLibrary {
    /// Dirac seeds on prefix, strided and random supports of several weights, plus Phi0.
    /// Membership in zeta(alpha) is recorded per entry.
    pub fn standard(n: usize, alpha: f64, rng: &mut Stream) -> Result<Self> {
        if n % 2 != 0 || n <= 4 {
            return Err(invalid(format!("seed library needs even n > 4, got {n}")));
        }
        let mut weights: Vec<usize> = [n / 8, n / 4, 3 * n / 8, n / 2]
            .into_iter()
            .map(|r| r.max(2))
            .collect();
        weights.dedup();
        let mut raw: Vec<(String, Dist)> = Vec::new();
        for &r in &weights {
            raw.push((format!("dirac-prefix-{r}"), Dist::dirac(prefix(n, r))));
            raw.push((format!("dirac-stride-{r}"), Dist::dirac(stride(n, r))));
            let all: Vec<usize> = (0..n).collect();
            raw.push((format!("dirac-random-{r}"), Dist::dirac(BitVector::random_weight_in(n, &all, r, rng))));
        }
        raw.push(("phi0".into(), phi0(n, rng)?));
        let mut entries = Vec::new();
        for (name, dist) in raw {
            let norm = centered_norm(&dist, SearchMode::Auto, rng)?.value;
            entries.push(SeedEntry { name, dist, norm, member: norm >= alpha.sqrt() });
        }
        Ok(SeedLibrary { n, alpha, entries })
    }

    pub fn members(&self) -> Vec<&Dist> {
        self.entries.iter().filter(|e| e.member).map(|e| &e.dist).collect()
    }

    pub fn get(&self, name: &str) -> Option<&SeedEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi0_block_weights_are_uniform() {
        let mut rng = Stream::new(0);
        let d = phi0(8, &mut rng).unwrap();
        assert_eq!(d.support_size(), 256);
        for t in 0..=4 {
            let m = d.mass_where(|x| (0..4).filter(|&s| x.get(s)).count() == t);
            assert!((m - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn library_flags_membership() {
        let mut rng = Stream::new(1);
        let lib = SeedLibrary::standard(8, 0.001, &mut rng).unwrap();
        assert!(lib.get("dirac-prefix-2").unwrap().member);
        assert!(!lib.members().is_empty());
    }
}
