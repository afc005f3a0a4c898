//! Finitely supported distributions over {0,1}^n.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bits::BitVector;
use crate::error::{check_dim, invalid, Error, Result};
use crate::perm::Permutation;
use crate::rng::Stream;

const MASS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dist {
    n: usize,
    points: Vec<(BitVector, f64)>,
}

impl Dist {
    /// Merges duplicates, drops zero weights and normalizes.
    pub fn from_weighted(n: usize, items: impl IntoIterator<Item = (BitVector, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<BitVector, f64> = BTreeMap::new();
        for (x, w) in items {
            check_dim(n, x.len())?;
            if !(w >= 0.0) || !w.is_finite() {
                return Err(invalid(format!("weight {w} is not a finite non-negative number")));
            }
            if w > 0.0 {
                *acc.entry(x).or_insert(0.0) += w;
            }
        }
        let total: f64 = acc.values().sum();
        if total <= 0.0 {
            return Err(invalid("distribution has no mass"));
        }
        Ok(Dist { n, points: acc.into_iter().map(|(x, w)| (x, w / total)).collect() })
    }

    /// Like `from_weighted`, but the weights must already sum to one.
    pub fn new(n: usize, items: Vec<(BitVector, f64)>) -> Result<Self> {
        let total: f64 = items.iter().map(|(_, w)| *w).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("total mass {total} differs from 1")));
        }
        Self::from_weighted(n, items)
    }

    pub fn dirac(x: BitVector) -> Self {
        Dist { n: x.len(), points: vec![(x, 1.0)] }
    }

    /// Uniform law on {0,1}^n, only for n <= 20.
    pub fn uniform(n: usize) -> Result<Self> {
        if n > 20 {
            return Err(Error::Capability(format!("explicit uniform law needs n <= 20, got {n}")));
        }
        let w = 1.0 / (1u64 << n) as f64;
        Ok(Dist {
            n,
            points: (0..1u64 << n).map(|m| (BitVector::from_mask(n, m), w)).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> &[(BitVector, f64)] {
        &self.points
    }

    pub fn support_size(&self) -> usize {
        self.points.len()
    }

    /// Law of sigma(x) for x drawn from self.
    pub fn permute(&self, sigma: &Permutation) -> Result<Self> {
        check_dim(self.n, sigma.len())?;
        let items = self
            .points
            .iter()
            .map(|(x, w)| (sigma.apply(x).expect("dimension checked"), *w));
        Self::from_weighted(self.n, items)
    }

    /// a * self + (1 - a) * other.
    pub fn mix(&self, other: &Dist, a: f64) -> Result<Self> {
        check_dim(self.n, other.n)?;
        if !(0.0..=1.0).contains(&a) {
            return Err(invalid(format!("mixing weight {a} outside [0,1]")));
        }
        let items = self
            .points
            .iter()
            .map(|(x, w)| (x.clone(), a * w))
            .chain(other.points.iter().map(|(x, w)| (x.clone(), (1.0 - a) * w)));
        Self::from_weighted(self.n, items)
    }

    /// Weighted mixture of several laws.
    pub fn mixture(parts: &[(f64, &Dist)]) -> Result<Self> {
        let n = parts.first().ok_or_else(|| invalid("empty mixture"))?.1.n;
        let mut items = Vec::new();
        for (a, d) in parts {
            check_dim(n, d.n)?;
            items.extend(d.points.iter().map(|(x, w)| (x.clone(), a * w)));
        }
        Self::from_weighted(n, items)
    }

    /// Multinomial resampling down to at most `cap` support points.
    pub fn compress(&self, cap: usize, rng: &mut Stream) -> Result<Self> {
        if self.points.len() <= cap {
            return Ok(self.clone());
        }
        let sampler = Sampler::new(self);
        let items: Vec<(BitVector, f64)> = (0..cap).map(|_| (sampler.sample(rng).clone(), 1.0)).collect();
        Self::from_weighted(self.n, items)
    }

    pub fn mass_where(&self, pred: impl Fn(&BitVector) -> bool) -> f64 {
        self.points.iter().filter(|(x, _)| pred(x)).map(|(_, w)| w).sum()
    }

    /// Text record: `n`, `support`, then one `bits weight` row per point.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "support {}", self.points.len());
        for (x, w) in &self.points {
            let _ = writeln!(s, "{x} {w:.16e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut n = None;
        let mut support = None;
        let mut items = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: ln + 1, msg };
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or_default();
            let tail = parts.next().ok_or_else(|| perr("missing value".into()))?;
            if parts.next().is_some() {
                return Err(perr("trailing fields".into()));
            }
            match head {
                "n" => n = Some(tail.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                "support" => support = Some(tail.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                bits => {
                    let dim = n.ok_or_else(|| perr("row before header".into()))?;
                    let x: BitVector = bits.parse().map_err(|e: Error| perr(e.to_string()))?;
                    if x.len() != dim {
                        return Err(perr(format!("row has {} bits, expected {dim}", x.len())));
                    }
                    let w: f64 = tail.parse().map_err(|_| perr(format!("bad weight {tail}")))?;
                    items.push((x, w));
                }
            }
        }
        let n = n.ok_or(Error::Parse { line: 0, msg: "missing n".into() })?;
        if let Some(s) = support {
            if s != items.len() {
                return Err(Error::Parse { line: 0, msg: format!("support {s} but {} rows", items.len()) });
            }
        }
        Dist::new(n, items)
    }
}

/// Inverse-CDF sampler over a distribution's support.
pub struct Sampler<'a> {
    dist: &'a Dist,
    cumulative: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(dist: &'a Dist) -> Self {
        let mut acc = 0.0;
        let cumulative = dist
            .points
            .iter()
            .map(|(_, w)| {
                acc += w;
                acc
            })
            .collect();
        Sampler { dist, cumulative }
    }

    pub fn sample_index(&self, rng: &mut Stream) -> usize {
        let total = *self.cumulative.last().expect("non-empty support");
        let u = rng.uniform() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }

    pub fn sample(&self, rng: &mut Stream) -> &'a BitVector {
        &self.dist.points[self.sample_index(rng)].0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip_is_exact() {
        let d = Dist::from_weighted(
            5,
            vec![("10100".parse().unwrap(), 1.0 / 3.0), ("01111".parse().unwrap(), 2.0 / 3.0)],
        )
        .unwrap();
        let back = Dist::from_text(&d.to_text()).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn parse_rejects_bad_rows() {
        assert!(Dist::from_text("n 3\nsupport 1\n101 0.5\n").is_err());
        assert!(Dist::from_text("n 3\nsupport 1\n10 1.0\n").is_err());
        assert!(Dist::from_text("n 3\nsupport 2\n101 1.0\n").is_err());
        assert!(Dist::from_text("n 3\n1x1 1.0\n").is_err());
    }

    #[test]
    fn merges_duplicates() {
        let x: BitVector = "110".parse().unwrap();
        let d = Dist::from_weighted(3, vec![(x.clone(), 1.0), (x, 3.0)]).unwrap();
        assert_eq!(d.support_size(), 1);
        assert_eq!(d.points()[0].1, 1.0);
    }

    #[test]
    fn sampler_frequencies() {
        let d = Dist::from_weighted(
            2,
            vec![("10".parse().unwrap(), 0.25), ("01".parse().unwrap(), 0.75)],
        )
        .unwrap();
        let s = Sampler::new(&d);
        let mut rng = Stream::new(5);
        let hits = (0..20000).filter(|_| s.sample(&mut rng).get(1)).count();
        assert!((hits as f64 / 20000.0 - 0.75).abs() < 0.02);
    }
}
