use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, invalid, Error, Result};
use crate::rng::Stream;

/// Element of {0,1}^n, packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    n: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(n: usize) -> Self {
        BitVector { n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn ones(n: usize) -> Self {
        let mut v = Self::zeros(n);
        for s in 0..n {
            v.set(s, true);
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (s, &b) in bits.iter().enumerate() {
            if b {
                v.set(s, true);
            }
        }
        v
    }

    /// Low `n` bits of `mask`, coordinate s = bit s.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        assert!(n <= 64);
        let mut v = Self::zeros(n);
        if n > 0 {
            v.words[0] = if n == 64 { mask } else { mask & ((1u64 << n) - 1) };
        }
        v
    }

    pub fn from_support(n: usize, support: &[usize]) -> Self {
        let mut v = Self::zeros(n);
        for &s in support {
            v.set(s, true);
        }
        v
    }

    pub fn random(n: usize, p: f64, rng: &mut Stream) -> Self {
        let mut v = Self::zeros(n);
        for s in 0..n {
            if rng.bernoulli(p) {
                v.set(s, true);
            }
        }
        v
    }

    /// Uniform vector with exactly `w` ones among the coordinates `coords`.
    pub fn random_weight_in(n: usize, coords: &[usize], w: usize, rng: &mut Stream) -> Self {
        let mut pool = coords.to_vec();
        let mut v = Self::zeros(n);
        for t in 0..w.min(pool.len()) {
            let r = t + rng.below(pool.len() - t);
            pool.swap(t, r);
            v.set(pool[t], true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, s: usize) -> bool {
        (self.words[s >> 6] >> (s & 63)) & 1 == 1
    }

    pub fn set(&mut self, s: usize, b: bool) {
        let m = 1u64 << (s & 63);
        if b {
            self.words[s >> 6] |= m;
        } else {
            self.words[s >> 6] &= !m;
        }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn dot(&self, other: &BitVector) -> usize {
        debug_assert_eq!(self.n, other.n);
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    /// True when every one of `self` is a one of `other`.
    pub fn is_subset_of(&self, other: &BitVector) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn xor(&self, other: &BitVector) -> BitVector {
        BitVector {
            n: self.n,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        }
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&s| self.get(s)).collect()
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.n <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.n).map(|s| self.get(s)).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.n).map(|s| if self.get(s) { 1.0 } else { 0.0 }).collect()
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in 0..self.n {
            f.write_str(if self.get(s) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut v = BitVector::zeros(s.len());
        for (t, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(t, true),
                _ => return Err(invalid(format!("bad bit character {c:?}"))),
            }
        }
        Ok(v)
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Element of [0,1]^n.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("parameter {v} outside [0,1]")));
        }
        Ok(ParamVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// x / k, componentwise.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k >= 1.0) {
            return Err(invalid(format!("k = {k} must be >= 1")));
        }
        Ok(ParamVector(self.0.iter().map(|v| v / k).collect()))
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        check_dim(self.len(), other.len())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl From<&BitVector> for ParamVector {
    fn from(b: &BitVector) -> Self {
        ParamVector(b.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_counts() {
        let v: BitVector = "1011000010000000000000000000000000000000000000000000000000000000001".parse().unwrap();
        assert_eq!(v.len(), 67);
        assert_eq!(v.weight(), 5);
        assert_eq!(v.to_string().parse::<BitVector>().unwrap(), v);
        let w = BitVector::from_support(67, &[0, 66]);
        assert_eq!(v.dot(&w), 2);
        assert!(w.is_subset_of(&v));
        assert!(!v.is_subset_of(&w));
    }

    #[test]
    fn param_domain() {
        assert!(ParamVector::new(vec![0.2, 1.1]).is_err());
        let x = ParamVector::new(vec![1.0, 0.5]).unwrap();
        assert!(x.scaled(0.5).is_err());
        assert_eq!(x.scaled(2.0).unwrap().values(), &[0.5, 0.25]);
    }
}
