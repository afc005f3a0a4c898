//! Simplified information reconciliation (block parities with binary search)
//! followed by privacy amplification with a public random binary matrix.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrpaConfig {
    pub initial_block: usize,
    pub passes: usize,
    /// Random-subset parity checks after the passes; also the security margin.
    pub margin: usize,
    /// Give up when the first pass flags more than this fraction of blocks.
    pub max_bad_fraction: f64,
}

impl Default for IrpaConfig {
    fn default() -> Self {
        IrpaConfig { initial_block: 8, passes: 8, margin: 16, max_bad_fraction: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrpaOutput {
    pub final_a: Vec<bool>,
    pub final_b: Vec<bool>,
    pub leaked: usize,
    pub corrected: usize,
}

fn parity(bits: &[bool], idx: &[usize]) -> bool {
    idx.iter().fold(false, |p, &u| p ^ bits[u])
}

/// Corrects one error in `idx` (known odd parity difference); returns parities disclosed.
fn binary_search(a: &[bool], b: &mut [bool], idx: &[usize]) -> usize {
    let mut lo = idx;
    let mut leaked = 0;
    while lo.len() > 1 {
        let (left, right) = lo.split_at(lo.len() / 2);
        leaked += 1;
        lo = if parity(a, left) != parity(b, left) { left } else { right };
    }
    b[lo[0]] = !b[lo[0]];
    leaked
}

fn shuffled(len: usize, rng: &mut Stream) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    for u in (1..len).rev() {
        p.swap(u, rng.below(u + 1));
    }
    p
}

pub fn irpa_simplified(key_a: &[bool], key_b: &[bool], cfg: &IrpaConfig, rng: &mut Stream) -> Result<IrpaOutput> {
    if key_a.len() != key_b.len() {
        return Err(Error::DimensionMismatch { expected: key_a.len(), got: key_b.len() });
    }
    if cfg.initial_block == 0 {
        return Err(invalid("initial_block must be positive"));
    }
    let len = key_a.len();
    let mut b = key_b.to_vec();
    let (mut leaked, mut corrected) = (0usize, 0usize);
    let mut block = cfg.initial_block;
    for pass in 0..cfg.passes {
        let order = if pass == 0 { (0..len).collect() } else { shuffled(len, rng) };
        let chunks: Vec<&[usize]> = order.chunks(block).collect();
        let mut bad = 0;
        for c in &chunks {
            leaked += 1;
            if parity(key_a, c) != parity(&b, c) {
                bad += 1;
                leaked += binary_search(key_a, &mut b, c);
                corrected += 1;
            }
        }
        if pass == 0 && !chunks.is_empty() && bad as f64 > cfg.max_bad_fraction * chunks.len() as f64 {
            return Err(Error::ReconciliationFailed(format!("{bad} of {} blocks disagree", chunks.len())));
        }
        block = (block * 2).min(len.max(1));
    }
    for _ in 0..cfg.margin {
        let idx: Vec<usize> = (0..len).filter(|_| rng.bit()).collect();
        leaked += 1;
        if parity(key_a, &idx) != parity(&b, &idx) {
            return Err(Error::ReconciliationFailed("verification parity mismatch".into()));
        }
    }
    let out = output_len(len, leaked, cfg.margin).ok_or_else(|| Error::ReconciliationFailed(format!("{leaked} leaked bits exhaust {len} input bits")))?;
    let mut final_a = Vec::with_capacity(out);
    let mut final_b = Vec::with_capacity(out);
    for _ in 0..out {
        let row: Vec<usize> = (0..len).filter(|_| rng.bit()).collect();
        final_a.push(parity(key_a, &row));
        final_b.push(parity(&b, &row));
    }
    Ok(IrpaOutput { final_a, final_b, leaked, corrected })
}

/// Output length for an input of `len` bits and `leaked` disclosed parities.
pub fn output_len(len: usize, leaked: usize, margin: usize) -> Option<usize> {
    len.checked_sub(leaked + margin).filter(|&m| m > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_leak_only_parities() {
        let mut rng = Stream::new(3);
        let a: Vec<bool> = (0..256).map(|_| rng.bit()).collect();
        let cfg = IrpaConfig { passes: 2, ..IrpaConfig::default() };
        let out = irpa_simplified(&a, &a, &cfg, &mut rng).unwrap();
        assert_eq!(out.final_a, out.final_b);
        assert_eq!(out.leaked, 32 + 16 + 16);
        assert_eq!(out.final_a.len(), 256 - out.leaked - 16);
    }
}
