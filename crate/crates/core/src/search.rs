//! Optimization over S_n: exhaustive for small n, transposition hill climbing otherwise.

use crate::perm::{for_each_perm, Permutation};
use crate::rng::Stream;
use crate::split::better;

pub const EXHAUSTIVE_MAX_N: usize = 8;

/// Best permutation in lexicographic order of first occurrence.
pub fn exhaustive(n: usize, maximize: bool, mut f: impl FnMut(&Permutation) -> f64) -> (Permutation, f64) {
    let mut best: Option<(Permutation, f64)> = None;
    for_each_perm(n, |p| {
        let v = f(p);
        match &best {
            Some((_, b)) if !better(v, *b, maximize) => {}
            _ => best = Some((p.clone(), v)),
        }
    });
    best.expect("S_n is non-empty")
}

fn climb_from(
    n: usize,
    maximize: bool,
    mut p: Permutation,
    f: &mut impl FnMut(&Permutation) -> f64,
) -> (Permutation, f64) {
    let mut v = f(&p);
    loop {
        let mut improved = false;
        for a in 0..n {
            for b in a + 1..n {
                p.swap_entries(a, b);
                let w = f(&p);
                if better(w, v, maximize) {
                    v = w;
                    improved = true;
                } else {
                    p.swap_entries(a, b);
                }
            }
        }
        if !improved {
            return (p, v);
        }
    }
}

/// Hill climbing from the identity, then `restarts` random starts.
/// Stops early once `target` is met.
pub fn climb(
    n: usize,
    maximize: bool,
    restarts: usize,
    target: Option<f64>,
    rng: &mut Stream,
    mut f: impl FnMut(&Permutation) -> f64,
) -> (Permutation, f64) {
    let met = |v: f64| match target {
        Some(t) if maximize => v >= t,
        Some(t) => v <= t,
        None => false,
    };
    let mut best = climb_from(n, maximize, Permutation::identity(n), &mut f);
    for _ in 0..restarts {
        if met(best.1) {
            break;
        }
        let start = Permutation::random(n, rng);
        let cand = climb_from(n, maximize, start, &mut f);
        if better(cand.1, best.1, maximize) {
            best = cand;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_finds_sorting_permutation() {
        let w = [3.0, 1.0, 2.0, 0.5];
        let (p, v) = exhaustive(4, true, |p| p.map().iter().enumerate().map(|(s, &t)| s as f64 * w[t]).sum());
        assert_eq!(p.map(), &[3, 1, 2, 0]);
        assert!((v - (0.0 * 0.5 + 1.0 + 4.0 + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn climb_matches_exhaustive_on_linear_objective() {
        let mut rng = Stream::new(4);
        let w: Vec<f64> = (0..7).map(|_| rng.uniform()).collect();
        let f = |p: &Permutation| p.map().iter().enumerate().map(|(s, &t)| s as f64 * w[t]).sum::<f64>();
        let (_, e) = exhaustive(7, true, f);
        let (_, h) = climb(7, true, 4, None, &mut rng, f);
        assert!((e - h).abs() < 1e-12);
    }
}
