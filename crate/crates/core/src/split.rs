//! Balanced bipartitions of {0..n} scored by their cross mass
//! `sum_{a in J, b not in J} A(a, b)` for a symmetric matrix A.

use crate::rng::Stream;

pub(crate) const TIE: f64 = 1e-12;

pub(crate) fn better(candidate: f64, best: f64, maximize: bool) -> bool {
    if !best.is_finite() {
        return if maximize { candidate > best } else { candidate < best };
    }
    let tol = TIE * best.abs().max(1.0);
    if maximize {
        candidate > best + tol
    } else {
        candidate < best - tol
    }
}

#[cfg(test)]
mod better_tests {
    use super::better;

    #[test]
    fn infinite_start_is_beaten() {
        assert!(better(0.0, f64::NEG_INFINITY, true));
        assert!(better(0.0, f64::INFINITY, false));
        assert!(!better(1.0 + 1e-14, 1.0, true));
    }
}

pub fn cross(a: &[f64], n: usize, in_j: &[bool]) -> f64 {
    let mut c = 0.0;
    for u in 0..n {
        if !in_j[u] {
            continue;
        }
        let row = &a[u * n..(u + 1) * n];
        for v in 0..n {
            if !in_j[v] {
                c += row[v];
            }
        }
    }
    c
}

pub fn mask_of(n: usize, j: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &u in j {
        m[u] = true;
    }
    m
}

pub fn members(in_j: &[bool]) -> Vec<usize> {
    (0..in_j.len()).filter(|&u| in_j[u]).collect()
}

/// Visits every half-size subset containing 0, in lexicographic order of sorted members.
pub fn for_each_half_with_zero(n: usize, mut f: impl FnMut(&[usize])) {
    let h = n / 2;
    if h == 0 {
        f(&[]);
        return;
    }
    let mut comb: Vec<usize> = (0..h).collect();
    loop {
        f(&comb);
        // advance positions 1..h over the range 1..n
        let mut t = h - 1;
        loop {
            if t == 0 {
                return;
            }
            if comb[t] < n - h + t {
                comb[t] += 1;
                for r in t + 1..h {
                    comb[r] = comb[r - 1] + 1;
                }
                break;
            }
            t -= 1;
        }
    }
}

/// Exhaustive optimum over half subsets containing 0; ties keep the earliest.
pub fn exact(a: &[f64], n: usize, maximize: bool) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut mask = vec![false; n];
    for_each_half_with_zero(n, |j| {
        mask.iter_mut().for_each(|m| *m = false);
        for &u in j {
            mask[u] = true;
        }
        let c = cross(a, n, &mask);
        match &best {
            Some((_, b)) if !better(c, *b, maximize) => {}
            _ => best = Some((j.to_vec(), c)),
        }
    });
    best.expect("at least one subset")
}

struct Climber<'a> {
    a: &'a [f64],
    n: usize,
    in_j: Vec<bool>,
    g: Vec<f64>,
    h: Vec<f64>,
    value: f64,
}

impl<'a> Climber<'a> {
    fn new(a: &'a [f64], n: usize, in_j: Vec<bool>) -> Self {
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for w in 0..n {
            for t in 0..n {
                if in_j[t] {
                    g[w] += a[w * n + t];
                } else {
                    h[w] += a[w * n + t];
                }
            }
        }
        let value = (0..n).filter(|&u| in_j[u]).map(|u| h[u]).sum();
        Climber { a, n, in_j, g, h, value }
    }

    fn delta(&self, u: usize, v: usize) -> f64 {
        let (a, n) = (self.a, self.n);
        -self.h[u] + self.g[u] - a[u * n + u] - self.g[v] + a[u * n + v] + self.h[v] - a[v * n + v]
            + a[v * n + u]
    }

    /// Moves u out of J and v into J.
    fn swap(&mut self, u: usize, v: usize) {
        let (a, n) = (self.a, self.n);
        self.value += self.delta(u, v);
        self.in_j[u] = false;
        self.in_j[v] = true;
        for w in 0..n {
            let du = a[w * n + u];
            let dv = a[w * n + v];
            self.g[w] += dv - du;
            self.h[w] += du - dv;
        }
    }

    fn climb(&mut self, maximize: bool) {
        loop {
            let mut improved = false;
            for u in 0..self.n {
                if !self.in_j[u] {
                    continue;
                }
                for v in 0..self.n {
                    if self.in_j[v] || !self.in_j[u] {
                        continue;
                    }
                    let d = self.delta(u, v);
                    let gain = if maximize { d } else { -d };
                    if gain > TIE * self.value.abs().max(1.0) {
                        self.swap(u, v);
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        self.value = cross(self.a, self.n, &self.in_j);
    }
}

fn random_half(n: usize, rng: &mut Stream) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..n).collect();
    for t in (1..n).rev() {
        let r = rng.below(t + 1);
        idx.swap(t, r);
    }
    mask_of(n, &idx[..n / 2])
}

/// Swap hill climbing from `starts` plus `restarts` random halves.
/// Returns the best subset (normalized to contain 0) and its cross mass.
pub fn climb(
    a: &[f64],
    n: usize,
    maximize: bool,
    starts: &[Vec<usize>],
    restarts: usize,
    rng: &mut Stream,
) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut inits: Vec<Vec<bool>> = starts.iter().map(|s| mask_of(n, s)).collect();
    for _ in 0..restarts {
        inits.push(random_half(n, rng));
    }
    for init in inits {
        let mut c = Climber::new(a, n, init);
        c.climb(maximize);
        let mut j = c.in_j.clone();
        if !j[0] {
            j.iter_mut().for_each(|b| *b = !*b);
        }
        let mem = members(&j);
        let replace = match &best {
            None => true,
            Some((bj, bv)) => better(c.value, *bv, maximize) || (!better(*bv, c.value, maximize) && mem < *bj),
        };
        if replace {
            best = Some((mem, c.value));
        }
    }
    best.expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(n: usize, rng: &mut Stream) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for u in 0..n {
            for v in u..n {
                let x = rng.uniform() - 0.5;
                a[u * n + v] = x;
                a[v * n + u] = x;
            }
        }
        a
    }

    #[test]
    fn swap_delta_matches_recount() {
        let mut rng = Stream::new(11);
        let n = 10;
        let a = random_sym(n, &mut rng);
        let mut c = Climber::new(&a, n, mask_of(n, &[0, 2, 4, 6, 8]));
        for _ in 0..30 {
            let inj = members(&c.in_j);
            let outj: Vec<usize> = (0..n).filter(|u| !c.in_j[*u]).collect();
            let u = inj[rng.below(inj.len())];
            let v = outj[rng.below(outj.len())];
            c.swap(u, v);
            assert!((c.value - cross(&a, n, &c.in_j)).abs() < 1e-10);
        }
    }

    #[test]
    fn enumeration_count() {
        let mut count = 0;
        for_each_half_with_zero(10, |j| {
            assert_eq!(j[0], 0);
            assert_eq!(j.len(), 5);
            count += 1;
        });
        assert_eq!(count, 126);
    }

    #[test]
    fn climb_reaches_exact_on_small_instances() {
        let mut rng = Stream::new(3);
        for _ in 0..10 {
            let a = random_sym(8, &mut rng);
            let (_, e) = exact(&a, 8, true);
            let (_, h) = climb(&a, 8, true, &[], 32, &mut rng);
            assert!((e - h).abs() < 1e-12);
        }
    }
}
