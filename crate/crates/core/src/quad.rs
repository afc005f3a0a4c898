//! Second-moment matrices and the c-norm.

use serde::{Deserialize, Serialize};

use crate::dist::Dist;
use crate::error::{check_dim, invalid, Result};
use crate::perm::{binomial, Permutation};
use crate::rng::Stream;
use crate::split;

/// Largest C(n, n/2) handled by exhaustive subset enumeration.
pub const EXACT_SUBSET_LIMIT: f64 = 1e7;
pub const DEFAULT_RESTARTS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadMatrix {
    n: usize,
    data: Vec<f64>,
}

impl QuadMatrix {
    pub fn zeros(n: usize) -> Self {
        QuadMatrix { n, data: vec![0.0; n * n] }
    }

    /// Row-major entries; must be symmetric.
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(n * n, data.len())?;
        for u in 0..n {
            for v in 0..u {
                let (a, b) = (data[u * n + v], data[v * n + u]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(invalid(format!("matrix not symmetric at ({u},{v})")));
                }
            }
        }
        Ok(QuadMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[u * self.n + v]
    }

    pub fn set_sym(&mut self, u: usize, v: usize, x: f64) {
        self.data[u * self.n + v] = x;
        self.data[v * self.n + u] = x;
    }

    pub fn sub(&self, other: &QuadMatrix) -> Result<Self> {
        check_dim(self.n, other.n)?;
        Ok(QuadMatrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }

    pub fn add(&self, other: &QuadMatrix) -> Result<Self> {
        check_dim(self.n, other.n)?;
        Ok(QuadMatrix { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }

    pub fn scale(&self, c: f64) -> Self {
        QuadMatrix { n: self.n, data: self.data.iter().map(|a| a * c).collect() }
    }

    /// Frobenius scalar product.
    pub fn dot(&self, other: &QuadMatrix) -> Result<f64> {
        check_dim(self.n, other.n)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Sum_{u,v} self(u,v) other(sigma u, sigma v).
    pub fn dot_permuted(&self, other: &QuadMatrix, sigma: &Permutation) -> f64 {
        let n = self.n;
        let s = sigma.map();
        let mut acc = 0.0;
        for u in 0..n {
            let row = &self.data[u * n..(u + 1) * n];
            let orow = &other.data[s[u] * n..(s[u] + 1) * n];
            for v in 0..n {
                acc += row[v] * orow[s[v]];
            }
        }
        acc
    }

    /// M_sigma(u, v) = M(sigma u, sigma v).
    pub fn permute(&self, sigma: &Permutation) -> Result<Self> {
        check_dim(self.n, sigma.len())?;
        let n = self.n;
        let s = sigma.map();
        let mut out = QuadMatrix::zeros(n);
        for u in 0..n {
            for v in 0..n {
                out.data[u * n + v] = self.data[s[u] * n + s[v]];
            }
        }
        Ok(out)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.n.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn off_diagonal_mean(&self) -> f64 {
        let n = self.n;
        if n < 2 {
            return 0.0;
        }
        let diag: f64 = (0..n).map(|u| self.get(u, u)).sum();
        (self.total() - diag) / (n * (n - 1)) as f64
    }
}

/// M(u, v) = E[x_u x_v].
pub fn quad_matrix(phi: &Dist) -> QuadMatrix {
    let n = phi.n();
    let mut m = QuadMatrix::zeros(n);
    for (x, w) in phi.points() {
        let sup = x.support();
        for &u in &sup {
            for &v in &sup {
                m.data[u * n + v] += w;
            }
        }
    }
    m
}

/// Zero diagonal, constant off-diagonal equal to the off-diagonal mean of `m`.
pub fn mbar(m: &QuadMatrix) -> QuadMatrix {
    let mean = m.off_diagonal_mean();
    let n = m.n;
    let mut out = QuadMatrix::zeros(n);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                out.data[u * n + v] = mean;
            }
        }
    }
    out
}

/// c_I(M) = (4/n^2) sum_{u in I, v not in I} M(u, v).
pub fn c_value(m: &QuadMatrix, subset: &[usize]) -> f64 {
    let n = m.n;
    let mask = split::mask_of(n, subset);
    4.0 * split::cross(&m.data, n, &mask) / (n * n) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    Auto,
    Exact,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CNorm {
    pub value: f64,
    pub subset: Vec<usize>,
    pub exact: bool,
}

pub fn exact_feasible(n: usize) -> bool {
    binomial(n, n / 2) <= EXACT_SUBSET_LIMIT
}

/// max over |I| = n/2 of |c_I(M)|. Heuristic results are lower bounds.
pub fn c_norm(m: &QuadMatrix, mode: SearchMode, rng: &mut Stream) -> Result<CNorm> {
    let n = m.n;
    if n % 2 != 0 || n <= 4 {
        return Err(invalid(format!("c-norm needs even n > 4, got {n}")));
    }
    let exact = match mode {
        SearchMode::Exact => true,
        SearchMode::Heuristic => false,
        SearchMode::Auto => exact_feasible(n),
    };
    let scale = 4.0 / (n * n) as f64;
    let (hi, lo) = if exact {
        (split::exact(&m.data, n, true), split::exact(&m.data, n, false))
    } else {
        let start = vec![(0..n / 2).collect::<Vec<_>>()];
        (
            split::climb(&m.data, n, true, &start, DEFAULT_RESTARTS, rng),
            split::climb(&m.data, n, false, &start, DEFAULT_RESTARTS, rng),
        )
    };
    let (subset, raw) = if hi.1.abs() >= lo.1.abs() { hi } else { lo };
    Ok(CNorm { value: raw.abs() * scale, subset, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitVector;

    #[test]
    fn quad_of_dirac_is_outer_product() {
        let x: BitVector = "1010".parse().unwrap();
        let m = quad_matrix(&Dist::dirac(x));
        assert_eq!(m.get(0, 2), 1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.get(2, 2), 1.0);
    }

    #[test]
    fn n4_has_nonzero_matrix_of_zero_seminorm() {
        let mut a = QuadMatrix::zeros(4);
        a.set_sym(0, 1, 1.0);
        a.set_sym(2, 3, -1.0);
        for j in [[0, 1], [0, 2], [0, 3]] {
            assert_eq!(c_value(&a, &j), 0.0);
        }
    }

    #[test]
    fn rejects_small_or_odd_n() {
        let mut rng = Stream::new(0);
        assert!(c_norm(&QuadMatrix::zeros(4), SearchMode::Auto, &mut rng).is_err());
        assert!(c_norm(&QuadMatrix::zeros(7), SearchMode::Auto, &mut rng).is_err());
    }
}
