//! Complex banded LU with partial pivoting.

use num_complex::Complex64;

/// LU factors of an n×n band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` stores columns `i-kl ..= i+ku+kl`; the extra `kl` columns hold
/// fill-in from row swaps.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    a: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factorises the matrix given by `entry(i, j)` for `|i-j|` within the band.
    pub fn factor(n: usize, kl: usize, ku: usize, entry: impl Fn(usize, usize) -> Complex64) -> Option<Self> {
        let width = 2 * kl + ku + 1;
        let mut a = vec![Complex64::new(0.0, 0.0); n * width];
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                a[i * width + (j + kl - i)] = entry(i, j);
            }
        }
        let mut lu = BandedLu { n, kl, ku, width, a, pivots: vec![0; n] };
        lu.decompose().then_some(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn decompose(&mut self) -> bool {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku + kl).min(n - 1);
            let mut p = k;
            let mut best = self.a[self.idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = self.a[self.idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return false;
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (ik, ip) = (self.idx(k, j), self.idx(p, j));
                    self.a.swap(ik, ip);
                }
            }
            let pivot = self.a[self.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.a[ik] / pivot;
                self.a[ik] = l;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..=last_col {
                    let kj = self.a[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.a[ij] -= l * kj;
                }
            }
        }
        true
    }

    /// Solves A x = b in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        debug_assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.a[self.idx(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + ku + kl).min(n - 1) {
                s -= self.a[self.idx(k, j)] * b[j];
            }
            b[k] = s / self.a[self.idx(k, k)];
        }
    }

    /// Solves conj(A) x = b in place.
    pub fn solve_conj(&self, b: &mut [Complex64]) {
        b.iter_mut().for_each(|v| *v = v.conj());
        self.solve(b);
        b.iter_mut().for_each(|v| *v = v.conj());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 40;
        let (kl, ku) = (3, 3);
        // Indefinite Hermitian-like band with a small imaginary shift, which
        // is what the window operator factorises.
        let entry = |i: usize, j: usize| -> Complex64 {
            let d = i.abs_diff(j) as f64;
            if i == j {
                Complex64::new(((i * 7919) % 13) as f64 - 6.0, 0.01)
            } else {
                Complex64::new(1.0 / (1.0 + d) * if (i + j) % 2 == 0 { 1.0 } else { -1.3 }, 0.0)
            }
        };
        let lu = BandedLu::factor(n, kl, ku, entry).unwrap();
        let dense = DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) <= 3 {
                entry(i, j)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut x = rhs.clone();
        lu.solve(&mut x);
        let ax = &dense * DVector::from_vec(x);
        for i in 0..n {
            assert!((ax[i] - rhs[i]).norm() < 1e-9, "row {i}");
        }
        let mut y = rhs.clone();
        lu.solve_conj(&mut y);
        let ay = dense.map(|v| v.conj()) * DVector::from_vec(y);
        for i in 0..n {
            assert!((ay[i] - rhs[i]).norm() < 1e-9);
        }
    }
}
