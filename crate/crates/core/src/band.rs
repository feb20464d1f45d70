//! Complex band matrix with LU factorization by partial pivoting.
//!
//! Row `i` is stored compactly as `kl + ku + 1` entries, entry `j` holding
//! `A[i][i - kl + j]`. Pivoting widens the upper band to `kl + ku`, which the
//! compact rows absorb once they are shifted left during factorization.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            rows: vec![Complex64::new(0.0, 0.0); n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    /// Accumulate `value` into `A[i][j]`.
    ///
    /// Panics if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: Complex64) {
        assert!(i < self.n && j < self.n, "index ({i}, {j}) out of range");
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let w = self.width();
        self.rows[i * w + j + self.kl - i] += value;
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i >= self.n || j >= self.n || j + self.kl < i || j > i + self.ku {
            return Complex64::new(0.0, 0.0);
        }
        self.rows[i * self.width() + j + self.kl - i]
    }

    /// `A·x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(&self) -> Result<BandLu> {
        let (n, kl) = (self.n, self.kl);
        let mm = self.width();
        let mut au = self.rows.clone();
        let mut al = vec![Complex64::new(0.0, 0.0); n * kl.max(1)];
        let mut pivots = vec![0usize; n];

        // Shift the first kl rows left so every row starts at its leftmost
        // nonzero column.
        let mut l = kl;
        for i in 0..kl.min(n) {
            for j in (kl - i)..mm {
                au[i * mm + j - l] = au[i * mm + j];
            }
            l -= 1;
            for j in (mm - l - 1)..mm {
                au[i * mm + j] = Complex64::new(0.0, 0.0);
            }
        }

        let mut l = kl.min(n);
        for k in 0..n {
            let mut pivot = k;
            let mut best = au[k * mm].norm();
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l {
                let mag = au[j * mm].norm();
                if mag > best {
                    best = mag;
                    pivot = j;
                }
            }
            pivots[k] = pivot;
            if best == 0.0 {
                return Err(Error::Singular { pivot: k });
            }
            if pivot != k {
                for j in 0..mm {
                    au.swap(k * mm + j, pivot * mm + j);
                }
            }
            let diag = au[k * mm];
            for i in (k + 1)..l {
                let factor = au[i * mm] / diag;
                al[k * kl + i - k - 1] = factor;
                for j in 1..mm {
                    au[i * mm + j - 1] = au[i * mm + j] - factor * au[k * mm + j];
                }
                au[i * mm + mm - 1] = Complex64::new(0.0, 0.0);
            }
        }

        Ok(BandLu {
            n,
            kl,
            mm,
            au,
            al,
            pivots,
        })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.factor()?.solve(rhs))
    }
}

/// Packed LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    mm: usize,
    au: Vec<Complex64>,
    al: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let (n, kl, mm) = (self.n, self.kl, self.mm);
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();

        let mut l = kl.min(n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l {
                let xk = x[k];
                x[j] -= self.al[k * kl + j - k - 1] * xk;
            }
        }

        let mut l = 1;
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in 1..l {
                acc -= self.au[i * mm + k] * x[k + i];
            }
            x[i] = acc / self.au[i * mm];
            if l < mm {
                l += 1;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tridiagonal() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        for (i, j, v) in [(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 2.0)] {
            a.add(i, j, c(v, 0.0));
        }
        let x = a.solve(&[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]).unwrap();
        for (got, want) in x.iter().zip([0.5, 0.0, 1.5]) {
            assert!((got - c(want, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_leading_entry_needs_pivot() {
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.add(0, 1, c(0.0, 1.0));
        a.add(1, 0, c(2.0, 0.0));
        a.add(1, 1, c(1.0, 0.0));
        let x = a.solve(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let back = a.mul_vec(&x);
        assert!((back[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(back[1].norm() < 1e-15);
    }

    #[test]
    fn singular_reported() {
        let mut a = BandMatrix::zeros(2, 1, 1);
        a.add(0, 0, c(1.0, 0.0));
        a.add(0, 1, c(2.0, 0.0));
        a.add(1, 0, c(2.0, 0.0));
        a.add(1, 1, c(4.0, 0.0));
        assert!(matches!(a.solve(&[c(1.0, 0.0), c(1.0, 0.0)]), Err(Error::Singular { .. })));
    }

    proptest! {
        #[test]
        fn matches_dense_solve(
            n in 1usize..24,
            kl in 0usize..4,
            ku in 0usize..4,
            seed in proptest::collection::vec(-1.0f64..1.0, 2 * 24 * 9 + 48),
        ) {
            let mut a = BandMatrix::zeros(n, kl, ku);
            let mut dense = DMatrix::<Complex64>::zeros(n, n);
            let mut it = seed.iter().copied();
            for i in 0..n {
                for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                    let mut v = c(it.next().unwrap(), it.next().unwrap());
                    if i == j {
                        v += c(0.5, 0.0);
                    }
                    a.add(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let rhs: Vec<Complex64> = (0..n).map(|i| c(1.0 + i as f64, -(i as f64))).collect();
            let Some(expected) = dense.clone().lu().solve(&DVector::from_vec(rhs.clone())) else {
                return Ok(());
            };
            let cond = dense.clone().norm() * dense.try_inverse().map(|m| m.norm()).unwrap_or(f64::INFINITY);
            prop_assume!(cond < 1e8);
            let x = a.solve(&rhs).unwrap();
            for i in 0..n {
                prop_assert!((x[i] - expected[i]).norm() <= 1e-8 * (1.0 + expected[i].norm()));
            }
        }
    }
}
