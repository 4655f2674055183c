use crate::error::{Error, Result};

/// Symmetric band matrix storing the lower triangle, half-bandwidth `b`.
///
/// Row `i` keeps columns `i−b ..= i` contiguously, so entry `(i, j)` lives at
/// `i·(b+1) + j + b − i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, b: usize) -> Self {
        let b = b.min(n.saturating_sub(1));
        Self { n, b, data: vec![0.0; n * (b + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.b + 1) + j + self.b - i
    }

    /// Adds `v` to `(i, j)` and, implicitly, `(j, i)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        debug_assert!(i - j <= self.b, "entry ({i}, {j}) outside band {}", self.b);
        let k = self.at(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.b {
            0.0
        } else {
            self.data[self.at(i, j)]
        }
    }

    /// Replaces row and column `i` by the identity.
    pub fn set_identity_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.b);
        for j in lo..i {
            let k = self.at(i, j);
            self.data[k] = 0.0;
        }
        for r in i + 1..(i + self.b + 1).min(self.n) {
            let k = self.at(r, i);
            self.data[k] = 0.0;
        }
        let k = self.at(i, i);
        self.data[k] = 1.0;
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            let row = &self.data[self.at(i, lo)..=self.at(i, i)];
            let mut s = 0.0;
            for (off, a) in row[..row.len() - 1].iter().enumerate() {
                let j = lo + off;
                s += a * x[j];
                out[j] += a * x[i];
            }
            out[i] += s + row[row.len() - 1] * x[i];
        }
    }

    /// `L D Lᵀ` without pivoting. Works for definite and quasi-definite
    /// (symmetric with definite diagonal blocks of opposite sign) matrices.
    pub fn factor(&self) -> Result<BandLdl> {
        self.factor_impl(false)
    }

    /// As [`factor`](Self::factor), but every pivot must be positive.
    pub fn factor_spd(&self) -> Result<BandLdl> {
        self.factor_impl(true)
    }

    fn factor_impl(&self, spd: bool) -> Result<BandLdl> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        let mut l = self.data.clone();
        let mut d = vec![0.0; n];
        let mut scratch = vec![0.0; w];
        let scale = (0..n).map(|i| self.data[self.at(i, i)].abs()).fold(0.0, f64::max);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            // scratch[j − lo] = L(i, j)·d(j) for j < i
            for j in lo..i {
                let jlo = j.saturating_sub(b).max(lo);
                let mut s = l[i * w + j + b - i];
                let rj = j * w + b - j;
                for k in jlo..j {
                    s -= scratch[k - lo] * l[rj + k];
                }
                scratch[j - lo] = s;
                l[i * w + j + b - i] = s / d[j];
            }
            let mut dii = l[i * w + b];
            for j in lo..i {
                dii -= scratch[j - lo] * l[i * w + j + b - i];
            }
            let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
            if !dii.is_finite() || dii.abs() <= tiny || (spd && dii <= 0.0) {
                return Err(Error::NotPositiveDefinite { row: i, pivot: dii });
            }
            d[i] = dii;
            l[i * w + b] = 1.0;
        }
        Ok(BandLdl { n, b, l, d })
    }
}

/// Banded `L D Lᵀ` factors.
#[derive(Debug, Clone)]
pub struct BandLdl {
    n: usize,
    b: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandLdl {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Overwrites `x` (the right-hand side) with the solution.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let row = &self.l[i * w + lo + b - i..i * w + b];
            let s: f64 = row.iter().zip(&x[lo..i]).map(|(a, v)| a * v).sum();
            x[i] -= s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let lo = i.saturating_sub(b);
            let xi = x[i];
            let row = &self.l[i * w + lo + b - i..i * w + b];
            for (a, v) in row.iter().zip(&mut x[lo..i]) {
                *v -= a * xi;
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> SymBand {
        let mut a = SymBand::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0 + shift);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn solves_spd() {
        let n = 40;
        let a = laplace_1d(n, 0.1);
        let f = a.factor_spd().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = f.solve(&b);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_band_and_quasi_definite() {
        // [[P, Gᵀ], [G, −Q]] interleaved, P, Q SPD
        let m = 12;
        let n = 2 * m;
        let mut a = SymBand::zeros(n, 5);
        for k in 0..m {
            a.add(2 * k, 2 * k, 3.0 + (k as f64).cos());
            a.add(2 * k + 1, 2 * k + 1, -2.0 - 0.5 * (k as f64).sin());
            a.add(2 * k + 1, 2 * k, 0.7);
            if k > 0 {
                a.add(2 * k, 2 * k - 2, -0.4);
                a.add(2 * k + 1, 2 * k - 1, 0.3);
                a.add(2 * k + 1, 2 * k - 2, -0.2);
            }
            if k > 1 {
                a.add(2 * k, 2 * k - 4, 0.1);
            }
        }
        assert!(a.factor_spd().is_err());
        let f = a.factor().unwrap();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let x = f.solve(&b);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-11, "{i}: {} vs {}", ax[i], b[i]);
        }
    }

    #[test]
    fn rejects_singular() {
        let a = laplace_1d(5, -(2.0 - 2.0 * (std::f64::consts::PI / 6.0).cos()));
        // smallest eigenvalue of the shifted matrix is zero
        assert!(a.factor_spd().is_err());
    }

    #[test]
    fn identity_rows() {
        let mut a = laplace_1d(6, 0.0);
        a.set_identity_row(0);
        a.set_identity_row(5);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.get(5, 4), 0.0);
        assert_eq!(a.get(0, 0), 1.0);
        let x = a.factor_spd().unwrap().solve(&[0.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        assert!((x[1] - 2.0).abs() < 1e-12 && (x[2] - 3.0).abs() < 1e-12);
    }
}
