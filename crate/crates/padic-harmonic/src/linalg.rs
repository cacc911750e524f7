//! Small dense matrices over Q_p.
//!
//! Everything here is desk scale (dimension at most eight), so the
//! implementations are straightforward Gaussian elimination with the pivot
//! chosen at minimal valuation, which is the p-adically stable choice.

use crate::padic::PAdicScalar;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct MatK {
    rows: usize,
    cols: usize,
    prime: u64,
    data: Vec<PAdicScalar>,
}

impl MatK {
    pub fn zero(rows: usize, cols: usize, prime: u64) -> Self {
        MatK {
            rows,
            cols,
            prime,
            data: vec![PAdicScalar::zero(prime); rows * cols],
        }
    }

    pub fn identity(n: usize, prime: u64, prec: u32) -> Self {
        let mut m = Self::zero(n, n, prime);
        for i in 0..n {
            m.set(i, i, PAdicScalar::one(prime, prec));
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<PAdicScalar>>) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let prime = rows[0][0].prime();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged matrix");
            data.extend(row);
        }
        MatK { rows: r, cols: c, prime, data }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn get(&self, i: usize, j: usize) -> &PAdicScalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: PAdicScalar) {
        self.data[i * self.cols + j] = x;
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero(self.cols, self.rows, self.prime);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.get(i, j).clone());
            }
        }
        m
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut m = Self::zero(self.rows, other.cols, self.prime);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = PAdicScalar::zero(self.prime);
                for k in 0..self.cols {
                    acc = acc.add(&self.get(i, k).mul(other.get(k, j)));
                }
                m.set(i, j, acc);
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[PAdicScalar]) -> Vec<PAdicScalar> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = PAdicScalar::zero(self.prime);
                for k in 0..self.cols {
                    acc = acc.add(&self.get(i, k).mul(&v[k]));
                }
                acc
            })
            .collect()
    }

    pub fn scale(&self, s: &PAdicScalar) -> Self {
        let mut m = self.clone();
        for x in &mut m.data {
            *x = x.mul(s);
        }
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (x, y) in m.data.iter_mut().zip(&other.data) {
            *x = x.add(y);
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (x, y) in m.data.iter_mut().zip(&other.data) {
            *x = x.sub(y);
        }
        m
    }

    /// Pivot row at or below `row` in column `col` with minimal valuation.
    fn pivot(&self, row: usize, col: usize) -> Option<usize> {
        let mut best: Option<(usize, i64)> = None;
        for i in row..self.rows {
            if let Ok(Some(v)) = self.get(i, col).valuation() {
                if best.map_or(true, |(_, bv)| v < bv) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn det(&self) -> Result<PAdicScalar> {
        assert_eq!(self.rows, self.cols, "determinant of non-square matrix");
        let mut m = self.clone();
        let n = m.rows;
        let mut det = PAdicScalar::one(self.prime, crate::padic::max_precision(self.prime));
        for c in 0..n {
            let Some(p) = m.pivot(c, c) else {
                return Ok(PAdicScalar::zero(self.prime));
            };
            if p != c {
                m.swap_rows(p, c);
                det = det.neg();
            }
            let piv = m.get(c, c).clone();
            det = det.mul(&piv);
            let inv = piv.inverse()?;
            for i in c + 1..n {
                let factor = m.get(i, c).mul(&inv);
                if factor.is_zero() {
                    continue;
                }
                for j in c..n {
                    let upd = m.get(i, j).sub(&factor.mul(m.get(c, j)));
                    m.set(i, j, upd);
                }
            }
        }
        Ok(det)
    }

    pub fn inverse(&self) -> Result<MatK> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let n = self.rows;
        let prec = self
            .data
            .iter()
            .filter_map(|x| x.precision())
            .min()
            .unwrap_or(crate::padic::max_precision(self.prime));
        let mut m = self.clone();
        let mut inv = Self::identity(n, self.prime, prec);
        for c in 0..n {
            let p = m.pivot(c, c).ok_or_else(|| {
                Error::DivisionByZero("singular matrix".into())
            })?;
            m.swap_rows(p, c);
            inv.swap_rows(p, c);
            let piv_inv = m.get(c, c).inverse()?;
            for j in 0..n {
                m.set(c, j, m.get(c, j).mul(&piv_inv));
                inv.set(c, j, inv.get(c, j).mul(&piv_inv));
            }
            for i in 0..n {
                if i == c || m.get(i, c).is_zero() {
                    continue;
                }
                let factor = m.get(i, c).clone();
                for j in 0..n {
                    let a = m.get(i, j).sub(&factor.mul(m.get(c, j)));
                    m.set(i, j, a);
                    let b = inv.get(i, j).sub(&factor.mul(inv.get(c, j)));
                    inv.set(i, j, b);
                }
            }
        }
        Ok(inv)
    }

    /// Basis of the kernel, as column vectors.
    pub fn kernel(&self) -> Result<Vec<Vec<PAdicScalar>>> {
        let mut m = self.clone();
        let n = self.cols;
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut row = 0;
        for col in 0..n {
            let Some(p) = m.pivot(row, col) else { continue };
            if m.get(p, col).is_zero() {
                continue;
            }
            m.swap_rows(p, row);
            let inv = m.get(row, col).inverse()?;
            for j in 0..n {
                m.set(row, j, m.get(row, j).mul(&inv));
            }
            for i in 0..m.rows {
                if i == row || m.get(i, col).is_zero() {
                    continue;
                }
                let f = m.get(i, col).clone();
                for j in 0..n {
                    let a = m.get(i, j).sub(&f.mul(m.get(row, j)));
                    m.set(i, j, a);
                }
            }
            pivots.push((row, col));
            row += 1;
            if row == m.rows {
                break;
            }
        }
        let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
        let mut basis = Vec::new();
        for free in 0..n {
            if pivot_cols.contains(&free) {
                continue;
            }
            let mut v = vec![PAdicScalar::zero(self.prime); n];
            v[free] = PAdicScalar::one(self.prime, crate::padic::max_precision(self.prime));
            for &(r, c) in &pivots {
                v[c] = m.get(r, free).neg();
            }
            basis.push(v);
        }
        Ok(basis)
    }

    /// Pfaffian of an antisymmetric matrix of even size, by row expansion.
    pub fn pfaffian(&self) -> Result<PAdicScalar> {
        assert_eq!(self.rows, self.cols);
        if self.rows % 2 != 0 {
            return Ok(PAdicScalar::zero(self.prime));
        }
        if self.rows == 0 {
            return Ok(PAdicScalar::one(self.prime, crate::padic::max_precision(self.prime)));
        }
        let mut acc = PAdicScalar::zero(self.prime);
        for j in 1..self.cols {
            let a = self.get(0, j);
            if a.is_zero() {
                continue;
            }
            let minor = self.strike(&[0, j]);
            let term = a.mul(&minor.pfaffian()?);
            acc = if j % 2 == 1 { acc.add(&term) } else { acc.sub(&term) };
        }
        Ok(acc)
    }

    fn strike(&self, remove: &[usize]) -> MatK {
        let keep: Vec<usize> = (0..self.rows).filter(|i| !remove.contains(i)).collect();
        let mut m = Self::zero(keep.len(), keep.len(), self.prime);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                m.set(a, b, self.get(i, j).clone());
            }
        }
        m
    }
}

pub fn dot(a: &[PAdicScalar], b: &[PAdicScalar]) -> PAdicScalar {
    assert_eq!(a.len(), b.len());
    let prime = a[0].prime();
    let mut acc = PAdicScalar::zero(prime);
    for (x, y) in a.iter().zip(b) {
        acc = acc.add(&x.mul(y));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i128, d: i128) -> PAdicScalar {
        PAdicScalar::from_rational(n, d, 5, 16).unwrap()
    }

    fn mat(rows: &[&[(i128, i128)]]) -> MatK {
        MatK::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&(n, d)| s(n, d)).collect())
                .collect(),
        )
    }

    #[test]
    fn determinant_of_known_matrix() {
        // det [[1,2],[3,4]] = -2
        let m = mat(&[&[(1, 1), (2, 1)], &[(3, 1), (4, 1)]]);
        assert_eq!(m.det().unwrap(), s(-2, 1));
        // det with p in the denominators
        let m = mat(&[&[(1, 5), (0, 1)], &[(7, 1), (5, 1)]]);
        assert_eq!(m.det().unwrap(), s(1, 1));
    }

    #[test]
    fn inverse_round_trip() {
        let m = mat(&[&[(2, 5), (1, 1)], &[(3, 1), (4, 1)]]);
        let inv = m.inverse().unwrap();
        let id = m.mul(&inv);
        assert_eq!(id.get(0, 0), &s(1, 1));
        assert_eq!(id.get(1, 1), &s(1, 1));
        assert!(id.get(0, 1).is_zero());
        assert!(id.get(1, 0).is_zero());
    }

    #[test]
    fn kernel_of_rank_one_matrix() {
        // rows proportional: kernel is the line x + 2y = 0
        let m = mat(&[&[(1, 1), (2, 1)], &[(5, 1), (10, 1)]]);
        let k = m.kernel().unwrap();
        assert_eq!(k.len(), 1);
        let img = m.mul_vec(&k[0]);
        assert!(img.iter().all(|x| x.is_zero()));
    }

    #[test]
    fn pfaffian_squares_to_determinant() {
        // antisymmetric 4x4 with entries a=1/5, b=2, c=3, d=7, e=1, f=4
        let z = (0, 1);
        let m = mat(&[
            &[z, (1, 5), (2, 1), (3, 1)],
            &[(-1, 5), z, (7, 1), (1, 1)],
            &[(-2, 1), (-7, 1), z, (4, 1)],
            &[(-3, 1), (-1, 1), (-4, 1), z],
        ]);
        let pf = m.pfaffian().unwrap();
        // pf = af - be + cd = 4/5 - 2 + 21 = 99/5
        assert_eq!(pf, s(99, 5));
        assert_eq!(pf.mul(&pf), m.det().unwrap());
    }
}
