//! Dense square matrices of the small orders that arise here (1 to 3, with a
//! little headroom): LU determinant and solve, Jacobi eigenvalues for
//! symmetric matrices, and signature extraction.

#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// Largest absolute asymmetry |a_ij - a_ji|.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    /// Determinant via LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        if n == 1 {
            return self.a[0];
        }
        if n == 2 {
            return self.a[0] * self.a[3] - self.a[1] * self.a[2];
        }
        let mut m = self.a.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if m[r * n + col].abs() > m[piv * n + col].abs() {
                    piv = r;
                }
            }
            if m[piv * n + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    m.swap(col * n + j, piv * n + j);
                }
                det = -det;
            }
            det *= m[col * n + col];
            for r in (col + 1)..n {
                let f = m[r * n + col] / m[col * n + col];
                for j in col..n {
                    m[r * n + j] -= f * m[col * n + j];
                }
            }
        }
        det
    }

    /// Solve `A x = b`; `None` if the pivoting finds a (numerically) singular A.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut m = self.a.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if m[r * n + col].abs() > m[piv * n + col].abs() {
                    piv = r;
                }
            }
            if m[piv * n + col].abs() < 1e-300 {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    m.swap(col * n + j, piv * n + j);
                }
                x.swap(col, piv);
            }
            for r in (col + 1)..n {
                let f = m[r * n + col] / m[col * n + col];
                for j in col..n {
                    m[r * n + j] -= f * m[col * n + j];
                }
                x[r] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for j in (col + 1)..n {
                s -= m[col * n + j] * x[j];
            }
            x[col] = s / m[col * n + col];
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<SquareMatrix> {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let x = self.solve(&e)?;
            for (i, &v) in x.iter().enumerate() {
                out.set(i, col, v);
            }
        }
        Some(out)
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
    pub fn sym_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        if n == 1 {
            return vec![self.a[0]];
        }
        let mut m = self.clone();
        m.symmetrize();
        for _sweep in 0..64 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += m.get(i, j) * m.get(i, j);
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let app = m.get(p, p);
                    let aqq = m.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = m.get(k, p);
                        let akq = m.get(k, q);
                        m.set(k, p, c * akp - s * akq);
                        m.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = m.get(p, k);
                        let aqk = m.get(q, k);
                        m.set(p, k, c * apk - s * aqk);
                        m.set(q, k, s * apk + c * aqk);
                    }
                }
            }
        }
        (0..n).map(|i| m.get(i, i)).collect()
    }

    /// Signature (positive count minus negative count) of a symmetric matrix;
    /// eigenvalues within `tol` of zero are an error signalled as `None`.
    pub fn signature(&self, tol: f64) -> Option<i32> {
        let eig = self.sym_eigenvalues();
        let mut sig = 0;
        for &e in &eig {
            if e.abs() <= tol {
                return None;
            }
            sig += if e > 0.0 { 1 } else { -1 };
        }
        Some(sig)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_solve_3x3() {
        let m = SquareMatrix::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]]);
        // det = 2*(6-1) - 1*(2-0) = 8
        assert!((m.det() - 8.0).abs() < 1e-12);
        let x = m.solve(&[1.0, 2.0, 3.0]).unwrap();
        let r = m.mul_vec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_eigenvalues_2x2() {
        let m = SquareMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let mut e = m.sym_eigenvalues();
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
        assert_eq!(m.signature(1e-12), Some(2));
    }

    #[test]
    fn signature_of_saddle() {
        let m = SquareMatrix::from_rows(&[&[1.0, 0.0], &[0.0, -4.0]]);
        assert_eq!(m.signature(1e-12), Some(0));
    }

    #[test]
    fn inverse_roundtrip() {
        let m = SquareMatrix::from_rows(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let inv = m.inverse().unwrap();
        let mut prod = SquareMatrix::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += m.get(i, k) * inv.get(k, j);
                }
                prod.set(i, j, s);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - want).abs() < 1e-12);
            }
        }
    }
}
