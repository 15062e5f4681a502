//! Dense square complex matrices with row-major storage.
//!
//! Dimensions in this crate stay small (a few times the Fock truncation),
//! so dense storage with O(dim^3) products is the right tradeoff and no
//! sparse machinery is warranted. Hermitian eigendecompositions are
//! delegated to nalgebra and re-exposed through [`EigenDecomposition`]
//! with eigenvalues sorted ascending.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Square complex matrix, row-major: entry (i, j) lives at `data[i*dim + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C_ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C_ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.dim + j] = value;
    }

    pub fn copy_from(&mut self, other: &Self) {
        assert_eq!(self.dim, other.dim, "copy_from dimension mismatch");
        self.data.copy_from_slice(&other.data);
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// self += factor * other
    pub fn add_scaled(&mut self, factor: Complex64, other: &Self) {
        assert_eq!(self.dim, other.dim, "add_scaled dimension mismatch");
        for (dst, src) in self.data.iter_mut().zip(&other.data) {
            *dst += factor * src;
        }
    }

    /// out = a * b, without allocating.
    pub fn mul_into(out: &mut Self, a: &Self, b: &Self) {
        let n = a.dim;
        assert_eq!(n, b.dim, "mul dimension mismatch");
        assert_eq!(n, out.dim, "mul output dimension mismatch");
        let ad = &a.data;
        let bd = &b.data;
        let od = &mut out.data;
        for i in 0..n {
            let row = i * n;
            od[row..row + n].fill(C_ZERO);
            for k in 0..n {
                let aik = ad[row + k];
                if aik == C_ZERO {
                    continue;
                }
                let brow = k * n;
                for j in 0..n {
                    od[row + j] += aik * bd[brow + j];
                }
            }
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.dim);
        Self::mul_into(&mut out, self, other);
        out
    }

    /// out = a * b - b * a, without allocating.
    pub fn commutator_into(out: &mut Self, a: &Self, b: &Self) {
        let n = a.dim;
        assert_eq!(n, b.dim, "commutator dimension mismatch");
        assert_eq!(n, out.dim, "commutator output dimension mismatch");
        let ad = &a.data;
        let bd = &b.data;
        let od = &mut out.data;
        od.fill(C_ZERO);
        for i in 0..n {
            let row = i * n;
            for k in 0..n {
                let aik = ad[row + k];
                let bik = bd[row + k];
                let krow = k * n;
                if aik != C_ZERO {
                    for j in 0..n {
                        od[row + j] += aik * bd[krow + j];
                    }
                }
                if bik != C_ZERO {
                    for j in 0..n {
                        od[row + j] -= bik * ad[krow + j];
                    }
                }
            }
        }
    }

    pub fn commutator(a: &Self, b: &Self) -> Self {
        let mut out = Self::zeros(a.dim);
        Self::commutator_into(&mut out, a, b);
        out
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    /// Replaces self with (self + self^dagger) / 2.
    pub fn hermitize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let ii = i * n + i;
            self.data[ii] = Complex64::new(self.data[ii].re, 0.0);
            for j in (i + 1)..n {
                let ij = i * n + j;
                let ji = j * n + i;
                let avg = 0.5 * (self.data[ij] + self.data[ji].conj());
                self.data[ij] = avg;
                self.data[ji] = avg.conj();
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.dim;
        let mut t = C_ZERO;
        for i in 0..n {
            t += self.data[i * n + i];
        }
        t
    }

    /// trace(self * other), computed without forming the product.
    pub fn trace_of_product(&self, other: &Self) -> Complex64 {
        let n = self.dim;
        assert_eq!(n, other.dim, "trace_of_product dimension mismatch");
        let mut t = C_ZERO;
        for i in 0..n {
            for k in 0..n {
                t += self.data[i * n + k] * other.data[k * n + i];
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of (self - self^dagger), i.e. twice the distance to
    /// the nearest Hermitian matrix.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            s += Complex64::new(0.0, 2.0 * self.data[i * n + i].im).norm_sqr();
            for j in (i + 1)..n {
                let d = self.data[i * n + j] - self.data[j * n + i].conj();
                s += 2.0 * d.norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Hermitian deviation relative to the Frobenius norm; zero for the
    /// zero matrix.
    pub fn hermitian_deviation_rel(&self) -> f64 {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            0.0
        } else {
            self.hermitian_deviation() / norm
        }
    }

    /// Kronecker product; the left factor indexes the coarse blocks.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let (na, nb) = (a.dim, b.dim);
        let n = na * nb;
        let mut out = Self::zeros(n);
        for ia in 0..na {
            for ja in 0..na {
                let f = a.data[ia * na + ja];
                if f == C_ZERO {
                    continue;
                }
                for ib in 0..nb {
                    for jb in 0..nb {
                        out.data[(ia * nb + ib) * n + (ja * nb + jb)] = f * b.data[ib * nb + jb];
                    }
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        assert_eq!(n, v.len(), "apply dimension mismatch");
        let mut out = vec![C_ZERO; n];
        for i in 0..n {
            let row = i * n;
            let mut acc = C_ZERO;
            for j in 0..n {
                acc += self.data[row + j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        let n = self.dim;
        // nalgebra stores column-major; from_fn indexes (row, col).
        DMatrix::from_fn(n, n, |i, j| self.data[i * n + j])
    }

    /// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
    ///
    /// The input is hermitized first so rounding-level asymmetry cannot
    /// poison the solver; callers needing a strict check do it themselves.
    pub fn eigen_hermitian(&self) -> Result<EigenDecomposition> {
        let mut h = self.clone();
        h.hermitize();
        let eig = h.to_nalgebra().symmetric_eigen();
        let n = self.dim;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut values = Vec::with_capacity(n);
        let mut vectors = Self::zeros(n);
        for (col, &src) in order.iter().enumerate() {
            let ev = eig.eigenvalues[src];
            if !ev.is_finite() {
                return Err(Error::Eigen(format!("non-finite eigenvalue {ev}")));
            }
            values.push(ev);
            for row in 0..n {
                vectors.set(row, col, eig.eigenvectors[(row, src)]);
            }
        }
        Ok(EigenDecomposition { values, vectors })
    }

    /// Smallest eigenvalue of a Hermitian matrix. Dimensions 1 and 2 use
    /// closed forms so per-trajectory positivity checks stay cheap.
    pub fn hermitian_min_eigenvalue(&self) -> Result<f64> {
        match self.dim {
            0 => Ok(0.0),
            1 => Ok(self.data[0].re),
            2 => {
                let a = self.data[0].re;
                let d = self.data[3].re;
                let tr = a + d;
                let det = a * d - (self.data[1] * self.data[2]).re;
                let disc = (tr * tr - 4.0 * det).max(0.0);
                Ok(0.5 * (tr - disc.sqrt()))
            }
            _ => {
                let eig = self.eigen_hermitian()?;
                Ok(eig.values[0])
            }
        }
    }

    /// Spectral norm (largest |eigenvalue|) of a Hermitian matrix.
    pub fn hermitian_spectral_norm(&self) -> Result<f64> {
        if self.dim == 0 {
            return Ok(0.0);
        }
        let eig = self.eigen_hermitian()?;
        let lo = eig.values[0].abs();
        let hi = eig.values[eig.values.len() - 1].abs();
        Ok(lo.max(hi))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        let d = self.dim;
        &mut self.data[i * d + j]
    }
}

/// Sorted Hermitian eigendecomposition: `values[k]` pairs with the k-th
/// column of `vectors`, and `vectors` is unitary to solver precision.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, k: usize) -> Vec<Complex64> {
        let n = self.vectors.dim();
        (0..n).map(|i| self.vectors.get(i, k)).collect()
    }

    /// V^dagger m V: coordinates of m in the eigenbasis.
    pub fn to_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let vd = self.vectors.adjoint();
        vd.mul(m).mul(&self.vectors)
    }

    /// V m V^dagger: back from eigenbasis coordinates.
    pub fn from_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.mul(m).mul(&self.vectors.adjoint())
    }

    /// Residual max_k ||A v_k - lambda_k v_k||_2 against the matrix that
    /// was decomposed.
    pub fn max_residual(&self, a: &ComplexMatrix) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let v = self.column(k);
            let av = a.apply(&v);
            let mut s = 0.0;
            for i in 0..n {
                s += (av[i] - self.values[k] * v[i]).norm_sqr();
            }
            worst = worst.max(s.sqrt());
        }
        worst
    }
}
