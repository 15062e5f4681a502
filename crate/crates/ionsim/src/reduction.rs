//! Invariant-subspace reduction for trajectory simulation.
//!
//! A coupling generator connects each basis state to very few others, so
//! the subspace reachable from an initial state's support is usually a
//! small block (a single pair for |g, n> initial states). Restricting the
//! dynamics to that block is exact, not an approximation: entries outside
//! it start at zero and every operation applied by the steppers produces
//! IEEE zeros there, term by term. This is purely a performance device;
//! populations computed on the block equal the full-space ones bit for
//! bit up to summation order.

use num_complex::Complex64;

use crate::hilbert::DensityMatrix;
use crate::linalg::ComplexMatrix;

/// The sorted full-space indices of one reachable subspace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportBlock {
    indices: Vec<usize>,
}

impl SupportBlock {
    /// Closure of `seeds` under the exact nonzero pattern of `g`
    /// (breadth-first; an edge exists where an entry is not IEEE zero).
    pub fn reachable(g: &ComplexMatrix, seeds: impl IntoIterator<Item = usize>) -> Self {
        let dim = g.dim();
        let mut in_block = vec![false; dim];
        let mut queue: Vec<usize> = Vec::new();
        for s in seeds {
            assert!(s < dim, "seed index {s} out of range for dim {dim}");
            if !in_block[s] {
                in_block[s] = true;
                queue.push(s);
            }
        }
        while let Some(i) = queue.pop() {
            for j in 0..dim {
                if !in_block[j]
                    && (g.get(i, j) != Complex64::new(0.0, 0.0)
                        || g.get(j, i) != Complex64::new(0.0, 0.0))
                {
                    in_block[j] = true;
                    queue.push(j);
                }
            }
        }
        let indices = (0..dim).filter(|&i| in_block[i]).collect();
        Self { indices }
    }

    /// Block reachable from the support of a state (rows with any nonzero
    /// entry; for a valid density matrix this covers its full support).
    pub fn from_state(g: &ComplexMatrix, rho0: &DensityMatrix) -> Self {
        let dim = rho0.dim();
        let m = rho0.matrix();
        let seeds = (0..dim).filter(|&i| {
            (0..dim).any(|j| {
                m.get(i, j) != Complex64::new(0.0, 0.0) || m.get(j, i) != Complex64::new(0.0, 0.0)
            })
        });
        Self::reachable(g, seeds)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Full-space indices, ascending.
    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Restriction of a full-space operator to the block.
    pub fn restrict(&self, m: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim(), |i, j| m.get(self.indices[i], self.indices[j]))
    }

    /// Embeds a block operator back into the full space, zero elsewhere.
    pub fn embed(&self, block: &ComplexMatrix, full_dim: usize) -> ComplexMatrix {
        assert_eq!(block.dim(), self.dim(), "block dimension mismatch");
        let mut out = ComplexMatrix::zeros(full_dim);
        for (bi, &fi) in self.indices.iter().enumerate() {
            for (bj, &fj) in self.indices.iter().enumerate() {
                out.set(fi, fj, block.get(bi, bj));
            }
        }
        out
    }

    /// Block-local positions whose full-space index belongs to the
    /// electronic ground manifold (full index < fock_dim).
    pub fn ground_positions(&self, fock_dim: usize) -> Vec<usize> {
        self.indices
            .iter()
            .enumerate()
            .filter(|(_, &full)| full < fock_dim)
            .map(|(local, _)| local)
            .collect()
    }

    /// Block-local positions sitting in the top two vibrational levels of
    /// either electronic manifold; used for truncation diagnostics.
    pub fn edge_positions(&self, fock_dim: usize) -> Vec<usize> {
        self.indices
            .iter()
            .enumerate()
            .filter(|(_, &full)| full % fock_dim + 2 >= fock_dim)
            .map(|(local, _)| local)
            .collect()
    }
}
