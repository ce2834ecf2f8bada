use nalgebra::DMatrix;

use crate::C64;

/// Compressed-sparse-row complex matrix for generators applied many times per step.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOp {
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
            last = Some((r, c));
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n)
            .flat_map(move |r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |i| (r, self.cols[i], self.vals[i])))
    }

    pub fn adjoint(&self) -> Self {
        let entries = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.n, entries)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SparseOp) -> Self {
        let n = self.n * other.n;
        let mut entries = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                entries.push((r1 * other.n + r2, c1 * other.n + c2, v1 * v2));
            }
        }
        Self::from_triplets(n, entries)
    }

    /// `u·self + v·other`.
    pub fn scaled_sum(&self, u: C64, other: &SparseOp, v: C64) -> Self {
        assert_eq!(self.n, other.n);
        let entries = self
            .triplets()
            .map(|(r, c, x)| (r, c, u * x))
            .chain(other.triplets().map(|(r, c, x)| (r, c, v * x)))
            .collect();
        Self::from_triplets(self.n, entries)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    /// `y += alpha * A x`.
    pub fn mul_acc(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[i] * x[self.cols[i]];
            }
            *yr += alpha * acc;
        }
    }

    pub fn apply(&self, x: &nalgebra::DVector<C64>) -> nalgebra::DVector<C64> {
        let mut y = nalgebra::DVector::zeros(self.n);
        self.mul_acc(C64::new(1.0, 0.0), x.as_slice(), y.as_mut_slice());
        y
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn row_sum_bound(&self) -> f64 {
        (0..self.n)
            .map(|r| {
                self.vals[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }
}
