//! Minimal dense linear algebra: vectors, row-major matrices, matrix-vector
//! products, and power iteration for spectral estimates.
//!
//! Everything here is deliberately small and deterministic. Matrices are
//! dense (sparse inputs are densified at load time) and immutable once built;
//! the solvers only ever need `A_i x_i`, `A_iᵀ y`, single row/column dots,
//! and largest-eigenvalue estimates of Gram matrices.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense vector with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector<S> {
    data: Vec<S>,
}

impl<S: Real> Vector<S> {
    /// Builds a vector, rejecting NaN and infinity.
    pub fn new(data: Vec<S>) -> Result<Self> {
        if let Some((i, v)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {i} is {v}")));
        }
        Ok(Self { data })
    }

    /// All-zero vector of length `n`.
    pub fn zeros(n: usize) -> Self {
        Self { data: vec![S::zero(); n] }
    }

    /// Skips the finite check; used internally where inputs are already
    /// validated and transient overflow is handled by the solver guard.
    pub(crate) fn from_raw(data: Vec<S>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Self) -> S {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> S {
        self.dot(self)
    }

    pub fn norm(&self) -> S {
        self.norm_sq().sqrt()
    }

    pub fn norm_inf(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// True if every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, alpha: S) -> Self {
        Self::from_raw(self.data.iter().map(|&a| alpha * a).collect())
    }

    /// `self + alpha·other`, elementwise `self[i] + alpha*other[i]`.
    pub fn add_scaled(&self, alpha: S, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        )
    }

    /// `self − alpha·other`, elementwise `self[i] − alpha*other[i]`.
    pub fn sub_scaled(&self, alpha: S, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - alpha * b)
                .collect(),
        )
    }

    /// Convex-style blend `tau·self + (1−tau)·other`.
    pub fn mix(&self, tau: S, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let omt = S::one() - tau;
        Self::from_raw(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| tau * a + omt * b)
                .collect(),
        )
    }

    pub fn add_assign_vec(&mut self, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

impl<S> std::ops::Index<usize> for Vector<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.data[i]
    }
}

impl<S> std::ops::IndexMut<usize> for Vector<S> {
    fn index_mut(&mut self, i: usize) -> &mut S {
        &mut self.data[i]
    }
}

/// Dense row-major matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Real> DenseMatrix<S> {
    /// Builds an s×d matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some((i, v)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({},{}) is {v}",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    /// Builds from row slices; all rows must be equally long.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub(crate) fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    /// Row `r` as a slice of length `cols`.
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `M v`: result length `rows`.
    pub fn matvec(&self, v: &Vector<S>) -> Result<Vector<S>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "matvec: {}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc = S::zero();
            for (m, &x) in self.row(r).iter().zip(v.as_slice()) {
                acc = acc + *m * x;
            }
            out.push(acc);
        }
        Ok(Vector::from_raw(out))
    }

    /// `Mᵀ v`: result length `cols`.
    pub fn matvec_t(&self, v: &Vector<S>) -> Result<Vector<S>> {
        if v.len() != self.rows {
            return Err(Error::Dimension(format!(
                "matvec_t: {}x{} transposed times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![S::zero(); self.cols];
        for r in 0..self.rows {
            let vr = v[r];
            for (o, &m) in out.iter_mut().zip(self.row(r)) {
                *o = *o + m * vr;
            }
        }
        Ok(Vector::from_raw(out))
    }

    /// Dot of row `r` with `v` (length `cols`); the coordinate sketch
    /// `⟨A_i(x − w), e_r⟩` is exactly this product.
    pub fn row_dot(&self, r: usize, v: &Vector<S>) -> S {
        debug_assert_eq!(v.len(), self.cols);
        self.row(r)
            .iter()
            .zip(v.as_slice())
            .fold(S::zero(), |acc, (&m, &x)| acc + m * x)
    }

    /// Dot of column `c` with `v` (length `rows`), i.e. `(Mᵀv)[c]`.
    pub fn col_dot(&self, c: usize, v: &Vector<S>) -> S {
        debug_assert_eq!(v.len(), self.rows);
        let mut acc = S::zero();
        for r in 0..self.rows {
            acc = acc + self.data[r * self.cols + c] * v[r];
        }
        acc
    }

    /// Copies the given columns, in order, into a new matrix.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&c| c >= self.cols) {
            return Err(Error::Dimension(format!(
                "column {bad} out of range for {}x{}",
                self.rows, self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(indices.iter().map(|&c| row[c]));
        }
        Ok(Self { rows: self.rows, cols: indices.len(), data })
    }
}

/// Result of a power-iteration spectral estimate.
#[derive(Clone, Copy, Debug)]
pub struct SpectralEstimate<S> {
    /// Estimated largest eigenvalue of `MᵀM`.
    pub value: S,
    /// Whether the relative-change stopping rule fired before `max_iter`.
    pub converged: bool,
    /// Iterations actually performed.
    pub iterations: usize,
}

/// Default relative tolerance for [`lambda_max_gram`].
pub const LAMBDA_MAX_TOL: f64 = 1e-10;
/// Default iteration cap for [`lambda_max_gram`].
pub const LAMBDA_MAX_ITERS: usize = 10_000;

/// Estimates `λmax(MᵀM)` by power iteration on the Gram matrix.
///
/// The start vector is the normalized all-ones vector, so the estimate is
/// deterministic. Stops when the Rayleigh quotient's relative change drops
/// below `tol` or after `max_iter` rounds, whichever first; the result says
/// which. A zero matrix yields exactly 0.
pub fn lambda_max_gram<S: Real>(m: &DenseMatrix<S>, tol: S, max_iter: usize) -> SpectralEstimate<S> {
    if m.rows() == 0 || m.cols() == 0 {
        return SpectralEstimate { value: S::zero(), converged: true, iterations: 0 };
    }
    let n = m.cols();
    let inv = S::one() / S::of_usize(n).sqrt();
    let mut v = Vector::from_raw(vec![inv; n]);
    let mut prev = S::zero();
    for it in 1..=max_iter {
        let av = m.matvec(&v).expect("power iteration shapes");
        let w = m.matvec_t(&av).expect("power iteration shapes");
        let lambda = v.dot(&w);
        let wnorm = w.norm();
        if wnorm == S::zero() {
            return SpectralEstimate { value: S::zero(), converged: true, iterations: it };
        }
        if it > 1 && (lambda - prev).abs() <= tol * lambda.abs() {
            return SpectralEstimate { value: lambda, converged: true, iterations: it };
        }
        prev = lambda;
        v = w.scale(S::one() / wnorm);
    }
    SpectralEstimate { value: prev, converged: false, iterations: max_iter }
}

/// [`lambda_max_gram`] with the default tolerance and iteration cap.
pub fn lambda_max_gram_default<S: Real>(m: &DenseMatrix<S>) -> SpectralEstimate<S> {
    lambda_max_gram(m, S::of(LAMBDA_MAX_TOL), LAMBDA_MAX_ITERS)
}

/// `λmax(AᵀA)` for a column-blocked `A = [A_1 … A_n]`, computed by power
/// iteration on the block operator so `A` is never assembled. Matches
/// [`lambda_max_gram`] on the concatenated matrix.
pub fn lambda_max_gram_blocks<S: Real>(
    blocks: &[DenseMatrix<S>],
    tol: S,
    max_iter: usize,
) -> Result<SpectralEstimate<S>> {
    if blocks.is_empty() {
        return Err(Error::EmptyInput("lambda_max_gram_blocks needs at least one block"));
    }
    if blocks.windows(2).any(|w| w[0].rows() != w[1].rows()) {
        return Err(Error::Dimension("blocks disagree on row count".into()));
    }
    let widths: Vec<usize> = blocks.iter().map(|b| b.cols()).collect();
    let d: usize = widths.iter().sum();
    let s = blocks[0].rows();
    if d == 0 || s == 0 {
        return Ok(SpectralEstimate { value: S::zero(), converged: true, iterations: 0 });
    }
    let split = |v: &Vector<S>| -> Vec<Vector<S>> {
        let mut out = Vec::with_capacity(widths.len());
        let mut at = 0;
        for &w in &widths {
            out.push(Vector::from_raw(v.as_slice()[at..at + w].to_vec()));
            at += w;
        }
        out
    };
    let inv = S::one() / S::of_usize(d).sqrt();
    let mut v = Vector::from_raw(vec![inv; d]);
    let mut prev = S::zero();
    for it in 1..=max_iter {
        let parts = split(&v);
        let mut av = Vector::zeros(s);
        for (block, part) in blocks.iter().zip(&parts) {
            av.add_assign_vec(&block.matvec(part)?);
        }
        let mut w = Vec::with_capacity(d);
        for block in blocks {
            w.extend_from_slice(block.matvec_t(&av)?.as_slice());
        }
        let w = Vector::from_raw(w);
        let lambda = v.dot(&w);
        let wnorm = w.norm();
        if wnorm == S::zero() {
            return Ok(SpectralEstimate { value: S::zero(), converged: true, iterations: it });
        }
        if it > 1 && (lambda - prev).abs() <= tol * lambda.abs() {
            return Ok(SpectralEstimate { value: lambda, converged: true, iterations: it });
        }
        prev = lambda;
        v = w.scale(S::one() / wnorm);
    }
    Ok(SpectralEstimate { value: prev, converged: false, iterations: max_iter })
}

/// Spectral bounds assembled from per-block Gram estimates.
///
/// For a column-blocked matrix `A = [A_1 … A_n]`, the largest Gram eigenvalue
/// satisfies `λmax(AᵀA) ≤ Σ_i λmax(A_iᵀA_i) ≤ n·max_i λmax(A_iᵀA_i)`, so
/// either scaled form can stand in for the global constant when the blocks
/// live on different machines and `A` is never assembled.
#[derive(Clone, Debug)]
pub struct BlockLambdaBound<S> {
    /// `λmax(A_iᵀA_i)` per block.
    pub per_block: Vec<S>,
}

impl<S: Real> BlockLambdaBound<S> {
    pub fn n(&self) -> usize {
        self.per_block.len()
    }

    pub fn max(&self) -> S {
        self.per_block
            .iter()
            .fold(S::zero(), |acc, &v| acc.max(v))
    }

    pub fn sum(&self) -> S {
        self.per_block.iter().fold(S::zero(), |acc, &v| acc + v)
    }

    /// `n · max_i λmax(A_iᵀA_i)`, the coarse upper bound for `λmax(AᵀA)`.
    pub fn n_times_max(&self) -> S {
        S::of_usize(self.n()) * self.max()
    }

    /// `n · Σ_i λmax(A_iᵀA_i)`, the conservative form used by step rules
    /// that must work without the assembled matrix.
    pub fn n_times_sum(&self) -> S {
        S::of_usize(self.n()) * self.sum()
    }
}

/// Per-block spectral estimates for a column-blocked matrix.
pub fn block_lambda_bound<S: Real>(blocks: &[DenseMatrix<S>]) -> Result<BlockLambdaBound<S>> {
    if blocks.is_empty() {
        return Err(Error::EmptyInput("block_lambda_bound needs at least one block"));
    }
    if blocks.windows(2).any(|w| w[0].rows() != w[1].rows()) {
        return Err(Error::Dimension("blocks disagree on row count".into()));
    }
    let per_block = blocks
        .iter()
        .map(|b| lambda_max_gram_default(b).value)
        .collect();
    Ok(BlockLambdaBound { per_block })
}
