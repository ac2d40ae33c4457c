//! Dataset plumbing: LibSVM text parsing, seeded synthetic regression
//! instances with a prescribed Gram condition number, and vertical (by
//! feature) partitioning across clients.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::comm::{rng_stream, Lane, Party};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};
use crate::scalar::Real;

/// A design matrix split by columns across `n` clients.
///
/// Client `i` holds the block `A_i` (all rows, its share of features).
/// Labels are private to client 0. `column_map[j]` gives the original column
/// index of the `j`-th column in block-concatenation order, so solutions can
/// be mapped back to the input feature order.
#[derive(Clone, Debug)]
pub struct VerticalDataset<S> {
    pub blocks: Vec<DenseMatrix<S>>,
    pub labels: Vector<S>,
    pub sample_count: usize,
    pub feature_counts: Vec<usize>,
    pub column_map: Vec<usize>,
}

impl<S: Real> VerticalDataset<S> {
    pub fn new(blocks: Vec<DenseMatrix<S>>, labels: Vector<S>, column_map: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptyInput("dataset needs at least one block"));
        }
        let s = blocks[0].rows();
        if blocks.iter().any(|b| b.rows() != s) {
            return Err(Error::Dimension("blocks disagree on sample count".into()));
        }
        if labels.len() != s {
            return Err(Error::Dimension(format!(
                "{} labels for {} samples",
                labels.len(),
                s
            )));
        }
        let feature_counts: Vec<usize> = blocks.iter().map(|b| b.cols()).collect();
        let d: usize = feature_counts.iter().sum();
        if column_map.len() != d {
            return Err(Error::Dimension(format!(
                "column map covers {} of {} columns",
                column_map.len(),
                d
            )));
        }
        Ok(Self { blocks, labels, sample_count: s, feature_counts, column_map })
    }

    pub fn n_clients(&self) -> usize {
        self.blocks.len()
    }

    pub fn total_features(&self) -> usize {
        self.feature_counts.iter().sum()
    }

    /// `Σ_i A_i x_i` for per-client coefficient blocks.
    pub fn apply_blocks(&self, xs: &[Vector<S>]) -> Result<Vector<S>> {
        if xs.len() != self.blocks.len() {
            return Err(Error::Dimension(format!(
                "{} coefficient blocks for {} data blocks",
                xs.len(),
                self.blocks.len()
            )));
        }
        let mut acc = Vector::zeros(self.sample_count);
        for (block, x) in self.blocks.iter().zip(xs) {
            acc.add_assign_vec(&block.matvec(x)?);
        }
        Ok(acc)
    }

    /// Splits one concatenated coefficient vector into per-client blocks.
    pub fn split_coefficients(&self, x: &Vector<S>) -> Result<Vec<Vector<S>>> {
        if x.len() != self.total_features() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} features",
                x.len(),
                self.total_features()
            )));
        }
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut at = 0;
        for &w in &self.feature_counts {
            out.push(Vector::from_raw(x.as_slice()[at..at + w].to_vec()));
            at += w;
        }
        Ok(out)
    }

    /// Concatenates the blocks back into one matrix, in block order.
    pub fn assemble(&self) -> DenseMatrix<S> {
        let d = self.total_features();
        let mut m = DenseMatrix::zeros(self.sample_count, d);
        let mut at = 0;
        for block in &self.blocks {
            for r in 0..self.sample_count {
                for c in 0..block.cols() {
                    m.set(r, at + c, block.get(r, c));
                }
            }
            at += block.cols();
        }
        m
    }

    /// Rebuilds the design matrix in its original column order.
    pub fn reconstruct_original(&self) -> DenseMatrix<S> {
        let joined = self.assemble();
        let d = joined.cols();
        let mut m = DenseMatrix::zeros(joined.rows(), d);
        for (j, &orig) in self.column_map.iter().enumerate() {
            for r in 0..joined.rows() {
                m.set(r, orig, joined.get(r, j));
            }
        }
        m
    }

    /// Maps a coefficient vector (in block order) back to original feature
    /// order.
    pub fn coefficients_in_original_order(&self, x: &Vector<S>) -> Result<Vector<S>> {
        if x.len() != self.column_map.len() {
            return Err(Error::Dimension("coefficient length mismatch".into()));
        }
        let mut out = vec![S::zero(); x.len()];
        for (j, &orig) in self.column_map.iter().enumerate() {
            out[orig] = x[j];
        }
        Ok(Vector::from_raw(out))
    }
}

/// Parses LibSVM text: each nonempty line is `<label> (<index>:<value>)*`
/// with 1-based strictly increasing indices; `#` starts a comment.
///
/// The matrix width is the largest index seen unless `dim_override` asks for
/// more columns.
pub fn parse_libsvm<S: Real>(
    text: &str,
    dim_override: Option<usize>,
) -> Result<(DenseMatrix<S>, Vector<S>)> {
    let mut rows: Vec<(S, Vec<(usize, S)>)> = Vec::new();
    let mut max_index = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad label `{label_tok}`"),
        })?;
        let mut feats = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `index:value`, got `{tok}`"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature index `{idx_s}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse { line: line_no, msg: "feature indices are 1-based".into() });
            }
            if idx <= prev_index {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("index {idx} does not increase past {prev_index}"),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature value `{val_s}`"),
            })?;
            prev_index = idx;
            max_index = max_index.max(idx);
            feats.push((idx - 1, S::of(val)));
        }
        rows.push((S::of(label), feats));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no data lines"));
    }
    let d = match dim_override {
        Some(d) if d < max_index => {
            return Err(Error::Dimension(format!(
                "dimension override {d} is below the largest index {max_index}"
            )));
        }
        Some(d) => d,
        None => max_index,
    };
    let mut m = DenseMatrix::zeros(rows.len(), d);
    let mut labels = Vec::with_capacity(rows.len());
    for (r, (label, feats)) in rows.into_iter().enumerate() {
        labels.push(label);
        for (c, v) in feats {
            m.set(r, c, v);
        }
    }
    Ok((m, Vector::new(labels)?))
}

/// Writes a matrix/labels pair back to LibSVM text (zeros omitted).
pub fn to_libsvm<S: Real>(a: &DenseMatrix<S>, b: &Vector<S>) -> String {
    let mut out = String::new();
    for r in 0..a.rows() {
        out.push_str(&format!("{}", b[r].as_f64()));
        for c in 0..a.cols() {
            let v = a.get(r, c);
            if v != S::zero() {
                out.push_str(&format!(" {}:{}", c + 1, v.as_f64()));
            }
        }
        out.push('\n');
    }
    out
}

/// Block widths for `d` features over `n` clients: the first `d mod n`
/// clients get `⌈d/n⌉` columns, the rest `⌊d/n⌋`.
pub fn block_widths(d: usize, n: usize) -> Vec<usize> {
    let q = d / n;
    let r = d % n;
    (0..n).map(|i| if i < r { q + 1 } else { q }).collect()
}

/// Splits features across `n` clients, optionally shuffling the columns
/// first with the dataset's shuffle stream.
pub fn partition_vertical<S: Real>(
    a: &DenseMatrix<S>,
    b: &Vector<S>,
    n: usize,
    seed: u64,
    shuffle: bool,
) -> Result<VerticalDataset<S>> {
    let d = a.cols();
    if n == 0 {
        return Err(Error::Partition("need at least one client".into()));
    }
    if n > d {
        return Err(Error::Partition(format!("cannot split {d} features across {n} clients")));
    }
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!("{} labels for {} samples", b.len(), a.rows())));
    }
    let mut perm: Vec<usize> = (0..d).collect();
    if shuffle {
        let mut rng = rng_stream(seed, Party::Shared, 0, Lane::Shuffle);
        for i in (1..d).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
    }
    let widths = block_widths(d, n);
    let mut blocks = Vec::with_capacity(n);
    let mut at = 0;
    for &w in &widths {
        blocks.push(a.select_columns(&perm[at..at + w])?);
        at += w;
    }
    VerticalDataset::new(blocks, b.clone(), perm)
}

/// A synthetic regression instance with known generating coefficients.
#[derive(Clone, Debug)]
pub struct SynthInstance<S> {
    pub a: DenseMatrix<S>,
    pub b: Vector<S>,
    pub x_true: Vector<S>,
}

/// Generates `(A, b)` with `λmax(AᵀA)/λmin(AᵀA) ≈ cond` and
/// `b = A·x_true + noise·N(0, I)` for a seeded unit-norm `x_true`.
pub fn synth_regression<S: Real>(
    s: usize,
    d: usize,
    cond: f64,
    noise: f64,
    seed: u64,
) -> Result<(DenseMatrix<S>, Vector<S>)> {
    let inst = synth_regression_full(s, d, cond, noise, seed)?;
    Ok((inst.a, inst.b))
}

/// [`synth_regression`] but also returning the generating coefficients.
pub fn synth_regression_full<S: Real>(
    s: usize,
    d: usize,
    cond: f64,
    noise: f64,
    seed: u64,
) -> Result<SynthInstance<S>> {
    if s == 0 || d == 0 {
        return Err(Error::Config("synthetic instance needs s, d ≥ 1".into()));
    }
    if !(cond >= 1.0) {
        return Err(Error::Config(format!("condition number must be ≥ 1, got {cond}")));
    }
    if !(noise >= 0.0) {
        return Err(Error::Config(format!("noise level must be ≥ 0, got {noise}")));
    }
    let mut rng = rng_stream(seed, Party::Shared, 0, Lane::Data);
    let r = s.min(d);
    let u = orthonormal_columns::<S>(s, r, &mut rng)?;
    let v = orthonormal_columns::<S>(d, r, &mut rng)?;
    // Singular values fall geometrically from 1 to cond^{-1/2}, so the Gram
    // spectrum spans exactly the requested ratio.
    let sigmas: Vec<S> = (0..r)
        .map(|j| {
            if r == 1 {
                S::one()
            } else {
                S::of(cond.powf(-(j as f64) / (2.0 * (r as f64 - 1.0))))
            }
        })
        .collect();
    let mut data = vec![S::zero(); s * d];
    for j in 0..r {
        let sj = sigmas[j];
        for p in 0..s {
            let upj = u[j][p] * sj;
            for q in 0..d {
                data[p * d + q] += upj * v[j][q];
            }
        }
    }
    let a = DenseMatrix::new(s, d, data)?;
    let raw: Vec<S> = (0..d)
        .map(|_| S::of(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let x_raw = Vector::from_raw(raw);
    let nrm = x_raw.norm();
    if nrm == S::zero() {
        return Err(Error::Degenerate("zero draw for generating coefficients".into()));
    }
    let x_true = x_raw.scale(S::one() / nrm);
    let mut b = a.matvec(&x_true)?;
    if noise > 0.0 {
        let eta = S::of(noise);
        for i in 0..s {
            b[i] += eta * S::of(rng.sample::<f64, _>(StandardNormal));
        }
    }
    Ok(SynthInstance { a, b, x_true })
}

/// Draws `count` Gaussian vectors of length `len` and orthonormalizes them
/// with twice-through modified Gram-Schmidt.
fn orthonormal_columns<S: Real>(
    len: usize,
    count: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<Vec<S>>> {
    let mut cols: Vec<Vec<S>> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut col: Vec<S> = (0..len)
            .map(|_| S::of(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        for _pass in 0..2 {
            for prev in &cols {
                let mut dot = S::zero();
                for i in 0..len {
                    dot += col[i] * prev[i];
                }
                for i in 0..len {
                    col[i] -= dot * prev[i];
                }
            }
        }
        let mut norm_sq = S::zero();
        for &x in &col {
            norm_sq += x * x;
        }
        let norm = norm_sq.sqrt();
        if norm < S::of(1e-10) {
            return Err(Error::Degenerate("random columns were linearly dependent".into()));
        }
        for x in &mut col {
            *x /= norm;
        }
        cols.push(col);
    }
    Ok(cols)
}
