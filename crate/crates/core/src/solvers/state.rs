//! Iterate storage shared by every solver variant.
//!
//! One struct holds the union of all per-variant lanes; a variant leaves the
//! lanes it does not use empty. The tracker keeps running sums of the
//! half-step iterates so the averaged point `x̄^K = (1/K) Σ x^{k+1/2}` can be
//! read at any time without storing the trajectory. Variants without an
//! extrapolation phase record their full iterates in the same slots, so the
//! averaged read-out is defined for every solver.

use crate::linalg::Vector;
use crate::scalar::Real;

/// Residuals kept by the error-feedback variant: what compression withheld
/// last round and re-enters the next payload.
#[derive(Clone, Debug)]
pub struct ErrorState<S> {
    /// Residual on the broadcast payload, held by the first device.
    pub e: Vector<S>,
    /// Residual on each client's upload payload.
    pub e_blocks: Vec<Vector<S>>,
}

impl<S: Real> ErrorState<S> {
    fn empty() -> Self {
        Self { e: Vector::zeros(0), e_blocks: Vec::new() }
    }

    fn zeros(n: usize, s: usize) -> Self {
        Self {
            e: Vector::zeros(s),
            e_blocks: (0..n).map(|_| Vector::zeros(s)).collect(),
        }
    }

    /// Largest residual magnitude across server and client lanes.
    pub fn max_abs(&self) -> S {
        let mut m = self.e.norm_inf();
        for e in &self.e_blocks {
            m = m.max(e.norm_inf());
        }
        m
    }
}

#[derive(Clone, Debug)]
struct AverageTracker<S> {
    sum_x: Vec<Vector<S>>,
    sum_z: Vector<S>,
    sum_y: Vector<S>,
    sum_z_blocks: Vec<Vector<S>>,
    sum_y_blocks: Vec<Vector<S>>,
    count: u64,
}

impl<S: Real> AverageTracker<S> {
    fn like(state_x: &[Vector<S>], z_len: usize, y_len: usize, blocks: usize, s: usize) -> Self {
        Self {
            sum_x: state_x.iter().map(|x| Vector::zeros(x.len())).collect(),
            sum_z: Vector::zeros(z_len),
            sum_y: Vector::zeros(y_len),
            sum_z_blocks: (0..blocks).map(|_| Vector::zeros(s)).collect(),
            sum_y_blocks: (0..blocks).map(|_| Vector::zeros(s)).collect(),
            count: 0,
        }
    }

    fn mean(sum: &Vector<S>, count: u64) -> Vector<S> {
        if count == 0 {
            return sum.clone();
        }
        sum.scale(S::one() / S::of_usize(count as usize))
    }
}

/// Full iterate of a run: primal blocks, consensus and multiplier lanes,
/// reference points with their caches, feedback residuals, gains, and the
/// running half-step averages.
#[derive(Clone, Debug)]
pub struct IterateState<S> {
    /// Primal blocks `x_i`, one per client.
    pub x_blocks: Vec<Vector<S>>,
    /// Consensus iterate `z` (empty when the variant has none).
    pub z: Vector<S>,
    /// Multiplier `y` (empty when the variant has none).
    pub y: Vector<S>,
    /// Primal reference points `w_i`.
    pub w_blocks: Vec<Vector<S>>,
    /// Dual reference point `u`.
    pub u: Vector<S>,
    /// Cached `A_i w_i`, refreshed together with `w`.
    pub cached_aw: Vec<Vector<S>>,
    /// Cached `A_iᵀ u` per client, refreshed together with `u`.
    pub cached_atu: Vec<Vector<S>>,
    /// Error-feedback residuals.
    pub errors: ErrorState<S>,
    /// Per-block consensus iterates `z_i` of the per-block formulation.
    pub z_blocks: Vec<Vector<S>>,
    /// Per-block multipliers `y_i` of the per-block formulation.
    pub y_blocks: Vec<Vector<S>>,
    /// Scalar representation gains, one per client.
    pub gains: Vec<S>,
    /// Momentum lookahead blocks.
    pub lookahead: Vec<Vector<S>>,
    /// Completed iterations.
    pub k: u64,
    /// Most recently recorded half-step primal blocks.
    pub half_x: Vec<Vector<S>>,
    /// Most recently recorded half-step consensus iterate.
    pub half_z: Vector<S>,
    /// Most recently recorded half-step multiplier.
    pub half_y: Vector<S>,
    avg: AverageTracker<S>,
}

impl<S: Real> IterateState<S> {
    /// Zero state sized for `widths` primal blocks and sample count `s`.
    /// `z_len`/`y_len` size the scalar lanes (0 disables them); the flags
    /// allocate the optional lanes.
    #[allow(clippy::too_many_arguments)]
    pub fn zeros(
        widths: &[usize],
        s: usize,
        z_len: usize,
        y_len: usize,
        with_refs: bool,
        with_errors: bool,
        with_block_lanes: bool,
        with_gains: bool,
        with_lookahead: bool,
    ) -> Self {
        let n = widths.len();
        let x_blocks: Vec<Vector<S>> = widths.iter().map(|&w| Vector::zeros(w)).collect();
        let block_lanes = if with_block_lanes { n } else { 0 };
        let avg = AverageTracker::like(&x_blocks, z_len, y_len, block_lanes, s);
        Self {
            w_blocks: if with_refs { x_blocks.clone() } else { Vec::new() },
            u: Vector::zeros(if with_refs { y_len } else { 0 }),
            cached_aw: if with_refs { (0..n).map(|_| Vector::zeros(s)).collect() } else { Vec::new() },
            cached_atu: if with_refs {
                widths.iter().map(|&w| Vector::zeros(w)).collect()
            } else {
                Vec::new()
            },
            errors: if with_errors { ErrorState::zeros(n, s) } else { ErrorState::empty() },
            z_blocks: (0..block_lanes).map(|_| Vector::zeros(s)).collect(),
            y_blocks: (0..block_lanes).map(|_| Vector::zeros(s)).collect(),
            gains: if with_gains { vec![S::one(); n] } else { Vec::new() },
            lookahead: if with_lookahead { x_blocks.clone() } else { Vec::new() },
            half_x: x_blocks.clone(),
            half_z: Vector::zeros(z_len),
            half_y: Vector::zeros(y_len),
            x_blocks,
            z: Vector::zeros(z_len),
            y: Vector::zeros(y_len),
            k: 0,
            avg,
        }
    }

    /// Folds one half-step point into the running sums. Pass a length-0
    /// vector for a lane the variant does not carry.
    pub fn record_half(&mut self, xs: &[Vector<S>], z: &Vector<S>, y: &Vector<S>) {
        for (sum, x) in self.avg.sum_x.iter_mut().zip(xs) {
            sum.add_assign_vec(x);
        }
        if !z.is_empty() {
            self.avg.sum_z.add_assign_vec(z);
        }
        if !y.is_empty() {
            self.avg.sum_y.add_assign_vec(y);
        }
        self.avg.count += 1;
        self.half_x = xs.to_vec();
        self.half_z = z.clone();
        self.half_y = y.clone();
    }

    /// Per-block analogue of [`record_half`](Self::record_half).
    pub fn record_half_blocks(
        &mut self,
        xs: &[Vector<S>],
        z_blocks: &[Vector<S>],
        y_blocks: &[Vector<S>],
    ) {
        for (sum, x) in self.avg.sum_x.iter_mut().zip(xs) {
            sum.add_assign_vec(x);
        }
        for (sum, z) in self.avg.sum_z_blocks.iter_mut().zip(z_blocks) {
            sum.add_assign_vec(z);
        }
        for (sum, y) in self.avg.sum_y_blocks.iter_mut().zip(y_blocks) {
            sum.add_assign_vec(y);
        }
        self.avg.count += 1;
        self.half_x = xs.to_vec();
    }

    /// How many half-step points the averages cover.
    pub fn half_count(&self) -> u64 {
        self.avg.count
    }

    /// `x̄ = (1/K) Σ x^{k+1/2}`; the zero state before any step.
    pub fn averaged_x(&self) -> Vec<Vector<S>> {
        self.avg
            .sum_x
            .iter()
            .map(|sum| AverageTracker::mean(sum, self.avg.count))
            .collect()
    }

    /// `z̄ = (1/K) Σ z^{k+1/2}`.
    pub fn averaged_z(&self) -> Vector<S> {
        AverageTracker::mean(&self.avg.sum_z, self.avg.count)
    }

    /// `ȳ = (1/K) Σ y^{k+1/2}`.
    pub fn averaged_y(&self) -> Vector<S> {
        AverageTracker::mean(&self.avg.sum_y, self.avg.count)
    }

    /// Per-block averaged consensus iterates.
    pub fn averaged_z_blocks(&self) -> Vec<Vector<S>> {
        self.avg
            .sum_z_blocks
            .iter()
            .map(|sum| AverageTracker::mean(sum, self.avg.count))
            .collect()
    }

    /// Per-block averaged multipliers.
    pub fn averaged_y_blocks(&self) -> Vec<Vector<S>> {
        self.avg
            .sum_y_blocks
            .iter()
            .map(|sum| AverageTracker::mean(sum, self.avg.count))
            .collect()
    }

    /// Largest magnitude across every live lane; the divergence guard reads
    /// this after each iteration.
    pub fn max_abs(&self) -> S {
        let mut m = S::zero();
        for x in &self.x_blocks {
            m = m.max(x.norm_inf());
        }
        m = m.max(self.z.norm_inf()).max(self.y.norm_inf());
        for v in self.z_blocks.iter().chain(self.y_blocks.iter()) {
            m = m.max(v.norm_inf());
        }
        for v in self.w_blocks.iter().chain(self.lookahead.iter()) {
            m = m.max(v.norm_inf());
        }
        m = m.max(self.u.norm_inf()).max(self.errors.max_abs());
        for g in &self.gains {
            m = m.max(g.abs());
        }
        m
    }

    /// True when any live lane holds a NaN or infinity.
    pub fn any_non_finite(&self) -> bool {
        let vecs = self
            .x_blocks
            .iter()
            .chain(std::iter::once(&self.z))
            .chain(std::iter::once(&self.y))
            .chain(self.z_blocks.iter())
            .chain(self.y_blocks.iter())
            .chain(self.w_blocks.iter())
            .chain(std::iter::once(&self.u))
            .chain(self.lookahead.iter());
        for v in vecs {
            if !v.all_finite() {
                return true;
            }
        }
        self.gains.iter().any(|g| !g.is_finite())
    }
}
