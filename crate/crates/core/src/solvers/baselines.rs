//! Baselines attacking the regression objective directly: full-gradient
//! descent, its accelerated form, an alternating-direction splitting with
//! per-client subproblems, and ascent on the negated dual. All of them work
//! on the unscaled operators regardless of the problem's `β`.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Vector};
use crate::metrics::{cholesky, cholesky_solve};
use crate::problem::{ProblemSpec, RegKind};
use crate::scalar::Real;
use crate::comm::TrafficLedger;

use super::extragradient::sum_vectors;
use super::state::IterateState;

const SUBSOLVER_CAP: usize = 100_000;

/// `x ← x − γ(Aᵀ∇ℓ(Ax) + ∇r(x))`, blockwise.
pub(super) fn gradient_descent<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let mut ax = Vector::zeros(s);
    for i in 0..n {
        ax.add_assign_vec(&pr.dataset.blocks[i].matvec(&st.x_blocks[i])?);
    }
    let g = pr.loss.grad(&ax)?;
    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let gi = pr.dataset.blocks[i].matvec_t(&g)?;
        let rg = pr.reg.grad(&st.x_blocks[i])?;
        new_x.push(st.x_blocks[i].sub_scaled(gamma, &gi.add(&rg)));
    }
    st.record_half(&new_x, &Vector::zeros(0), &Vector::zeros(0));
    st.x_blocks = new_x;
    st.k += 1;
    led.charge_up(n * s);
    led.charge_down(s);
    led.charge_flops(2 * s * pr.dataset.total_features());
    Ok(())
}

/// Gradient step at the lookahead point, then a momentum extrapolation
/// against the previous iterate.
pub(super) fn accelerated<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    momentum: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let mut av = Vector::zeros(s);
    for i in 0..n {
        av.add_assign_vec(&pr.dataset.blocks[i].matvec(&st.lookahead[i])?);
    }
    let g = pr.loss.grad(&av)?;
    let mut new_x = Vec::with_capacity(n);
    let mut new_look = Vec::with_capacity(n);
    for i in 0..n {
        let gi = pr.dataset.blocks[i].matvec_t(&g)?;
        let rg = pr.reg.grad(&st.lookahead[i])?;
        let next = st.lookahead[i].sub_scaled(gamma, &gi.add(&rg));
        new_look.push(next.add_scaled(momentum, &next.sub(&st.x_blocks[i])));
        new_x.push(next);
    }
    st.record_half(&new_x, &Vector::zeros(0), &Vector::zeros(0));
    st.x_blocks = new_x;
    st.lookahead = new_look;
    st.k += 1;
    led.charge_up(n * s);
    led.charge_down(s);
    led.charge_flops(2 * s * pr.dataset.total_features());
    Ok(())
}

/// Per-client subproblem data for the alternating-direction baseline:
/// factorizations of `cI + ρA_iᵀA_i` for the closed-form path and the raw
/// Gram matrices for the iterative one.
pub(crate) struct AdmmWork<S> {
    factors: Vec<Vec<S>>,
    dims: Vec<usize>,
    grams: Vec<DenseMatrix<S>>,
    curvature: S,
    block_lmax: Vec<S>,
    rho: S,
}

impl<S: Real> AdmmWork<S> {
    pub(crate) fn build(pr: &ProblemSpec<S>, rho: S) -> Result<Self> {
        let curvature = match pr.reg.kind {
            RegKind::Ridge => S::of(2.0) * pr.reg.lambda,
            RegKind::None => S::zero(),
            RegKind::L1 => {
                return Err(Error::Config(
                    "the alternating-direction baseline supports ridge or no regularizer".into(),
                ));
            }
        };
        let n = pr.dataset.n_clients();
        let mut factors = Vec::with_capacity(n);
        let mut dims = Vec::with_capacity(n);
        let mut grams = Vec::with_capacity(n);
        for i in 0..n {
            let a = &pr.dataset.blocks[i];
            let d_i = a.cols();
            let mut gram = vec![S::zero(); d_i * d_i];
            for r in 0..d_i {
                for c in r..d_i {
                    let mut acc = S::zero();
                    for k in 0..a.rows() {
                        acc += a.get(k, r) * a.get(k, c);
                    }
                    gram[r * d_i + c] = acc;
                    gram[c * d_i + r] = acc;
                }
            }
            let mut m = gram.clone();
            for (idx, v) in m.iter_mut().enumerate() {
                *v = *v * rho;
                if idx % (d_i + 1) == 0 {
                    *v += curvature;
                }
            }
            cholesky(&mut m, d_i).map_err(|_| {
                Error::Degenerate(format!(
                    "client {i} subproblem matrix is not positive definite; \
                     a rank-deficient block needs a ridge term"
                ))
            })?;
            factors.push(m);
            dims.push(d_i);
            grams.push(DenseMatrix::new(d_i, d_i, gram)?);
        }
        Ok(Self {
            factors,
            dims,
            grams,
            curvature,
            block_lmax: pr.spectral().per_block.clone(),
            rho,
        })
    }
}

/// One alternating-direction sweep: all clients solve their regularized
/// least-squares subproblems in parallel against the round-start images of
/// the others, then the consensus and multiplier close the round in closed
/// form.
pub(super) fn alternating_direction<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    work: &AdmmWork<S>,
    generic: bool,
    tol: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let rho = work.rho;
    let mut ax_blocks = Vec::with_capacity(n);
    for i in 0..n {
        ax_blocks.push(pr.dataset.blocks[i].matvec(&st.x_blocks[i])?);
    }
    let mut s_sum = sum_vectors(s, &ax_blocks);

    // The x-phase sweeps the clients in order, each minimizing against the
    // freshest contributions of the others; updating against stale ones can
    // oscillate when the blocks are strongly coupled.
    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let s_minus = s_sum.sub(&ax_blocks[i]);
        let target = st.z.sub(&s_minus).scale(rho).sub(&st.y);
        let rhs = pr.dataset.blocks[i].matvec_t(&target)?;
        let xi = if generic {
            quadratic_argmin(work, i, &rhs, tol)?
        } else {
            cholesky_solve(&work.factors[i], work.dims[i], &rhs)
        };
        let axi = pr.dataset.blocks[i].matvec(&xi)?;
        s_sum = s_minus.add(&axi);
        ax_blocks[i] = axi;
        new_x.push(xi);
    }
    let s_new = s_sum;
    let denom = S::one() / (S::one() + rho);
    let new_z = pr.loss.b.add(&st.y).add_scaled(rho, &s_new).scale(denom);
    let new_y = st.y.add_scaled(rho, &s_new.sub(&new_z));

    st.record_half(&new_x, &new_z, &new_y);
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.k += 1;
    led.charge_up(n * s);
    led.charge_down(3 * s);
    let solve_cost: usize = work.dims.iter().map(|&d_i| d_i * d_i).sum();
    led.charge_flops(2 * s * pr.dataset.total_features() + solve_cost);
    Ok(())
}

/// Minimizes `½xᵀ(cI + ρG)x − rhsᵀx` by momentum gradient iterations,
/// stopping when the gradient norm falls under `tol`.
fn quadratic_argmin<S: Real>(
    work: &AdmmWork<S>,
    i: usize,
    rhs: &Vector<S>,
    tol: S,
) -> Result<Vector<S>> {
    let d_i = work.dims[i];
    let l = work.curvature + work.rho * work.block_lmax[i];
    let mu = work.curvature;
    let momentum = if mu > S::zero() {
        (l.sqrt() - mu.sqrt()) / (l.sqrt() + mu.sqrt())
    } else {
        S::zero()
    };
    let step = S::one() / l;
    let grad = |v: &Vector<S>| -> Result<Vector<S>> {
        Ok(work.grams[i].matvec(v)?.scale(work.rho).add_scaled(work.curvature, v).sub(rhs))
    };
    let mut x = Vector::zeros(d_i);
    let mut look = x.clone();
    for _ in 0..SUBSOLVER_CAP {
        let g = grad(&look)?;
        let next = look.sub_scaled(step, &g);
        look = next.add_scaled(momentum, &next.sub(&x));
        x = next;
        if grad(&x)?.norm() <= tol {
            break;
        }
    }
    Ok(x)
}

/// Ascent on the negated dual of the ridge problem: the multiplier moves
/// against `y + b + AAᵀy/(2λ)` and the primal blocks are recovered from the
/// new multiplier through `x_i = −A_iᵀy/(2λ)`.
pub(super) fn dual_ascent<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let c = S::of(2.0) * pr.reg.lambda;
    let inv_c = S::one() / c;
    let mut pull = Vector::zeros(s);
    for i in 0..n {
        let aty = pr.dataset.blocks[i].matvec_t(&st.y)?;
        pull.add_assign_vec(&pr.dataset.blocks[i].matvec(&aty.scale(-inv_c))?);
    }
    let new_y = st.y.sub_scaled(gamma, &st.y.add(&pr.loss.b).sub(&pull));
    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        new_x.push(pr.dataset.blocks[i].matvec_t(&new_y)?.scale(-inv_c));
    }
    st.record_half(&new_x, &Vector::zeros(0), &new_y);
    st.x_blocks = new_x;
    st.y = new_y;
    st.k += 1;
    led.charge_up(n * s);
    led.charge_down(s);
    led.charge_flops(3 * s * pr.dataset.total_features());
    Ok(())
}

/// The concave dual objective of the ridge problem at `y`:
/// `−½‖y‖² − ⟨b, y⟩ − Σ_i ‖A_iᵀy‖²/(4λ)`. Ascent methods must increase it
/// monotonically.
pub fn ridge_dual_value<S: Real>(pr: &ProblemSpec<S>, y: &Vector<S>) -> Result<S> {
    if pr.reg.kind != RegKind::Ridge || !(pr.reg.lambda > S::zero()) {
        return Err(Error::Degenerate(
            "the dual value needs a strictly positive ridge weight".into(),
        ));
    }
    let c = S::of(2.0) * pr.reg.lambda;
    let mut quad = S::zero();
    for block in &pr.dataset.blocks {
        quad += block.matvec_t(y)?.norm_sq();
    }
    Ok(-pr.loss.conjugate_eval(y)? - quad / (S::of(2.0) * c))
}
