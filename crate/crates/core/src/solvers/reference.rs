//! The anchored extragradient family: variants whose half steps read only
//! cached reference images, so each round moves little traffic, and whose
//! references refresh by a Bernoulli coin shared across the devices.
//!
//! All four variants share one half-step: mix the iterate with its
//! reference at weight `τ = 1 − p`, then step against the cached adjoint
//! (primal), the local loss gradient (consensus), and the cached image sum
//! (multiplier). They differ in how the second phase reconstructs the fresh
//! operator images from what crossed the wire.

use crate::comm::{feedback_update, rng_stream, Compressor, Lane, Party, TrafficLedger};
use crate::error::Result;
use crate::linalg::Vector;
use crate::problem::ProblemSpec;
use crate::scalar::Real;
use rand::Rng;

use super::extragradient::{consensus_step, sum_vectors};
use super::state::IterateState;

fn anchored_half<S: Real>(
    pr: &ProblemSpec<S>,
    st: &IterateState<S>,
    tau: S,
    gamma: S,
) -> Result<(Vec<Vector<S>>, Vector<S>, Vector<S>)> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let mut half_x = Vec::with_capacity(n);
    for i in 0..n {
        let rg = pr.reg.grad(&st.x_blocks[i])?;
        let dir = st.cached_atu[i].add(&rg);
        half_x.push(st.x_blocks[i].mix(tau, &st.w_blocks[i]).sub_scaled(gamma, &dir));
    }
    let lg = pr.loss_grad_eff(&st.z)?;
    let half_z = consensus_step(&st.z, gamma, &lg, &st.y, None);
    let aw_sum = sum_vectors(s, &st.cached_aw);
    let half_y = st.y.mix(tau, &st.u).add_scaled(gamma, &aw_sum.sub(&st.z));
    Ok((half_x, half_z, half_y))
}

/// Full synchronization: references jump to the round-start iterates and
/// both operator images are recomputed and exchanged uncompressed. Must run
/// before the round's new iterates are written back.
fn refresh_refs<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let d = pr.dataset.total_features();
    st.w_blocks = st.x_blocks.clone();
    st.u = st.y.clone();
    for i in 0..n {
        st.cached_aw[i] = pr.apply_block(i, &st.x_blocks[i])?;
        st.cached_atu[i] = pr.adjoint_block(i, &st.y)?;
    }
    led.charge_up(n * s);
    led.charge_down(s);
    led.charge_flops(2 * s * d);
    led.mark_full_sync();
    Ok(())
}

fn refresh_coin(seed: u64, round: u64, p: f64) -> bool {
    rng_stream(seed, Party::Shared, round, Lane::Coin).gen_bool(p)
}

/// Anchored round with compressed difference payloads: the first device
/// broadcasts the compressed multiplier shift, each client uploads its
/// compressed image shift, and both sides rebuild approximate images by
/// adding the references back. With `feedback` the payloads carry the
/// accumulated compression residuals, which absorb the bias of contractive
/// compressors; the residual lanes update every round and survive
/// refreshes.
#[allow(clippy::too_many_arguments)]
pub(super) fn compressed<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    p: f64,
    comp: &Compressor,
    feedback: bool,
    seed: u64,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let d = pr.dataset.total_features();
    let round = st.k;
    let coin = refresh_coin(seed, round, p);
    let tau = S::of(1.0 - p);
    let (half_x, half_z, half_y) = anchored_half(pr, st, tau, gamma)?;

    let diff_down = half_y.sub(&st.u);
    let mut rng_down = rng_stream(seed, Party::Shared, round, Lane::DownIndex);
    let (q_down, sent_down) = if feedback {
        let (q, resid, sent) =
            feedback_update(&diff_down.add(&st.errors.e), comp, &mut rng_down);
        st.errors.e = resid;
        (q, sent)
    } else {
        comp.compress(&diff_down, &mut rng_down)
    };
    led.charge_down(sent_down);
    let recon_y = q_down.add(&st.u);

    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &recon_y)?;
        let rg = pr.reg.grad(&half_x[i])?;
        new_x.push(st.x_blocks[i].mix(tau, &st.w_blocks[i]).sub_scaled(gamma, &aty.add(&rg)));
    }

    let mut recon_ax = Vector::zeros(s);
    for i in 0..n {
        let axh = pr.apply_block(i, &half_x[i])?;
        let diff_up = axh.sub(&st.cached_aw[i]);
        let mut rng_up = rng_stream(seed, Party::Client(i as u64), round, Lane::UpIndex);
        let (q_up, sent_up) = if feedback {
            let (q, resid, sent) =
                feedback_update(&diff_up.add(&st.errors.e_blocks[i]), comp, &mut rng_up);
            st.errors.e_blocks[i] = resid;
            (q, sent)
        } else {
            comp.compress(&diff_up, &mut rng_up)
        };
        led.charge_up(sent_up);
        recon_ax.add_assign_vec(&q_up.add(&st.cached_aw[i]));
    }
    let new_y = st.y.mix(tau, &st.u).add_scaled(gamma, &recon_ax.sub(&half_z));

    let lg_h = pr.loss_grad_eff(&half_z)?;
    let new_z = consensus_step(&st.z, gamma, &lg_h, &half_y, None);

    led.charge_flops(2 * s * d);
    st.record_half(&half_x, &half_z, &half_y);
    if coin {
        refresh_refs(pr, st, led)?;
    }
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.k += 1;
    Ok(())
}

/// Anchored round where the half multiplier goes out whole and only one
/// uniformly drawn client answers: its image shift, inflated by the client
/// count, stands in for the sum of all shifts. The primal updates use the
/// broadcast multiplier directly.
pub(super) fn partial_participation<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    p: f64,
    seed: u64,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let d = pr.dataset.total_features();
    let round = st.k;
    let coin = refresh_coin(seed, round, p);
    let tau = S::of(1.0 - p);
    let (half_x, half_z, half_y) = anchored_half(pr, st, tau, gamma)?;

    led.charge_down(s);
    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &half_y)?;
        let rg = pr.reg.grad(&half_x[i])?;
        new_x.push(st.x_blocks[i].mix(tau, &st.w_blocks[i]).sub_scaled(gamma, &aty.add(&rg)));
    }

    let pick = rng_stream(seed, Party::Shared, round, Lane::PartialPick).gen_range(0..n);
    let axh = pr.apply_block(pick, &half_x[pick])?;
    let diff = axh.sub(&st.cached_aw[pick]);
    led.charge_up(s);
    let aw_sum = sum_vectors(s, &st.cached_aw);
    let estimator = aw_sum.add_scaled(S::of_usize(n), &diff);
    let new_y = st.y.mix(tau, &st.u).add_scaled(gamma, &estimator.sub(&half_z));

    let lg_h = pr.loss_grad_eff(&half_z)?;
    let new_z = consensus_step(&st.z, gamma, &lg_h, &half_y, None);

    led.charge_flops(s * d + s * pr.dataset.feature_counts[pick]);
    st.record_half(&half_x, &half_z, &half_y);
    if coin {
        refresh_refs(pr, st, led)?;
    }
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.k += 1;
    Ok(())
}

/// Anchored round on scalar products only: each client uploads one
/// coordinate of its image shift (inflated by the sample count) and applies
/// one coordinate of the adjoint shift (inflated by its feature count), so
/// a round without a refresh costs two scalar products per client and no
/// matvec.
pub(super) fn coordinate_sketch<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    p: f64,
    seed: u64,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let round = st.k;
    let coin = refresh_coin(seed, round, p);
    let tau = S::of(1.0 - p);
    let beta = pr.beta;
    let (half_x, half_z, half_y) = anchored_half(pr, st, tau, gamma)?;

    led.charge_down(s);
    let mut recon_ax = Vector::zeros(s);
    for i in 0..n {
        let c = rng_stream(seed, Party::Client(i as u64), round, Lane::CoordUp).gen_range(0..s);
        let diff = half_x[i].sub(&st.w_blocks[i]);
        let val = beta * pr.dataset.blocks[i].row_dot(c, &diff);
        led.charge_up(1);
        led.charge_flops(pr.dataset.feature_counts[i]);
        let mut est = st.cached_aw[i].clone();
        est.as_mut_slice()[c] += S::of_usize(s) * val;
        recon_ax.add_assign_vec(&est);
    }
    let new_y = st.y.mix(tau, &st.u).add_scaled(gamma, &recon_ax.sub(&half_z));

    let y_diff = half_y.sub(&st.u);
    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let d_i = pr.dataset.feature_counts[i];
        let j = rng_stream(seed, Party::Client(i as u64), round, Lane::CoordDown).gen_range(0..d_i);
        let val = beta * pr.dataset.blocks[i].col_dot(j, &y_diff);
        led.charge_flops(s);
        let rg = pr.reg.grad(&half_x[i])?;
        let mut dir = st.cached_atu[i].add(&rg);
        dir.as_mut_slice()[j] += S::of_usize(d_i) * val;
        new_x.push(st.x_blocks[i].mix(tau, &st.w_blocks[i]).sub_scaled(gamma, &dir));
    }

    let lg_h = pr.loss_grad_eff(&half_z)?;
    let new_z = consensus_step(&st.z, gamma, &lg_h, &half_y, None);

    st.record_half(&half_x, &half_z, &half_y);
    if coin {
        refresh_refs(pr, st, led)?;
    }
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.k += 1;
    Ok(())
}
