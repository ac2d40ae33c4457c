//! The deterministic extragradient steps: the plain two-phase update, its
//! proximal and per-block forms, the penalty-augmented and dual forms, the
//! noise-perturbed and encrypted channels, and the adaptive-gain extension.
//!
//! Every variant goes through the same elementwise helpers, so a variant
//! whose extra terms vanish retraces the plain update operation for
//! operation.

use crate::comm::{rng_stream, EncryptionScheme, Lane, NoiseSpec, Party, TrafficLedger};
use crate::error::Result;
use crate::linalg::Vector;
use crate::problem::ProblemSpec;
use crate::scalar::Real;
use rand_chacha::ChaCha8Rng;

use super::state::IterateState;

/// `Σ_i v_i` accumulated in client order from a zero vector.
pub(super) fn sum_vectors<S: Real>(len: usize, vs: &[Vector<S>]) -> Vector<S> {
    let mut out = Vector::zeros(len);
    for v in vs {
        out.add_assign_vec(v);
    }
    out
}

/// Per-client images `β·A_i x_i` in client order.
pub(super) fn applied_blocks<S: Real>(
    pr: &ProblemSpec<S>,
    xs: &[Vector<S>],
) -> Result<Vec<Vector<S>>> {
    xs.iter().enumerate().map(|(i, x)| pr.apply_block(i, x)).collect()
}

/// `x − γ·(aty + ∇r [+ ρ·pull])`.
pub(super) fn primal_step<S: Real>(
    x: &Vector<S>,
    gamma: S,
    aty: &Vector<S>,
    reg_grad: &Vector<S>,
    aug: Option<(S, &Vector<S>)>,
) -> Vector<S> {
    let mut dir = aty.add(reg_grad);
    if let Some((rho, pull)) = aug {
        dir = dir.add_scaled(rho, pull);
    }
    x.sub_scaled(gamma, &dir)
}

/// `z − γ·(∇ℓ − y [+ ρ·pull])`.
pub(super) fn consensus_step<S: Real>(
    z: &Vector<S>,
    gamma: S,
    grad: &Vector<S>,
    y: &Vector<S>,
    aug: Option<(S, &Vector<S>)>,
) -> Vector<S> {
    let mut dir = grad.sub(y);
    if let Some((rho, pull)) = aug {
        dir = dir.add_scaled(rho, pull);
    }
    z.sub_scaled(gamma, &dir)
}

/// `y + γ·(applied − z)`.
pub(super) fn multiplier_step<S: Real>(
    y: &Vector<S>,
    gamma: S,
    applied: &Vector<S>,
    z: &Vector<S>,
) -> Vector<S> {
    y.add_scaled(gamma, &applied.sub(z))
}

pub(super) fn basic<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    eg_plain(pr, st, gamma, None, led)
}

pub(super) fn noisy<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    noise: &NoiseSpec,
    seed: u64,
    led: &mut TrafficLedger,
) -> Result<()> {
    eg_plain(pr, st, gamma, Some((noise, seed)), led)
}

/// The two-phase update, with optional zero-mean perturbations on every
/// transmitted vector: the broadcast multiplier picks up one shared draw,
/// each uploaded image its own, once per phase. Local consensus updates see
/// clean values.
fn eg_plain<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    noise: Option<(&NoiseSpec, u64)>,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let round = st.k;
    let spec = noise.map(|(sp, _)| sp);
    let mut rng_down =
        noise.map(|(_, seed)| rng_stream(seed, Party::Shared, round, Lane::NoiseDown));
    let mut rng_up: Vec<ChaCha8Rng> = match noise {
        Some((_, seed)) => (0..n)
            .map(|i| rng_stream(seed, Party::Client(i as u64), round, Lane::NoiseUp))
            .collect(),
        None => Vec::new(),
    };

    let y_seen = perturbed(&st.y, spec, rng_down.as_mut());
    let mut half_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &y_seen)?;
        let rg = pr.reg.grad(&st.x_blocks[i])?;
        half_x.push(primal_step(&st.x_blocks[i], gamma, &aty, &rg, None));
    }
    let lg = pr.loss_grad_eff(&st.z)?;
    let half_z = consensus_step(&st.z, gamma, &lg, &st.y, None);
    let mut ax_sum = Vector::zeros(s);
    for i in 0..n {
        let ax = pr.apply_block(i, &st.x_blocks[i])?;
        ax_sum.add_assign_vec(&perturbed(&ax, spec, rng_up.get_mut(i)));
    }
    let half_y = multiplier_step(&st.y, gamma, &ax_sum, &st.z);

    let y_seen_h = perturbed(&half_y, spec, rng_down.as_mut());
    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &y_seen_h)?;
        let rg = pr.reg.grad(&half_x[i])?;
        new_x.push(primal_step(&st.x_blocks[i], gamma, &aty, &rg, None));
    }
    let lg_h = pr.loss_grad_eff(&half_z)?;
    let new_z = consensus_step(&st.z, gamma, &lg_h, &half_y, None);
    let mut axh_sum = Vector::zeros(s);
    for i in 0..n {
        let ax = pr.apply_block(i, &half_x[i])?;
        axh_sum.add_assign_vec(&perturbed(&ax, spec, rng_up.get_mut(i)));
    }
    let new_y = multiplier_step(&st.y, gamma, &axh_sum, &half_z);

    st.record_half(&half_x, &half_z, &half_y);
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.k += 1;
    led.charge_up(2 * n * s);
    led.charge_down(2 * s);
    led.charge_flops(4 * s * pr.dataset.total_features());
    Ok(())
}

fn perturbed<S: Real>(
    v: &Vector<S>,
    spec: Option<&NoiseSpec>,
    rng: Option<&mut ChaCha8Rng>,
) -> Vector<S> {
    match (spec, rng) {
        (Some(sp), Some(r)) => sp.add_noise(v, r),
        _ => v.clone(),
    }
}

/// Two-phase update with the gradient contractions replaced by proximal
/// maps, so non-smooth regularizers are admissible. A zero step makes every
/// map the identity, so the prox calls are skipped.
pub(super) fn proximal<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let use_prox = gamma > S::zero();

    let mut half_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &st.y)?;
        let arg = st.x_blocks[i].sub_scaled(gamma, &aty);
        half_x.push(if use_prox { pr.reg.prox(&arg, gamma)? } else { arg });
    }
    let half_z = if use_prox {
        pr.loss_prox_eff(&st.z.add_scaled(gamma, &st.y), gamma)?
    } else {
        st.z.clone()
    };
    let ax_sum = sum_vectors(s, &applied_blocks(pr, &st.x_blocks)?);
    let half_y = multiplier_step(&st.y, gamma, &ax_sum, &st.z);

    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &half_y)?;
        let arg = st.x_blocks[i].sub_scaled(gamma, &aty);
        new_x.push(if use_prox { pr.reg.prox(&arg, gamma)? } else { arg });
    }
    let new_z = if use_prox {
        pr.loss_prox_eff(&st.z.add_scaled(gamma, &half_y), gamma)?
    } else {
        st.z.clone()
    };
    let axh_sum = sum_vectors(s, &applied_blocks(pr, &half_x)?);
    let new_y = multiplier_step(&st.y, gamma, &axh_sum, &half_z);

    st.record_half(&half_x, &half_z, &half_y);
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.k += 1;
    led.charge_up(2 * n * s);
    led.charge_down(2 * s);
    led.charge_flops(4 * s * pr.dataset.total_features());
    Ok(())
}

/// Two-phase update where every exchanged vector crosses the wire encoded;
/// the first device decodes the linear images and runs the plain update on
/// them. Linear maps commute with the encodings, so the trajectory matches
/// the plain one.
pub(super) fn encrypted<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    scheme: &EncryptionScheme<S>,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let d = pr.dataset.total_features();

    let (atys, ax_sum) = exchange_encoded(pr, scheme, &st.y, &st.x_blocks)?;
    let mut half_x = Vec::with_capacity(n);
    for i in 0..n {
        let rg = pr.reg.grad(&st.x_blocks[i])?;
        half_x.push(primal_step(&st.x_blocks[i], gamma, &atys[i], &rg, None));
    }
    let lg = pr.loss_grad_eff(&st.z)?;
    let half_z = consensus_step(&st.z, gamma, &lg, &st.y, None);
    let half_y = multiplier_step(&st.y, gamma, &ax_sum, &st.z);

    let (atys_h, axh_sum) = exchange_encoded(pr, scheme, &half_y, &half_x)?;
    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let rg = pr.reg.grad(&half_x[i])?;
        new_x.push(primal_step(&st.x_blocks[i], gamma, &atys_h[i], &rg, None));
    }
    let lg_h = pr.loss_grad_eff(&half_z)?;
    let new_z = consensus_step(&st.z, gamma, &lg_h, &half_y, None);
    let new_y = multiplier_step(&st.y, gamma, &axh_sum, &half_z);

    st.record_half(&half_x, &half_z, &half_y);
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.k += 1;
    led.charge_up(2 * (d + n * s));
    led.charge_down(2 * (s + d));
    led.charge_flops(4 * s * d);
    Ok(())
}

/// One round trip: encode the multiplier and primal blocks, let each client
/// apply its operator to the encodings, decode the results.
fn exchange_encoded<S: Real>(
    pr: &ProblemSpec<S>,
    scheme: &EncryptionScheme<S>,
    y: &Vector<S>,
    xs: &[Vector<S>],
) -> Result<(Vec<Vector<S>>, Vector<S>)> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let enc_y = scheme.encrypt(y);
    let mut atys = Vec::with_capacity(n);
    let mut ax_sum = Vector::zeros(s);
    for i in 0..n {
        let enc_x = scheme.encrypt(&xs[i]);
        atys.push(scheme.decrypt(&pr.adjoint_block(i, &enc_y)?));
        ax_sum.add_assign_vec(&scheme.decrypt(&pr.apply_block(i, &enc_x)?));
    }
    Ok((atys, ax_sum))
}

/// Two-phase update on the per-client splitting: every client carries its
/// own consensus slice and multiplier, coupled only through the loss
/// gradient taken at the slice sum.
pub(super) fn per_block<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;

    let zsum = sum_vectors(s, &st.z_blocks);
    let g = pr.loss_grad_eff(&zsum)?;
    let mut half_x = Vec::with_capacity(n);
    let mut half_zb = Vec::with_capacity(n);
    let mut half_yb = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &st.y_blocks[i])?;
        let rg = pr.reg.grad(&st.x_blocks[i])?;
        half_x.push(primal_step(&st.x_blocks[i], gamma, &aty, &rg, None));
        half_zb.push(consensus_step(&st.z_blocks[i], gamma, &g, &st.y_blocks[i], None));
        let ax = pr.apply_block(i, &st.x_blocks[i])?;
        half_yb.push(multiplier_step(&st.y_blocks[i], gamma, &ax, &st.z_blocks[i]));
    }

    let zsum_h = sum_vectors(s, &half_zb);
    let g_h = pr.loss_grad_eff(&zsum_h)?;
    let mut new_x = Vec::with_capacity(n);
    let mut new_zb = Vec::with_capacity(n);
    let mut new_yb = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &half_yb[i])?;
        let rg = pr.reg.grad(&half_x[i])?;
        new_x.push(primal_step(&st.x_blocks[i], gamma, &aty, &rg, None));
        new_zb.push(consensus_step(&st.z_blocks[i], gamma, &g_h, &half_yb[i], None));
        let ax = pr.apply_block(i, &half_x[i])?;
        new_yb.push(multiplier_step(&st.y_blocks[i], gamma, &ax, &half_zb[i]));
    }

    st.record_half_blocks(&half_x, &half_zb, &half_yb);
    st.x_blocks = new_x;
    st.z_blocks = new_zb;
    st.y_blocks = new_yb;
    st.k += 1;
    led.charge_up(2 * n * s);
    led.charge_down(2 * n * s);
    led.charge_flops(4 * s * pr.dataset.total_features());
    Ok(())
}

/// Two-phase update with a quadratic penalty `ρ` pulling toward the
/// constraint manifold. Both phases of the primal and consensus updates
/// reuse the residual evaluated at the round start; the multiplier update
/// carries no penalty term. `ρ = 0` drops the extra terms entirely.
pub(super) fn augmented<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    rho: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;
    let d = pr.dataset.total_features();
    let aug_on = rho > S::zero();

    let ax_blocks = applied_blocks(pr, &st.x_blocks)?;
    let ax_sum = sum_vectors(s, &ax_blocks);
    let (at_res, neg_res) = if aug_on {
        let res = ax_sum.sub(&st.z);
        let mut at = Vec::with_capacity(n);
        for i in 0..n {
            at.push(pr.adjoint_block(i, &res)?);
        }
        (at, Some(st.z.sub(&ax_sum)))
    } else {
        (Vec::new(), None)
    };

    let mut half_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &st.y)?;
        let rg = pr.reg.grad(&st.x_blocks[i])?;
        let aug = aug_on.then(|| (rho, &at_res[i]));
        half_x.push(primal_step(&st.x_blocks[i], gamma, &aty, &rg, aug));
    }
    let lg = pr.loss_grad_eff(&st.z)?;
    let half_z = consensus_step(&st.z, gamma, &lg, &st.y, neg_res.as_ref().map(|v| (rho, v)));
    let half_y = multiplier_step(&st.y, gamma, &ax_sum, &st.z);

    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &half_y)?;
        let rg = pr.reg.grad(&half_x[i])?;
        let aug = aug_on.then(|| (rho, &at_res[i]));
        new_x.push(primal_step(&st.x_blocks[i], gamma, &aty, &rg, aug));
    }
    let lg_h = pr.loss_grad_eff(&half_z)?;
    let new_z = consensus_step(&st.z, gamma, &lg_h, &half_y, neg_res.as_ref().map(|v| (rho, v)));
    let axh_sum = sum_vectors(s, &applied_blocks(pr, &half_x)?);
    let new_y = multiplier_step(&st.y, gamma, &axh_sum, &half_z);

    st.record_half(&half_x, &half_z, &half_y);
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.k += 1;
    led.charge_up(2 * n * s);
    led.charge_down(if aug_on { 4 * s } else { 2 * s });
    led.charge_flops(if aug_on { 5 * s * d } else { 4 * s * d });
    Ok(())
}

/// Two-phase update on the formulation with the consensus lane eliminated:
/// the multiplier moves against the loss conjugate gradient minus the
/// applied sum, and no constraint remains.
pub(super) fn dual<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;

    let mut half_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &st.y)?;
        let rg = pr.reg.grad(&st.x_blocks[i])?;
        half_x.push(primal_step(&st.x_blocks[i], gamma, &aty, &rg, None));
    }
    let ax_sum = sum_vectors(s, &applied_blocks(pr, &st.x_blocks)?);
    let cg = pr.loss_conjugate_grad_eff(&st.y)?;
    let half_y = consensus_step(&st.y, gamma, &cg, &ax_sum, None);

    let mut new_x = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &half_y)?;
        let rg = pr.reg.grad(&half_x[i])?;
        new_x.push(primal_step(&st.x_blocks[i], gamma, &aty, &rg, None));
    }
    let axh_sum = sum_vectors(s, &applied_blocks(pr, &half_x)?);
    let cg_h = pr.loss_conjugate_grad_eff(&half_y)?;
    let new_y = consensus_step(&st.y, gamma, &cg_h, &axh_sum, None);

    st.record_half(&half_x, &Vector::zeros(0), &half_y);
    st.x_blocks = new_x;
    st.y = new_y;
    st.k += 1;
    led.charge_up(2 * n * s);
    led.charge_down(2 * s);
    led.charge_flops(4 * s * pr.dataset.total_features());
    Ok(())
}

/// Two-phase update on the bilinear model with a scalar gain per client
/// multiplying its operator. The gain lane takes plain ascent-descent
/// steps: its update always starts from the round-start gain, with the
/// gradient at the half point in the second phase.
pub(super) fn adaptive_gains<S: Real>(
    pr: &ProblemSpec<S>,
    st: &mut IterateState<S>,
    gamma: S,
    gain_gamma: S,
    led: &mut TrafficLedger,
) -> Result<()> {
    let n = pr.dataset.n_clients();
    let s = pr.dataset.sample_count;

    let ax_blocks = applied_blocks(pr, &st.x_blocks)?;
    let mut gx_sum = Vector::zeros(s);
    for i in 0..n {
        gx_sum.add_assign_vec(&ax_blocks[i].scale(st.gains[i]));
    }
    let mut half_x = Vec::with_capacity(n);
    let mut half_g = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &st.y)?;
        let rg = pr.reg.grad(&st.x_blocks[i])?;
        half_x.push(primal_step(&st.x_blocks[i], gamma, &aty.scale(st.gains[i]), &rg, None));
        half_g.push(st.gains[i] - gain_gamma * st.y.dot(&ax_blocks[i]));
    }
    let lg = pr.loss_grad_eff(&st.z)?;
    let half_z = consensus_step(&st.z, gamma, &lg, &st.y, None);
    let half_y = multiplier_step(&st.y, gamma, &gx_sum, &st.z);

    let axh_blocks = applied_blocks(pr, &half_x)?;
    let mut gxh_sum = Vector::zeros(s);
    for i in 0..n {
        gxh_sum.add_assign_vec(&axh_blocks[i].scale(half_g[i]));
    }
    let mut new_x = Vec::with_capacity(n);
    let mut new_g = Vec::with_capacity(n);
    for i in 0..n {
        let aty = pr.adjoint_block(i, &half_y)?;
        let rg = pr.reg.grad(&half_x[i])?;
        new_x.push(primal_step(&st.x_blocks[i], gamma, &aty.scale(half_g[i]), &rg, None));
        new_g.push(st.gains[i] - gain_gamma * half_y.dot(&axh_blocks[i]));
    }
    let lg_h = pr.loss_grad_eff(&half_z)?;
    let new_z = consensus_step(&st.z, gamma, &lg_h, &half_y, None);
    let new_y = multiplier_step(&st.y, gamma, &gxh_sum, &half_z);

    st.record_half(&half_x, &half_z, &half_y);
    st.x_blocks = new_x;
    st.z = new_z;
    st.y = new_y;
    st.gains = new_g;
    st.k += 1;
    led.charge_up(2 * n * s);
    led.charge_down(2 * s);
    led.charge_flops(4 * s * pr.dataset.total_features() + 2 * n * s);
    Ok(())
}
