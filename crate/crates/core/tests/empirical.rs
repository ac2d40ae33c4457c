//! Pre-registered empirical checks and protocol identities for the solver
//! family, on top of the acceptance gate: compressed-run convergence,
//! estimator identities, per-variant convergence targets, and ledger
//! monotonicity.

mod support;

use rand::Rng;
use vfl_saddle::comm::{
    rng_stream, Compressor, CompressorKind, Lane, NoiseSpec, Party, RngMode,
};
use vfl_saddle::dataio::{partition_vertical, synth_regression, synth_regression_full};
use vfl_saddle::linalg::Vector;
use vfl_saddle::metrics::{f_rel_subopt, solve_ridge_oracle, OracleSolution};
use vfl_saddle::problem::{ProblemSpec, RegSpec};
use vfl_saddle::solvers::{Solver, SolverConfig, Variant};

type Problem = ProblemSpec<f64>;
type Oracle = OracleSolution<f64>;

fn ridge_instance(
    s: usize,
    d: usize,
    n: usize,
    cond: f64,
    lambda_frac: f64,
    seed: u64,
) -> (Problem, Oracle) {
    let (a, b) = synth_regression::<f64>(s, d, cond, 0.05, seed).unwrap();
    let ds = partition_vertical(&a, &b, n, seed, false).unwrap();
    let probe = ProblemSpec::new(ds.clone(), RegSpec::none()).unwrap();
    let lambda = probe.lambda_max_raw() * lambda_frac;
    let pr = ProblemSpec::new(ds, RegSpec::ridge(lambda).unwrap()).unwrap();
    let oracle = solve_ridge_oracle(&pr).unwrap();
    (pr, oracle)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

fn x_error(pr: &Problem, oracle: &Oracle, solver: &Solver<'_, f64>) -> f64 {
    let stars = pr.dataset.split_coefficients(&oracle.x_star).unwrap();
    let (xs, _, _) = solver.original_iterates().unwrap();
    support::blocks_relative_error(&xs, &stars)
}

fn run_until_x_error(
    pr: &Problem,
    oracle: &Oracle,
    cfg: SolverConfig<f64>,
    cap: usize,
    target: f64,
) -> (f64, usize) {
    let mut solver = Solver::new(pr, cfg).unwrap();
    let mut err = f64::INFINITY;
    for k in 1..=cap {
        solver.step().unwrap();
        if k % 50 == 0 || k == cap {
            err = x_error(pr, oracle, &solver);
            if err <= target {
                return (err, k);
            }
        }
    }
    (err, cap)
}

#[test]
fn topk_error_feedback_converges() {
    let (pr, oracle) = ridge_instance(60, 24, 4, 50.0, 0.02, 9);
    let mut finals = Vec::new();
    for seed in 1..=5u64 {
        let mut cfg = SolverConfig::<f64>::new(Variant::EgCompressBiased);
        cfg.compressor =
            Compressor::new(CompressorKind::TopK, 0.25, RngMode::SharedSeed).unwrap();
        cfg.p = 0.05;
        cfg.master_seed = seed;
        let mut solver = Solver::new(&pr, cfg).unwrap();
        for _ in 0..10_000 {
            solver.step().unwrap();
        }
        let (xs, _, _) = solver.original_iterates().unwrap();
        finals.push(f_rel_subopt(&pr, &oracle, &xs).unwrap());
    }
    let med = median(finals);
    assert!(med < 1e-3, "median suboptimality after 10000 rounds is {med:.2e}");
}

#[test]
fn randk_anchored_run_converges_when_refreshes_match_the_keep_fraction() {
    let (pr, oracle) = ridge_instance(60, 24, 4, 50.0, 0.02, 9);
    let mut finals = Vec::new();
    for seed in 1..=5u64 {
        let mut cfg = SolverConfig::<f64>::new(Variant::EgCompressUnbiased);
        cfg.compressor =
            Compressor::new(CompressorKind::RandK, 0.25, RngMode::SharedSeed).unwrap();
        cfg.p = 0.25;
        cfg.master_seed = seed;
        let mut solver = Solver::new(&pr, cfg).unwrap();
        for _ in 0..10_000 {
            solver.step().unwrap();
        }
        let (xs, _, _) = solver.original_iterates().unwrap();
        finals.push(f_rel_subopt(&pr, &oracle, &xs).unwrap());
    }
    let med = median(finals);
    assert!(med < 1e-3, "median suboptimality after 10000 rounds is {med:.2e}");
}

#[test]
fn partial_estimator_is_unbiased_by_enumeration() {
    let (pr, _) = ridge_instance(30, 12, 3, 10.0, 0.05, 4);
    let n = pr.dataset.n_clients();
    let mut rng = rng_stream(17, Party::Shared, 0, Lane::Data);
    let xs: Vec<Vector<f64>> = pr
        .dataset
        .feature_counts
        .iter()
        .map(|&w| Vector::new((0..w).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let ws: Vec<Vector<f64>> = pr
        .dataset
        .feature_counts
        .iter()
        .map(|&w| Vector::new((0..w).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap())
        .collect();
    let applied: Vec<Vector<f64>> =
        (0..n).map(|i| pr.dataset.blocks[i].matvec(&xs[i]).unwrap()).collect();
    let anchored: Vec<Vector<f64>> =
        (0..n).map(|i| pr.dataset.blocks[i].matvec(&ws[i]).unwrap()).collect();
    let mut aw_sum = Vector::zeros(30);
    for a in &anchored {
        aw_sum.add_assign_vec(a);
    }
    let mut exact = Vector::zeros(30);
    for a in &applied {
        exact.add_assign_vec(a);
    }
    let mut mean = Vector::zeros(30);
    for i in 0..n {
        let estimate = aw_sum.add_scaled(n as f64, &applied[i].sub(&anchored[i]));
        mean.add_assign_vec(&estimate);
    }
    mean = mean.scale(1.0 / n as f64);
    assert!(
        mean.sub(&exact).norm_inf() <= 1e-12,
        "enumerated estimator mean misses the exact sum by {:.2e}",
        mean.sub(&exact).norm_inf()
    );
}

#[test]
fn coordinate_sketch_enumeration_recovers_the_vector() {
    let v = {
        let mut rng = rng_stream(18, Party::Shared, 0, Lane::Data);
        Vector::new((0..7).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>()).unwrap()
    };
    let s = v.len();
    let mut mean = Vector::zeros(s);
    for c in 0..s {
        let mut sketch = Vector::zeros(s);
        sketch[c] = s as f64 * v[c];
        mean.add_assign_vec(&sketch);
    }
    mean = mean.scale(1.0 / s as f64);
    assert_eq!(mean.as_slice(), v.as_slice());
}

#[test]
fn blockwise_consensus_blocks_converge() {
    let (pr, _) = ridge_instance(40, 16, 4, 50.0, 0.02, 3);
    let mut solver = Solver::new(&pr, SolverConfig::new(Variant::EgBlockwise)).unwrap();
    for _ in 0..20_000 {
        solver.step().unwrap();
    }
    let st = solver.state();
    for i in 0..pr.dataset.n_clients() {
        let axi = pr.dataset.blocks[i].matvec(&st.x_blocks[i]).unwrap();
        let gap = axi.sub(&st.z_blocks[i]).norm();
        assert!(gap < 1e-6, "block {i} consensus residual is {gap:.2e}");
    }
}

#[test]
fn augmented_penalty_matches_the_oracle() {
    let (pr, oracle) = ridge_instance(40, 16, 4, 50.0, 0.02, 3);
    let mut cfg = SolverConfig::<f64>::new(Variant::EgAugmented);
    cfg.rho = Some(1.0 / pr.lambda_max_raw().sqrt());
    let (err, _) = run_until_x_error(&pr, &oracle, cfg, 30_000, 1e-6);
    assert!(err <= 1e-6, "augmented run stopped at relative error {err:.2e}");
}

#[test]
fn dual_extragradient_matches_the_oracle() {
    let (pr, oracle) = ridge_instance(40, 16, 4, 50.0, 0.02, 3);
    let cfg = SolverConfig::<f64>::new(Variant::EgDual);
    let (err, _) = run_until_x_error(&pr, &oracle, cfg, 30_000, 1e-6);
    assert!(err <= 1e-6, "dual extragradient stopped at relative error {err:.2e}");
}

#[test]
fn dual_ascent_recovery_matches_the_oracle() {
    let (pr, oracle) = ridge_instance(40, 16, 4, 50.0, 0.02, 3);
    let cfg = SolverConfig::<f64>::new(Variant::DualGd);
    let (err, _) = run_until_x_error(&pr, &oracle, cfg, 30_000, 1e-6);
    assert!(err <= 1e-6, "dual ascent stopped at relative error {err:.2e}");
}

#[test]
fn momentum_reaches_the_threshold_before_plain_descent_on_the_hard_instance() {
    let (pr, oracle) = ridge_instance(200, 50, 5, 1e3, 1e-3, 1);
    let rounds_to = |variant: Variant| {
        let mut solver = Solver::new(&pr, SolverConfig::new(variant)).unwrap();
        for k in 1..=30_000usize {
            solver.step().unwrap();
            let (xs, _, _) = solver.original_iterates().unwrap();
            if f_rel_subopt(&pr, &oracle, &xs).unwrap() <= 1e-6 {
                return k;
            }
        }
        usize::MAX
    };
    let accelerated = rounds_to(Variant::Nesterov);
    let plain = rounds_to(Variant::Gd);
    assert!(
        accelerated < plain,
        "momentum took {accelerated} rounds, plain descent {plain}"
    );
}

#[test]
fn adaptive_gains_absorb_a_scaled_model() {
    let inst = synth_regression_full::<f64>(30, 12, 10.0, 0.0, 6).unwrap();
    let doubled = inst.a.matvec(&inst.x_true).unwrap().scale(2.0);
    let ds = partition_vertical(&inst.a, &doubled, 3, 6, false).unwrap();
    let pr = ProblemSpec::new(ds, RegSpec::none()).unwrap();
    let mut solver = Solver::new(&pr, SolverConfig::new(Variant::EgNonconvex)).unwrap();
    let mut residual = f64::INFINITY;
    for k in 1..=40_000 {
        solver.step().unwrap();
        if k % 100 == 0 {
            let st = solver.state();
            let mut mix = Vector::zeros(30);
            for i in 0..3 {
                let axi = pr.dataset.blocks[i].matvec(&st.x_blocks[i]).unwrap();
                mix.add_assign_vec(&axi.scale(st.gains[i]));
            }
            residual = mix.sub(&st.z).norm();
            if residual < 1e-4 {
                break;
            }
        }
    }
    assert!(residual < 1e-4, "gain-model residual is {residual:.2e}");
    let gains = &solver.state().gains;
    assert!(
        gains.iter().any(|&g| g > 1.1),
        "gains stayed near 1 ({gains:?}) instead of absorbing the scale"
    );
}

#[test]
fn plain_solver_hits_the_published_budget() {
    let (pr, oracle) = ridge_instance(200, 50, 5, 1e3, 1e-3, 1);
    let mut solver = Solver::new(&pr, SolverConfig::new(Variant::EgBasic)).unwrap();
    for k in 1..=50_000usize {
        solver.step().unwrap();
        if k % 50 == 0 {
            let (xs, _, _) = solver.original_iterates().unwrap();
            if f_rel_subopt(&pr, &oracle, &xs).unwrap() <= 1e-6 {
                return;
            }
        }
    }
    panic!("plain extragradient missed 1e-6 relative suboptimality in 50000 rounds");
}

#[test]
fn deterministic_solvers_agree_pairwise() {
    let (pr, oracle) = ridge_instance(200, 50, 5, 1e3, 1e-3, 1);
    let plan: &[(Variant, usize)] = &[
        (Variant::EgBasic, 20_000),
        (Variant::EgProx, 16_000),
        (Variant::EgBlockwise, 110_000),
        (Variant::EgAugmented, 40_000),
        (Variant::EgDual, 20_000),
        (Variant::DualGd, 10_000),
        (Variant::Gd, 10_000),
        (Variant::Nesterov, 1_200),
        (Variant::Admm, 1_200),
    ];
    let mut finals: Vec<(Variant, Vec<Vector<f64>>)> = Vec::new();
    for &(variant, cap) in plan {
        let mut cfg = SolverConfig::new(variant);
        if variant == Variant::EgAugmented {
            cfg.rho = Some(1.0 / pr.lambda_max_raw().sqrt());
        }
        let mut solver = Solver::new(&pr, cfg).unwrap();
        for k in 1..=cap {
            solver.step().unwrap();
            if k % 50 == 0 && x_error(&pr, &oracle, &solver) <= 5e-6 {
                break;
            }
        }
        let err = x_error(&pr, &oracle, &solver);
        assert!(err <= 5e-6, "{} stopped at {err:.2e}", variant.label());
        finals.push((variant, solver.original_iterates().unwrap().0));
    }
    let scale = oracle.x_star.norm();
    for i in 0..finals.len() {
        for j in i + 1..finals.len() {
            let mut dist = 0.0;
            for (u, v) in finals[i].1.iter().zip(&finals[j].1) {
                dist += u.sub(v).norm_sq();
            }
            let dist = dist.sqrt() / scale;
            assert!(
                dist <= 1e-5,
                "{} and {} disagree by {dist:.2e}",
                finals[i].0.label(),
                finals[j].0.label()
            );
        }
    }
}

#[test]
fn injected_noise_has_the_advertised_variance() {
    let sigma = 0.1;
    let noise = NoiseSpec::new(sigma).unwrap();
    let zero = Vector::<f64>::zeros(50);
    let mut sum_sq = 0.0;
    let mut calls = 0usize;
    for round in 0..1000u64 {
        let mut down = rng_stream(1, Party::Shared, round, Lane::NoiseDown);
        for _ in 0..2 {
            sum_sq += noise.add_noise(&zero, &mut down).norm_sq();
            calls += 1;
        }
        for client in 0..5u64 {
            let mut up = rng_stream(1, Party::Client(client), round, Lane::NoiseUp);
            for _ in 0..2 {
                sum_sq += noise.add_noise(&zero, &mut up).norm_sq();
                calls += 1;
            }
        }
    }
    let per_call = sum_sq / calls as f64;
    let ratio = per_call / (sigma * sigma);
    assert!(
        (ratio - 1.0).abs() <= 0.05,
        "mean perturbation energy is {ratio:.3} of sigma^2 over {calls} calls"
    );
}

#[test]
fn coordinate_sketch_flops_follow_the_protocol_expectation() {
    let (pr, _) = ridge_instance(100, 40, 5, 50.0, 0.01, 2);
    let rounds = 1000usize;
    let p = 0.1;
    let mut cfg = SolverConfig::<f64>::new(Variant::EgCoord);
    cfg.p = p;
    let mut solver = Solver::new(&pr, cfg).unwrap();
    for _ in 0..rounds {
        solver.step().unwrap();
    }
    let per_round = solver.ledger().flops as f64 / rounds as f64;
    let (s, d, n) = (100.0, 40.0, 5.0);
    let expected = (d + n * s) + p * (2.0 * s * d);
    let deviation = (per_round - expected).abs() / expected;
    assert!(
        deviation <= 0.15,
        "sketch rounds average {per_round:.0} flops, protocol expectation {expected:.0}"
    );
}

#[test]
fn ledgers_never_decrease() {
    let (pr, _) = ridge_instance(30, 12, 3, 10.0, 0.05, 4);
    for variant in Variant::ALL {
        let mut cfg = SolverConfig::<f64>::new(variant);
        cfg.p = 0.5;
        if matches!(variant, Variant::EgCompressUnbiased) {
            cfg.compressor =
                Compressor::new(CompressorKind::RandK, 0.5, RngMode::SharedSeed).unwrap();
        }
        if matches!(variant, Variant::EgCompressBiased) {
            cfg.compressor =
                Compressor::new(CompressorKind::TopK, 0.5, RngMode::SharedSeed).unwrap();
        }
        if variant == Variant::EgAugmented {
            cfg.rho = Some(0.5);
        }
        let mut solver = Solver::new(&pr, cfg).unwrap();
        let mut last = (0u64, 0u64, 0u64, 0u64);
        for _ in 0..10 {
            solver.step().unwrap();
            let led = solver.ledger();
            let now = (led.scalars_up, led.scalars_down, led.flops, led.full_sync_rounds);
            assert!(
                now.0 >= last.0 && now.1 >= last.1 && now.2 >= last.2 && now.3 >= last.3,
                "{} decremented a ledger counter",
                variant.label()
            );
            last = now;
        }
    }
}
