//! `selftest`: runs the invariant suite on built-in instances. Each check
//! prints one `ok`/`FAILED` line; any failure makes the exit status nonzero.

use std::time::Instant;

use anyhow::Result;
use rand::Rng;
use vfl_saddle::comm::{
    rng_stream, Compressor, CompressorKind, Lane, NoiseSpec, Party, RngMode,
};
use vfl_saddle::dataio::{partition_vertical, synth_regression};
use vfl_saddle::linalg::Vector;
use vfl_saddle::metrics::{solve_ridge_oracle, OracleSolution};
use vfl_saddle::problem::{gamma_formula, ProblemSpec, RegSpec, StepVariant};
use vfl_saddle::solvers::{GammaChoice, Solver, SolverConfig, Variant};

type Problem = ProblemSpec<f64>;
type Oracle = OracleSolution<f64>;
type Check = std::result::Result<(), String>;

/// Rounds within which the plain solver must reach 1e-5 relative coefficient
/// error on the budget instance (pilot: 1900; the step rule damaged by a 10×
/// spectral fault needs 5925).
const BUDGET: usize = 3200;

fn instance(s: usize, d: usize, n: usize, cond: f64, frac: f64, seed: u64) -> (Problem, Oracle) {
    let (a, b) = synth_regression::<f64>(s, d, cond, 0.05, seed).expect("generator accepts this");
    let ds = partition_vertical(&a, &b, n, seed, false).expect("partition fits");
    let probe = ProblemSpec::new(ds.clone(), RegSpec::none()).expect("spectrum exists");
    let lambda = probe.lambda_max_raw() * frac;
    let pr = ProblemSpec::new(ds, RegSpec::ridge(lambda).expect("λ > 0")).expect("valid problem");
    let oracle = solve_ridge_oracle(&pr).expect("well-conditioned normal equations");
    (pr, oracle)
}

fn small() -> (Problem, Oracle) {
    instance(40, 16, 4, 50.0, 0.02, 3)
}

fn budget_instance() -> (Problem, Oracle) {
    instance(80, 24, 4, 100.0, 1e-3, 2)
}

fn probe_gamma(pr: &Problem) -> f64 {
    Solver::new(pr, SolverConfig::new(Variant::EgBasic)).expect("valid config").gamma()
}

fn stepped<'a>(pr: &'a Problem, cfg: SolverConfig<f64>, rounds: usize) -> Result<Solver<'a, f64>, String> {
    let mut solver = Solver::new(pr, cfg).map_err(|e| e.to_string())?;
    for _ in 0..rounds {
        solver.step().map_err(|e| e.to_string())?;
    }
    Ok(solver)
}

fn lanes_differ(a: &Solver<'_, f64>, b: &Solver<'_, f64>) -> Option<&'static str> {
    let (sa, sb) = (a.state(), b.state());
    for (xa, xb) in sa.x_blocks.iter().zip(&sb.x_blocks) {
        if xa.as_slice() != xb.as_slice() {
            return Some("x");
        }
    }
    if sa.z.as_slice() != sb.z.as_slice() {
        return Some("z");
    }
    if sa.y.as_slice() != sb.y.as_slice() {
        return Some("y");
    }
    None
}

fn check_reduction(
    pr: &Problem,
    build: impl FnOnce(f64) -> SolverConfig<f64>,
) -> Check {
    let gamma = probe_gamma(pr);
    let mut base = SolverConfig::new(Variant::EgBasic);
    base.gamma = GammaChoice::Fixed(gamma);
    let reference = stepped(pr, base, 25)?;
    let variant = stepped(pr, build(gamma), 25)?;
    match lanes_differ(&variant, &reference) {
        Some(lane) => Err(format!("{lane} lane deviates from the plain trajectory")),
        None => Ok(()),
    }
}

fn reduction_rho_zero(pr: &Problem) -> Check {
    check_reduction(pr, |g| {
        let mut cfg = SolverConfig::new(Variant::EgAugmented);
        cfg.gamma = GammaChoice::Fixed(g);
        cfg.rho = Some(0.0);
        cfg
    })
}

fn reduction_sigma_zero(pr: &Problem) -> Check {
    check_reduction(pr, |g| {
        let mut cfg = SolverConfig::new(Variant::EgNoise);
        cfg.gamma = GammaChoice::Fixed(g);
        cfg.noise = NoiseSpec::silent();
        cfg
    })
}

fn reduction_plaintext(pr: &Problem) -> Check {
    check_reduction(pr, |g| {
        let mut cfg = SolverConfig::new(Variant::EgEncrypted);
        cfg.gamma = GammaChoice::Fixed(g);
        cfg
    })
}

fn reduction_identity_compressor(pr: &Problem) -> Check {
    let gamma = probe_gamma(pr);
    let build = |variant| {
        let mut cfg = SolverConfig::<f64>::new(variant);
        cfg.gamma = GammaChoice::Fixed(gamma);
        cfg.p = 0.3;
        cfg.master_seed = 11;
        cfg
    };
    let unbiased = stepped(pr, build(Variant::EgCompressUnbiased), 25)?;
    let biased = stepped(pr, build(Variant::EgCompressBiased), 25)?;
    if let Some(lane) = lanes_differ(&biased, &unbiased) {
        return Err(format!("{lane} lane differs between the identity-compressed runs"));
    }
    let residue = biased.state().errors.max_abs();
    if residue != 0.0 {
        return Err(format!("feedback residuals reached {residue:e} under the identity map"));
    }
    Ok(())
}

fn reduction_single_client() -> Check {
    let (pr, _) = instance(40, 16, 1, 50.0, 0.02, 3);
    let gamma = probe_gamma(&pr);
    let mut base = SolverConfig::<f64>::new(Variant::EgBasic);
    base.gamma = GammaChoice::Fixed(gamma);
    let plain = stepped(&pr, base, 25)?;
    let mut cfg = SolverConfig::<f64>::new(Variant::EgBlockwise);
    cfg.gamma = GammaChoice::Fixed(gamma);
    let blockwise = stepped(&pr, cfg, 25)?;
    let (sb, sp) = (blockwise.state(), plain.state());
    if sb.x_blocks[0].as_slice() != sp.x_blocks[0].as_slice() {
        return Err("x lane deviates from the plain trajectory".into());
    }
    if sb.z_blocks[0].as_slice() != sp.z.as_slice() {
        return Err("the single consensus block deviates from the global iterate".into());
    }
    if sb.y_blocks[0].as_slice() != sp.y.as_slice() {
        return Err("the single multiplier block deviates from the global iterate".into());
    }
    Ok(())
}

fn compressor_randk_laws() -> Check {
    let d = 32;
    let x = {
        let mut rng = rng_stream(5, Party::Shared, 0, Lane::Data);
        Vector::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>())
            .expect("nonempty")
    };
    let comp = Compressor::new(CompressorKind::RandK, 0.25, RngMode::SharedSeed)
        .expect("valid fraction");
    let k = comp.k_for(d) as f64;
    let draws = 20_000u64;
    let mut mean = Vector::zeros(d);
    let mut moment = 0.0;
    for t in 0..draws {
        let mut rng = rng_stream(5, Party::Shared, t, Lane::UpIndex);
        let (q, _) = comp.compress(&x, &mut rng);
        moment += q.norm_sq();
        mean.add_assign_vec(&q);
    }
    mean = mean.scale(1.0 / draws as f64);
    let mean_err = mean.sub(&x).norm() / x.norm();
    if mean_err > 5e-2 {
        return Err(format!("empirical mean misses x by {mean_err:.2e} relative"));
    }
    let ratio = (moment / draws as f64) / ((d as f64 / k) * x.norm_sq());
    if ratio > 1.1 {
        return Err(format!("second moment is {ratio:.3}× the advertised bound"));
    }
    Ok(())
}

fn compressor_topk_contraction() -> Check {
    let d = 32;
    let comp =
        Compressor::new(CompressorKind::TopK, 0.25, RngMode::SharedSeed).expect("valid fraction");
    let k = comp.k_for(d) as f64;
    let bound = 1.0 - k / d as f64;
    for t in 0..200u64 {
        let mut rng = rng_stream(6, Party::Shared, t, Lane::Data);
        let x = Vector::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>())
            .expect("nonempty");
        let (c, _) = comp.compress(&x, &mut rng);
        let lhs = c.sub(&x).norm_sq();
        if lhs > bound * x.norm_sq() + 1e-12 {
            return Err(format!(
                "contraction bound violated on draw {t}: {lhs:.6} > {:.6}",
                bound * x.norm_sq()
            ));
        }
    }
    Ok(())
}

fn inject_saddle(solver: &mut Solver<'_, f64>, pr: &Problem, oracle: &Oracle) {
    let xs = pr.dataset.split_coefficients(&oracle.x_star).expect("widths match");
    let st = solver.state_mut();
    if !st.z.is_empty() {
        st.z = oracle.z_star.clone();
    }
    if !st.y.is_empty() {
        st.y = oracle.y_star.clone();
    }
    for i in 0..st.z_blocks.len() {
        st.z_blocks[i] = pr.dataset.blocks[i].matvec(&xs[i]).expect("widths match");
    }
    for yb in st.y_blocks.iter_mut() {
        *yb = oracle.y_star.clone();
    }
    if !st.lookahead.is_empty() {
        st.lookahead = xs.clone();
    }
    st.x_blocks = xs;
}

fn blocks_distance(a: &[Vector<f64>], b: &[Vector<f64>]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u.sub(v).norm_inf()).fold(0.0, f64::max)
}

fn saddle_movement(pr: &Problem, oracle: &Oracle, cfg: SolverConfig<f64>) -> Result<f64, String> {
    let mut solver = Solver::new(pr, cfg).map_err(|e| e.to_string())?;
    inject_saddle(&mut solver, pr, oracle);
    let before = solver.state().clone();
    solver.step().map_err(|e| e.to_string())?;
    let after = solver.state();
    let mut moved = blocks_distance(&after.x_blocks, &before.x_blocks);
    moved = moved.max(after.z.sub(&before.z).norm_inf());
    moved = moved.max(after.y.sub(&before.y).norm_inf());
    moved = moved.max(blocks_distance(&after.z_blocks, &before.z_blocks));
    moved = moved.max(blocks_distance(&after.y_blocks, &before.y_blocks));
    if !before.lookahead.is_empty() {
        moved = moved.max(blocks_distance(&after.lookahead, &before.lookahead));
    }
    Ok(moved)
}

fn fixed_point(pr: &Problem, oracle: &Oracle) -> Check {
    let deterministic = [
        Variant::EgBasic,
        Variant::EgProx,
        Variant::EgEncrypted,
        Variant::EgBlockwise,
        Variant::EgAugmented,
        Variant::EgDual,
        Variant::DualGd,
        Variant::Gd,
        Variant::Nesterov,
        Variant::Admm,
    ];
    for variant in deterministic {
        let mut cfg = SolverConfig::new(variant);
        if variant == Variant::EgAugmented {
            cfg.rho = Some(0.7);
        }
        let moved = saddle_movement(pr, oracle, cfg)?;
        if moved > 1e-12 {
            return Err(format!("{} moved {moved:.2e} off the saddle", variant.label()));
        }
    }
    Ok(())
}

fn oracle_residual(pr: &Problem, oracle: &Oracle) -> Check {
    let residual =
        oracle.stationarity_residual(pr).map_err(|e| e.to_string())?;
    let mut pulled = Vec::with_capacity(oracle.x_star.len());
    for block in &pr.dataset.blocks {
        let at_y = block.matvec_t(&oracle.y_star).map_err(|e| e.to_string())?;
        pulled.extend_from_slice(at_y.as_slice());
    }
    let scale = 1.0 + Vector::new(pulled).map_err(|e| e.to_string())?.norm();
    if residual > 1e-8 * scale {
        return Err(format!("stationarity residual {residual:.2e} exceeds 1e-8·{scale:.2}"));
    }
    Ok(())
}

fn rounds_to_target(
    pr: &Problem,
    oracle: &Oracle,
    gamma: GammaChoice,
    cap: usize,
) -> Result<Option<usize>, String> {
    let stars = pr.dataset.split_coefficients(&oracle.x_star).expect("widths match");
    let scale: f64 = stars.iter().map(Vector::norm_sq).sum::<f64>().sqrt();
    let mut cfg = SolverConfig::new(Variant::EgBasic);
    cfg.gamma = gamma;
    let mut solver = Solver::new(pr, cfg).map_err(|e| e.to_string())?;
    for k in 1..=cap {
        solver.step().map_err(|e| e.to_string())?;
        if k % 25 == 0 {
            let (xs, _, _) = solver.original_iterates().map_err(|e| e.to_string())?;
            let err: f64 =
                xs.iter().zip(&stars).map(|(u, v)| u.sub(v).norm_sq()).sum::<f64>().sqrt()
                    / scale;
            if err <= 1e-5 {
                return Ok(Some(k));
            }
        }
    }
    Ok(None)
}

fn convergence_budget(pr: &Problem, oracle: &Oracle) -> Check {
    match rounds_to_target(pr, oracle, GammaChoice::Auto, BUDGET)? {
        Some(_) => Ok(()),
        None => Err(format!("plain solver missed 1e-5 coefficient error within {BUDGET} rounds")),
    }
}

/// A 10× fault in the spectral constant shrinks the published step size;
/// stationarity is insensitive to it, the convergence budget is not.
fn step_rule_sensitivity(pr: &Problem, oracle: &Oracle) -> Check {
    let mut constants = pr.rule_constants();
    constants.lambda_max *= 10.0;
    let (faulted, _) = gamma_formula(StepVariant::Basic, &constants).map_err(|e| e.to_string())?;
    let mut cfg = SolverConfig::new(Variant::EgBasic);
    cfg.gamma = GammaChoice::Fixed(faulted);
    let moved = saddle_movement(pr, oracle, cfg)?;
    if moved > 1e-12 {
        return Err(format!("faulted step moved {moved:.2e} off the saddle"));
    }
    match rounds_to_target(pr, oracle, GammaChoice::Fixed(faulted), BUDGET)? {
        Some(rounds) => Err(format!(
            "faulted step still converged in {rounds} rounds; the budget check lost its teeth"
        )),
        None => Ok(()),
    }
}

pub fn cmd_selftest(quiet: bool) -> Result<i32> {
    let started = Instant::now();
    let (pr, oracle) = small();
    let (hard, hard_oracle) = budget_instance();
    let checks: Vec<(&str, Check)> = vec![
        ("oracle_residual", oracle_residual(&pr, &oracle)),
        ("reduction_rho_zero", reduction_rho_zero(&pr)),
        ("reduction_sigma_zero", reduction_sigma_zero(&pr)),
        ("reduction_plaintext", reduction_plaintext(&pr)),
        ("reduction_identity_compressor", reduction_identity_compressor(&pr)),
        ("reduction_single_client", reduction_single_client()),
        ("compressor_randk_laws", compressor_randk_laws()),
        ("compressor_topk_contraction", compressor_topk_contraction()),
        ("fixed_point", fixed_point(&pr, &oracle)),
        ("convergence_budget", convergence_budget(&hard, &hard_oracle)),
        ("step_rule_sensitivity", step_rule_sensitivity(&hard, &hard_oracle)),
    ];
    let mut failed = 0;
    for (name, outcome) in checks {
        match outcome {
            Ok(()) => {
                if !quiet {
                    println!("selftest {name}: ok");
                }
            }
            Err(why) => {
                failed += 1;
                println!("selftest {name}: FAILED ({why})");
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    if failed == 0 {
        if !quiet {
            println!("selftest: 11 invariants ok in {elapsed:.1}s");
        }
        Ok(0)
    } else {
        println!("selftest: {failed} invariant(s) FAILED in {elapsed:.1}s");
        Ok(1)
    }
}
