//! Smallest end-to-end run: synthesize a regression instance, split it
//! across five clients, solve the saddle-point formulation with the basic
//! extragradient scheme, and print progress against a direct solve.

use vfl_saddle::dataio::{partition_vertical, synth_regression};
use vfl_saddle::metrics::solve_ridge_oracle;
use vfl_saddle::problem::{ProblemSpec, RegSpec};
use vfl_saddle::solvers::{run_with_oracle, SolverConfig, Variant};
use vfl_saddle::Result;

fn main() -> Result<()> {
    let (a, b) = synth_regression::<f64>(200, 50, 1000.0, 0.05, 1)?;
    let data = partition_vertical(&a, &b, 5, 1, false)?;
    let problem = ProblemSpec::new(data, RegSpec::ridge(1e-3)?)?;
    let oracle = solve_ridge_oracle(&problem)?;

    let mut cfg = SolverConfig::new(Variant::EgBasic);
    cfg.iterations = 5_000;
    cfg.report_every = 1_000;
    let record = run_with_oracle(&cfg, &problem, Some(&oracle))?;

    for row in &record.rows {
        println!(
            "iter {:>5}  subopt {:>9.2e}  uploaded {:>8} scalars",
            row.iter, row.subopt, row.up
        );
    }
    Ok(())
}
