//! Ground-truth oracles and convergence measurement: the closed-form ridge
//! solution, the Lagrangian and its saddle criteria, relative suboptimality,
//! and run records that serialize to CSV with a JSON metadata sidecar.
//!
//! Everything here works in the original problem space. Solvers that run on
//! a β-rescaled problem map their iterates back before measuring.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::problem::{ProblemSpec, RegKind};
use crate::scalar::Real;

/// The exact saddle point of a quadratic-loss ridge problem.
///
/// `x_star` is stored in block-concatenation order; `z_star = A x*` and
/// `y_star = ∇ℓ(z*, b) = z* − b`, so `(x*, z*, y*)` is stationary for the
/// Lagrangian.
#[derive(Clone, Debug)]
pub struct OracleSolution<S> {
    pub x_star: Vector<S>,
    pub z_star: Vector<S>,
    pub y_star: Vector<S>,
    pub f_star: S,
}

impl<S: Real> OracleSolution<S> {
    /// `‖Aᵀy* + ∇r(x*)‖`, which the construction drives to roundoff.
    pub fn stationarity_residual(&self, problem: &ProblemSpec<S>) -> Result<S> {
        let xs = problem.dataset.split_coefficients(&self.x_star)?;
        let mut parts = Vec::with_capacity(self.x_star.len());
        for (i, x) in xs.iter().enumerate() {
            let at_y = problem.dataset.blocks[i].matvec_t(&self.y_star)?;
            let grad = problem.reg.grad(x)?;
            parts.extend_from_slice(at_y.add(&grad).as_slice());
        }
        Ok(Vector::from_raw(parts).norm())
    }

    /// Default constraint weight for [`newgap`]: `‖y*‖∞ + 1`.
    pub fn newgap_weight(&self) -> S {
        self.y_star.norm_inf() + S::one()
    }
}

/// In-place dense Cholesky `G = LLᵀ` on a flat row-major buffer; the lower
/// triangle ends up holding `L`.
pub(crate) fn cholesky<S: Real>(g: &mut [S], d: usize) -> Result<()> {
    for j in 0..d {
        let mut diag = g[j * d + j];
        for k in 0..j {
            diag -= g[j * d + k] * g[j * d + k];
        }
        if diag <= S::zero() || !diag.is_finite() {
            return Err(Error::SingularOracle(format!(
                "normal equations lost positive definiteness at pivot {j}"
            )));
        }
        let root = diag.sqrt();
        g[j * d + j] = root;
        for i in (j + 1)..d {
            let mut v = g[i * d + j];
            for k in 0..j {
                v -= g[i * d + k] * g[j * d + k];
            }
            g[i * d + j] = v / root;
        }
    }
    Ok(())
}

pub(crate) fn cholesky_solve<S: Real>(l: &[S], d: usize, rhs: &Vector<S>) -> Vector<S> {
    let mut y = rhs.as_slice().to_vec();
    for i in 0..d {
        for k in 0..i {
            let t = l[i * d + k] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * d + i];
    }
    for i in (0..d).rev() {
        for k in (i + 1)..d {
            let t = l[k * d + i] * y[k];
            y[i] -= t;
        }
        y[i] /= l[i * d + i];
    }
    Vector::from_raw(y)
}

/// Solves `(AᵀA + 2λI)x = Aᵀb` by Cholesky factorization with two rounds of
/// iterative refinement, then fills in the saddle triple.
pub fn solve_ridge_oracle<S: Real>(problem: &ProblemSpec<S>) -> Result<OracleSolution<S>> {
    let lambda = match problem.reg.kind {
        RegKind::Ridge => problem.reg.lambda,
        RegKind::None => S::zero(),
        RegKind::L1 => {
            return Err(Error::Config(
                "the closed-form oracle covers ridge (or no) regularization only".into(),
            ));
        }
    };
    let a = problem.dataset.assemble();
    let d = a.cols();
    if d == 0 {
        return Err(Error::EmptyInput("oracle needs at least one feature"));
    }
    let b = &problem.dataset.labels;
    let mut gram = vec![S::zero(); d * d];
    for i in 0..d {
        for j in i..d {
            let mut g = S::zero();
            for r in 0..a.rows() {
                g += a.get(r, i) * a.get(r, j);
            }
            if i == j {
                g += S::of(2.0) * lambda;
            }
            gram[i * d + j] = g;
            gram[j * d + i] = g;
        }
    }
    let rhs = a.matvec_t(b)?;
    let mut factor = gram.clone();
    cholesky(&mut factor, d)?;
    let mut x = cholesky_solve(&factor, d, &rhs);
    for _ in 0..2 {
        let mut residual = rhs.clone();
        for i in 0..d {
            let mut gx = S::zero();
            for j in 0..d {
                gx += gram[i * d + j] * x[j];
            }
            residual[i] -= gx;
        }
        x.add_assign_vec(&cholesky_solve(&factor, d, &residual));
    }
    let z_star = a.matvec(&x)?;
    let y_star = problem.loss.grad(&z_star)?;
    let f_star = problem.loss.eval(&z_star)? + problem.reg.eval(&x);
    Ok(OracleSolution { x_star: x, z_star, y_star, f_star })
}

/// `L(x, z, y) = ℓ(z, b) + Σ_i r(x_i) + ⟨y, Σ_i A_i x_i − z⟩`.
pub fn lagrangian_value<S: Real>(
    problem: &ProblemSpec<S>,
    xs: &[Vector<S>],
    z: &Vector<S>,
    y: &Vector<S>,
) -> Result<S> {
    let ax = problem.dataset.apply_blocks(xs)?;
    let mut value = problem.loss.eval(z)?;
    for x in xs {
        value += problem.reg.eval(x);
    }
    value += y.dot(&ax.sub(z));
    Ok(value)
}

/// `gap*(x, z, y) = L(x, z, y*) − L(x*, z*, y)`; nonnegative by the saddle
/// inequality.
pub fn gap_star<S: Real>(
    problem: &ProblemSpec<S>,
    oracle: &OracleSolution<S>,
    xs: &[Vector<S>],
    z: &Vector<S>,
    y: &Vector<S>,
) -> Result<S> {
    let xs_star = problem.dataset.split_coefficients(&oracle.x_star)?;
    let upper = lagrangian_value(problem, xs, z, &oracle.y_star)?;
    let lower = lagrangian_value(problem, &xs_star, &oracle.z_star, y)?;
    Ok(upper - lower)
}

/// `[ℓ(z, b) + r(x) − f*] + C·‖Ax − z‖`. With `C ≥ ‖y*‖∞` this upper-bounds
/// progress without a multiplier iterate; with `C = 0` it degenerates to the
/// plain functional gap, which can go negative off the constraint manifold.
pub fn newgap<S: Real>(
    problem: &ProblemSpec<S>,
    oracle: &OracleSolution<S>,
    xs: &[Vector<S>],
    z: &Vector<S>,
    c: S,
) -> Result<S> {
    if c < S::zero() {
        return Err(Error::Config(format!("newgap weight must be ≥ 0, got {c}")));
    }
    let ax = problem.dataset.apply_blocks(xs)?;
    let mut value = problem.loss.eval(z)? - oracle.f_star;
    for x in xs {
        value += problem.reg.eval(x);
    }
    Ok(value + c * ax.sub(z).norm())
}

/// `(f(x) − f*)/(f(0) − f*)`: 1 at the zero start, 0 at the optimum.
pub fn f_rel_subopt<S: Real>(
    problem: &ProblemSpec<S>,
    oracle: &OracleSolution<S>,
    xs: &[Vector<S>],
) -> Result<S> {
    let zero_xs: Vec<Vector<S>> = problem
        .dataset
        .feature_counts
        .iter()
        .map(|&w| Vector::zeros(w))
        .collect();
    let f0 = problem.objective(&zero_xs)?;
    let denom = f0 - oracle.f_star;
    if denom <= S::of(1e-14) * (S::one() + oracle.f_star.abs()) {
        return Err(Error::Degenerate(
            "zero initial point is already optimal; relative suboptimality is undefined".into(),
        ));
    }
    Ok((problem.objective(xs)? - oracle.f_star) / denom)
}

/// One sampled iteration of a run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RunRow {
    pub iter: u64,
    pub up: u64,
    pub down: u64,
    pub flops: u64,
    pub subopt: f64,
    pub violation: f64,
    pub gapstar: f64,
    pub newgap: f64,
}

/// Metadata that, together with the dataset source, replays a run exactly.
#[derive(Clone, Debug, Default, Serialize)]
pub struct RunMeta {
    pub solver: String,
    pub gamma: f64,
    pub gamma_auto: bool,
    pub constants: Vec<(String, f64)>,
    pub master_seed: u64,
    pub iterations: u64,
    pub report_every: u64,
    pub n_clients: usize,
    pub sample_count: usize,
    pub features: usize,
    pub beta: f64,
    pub reg: String,
    pub reg_lambda: f64,
    pub lr_convention: String,
    pub lambda_max_mode: String,
    pub lambda_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compressor: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_iter: Option<u64>,
    pub scalars_up_total: u64,
    pub scalars_down_total: u64,
    pub full_sync_rounds: u64,
    pub flops_total: u64,
    /// Free-form additions (data source, CLI echo).
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// A completed run: sampled rows, replay metadata, and final iterates.
#[derive(Clone, Debug)]
pub struct RunRecord<S> {
    pub rows: Vec<RunRow>,
    pub meta: RunMeta,
    /// Final primal blocks, original space.
    pub final_x: Vec<Vector<S>>,
    /// Final consensus iterate, original space.
    pub final_z: Vector<S>,
    /// Final multiplier, original space.
    pub final_y: Vector<S>,
    /// Running averages of the half-step iterates, when the variant tracks
    /// them.
    pub averaged_x: Option<Vec<Vector<S>>>,
}

/// The fixed CSV header.
pub const CSV_HEADER: &str = "iter,up,down,flops,subopt,violation,gapstar,newgap";

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x}")
    }
}

impl<S: Real> RunRecord<S> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.iter,
                r.up,
                r.down,
                r.flops,
                fmt(r.subopt),
                fmt(r.violation),
                fmt(r.gapstar),
                fmt(r.newgap)
            ));
        }
        out
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("metadata is plain data")
    }

    /// Final concatenated coefficient vector (block order).
    pub fn final_x_concat(&self) -> Vector<S> {
        let mut out = Vec::new();
        for x in &self.final_x {
            out.extend_from_slice(x.as_slice());
        }
        Vector::from_raw(out)
    }
}
