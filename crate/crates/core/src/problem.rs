//! Problem descriptions: the loss and regularizer catalogue with gradients,
//! proximal maps, and convex conjugates; smoothness and spectral constants;
//! the β rescaling that balances the loss against the coupling matrix; and
//! the per-variant step-size rules.
//!
//! Solvers run on the rescaled problem `min max ℓ̃(z̃) + r(x) + ⟨ỹ, βAx − z̃⟩`
//! with `ℓ̃(v) = ℓ(v/β)`. All `*_eff` operations already include β, so a
//! solver never sees β explicitly; with the default `β = 1` they reduce to
//! the plain formulas. Metrics map iterates back with `z = z̃/β, y = βỹ`.

use serde::Serialize;

use crate::dataio::VerticalDataset;
use crate::error::{Error, Result};
use crate::linalg::{
    lambda_max_gram_blocks, lambda_max_gram_default, Vector, LAMBDA_MAX_ITERS, LAMBDA_MAX_TOL,
};
use crate::scalar::Real;

/// Loss families. Only the quadratic `½‖z−b‖²` is implemented; its
/// smoothness constant is 1 and every derived quantity is closed-form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Quadratic,
}

/// A loss together with the labels it is measured against.
#[derive(Clone, Debug)]
pub struct LossSpec<S> {
    pub kind: LossKind,
    pub b: Vector<S>,
}

impl<S: Real> LossSpec<S> {
    pub fn quadratic(b: Vector<S>) -> Self {
        Self { kind: LossKind::Quadratic, b }
    }

    fn check_len(&self, z: &Vector<S>) -> Result<()> {
        if z.len() != self.b.len() {
            return Err(Error::Dimension(format!(
                "loss argument has length {}, labels have {}",
                z.len(),
                self.b.len()
            )));
        }
        Ok(())
    }

    /// `ℓ(z, b) = ½‖z − b‖²`.
    pub fn eval(&self, z: &Vector<S>) -> Result<S> {
        self.check_len(z)?;
        Ok(S::of(0.5) * z.sub(&self.b).norm_sq())
    }

    /// `∇ℓ(z, b) = z − b`.
    pub fn grad(&self, z: &Vector<S>) -> Result<Vector<S>> {
        self.check_len(z)?;
        Ok(z.sub(&self.b))
    }

    /// `prox_{γℓ}(v) = (v + γb)/(1 + γ)`.
    pub fn prox(&self, v: &Vector<S>, gamma: S) -> Result<Vector<S>> {
        self.check_len(v)?;
        let scale = S::one() / (S::one() + gamma);
        Ok(v.add_scaled(gamma, &self.b).scale(scale))
    }

    /// `ℓ*(y, b) = ½‖y‖² + ⟨b, y⟩`.
    pub fn conjugate_eval(&self, y: &Vector<S>) -> Result<S> {
        self.check_len(y)?;
        Ok(S::of(0.5) * y.norm_sq() + self.b.dot(y))
    }

    /// `∇ℓ*(y, b) = y + b`.
    pub fn conjugate_grad(&self, y: &Vector<S>) -> Result<Vector<S>> {
        self.check_len(y)?;
        Ok(y.add(&self.b))
    }

    /// Gradient Lipschitz constant of the loss.
    pub fn smoothness(&self) -> S {
        S::one()
    }

    /// Gradient Lipschitz constant of the conjugate.
    pub fn conjugate_smoothness(&self) -> S {
        S::one()
    }
}

/// Regularizer families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    /// `λ‖x‖²`, smooth with gradient `2λx`.
    Ridge,
    /// `λ‖x‖₁`, prox-friendly but non-smooth.
    L1,
    /// No regularization.
    None,
}

/// A separable regularizer applied blockwise to each client's coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegSpec<S> {
    pub kind: RegKind,
    pub lambda: S,
}

/// Which constant stands in for the ridge smoothness in step rules: the
/// gradient Lipschitz constant `2λ`, or the `λ` convention some experiment
/// descriptions use. Both are exposed; `2λ` is the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LrConvention {
    #[default]
    DoubleLambda,
    SingleLambda,
}

impl<S: Real> RegSpec<S> {
    pub fn ridge(lambda: S) -> Result<Self> {
        if lambda < S::zero() || !lambda.is_finite() {
            return Err(Error::Config(format!("ridge lambda must be ≥ 0, got {lambda}")));
        }
        Ok(Self { kind: RegKind::Ridge, lambda })
    }

    pub fn l1(lambda: S) -> Result<Self> {
        if lambda < S::zero() || !lambda.is_finite() {
            return Err(Error::Config(format!("l1 lambda must be ≥ 0, got {lambda}")));
        }
        Ok(Self { kind: RegKind::L1, lambda })
    }

    pub fn none() -> Self {
        Self { kind: RegKind::None, lambda: S::zero() }
    }

    pub fn eval(&self, x: &Vector<S>) -> S {
        match self.kind {
            RegKind::Ridge => self.lambda * x.norm_sq(),
            RegKind::L1 => {
                self.lambda * x.iter().fold(S::zero(), |acc, &v| acc + v.abs())
            }
            RegKind::None => S::zero(),
        }
    }

    /// Gradient where it exists; the l1 kind is non-smooth.
    pub fn grad(&self, x: &Vector<S>) -> Result<Vector<S>> {
        match self.kind {
            RegKind::Ridge => Ok(x.scale(S::of(2.0) * self.lambda)),
            RegKind::L1 => Err(Error::NonSmooth("l1 has no gradient; use its prox")),
            RegKind::None => Ok(Vector::zeros(x.len())),
        }
    }

    /// `prox_{γr}`: shrink for ridge, soft-threshold for l1, identity for
    /// no regularizer.
    pub fn prox(&self, v: &Vector<S>, gamma: S) -> Result<Vector<S>> {
        if gamma <= S::zero() {
            return Err(Error::Config(format!("prox needs gamma > 0, got {gamma}")));
        }
        match self.kind {
            RegKind::Ridge => {
                Ok(v.scale(S::one() / (S::one() + S::of(2.0) * gamma * self.lambda)))
            }
            RegKind::L1 => {
                let t = gamma * self.lambda;
                Ok(Vector::from_raw(
                    v.iter()
                        .map(|&x| {
                            if x > t {
                                x - t
                            } else if x < -t {
                                x + t
                            } else {
                                S::zero()
                            }
                        })
                        .collect(),
                ))
            }
            RegKind::None => Ok(v.clone()),
        }
    }

    /// `r*(u) = ‖u‖²/(4λ)` for ridge with `λ > 0`.
    pub fn conjugate_eval(&self, u: &Vector<S>) -> Result<S> {
        match self.kind {
            RegKind::Ridge if self.lambda > S::zero() => {
                Ok(u.norm_sq() / (S::of(4.0) * self.lambda))
            }
            RegKind::Ridge => Err(Error::UnsupportedConjugate("ridge conjugate needs lambda > 0")),
            RegKind::L1 => Err(Error::UnsupportedConjugate("l1 conjugate is an indicator")),
            RegKind::None => Err(Error::UnsupportedConjugate("no conjugate for the zero regularizer")),
        }
    }

    /// `∇r*(u) = u/(2λ)` for ridge with `λ > 0`.
    pub fn conjugate_grad(&self, u: &Vector<S>) -> Result<Vector<S>> {
        match self.kind {
            RegKind::Ridge if self.lambda > S::zero() => {
                Ok(u.scale(S::one() / (S::of(2.0) * self.lambda)))
            }
            RegKind::Ridge => Err(Error::UnsupportedConjugate("ridge conjugate needs lambda > 0")),
            RegKind::L1 => Err(Error::UnsupportedConjugate("l1 conjugate is an indicator")),
            RegKind::None => Err(Error::UnsupportedConjugate("no conjugate for the zero regularizer")),
        }
    }

    /// Smoothness constant used by step rules, `None` if non-smooth.
    pub fn smoothness(&self, convention: LrConvention) -> Option<S> {
        match self.kind {
            RegKind::Ridge => Some(match convention {
                LrConvention::DoubleLambda => S::of(2.0) * self.lambda,
                LrConvention::SingleLambda => self.lambda,
            }),
            RegKind::L1 => None,
            RegKind::None => Some(S::zero()),
        }
    }
}

/// How the global coupling constant `λmax(AᵀA)` is obtained: computed
/// exactly by (blocked) power iteration, or replaced by the distributed
/// bound `n·Σ_i λmax(A_iᵀA_i)` that needs no assembled matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMaxMode {
    #[default]
    Exact,
    BlockBound,
}

/// Spectral constants of the partitioned design matrix, computed once.
#[derive(Clone, Debug)]
pub struct SpectralConstants<S> {
    /// Exact `λmax(AᵀA)` (equal to `λmax(AAᵀ)`).
    pub lambda_max: S,
    /// `λmax(A_iᵀA_i)` per client (equal to `λmax(A_iA_iᵀ)`).
    pub per_block: Vec<S>,
}

impl<S: Real> SpectralConstants<S> {
    pub fn block_max(&self) -> S {
        self.per_block.iter().fold(S::zero(), |acc, &v| acc.max(v))
    }

    pub fn block_sum(&self) -> S {
        self.per_block.iter().fold(S::zero(), |acc, &v| acc + v)
    }

    /// The distributed stand-in for `λmax(AᵀA)`: `n·Σ_i λmax(A_iᵀA_i)`.
    pub fn distributed_bound(&self) -> S {
        S::of_usize(self.per_block.len()) * self.block_sum()
    }
}

/// Ridge strength used by the reference experiments: `λmax(AᵀA)/10³`.
pub fn default_ridge_lambda<S: Real>(lambda_max: S) -> S {
    lambda_max / S::of(1e3)
}

/// A fully specified training problem over a partitioned dataset.
#[derive(Clone, Debug)]
pub struct ProblemSpec<S> {
    pub dataset: VerticalDataset<S>,
    pub loss: LossSpec<S>,
    pub reg: RegSpec<S>,
    /// Rescaling factor; 1 means the plain problem.
    pub beta: S,
    pub lambda_max_mode: LambdaMaxMode,
    pub lr_convention: LrConvention,
    spectral: SpectralConstants<S>,
}

impl<S: Real> ProblemSpec<S> {
    pub fn new(dataset: VerticalDataset<S>, reg: RegSpec<S>) -> Result<Self> {
        let lambda_max = lambda_max_gram_blocks(
            &dataset.blocks,
            S::of(LAMBDA_MAX_TOL),
            LAMBDA_MAX_ITERS,
        )?
        .value;
        let per_block = dataset
            .blocks
            .iter()
            .map(|b| lambda_max_gram_default(b).value)
            .collect();
        let loss = LossSpec::quadratic(dataset.labels.clone());
        Ok(Self {
            dataset,
            loss,
            reg,
            beta: S::one(),
            lambda_max_mode: LambdaMaxMode::Exact,
            lr_convention: LrConvention::DoubleLambda,
            spectral: SpectralConstants { lambda_max, per_block },
        })
    }

    pub fn with_lambda_max_mode(mut self, mode: LambdaMaxMode) -> Self {
        self.lambda_max_mode = mode;
        self
    }

    pub fn with_lr_convention(mut self, convention: LrConvention) -> Self {
        self.lr_convention = convention;
        self
    }

    pub fn with_beta(mut self, beta: S) -> Result<Self> {
        if !(beta > S::zero()) || !beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        self.beta = beta;
        Ok(self)
    }

    pub fn spectral(&self) -> &SpectralConstants<S> {
        &self.spectral
    }

    /// Mode-resolved `λmax(AᵀA)` of the unscaled matrix.
    pub fn lambda_max_raw(&self) -> S {
        match self.lambda_max_mode {
            LambdaMaxMode::Exact => self.spectral.lambda_max,
            LambdaMaxMode::BlockBound => self.spectral.distributed_bound(),
        }
    }

    /// Mode-resolved `λmax(ÃᵀÃ) = β²·λmax(AᵀA)`.
    pub fn lambda_max_eff(&self) -> S {
        self.beta * self.beta * self.lambda_max_raw()
    }

    /// `max_i λmax(Ã_iᵀÃ_i)`.
    pub fn block_lambda_eff_max(&self) -> S {
        self.beta * self.beta * self.spectral.block_max()
    }

    /// Smoothness of the rescaled loss, `L_ℓ/β²`.
    pub fn l_loss_eff(&self) -> S {
        self.loss.smoothness() / (self.beta * self.beta)
    }

    /// Conjugate smoothness of the rescaled loss, `β²·L_ℓ*`.
    pub fn l_loss_conj_eff(&self) -> S {
        self.beta * self.beta * self.loss.conjugate_smoothness()
    }

    /// Step-rule regularizer constant, `None` for non-smooth kinds.
    pub fn l_reg(&self) -> Option<S> {
        self.reg.smoothness(self.lr_convention)
    }

    /// `Ã_i x_i = β·A_i x_i`.
    pub fn apply_block(&self, i: usize, x: &Vector<S>) -> Result<Vector<S>> {
        Ok(self.dataset.blocks[i].matvec(x)?.scale(self.beta))
    }

    /// `Ã_iᵀ y = β·A_iᵀ y`.
    pub fn adjoint_block(&self, i: usize, y: &Vector<S>) -> Result<Vector<S>> {
        Ok(self.dataset.blocks[i].matvec_t(y)?.scale(self.beta))
    }

    /// `Σ_i Ã_i x_i`.
    pub fn apply_all(&self, xs: &[Vector<S>]) -> Result<Vector<S>> {
        Ok(self.dataset.apply_blocks(xs)?.scale(self.beta))
    }

    /// `ℓ̃(z̃) = ℓ(z̃/β)`.
    pub fn loss_eval_eff(&self, z: &Vector<S>) -> Result<S> {
        self.loss.eval(&z.scale(S::one() / self.beta))
    }

    /// `∇ℓ̃(z̃) = (1/β)·∇ℓ(z̃/β)`.
    pub fn loss_grad_eff(&self, z: &Vector<S>) -> Result<Vector<S>> {
        let inner = self.loss.grad(&z.scale(S::one() / self.beta))?;
        Ok(inner.scale(S::one() / self.beta))
    }

    /// `prox_{γℓ̃}(v) = (v + γb/β)/(1 + γ/β²)` for the quadratic loss.
    pub fn loss_prox_eff(&self, v: &Vector<S>, gamma: S) -> Result<Vector<S>> {
        self.loss.check_len(v)?;
        let b2 = self.beta * self.beta;
        let scale = S::one() / (S::one() + gamma / b2);
        Ok(v.add_scaled(gamma / self.beta, &self.loss.b).scale(scale))
    }

    /// `ℓ̃*(y) = ℓ*(βy)`.
    pub fn loss_conjugate_eval_eff(&self, y: &Vector<S>) -> Result<S> {
        self.loss.conjugate_eval(&y.scale(self.beta))
    }

    /// `∇ℓ̃*(y) = β·∇ℓ*(βy) = β(βy + b)`.
    pub fn loss_conjugate_grad_eff(&self, y: &Vector<S>) -> Result<Vector<S>> {
        let inner = self.loss.conjugate_grad(&y.scale(self.beta))?;
        Ok(inner.scale(self.beta))
    }

    /// Original-space objective `f(x) = ℓ(Ax, b) + Σ_i r(x_i)`.
    pub fn objective(&self, xs: &[Vector<S>]) -> Result<S> {
        let z = self.dataset.apply_blocks(xs)?;
        let mut f = self.loss.eval(&z)?;
        for x in xs {
            f += self.reg.eval(x);
        }
        Ok(f)
    }

    /// Objective evaluated through the rescaled pieces; algebraically equal
    /// to [`Self::objective`].
    pub fn objective_eff(&self, xs: &[Vector<S>]) -> Result<S> {
        let z = self.apply_all(xs)?;
        let mut f = self.loss_eval_eff(&z)?;
        for x in xs {
            f += self.reg.eval(x);
        }
        Ok(f)
    }

    /// Picks β so the rescaled loss smoothness equals the rescaled coupling
    /// norm: `β = L_ℓ^{1/3}/λmax^{1/6}` makes `L_ℓ/β² = √(β²·λmax)`.
    pub fn apply_beta_trick(mut self) -> Result<Self> {
        let lmax = self.lambda_max_raw().as_f64();
        if lmax <= 0.0 {
            return Err(Error::Degenerate(
                "beta rescaling needs λmax > 0; the design matrix is zero".into(),
            ));
        }
        let l_loss = self.loss.smoothness().as_f64();
        self.beta = S::of(l_loss.cbrt() / lmax.powf(1.0 / 6.0));
        Ok(self)
    }

    /// Assembles the constants a step rule needs, β and mode resolved.
    pub fn rule_constants(&self) -> RuleConstants {
        RuleConstants {
            lambda_max: self.lambda_max_eff().as_f64(),
            block_max: self.block_lambda_eff_max().as_f64(),
            l_loss: self.l_loss_eff().as_f64(),
            l_loss_conj: self.l_loss_conj_eff().as_f64(),
            l_reg: self.l_reg().map(|v| v.as_f64()),
            n: self.dataset.n_clients(),
            s: self.dataset.sample_count,
            d: self.dataset.total_features(),
            ..RuleConstants::default()
        }
    }

    /// Computes the step size for `variant`, merging problem constants with
    /// the variant-specific `inputs`.
    pub fn step_size(&self, variant: StepVariant, inputs: &StepInputs) -> Result<StepRule<S>> {
        let mut c = self.rule_constants();
        c.p = inputs.p;
        c.omega = inputs.omega;
        c.delta = inputs.delta;
        c.sigma = inputs.sigma;
        c.rho = inputs.rho;
        c.horizon = inputs.horizon;
        c.d_radius_sq = inputs.d_radius_sq.unwrap_or(1.0);
        c.independent_seed = inputs.independent_seed;
        let (gamma, constants) = gamma_formula(variant, &c)?;
        Ok(StepRule { variant, gamma: S::of(gamma), constants })
    }
}

/// Step-rule variants; each matches one convergence guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepVariant {
    Basic,
    Prox,
    CompressUnbiased,
    CompressBiased,
    Partial,
    Coord,
    Noise,
    Blockwise,
    Augmented,
    Dual,
}

/// Variant-specific knobs a caller supplies on top of the problem constants.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepInputs {
    /// Full-synchronization probability.
    pub p: Option<f64>,
    /// Unbiased compressor second-moment factor ω.
    pub omega: Option<f64>,
    /// Biased compressor amplification δ.
    pub delta: Option<f64>,
    /// Noise level σ.
    pub sigma: Option<f64>,
    /// Augmented penalty ρ.
    pub rho: Option<f64>,
    /// Iteration horizon for the noise rule.
    pub horizon: Option<u64>,
    /// Estimate of the squared domain radius D² (defaults to 1).
    pub d_radius_sq: Option<f64>,
    /// Whether compressor seeds differ between sender and receiver.
    pub independent_seed: Option<bool>,
}

/// Everything a step formula reads, as plain numbers.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleConstants {
    pub lambda_max: f64,
    pub block_max: f64,
    pub l_loss: f64,
    pub l_loss_conj: f64,
    /// `None` means the regularizer is non-smooth.
    pub l_reg: Option<f64>,
    pub n: usize,
    pub s: usize,
    pub d: usize,
    pub p: Option<f64>,
    pub omega: Option<f64>,
    pub delta: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub horizon: Option<u64>,
    pub d_radius_sq: f64,
    pub independent_seed: Option<bool>,
}

/// A computed step size plus the constants that produced it.
#[derive(Clone, Debug)]
pub struct StepRule<S> {
    pub variant: StepVariant,
    pub gamma: S,
    pub constants: Vec<(String, f64)>,
}

fn require<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingConstant(name))
}

fn smooth_reg(c: &RuleConstants) -> Result<f64> {
    c.l_reg
        .ok_or(Error::NonSmooth("this step rule needs a smooth regularizer; l1 requires the prox variant"))
}

fn check_p(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("synchronization probability must lie in (0, 1], got {p}")));
    }
    Ok(p)
}

/// Evaluates the γ formula for `variant` over plain constants. Returns γ and
/// the named constants consumed, for reporting.
pub fn gamma_formula(variant: StepVariant, c: &RuleConstants) -> Result<(f64, Vec<(String, f64)>)> {
    let mut used: Vec<(String, f64)> = vec![
        ("lambda_max".into(), c.lambda_max),
        ("l_loss".into(), c.l_loss),
    ];
    let mut terms: Vec<f64> = vec![1.0];
    let push = |terms: &mut Vec<f64>, v: f64| {
        if v.is_finite() && v > 0.0 {
            terms.push(v);
        }
    };
    let coeff = match variant {
        StepVariant::Basic => {
            let lr = smooth_reg(c)?;
            used.push(("l_reg".into(), lr));
            push(&mut terms, 1.0 / c.lambda_max.sqrt());
            push(&mut terms, 1.0 / lr);
            push(&mut terms, 1.0 / c.l_loss);
            0.5
        }
        StepVariant::Prox => {
            push(&mut terms, 1.0 / c.lambda_max.sqrt());
            1.0 / 2.0f64.sqrt()
        }
        StepVariant::CompressUnbiased => {
            let lr = smooth_reg(c)?;
            let p = check_p(require(c.p, "p")?)?;
            let omega = require(c.omega, "omega")?;
            let indep = require(c.independent_seed, "independent_seed")?;
            used.push(("l_reg".into(), lr));
            used.push(("p".into(), p));
            used.push(("omega".into(), omega));
            used.push(("block_max".into(), c.block_max));
            push(&mut terms, 1.0 / lr);
            push(&mut terms, 1.0 / c.l_loss);
            let extra = if indep { c.block_max } else { 0.0 };
            push(&mut terms, (p / (omega * (c.lambda_max + extra))).sqrt());
            push(&mut terms, (p / (omega * c.lambda_max)).sqrt());
            0.25
        }
        StepVariant::CompressBiased => {
            let lr = smooth_reg(c)?;
            let p = check_p(require(c.p, "p")?)?;
            let omega = require(c.omega, "omega")?;
            let delta = require(c.delta, "delta")?;
            used.push(("l_reg".into(), lr));
            used.push(("p".into(), p));
            used.push(("omega".into(), omega));
            used.push(("delta".into(), delta));
            used.push(("block_max".into(), c.block_max));
            used.push(("n".into(), c.n as f64));
            push(&mut terms, 1.0 / lr);
            push(&mut terms, 1.0 / c.l_loss);
            let spread = c.lambda_max + c.n as f64 * c.block_max;
            push(&mut terms, (p / (delta * delta * spread)).sqrt());
            push(&mut terms, (p / (omega * c.lambda_max)).sqrt());
            0.25
        }
        StepVariant::Partial => {
            let lr = smooth_reg(c)?;
            let p = check_p(require(c.p, "p")?)?;
            used.push(("l_reg".into(), lr));
            used.push(("p".into(), p));
            used.push(("block_max".into(), c.block_max));
            used.push(("n".into(), c.n as f64));
            push(&mut terms, 1.0 / lr);
            push(&mut terms, 1.0 / c.l_loss);
            let spread = c.lambda_max + c.n as f64 * c.block_max;
            push(&mut terms, (p / spread).sqrt());
            0.25
        }
        StepVariant::Coord => {
            let lr = smooth_reg(c)?;
            let p = check_p(require(c.p, "p")?)?;
            let indep = require(c.independent_seed, "independent_seed")?;
            used.push(("l_reg".into(), lr));
            used.push(("p".into(), p));
            used.push(("block_max".into(), c.block_max));
            used.push(("s".into(), c.s as f64));
            used.push(("d".into(), c.d as f64));
            push(&mut terms, 1.0 / lr);
            push(&mut terms, 1.0 / c.l_loss);
            let extra = if indep { c.block_max } else { 0.0 };
            push(&mut terms, (p / (c.s as f64 * (c.lambda_max + extra))).sqrt());
            push(&mut terms, (p / (c.d as f64 * c.block_max)).sqrt());
            0.25
        }
        StepVariant::Noise => {
            let lr = smooth_reg(c)?;
            let sigma = require(c.sigma, "sigma")?;
            used.push(("l_reg".into(), lr));
            used.push(("sigma".into(), sigma));
            used.push(("n".into(), c.n as f64));
            terms.clear();
            terms.push(0.5);
            push(&mut terms, 1.0 / (8.0 * c.lambda_max).sqrt());
            push(&mut terms, 1.0 / (2.0 * lr));
            push(&mut terms, 1.0 / (2.0 * c.l_loss));
            if sigma > 0.0 {
                let k = require(c.horizon, "horizon")? as f64;
                if k < 1.0 {
                    return Err(Error::MissingConstant("horizon"));
                }
                used.push(("horizon".into(), k));
                used.push(("d_radius_sq".into(), c.d_radius_sq));
                let denom = 8.0 * (c.lambda_max + c.n as f64) * sigma * sigma * k;
                push(&mut terms, (c.d_radius_sq / denom).sqrt());
            }
            1.0
        }
        StepVariant::Blockwise => {
            let lr = smooth_reg(c)?;
            used.push(("l_reg".into(), lr));
            used.push(("block_max".into(), c.block_max));
            used.push(("n".into(), c.n as f64));
            push(&mut terms, 1.0 / c.block_max.sqrt());
            push(&mut terms, 1.0 / lr);
            push(&mut terms, 1.0 / (c.n as f64 * c.l_loss));
            0.5
        }
        StepVariant::Augmented => {
            let lr = smooth_reg(c)?;
            let rho = require(c.rho, "rho")?;
            if rho < 0.0 {
                return Err(Error::Config(format!("penalty rho must be ≥ 0, got {rho}")));
            }
            used.push(("l_reg".into(), lr));
            used.push(("rho".into(), rho));
            push(&mut terms, 1.0 / rho);
            push(&mut terms, 1.0 / c.lambda_max.sqrt());
            push(&mut terms, 1.0 / (rho * c.lambda_max).sqrt());
            push(&mut terms, 1.0 / (rho * c.lambda_max));
            push(&mut terms, 1.0 / lr);
            push(&mut terms, 1.0 / c.l_loss);
            0.25
        }
        StepVariant::Dual => {
            let lr = smooth_reg(c)?;
            used.push(("l_reg".into(), lr));
            used.push(("l_loss_conj".into(), c.l_loss_conj));
            push(&mut terms, 1.0 / c.lambda_max.sqrt());
            push(&mut terms, 1.0 / lr);
            push(&mut terms, 1.0 / c.l_loss_conj);
            0.5
        }
    };
    let min = terms.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma = coeff * min;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Degenerate(format!("step rule produced gamma = {gamma}")));
    }
    Ok((gamma, used))
}
