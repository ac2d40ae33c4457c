//! Iteration drivers for the saddle-point reformulation and its baselines.
//!
//! The extragradient family advances primal blocks, the consensus iterate,
//! and the multiplier through an extrapolation phase followed by an update
//! phase; the communication-thrifty members anchor their updates on rarely
//! refreshed reference points. The baselines (`gd`, `nesterov`, `admm`,
//! `dual_gd`) attack the same regression problem through its minimization or
//! dual forms. Every variant is a deterministic function of the problem,
//! the configuration, and the master seed; randomness comes exclusively
//! from keyed streams, so a run replays bit-identically.

mod baselines;
mod extragradient;
mod reference;
mod state;

pub use baselines::ridge_dual_value;
pub use state::{ErrorState, IterateState};

use crate::comm::{Compressor, CompressorKind, EncryptionScheme, NoiseSpec, RngMode, TrafficLedger};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::metrics::{
    f_rel_subopt, gap_star, newgap, solve_ridge_oracle, OracleSolution, RunMeta, RunRecord, RunRow,
};
use crate::problem::{LrConvention, ProblemSpec, RegKind, StepInputs, StepVariant};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Iterate-norm bound above which a run is declared divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Which iteration family drives the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    EgBasic,
    EgProx,
    EgCompressUnbiased,
    EgCompressBiased,
    EgPartial,
    EgCoord,
    EgNoise,
    EgEncrypted,
    EgBlockwise,
    EgAugmented,
    EgDual,
    EgNonconvex,
    Gd,
    Nesterov,
    Admm,
    DualGd,
}

impl Variant {
    /// Every variant, in declaration order.
    pub const ALL: [Variant; 16] = [
        Variant::EgBasic,
        Variant::EgProx,
        Variant::EgCompressUnbiased,
        Variant::EgCompressBiased,
        Variant::EgPartial,
        Variant::EgCoord,
        Variant::EgNoise,
        Variant::EgEncrypted,
        Variant::EgBlockwise,
        Variant::EgAugmented,
        Variant::EgDual,
        Variant::EgNonconvex,
        Variant::Gd,
        Variant::Nesterov,
        Variant::Admm,
        Variant::DualGd,
    ];

    /// The lowercase configuration name.
    pub fn label(self) -> &'static str {
        match self {
            Variant::EgBasic => "eg_basic",
            Variant::EgProx => "eg_prox",
            Variant::EgCompressUnbiased => "eg_compress_unbiased",
            Variant::EgCompressBiased => "eg_compress_biased",
            Variant::EgPartial => "eg_partial",
            Variant::EgCoord => "eg_coord",
            Variant::EgNoise => "eg_noise",
            Variant::EgEncrypted => "eg_encrypted",
            Variant::EgBlockwise => "eg_blockwise",
            Variant::EgAugmented => "eg_augmented",
            Variant::EgDual => "eg_dual",
            Variant::EgNonconvex => "eg_nonconvex",
            Variant::Gd => "gd",
            Variant::Nesterov => "nesterov",
            Variant::Admm => "admm",
            Variant::DualGd => "dual_gd",
        }
    }

    /// True for variants whose trajectory depends on the master seed.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Variant::EgCompressUnbiased
                | Variant::EgCompressBiased
                | Variant::EgPartial
                | Variant::EgCoord
                | Variant::EgNoise
        )
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.label() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown solver '{s}'; expected one of: {}",
                    Variant::ALL.map(Variant::label).join(", ")
                ))
            })
    }
}

/// Step size: a fixed value, or the variant's published formula evaluated on
/// the problem constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaChoice {
    Auto,
    Fixed(f64),
}

/// Everything a run needs besides the problem itself.
#[derive(Clone, Debug)]
pub struct SolverConfig<S> {
    pub variant: Variant,
    pub gamma: GammaChoice,
    /// Reference-refresh probability of the anchored variants; τ = 1 − p.
    pub p: f64,
    /// Penalty weight. `None` resolves per variant: 0 for the augmented
    /// extragradient, `1/√λmax` for the alternating-direction baseline.
    pub rho: Option<f64>,
    /// Payload compressor for the compressed variants.
    pub compressor: Compressor,
    /// Channel noise for the privacy variant.
    pub noise: NoiseSpec,
    /// Encoding used by the encrypted variant.
    pub scheme: EncryptionScheme<S>,
    /// Iteration budget K.
    pub iterations: u64,
    /// Seed of every random stream in the run.
    pub master_seed: u64,
    /// Metric sampling stride.
    pub report_every: u64,
    /// Squared solution-radius estimate consumed by the noise step rule.
    pub d_radius_sq: Option<f64>,
    /// Report metrics on the averaged iterates instead of the last ones.
    pub averaged_metrics: bool,
    /// Solve the alternating-direction subproblems with an inner accelerated
    /// loop instead of their closed forms.
    pub generic_subsolver: bool,
    /// Gradient tolerance of the inner loop.
    pub subsolver_tol: f64,
    /// Overrides the step size on the gain lane of the adaptive-gain
    /// variant; 0 freezes the gains.
    pub gain_gamma: Option<f64>,
}

impl<S: Real> SolverConfig<S> {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            gamma: GammaChoice::Auto,
            p: 1.0,
            rho: None,
            compressor: Compressor::identity(),
            noise: NoiseSpec::silent(),
            scheme: EncryptionScheme::Plaintext,
            iterations: 1000,
            master_seed: 1,
            report_every: 100,
            d_radius_sq: None,
            averaged_metrics: false,
            generic_subsolver: false,
            subsolver_tol: 1e-10,
            gain_gamma: None,
        }
    }
}

/// A configured solver mid-run. Exposes single stepping so tests can inspect
/// trajectories; `run` drives it to completion.
pub struct Solver<'a, S: Real> {
    problem: &'a ProblemSpec<S>,
    config: SolverConfig<S>,
    state: IterateState<S>,
    ledger: TrafficLedger,
    gamma: S,
    gamma_auto: bool,
    constants: Vec<(String, f64)>,
    rho: S,
    momentum: S,
    admm: Option<baselines::AdmmWork<S>>,
}

impl<'a, S: Real> Solver<'a, S> {
    pub fn new(problem: &'a ProblemSpec<S>, config: SolverConfig<S>) -> Result<Self> {
        if !(config.p > 0.0 && config.p <= 1.0) {
            return Err(Error::Config(format!(
                "refresh probability must lie in (0, 1], got {}",
                config.p
            )));
        }
        if config.report_every == 0 {
            return Err(Error::Config("report_every must be at least 1".into()));
        }
        if let Some(r) = config.rho {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Config(format!("rho must be finite and ≥ 0, got {r}")));
            }
        }
        if !(config.subsolver_tol > 0.0) {
            return Err(Error::Config("subsolver tolerance must be positive".into()));
        }
        if let Some(g) = config.gain_gamma {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::Config(format!("gain_gamma must be finite and ≥ 0, got {g}")));
            }
        }
        match config.variant {
            Variant::EgCompressUnbiased if !config.compressor.is_unbiased() => {
                return Err(Error::Config(
                    "contractive compressors bias the update; use eg_compress_biased".into(),
                ));
            }
            Variant::DualGd => {
                if problem.reg.kind != RegKind::Ridge || !(problem.reg.lambda > S::zero()) {
                    return Err(Error::Degenerate(
                        "dual ascent needs a strictly positive ridge weight".into(),
                    ));
                }
            }
            Variant::Admm if problem.reg.kind == RegKind::L1 => {
                return Err(Error::Config(
                    "the alternating-direction baseline supports ridge or no regularizer".into(),
                ));
            }
            _ => {}
        }

        let rho = resolve_rho(problem, &config)?;
        let (gamma, gamma_auto, constants) = match config.gamma {
            GammaChoice::Fixed(g) => {
                if !(g >= 0.0) || !g.is_finite() {
                    return Err(Error::Config(format!("gamma must be finite and ≥ 0, got {g}")));
                }
                (S::of(g), false, Vec::new())
            }
            GammaChoice::Auto => resolve_auto_gamma(problem, &config, rho)?,
        };
        let momentum = match config.variant {
            Variant::Nesterov => {
                let l = problem.lambda_max_raw() + problem.reg.lambda;
                let sl = l.sqrt();
                let sm = problem.reg.lambda.sqrt();
                (sl - sm) / (sl + sm)
            }
            _ => S::zero(),
        };
        let admm = match config.variant {
            Variant::Admm => Some(baselines::AdmmWork::build(problem, S::of(rho))?),
            _ => None,
        };
        let state = init_state(problem, config.variant);
        Ok(Self {
            problem,
            config,
            state,
            ledger: TrafficLedger::default(),
            gamma,
            gamma_auto,
            constants,
            rho: S::of(rho),
            momentum,
            admm,
        })
    }

    /// Read access to the raw iterate lanes.
    pub fn state(&self) -> &IterateState<S> {
        &self.state
    }

    /// Write access to the raw iterate lanes, for warm starts and probes.
    pub fn state_mut(&mut self) -> &mut IterateState<S> {
        &mut self.state
    }

    /// The traffic and flop counters accumulated so far.
    pub fn ledger(&self) -> &TrafficLedger {
        &self.ledger
    }

    /// The step size in force (resolved if the config said `Auto`).
    pub fn gamma(&self) -> S {
        self.gamma
    }

    /// The penalty weight in force.
    pub fn rho(&self) -> S {
        self.rho
    }

    /// Advances one synchronized round and applies the divergence guard.
    pub fn step(&mut self) -> Result<()> {
        let pr = self.problem;
        let st = &mut self.state;
        let led = &mut self.ledger;
        let gamma = self.gamma;
        let seed = self.config.master_seed;
        match self.config.variant {
            Variant::EgBasic => extragradient::basic(pr, st, gamma, led)?,
            Variant::EgProx => extragradient::proximal(pr, st, gamma, led)?,
            Variant::EgNoise => extragradient::noisy(pr, st, gamma, &self.config.noise, seed, led)?,
            Variant::EgEncrypted => extragradient::encrypted(pr, st, gamma, &self.config.scheme, led)?,
            Variant::EgBlockwise => extragradient::per_block(pr, st, gamma, led)?,
            Variant::EgAugmented => extragradient::augmented(pr, st, gamma, self.rho, led)?,
            Variant::EgDual => extragradient::dual(pr, st, gamma, led)?,
            Variant::EgNonconvex => {
                let gain_gamma = self.config.gain_gamma.map(S::of).unwrap_or(gamma);
                extragradient::adaptive_gains(pr, st, gamma, gain_gamma, led)?
            }
            Variant::EgCompressUnbiased => reference::compressed(
                pr,
                st,
                gamma,
                self.config.p,
                &self.config.compressor,
                false,
                seed,
                led,
            )?,
            Variant::EgCompressBiased => reference::compressed(
                pr,
                st,
                gamma,
                self.config.p,
                &self.config.compressor,
                true,
                seed,
                led,
            )?,
            Variant::EgPartial => {
                reference::partial_participation(pr, st, gamma, self.config.p, seed, led)?
            }
            Variant::EgCoord => {
                reference::coordinate_sketch(pr, st, gamma, self.config.p, seed, led)?
            }
            Variant::Gd => baselines::gradient_descent(pr, st, gamma, led)?,
            Variant::Nesterov => baselines::accelerated(pr, st, gamma, self.momentum, led)?,
            Variant::Admm => baselines::alternating_direction(
                pr,
                st,
                self.admm.as_ref().expect("built at construction"),
                self.config.generic_subsolver,
                S::of(self.config.subsolver_tol),
                led,
            )?,
            Variant::DualGd => baselines::dual_ascent(pr, st, gamma, led)?,
        }
        self.guard()
    }

    fn guard(&self) -> Result<()> {
        if self.state.any_non_finite() {
            return Err(Error::Divergence {
                iter: self.state.k as usize,
                msg: "iterate went non-finite".into(),
            });
        }
        let m = self.state.max_abs();
        if m > S::of(DIVERGENCE_GUARD) {
            return Err(Error::Divergence {
                iter: self.state.k as usize,
                msg: format!("iterate max-norm reached {m:e}"),
            });
        }
        Ok(())
    }

    /// Current iterates mapped back to the unscaled problem: primal blocks,
    /// the consensus point the variant implies, and the multiplier.
    pub fn original_iterates(&self) -> Result<(Vec<Vector<S>>, Vector<S>, Vector<S>)> {
        self.map_iterates(
            &self.state.x_blocks,
            &self.state.z,
            &self.state.y,
            &self.state.z_blocks,
            &self.state.y_blocks,
        )
    }

    /// Averaged iterates mapped back to the unscaled problem.
    pub fn averaged_original_iterates(&self) -> Result<(Vec<Vector<S>>, Vector<S>, Vector<S>)> {
        let xs = self.state.averaged_x();
        let zb = self.state.averaged_z_blocks();
        let yb = self.state.averaged_y_blocks();
        self.map_iterates(&xs, &self.state.averaged_z(), &self.state.averaged_y(), &zb, &yb)
    }

    fn map_iterates(
        &self,
        xs: &[Vector<S>],
        z: &Vector<S>,
        y: &Vector<S>,
        z_blocks: &[Vector<S>],
        y_blocks: &[Vector<S>],
    ) -> Result<(Vec<Vector<S>>, Vector<S>, Vector<S>)> {
        let beta = self.problem.beta;
        let inv = S::one() / beta;
        let res = match self.config.variant {
            Variant::Gd | Variant::Nesterov => {
                let z = self.problem.dataset.apply_blocks(xs)?;
                let y = self.problem.loss.grad(&z)?;
                (xs.to_vec(), z, y)
            }
            Variant::Admm => (xs.to_vec(), z.clone(), y.clone()),
            Variant::DualGd => {
                let z = self.problem.dataset.apply_blocks(xs)?;
                (xs.to_vec(), z, y.clone())
            }
            Variant::EgDual => {
                let z = self.problem.dataset.apply_blocks(xs)?;
                (xs.to_vec(), z, y.scale(beta))
            }
            Variant::EgBlockwise => {
                let s = self.problem.dataset.sample_count;
                let mut zsum = Vector::zeros(s);
                for zi in z_blocks {
                    zsum.add_assign_vec(zi);
                }
                let mut ysum = Vector::zeros(s);
                for yi in y_blocks {
                    ysum.add_assign_vec(yi);
                }
                let n = S::of_usize(z_blocks.len().max(1));
                (xs.to_vec(), zsum.scale(inv), ysum.scale(beta / n))
            }
            _ => (xs.to_vec(), z.scale(inv), y.scale(beta)),
        };
        Ok(res)
    }

    /// Constraint residual in the variant's own formulation, unscaled space.
    /// The per-block variant measures against the consensus slices handed
    /// in, so averaged and last-iterate reporting stay consistent.
    fn violation(&self, xs: &[Vector<S>], z: &Vector<S>, z_blocks: &[Vector<S>]) -> Result<S> {
        let inv = S::one() / self.problem.beta;
        match self.config.variant {
            Variant::EgBlockwise => {
                let mut total = S::zero();
                for (i, x) in xs.iter().enumerate() {
                    let ax = self.problem.dataset.blocks[i].matvec(x)?;
                    let zi = z_blocks[i].scale(inv);
                    total += ax.sub(&zi).norm_sq();
                }
                Ok(total.sqrt())
            }
            Variant::EgNonconvex => {
                let s = self.problem.dataset.sample_count;
                let mut sum = Vector::zeros(s);
                for (i, x) in xs.iter().enumerate() {
                    let ax = self.problem.dataset.blocks[i].matvec(x)?;
                    sum.add_assign_vec(&ax.scale(self.state.gains[i]));
                }
                Ok(sum.sub(z).norm())
            }
            _ => {
                let ax = self.problem.dataset.apply_blocks(xs)?;
                Ok(ax.sub(z).norm())
            }
        }
    }

    fn metric_row(&self, oracle: Option<&OracleSolution<S>>) -> Result<RunRow> {
        let averaged = self.config.averaged_metrics;
        let (xs, z, y) = if averaged {
            self.averaged_original_iterates()?
        } else {
            self.original_iterates()?
        };
        let z_blocks = if self.config.variant == Variant::EgBlockwise && averaged {
            self.state.averaged_z_blocks()
        } else {
            self.state.z_blocks.clone()
        };
        let violation = self.violation(&xs, &z, &z_blocks)?.as_f64();
        let comparable = self.config.variant != Variant::EgNonconvex;
        let (subopt, gapstar, ng) = match oracle {
            Some(o) if comparable => {
                let so = match f_rel_subopt(self.problem, o, &xs) {
                    Ok(v) => v.as_f64(),
                    Err(Error::Degenerate(_)) => f64::NAN,
                    Err(e) => return Err(e),
                };
                let gs = gap_star(self.problem, o, &xs, &z, &y)?.as_f64();
                let ngv = newgap(self.problem, o, &xs, &z, o.newgap_weight())?.as_f64();
                (so, gs, ngv)
            }
            _ => (f64::NAN, f64::NAN, f64::NAN),
        };
        Ok(RunRow {
            iter: self.state.k,
            up: self.ledger.scalars_up,
            down: self.ledger.scalars_down,
            flops: self.ledger.flops,
            subopt,
            violation,
            gapstar,
            newgap: ng,
        })
    }

    fn build_meta(&self) -> RunMeta {
        let cfg = &self.config;
        let v = cfg.variant;
        let anchored = matches!(
            v,
            Variant::EgCompressUnbiased
                | Variant::EgCompressBiased
                | Variant::EgPartial
                | Variant::EgCoord
        );
        let compressed = matches!(v, Variant::EgCompressUnbiased | Variant::EgCompressBiased);
        RunMeta {
            solver: v.label().into(),
            gamma: self.gamma.as_f64(),
            gamma_auto: self.gamma_auto,
            constants: self.constants.clone(),
            master_seed: cfg.master_seed,
            iterations: cfg.iterations,
            report_every: cfg.report_every,
            n_clients: self.problem.dataset.n_clients(),
            sample_count: self.problem.dataset.sample_count,
            features: self.problem.dataset.total_features(),
            beta: self.problem.beta.as_f64(),
            reg: reg_label(self.problem.reg.kind).into(),
            reg_lambda: self.problem.reg.lambda.as_f64(),
            lr_convention: convention_label(self.problem.lr_convention).into(),
            lambda_max_mode: mode_label(self.problem).into(),
            lambda_max: self.problem.lambda_max_raw().as_f64(),
            p: anchored.then_some(cfg.p),
            rho: matches!(v, Variant::EgAugmented | Variant::Admm).then(|| self.rho.as_f64()),
            sigma: matches!(v, Variant::EgNoise).then_some(cfg.noise.sigma),
            compressor: compressed.then(|| compressor_label(cfg.compressor.kind).into()),
            k_fraction: compressed.then_some(cfg.compressor.k_fraction),
            rng_mode: (compressed || v == Variant::EgCoord)
                .then(|| rng_mode_label(cfg.compressor.rng_mode).into()),
            scheme: matches!(v, Variant::EgEncrypted).then(|| scheme_label(&cfg.scheme).into()),
            status: "completed".into(),
            divergence_iter: None,
            scalars_up_total: self.ledger.scalars_up,
            scalars_down_total: self.ledger.scalars_down,
            full_sync_rounds: self.ledger.full_sync_rounds,
            flops_total: self.ledger.flops,
            extra: serde_json::Map::new(),
        }
    }

    fn finish(self, rows: Vec<RunRow>) -> Result<RunRecord<S>> {
        let (final_x, final_z, final_y) = self.original_iterates()?;
        let meta = self.build_meta();
        let averaged_x = Some(self.state.averaged_x());
        Ok(RunRecord { rows, meta, final_x, final_z, final_y, averaged_x })
    }
}

fn resolve_rho<S: Real>(problem: &ProblemSpec<S>, config: &SolverConfig<S>) -> Result<f64> {
    match (config.variant, config.rho) {
        (_, Some(r)) => Ok(r),
        (Variant::Admm, None) => {
            let lm = problem.lambda_max_raw().as_f64();
            if !(lm > 0.0) {
                return Err(Error::Degenerate(
                    "penalty rule 1/√λmax needs a nonzero spectrum".into(),
                ));
            }
            Ok(1.0 / lm.sqrt())
        }
        (_, None) => Ok(0.0),
    }
}

fn resolve_auto_gamma<S: Real>(
    problem: &ProblemSpec<S>,
    config: &SolverConfig<S>,
    rho: f64,
) -> Result<(S, bool, Vec<(String, f64)>)> {
    let s_len = problem.dataset.sample_count;
    let independent = Some(config.compressor.rng_mode == RngMode::Independent);
    let (variant, inputs) = match config.variant {
        Variant::EgBasic | Variant::EgEncrypted | Variant::EgNonconvex => {
            (StepVariant::Basic, StepInputs::default())
        }
        Variant::EgProx => (StepVariant::Prox, StepInputs::default()),
        Variant::EgBlockwise => (StepVariant::Blockwise, StepInputs::default()),
        Variant::EgDual => (StepVariant::Dual, StepInputs::default()),
        Variant::EgNoise => (
            StepVariant::Noise,
            StepInputs {
                sigma: Some(config.noise.sigma),
                horizon: Some(config.iterations.max(1)),
                d_radius_sq: config.d_radius_sq,
                ..StepInputs::default()
            },
        ),
        Variant::EgAugmented => {
            (StepVariant::Augmented, StepInputs { rho: Some(rho), ..StepInputs::default() })
        }
        Variant::EgCompressUnbiased => (
            StepVariant::CompressUnbiased,
            StepInputs {
                p: Some(config.p),
                omega: Some(config.compressor.omega(s_len)),
                independent_seed: independent,
                ..StepInputs::default()
            },
        ),
        Variant::EgCompressBiased => (
            StepVariant::CompressBiased,
            StepInputs {
                p: Some(config.p),
                delta: Some(config.compressor.delta(s_len)),
                omega: Some(config.compressor.omega(s_len)),
                ..StepInputs::default()
            },
        ),
        Variant::EgPartial => {
            (StepVariant::Partial, StepInputs { p: Some(config.p), ..StepInputs::default() })
        }
        Variant::EgCoord => (
            StepVariant::Coord,
            StepInputs {
                p: Some(config.p),
                independent_seed: independent,
                ..StepInputs::default()
            },
        ),
        Variant::Gd | Variant::Nesterov => {
            let lm = problem.lambda_max_raw();
            let l = lm + problem.reg.lambda;
            let constants = vec![
                ("l_smooth".to_string(), l.as_f64()),
                ("lambda_max".to_string(), lm.as_f64()),
                ("reg_lambda".to_string(), problem.reg.lambda.as_f64()),
            ];
            return Ok((S::one() / l, true, constants));
        }
        Variant::Admm => {
            return Ok((S::one(), true, vec![("rho".to_string(), rho)]));
        }
        Variant::DualGd => {
            let lm = problem.lambda_max_raw();
            let two_lambda = S::of(2.0) * problem.reg.lambda;
            let l_dual = S::one() + lm / two_lambda;
            let constants = vec![
                ("l_dual".to_string(), l_dual.as_f64()),
                ("lambda_max".to_string(), lm.as_f64()),
                ("reg_lambda".to_string(), problem.reg.lambda.as_f64()),
            ];
            return Ok((S::one() / l_dual, true, constants));
        }
    };
    let rule = problem.step_size(variant, &inputs)?;
    Ok((rule.gamma, true, rule.constants))
}

fn init_state<S: Real>(problem: &ProblemSpec<S>, variant: Variant) -> IterateState<S> {
    let widths = &problem.dataset.feature_counts;
    let s = problem.dataset.sample_count;
    let (z_len, y_len) = match variant {
        Variant::EgDual | Variant::DualGd => (0, s),
        Variant::Gd | Variant::Nesterov | Variant::EgBlockwise => (0, 0),
        _ => (s, s),
    };
    IterateState::zeros(
        widths,
        s,
        z_len,
        y_len,
        matches!(
            variant,
            Variant::EgCompressUnbiased
                | Variant::EgCompressBiased
                | Variant::EgPartial
                | Variant::EgCoord
        ),
        matches!(variant, Variant::EgCompressBiased),
        matches!(variant, Variant::EgBlockwise),
        matches!(variant, Variant::EgNonconvex),
        matches!(variant, Variant::Nesterov),
    )
}

fn reg_label(kind: RegKind) -> &'static str {
    match kind {
        RegKind::Ridge => "ridge",
        RegKind::L1 => "l1",
        RegKind::None => "none",
    }
}

fn convention_label(c: LrConvention) -> &'static str {
    match c {
        LrConvention::DoubleLambda => "double_lambda",
        LrConvention::SingleLambda => "single_lambda",
    }
}

fn mode_label<S: Real>(problem: &ProblemSpec<S>) -> &'static str {
    match problem.lambda_max_mode {
        crate::problem::LambdaMaxMode::Exact => "exact",
        crate::problem::LambdaMaxMode::BlockBound => "block_bound",
    }
}

fn compressor_label(kind: CompressorKind) -> &'static str {
    match kind {
        CompressorKind::Identity => "identity",
        CompressorKind::RandK => "randk",
        CompressorKind::TopK => "topk",
    }
}

fn rng_mode_label(mode: RngMode) -> &'static str {
    match mode {
        RngMode::SharedSeed => "shared_seed",
        RngMode::Independent => "independent",
    }
}

fn scheme_label<S>(scheme: &EncryptionScheme<S>) -> &'static str {
    match scheme {
        EncryptionScheme::Plaintext => "plaintext",
        EncryptionScheme::ScaledMask { .. } => "scaled_mask",
    }
}

/// Runs `config` against `problem`, solving the reference system first when
/// the regularizer admits one so rows carry suboptimality and gap columns.
pub fn run<S: Real>(config: &SolverConfig<S>, problem: &ProblemSpec<S>) -> Result<RunRecord<S>> {
    let oracle = match problem.reg.kind {
        RegKind::L1 => None,
        _ => match solve_ridge_oracle(problem) {
            Ok(o) => Some(o),
            Err(Error::SingularOracle(_)) => None,
            Err(e) => return Err(e),
        },
    };
    run_with_oracle(config, problem, oracle.as_ref())
}

/// Runs `config` against `problem` with a caller-provided reference solution
/// (pass `None` to skip the oracle-based columns).
pub fn run_with_oracle<S: Real>(
    config: &SolverConfig<S>,
    problem: &ProblemSpec<S>,
    oracle: Option<&OracleSolution<S>>,
) -> Result<RunRecord<S>> {
    let mut solver = Solver::new(problem, config.clone())?;
    let mut rows = vec![solver.metric_row(oracle)?];
    let mut last_sampled = 0u64;
    for k in 0..config.iterations {
        solver.step()?;
        let it = k + 1;
        if (it % config.report_every == 0 || it == config.iterations) && last_sampled != it {
            rows.push(solver.metric_row(oracle)?);
            last_sampled = it;
        }
    }
    solver.finish(rows)
}

/// Like [`run_with_oracle`], but a divergence abort yields a record instead
/// of an error: the rows sampled before the blow-up are kept and the
/// metadata carries `status = "diverged"` with the offending iteration.
/// Every other error still propagates.
pub fn run_surviving_divergence<S: Real>(
    config: &SolverConfig<S>,
    problem: &ProblemSpec<S>,
    oracle: Option<&OracleSolution<S>>,
) -> Result<RunRecord<S>> {
    let mut solver = Solver::new(problem, config.clone())?;
    let mut rows = vec![solver.metric_row(oracle)?];
    let mut last_sampled = 0u64;
    let mut blew_up_at = None;
    for k in 0..config.iterations {
        match solver.step() {
            Ok(()) => {}
            Err(Error::Divergence { iter, .. }) => {
                blew_up_at = Some(iter as u64);
                break;
            }
            Err(e) => return Err(e),
        }
        let it = k + 1;
        if (it % config.report_every == 0 || it == config.iterations) && last_sampled != it {
            rows.push(solver.metric_row(oracle)?);
            last_sampled = it;
        }
    }
    let mut record = solver.finish(rows)?;
    if let Some(iter) = blew_up_at {
        record.meta.status = "diverged".into();
        record.meta.divergence_iter = Some(iter);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{partition_vertical, synth_regression};
    use crate::linalg::DenseMatrix;
    use crate::problem::RegSpec;
    use approx::assert_abs_diff_eq;

    fn scalar_problem() -> ProblemSpec<f64> {
        let a = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        let b = Vector::new(vec![1.0]).unwrap();
        let ds = partition_vertical(&a, &b, 1, 1, false).unwrap();
        ProblemSpec::new(ds, RegSpec::none()).unwrap()
    }

    fn small_problem(n: usize, reg: RegSpec<f64>, seed: u64) -> ProblemSpec<f64> {
        let (a, b) = synth_regression::<f64>(12, 6, 50.0, 0.05, seed).unwrap();
        let ds = partition_vertical(&a, &b, n, seed, false).unwrap();
        ProblemSpec::new(ds, reg).unwrap()
    }

    fn fixed(variant: Variant, gamma: f64) -> SolverConfig<f64> {
        let mut c = SolverConfig::new(variant);
        c.gamma = GammaChoice::Fixed(gamma);
        c
    }

    fn assert_state_eq(a: &Solver<'_, f64>, b: &Solver<'_, f64>) {
        for (xa, xb) in a.state.x_blocks.iter().zip(&b.state.x_blocks) {
            assert_eq!(xa.as_slice(), xb.as_slice());
        }
        assert_eq!(a.state.z.as_slice(), b.state.z.as_slice());
        assert_eq!(a.state.y.as_slice(), b.state.y.as_slice());
    }

    #[test]
    fn plain_update_matches_hand_trace() {
        let pr = scalar_problem();
        let mut solver = Solver::new(&pr, fixed(Variant::EgBasic, 0.5)).unwrap();
        solver.step().unwrap();
        assert_eq!(solver.state.half_x[0].as_slice(), &[0.0]);
        assert_eq!(solver.state.half_z.as_slice(), &[0.5]);
        assert_eq!(solver.state.half_y.as_slice(), &[0.0]);
        assert_eq!(solver.state.x_blocks[0].as_slice(), &[0.0]);
        assert_eq!(solver.state.z.as_slice(), &[0.25]);
        assert_eq!(solver.state.y.as_slice(), &[-0.25]);
        solver.step().unwrap();
        assert_eq!(solver.state.x_blocks[0].as_slice(), &[0.1875]);
        assert_eq!(solver.state.z.as_slice(), &[0.3125]);
        assert_eq!(solver.state.y.as_slice(), &[-0.4375]);
    }

    #[test]
    fn zero_step_leaves_iterates_in_place() {
        for variant in [Variant::EgBasic, Variant::EgProx] {
            let pr = small_problem(2, RegSpec::ridge(0.05).unwrap(), 3);
            let mut cfg = fixed(variant, 0.0);
            cfg.iterations = 3;
            let rec = run(&cfg, &pr).unwrap();
            for x in &rec.final_x {
                assert!(x.iter().all(|&v| v == 0.0));
            }
            assert!(rec.final_z.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zero_penalty_retraces_the_plain_update() {
        let pr = small_problem(3, RegSpec::ridge(0.05).unwrap(), 7);
        let mut plain = Solver::new(&pr, fixed(Variant::EgBasic, 0.05)).unwrap();
        let mut cfg = fixed(Variant::EgAugmented, 0.05);
        cfg.rho = Some(0.0);
        let mut aug = Solver::new(&pr, cfg).unwrap();
        for _ in 0..25 {
            plain.step().unwrap();
            aug.step().unwrap();
        }
        assert_state_eq(&plain, &aug);
        assert_eq!(plain.ledger().scalars_up, aug.ledger().scalars_up);
        assert_eq!(plain.ledger().scalars_down, aug.ledger().scalars_down);
        assert_eq!(plain.ledger().flops, aug.ledger().flops);
    }

    #[test]
    fn silent_noise_retraces_the_plain_update() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 11);
        let mut plain = Solver::new(&pr, fixed(Variant::EgBasic, 0.04)).unwrap();
        let mut noisy = Solver::new(&pr, fixed(Variant::EgNoise, 0.04)).unwrap();
        for _ in 0..25 {
            plain.step().unwrap();
            noisy.step().unwrap();
        }
        assert_state_eq(&plain, &noisy);
    }

    #[test]
    fn plaintext_encoding_retraces_the_plain_update() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 13);
        let mut plain = Solver::new(&pr, fixed(Variant::EgBasic, 0.04)).unwrap();
        let mut enc = Solver::new(&pr, fixed(Variant::EgEncrypted, 0.04)).unwrap();
        for _ in 0..25 {
            plain.step().unwrap();
            enc.step().unwrap();
        }
        assert_state_eq(&plain, &enc);
    }

    #[test]
    fn masked_encoding_stays_close_to_the_plain_update() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 13);
        let mut plain = Solver::new(&pr, fixed(Variant::EgBasic, 0.04)).unwrap();
        let mut cfg = fixed(Variant::EgEncrypted, 0.04);
        cfg.scheme = EncryptionScheme::default_mask();
        let mut enc = Solver::new(&pr, cfg).unwrap();
        for _ in 0..25 {
            plain.step().unwrap();
            enc.step().unwrap();
        }
        for (xa, xb) in plain.state.x_blocks.iter().zip(&enc.state.x_blocks) {
            for (a, b) in xa.iter().zip(xb.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn single_client_block_splitting_retraces_the_plain_update() {
        let pr = small_problem(1, RegSpec::ridge(0.02).unwrap(), 17);
        let mut plain = Solver::new(&pr, fixed(Variant::EgBasic, 0.04)).unwrap();
        let mut blocks = Solver::new(&pr, fixed(Variant::EgBlockwise, 0.04)).unwrap();
        for _ in 0..25 {
            plain.step().unwrap();
            blocks.step().unwrap();
        }
        for (xa, xb) in plain.state.x_blocks.iter().zip(&blocks.state.x_blocks) {
            assert_eq!(xa.as_slice(), xb.as_slice());
        }
        assert_eq!(plain.state.z.as_slice(), blocks.state.z_blocks[0].as_slice());
        assert_eq!(plain.state.y.as_slice(), blocks.state.y_blocks[0].as_slice());
    }

    #[test]
    fn identity_feedback_retraces_the_unbiased_path_with_zero_residuals() {
        let pr = small_problem(3, RegSpec::ridge(0.02).unwrap(), 19);
        let mut cfg_u = fixed(Variant::EgCompressUnbiased, 0.03);
        cfg_u.p = 0.35;
        cfg_u.master_seed = 5;
        let mut cfg_b = fixed(Variant::EgCompressBiased, 0.03);
        cfg_b.p = 0.35;
        cfg_b.master_seed = 5;
        let mut unbiased = Solver::new(&pr, cfg_u).unwrap();
        let mut biased = Solver::new(&pr, cfg_b).unwrap();
        for _ in 0..30 {
            unbiased.step().unwrap();
            biased.step().unwrap();
        }
        assert_state_eq(&unbiased, &biased);
        assert_eq!(biased.state.errors.max_abs(), 0.0);
    }

    #[test]
    fn frozen_gains_retrace_the_plain_update() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 23);
        let mut plain = Solver::new(&pr, fixed(Variant::EgBasic, 0.04)).unwrap();
        let mut cfg = fixed(Variant::EgNonconvex, 0.04);
        cfg.gain_gamma = Some(0.0);
        let mut gains = Solver::new(&pr, cfg).unwrap();
        for _ in 0..25 {
            plain.step().unwrap();
            gains.step().unwrap();
        }
        assert_state_eq(&plain, &gains);
        assert!(gains.state.gains.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn single_client_participation_matches_identity_compression() {
        let pr = small_problem(1, RegSpec::ridge(0.02).unwrap(), 29);
        let mut cfg_c = fixed(Variant::EgCompressUnbiased, 0.03);
        cfg_c.p = 0.4;
        cfg_c.master_seed = 9;
        let mut cfg_p = fixed(Variant::EgPartial, 0.03);
        cfg_p.p = 0.4;
        cfg_p.master_seed = 9;
        let mut comp = Solver::new(&pr, cfg_c).unwrap();
        let mut part = Solver::new(&pr, cfg_p).unwrap();
        for _ in 0..40 {
            comp.step().unwrap();
            part.step().unwrap();
        }
        for (xa, xb) in comp.state.x_blocks.iter().zip(&part.state.x_blocks) {
            for (a, b) in xa.iter().zip(xb.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
        for (a, b) in comp.state.y.iter().zip(part.state.y.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_coordinate_sketch_matches_identity_compression() {
        let pr = scalar_problem();
        let mut cfg_c = fixed(Variant::EgCompressUnbiased, 0.3);
        cfg_c.p = 0.3;
        cfg_c.master_seed = 4;
        let mut cfg_k = fixed(Variant::EgCoord, 0.3);
        cfg_k.p = 0.3;
        cfg_k.master_seed = 4;
        let mut comp = Solver::new(&pr, cfg_c).unwrap();
        let mut coord = Solver::new(&pr, cfg_k).unwrap();
        for _ in 0..30 {
            comp.step().unwrap();
            coord.step().unwrap();
        }
        assert_state_eq(&comp, &coord);
    }

    #[test]
    fn certain_coin_refreshes_every_round() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 31);
        let mut cfg = fixed(Variant::EgCompressUnbiased, 0.02);
        cfg.p = 1.0;
        cfg.compressor = Compressor::new(CompressorKind::RandK, 0.5, RngMode::SharedSeed).unwrap();
        cfg.iterations = 17;
        let rec = run(&cfg, &pr).unwrap();
        assert_eq!(rec.meta.full_sync_rounds, 17);
    }

    #[test]
    fn heavier_penalty_shrinks_the_automatic_step() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 37);
        let mut mild = SolverConfig::<f64>::new(Variant::EgAugmented);
        mild.rho = Some(0.0);
        let mut heavy = SolverConfig::<f64>::new(Variant::EgAugmented);
        heavy.rho = Some(100.0 * pr.lambda_max_raw());
        let g_mild = Solver::new(&pr, mild).unwrap().gamma();
        let g_heavy = Solver::new(&pr, heavy).unwrap().gamma();
        assert!(g_heavy < g_mild);
    }

    #[test]
    fn dual_run_reports_the_applied_consensus() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 41);
        let mut cfg = SolverConfig::<f64>::new(Variant::EgDual);
        cfg.iterations = 30;
        let rec = run(&cfg, &pr).unwrap();
        let applied = pr.dataset.apply_blocks(&rec.final_x).unwrap();
        assert_eq!(rec.final_z.as_slice(), applied.as_slice());
    }

    #[test]
    fn dual_ascent_increases_the_dual_value() {
        let pr = small_problem(2, RegSpec::ridge(0.05).unwrap(), 43);
        let cfg = SolverConfig::<f64>::new(Variant::DualGd);
        let mut solver = Solver::new(&pr, cfg).unwrap();
        let mut last = ridge_dual_value(&pr, &solver.state.y).unwrap();
        for _ in 0..50 {
            solver.step().unwrap();
            let next = ridge_dual_value(&pr, &solver.state.y).unwrap();
            assert!(next >= last - 1e-12, "dual value fell from {last} to {next}");
            last = next;
        }
    }

    #[test]
    fn descent_on_the_identity_solves_in_one_step() {
        let a = DenseMatrix::<f64>::identity(2);
        let b = Vector::new(vec![3.0, -2.0]).unwrap();
        let ds = partition_vertical(&a, &b, 1, 1, false).unwrap();
        let pr = ProblemSpec::new(ds, RegSpec::none()).unwrap();
        let mut cfg = SolverConfig::<f64>::new(Variant::Gd);
        cfg.iterations = 1;
        let rec = run(&cfg, &pr).unwrap();
        assert_abs_diff_eq!(rec.final_x[0].as_slice()[0], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rec.final_x[0].as_slice()[1], -2.0, epsilon = 1e-9);
    }

    #[test]
    fn momentum_beats_plain_descent() {
        let (a, b) = synth_regression::<f64>(40, 20, 1e3, 0.05, 2).unwrap();
        let ds = partition_vertical(&a, &b, 4, 2, false).unwrap();
        let probe = ProblemSpec::new(ds.clone(), RegSpec::none()).unwrap();
        let lam = probe.lambda_max_raw() / 1e3;
        let pr = ProblemSpec::new(ds, RegSpec::ridge(lam).unwrap()).unwrap();
        let mut cfg_g = SolverConfig::<f64>::new(Variant::Gd);
        cfg_g.iterations = 300;
        cfg_g.report_every = 300;
        let mut cfg_n = SolverConfig::<f64>::new(Variant::Nesterov);
        cfg_n.iterations = 300;
        cfg_n.report_every = 300;
        let slow = run(&cfg_g, &pr).unwrap();
        let fast = run(&cfg_n, &pr).unwrap();
        let s_last = slow.rows.last().unwrap().subopt;
        let f_last = fast.rows.last().unwrap().subopt;
        assert!(f_last < s_last, "momentum {f_last} vs descent {s_last}");
    }

    #[test]
    fn alternating_direction_reaches_stationarity() {
        let pr = small_problem(3, RegSpec::ridge(0.05).unwrap(), 47);
        let mut cfg = SolverConfig::<f64>::new(Variant::Admm);
        cfg.iterations = 400;
        cfg.report_every = 400;
        let rec = run(&cfg, &pr).unwrap();
        let ax = pr.dataset.apply_blocks(&rec.final_x).unwrap();
        let primal = ax.sub(&rec.final_z).norm_inf();
        let dual_link = rec.final_y.sub(&pr.loss.grad(&rec.final_z).unwrap()).norm_inf();
        assert!(primal < 1e-8, "primal residual {primal}");
        assert!(dual_link < 1e-8, "multiplier residual {dual_link}");
        for (i, x) in rec.final_x.iter().enumerate() {
            let aty = pr.dataset.blocks[i].matvec_t(&rec.final_y).unwrap();
            let stat = aty.add(&pr.reg.grad(x).unwrap()).norm_inf();
            assert!(stat < 1e-8, "client {i} stationarity {stat}");
        }
    }

    #[test]
    fn iterative_subsolver_matches_the_closed_form() {
        let pr = small_problem(2, RegSpec::ridge(0.05).unwrap(), 53);
        let mut direct = SolverConfig::<f64>::new(Variant::Admm);
        direct.iterations = 10;
        let mut inner = direct.clone();
        inner.generic_subsolver = true;
        let d = run(&direct, &pr).unwrap();
        let i = run(&inner, &pr).unwrap();
        for (xa, xb) in d.final_x.iter().zip(&i.final_x) {
            for (a, b) in xa.iter().zip(xb.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn running_averages_replicate_external_sums() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 59);
        let mut solver = Solver::new(&pr, fixed(Variant::EgBasic, 0.04)).unwrap();
        let widths = pr.dataset.feature_counts.clone();
        let mut sums: Vec<Vector<f64>> = widths.iter().map(|&w| Vector::zeros(w)).collect();
        for _ in 0..7 {
            solver.step().unwrap();
            for (sum, half) in sums.iter_mut().zip(&solver.state.half_x) {
                sum.add_assign_vec(half);
            }
        }
        let external: Vec<Vector<f64>> = sums.iter().map(|s| s.scale(1.0 / 7.0)).collect();
        for (a, b) in solver.state.averaged_x().iter().zip(&external) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn zero_iteration_run_reports_the_start() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 61);
        let mut cfg = SolverConfig::<f64>::new(Variant::EgBasic);
        cfg.iterations = 0;
        let rec = run(&cfg, &pr).unwrap();
        assert_eq!(rec.rows.len(), 1);
        assert_eq!(rec.rows[0].iter, 0);
        assert_eq!(rec.rows[0].up, 0);
        assert_eq!(rec.rows[0].subopt, 1.0);
        assert_eq!(rec.rows[0].violation, 0.0);
    }

    #[test]
    fn stochastic_reruns_are_bit_identical() {
        let pr = small_problem(3, RegSpec::ridge(0.02).unwrap(), 67);
        let mut cfg = SolverConfig::<f64>::new(Variant::EgCompressUnbiased);
        cfg.compressor = Compressor::new(CompressorKind::RandK, 0.25, RngMode::SharedSeed).unwrap();
        cfg.p = 0.2;
        cfg.iterations = 40;
        cfg.master_seed = 77;
        let first = run(&cfg, &pr).unwrap();
        let second = run(&cfg, &pr).unwrap();
        for (ra, rb) in first.rows.iter().zip(&second.rows) {
            assert_eq!(ra.subopt.to_bits(), rb.subopt.to_bits());
            assert_eq!(ra.violation.to_bits(), rb.violation.to_bits());
            assert_eq!(ra.up, rb.up);
        }
        for (xa, xb) in first.final_x.iter().zip(&second.final_x) {
            assert_eq!(xa.as_slice(), xb.as_slice());
        }
    }

    #[test]
    fn oversized_steps_are_reported_as_divergence() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 71);
        let mut cfg = fixed(Variant::EgBasic, 1e3);
        cfg.iterations = 10_000;
        match run(&cfg, &pr) {
            Err(Error::Divergence { iter, .. }) => assert!(iter > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 73);
        let mut bad_p = SolverConfig::<f64>::new(Variant::EgPartial);
        bad_p.p = 0.0;
        assert!(matches!(Solver::new(&pr, bad_p), Err(Error::Config(_))));

        let mut biased_comp = SolverConfig::<f64>::new(Variant::EgCompressUnbiased);
        biased_comp.compressor = Compressor::new(CompressorKind::TopK, 0.25, RngMode::SharedSeed).unwrap();
        assert!(matches!(Solver::new(&pr, biased_comp), Err(Error::Config(_))));

        let mut no_report = SolverConfig::<f64>::new(Variant::EgBasic);
        no_report.report_every = 0;
        assert!(matches!(Solver::new(&pr, no_report), Err(Error::Config(_))));

        assert!(matches!(
            Solver::new(&pr, fixed(Variant::EgBasic, -1.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            Solver::new(&pr, fixed(Variant::EgBasic, f64::NAN)),
            Err(Error::Config(_))
        ));

        let plain = small_problem(2, RegSpec::none(), 73);
        let cfg = SolverConfig::<f64>::new(Variant::DualGd);
        assert!(matches!(Solver::new(&plain, cfg), Err(Error::Degenerate(_))));

        let lasso = small_problem(2, RegSpec::l1(0.01).unwrap(), 73);
        let cfg = SolverConfig::<f64>::new(Variant::Admm);
        assert!(matches!(Solver::new(&lasso, cfg), Err(Error::Config(_))));
    }

    #[test]
    fn labels_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.label().parse::<Variant>().unwrap(), v);
        }
        assert!(matches!("sgd".parse::<Variant>(), Err(Error::Config(_))));
        assert!(Variant::EgCoord.is_stochastic());
        assert!(!Variant::EgAugmented.is_stochastic());
    }

    #[test]
    fn plain_update_is_stationary_at_the_saddle() {
        let pr = small_problem(2, RegSpec::ridge(0.05).unwrap(), 79);
        let oracle = solve_ridge_oracle(&pr).unwrap();
        let mut solver = Solver::new(&pr, SolverConfig::new(Variant::EgBasic)).unwrap();
        solver.state.x_blocks = pr.dataset.split_coefficients(&oracle.x_star).unwrap();
        solver.state.z = oracle.z_star.clone();
        solver.state.y = oracle.y_star.clone();
        let x0 = solver.state.x_blocks.clone();
        let z0 = solver.state.z.clone();
        let y0 = solver.state.y.clone();
        solver.step().unwrap();
        let mut moved: f64 = 0.0;
        for (a, b) in solver.state.x_blocks.iter().zip(&x0) {
            moved = moved.max(a.sub(b).norm_inf());
        }
        moved = moved.max(solver.state.z.sub(&z0).norm_inf());
        moved = moved.max(solver.state.y.sub(&y0).norm_inf());
        assert!(moved <= 1e-12, "saddle point moved by {moved}");
    }

    #[test]
    fn automatic_step_matches_the_published_rule() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 83);
        let solver = Solver::new(&pr, SolverConfig::new(Variant::EgBasic)).unwrap();
        let rule = pr.step_size(StepVariant::Basic, &StepInputs::default()).unwrap();
        assert_eq!(solver.gamma(), rule.gamma);
    }

    #[test]
    fn proximal_variant_handles_the_non_smooth_regularizer() {
        let pr = small_problem(2, RegSpec::l1(0.01).unwrap(), 89);
        let mut cfg = SolverConfig::<f64>::new(Variant::EgProx);
        cfg.iterations = 50;
        let rec = run(&cfg, &pr).unwrap();
        let last = rec.rows.last().unwrap();
        assert!(last.subopt.is_nan());
        assert!(last.violation.is_finite());

        let mut plain = SolverConfig::<f64>::new(Variant::EgBasic);
        plain.iterations = 1;
        assert!(matches!(run(&plain, &pr), Err(Error::NonSmooth(_))));
    }

    #[test]
    fn ledger_counts_the_plain_protocol() {
        let pr = small_problem(3, RegSpec::ridge(0.02).unwrap(), 97);
        let mut cfg = SolverConfig::<f64>::new(Variant::EgBasic);
        cfg.iterations = 9;
        let rec = run(&cfg, &pr).unwrap();
        let s = pr.dataset.sample_count as u64;
        let d = pr.dataset.total_features() as u64;
        assert_eq!(rec.meta.scalars_up_total, 2 * 3 * s * 9);
        assert_eq!(rec.meta.scalars_down_total, 2 * s * 9);
        assert_eq!(rec.meta.flops_total, 4 * s * d * 9);
    }

    #[test]
    fn meta_reports_variant_specific_fields() {
        let pr = small_problem(2, RegSpec::ridge(0.02).unwrap(), 101);
        let mut cfg = SolverConfig::<f64>::new(Variant::EgCompressUnbiased);
        cfg.compressor = Compressor::new(CompressorKind::RandK, 0.5, RngMode::SharedSeed).unwrap();
        cfg.iterations = 2;
        let rec = run(&cfg, &pr).unwrap();
        assert_eq!(rec.meta.compressor.as_deref(), Some("randk"));
        assert_eq!(rec.meta.p, Some(1.0));
        assert!(rec.meta.rho.is_none());
        assert!(rec.meta.sigma.is_none());

        let mut cfg = SolverConfig::<f64>::new(Variant::EgNoise);
        cfg.noise = NoiseSpec::new(0.1).unwrap();
        cfg.iterations = 2;
        let rec = run(&cfg, &pr).unwrap();
        assert_eq!(rec.meta.sigma, Some(0.1));
        assert!(rec.meta.compressor.is_none());
    }
}
