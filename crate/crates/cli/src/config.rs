//! Experiment configuration: flat `key = value` lines with `[solver.<name>]`
//! sections, one section per run entry. Global keys must appear before the
//! first section. Every parse error carries `origin:line`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use vfl_saddle::comm::{Compressor, CompressorKind, EncryptionScheme, NoiseSpec, RngMode};
use vfl_saddle::problem::LambdaMaxMode;
use vfl_saddle::solvers::{GammaChoice, SolverConfig, Variant};

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Synthetic { samples: usize, features: usize, cond: f64, noise: f64, amplitude: f64 },
    LibSvm { path: PathBuf, dimension: Option<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaRule {
    /// Ridge strength `λmax(AᵀA)/10³`.
    LmaxOver1e3,
    /// Explicit ridge strength from the `lambda` key.
    Fixed(f64),
}

/// One `[solver.<name>]` section: the variant plus its overrides.
#[derive(Clone, Debug)]
pub struct SolverEntry {
    pub variant: Variant,
    /// Output file stem; defaults to the variant name.
    pub label: String,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub p: Option<f64>,
    pub sigma: Option<f64>,
    pub compressor: Option<CompressorKind>,
    pub ratio: Option<f64>,
    pub rng_mode: RngMode,
    pub masked: bool,
    pub secret: Option<f64>,
    pub beta_trick: bool,
    pub averaged: bool,
}

impl SolverEntry {
    fn new(variant: Variant, beta_default: bool) -> Self {
        Self {
            variant,
            label: variant.label().to_string(),
            gamma: None,
            rho: None,
            p: None,
            sigma: None,
            compressor: None,
            ratio: None,
            rng_mode: RngMode::SharedSeed,
            masked: false,
            secret: None,
            beta_trick: beta_default,
            averaged: false,
        }
    }

    /// Lowers this entry onto the solver configuration for one seed.
    pub fn solver_config(
        &self,
        iterations: u64,
        report_every: u64,
        seed: u64,
    ) -> Result<SolverConfig<f64>> {
        let mut cfg = SolverConfig::new(self.variant);
        cfg.iterations = iterations;
        cfg.report_every = report_every;
        cfg.master_seed = seed;
        cfg.averaged_metrics = self.averaged;
        if let Some(g) = self.gamma {
            cfg.gamma = GammaChoice::Fixed(g);
        }
        cfg.rho = self.rho;
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(sigma) = self.sigma {
            cfg.noise = NoiseSpec::new(sigma)
                .with_context(|| format!("solver {}: bad sigma", self.label))?;
        }
        if let Some(kind) = self.compressor {
            let ratio = self.ratio.unwrap_or(0.1);
            cfg.compressor = Compressor::new(kind, ratio, self.rng_mode)
                .with_context(|| format!("solver {}: bad compressor", self.label))?;
        }
        if self.masked {
            cfg.scheme = match self.secret {
                Some(s) => EncryptionScheme::scaled_mask(s)
                    .with_context(|| format!("solver {}: bad secret", self.label))?,
                None => EncryptionScheme::default_mask(),
            };
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub data_seed: u64,
    pub n_clients: usize,
    pub shuffle: bool,
    pub lambda_rule: LambdaRule,
    pub lambda_max_mode: LambdaMaxMode,
    pub iterations: u64,
    pub report_every: u64,
    pub seeds: Vec<u64>,
    pub outdir: Option<PathBuf>,
    pub solvers: Vec<SolverEntry>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let origin = path.display().to_string();
    let mut cfg = parse_config(&text, &origin)?;
    if let DataSource::LibSvm { path: data, .. } = &mut cfg.data {
        if !data.is_absolute() {
            *data = path.parent().unwrap_or(Path::new(".")).join(&*data);
        }
        if !data.is_file() {
            bail!("{origin}: data file {} does not exist", data.display());
        }
    }
    Ok(cfg)
}

struct Pending {
    variant: Variant,
    line: usize,
    keys: Vec<(usize, String, String)>,
}

/// Parses the grammar; `origin` prefixes every error location.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let mut globals: Vec<(usize, String, String)> = Vec::new();
    let mut sections: Vec<Pending> = Vec::new();
    let mut seen_global: BTreeSet<String> = BTreeSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let line = match raw.find('#') {
            Some(cut) => &raw[..cut],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("{origin}:{no}: unterminated section header"))?;
            let tag = inner.strip_prefix("solver.").ok_or_else(|| {
                anyhow!("{origin}:{no}: expected [solver.<name>], got [{inner}]")
            })?;
            let variant = tag
                .parse::<Variant>()
                .map_err(|e| anyhow!("{origin}:{no}: {e}"))?;
            sections.push(Pending { variant, line: no, keys: Vec::new() });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{origin}:{no}: expected key = value"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            bail!("{origin}:{no}: key {key} has no value");
        }
        match sections.last_mut() {
            Some(section) => {
                if section.keys.iter().any(|(_, k, _)| *k == key) {
                    bail!("{origin}:{no}: duplicate key {key} in this section");
                }
                section.keys.push((no, key, value));
            }
            None => {
                if !seen_global.insert(key.clone()) {
                    bail!("{origin}:{no}: duplicate key {key}");
                }
                globals.push((no, key, value));
            }
        }
    }

    assemble(origin, globals, sections)
}

fn parse_as<T: std::str::FromStr>(origin: &str, no: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("{origin}:{no}: key {key} has malformed value {value}"))
}

fn parse_bool(origin: &str, no: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bail!("{origin}:{no}: key {key} expects true or false, got {value}"),
    }
}

fn assemble(
    origin: &str,
    globals: Vec<(usize, String, String)>,
    sections: Vec<Pending>,
) -> Result<ExperimentConfig> {
    let mut data_kind: Option<(usize, String)> = None;
    let mut path: Option<PathBuf> = None;
    let mut dimension = None;
    let mut samples = None;
    let mut features = None;
    let mut cond = None;
    let mut noise = 0.05;
    let mut amplitude = 1.0;
    let mut data_seed = 1u64;
    let mut n_clients = 5usize;
    let mut shuffle = false;
    let mut rule_name: Option<(usize, String)> = None;
    let mut lambda: Option<(usize, f64)> = None;
    let mut lambda_max_mode = LambdaMaxMode::Exact;
    let mut iterations: Option<u64> = None;
    let mut report_every = 100u64;
    let mut seeds = vec![1, 2, 3, 4, 5];
    let mut outdir = None;
    let mut beta_default = false;

    for (no, key, value) in &globals {
        let (no, value) = (*no, value.as_str());
        match key.as_str() {
            "data" => data_kind = Some((no, value.to_string())),
            "path" => path = Some(PathBuf::from(value)),
            "dimension" => dimension = Some(parse_as(origin, no, key, value)?),
            "samples" => samples = Some(parse_as(origin, no, key, value)?),
            "features" => features = Some(parse_as(origin, no, key, value)?),
            "cond" => cond = Some(parse_as(origin, no, key, value)?),
            "noise" => noise = parse_as(origin, no, key, value)?,
            "amplitude" => amplitude = parse_as(origin, no, key, value)?,
            "data_seed" => data_seed = parse_as(origin, no, key, value)?,
            "n_clients" => n_clients = parse_as(origin, no, key, value)?,
            "shuffle" => shuffle = parse_bool(origin, no, key, value)?,
            "lambda_rule" => rule_name = Some((no, value.to_string())),
            "lambda" => lambda = Some((no, parse_as(origin, no, key, value)?)),
            "lambda_max_mode" => {
                lambda_max_mode = match value {
                    "exact" => LambdaMaxMode::Exact,
                    "block_bound" => LambdaMaxMode::BlockBound,
                    _ => bail!(
                        "{origin}:{no}: lambda_max_mode expects exact or block_bound, got {value}"
                    ),
                }
            }
            "iterations" => iterations = Some(parse_as(origin, no, key, value)?),
            "report_every" => report_every = parse_as(origin, no, key, value)?,
            "seeds" => {
                let parsed: Result<Vec<u64>> = value
                    .split(',')
                    .map(|s| parse_as(origin, no, key, s.trim()))
                    .collect();
                seeds = parsed?;
                if seeds.is_empty() {
                    bail!("{origin}:{no}: seeds list is empty");
                }
            }
            "outdir" => outdir = Some(PathBuf::from(value)),
            "beta_trick" => beta_default = parse_bool(origin, no, key, value)?,
            _ => bail!("{origin}:{no}: unknown key {key}"),
        }
    }

    let data = match data_kind {
        None => bail!("{origin}: missing required key data (synthetic or libsvm)"),
        Some((no, kind)) => match kind.as_str() {
            "synthetic" => DataSource::Synthetic {
                samples: samples.ok_or_else(|| {
                    anyhow!("{origin}:{no}: data = synthetic needs the samples key")
                })?,
                features: features.ok_or_else(|| {
                    anyhow!("{origin}:{no}: data = synthetic needs the features key")
                })?,
                cond: cond.ok_or_else(|| {
                    anyhow!("{origin}:{no}: data = synthetic needs the cond key")
                })?,
                noise,
                amplitude,
            },
            "libsvm" => DataSource::LibSvm {
                path: path
                    .ok_or_else(|| anyhow!("{origin}:{no}: data = libsvm needs the path key"))?,
                dimension,
            },
            _ => bail!("{origin}:{no}: data expects synthetic or libsvm, got {kind}"),
        },
    };

    let rule_line = rule_name.as_ref().map(|(no, _)| *no).unwrap_or(0);
    let lambda_rule = match rule_name.as_ref().map(|(_, n)| n.as_str()) {
        Some("fixed") => {
            let (_, v) = lambda.ok_or_else(|| {
                anyhow!("{origin}:{rule_line}: lambda_rule = fixed needs the lambda key")
            })?;
            LambdaRule::Fixed(v)
        }
        Some("lmax_over_1e3") | None => {
            if let Some((no, _)) = lambda {
                bail!("{origin}:{no}: lambda is only used with lambda_rule = fixed");
            }
            LambdaRule::LmaxOver1e3
        }
        Some(other) => {
            bail!("{origin}:{rule_line}: lambda_rule expects lmax_over_1e3 or fixed, got {other}")
        }
    };

    let iterations = iterations
        .ok_or_else(|| anyhow!("{origin}: missing required key iterations"))?;
    if report_every == 0 {
        bail!("{origin}: report_every must be at least 1");
    }
    if n_clients == 0 {
        bail!("{origin}: n_clients must be at least 1");
    }
    if sections.is_empty() {
        bail!("{origin}: no [solver.<name>] sections");
    }

    let mut solvers = Vec::with_capacity(sections.len());
    for section in sections {
        let mut entry = SolverEntry::new(section.variant, beta_default);
        for (no, key, value) in &section.keys {
            let (no, value) = (*no, value.as_str());
            match key.as_str() {
                "label" => entry.label = value.to_string(),
                "gamma" => entry.gamma = Some(parse_as(origin, no, key, value)?),
                "rho" => entry.rho = Some(parse_as(origin, no, key, value)?),
                "p" => entry.p = Some(parse_as(origin, no, key, value)?),
                "sigma" => entry.sigma = Some(parse_as(origin, no, key, value)?),
                "compressor" => {
                    entry.compressor = Some(match value {
                        "randk" => CompressorKind::RandK,
                        "topk" => CompressorKind::TopK,
                        "identity" => CompressorKind::Identity,
                        _ => bail!(
                            "{origin}:{no}: compressor expects randk, topk, or identity, got {value}"
                        ),
                    })
                }
                "ratio" => entry.ratio = Some(parse_as(origin, no, key, value)?),
                "rng" => {
                    entry.rng_mode = match value {
                        "shared" => RngMode::SharedSeed,
                        "independent" => RngMode::Independent,
                        _ => bail!(
                            "{origin}:{no}: rng expects shared or independent, got {value}"
                        ),
                    }
                }
                "encryption" => {
                    entry.masked = match value {
                        "plaintext" => false,
                        "scaled_mask" => true,
                        _ => bail!(
                            "{origin}:{no}: encryption expects plaintext or scaled_mask, got {value}"
                        ),
                    }
                }
                "secret" => entry.secret = Some(parse_as(origin, no, key, value)?),
                "beta_trick" => entry.beta_trick = parse_bool(origin, no, key, value)?,
                "averaged" => entry.averaged = parse_bool(origin, no, key, value)?,
                _ => bail!("{origin}:{no}: unknown solver key {key}"),
            }
        }
        if solvers.iter().any(|e: &SolverEntry| e.label == entry.label) {
            bail!(
                "{origin}:{}: duplicate run label {}; set a distinct label key",
                section.line,
                entry.label
            );
        }
        solvers.push(entry);
    }

    Ok(ExperimentConfig {
        data,
        data_seed,
        n_clients,
        shuffle,
        lambda_rule,
        lambda_max_mode,
        iterations,
        report_every,
        seeds,
        outdir,
        solvers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
data = synthetic
samples = 20
features = 8
cond = 10
iterations = 5

[solver.eg_basic]
";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(BASE, "test.cfg").unwrap();
        assert_eq!(cfg.n_clients, 5);
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.report_every, 100);
        assert_eq!(cfg.lambda_rule, LambdaRule::LmaxOver1e3);
        assert_eq!(cfg.solvers.len(), 1);
        assert_eq!(cfg.solvers[0].label, "eg_basic");
    }

    #[test]
    fn errors_carry_the_line_number() {
        let text = "data = synthetic\nsamples = 20\nbogus = 1\n";
        let err = parse_config(text, "test.cfg").unwrap_err().to_string();
        assert!(err.starts_with("test.cfg:3:"), "{err}");

        let text = "data = synthetic\nsamples\n";
        let err = parse_config(text, "test.cfg").unwrap_err().to_string();
        assert!(err.contains("test.cfg:2"), "{err}");
    }

    #[test]
    fn unknown_solver_names_are_rejected_with_candidates() {
        let text = format!("{BASE}\n[solver.sgd]\n");
        let err = parse_config(&text, "test.cfg").unwrap_err().to_string();
        assert!(err.contains("unknown solver 'sgd'"), "{err}");
        assert!(err.contains("eg_basic"), "{err}");
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let text = format!("{BASE}\n[solver.eg_basic]\n");
        let err = parse_config(&text, "test.cfg").unwrap_err().to_string();
        assert!(err.contains("duplicate run label"), "{err}");

        let text = format!("{BASE}label = other\n\n[solver.eg_basic]\nlabel = other\n");
        assert!(parse_config(&text, "test.cfg").is_err());

        let text = format!("{BASE}\n[solver.eg_basic]\nlabel = with_trick\nbeta_trick = true\n");
        let cfg = parse_config(&text, "test.cfg").unwrap();
        assert_eq!(cfg.solvers[1].label, "with_trick");
        assert!(cfg.solvers[1].beta_trick);
    }

    #[test]
    fn comments_and_inline_comments_are_stripped() {
        let text = "# experiment\ndata = synthetic # generator\nsamples = 20\nfeatures = 8\ncond = 10\niterations = 5\n\n[solver.gd] # baseline\n";
        let cfg = parse_config(text, "test.cfg").unwrap();
        assert_eq!(cfg.solvers[0].variant, Variant::Gd);
    }

    #[test]
    fn fixed_lambda_rule_requires_the_value() {
        let text = BASE.replace("iterations = 5", "iterations = 5\nlambda_rule = fixed");
        let err = parse_config(&text, "test.cfg").unwrap_err().to_string();
        assert!(err.contains("needs the lambda key"), "{err}");

        let text =
            BASE.replace("iterations = 5", "iterations = 5\nlambda_rule = fixed\nlambda = 0.25");
        let cfg = parse_config(&text, "test.cfg").unwrap();
        assert_eq!(cfg.lambda_rule, LambdaRule::Fixed(0.25));
    }

    #[test]
    fn solver_overrides_lower_onto_the_run_config() {
        let text = format!(
            "{BASE}gamma = 0.125\np = 0.2\naveraged = true\n\n[solver.eg_compress_biased]\ncompressor = topk\nratio = 0.25\n"
        );
        let cfg = parse_config(&text, "test.cfg").unwrap();
        let run = cfg.solvers[0].solver_config(5, 1, 7).unwrap();
        assert_eq!(run.gamma, GammaChoice::Fixed(0.125));
        assert_eq!(run.p, 0.2);
        assert_eq!(run.master_seed, 7);
        assert!(run.averaged_metrics);
        let run = cfg.solvers[1].solver_config(5, 1, 7).unwrap();
        assert_eq!(run.compressor.kind, CompressorKind::TopK);
        assert_eq!(run.compressor.k_fraction, 0.25);
    }
}
