//! The run-config file and its translation into core types.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;

use moran_core::breeding::{DirichletPrior, MassRule, MixturePrior, PriorSpec};
use moran_core::chain::ChainConfig;
use moran_core::measures::{FitnessSpec, Genotype, Measure, Space};
use moran_core::selection::Kernel;
use moran_core::verify::{Metric, SweepSpec};

/// A rejected config, optionally anchored to a line of the file.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
            if let Some(c) = self.column {
                write!(f, ":{c}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub space: Space,
    pub prior: PriorConfig,
    pub fitness: FitnessSpec,
    pub chain: Option<ChainSection>,
    pub balance: Option<BalanceSection>,
    pub oracle: Option<OracleSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    /// Label masses on a finite space.
    Pmf { masses: Vec<f64> },
    /// Equal label masses, or Lebesgue measure on the interval.
    Uniform,
    /// Point masses: labels on a finite space, points in `[0, 1]` otherwise.
    Atoms { atoms: Vec<(f64, f64)> },
    /// Cell-average density values, one per grid cell.
    Density { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MassRuleConfig {
    #[default]
    Scaled,
    Fixed,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub measure: MeasureConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    Dirichlet {
        c: f64,
        base: MeasureConfig,
        #[serde(default)]
        mass_rule: MassRuleConfig,
    },
    Mixture {
        components: Vec<ComponentConfig>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KernelConfig {
    #[default]
    Tournament,
    Inverse,
}

impl From<KernelConfig> for Kernel {
    fn from(k: KernelConfig) -> Self {
        match k {
            KernelConfig::Tournament => Kernel::Tournament,
            KernelConfig::Inverse => Kernel::InverseFitness,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub n: usize,
    pub steps: Option<u64>,
    pub samples: Option<u64>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "one")]
    pub replicas: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceSection {
    pub n: usize,
    pub kernels: Option<Vec<KernelConfig>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    pub ns: Vec<usize>,
    pub metric: Metric,
    #[serde(default = "default_sweep_samples")]
    pub samples: u64,
    #[serde(default = "one")]
    pub replicas: u32,
    #[serde(default = "one_u64")]
    pub thin_per_n: u64,
    #[serde(default)]
    pub kernel: KernelConfig,
}

fn default_sweep_samples() -> u64 {
    1000
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Default number of recorded populations per replica when neither `steps`
/// nor `samples` is given.
pub const DEFAULT_SAMPLES: u64 = 1000;

/// The config text, kept to anchor errors to lines.
pub struct Source {
    path: PathBuf,
    text: String,
}

impl Source {
    /// An error pointing at the first line that mentions `"key"`.
    pub fn error(&self, key: Option<&str>, message: impl fmt::Display) -> ConfigError {
        let line = key.and_then(|k| {
            let quoted = format!("\"{k}\"");
            self.text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
        });
        ConfigError {
            path: self.path.clone(),
            line,
            column: None,
            message: message.to_string(),
        }
    }

    fn measure(&self, space: Space, m: &MeasureConfig) -> Result<Measure, ConfigError> {
        let err = |e: moran_core::Error| self.error(Some("prior"), e);
        match (m, space) {
            (MeasureConfig::Pmf { masses }, Space::Finite { k }) => {
                if masses.len() != k {
                    return Err(self.error(Some("masses"), format!("{} masses for {k} labels", masses.len())));
                }
                Measure::pmf(masses).map_err(err)
            }
            (MeasureConfig::Pmf { .. }, _) => Err(self.error(Some("pmf"), "a pmf needs a finite space")),
            (MeasureConfig::Uniform, Space::Finite { k }) => Measure::pmf(&vec![1.0 / k as f64; k]).map_err(err),
            (MeasureConfig::Uniform, Space::UnitInterval { cells }) => Measure::uniform(cells).map_err(err),
            (MeasureConfig::Atoms { atoms }, _) => {
                let mut out = Vec::with_capacity(atoms.len());
                for &(x, mass) in atoms {
                    let g = match space {
                        Space::Finite { k } => {
                            if x.fract() != 0.0 || x < 0.0 || x >= k as f64 {
                                return Err(self.error(Some("atoms"), format!("{x} is not a label of a {k}-point space")));
                            }
                            Genotype::Label(x as u32)
                        }
                        Space::UnitInterval { .. } => Genotype::Point(x),
                    };
                    out.push((g, mass));
                }
                Measure::new(space, out, Vec::new()).map_err(|e| self.error(Some("atoms"), e))
            }
            (MeasureConfig::Density { values }, Space::UnitInterval { cells }) => {
                if values.len() != cells {
                    return Err(self.error(Some("values"), format!("{} density values for {cells} cells", values.len())));
                }
                Measure::new(space, Vec::new(), values.clone()).map_err(|e| self.error(Some("values"), e))
            }
            (MeasureConfig::Density { .. }, _) => Err(self.error(Some("density"), "a density needs the interval space")),
        }
    }

    fn prior(&self, space: Space, prior: &PriorConfig) -> Result<PriorSpec, ConfigError> {
        match prior {
            PriorConfig::Dirichlet { c, base, mass_rule } => {
                let rule = match mass_rule {
                    MassRuleConfig::Scaled => MassRule::Scaled,
                    MassRuleConfig::Fixed => MassRule::Fixed,
                };
                let base = self.measure(space, base)?;
                DirichletPrior::new(*c, base, rule)
                    .map(PriorSpec::Dirichlet)
                    .map_err(|e| self.error(Some("c"), e))
            }
            PriorConfig::Mixture { components } => {
                let mut out = Vec::with_capacity(components.len());
                for comp in components {
                    out.push((comp.weight, self.measure(space, &comp.measure)?));
                }
                MixturePrior::new(out)
                    .map(PriorSpec::Mixture)
                    .map_err(|e| self.error(Some("components"), e))
            }
        }
    }
}

/// A validated config.
pub struct Config {
    pub seed: u64,
    pub prior: PriorSpec,
    pub raw: RawConfig,
    pub out: PathBuf,
    pub source: Source,
}

impl Config {
    pub fn load(path: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(&path).map_err(|e| ConfigError {
            path: path.clone(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        let raw: RawConfig = serde_json::from_str(&text).map_err(|e| ConfigError {
            path: path.clone(),
            line: Some(e.line()),
            column: Some(e.column()),
            message: strip_position(&e.to_string()),
        })?;
        let source = Source { path, text };
        let Some(seed) = seed.or(raw.seed) else {
            return Err(source.error(None, "missing field `seed` (set it in the config or pass --seed)"));
        };
        if raw.threads == Some(0) {
            return Err(source.error(Some("threads"), "threads must be at least 1"));
        }
        raw.space.validate().map_err(|e| source.error(Some("space"), e))?;
        let prior = source.prior(raw.space, &raw.prior)?;
        raw.fitness.validate(raw.space).map_err(|e| source.error(Some("fitness"), e))?;
        Ok(Self {
            seed,
            prior,
            out: out.unwrap_or_else(|| raw.output.dir.clone()),
            raw,
            source,
        })
    }

    pub fn error(&self, key: Option<&str>, message: impl fmt::Display) -> ConfigError {
        self.source.error(key, message)
    }

    pub fn fitness(&self) -> &FitnessSpec {
        &self.raw.fitness
    }

    pub fn threads(&self) -> Option<usize> {
        self.raw.threads
    }

    pub fn space(&self) -> Space {
        self.raw.space
    }

    pub fn chain(&self) -> Result<ChainConfig, ConfigError> {
        let Some(ch) = &self.raw.chain else {
            return Err(self.error(None, "this command needs a `chain` section"));
        };
        if ch.n == 0 {
            return Err(self.error(Some("n"), "n must be at least 1"));
        }
        let burn_in = ch.burn_in.unwrap_or_else(|| ChainConfig::default_burn_in(ch.n));
        let thin = ch.thin.unwrap_or(ch.n as u64);
        if thin == 0 {
            return Err(self.error(Some("thin"), "thin must be at least 1"));
        }
        if ch.replicas == 0 {
            return Err(self.error(Some("replicas"), "replicas must be at least 1"));
        }
        let steps = match (ch.steps, ch.samples) {
            (Some(_), Some(_)) => return Err(self.error(Some("samples"), "give either `steps` or `samples`, not both")),
            (Some(s), None) => s,
            (None, s) => burn_in + s.unwrap_or(DEFAULT_SAMPLES) * thin,
        };
        if steps <= burn_in {
            return Err(self.error(
                Some("steps"),
                format!("steps ({steps}) must exceed burn_in ({burn_in})"),
            ));
        }
        Ok(ChainConfig {
            n: ch.n,
            steps,
            burn_in,
            thin,
            kernel: ch.kernel.into(),
            seed: self.seed,
            replicas: ch.replicas,
        })
    }

    pub fn balance(&self) -> Result<(usize, Vec<Kernel>), ConfigError> {
        let Some(b) = &self.raw.balance else {
            return Err(self.error(None, "this command needs a `balance` section"));
        };
        if !self.space().is_finite() {
            return Err(self.error(Some("space"), "detailed balance is checked on finite spaces only"));
        }
        let kernels = b
            .kernels
            .clone()
            .unwrap_or_else(|| vec![KernelConfig::Tournament, KernelConfig::Inverse]);
        if b.n == 0 || kernels.is_empty() {
            return Err(self.error(Some("balance"), "balance needs n >= 1 and at least one kernel"));
        }
        Ok((b.n, kernels.into_iter().map(Kernel::from).collect()))
    }

    pub fn oracle(&self) -> Result<usize, ConfigError> {
        let Some(o) = &self.raw.oracle else {
            return Err(self.error(None, "this command needs an `oracle` section"));
        };
        if !self.space().is_finite() {
            return Err(self.error(Some("space"), "exact laws are available on finite spaces only"));
        }
        if o.n == 0 {
            return Err(self.error(Some("oracle"), "n must be at least 1"));
        }
        Ok(o.n)
    }

    pub fn sweep(&self) -> Result<SweepSpec, ConfigError> {
        let Some(s) = &self.raw.sweep else {
            return Err(self.error(None, "this command needs a `sweep` section"));
        };
        if s.lambdas.is_empty() || s.ns.is_empty() {
            return Err(self.error(Some("sweep"), "a sweep needs at least one lambda and one n"));
        }
        if s.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(self.error(Some("lambdas"), "every lambda must be a nonnegative real"));
        }
        if s.ns.contains(&0) || s.samples == 0 || s.replicas == 0 || s.thin_per_n == 0 {
            return Err(self.error(Some("sweep"), "ns, samples, replicas and thin_per_n must be positive"));
        }
        if s.metric == Metric::Tv && !self.space().is_finite() {
            return Err(self.error(Some("metric"), "the tv metric needs a finite space"));
        }
        Ok(SweepSpec {
            lambdas: s.lambdas.clone(),
            ns: s.ns.clone(),
            prior: self.prior.clone(),
            fit: self.raw.fitness.clone(),
            metric: s.metric,
            kernel: s.kernel.into(),
            samples: s.samples,
            replicas: s.replicas,
            thin_per_n: s.thin_per_n,
            seed: self.seed,
        })
    }
}

/// serde_json appends " at line L column C"; the position is reported
/// separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(text: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, text).unwrap();
        (dir, path)
    }

    const MINIMAL: &str = r#"{
  "seed": 7,
  "space": {"kind": "finite", "k": 2},
  "prior": {"kind": "dirichlet", "c": 2.0, "base": {"kind": "uniform"}, "mass_rule": "fixed"},
  "fitness": {"phi": {"family": "finite_table", "values": [0.0, 0.0]}, "lambda": 1.0},
  "chain": {"n": 2, "samples": 10}
}"#;

    #[test]
    fn minimal_config_builds() {
        let (_d, path) = write(MINIMAL);
        let cfg = Config::load(path, None, None).unwrap();
        let chain = cfg.chain().unwrap();
        assert_eq!(chain.seed, 7);
        assert_eq!(chain.thin, 2);
        assert_eq!(chain.steps, chain.burn_in + 20);
        assert_eq!(cfg.out, PathBuf::from("out"));
    }

    #[test]
    fn seed_flag_overrides() {
        let (_d, path) = write(MINIMAL);
        assert_eq!(Config::load(path, Some(99), None).unwrap().seed, 99);
    }

    #[test]
    fn missing_seed_is_an_error() {
        let (_d, path) = write(&MINIMAL.replace("\"seed\": 7,", ""));
        let e = Config::load(path, None, None).err().unwrap();
        assert!(e.message.contains("seed"));
    }

    #[test]
    fn syntax_errors_carry_a_position() {
        let (_d, path) = write(&MINIMAL.replace("\"k\": 2", "\"k\": two"));
        let e = Config::load(path, None, None).err().unwrap();
        assert_eq!(e.line, Some(3));
        assert!(e.column.is_some());
    }

    #[test]
    fn short_chains_point_at_steps() {
        let text = MINIMAL.replace("\"samples\": 10", "\"steps\": 3,\n    \"burn_in\": 5");
        let (_d, path) = write(&text);
        let cfg = Config::load(path, None, None).unwrap();
        let e = cfg.chain().err().unwrap();
        assert_eq!(e.line, Some(6));
        assert!(e.message.contains("burn_in"));
    }

    #[test]
    fn mismatched_phi_is_rejected() {
        let (_d, path) = write(&MINIMAL.replace("[0.0, 0.0]", "[0.0, 0.0, 1.0]"));
        let e = Config::load(path, None, None).err().unwrap();
        assert_eq!(e.line, Some(5));
    }
}
