//! Running the selection chain and the exact stationary laws it targets.
//!
//! The stationary law of both kernels is the selection-tilted breeding law
//! `P_n(dx) ∝ Π_j w_n(x_j) P_ξ^n(dx)`. On a finite space it is computed
//! exactly, either per count vector or per ordered tuple, always in log space.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::breeding::{
    dirichlet_multinomial_law, enumerate_counts, ln_multinomial, ln_pochhammer, ln_power_product, log_sum_exp,
    prior_exact_law, CountsLaw, MixturePrior, PriorSpec,
};
use crate::measures::{empirical_measure, FitnessSpec, Genotype, Measure, Space};
use crate::rng::RngStream;
use crate::selection::{decode_state, tuple_count, Evolver, Kernel, Population};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainConfig {
    pub n: usize,
    /// Total kernel applications per replica, burn-in included.
    pub steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub kernel: Kernel,
    pub seed: u64,
    pub replicas: u32,
}

impl ChainConfig {
    /// `⌈20 n ln n⌉`.
    pub fn default_burn_in(n: usize) -> u64 {
        (20.0 * n as f64 * (n as f64).ln()).ceil() as u64
    }

    /// A configuration with the default burn-in and thinning (`thin = n`) that
    /// records `samples` populations per replica.
    pub fn with_samples(n: usize, samples: u64, kernel: Kernel, seed: u64, replicas: u32) -> Self {
        let burn_in = Self::default_burn_in(n);
        let thin = n.max(1) as u64;
        Self {
            n,
            steps: burn_in + samples * thin,
            burn_in,
            thin,
            kernel,
            seed,
            replicas,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.n == 0 {
            return bad("population size must be positive");
        }
        if self.burn_in >= self.steps {
            return bad("burn_in must be smaller than steps");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1");
        }
        Ok(())
    }

    /// Populations recorded by each replica.
    pub fn samples_per_replica(&self) -> u64 {
        (self.steps - self.burn_in) / self.thin
    }
}

/// Populations recorded by [`run_chain`], replica after replica.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub space: Space,
    pub n: usize,
    pub populations: Vec<Population>,
}

/// Runs `cfg.replicas` chains in parallel and folds each recorded population
/// into a per-replica accumulator. Replica `r` draws from the stream
/// `(cfg.seed, cell, r)`; accumulators come back in replica order.
pub fn run_chain_fold<A, I, V>(
    cfg: &ChainConfig,
    cell: u32,
    prior: &PriorSpec,
    fit: &FitnessSpec,
    init: I,
    visit: V,
) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, &[Genotype]) + Sync,
{
    cfg.validate()?;
    fit.validate(prior.space())?;
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::derived(cfg.seed, cell, r);
            let mut ev = Evolver::from_breeding(cfg.kernel, prior, fit, cfg.n, &mut rng)?;
            for _ in 0..cfg.burn_in {
                ev.step(&mut rng)?;
            }
            let mut acc = init();
            for _ in 0..cfg.samples_per_replica() {
                for _ in 0..cfg.thin {
                    ev.step(&mut rng)?;
                }
                visit(&mut acc, ev.members());
            }
            Ok(acc)
        })
        .collect()
}

/// Runs the chain and keeps every recorded population.
pub fn run_chain(cfg: &ChainConfig, prior: &PriorSpec, fit: &FitnessSpec) -> Result<SampleSet> {
    let parts = run_chain_fold(cfg, 0, prior, fit, Vec::new, |acc: &mut Vec<Population>, pop| {
        acc.push(Population::new(pop.to_vec()))
    })?;
    Ok(SampleSet {
        space: prior.space(),
        n: cfg.n,
        populations: parts.into_iter().flatten().collect(),
    })
}

/// Count vector of a finite population.
pub fn counts_of(pop: &[Genotype], k: usize) -> Vec<u32> {
    let mut c = vec![0u32; k];
    for g in pop {
        c[g.label().expect("finite population")] += 1;
    }
    c
}

/// Histogram of sampled count vectors, merged over replicas.
pub fn sample_counts(cfg: &ChainConfig, cell: u32, prior: &PriorSpec, fit: &FitnessSpec) -> Result<BTreeMap<Vec<u32>, u64>> {
    let k = match prior.space() {
        Space::Finite { k } => k,
        Space::UnitInterval { .. } => return Err(Error::Unsupported("count histograms need a finite space".into())),
    };
    let parts = run_chain_fold(cfg, cell, prior, fit, BTreeMap::new, |acc: &mut BTreeMap<Vec<u32>, u64>, pop| {
        *acc.entry(counts_of(pop, k)).or_insert(0) += 1;
    })?;
    let mut merged = BTreeMap::new();
    for part in parts {
        for (c, v) in part {
            *merged.entry(c).or_insert(0) += v;
        }
    }
    Ok(merged)
}

/// Empirical measure of each recorded population.
pub fn qn_samples(ss: &SampleSet) -> Result<Vec<Measure>> {
    ss.populations.iter().map(|p| empirical_measure(ss.space, &p.members)).collect()
}

impl SampleSet {
    /// CSV of population values: `sample,member,value`.
    pub fn values_csv(&self) -> String {
        let mut out = String::from("sample,member,value\n");
        for (s, p) in self.populations.iter().enumerate() {
            for (i, g) in p.members.iter().enumerate() {
                out.push_str(&format!("{s},{i},{g}\n"));
            }
        }
        out
    }

    /// CSV of count-vector frequencies (finite spaces):
    /// `n_0,...,n_{K-1},count,frequency`.
    pub fn counts_csv(&self) -> Result<String> {
        let k = match self.space {
            Space::Finite { k } => k,
            Space::UnitInterval { .. } => return Err(Error::Unsupported("count tables need a finite space".into())),
        };
        let mut hist: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
        for p in &self.populations {
            *hist.entry(counts_of(&p.members, k)).or_insert(0) += 1;
        }
        Ok(histogram_csv(k, &hist))
    }

    /// Mean of the per-individual empirical law over all samples.
    pub fn pooled_measure(&self) -> Result<Measure> {
        let all: Vec<Genotype> = self.populations.iter().flat_map(|p| p.members.iter().copied()).collect();
        empirical_measure(self.space, &all)
    }
}

/// Renders a count histogram as CSV, largest counts of label 0 first.
pub fn histogram_csv(k: usize, hist: &BTreeMap<Vec<u32>, u64>) -> String {
    let total: u64 = hist.values().sum();
    let mut out = String::new();
    for l in 0..k {
        out.push_str(&format!("n_{l},"));
    }
    out.push_str("count,frequency\n");
    for (c, v) in hist.iter().rev() {
        for x in c {
            out.push_str(&format!("{x},"));
        }
        out.push_str(&format!("{v},{}\n", *v as f64 / total as f64));
    }
    out
}

fn check_positive(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter("fitness values must be positive reals".into()));
    }
    Ok(())
}

/// Exact stationary counts law for a Dirichlet-multinomial breeding law with
/// parameter `alpha` and per-label fitness `weights`:
/// `P_n(n_1..n_K) ∝ multinomial · Π (α_k)_{n_k} / (|α|)_n · Π w_k^{n_k}`.
pub fn exact_stationary_counts_weights(alpha: &[f64], weights: &[f64], n: usize) -> Result<CountsLaw> {
    if alpha.len() != weights.len() {
        return Err(Error::InvalidParameter("alpha and weights differ in length".into()));
    }
    if alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) || alpha.iter().all(|a| *a == 0.0) {
        return Err(Error::InvalidParameter("alpha must be nonnegative and not all zero".into()));
    }
    check_positive(weights)?;
    let k = alpha.len();
    let total: f64 = alpha.iter().sum();
    let counts = enumerate_counts(k, n)?;
    let logs = counts
        .iter()
        .map(|c| {
            let mut l = ln_multinomial(c) - ln_pochhammer(total, n as u32) + ln_power_product(c, weights);
            for (&a, &m) in alpha.iter().zip(c) {
                if m > 0 {
                    l += if a > 0.0 { ln_pochhammer(a, m) } else { f64::NEG_INFINITY };
                }
            }
            l
        })
        .collect();
    CountsLaw::from_log_weights(k, n, counts, logs)
}

fn label_weights(space: Space, fit: &FitnessSpec, n: usize) -> Result<Vec<f64>> {
    let k = match space {
        Space::Finite { k } => k,
        Space::UnitInterval { .. } => return Err(Error::Unsupported("exact laws need a finite space".into())),
    };
    fit.validate(space)?;
    Ok((0..k).map(|l| fit.weight(n, Genotype::Label(l as u32))).collect())
}

/// Exact stationary counts law for a Dirichlet breeding law with parameter
/// `alpha` on `space`.
pub fn exact_stationary_counts(space: Space, alpha: &[f64], fit: &FitnessSpec, n: usize) -> Result<CountsLaw> {
    exact_stationary_counts_weights(alpha, &label_weights(space, fit, n)?, n)
}

/// Exact stationary counts law for a finite mixture prior:
/// `P_n(counts) ∝ Σ_i weight_i · multinomial · Π_k (q_i(k) w(k))^{n_k}`.
pub fn exact_stationary_mixture(space: Space, prior: &MixturePrior, fit: &FitnessSpec, n: usize) -> Result<CountsLaw> {
    let w = label_weights(space, fit, n)?;
    if prior.space() != space {
        return Err(Error::SpaceMismatch(prior.space().describe(), space.describe()));
    }
    let k = space.size();
    let tilted: Vec<(f64, Vec<f64>)> = prior
        .components()
        .iter()
        .map(|(wt, q)| {
            let q = q.masses().expect("finite component");
            (wt.ln(), q.iter().zip(&w).map(|(a, b)| a * b).collect())
        })
        .collect();
    let counts = enumerate_counts(k, n)?;
    let logs = counts
        .iter()
        .map(|c| {
            let terms: Vec<f64> = tilted.iter().map(|(lw, qw)| lw + ln_power_product(c, qw)).collect();
            ln_multinomial(c) + log_sum_exp(&terms)
        })
        .collect();
    CountsLaw::from_log_weights(k, n, counts, logs)
}

/// Dirichlet parameter `m_n · ᾱ` of an urn prior with a finite base.
pub fn urn_alpha(prior: &PriorSpec, n: usize, lambda: f64) -> Result<Vec<f64>> {
    match prior {
        PriorSpec::Dirichlet(d) => {
            let base = d
                .base
                .masses()
                .ok_or_else(|| Error::Unsupported("exact urn laws need a finite base".into()))?;
            let m = d.mass(n, lambda);
            Ok(base.into_iter().map(|p| m * p).collect())
        }
        PriorSpec::Mixture(_) => Err(Error::InvalidParameter("not a Dirichlet prior".into())),
    }
}

/// Exact stationary counts law for either prior kind.
pub fn exact_stationary_law(prior: &PriorSpec, fit: &FitnessSpec, n: usize) -> Result<CountsLaw> {
    let space = prior.space();
    match prior {
        PriorSpec::Dirichlet(_) => exact_stationary_counts(space, &urn_alpha(prior, n, fit.lambda)?, fit, n),
        PriorSpec::Mixture(m) => exact_stationary_mixture(space, m, fit, n),
    }
}

/// Exact breeding (no selection) counts law for either prior kind.
pub fn exact_breeding_law(prior: &PriorSpec, n: usize, lambda: f64) -> Result<CountsLaw> {
    match prior {
        PriorSpec::Dirichlet(_) => dirichlet_multinomial_law(&urn_alpha(prior, n, lambda)?, n),
        PriorSpec::Mixture(m) => prior_exact_law(m, n),
    }
}

/// Exact stationary law on ordered tuples `X^n`, indexed as in
/// [`decode_state`]: `π(x) ∝ Π_j w(x_j) · P_ξ^n(x)`, with the breeding
/// probability of the tuple taken straight from the urn or mixture formula.
pub fn exact_stationary_tuples(prior: &PriorSpec, fit: &FitnessSpec, n: usize) -> Result<Vec<f64>> {
    let space = prior.space();
    let k = space.size();
    let w = label_weights(space, fit, n)?;
    let states = tuple_count(k, n)?;
    let log_breeding: Box<dyn Fn(&[u32]) -> f64> = match prior {
        PriorSpec::Dirichlet(_) => {
            let alpha = urn_alpha(prior, n, fit.lambda)?;
            let total: f64 = alpha.iter().sum();
            Box::new(move |c: &[u32]| {
                let mut l = -ln_pochhammer(total, c.iter().sum());
                for (&a, &m) in alpha.iter().zip(c) {
                    if m > 0 {
                        l += if a > 0.0 { ln_pochhammer(a, m) } else { f64::NEG_INFINITY };
                    }
                }
                l
            })
        }
        PriorSpec::Mixture(m) => {
            let comps: Vec<(f64, Vec<f64>)> = m
                .components()
                .iter()
                .map(|(wt, q)| (wt.ln(), q.masses().expect("finite component")))
                .collect();
            Box::new(move |c: &[u32]| {
                let terms: Vec<f64> = comps.iter().map(|(lw, q)| lw + ln_power_product(c, q)).collect();
                log_sum_exp(&terms)
            })
        }
    };
    let logs: Vec<f64> = (0..states)
        .map(|s| {
            let c = counts_of(&decode_state(s, k, n), k);
            log_breeding(&c) + ln_power_product(&c, &w)
        })
        .collect();
    let z = log_sum_exp(&logs);
    Ok(logs.into_iter().map(|l| (l - z).exp()).collect())
}
