//! Exchangeable breeding: the conditional law of a newborn given the current
//! population.
//!
//! Two priors are supported. A Dirichlet process is run through its Pólya urn:
//! a fresh draw from the base measure with probability `m / (m + n)`, otherwise
//! a copy of a uniformly chosen member. A finite mixture of atomic measures is
//! run through its Bayesian predictive, with posterior weights kept in log
//! space.
//!
//! Draw order, per newborn: the urn takes one uniform to decide between a
//! fresh draw and a copy, then either one uniform for the base sampler or one
//! index draw for the copied member. The mixture predictive takes a single
//! uniform, inverted against the predictive pmf over the support points in
//! increasing order.

use std::collections::HashMap;

use statrs::function::gamma::ln_gamma;

use crate::measures::{Genotype, Measure, MeasureSampler, Space};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Largest number of count vectors any exact law will enumerate.
pub const COUNT_LIMIT: f64 = 1e6;

/// How the urn mass depends on the population size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MassRule {
    /// `m_n = c · n^(1 − λ)`.
    Scaled,
    /// `m_n = c` whatever the population size and λ.
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirichletPrior {
    pub c: f64,
    pub base: Measure,
    pub mass_rule: MassRule,
}

impl DirichletPrior {
    pub fn new(c: f64, base: Measure, mass_rule: MassRule) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("concentration c = {c} must be positive")));
        }
        Ok(Self { c, base, mass_rule })
    }

    /// Urn mass at population size `n` under selection exponent `lambda`.
    pub fn mass(&self, n: usize, lambda: f64) -> f64 {
        match self.mass_rule {
            MassRule::Fixed => self.c,
            MassRule::Scaled => {
                if lambda == 1.0 {
                    self.c
                } else {
                    self.c * (n as f64).powf(1.0 - lambda)
                }
            }
        }
    }
}

/// Finite mixture `Σ weight_i δ_{q_i}` of purely atomic measures.
#[derive(Clone, Debug, PartialEq)]
pub struct MixturePrior {
    components: Vec<(f64, Measure)>,
}

impl MixturePrior {
    pub fn new(components: Vec<(f64, Measure)>) -> Result<Self> {
        let Some(space) = components.first().map(|c| c.1.space()) else {
            return Err(Error::InvalidParameter("a mixture needs at least one component".into()));
        };
        let mut total = 0.0;
        for (w, q) in &components {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!("mixture weight {w} must be nonnegative")));
            }
            if q.space() != space {
                return Err(Error::SpaceMismatch(q.space().describe(), space.describe()));
            }
            if q.has_density() {
                return Err(Error::InvalidParameter("mixture components must be purely atomic".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[(f64, Measure)] {
        &self.components
    }

    pub fn space(&self) -> Space {
        self.components[0].1.space()
    }

    /// Sorted union of the component supports.
    pub fn support(&self) -> Vec<Genotype> {
        let mut pts: Vec<Genotype> = self
            .components
            .iter()
            .flat_map(|(_, q)| q.atoms().iter().filter(|a| a.1 > 0.0).map(|a| a.0))
            .collect();
        pts.sort();
        pts.dedup();
        pts
    }

    /// Mixture mean `Σ weight_i q_i`.
    pub fn mean(&self) -> Result<Measure> {
        let mut acc: Vec<(Genotype, f64)> = Vec::new();
        for g in self.support() {
            let m: f64 = self.components.iter().map(|(w, q)| w * q.atom_mass(g)).sum();
            acc.push((g, m));
        }
        Measure::new(self.space(), acc, Vec::new())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PriorSpec {
    Dirichlet(DirichletPrior),
    Mixture(MixturePrior),
}

impl PriorSpec {
    pub fn space(&self) -> Space {
        match self {
            PriorSpec::Dirichlet(d) => d.base.space(),
            PriorSpec::Mixture(m) => m.space(),
        }
    }
}

/// Newborn drawn by the Pólya urn with mass `mass` given `pop`.
pub fn polya_conditional_sample(
    prior: &DirichletPrior,
    mass: f64,
    pop: &[Genotype],
    rng: &mut RngStream,
) -> Result<Genotype> {
    Urn::new(prior, mass).draw(pop, rng)
}

/// Posterior predictive of a mixture prior given `pop`, as `(point, mass)`
/// pairs over the mixture support.
pub fn mixture_predictive(prior: &MixturePrior, pop: &[Genotype]) -> Result<Vec<(Genotype, f64)>> {
    let post = MixturePosterior::new(prior);
    let counts = post.counts_of(pop)?;
    post.predictive(&counts)
}

/// Newborn drawn from the posterior predictive of a mixture prior.
pub fn mixture_conditional_sample(prior: &MixturePrior, pop: &[Genotype], rng: &mut RngStream) -> Result<Genotype> {
    let post = MixturePosterior::new(prior);
    let counts = post.counts_of(pop)?;
    post.draw(&counts, rng)
}

#[derive(Clone, Debug)]
struct Urn {
    mass: f64,
    base: MeasureSampler,
    base_measure: Measure,
}

impl Urn {
    fn new(prior: &DirichletPrior, mass: f64) -> Self {
        Self {
            mass,
            base: prior.base.sampler(),
            base_measure: prior.base.clone(),
        }
    }

    fn draw(&self, pop: &[Genotype], rng: &mut RngStream) -> Result<Genotype> {
        let n = pop.len() as f64;
        if pop.is_empty() && self.mass <= 0.0 {
            return Err(Error::EmptyPopulation);
        }
        let u = rng.uniform();
        if u * (self.mass + n) < self.mass {
            Ok(self.base.sample(rng.uniform()))
        } else {
            Ok(pop[rng.index(pop.len())])
        }
    }
}

/// Log-space posterior of a mixture prior, indexed by support point.
#[derive(Clone, Debug)]
struct MixturePosterior {
    points: Vec<Genotype>,
    index: HashMap<Genotype, usize>,
    log_weights: Vec<f64>,
    /// `log_q[i][p] = ln q_i(points[p])`, `−∞` off the support of `q_i`.
    log_q: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

impl MixturePosterior {
    fn new(prior: &MixturePrior) -> Self {
        let points = prior.support();
        let index = points.iter().enumerate().map(|(i, g)| (*g, i)).collect();
        let q: Vec<Vec<f64>> = prior
            .components()
            .iter()
            .map(|(_, c)| points.iter().map(|g| c.atom_mass(*g)).collect())
            .collect();
        let log_q = q.iter().map(|row| row.iter().map(|p| p.ln()).collect()).collect();
        let log_weights = prior.components().iter().map(|(w, _)| w.ln()).collect();
        Self {
            points,
            index,
            log_weights,
            log_q,
            q,
        }
    }

    fn counts_of(&self, pop: &[Genotype]) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; self.points.len()];
        for g in pop {
            match self.index.get(g) {
                Some(&i) => counts[i] += 1,
                None => return Err(Error::ImpossiblePopulation),
            }
        }
        Ok(counts)
    }

    fn posterior(&self, counts: &[u64]) -> Result<Vec<f64>> {
        let logs: Vec<f64> = self
            .log_q
            .iter()
            .zip(&self.log_weights)
            .map(|(lq, lw)| {
                let mut s = *lw;
                for (c, l) in counts.iter().zip(lq) {
                    if *c > 0 {
                        s += *c as f64 * l;
                    }
                }
                s
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::ImpossiblePopulation);
        }
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / total).collect())
    }

    fn predictive_masses(&self, counts: &[u64]) -> Result<Vec<f64>> {
        let post = self.posterior(counts)?;
        Ok((0..self.points.len())
            .map(|p| post.iter().zip(&self.q).map(|(w, q)| w * q[p]).sum())
            .collect())
    }

    fn predictive(&self, counts: &[u64]) -> Result<Vec<(Genotype, f64)>> {
        Ok(self.points.iter().copied().zip(self.predictive_masses(counts)?).collect())
    }

    fn draw(&self, counts: &[u64], rng: &mut RngStream) -> Result<Genotype> {
        let pred = self.predictive_masses(counts)?;
        let total: f64 = pred.iter().sum();
        let u = rng.uniform() * total;
        let mut acc = 0.0;
        for (p, m) in pred.iter().enumerate() {
            acc += m;
            if u < acc {
                return Ok(self.points[p]);
            }
        }
        let last = pred.iter().rposition(|m| *m > 0.0).expect("predictive has mass");
        Ok(self.points[last])
    }
}

/// A breeding process resolved for a fixed population size: the urn mass is
/// fixed from the mass rule, and mixture posteriors are tracked through the
/// counts of the support points.
#[derive(Clone, Debug)]
pub struct Breeder {
    kind: BreederKind,
}

#[derive(Clone, Debug)]
enum BreederKind {
    Urn(Urn),
    Mixture(MixturePosterior),
}

/// Sufficient statistic of the current population for the breeder.
#[derive(Clone, Debug, Default)]
pub struct BreedState {
    counts: Vec<u64>,
}

impl Breeder {
    pub fn new(prior: &PriorSpec, n: usize, lambda: f64) -> Self {
        let kind = match prior {
            PriorSpec::Dirichlet(d) => BreederKind::Urn(Urn::new(d, d.mass(n, lambda))),
            PriorSpec::Mixture(m) => BreederKind::Mixture(MixturePosterior::new(m)),
        };
        Self { kind }
    }

    /// Urn mass, if this is a Pólya urn.
    pub fn urn_mass(&self) -> Option<f64> {
        match &self.kind {
            BreederKind::Urn(u) => Some(u.mass),
            BreederKind::Mixture(_) => None,
        }
    }

    pub fn state_for(&self, pop: &[Genotype]) -> Result<BreedState> {
        match &self.kind {
            BreederKind::Urn(_) => Ok(BreedState::default()),
            BreederKind::Mixture(m) => Ok(BreedState {
                counts: m.counts_of(pop)?,
            }),
        }
    }

    pub fn draw(&self, state: &BreedState, pop: &[Genotype], rng: &mut RngStream) -> Result<Genotype> {
        match &self.kind {
            BreederKind::Urn(u) => u.draw(pop, rng),
            BreederKind::Mixture(m) => m.draw(&state.counts, rng),
        }
    }

    pub fn add(&self, state: &mut BreedState, g: Genotype) {
        if let BreederKind::Mixture(m) = &self.kind {
            state.counts[m.index[&g]] += 1;
        }
    }

    pub fn replace(&self, state: &mut BreedState, old: Genotype, new: Genotype) {
        if let BreederKind::Mixture(m) = &self.kind {
            state.counts[m.index[&old]] -= 1;
            state.counts[m.index[&new]] += 1;
        }
    }

    /// Exact predictive law on a finite space, one mass per label.
    pub fn predictive_pmf(&self, space: Space, pop: &[Genotype]) -> Result<Vec<f64>> {
        let k = match space {
            Space::Finite { k } => k,
            Space::UnitInterval { .. } => {
                return Err(Error::Unsupported("exact predictive tables need a finite space".into()))
            }
        };
        let mut out = vec![0.0; k];
        match &self.kind {
            BreederKind::Urn(u) => {
                let n = pop.len() as f64;
                for (l, p) in out.iter_mut().enumerate() {
                    *p = u.mass * u.base_measure.atom_mass(Genotype::Label(l as u32)) / (u.mass + n);
                }
                for g in pop {
                    out[g.label().expect("finite population")] += 1.0 / (u.mass + n);
                }
            }
            BreederKind::Mixture(m) => {
                for (g, mass) in m.predictive(&m.counts_of(pop)?)? {
                    out[g.label().expect("finite support")] += mass;
                }
            }
        }
        Ok(out)
    }
}

/// A pmf over count vectors `(n_1, ..., n_K)` with `Σ n_k = n`.
///
/// Count vectors are listed with the first coordinate decreasing, then the
/// second, and so on: for `K = 2, n = 2` the order is (2,0), (1,1), (0,2).
#[derive(Clone, Debug, PartialEq)]
pub struct CountsLaw {
    pub k: usize,
    pub n: usize,
    pub counts: Vec<Vec<u32>>,
    pub probs: Vec<f64>,
}

impl CountsLaw {
    pub fn index_of(&self, counts: &[u32]) -> Option<usize> {
        self.counts.iter().position(|c| c == counts)
    }

    pub fn lookup(&self) -> HashMap<Vec<u32>, usize> {
        self.counts.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Builds a law from unnormalised log weights by log-sum-exp.
    pub(crate) fn from_log_weights(k: usize, n: usize, counts: Vec<Vec<u32>>, logs: Vec<f64>) -> Result<Self> {
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Err(Error::Inconsistent("every count vector has zero weight".into()));
        }
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = w.iter().sum();
        Ok(Self {
            k,
            n,
            counts,
            probs: w.into_iter().map(|x| x / z).collect(),
        })
    }
}

/// Number of count vectors of `n` individuals over `k` labels.
pub fn count_vectors(k: usize, n: usize) -> f64 {
    (ln_gamma((n + k) as f64) - ln_gamma(k as f64) - ln_gamma((n + 1) as f64))
        .exp()
        .round()
}

/// All count vectors in the documented order, guarded by [`COUNT_LIMIT`].
pub fn enumerate_counts(k: usize, n: usize) -> Result<Vec<Vec<u32>>> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one label".into()));
    }
    let needed = count_vectors(k, n);
    if needed > COUNT_LIMIT {
        return Err(Error::TooLarge {
            needed,
            limit: COUNT_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(needed as usize);
    let mut cur = vec![0u32; k];
    fill(&mut cur, 0, n as u32, &mut out);
    Ok(out)
}

fn fill(cur: &mut Vec<u32>, pos: usize, left: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for v in (0..=left).rev() {
        cur[pos] = v;
        fill(cur, pos + 1, left - v, out);
    }
}

/// `ln (n! / Π n_k!)`.
pub fn ln_multinomial(counts: &[u32]) -> f64 {
    let n: u32 = counts.iter().sum();
    ln_gamma(f64::from(n) + 1.0) - counts.iter().map(|&c| ln_gamma(f64::from(c) + 1.0)).sum::<f64>()
}

/// `ln (a)_m = ln Γ(a + m) − ln Γ(a)`.
pub fn ln_pochhammer(a: f64, m: u32) -> f64 {
    if m == 0 {
        0.0
    } else {
        ln_gamma(a + f64::from(m)) - ln_gamma(a)
    }
}

/// `Σ_k n_k ln p_k` with the convention `0 · ln 0 = 0`.
pub(crate) fn ln_power_product(counts: &[u32], p: &[f64]) -> f64 {
    counts
        .iter()
        .zip(p)
        .map(|(&c, &q)| if c == 0 { 0.0 } else { f64::from(c) * q.ln() })
        .sum()
}

fn finite_masses(m: &Measure) -> Result<Vec<f64>> {
    m.masses()
        .ok_or_else(|| Error::Unsupported("exact laws need components on a finite space".into()))
}

/// Exact law of the counts of `n` draws from a mixture prior:
/// `Σ_i weight_i · Multinomial(n; q_i)`.
pub fn prior_exact_law(prior: &MixturePrior, n: usize) -> Result<CountsLaw> {
    let k = prior.space().size();
    let qs: Vec<Vec<f64>> = prior.components().iter().map(|c| finite_masses(&c.1)).collect::<Result<_>>()?;
    let counts = enumerate_counts(k, n)?;
    let logs = counts
        .iter()
        .map(|c| {
            let terms: Vec<f64> = prior
                .components()
                .iter()
                .zip(&qs)
                .map(|((w, _), q)| w.ln() + ln_power_product(c, q))
                .collect();
            ln_multinomial(c) + log_sum_exp(&terms)
        })
        .collect();
    CountsLaw::from_log_weights(k, n, counts, logs)
}

/// Dirichlet-multinomial law of the counts of `n` urn draws with parameter
/// vector `alpha` (urn mass times base pmf).
pub fn dirichlet_multinomial_law(alpha: &[f64], n: usize) -> Result<CountsLaw> {
    let total: f64 = alpha.iter().sum();
    let counts = enumerate_counts(alpha.len(), n)?;
    let logs = counts
        .iter()
        .map(|c| {
            let mut l = ln_multinomial(c) - ln_pochhammer(total, n as u32);
            for (&a, &m) in alpha.iter().zip(c) {
                if m > 0 {
                    l += if a > 0.0 { ln_pochhammer(a, m) } else { f64::NEG_INFINITY };
                }
            }
            l
        })
        .collect();
    CountsLaw::from_log_weights(alpha.len(), n, counts, logs)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab(l: u32) -> Genotype {
        Genotype::Label(l)
    }

    fn pt(x: f64) -> Genotype {
        Genotype::Point(x)
    }

    fn two_point_mixture(a: &[f64], b: &[f64], wa: f64) -> MixturePrior {
        MixturePrior::new(vec![(wa, Measure::pmf(a).unwrap()), (1.0 - wa, Measure::pmf(b).unwrap())]).unwrap()
    }

    #[test]
    fn urn_probabilities_from_the_predictive_table() {
        let base = Measure::pmf(&[0.5, 0.5]).unwrap();
        let prior = PriorSpec::Dirichlet(DirichletPrior::new(1.0, base, MassRule::Fixed).unwrap());
        let b = Breeder::new(&prior, 2, 0.0);
        let p = b.predictive_pmf(Space::finite(2), &[lab(0), lab(0)]).unwrap();
        assert!((p[0] - (0.5 + 2.0) / 3.0).abs() < 1e-15);
        assert!((p[1] - 0.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn urn_thirds_on_the_interval() {
        let prior = DirichletPrior::new(1.0, Measure::uniform(64).unwrap(), MassRule::Fixed).unwrap();
        let pop = [pt(0.2), pt(0.5)];
        let mut rng = RngStream::new(11);
        let trials = 60_000;
        let (mut a, mut b, mut fresh) = (0, 0, 0);
        for _ in 0..trials {
            match polya_conditional_sample(&prior, 1.0, &pop, &mut rng).unwrap() {
                g if g == pt(0.2) => a += 1,
                g if g == pt(0.5) => b += 1,
                _ => fresh += 1,
            }
        }
        let sd = (trials as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in [a, b, fresh] {
            assert!((c as f64 - trials as f64 / 3.0).abs() < 4.0 * sd, "{a} {b} {fresh}");
        }
    }

    #[test]
    fn fresh_draw_frequency() {
        let prior = DirichletPrior::new(2.0, Measure::uniform(64).unwrap(), MassRule::Fixed).unwrap();
        let pop: Vec<Genotype> = (0..8).map(|i| pt(i as f64 / 10.0)).collect();
        let mut rng = RngStream::new(5);
        let trials = 100_000;
        let fresh = (0..trials)
            .filter(|_| !pop.contains(&polya_conditional_sample(&prior, 2.0, &pop, &mut rng).unwrap()))
            .count();
        let sd = (trials as f64 * 0.2 * 0.8).sqrt();
        assert!((fresh as f64 - 0.2 * trials as f64).abs() < 3.0 * sd);
    }

    #[test]
    fn tiny_mass_copies() {
        let prior = DirichletPrior::new(1e-12, Measure::uniform(64).unwrap(), MassRule::Fixed).unwrap();
        let pop = [pt(0.1), pt(0.9)];
        let mut rng = RngStream::new(3);
        for _ in 0..10_000 {
            assert!(pop.contains(&polya_conditional_sample(&prior, 1e-12, &pop, &mut rng).unwrap()));
        }
        assert_eq!(
            polya_conditional_sample(&prior, 0.0, &[], &mut rng),
            Err(Error::EmptyPopulation)
        );
    }

    #[test]
    fn mixture_predictive_examples() {
        let single = MixturePrior::new(vec![(1.0, Measure::pmf(&[0.3, 0.7]).unwrap())]).unwrap();
        let p = mixture_predictive(&single, &[lab(1), lab(1), lab(1)]).unwrap();
        assert_eq!(p, vec![(lab(0), 0.3), (lab(1), 0.7)]);

        let sharp = two_point_mixture(&[1.0, 0.0], &[0.0, 1.0], 0.5);
        let p = mixture_predictive(&sharp, &[lab(0)]).unwrap();
        assert_eq!(p, vec![(lab(0), 1.0), (lab(1), 0.0)]);

        let soft = two_point_mixture(&[0.9, 0.1], &[0.1, 0.9], 0.5);
        let p = mixture_predictive(&soft, &[lab(0)]).unwrap();
        let post = [0.5 * 0.9 / (0.5 * 0.9 + 0.5 * 0.1), 0.5 * 0.1 / (0.5 * 0.9 + 0.5 * 0.1)];
        let oracle = post[0] * 0.9 + post[1] * 0.1;
        assert!((p[0].1 - oracle).abs() < 1e-15);
        assert!((p[0].1 - 0.82).abs() < 1e-12 && (p[1].1 - 0.18).abs() < 1e-12);

        let impossible = two_point_mixture(&[1.0, 0.0], &[1.0, 0.0], 0.5);
        assert_eq!(mixture_predictive(&impossible, &[lab(1)]), Err(Error::ImpossiblePopulation));
    }

    #[test]
    fn mixture_predictive_is_permutation_invariant() {
        let prior = two_point_mixture(&[0.2, 0.3, 0.5], &[0.6, 0.3, 0.1], 0.3);
        let a = mixture_predictive(&prior, &[lab(0), lab(2), lab(2), lab(1)]).unwrap();
        let b = mixture_predictive(&prior, &[lab(2), lab(1), lab(0), lab(2)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn long_populations_do_not_underflow() {
        let prior = two_point_mixture(&[0.5, 0.5], &[0.4, 0.6], 0.5);
        let pop: Vec<Genotype> = (0..5000).map(|i| lab((i % 2) as u32)).collect();
        let p = mixture_predictive(&prior, &pop).unwrap();
        assert!((p[0].1 - 0.5).abs() < 1e-6);
    }

    #[test]
    fn mixture_sampling_frequency() {
        let prior = two_point_mixture(&[0.9, 0.1], &[0.1, 0.9], 0.5);
        let mut rng = RngStream::new(9);
        let trials = 100_000;
        let zeros = (0..trials)
            .filter(|_| mixture_conditional_sample(&prior, &[lab(0)], &mut rng).unwrap() == lab(0))
            .count();
        let sd = (trials as f64 * 0.82 * 0.18).sqrt();
        assert!((zeros as f64 - 0.82 * trials as f64).abs() < 4.0 * sd);
    }

    #[test]
    fn exact_prior_laws() {
        let q = [0.3, 0.7];
        let single = MixturePrior::new(vec![(1.0, Measure::pmf(&q).unwrap())]).unwrap();
        let law = prior_exact_law(&single, 2).unwrap();
        assert_eq!(law.counts, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let oracle = [0.09, 0.42, 0.49];
        for (p, o) in law.probs.iter().zip(oracle) {
            assert!((p - o).abs() < 1e-15);
        }

        let points = two_point_mixture(&[1.0, 0.0], &[0.0, 1.0], 0.25);
        let law = prior_exact_law(&points, 3).unwrap();
        assert!((law.probs[0] - 0.25).abs() < 1e-15);
        assert!((law.probs[3] - 0.75).abs() < 1e-15);
        assert!(law.probs[1].abs() < 1e-15 && law.probs[2].abs() < 1e-15);

        let empty = prior_exact_law(&points, 0).unwrap();
        assert_eq!(empty.counts, vec![vec![0, 0]]);
        assert_eq!(empty.probs, vec![1.0]);

        assert!(matches!(enumerate_counts(20, 40), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn mixture_law_matches_brute_force_convolution() {
        let prior = two_point_mixture(&[0.2, 0.5, 0.3], &[0.6, 0.1, 0.3], 0.4);
        let law = prior_exact_law(&prior, 3).unwrap();
        let mut brute: HashMap<Vec<u32>, f64> = HashMap::new();
        for (w, q) in prior.components() {
            let q = q.masses().unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        let mut key = vec![0u32; 3];
                        key[a] += 1;
                        key[b] += 1;
                        key[c] += 1;
                        *brute.entry(key).or_default() += w * q[a] * q[b] * q[c];
                    }
                }
            }
        }
        for (c, p) in law.counts.iter().zip(&law.probs) {
            assert!((brute[c] - p).abs() < 1e-14);
        }
    }

    #[test]
    fn urn_counts_follow_dirichlet_multinomial() {
        // Enumerate every urn path for K = 2, 3 and n ≤ 4.
        for alpha in [vec![0.7, 1.3], vec![0.5, 1.0, 2.0]] {
            let m: f64 = alpha.iter().sum();
            for n in 1..=4usize {
                let mut paths: Vec<(Vec<u32>, f64)> = vec![(vec![0; alpha.len()], 1.0)];
                for j in 0..n {
                    let mut next = Vec::new();
                    for (c, p) in &paths {
                        for k in 0..alpha.len() {
                            let step = (alpha[k] + f64::from(c[k])) / (m + j as f64);
                            let mut c2 = c.clone();
                            c2[k] += 1;
                            next.push((c2, p * step));
                        }
                    }
                    paths = next;
                }
                let law = dirichlet_multinomial_law(&alpha, n).unwrap();
                for (c, p) in law.counts.iter().zip(&law.probs) {
                    let brute: f64 = paths.iter().filter(|x| &x.0 == c).map(|x| x.1).sum();
                    assert!((brute - p).abs() < 1e-13, "{c:?}: {brute} vs {p}");
                }
            }
        }
    }

    #[test]
    fn mass_rules() {
        let d = DirichletPrior::new(2.0, Measure::uniform(8).unwrap(), MassRule::Scaled).unwrap();
        assert_eq!(d.mass(100, 0.0), 200.0);
        assert!((d.mass(100, 0.5) - 20.0).abs() < 1e-12);
        assert_eq!(d.mass(100, 1.0), 2.0);
        let f = DirichletPrior { mass_rule: MassRule::Fixed, ..d };
        assert_eq!(f.mass(100, 0.0), 2.0);
        assert!(DirichletPrior::new(0.0, Measure::uniform(8).unwrap(), MassRule::Fixed).is_err());
    }
}
