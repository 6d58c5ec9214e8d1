//! Selection kernels and exact transition matrices.
//!
//! Both kernels first breed a newborn `y` from the conditional law of the
//! breeding process given the population.
//!
//! * Tournament: pick `i` uniformly and replace `x_i` by `y` with probability
//!   `w(y) / (w(x_i) + w(y))`.
//! * Inverse fitness: pick one of the `n + 1` individuals (newborn included)
//!   with probability proportional to `1 / w`; the chosen one dies, so picking
//!   the newborn leaves the population unchanged.
//!
//! Fitness enters through the cost `φ(x) / n^λ`, so the tournament
//! probability is evaluated as a logistic function of a cost difference and
//! never divides two underflowed weights.
//!
//! Draw order per step: the newborn's draws (see [`crate::breeding`]), then for
//! the tournament one index draw and one uniform, and for the inverse kernel
//! one uniform.

use std::collections::BTreeMap;

use crate::breeding::{BreedState, Breeder, PriorSpec};
use crate::measures::{FitnessSpec, Genotype, Space};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Largest `K^n` accepted by [`exact_transition_matrix`].
pub const STATE_LIMIT: f64 = 1e4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kernel {
    Tournament,
    InverseFitness,
}

impl Kernel {
    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Tournament => "tournament",
            Kernel::InverseFitness => "inverse",
        }
    }
}

/// A population of fixed size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Population {
    pub members: Vec<Genotype>,
}

impl Population {
    pub fn new(members: Vec<Genotype>) -> Self {
        Self { members }
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }
}

/// Fenwick tree of nonnegative reals with prefix search.
#[derive(Clone, Debug)]
struct Fenwick {
    tree: Vec<f64>,
    values: Vec<f64>,
}

impl Fenwick {
    fn new(values: Vec<f64>) -> Self {
        let mut f = Self {
            tree: vec![0.0; values.len() + 1],
            values: vec![0.0; values.len()],
        };
        f.rebuild_from(values);
        f
    }

    fn rebuild_from(&mut self, values: Vec<f64>) {
        self.tree.iter_mut().for_each(|t| *t = 0.0);
        self.values = vec![0.0; values.len()];
        for (i, v) in values.into_iter().enumerate() {
            self.add(i, v);
        }
    }

    fn add(&mut self, i: usize, delta: f64) {
        self.values[i] += delta;
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        let d = v - self.values[i];
        self.add(i, d);
        self.values[i] = v;
    }

    fn total(&self) -> f64 {
        let mut s = 0.0;
        let mut j = self.tree.len() - 1;
        while j > 0 {
            s += self.tree[j];
            j &= j - 1;
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                pos = next;
                u -= self.tree[next];
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// A running selection chain: the population plus the cached costs and
/// breeding statistics that make one step cost O(log n).
#[derive(Clone, Debug)]
pub struct Evolver {
    kernel: Kernel,
    fit: FitnessSpec,
    scale: f64,
    breeder: Breeder,
    state: BreedState,
    members: Vec<Genotype>,
    costs: Vec<f64>,
    inverse: Option<Fenwick>,
    since_rebuild: usize,
}

impl Evolver {
    /// Starts from the given population.
    pub fn new(kernel: Kernel, prior: &PriorSpec, fit: &FitnessSpec, members: Vec<Genotype>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyPopulation);
        }
        let n = members.len();
        let breeder = Breeder::new(prior, n, fit.lambda);
        let state = breeder.state_for(&members)?;
        let scale = fit.scale(n);
        let costs: Vec<f64> = members.iter().map(|g| fit.phi.eval(*g) / scale).collect();
        let inverse = (kernel == Kernel::InverseFitness).then(|| Fenwick::new(costs.iter().map(|c| c.exp()).collect()));
        Ok(Self {
            kernel,
            fit: fit.clone(),
            scale,
            breeder,
            state,
            members,
            costs,
            inverse,
            since_rebuild: 0,
        })
    }

    /// Starts from `n` sequential draws of the breeding process begun on the
    /// empty population (the urn run forward).
    pub fn from_breeding(kernel: Kernel, prior: &PriorSpec, fit: &FitnessSpec, n: usize, rng: &mut RngStream) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyPopulation);
        }
        let breeder = Breeder::new(prior, n, fit.lambda);
        let mut pop = Vec::with_capacity(n);
        let mut state = breeder.state_for(&pop)?;
        for _ in 0..n {
            let g = breeder.draw(&state, &pop, rng)?;
            breeder.add(&mut state, g);
            pop.push(g);
        }
        Self::new(kernel, prior, fit, pop)
    }

    pub fn members(&self) -> &[Genotype] {
        &self.members
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    /// Applies one kernel step; returns whether the population changed.
    pub fn step(&mut self, rng: &mut RngStream) -> Result<bool> {
        let y = self.breeder.draw(&self.state, &self.members, rng)?;
        let cy = self.fit.phi.eval(y) / self.scale;
        let n = self.members.len();
        let target = match self.kernel {
            Kernel::Tournament => {
                let i = rng.index(n);
                let accept = 1.0 / (1.0 + (cy - self.costs[i]).exp());
                (rng.uniform() < accept).then_some(i)
            }
            Kernel::InverseFitness => {
                let tree = self.inverse.as_ref().expect("inverse kernel keeps a tree");
                let total = tree.total();
                let u = rng.uniform() * (total + cy.exp());
                (u < total).then(|| tree.find(u))
            }
        };
        let Some(i) = target else {
            return Ok(false);
        };
        let old = self.members[i];
        self.breeder.replace(&mut self.state, old, y);
        self.members[i] = y;
        self.costs[i] = cy;
        if let Some(tree) = self.inverse.as_mut() {
            tree.set(i, cy.exp());
            self.since_rebuild += 1;
            if self.since_rebuild >= 64 * n {
                tree.rebuild_from(self.costs.iter().map(|c| c.exp()).collect());
                self.since_rebuild = 0;
            }
        }
        Ok(old != y)
    }
}

fn single_step(kernel: Kernel, pop: &mut Population, prior: &PriorSpec, fit: &FitnessSpec, rng: &mut RngStream) -> Result<bool> {
    let mut ev = Evolver::new(kernel, prior, fit, std::mem::take(&mut pop.members))?;
    let changed = ev.step(rng)?;
    pop.members = ev.members;
    Ok(changed)
}

/// One tournament step applied to `pop` in place.
pub fn tournament_step(pop: &mut Population, prior: &PriorSpec, fit: &FitnessSpec, rng: &mut RngStream) -> Result<bool> {
    single_step(Kernel::Tournament, pop, prior, fit, rng)
}

/// One inverse-fitness step applied to `pop` in place.
pub fn inverse_fitness_step(pop: &mut Population, prior: &PriorSpec, fit: &FitnessSpec, rng: &mut RngStream) -> Result<bool> {
    single_step(Kernel::InverseFitness, pop, prior, fit, rng)
}

/// Row-sparse stochastic matrix over ordered tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        row.binary_search_by(|e| e.0.cmp(&j)).map_or(0.0, |p| row[p].1)
    }

    /// `π P` for a row vector `π`.
    pub fn left_multiply(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                out[j] += pi[i] * p;
            }
        }
        out
    }
}

/// The tuple with index `index`; the first coordinate is the most
/// significant base-`k` digit.
pub fn decode_state(index: usize, k: usize, n: usize) -> Vec<Genotype> {
    let mut out = vec![Genotype::Label(0); n];
    let mut rest = index;
    for slot in out.iter_mut().rev() {
        *slot = Genotype::Label((rest % k) as u32);
        rest /= k;
    }
    out
}

pub fn encode_state(tuple: &[Genotype], k: usize) -> usize {
    tuple.iter().fold(0, |acc, g| acc * k + g.label().expect("finite tuple"))
}

/// Number of ordered tuples `K^n`, refusing enumerations above
/// [`STATE_LIMIT`].
pub fn tuple_count(k: usize, n: usize) -> Result<usize> {
    let needed = (k as f64).powi(n as i32);
    if needed > STATE_LIMIT {
        return Err(Error::TooLarge {
            needed,
            limit: STATE_LIMIT,
        });
    }
    Ok(k.pow(n as u32))
}

/// Exact one-step transition matrix of `kernel` on `X^n` for a finite space.
///
/// Every entry, including the probability of staying put, is accumulated
/// from the kernel formula, and each row is checked to sum to one within
/// 1e−12.
pub fn exact_transition_matrix(kernel: Kernel, space: Space, n: usize, prior: &PriorSpec, fit: &FitnessSpec) -> Result<SparseMatrix> {
    let k = match space {
        Space::Finite { k } => k,
        Space::UnitInterval { .. } => {
            return Err(Error::Unsupported("exact transition matrices need a finite space".into()))
        }
    };
    if prior.space() != space {
        return Err(Error::SpaceMismatch(prior.space().describe(), space.describe()));
    }
    fit.validate(space)?;
    let states = tuple_count(k, n)?;
    let breeder = Breeder::new(prior, n, fit.lambda);
    let scale = fit.scale(n);
    let label_cost: Vec<f64> = (0..k).map(|l| fit.phi.eval(Genotype::Label(l as u32)) / scale).collect();
    let mut rows = Vec::with_capacity(states);
    for s in 0..states {
        let x = decode_state(s, k, n);
        let pred = breeder.predictive_pmf(space, &x)?;
        let cost: Vec<f64> = x.iter().map(|g| label_cost[g.label().unwrap()]).collect();
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        let mut stay = 0.0;
        for (y, &py) in pred.iter().enumerate() {
            if py == 0.0 {
                continue;
            }
            let cy = label_cost[y];
            let mut moves = |i: usize, p: f64, stay: &mut f64| {
                if x[i].label() == Some(y) {
                    *stay += p;
                } else {
                    let mut t = x.clone();
                    t[i] = Genotype::Label(y as u32);
                    *row.entry(encode_state(&t, k)).or_insert(0.0) += p;
                }
            };
            match kernel {
                Kernel::Tournament => {
                    for i in 0..n {
                        let accept = 1.0 / (1.0 + (cy - cost[i]).exp());
                        moves(i, py * accept / n as f64, &mut stay);
                        stay += py * (1.0 - accept) / n as f64;
                    }
                }
                Kernel::InverseFitness => {
                    let z: f64 = cost.iter().map(|c| c.exp()).sum::<f64>() + cy.exp();
                    for i in 0..n {
                        moves(i, py * cost[i].exp() / z, &mut stay);
                    }
                    stay += py * cy.exp() / z;
                }
            }
        }
        *row.entry(s).or_insert(0.0) += stay;
        let total: f64 = row.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Inconsistent(format!("row {s} sums to {total}")));
        }
        rows.push(row.into_iter().collect());
    }
    Ok(SparseMatrix { rows })
}
