use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use moran_core::chain::{counts_of, exact_stationary_law, run_chain, SampleSet};
use moran_core::limits::predict_limit;
use moran_core::measures::{ks_statistic, tv_distance, wasserstein1, Space};
use moran_core::verify::{
    compare_counts, detailed_balance_residual, stationarity_residual, sweep_convergence, sweep_csv, sweep_trends,
};

use crate::config::{Config, ConfigError};

/// Failure of a subcommand, split by exit code.
pub enum Failure {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<moran_core::Error> for Failure {
    fn from(e: moran_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(dir, name, &text)
}

fn histogram(ss: &SampleSet, k: usize) -> BTreeMap<Vec<u32>, u64> {
    let mut hist = BTreeMap::new();
    for p in &ss.populations {
        *hist.entry(counts_of(&p.members, k)).or_insert(0) += 1;
    }
    hist
}

pub fn simulate(cfg: &Config) -> Result<(), Failure> {
    let chain = cfg.chain()?;
    let ss = run_chain(&chain, &cfg.prior, cfg.fitness())?;
    let dir = &cfg.out;
    let pooled = ss.pooled_measure()?;
    let mean: f64 = ss
        .populations
        .iter()
        .flat_map(|p| p.members.iter())
        .map(|g| g.value())
        .sum::<f64>()
        / (ss.populations.len() * ss.n) as f64;

    let mut summary = json!({
        "seed": chain.seed,
        "n": chain.n,
        "steps": chain.steps,
        "burn_in": chain.burn_in,
        "thin": chain.thin,
        "kernel": chain.kernel.name(),
        "replicas": chain.replicas,
        "samples": ss.populations.len(),
        "pooled_mean": mean,
    });
    summary["limit"] = match predict_limit(&cfg.prior, cfg.fitness()) {
        Ok(lim) if ss.space.is_finite() => json!({
            "regime": lim.regime.tag(),
            "tv": tv_distance(&pooled, &lim.measure)?,
        }),
        Ok(lim) => json!({
            "regime": lim.regime.tag(),
            "ks": ks_statistic(&pooled, &lim.measure)?,
            "w1": wasserstein1(&pooled, &lim.measure)?,
        }),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };

    match ss.space {
        Space::Finite { k } => {
            write(dir, "counts.csv", &ss.counts_csv()?)?;
            summary["exact"] = match exact_stationary_law(&cfg.prior, cfg.fitness(), chain.n) {
                Ok(law) => serde_json::to_value(compare_counts(&histogram(&ss, k), &law, 0)?)
                    .context("cannot encode the exact comparison")?,
                Err(e) => json!({ "unavailable": e.to_string() }),
            };
        }
        Space::UnitInterval { .. } => write(dir, "values.csv", &ss.values_csv())?,
    }
    write(dir, "pooled_cdf.csv", &pooled.cdf_csv())?;
    write_json(dir, "summary.json", &summary)?;
    Ok(())
}

pub fn limit(cfg: &Config) -> Result<(), Failure> {
    let lim = predict_limit(&cfg.prior, cfg.fitness())?;
    write_json(&cfg.out, "limit.json", &lim)?;
    write(&cfg.out, "limit_cdf.csv", &lim.measure.cdf_csv())?;
    Ok(())
}

pub fn balance(cfg: &Config) -> Result<(), Failure> {
    let (n, kernels) = cfg.balance()?;
    let mut rows = Vec::with_capacity(kernels.len());
    for kernel in kernels {
        rows.push(json!({
            "kernel": kernel.name(),
            "detailed_balance_residual": detailed_balance_residual(kernel, cfg.space(), n, &cfg.prior, cfg.fitness())?,
            "stationarity_residual": stationarity_residual(kernel, cfg.space(), n, &cfg.prior, cfg.fitness())?,
        }));
    }
    write_json(&cfg.out, "balance.json", &json!({ "n": n, "kernels": rows }))?;
    Ok(())
}

pub fn oracle(cfg: &Config) -> Result<(), Failure> {
    let n = cfg.oracle()?;
    let law = exact_stationary_law(&cfg.prior, cfg.fitness(), n)?;
    let mut csv = String::new();
    for l in 0..law.k {
        csv.push_str(&format!("n_{l},"));
    }
    csv.push_str("probability\n");
    for (c, p) in law.counts.iter().zip(&law.probs) {
        for x in c {
            csv.push_str(&format!("{x},"));
        }
        csv.push_str(&format!("{p}\n"));
    }
    write(&cfg.out, "oracle.csv", &csv)?;
    let rows: Vec<Value> = law
        .counts
        .iter()
        .zip(&law.probs)
        .map(|(c, p)| json!({ "counts": c, "probability": p }))
        .collect();
    write_json(&cfg.out, "oracle.json", &json!({ "n": n, "k": law.k, "law": rows }))?;
    Ok(())
}

pub fn sweep(cfg: &Config) -> Result<(), Failure> {
    let spec = cfg.sweep()?;
    let cells = sweep_convergence(&spec)?;
    write(&cfg.out, "sweep.csv", &sweep_csv(&cells))?;
    let trends: Vec<Value> = sweep_trends(&cells)?
        .into_iter()
        .map(|(lambda, t)| json!({ "lambda": lambda, "rho": t.rho, "p_value": t.p_value, "exact": t.exact }))
        .collect();
    write_json(&cfg.out, "sweep.json", &json!({ "seed": spec.seed, "cells": cells, "trends": trends }))?;
    Ok(())
}
