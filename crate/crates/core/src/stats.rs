//! Goodness-of-fit and trend statistics used by the verification harness.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::{Error, Result};

/// Smallest expected count a χ² cell may have; smaller cells are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells left after pooling.
    pub cells: usize,
}

/// Pearson χ² test of `observed` counts against `probs`.
///
/// Cells are sorted by expected count and pooled, smallest first, until every
/// pooled cell expects at least [`MIN_EXPECTED`] observations; a leftover
/// group too small on its own joins the last full one.
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() {
        return Err(Error::InvalidParameter("observed and expected differ in length".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    let n = total as f64;
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut e, mut o) = (0.0, 0.0);
    for i in order {
        e += probs[i] * n;
        o += observed[i] as f64;
        if e >= MIN_EXPECTED {
            groups.push((e, o));
            e = 0.0;
            o = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += e;
                last.1 += o;
            }
            None => groups.push((e, o)),
        }
    }
    if groups.len() < 2 {
        return Err(Error::InvalidParameter("too few observations for a chi-square test".into()));
    }
    let statistic: f64 = groups
        .iter()
        .map(|&(e, o)| if e > 0.0 { (o - e) * (o - e) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = groups.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: if statistic.is_finite() { dist.sf(statistic) } else { 0.0 },
        cells: groups.len(),
    })
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            out[k] = avg;
        }
        i = j;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Trend {
    pub rho: f64,
    /// One-sided p-value against a decreasing alternative.
    pub p_value: f64,
    /// Whether the p-value comes from the full permutation distribution.
    pub exact: bool,
}

/// Largest sample for which every permutation is enumerated.
const EXACT_SPEARMAN_MAX: usize = 10;

/// Spearman rank correlation of `y` on `x`, tested against the alternative
/// that `y` decreases with `x`.
///
/// Up to ten points the p-value is `P(ρ ≤ ρ_obs)` over all permutations;
/// beyond that it uses the Student t approximation.
pub fn spearman_decreasing(x: &[f64], y: &[f64]) -> Result<Trend> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidParameter("a trend test needs at least three paired values".into()));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let rho = pearson(&rx, &ry);
    let n = x.len();
    if n <= EXACT_SPEARMAN_MAX {
        let mut perm = ry.clone();
        let mut hits = 0u64;
        let mut all = 0u64;
        let tol = 1e-12;
        permute(&mut perm, 0, &mut |p| {
            all += 1;
            if pearson(&rx, p) <= rho + tol {
                hits += 1;
            }
        });
        return Ok(Trend {
            rho,
            p_value: hits as f64 / all as f64,
            exact: true,
        });
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho).max(1e-300)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(Trend {
        rho,
        p_value: dist.cdf(t),
        exact: false,
    })
}

/// Visits every ordering of `v`.
fn permute(v: &mut [f64], k: usize, visit: &mut dyn FnMut(&[f64])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_of_a_perfect_fit_is_zero() {
        let r = chi_square_test(&[25, 25, 50], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_matches_hand_value() {
        // (60−50)²/50 + (40−50)²/50 = 4 on one degree of freedom: p = erfc(√2).
        let r = chi_square_test(&[60, 40], &[0.5, 0.5]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.04550026389635842).abs() < 1e-9);
    }

    #[test]
    fn small_cells_are_pooled() {
        let r = chi_square_test(&[3, 4, 993], &[0.003, 0.004, 0.993]).unwrap();
        assert_eq!(r.cells, 2);
        assert!(r.statistic.abs() < 1e-12);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn exact_spearman_for_a_perfect_decrease() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let t = spearman_decreasing(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((t.rho + 1.0).abs() < 1e-12);
        assert!((t.p_value - 1.0 / 120.0).abs() < 1e-15);
        let up = spearman_decreasing(&x, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(up.p_value, 1.0);
    }

    #[test]
    fn one_swap_among_six() {
        // ρ = 1 − 6·2/(6·35) for one adjacent swap; the permutations at or
        // below −ρ are the identity-reversal and its five adjacent swaps.
        let x: Vec<f64> = (1..=6).map(f64::from).collect();
        let t = spearman_decreasing(&x, &[6.0, 5.0, 3.0, 4.0, 2.0, 1.0]).unwrap();
        assert!((t.rho + (1.0 - 12.0 / 210.0)).abs() < 1e-12);
        assert!((t.p_value - 6.0 / 720.0).abs() < 1e-15);
    }
}
