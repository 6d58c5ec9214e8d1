use serde::Serialize;

use crate::measures::{Measure, PhiSpec};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerRow {
    pub m: u64,
    /// `⟨e^{−φ/m}, q⟩^m`.
    pub value: f64,
    /// `e^{−⟨φ, q⟩}`.
    pub target: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerProductTable {
    pub rows: Vec<PowerRow>,
    /// Smallest `C` with `residual ≤ C/m` on every row.
    pub fitted_c: f64,
}

impl PowerProductTable {
    /// `residual(m) / residual(2m)` for every row whose double is also listed.
    pub fn halving_ratios(&self) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| {
                let twice = self.rows.iter().find(|s| s.m == 2 * r.m)?;
                Some((r.m, r.residual / twice.residual))
            })
            .collect()
    }
}

/// Residuals `|⟨e^{−φ/m}, q⟩^m − e^{−⟨φ, q⟩}|`.
///
/// The base of the power is `1 − s` with `s = ⟨1 − e^{−φ/m}, q⟩` formed by
/// `expm1`, and the power is taken as `exp(m · ln1p(−s))`, so nothing
/// cancels at large `m`.
pub fn power_product_limit(phi: &PhiSpec, q: &Measure, ms: &[u64]) -> Result<PowerProductTable> {
    phi.validate(q.space())?;
    let target = (-q.expect(&|g| phi.eval(g))?).exp();
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        let mf = m as f64;
        let s = q.expect(&|g| -(-phi.eval(g) / mf).exp_m1())?;
        let value = (mf * (-s).ln_1p()).exp();
        rows.push(PowerRow {
            m,
            value,
            target,
            residual: (value - target).abs(),
        });
    }
    let fitted_c = rows.iter().map(|r| r.m as f64 * r.residual).fold(0.0, f64::max);
    Ok(PowerProductTable { rows, fitted_c })
}

/// `(1 + x)(1 + 1/x)^x α^x (1 − α)`, continuous at `x = 0` and at the ends
/// of `[0, 1]`.
pub fn append_value(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        return 1.0 - alpha;
    }
    if alpha <= 0.0 || alpha >= 1.0 {
        return 0.0;
    }
    let log = x.ln_1p() + x * (1.0 / x).ln_1p() + x * alpha.ln() + (-alpha).ln_1p();
    log.exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxBound {
    pub value: f64,
    pub x: f64,
    pub alpha: f64,
}

/// Largest `x` searched; the ridge `x = α/(1 − α)` leaves it only for α > 0.95.
const X_MAX: f64 = 20.0;

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Grid search of `append_value` over `[0, 20] × [0, 1]` with `grid` steps per
/// axis, refined by alternating golden-section searches.
pub fn elementary_max_bound(grid: usize) -> MaxBound {
    let grid = grid.max(2);
    let mut best = MaxBound {
        value: f64::NEG_INFINITY,
        x: 0.0,
        alpha: 0.0,
    };
    for i in 0..=grid {
        let alpha = i as f64 / grid as f64;
        for j in 0..=grid {
            let x = X_MAX * j as f64 / grid as f64;
            let v = append_value(x, alpha);
            if v > best.value {
                best = MaxBound { value: v, x, alpha };
            }
        }
    }
    let (hx, ha) = (X_MAX / grid as f64, 1.0 / grid as f64);
    let (mut x, mut alpha) = (best.x, best.alpha);
    for _ in 0..4 {
        x = golden_max(|t| append_value(t, alpha), (x - hx).max(0.0), (x + hx).min(X_MAX));
        alpha = golden_max(|t| append_value(x, t), (alpha - ha).max(0.0), (alpha + ha).min(1.0));
    }
    let refined = append_value(x, alpha);
    if refined > best.value {
        best = MaxBound { value: refined, x, alpha };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_value_special_points() {
        assert!((append_value(1.0, 0.5) - 1.0).abs() < 1e-15);
        for x in [0.1, 1.0, 7.0] {
            assert_eq!(append_value(x, 0.0), 0.0);
        }
        for alpha in [0.05, 0.3, 0.5, 0.9] {
            let v = append_value(alpha / (1.0 - alpha), alpha);
            assert!((v - 1.0).abs() < 1e-13, "{alpha}: {v}");
        }
    }

    #[test]
    fn bound_is_one() {
        let b = elementary_max_bound(200);
        assert!(b.value <= 1.0 + 1e-9 && b.value >= 1.0 - 1e-9, "{b:?}");
    }

    #[test]
    fn constant_phi_has_no_residual() {
        let phi = PhiSpec::FiniteTable { values: vec![0.8, 0.8] };
        let q = Measure::pmf(&[0.3, 0.7]).unwrap();
        let t = power_product_limit(&phi, &q, &[1, 10, 1000]).unwrap();
        for r in &t.rows {
            assert!(r.residual < 1e-15, "{r:?}");
        }
    }

    #[test]
    fn two_point_rate() {
        // ⟨e^{−φ/m}, q⟩^m = e^{−1/2}(1 + 1/(8m) + O(m^{-2})), from the cumulant expansion.
        let phi = PhiSpec::FiniteTable { values: vec![0.0, 1.0] };
        let q = Measure::pmf(&[0.5, 0.5]).unwrap();
        let t = power_product_limit(&phi, &q, &[10_000, 20_000]).unwrap();
        let oracle = (-0.5f64).exp() / (8.0 * 1e4);
        assert!((t.rows[0].residual - oracle).abs() < 1e-3 * oracle);
        assert!(t.rows[0].residual < 1e-4);
        let (_, ratio) = t.halving_ratios()[0];
        assert!((ratio - 2.0).abs() < 0.01);
    }
}
