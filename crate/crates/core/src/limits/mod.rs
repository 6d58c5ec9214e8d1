//! Large-population limits.
//!
//! For a Dirichlet prior whose urn mass scales as `c · n^(1−λ)` the limit of
//! the per-individual law is either a density with respect to the base
//! measure ᾱ or a density plus an atom at the fittest type x_o; which one is
//! decided by a threshold integral that may diverge. For priors that do not
//! depend on `n` the limit is the prior itself, an exponentially reweighted
//! prior, or the point mass at `δ_{x_o}`, depending on λ.
//!
//! Both Dirichlet cases are handled by one engine. Writing `Δ = φ − φ_o` and
//! `e(x) = 1 − e^{−Δ(x)}` (λ = 0) or `e(x) = Δ(x)` (0 < λ < 1), the candidate
//! densities are
//!
//! ```text
//! f_u(x) = c / (u + v(u) · e(x)),   u ∈ [0, c],
//! ```
//!
//! with `v(u) = 1 + c − u` for λ = 0 and `v(u) = 1` otherwise. The map
//! `u ↦ ∫ f_u dᾱ` is strictly decreasing, `f_c ≤ 1`, and the threshold holds
//! exactly when `∫ f_0 dᾱ ≥ 1`. Then the unique root gives
//! `θ = w̄ / (1 + c − u)` or `θ = φ_o + c − u`; otherwise `f_0` is the density
//! part and the missing mass sits at x_o.

mod dp;
mod fixed;
mod objective;
mod props;

use serde::{Serialize, Serializer};

pub use dp::{
    check_marta, check_marta2, check_threshold, critical_exponent, limit_measure_frac, limit_measure_lambda0,
    solve_theta, solve_theta_frac, solve_theta_lambda0, threshold_integral, ThetaSolution, ThresholdCheck,
};
pub use fixed::{limit_fixed_prior, limit_prior_lambda1, predict_limit};
pub use objective::{objective_at_limit, objective_f, ShapedObjective};
pub use props::{append_value, elementary_max_bound, power_product_limit, MaxBound, PowerProductTable};

use crate::measures::Measure;
use crate::{Error, Result};

/// Which of the two Dirichlet regimes a computation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// λ = 0: fitness `e^{−φ}` does not fade.
    Lambda0,
    /// 0 < λ < 1.
    Frac,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    #[serde(rename = "lambda_gt1")]
    LambdaGt1,
    #[serde(rename = "lambda_eq1")]
    LambdaEq1,
    #[serde(rename = "lambda_in_0_1_fixed_prior")]
    LambdaIn01FixedPrior,
    #[serde(rename = "dp_lambda0_density")]
    DpLambda0Density,
    #[serde(rename = "dp_lambda0_atom")]
    DpLambda0Atom,
    #[serde(rename = "dp_frac_density")]
    DpFracDensity,
    #[serde(rename = "dp_frac_atom")]
    DpFracAtom,
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::LambdaGt1 => "lambda_gt1",
            Regime::LambdaEq1 => "lambda_eq1",
            Regime::LambdaIn01FixedPrior => "lambda_in_0_1_fixed_prior",
            Regime::DpLambda0Density => "dp_lambda0_density",
            Regime::DpLambda0Atom => "dp_lambda0_atom",
            Regime::DpFracDensity => "dp_frac_density",
            Regime::DpFracAtom => "dp_frac_atom",
        }
    }

    pub fn has_atom(&self) -> bool {
        matches!(self, Regime::DpLambda0Atom | Regime::DpFracAtom)
    }
}

/// The limit of `Q_n`, a law on measures.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QnLimit {
    /// `Q_n` concentrates on one measure.
    PointMass { measure: Measure },
    /// A finite mixture of point masses `Σ weight_i δ_{q_i}`.
    Mixture { components: Vec<(f64, Measure)> },
    /// The Dirichlet process law `DP(c, base)`.
    Dirichlet { c: f64, base: Measure },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitResult {
    pub regime: Regime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_o: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdCheck>,
    /// Predicted limit law of one individual.
    pub measure: Measure,
    /// The maximiser q* of the objective, when it differs from `measure`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_star: Option<Measure>,
    pub qn_limit: QnLimit,
}

/// Writes `±∞` as the strings `"inf"` / `"-inf"`, which JSON cannot hold.
pub(crate) fn extended_real<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*x)
    }
}

/// Root of a decreasing function on `[lo, hi]` with `g(lo) ≥ 0 ≥ g(hi)`.
///
/// Regula falsi with the Illinois modification, so the bracket always holds
/// the root; stops when the bracket is narrower than `xtol` or `|g| ≤ ftol`.
pub(crate) fn decreasing_root(
    mut g: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    xtol: f64,
    ftol: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut ga, mut gb) = (g(a)?, g(b)?);
    if ga < 0.0 || gb > 0.0 {
        return Err(Error::Bracket(format!("g({a}) = {ga}, g({b}) = {gb}")));
    }
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    let mut side = 0i8;
    for _ in 0..300 {
        let mut x = (a * gb - b * ga) / (gb - ga);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        let gx = g(x)?;
        if gx.abs() <= ftol {
            return Ok(x);
        }
        if gx > 0.0 {
            a = x;
            ga = gx;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            gb = gx;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        }
        if b - a <= xtol {
            break;
        }
    }
    Ok(if ga.abs() < gb.abs() { a } else { b })
}
