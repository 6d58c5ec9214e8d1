use serde::{Deserialize, Serialize};

use super::{Genotype, Space};
use crate::{Error, Result};

/// The selection potential φ ≥ 0; fitness is `exp(−φ / n^λ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PhiSpec {
    /// `φ(x) = |x − x_o|^p` on the unit interval.
    PowerDistance { x_o: f64, p: f64 },
    /// One value per label of a finite space.
    FiniteTable { values: Vec<f64> },
    /// Values at the equally spaced nodes `j / (L − 1)`, linearly
    /// interpolated in between.
    TabulatedInterval { values: Vec<f64> },
}

impl PhiSpec {
    pub fn validate(&self, space: Space) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match (self, space) {
            (PhiSpec::PowerDistance { x_o, p }, Space::UnitInterval { .. }) => {
                if !(0.0..=1.0).contains(x_o) {
                    return bad(format!("x_o = {x_o} is outside [0, 1]"));
                }
                if !(*p > 0.0 && p.is_finite()) {
                    return bad(format!("exponent p = {p} must be positive"));
                }
                Ok(())
            }
            (PhiSpec::FiniteTable { values }, Space::Finite { k }) => {
                if values.len() != k {
                    return bad(format!("phi table has {} values for {k} labels", values.len()));
                }
                check_values(values)
            }
            (PhiSpec::TabulatedInterval { values }, Space::UnitInterval { .. }) => {
                if values.len() < 2 {
                    return bad("a tabulated phi needs at least two nodes".into());
                }
                check_values(values)
            }
            (phi, space) => bad(format!("{} does not fit the {}", phi.family(), space.describe())),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            PhiSpec::PowerDistance { .. } => "power_distance",
            PhiSpec::FiniteTable { .. } => "finite_table",
            PhiSpec::TabulatedInterval { .. } => "tabulated_interval",
        }
    }

    /// φ at `g`. Panics when the genotype kind does not match the family,
    /// which validation rules out.
    pub fn eval(&self, g: Genotype) -> f64 {
        match (self, g) {
            (PhiSpec::PowerDistance { x_o, p }, Genotype::Point(x)) => (x - x_o).abs().powf(*p),
            (PhiSpec::FiniteTable { values }, Genotype::Label(l)) => values[l as usize],
            (PhiSpec::TabulatedInterval { values }, Genotype::Point(x)) => {
                let segs = (values.len() - 1) as f64;
                let t = (x * segs).clamp(0.0, segs);
                let j = (t.floor() as usize).min(values.len() - 2);
                let frac = t - j as f64;
                values[j] + (values[j + 1] - values[j]) * frac
            }
            (phi, g) => panic!("genotype {g} does not belong to a {} potential", phi.family()),
        }
    }

    /// φ_o, the minimum of φ.
    pub fn min_value(&self) -> f64 {
        match self {
            PhiSpec::PowerDistance { .. } => 0.0,
            PhiSpec::FiniteTable { values } | PhiSpec::TabulatedInterval { values } => {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            PhiSpec::PowerDistance { x_o, p } => x_o.max(1.0 - x_o).powf(*p),
            PhiSpec::FiniteTable { values } | PhiSpec::TabulatedInterval { values } => {
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_value() == self.min_value()
    }

    /// `φ(g) − φ_o`, computed without cancellation where possible.
    pub fn excess(&self, g: Genotype) -> f64 {
        match self {
            PhiSpec::PowerDistance { .. } => self.eval(g),
            _ => (self.eval(g) - self.min_value()).max(0.0),
        }
    }

    /// The minimiser x_o when it is unique.
    pub fn minimizer(&self) -> Option<Genotype> {
        match self {
            PhiSpec::PowerDistance { x_o, .. } => Some(Genotype::Point(*x_o)),
            PhiSpec::FiniteTable { values } => {
                let lo = self.min_value();
                let mut hits = values.iter().enumerate().filter(|(_, v)| **v == lo);
                let first = hits.next().map(|(i, _)| i);
                match (first, hits.next()) {
                    (Some(i), None) => Some(Genotype::Label(i as u32)),
                    _ => None,
                }
            }
            PhiSpec::TabulatedInterval { values } => {
                let lo = self.min_value();
                let mut hits = values.iter().enumerate().filter(|(_, v)| **v == lo);
                let first = hits.next().map(|(i, _)| i);
                match (first, hits.next()) {
                    (Some(i), None) => Some(Genotype::Point(i as f64 / (values.len() - 1) as f64)),
                    _ => None,
                }
            }
        }
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        Some(v) => Err(Error::InvalidParameter(format!("phi value {v} must be a nonnegative real"))),
        None => Ok(()),
    }
}

/// A potential together with the selection exponent λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessSpec {
    pub phi: PhiSpec,
    pub lambda: f64,
}

impl FitnessSpec {
    pub fn new(phi: PhiSpec, lambda: f64) -> Self {
        Self { phi, lambda }
    }

    pub fn validate(&self, space: Space) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda = {} must be >= 0", self.lambda)));
        }
        self.phi.validate(space)
    }

    /// `n^λ`, exactly one when λ = 0.
    pub fn scale(&self, n: usize) -> f64 {
        if self.lambda == 0.0 {
            1.0
        } else {
            (n as f64).powf(self.lambda)
        }
    }

    pub fn weight(&self, n: usize, g: Genotype) -> f64 {
        (-self.phi.eval(g) / self.scale(n)).exp()
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            phi: self.phi.clone(),
            lambda,
        }
    }
}

/// `w_n(x) = exp(−φ(x) / n^λ)`.
pub fn weight_at(fit: &FitnessSpec, n: usize, x: Genotype) -> f64 {
    fit.weight(n, x)
}
