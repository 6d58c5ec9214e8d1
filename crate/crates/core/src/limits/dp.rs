use serde::Serialize;

use super::{decreasing_root, extended_real, LimitResult, Mode, QnLimit, Regime};
use crate::measures::{quad, FitnessSpec, Genotype, Measure, PhiSpec, QuadOptions, SingularValue, DEFAULT_CELLS};
use crate::{Error, Result};

/// Outcome of a threshold test: `holds ⇔ integral ≥ threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdCheck {
    pub holds: bool,
    #[serde(serialize_with = "extended_real")]
    pub integral: f64,
    pub threshold: f64,
}

/// A solved fixed point together with its two residuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaSolution {
    pub theta: f64,
    /// Position of the root on the common `[0, c]` scale.
    pub u: f64,
    /// `|∫ f_θ dᾱ − 1|`.
    pub mass_residual: f64,
    /// `|θ − ⟨w, f_θ⟩|` for λ = 0, `|θ − ⟨φ, f_θ⟩|` otherwise.
    pub identity_residual: f64,
}

/// Limits on cells whose mass deviates from one by more than this are
/// rejected rather than silently renormalised.
const BUILD_MASS_TOL: f64 = 1e-8;

pub(crate) struct Problem<'a> {
    pub phi: &'a PhiSpec,
    pub base: &'a Measure,
    pub c: f64,
    pub mode: Mode,
    pub x_o: Option<Genotype>,
    pub phi_o: f64,
}

impl<'a> Problem<'a> {
    pub fn new(phi: &'a PhiSpec, base: &'a Measure, c: f64, mode: Mode) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("concentration c = {c} must be positive")));
        }
        phi.validate(base.space())?;
        let x_o = phi.minimizer();
        if x_o.is_none() && !base.space().is_finite() && !phi.is_constant() {
            return Err(Error::Unsupported("phi must have a unique minimiser on the unit interval".into()));
        }
        Ok(Self {
            phi,
            base,
            c,
            mode,
            x_o,
            phi_o: phi.min_value(),
        })
    }

    pub fn gap(&self, g: Genotype) -> f64 {
        let d = self.phi.excess(g);
        match self.mode {
            Mode::Lambda0 => -(-d).exp_m1(),
            Mode::Frac => d,
        }
    }

    pub fn v(&self, u: f64) -> f64 {
        match self.mode {
            Mode::Lambda0 => 1.0 + self.c - u,
            Mode::Frac => 1.0,
        }
    }

    /// The candidate density `f_u`.
    pub fn f(&self, u: f64, g: Genotype) -> f64 {
        self.c / (u + self.v(u) * self.gap(g))
    }

    pub fn theta(&self, u: f64) -> f64 {
        match self.mode {
            Mode::Lambda0 => (-self.phi_o).exp() / (1.0 + self.c - u),
            Mode::Frac => self.phi_o + self.c - u,
        }
    }

    pub fn threshold(&self) -> f64 {
        match self.mode {
            Mode::Lambda0 => (1.0 + self.c) / self.c,
            Mode::Frac => 1.0 / self.c,
        }
    }

    /// `∫ f_0 dᾱ` in terms of the threshold integral.
    fn beta_of(&self, integral: f64) -> f64 {
        integral / self.threshold()
    }

    pub fn integrate(&self, h: &dyn Fn(Genotype) -> f64, opts: &QuadOptions) -> Result<SingularValue> {
        self.base.integrate(h, self.x_o, opts)
    }

    fn threshold_integral(&self, opts: &QuadOptions) -> Result<SingularValue> {
        if self.phi.is_constant() {
            return Ok(SingularValue {
                value: f64::INFINITY,
                lower_bound: f64::INFINITY,
            });
        }
        self.integrate(&|g| 1.0 / self.gap(g), opts)
    }

    fn check(&self) -> Result<ThresholdCheck> {
        let t = self.threshold();
        let opts = QuadOptions::default();
        let mut v = self.threshold_integral(&opts)?;
        if v.value.is_finite() && (v.value - t).abs() < 1e-6 * t {
            let tight = opts.tightened(100.0);
            v = self.threshold_integral(&tight)?;
            let margin = 10.0 * tight.rel_tol * t;
            if (v.value - t).abs() < margin && v.lower_bound < t {
                return Err(Error::Indeterminate {
                    integral: v.value,
                    threshold: t,
                    margin,
                });
            }
        }
        Ok(ThresholdCheck {
            holds: v.value >= t || v.lower_bound >= t,
            integral: v.value,
            threshold: t,
        })
    }

    fn solve(&self, check: &ThresholdCheck) -> Result<ThetaSolution> {
        if !check.holds {
            return Err(Error::Bracket(format!(
                "threshold integral {} is below {}, so no density normalises",
                check.integral, check.threshold
            )));
        }
        let opts = QuadOptions::default();
        let u = if self.phi.is_constant() {
            self.c
        } else {
            let at_zero = self.beta_of(check.integral) - 1.0;
            let excess_mass = |u: f64| -> Result<f64> {
                if u == 0.0 {
                    return Ok(at_zero);
                }
                Ok(self.integrate(&|g| self.f(u, g), &opts)?.value - 1.0)
            };
            decreasing_root(excess_mass, 0.0, self.c, 1e-15 * self.c.max(1.0), 1e-14)?
        };
        let theta = if self.phi.is_constant() {
            match self.mode {
                Mode::Lambda0 => (-self.phi_o).exp(),
                Mode::Frac => self.phi_o,
            }
        } else {
            self.theta(u)
        };
        let mass = self.integrate(&|g| self.f(u, g), &opts)?.value;
        let moment = match self.mode {
            Mode::Lambda0 => self.integrate(&|g| (-self.phi.eval(g)).exp() * self.f(u, g), &opts)?,
            Mode::Frac => self.integrate(&|g| self.phi.eval(g) * self.f(u, g), &opts)?,
        };
        Ok(ThetaSolution {
            theta,
            u,
            mass_residual: (mass - 1.0).abs(),
            identity_residual: (theta - moment.value).abs(),
        })
    }

    /// The maximiser of the objective: the root `u` (zero in the atom regime),
    /// θ (θ_o in the atom regime) and the atom mass at x_o.
    pub fn optimum(&self) -> Result<(f64, f64, f64)> {
        let check = self.check()?;
        if check.holds {
            let s = self.solve(&check)?;
            return Ok((s.u, s.theta, 0.0));
        }
        if self.x_o.is_none() {
            return Err(Error::HypothesisViolated("the atom regime needs a unique minimiser of phi".into()));
        }
        Ok((0.0, self.theta(0.0), 1.0 - self.beta_of(check.integral)))
    }

    /// `min f_u`, attained where φ is largest.
    pub fn f_min(&self, u: f64) -> f64 {
        let d = self.phi.max_value() - self.phi_o;
        let gap = match self.mode {
            Mode::Lambda0 => -(-d).exp_m1(),
            Mode::Frac => d,
        };
        self.c / (u + self.v(u) * gap)
    }

    /// The measure `h dᾱ + atom`, with cell averages of `h` computed by
    /// quadrature on every cell.
    pub fn build(&self, h: &dyn Fn(Genotype) -> f64, atom: Option<(Genotype, f64)>) -> Result<Measure> {
        let space = self.base.space();
        let mut atoms: Vec<(Genotype, f64)> = self
            .base
            .atoms()
            .iter()
            .filter(|a| a.1 > 0.0)
            .map(|&(g, m)| (g, m * h(g)))
            .collect();
        if let Some((g, m)) = atom {
            match atoms.iter_mut().find(|a| a.0 == g) {
                Some(a) => a.1 += m,
                None => atoms.push((g, m)),
            }
        }
        let mut density = Vec::new();
        if self.base.has_density() {
            let cells = space.size();
            let opts = QuadOptions::default();
            let s = match self.x_o {
                Some(Genotype::Point(s)) => Some(s),
                _ => None,
            };
            let hx = |x: f64| h(Genotype::Point(x));
            density.reserve(cells);
            for (i, &d) in self.base.density().iter().enumerate() {
                if d == 0.0 {
                    density.push(0.0);
                    continue;
                }
                let a = i as f64 / cells as f64;
                let b = (i + 1) as f64 / cells as f64;
                let piece = match s {
                    Some(s) => quad::integrate_with_singularity(&hx, a, b, s, &opts)?.value,
                    None => quad::integrate_interval(&hx, a, b, &opts)?,
                };
                density.push(d * piece * cells as f64);
            }
        }
        let total = atoms.iter().map(|a| a.1).sum::<f64>() + density.iter().sum::<f64>() / space.size() as f64;
        if !((total - 1.0).abs() <= BUILD_MASS_TOL) {
            return Err(Error::Inconsistent(format!("limit measure has total mass {total}")));
        }
        Measure::normalized(space, atoms, density)
    }

    fn limit(&self) -> Result<LimitResult> {
        let check = self.check()?;
        if check.holds {
            let sol = self.solve(&check)?;
            let u = sol.u;
            let q_star = if self.phi.is_constant() {
                self.base.clone()
            } else {
                self.build(&|g| self.f(u, g), None)?
            };
            let (regime, measure, q_field) = match self.mode {
                Mode::Lambda0 => {
                    let r = if self.phi.is_constant() {
                        self.base.clone()
                    } else {
                        let v = self.v(u);
                        self.build(&|g| v * (-self.phi.excess(g)).exp() * self.f(u, g), None)?
                    };
                    (Regime::DpLambda0Density, r, Some(q_star.clone()))
                }
                Mode::Frac => (Regime::DpFracDensity, q_star.clone(), None),
            };
            return Ok(LimitResult {
                regime,
                theta: Some(sol.theta),
                theta_o: None,
                beta: None,
                threshold: Some(check),
                measure,
                q_star: q_field,
                qn_limit: QnLimit::PointMass { measure: q_star },
            });
        }
        let x_o = self
            .x_o
            .ok_or_else(|| Error::HypothesisViolated("the atom regime needs a unique minimiser of phi".into()))?;
        let beta = self.beta_of(check.integral);
        let q_star = self.build(&|g| self.f(0.0, g), Some((x_o, 1.0 - beta)))?;
        let (regime, measure, q_field) = match self.mode {
            Mode::Lambda0 => {
                let c = self.c;
                let r = self.build(&|g| c / self.phi.excess(g).exp_m1(), Some((x_o, (1.0 - beta) * (1.0 + c))))?;
                (Regime::DpLambda0Atom, r, Some(q_star.clone()))
            }
            Mode::Frac => (Regime::DpFracAtom, q_star.clone(), None),
        };
        Ok(LimitResult {
            regime,
            theta: None,
            theta_o: Some(self.theta(0.0)),
            beta: Some(beta),
            threshold: Some(check),
            measure,
            q_star: q_field,
            qn_limit: QnLimit::PointMass { measure: q_star },
        })
    }
}

fn require_lambda0(fit: &FitnessSpec) -> Result<()> {
    if fit.lambda != 0.0 {
        return Err(Error::InvalidParameter(format!("this limit needs lambda = 0, got {}", fit.lambda)));
    }
    Ok(())
}

fn require_frac(fit: &FitnessSpec) -> Result<()> {
    if !(fit.lambda > 0.0 && fit.lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("this limit needs 0 < lambda < 1, got {}", fit.lambda)));
    }
    Ok(())
}

/// The raw threshold integral `∫ 1/e dᾱ` (see the module notes), possibly
/// `+∞`.
pub fn threshold_integral(phi: &PhiSpec, base: &Measure, c: f64, mode: Mode, opts: &QuadOptions) -> Result<SingularValue> {
    Problem::new(phi, base, c, mode)?.threshold_integral(opts)
}

pub fn check_threshold(phi: &PhiSpec, base: &Measure, c: f64, mode: Mode) -> Result<ThresholdCheck> {
    Problem::new(phi, base, c, mode)?.check()
}

/// Tests `∫ w̄/(w̄ − w) dᾱ ≥ (1 + c)/c`.
pub fn check_marta(fit: &FitnessSpec, base: &Measure, c: f64) -> Result<ThresholdCheck> {
    require_lambda0(fit)?;
    check_threshold(&fit.phi, base, c, Mode::Lambda0)
}

/// Tests `∫ 1/(φ − φ_o) dᾱ ≥ 1/c`.
pub fn check_marta2(fit: &FitnessSpec, base: &Measure, c: f64) -> Result<ThresholdCheck> {
    require_frac(fit)?;
    check_threshold(&fit.phi, base, c, Mode::Frac)
}

pub fn solve_theta(phi: &PhiSpec, base: &Measure, c: f64, mode: Mode) -> Result<ThetaSolution> {
    let p = Problem::new(phi, base, c, mode)?;
    let check = p.check()?;
    p.solve(&check)
}

/// θ with `f_θ = c / (1 + c − w/θ)` a probability density.
pub fn solve_theta_lambda0(fit: &FitnessSpec, base: &Measure, c: f64) -> Result<ThetaSolution> {
    require_lambda0(fit)?;
    solve_theta(&fit.phi, base, c, Mode::Lambda0)
}

/// θ with `f = c / (φ + c − θ)` a probability density.
pub fn solve_theta_frac(fit: &FitnessSpec, base: &Measure, c: f64) -> Result<ThetaSolution> {
    require_frac(fit)?;
    solve_theta(&fit.phi, base, c, Mode::Frac)
}

pub fn limit_measure_lambda0(fit: &FitnessSpec, base: &Measure, c: f64) -> Result<LimitResult> {
    require_lambda0(fit)?;
    Problem::new(&fit.phi, base, c, Mode::Lambda0)?.limit()
}

/// Does not depend on λ within (0, 1).
pub fn limit_measure_frac(fit: &FitnessSpec, base: &Measure, c: f64) -> Result<LimitResult> {
    require_frac(fit)?;
    Problem::new(&fit.phi, base, c, Mode::Frac)?.limit()
}

/// The exponent `p` at which `φ = |x − x_o|^p` on Uniform[0, 1] sits exactly
/// on the threshold, searched in `[lo, hi]`.
pub fn critical_exponent(mode: Mode, x_o: f64, c: f64, lo: f64, hi: f64) -> Result<f64> {
    let base = Measure::uniform(DEFAULT_CELLS)?;
    let opts = QuadOptions::default();
    let shortfall = |p: f64| -> Result<f64> {
        let phi = PhiSpec::PowerDistance { x_o, p };
        let problem = Problem::new(&phi, &base, c, mode)?;
        Ok(problem.threshold() - problem.threshold_integral(&opts)?.value)
    };
    decreasing_root(shortfall, lo, hi, 1e-12, 1e-13)
}
