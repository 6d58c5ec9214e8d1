use super::{limit_measure_frac, limit_measure_lambda0, LimitResult, QnLimit, Regime};
use crate::breeding::{log_sum_exp, DirichletPrior, MassRule, MixturePrior, PriorSpec};
use crate::measures::{FitnessSpec, Genotype, Measure};
use crate::{Error, Result};

/// Reweights a mixture by `exp(−⟨φ, q_i⟩)`, the λ = 1 limit of the prior.
pub fn limit_prior_lambda1(prior: &MixturePrior, fit: &FitnessSpec) -> Result<MixturePrior> {
    fit.validate(prior.space())?;
    let logs: Vec<f64> = prior
        .components()
        .iter()
        .map(|(w, q)| {
            let mean_phi: f64 = q.atoms().iter().map(|&(g, m)| m * fit.phi.eval(g)).sum();
            w.ln() - mean_phi
        })
        .collect();
    let norm = log_sum_exp(&logs);
    let components = prior
        .components()
        .iter()
        .zip(&logs)
        .map(|((_, q), l)| ((l - norm).exp(), q.clone()))
        .collect();
    MixturePrior::new(components)
}

fn mixture_result(regime: Regime, prior: &MixturePrior) -> Result<LimitResult> {
    Ok(LimitResult {
        regime,
        theta: None,
        theta_o: None,
        beta: None,
        threshold: None,
        measure: prior.mean()?,
        q_star: None,
        qn_limit: QnLimit::Mixture {
            components: prior.components().to_vec(),
        },
    })
}

fn collapse_result(x_o: Genotype, space_of: &Measure) -> Result<LimitResult> {
    let point = Measure::dirac(space_of.space(), x_o)?;
    Ok(LimitResult {
        regime: Regime::LambdaIn01FixedPrior,
        theta: None,
        theta_o: None,
        beta: None,
        threshold: None,
        measure: point.clone(),
        q_star: None,
        qn_limit: QnLimit::PointMass { measure: point },
    })
}

fn unique_minimiser(fit: &FitnessSpec) -> Result<Genotype> {
    fit.phi
        .minimizer()
        .ok_or_else(|| Error::HypothesisViolated("the collapse limit needs a unique minimiser x_o of phi".into()))
}

fn is_fixed(d: &DirichletPrior, lambda: f64) -> bool {
    d.mass_rule == MassRule::Fixed || lambda == 1.0
}

/// Limits for priors that do not change with `n`: the prior itself when
/// λ > 1, the reweighted mixture when λ = 1, and `δ_{δ_{x_o}}` when λ < 1.
pub fn limit_fixed_prior(fit: &FitnessSpec, prior: &PriorSpec) -> Result<LimitResult> {
    fit.validate(prior.space())?;
    let lambda = fit.lambda;
    match prior {
        PriorSpec::Mixture(mix) => {
            if lambda > 1.0 {
                mixture_result(Regime::LambdaGt1, mix)
            } else if lambda == 1.0 {
                mixture_result(Regime::LambdaEq1, &limit_prior_lambda1(mix, fit)?)
            } else {
                let x_o = unique_minimiser(fit)?;
                let found = mix
                    .components()
                    .iter()
                    .find(|(w, q)| *w > 0.0 && q.atom_mass(x_o) >= 1.0 - 1e-12);
                match found {
                    Some((_, q)) => collapse_result(x_o, q),
                    None => Err(Error::HypothesisViolated(format!(
                        "the support of the prior must contain the point mass at x_o = {x_o}"
                    ))),
                }
            }
        }
        PriorSpec::Dirichlet(d) => {
            if !is_fixed(d, lambda) {
                return Err(Error::InvalidParameter(
                    "a Dirichlet prior with the scaled mass rule only stays fixed at lambda = 1".into(),
                ));
            }
            if lambda > 1.0 {
                Ok(LimitResult {
                    regime: Regime::LambdaGt1,
                    theta: None,
                    theta_o: None,
                    beta: None,
                    threshold: None,
                    measure: d.base.clone(),
                    q_star: None,
                    qn_limit: QnLimit::Dirichlet {
                        c: d.c,
                        base: d.base.clone(),
                    },
                })
            } else if lambda == 1.0 {
                Err(Error::Unsupported(
                    "the exponentially reweighted Dirichlet prior has no finite representation".into(),
                ))
            } else {
                let x_o = unique_minimiser(fit)?;
                if !d.base.charges(x_o) {
                    return Err(Error::HypothesisViolated(format!(
                        "the base measure must charge every neighbourhood of x_o = {x_o}"
                    )));
                }
                collapse_result(x_o, &d.base)
            }
        }
    }
}

/// Chooses the limit theorem that applies to `prior` and `fit`.
pub fn predict_limit(prior: &PriorSpec, fit: &FitnessSpec) -> Result<LimitResult> {
    match prior {
        PriorSpec::Dirichlet(d) if d.mass_rule == MassRule::Scaled && fit.lambda < 1.0 => {
            if fit.lambda == 0.0 {
                limit_measure_lambda0(fit, &d.base, d.c)
            } else {
                limit_measure_frac(fit, &d.base, d.c)
            }
        }
        PriorSpec::Dirichlet(d) if d.mass_rule == MassRule::Scaled && fit.lambda > 1.0 => Err(Error::Unsupported(
            "with lambda > 1 the scaled urn mass vanishes and no limit is implemented".into(),
        )),
        _ => limit_fixed_prior(fit, prior),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{PhiSpec, Space};

    fn two_point() -> MixturePrior {
        MixturePrior::new(vec![
            (0.5, Measure::pmf(&[1.0, 0.0]).unwrap()),
            (0.5, Measure::pmf(&[0.0, 1.0]).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn reweighting_by_exponential_means() {
        // ⟨φ, q_1⟩ = 0 and ⟨φ, q_2⟩ = ln 2 give weights ∝ (1, 1/2).
        let fit = FitnessSpec::new(PhiSpec::FiniteTable { values: vec![0.0, 2f64.ln()] }, 1.0);
        let post = limit_prior_lambda1(&two_point(), &fit).unwrap();
        assert!((post.components()[0].0 - 2.0 / 3.0).abs() < 1e-15);
        assert!((post.components()[1].0 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reweighting_is_trivial_without_selection_or_choice() {
        let flat = FitnessSpec::new(PhiSpec::FiniteTable { values: vec![0.4, 0.4] }, 1.0);
        let post = limit_prior_lambda1(&two_point(), &flat).unwrap();
        assert!((post.components()[0].0 - 0.5).abs() < 1e-15);
        let single = MixturePrior::new(vec![(1.0, Measure::pmf(&[0.3, 0.7]).unwrap())]).unwrap();
        let fit = FitnessSpec::new(PhiSpec::FiniteTable { values: vec![0.0, 5.0] }, 1.0);
        assert_eq!(limit_prior_lambda1(&single, &fit).unwrap(), single);
    }

    #[test]
    fn strong_selection_keeps_the_prior() {
        let fit = FitnessSpec::new(PhiSpec::FiniteTable { values: vec![0.0, 3.0] }, 2.0);
        let lim = limit_fixed_prior(&fit, &PriorSpec::Mixture(two_point())).unwrap();
        assert_eq!(lim.regime, Regime::LambdaGt1);
        assert_eq!(lim.qn_limit, QnLimit::Mixture { components: two_point().components().to_vec() });
        assert_eq!(lim.measure, Measure::pmf(&[0.5, 0.5]).unwrap());
    }

    #[test]
    fn weak_selection_collapses_onto_x_o() {
        let s = Space::interval(64);
        let x_o = Genotype::Point(0.3);
        let far = Measure::new(s, vec![(Genotype::Point(0.8), 0.5), (Genotype::Point(0.05), 0.5)], vec![]).unwrap();
        let mix = MixturePrior::new(vec![(0.999, far.clone()), (0.001, Measure::dirac(s, x_o).unwrap())]).unwrap();
        let fit = FitnessSpec::new(PhiSpec::PowerDistance { x_o: 0.3, p: 2.0 }, 0.5);
        let lim = limit_fixed_prior(&fit, &PriorSpec::Mixture(mix)).unwrap();
        assert_eq!(lim.regime, Regime::LambdaIn01FixedPrior);
        assert_eq!(lim.measure, Measure::dirac(s, x_o).unwrap());

        let without = MixturePrior::new(vec![(1.0, far)]).unwrap();
        assert!(matches!(
            limit_fixed_prior(&fit, &PriorSpec::Mixture(without)),
            Err(Error::HypothesisViolated(_))
        ));
    }

    #[test]
    fn dirichlet_priors_need_a_fixed_mass() {
        let base = Measure::uniform(64).unwrap();
        let fit = FitnessSpec::new(PhiSpec::PowerDistance { x_o: 0.3, p: 2.0 }, 0.5);
        let fixed = PriorSpec::Dirichlet(DirichletPrior::new(2.0, base.clone(), MassRule::Fixed).unwrap());
        let lim = limit_fixed_prior(&fit, &fixed).unwrap();
        assert_eq!(lim.measure.atoms(), &[(Genotype::Point(0.3), 1.0)]);
        let scaled = PriorSpec::Dirichlet(DirichletPrior::new(2.0, base, MassRule::Scaled).unwrap());
        assert!(limit_fixed_prior(&fit, &scaled).is_err());
        assert_eq!(predict_limit(&scaled, &fit).unwrap().regime, Regime::DpFracDensity);
        assert_eq!(predict_limit(&fixed, &fit.with_lambda(3.0)).unwrap().regime, Regime::LambdaGt1);
    }
}
