use moran_core::breeding::{prior_exact_law, DirichletPrior, MassRule, MixturePrior, PriorSpec};
use moran_core::chain::{exact_stationary_counts, exact_stationary_law, exact_stationary_mixture, ChainConfig};
use moran_core::measures::{FitnessSpec, Genotype, Measure, PhiSpec, Space, DEFAULT_CELLS};
use moran_core::selection::Kernel;
use moran_core::verify::{mcmc_vs_exact, sweep_convergence, Metric, SweepSpec};

fn table(values: &[f64], lambda: f64) -> FitnessSpec {
    FitnessSpec::new(PhiSpec::FiniteTable { values: values.to_vec() }, lambda)
}

#[test]
fn single_individual_law_is_tilted_base() {
    let alpha = [0.5, 1.0, 2.5];
    let phi = [0.3, 0.0, 1.2];
    let law = exact_stationary_counts(Space::finite(3), &alpha, &table(&phi, 0.0), 1).unwrap();
    let raw: Vec<f64> = alpha.iter().zip(&phi).map(|(a, p)| a * (-p).exp()).collect();
    let z: f64 = raw.iter().sum();
    for (k, r) in raw.iter().enumerate() {
        let mut counts = vec![0u32; 3];
        counts[k] = 1;
        let i = law.index_of(&counts).unwrap();
        assert!((law.probs[i] - r / z).abs() < 1e-14, "{} vs {}", law.probs[i], r / z);
    }
}

#[test]
fn two_component_mixture_matches_enumeration() {
    let (q1, q2) = ([0.8, 0.2], [0.25, 0.75]);
    let (a1, a2) = (0.4, 0.6);
    let w = [1.0, (-0.7f64).exp()];
    let prior = MixturePrior::new(vec![(a1, Measure::pmf(&q1).unwrap()), (a2, Measure::pmf(&q2).unwrap())]).unwrap();
    let law = exact_stationary_mixture(Space::finite(2), &prior, &table(&[0.0, 0.7], 0.0), 2).unwrap();
    // Sum over the four ordered pairs, grouped by the count of label 0.
    let mut by_count = [0.0; 3];
    for x in 0..2 {
        for y in 0..2 {
            let tuple = a1 * q1[x] * q1[y] * w[x] * w[y] + a2 * q2[x] * q2[y] * w[x] * w[y];
            by_count[2 - x - y] += tuple;
        }
    }
    let z: f64 = by_count.iter().sum();
    for (n0, p) in by_count.iter().enumerate() {
        let i = law.index_of(&[n0 as u32, 2 - n0 as u32]).unwrap();
        assert!((law.probs[i] - p / z).abs() < 1e-15, "{n0}");
    }
}

#[test]
fn no_selection_gives_the_breeding_law() {
    let prior = MixturePrior::new(vec![
        (0.3, Measure::pmf(&[0.2, 0.3, 0.5]).unwrap()),
        (0.7, Measure::pmf(&[0.6, 0.1, 0.3]).unwrap()),
    ])
    .unwrap();
    let a = exact_stationary_mixture(Space::finite(3), &prior, &table(&[0.4, 0.4, 0.4], 1.0), 6).unwrap();
    let b = prior_exact_law(&prior, 6).unwrap();
    for (x, y) in a.probs.iter().zip(&b.probs) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn three_allele_law_is_normalised() {
    let law = exact_stationary_counts(Space::finite(3), &[1.0, 2.0, 3.0], &table(&[0.0, 0.5, 1.0], 0.0), 10).unwrap();
    assert_eq!(law.probs.len(), 66);
    assert!((law.total() - 1.0).abs() < 1e-12);
}

#[test]
fn inverse_kernel_mixture_chain_matches_the_exact_law() {
    let prior = PriorSpec::Mixture(
        MixturePrior::new(vec![
            (0.4, Measure::pmf(&[0.7, 0.2, 0.1]).unwrap()),
            (0.6, Measure::pmf(&[0.2, 0.3, 0.5]).unwrap()),
        ])
        .unwrap(),
    );
    let fit = table(&[0.0, 0.6, 1.1], 0.0);
    let mut cfg = ChainConfig::with_samples(4, 50_000, Kernel::InverseFitness, 77, 2);
    cfg.thin = 80;
    cfg.steps = cfg.burn_in + 50_000 * cfg.thin;
    let r = mcmc_vs_exact(&cfg, &prior, &fit).unwrap();
    assert!(r.tv < 0.02, "{r:?}");
    assert!(r.chi_square.p_value > 0.001, "{r:?}");
}

#[test]
fn neutral_chain_reproduces_the_dirichlet_multinomial() {
    let prior = PriorSpec::Dirichlet(DirichletPrior::new(2.0, Measure::pmf(&[0.5, 0.5]).unwrap(), MassRule::Fixed).unwrap());
    let fit = table(&[0.0, 0.0], 1.0);
    let mut cfg = ChainConfig::with_samples(2, 100_000, Kernel::Tournament, 5, 1);
    cfg.thin = 20;
    cfg.steps = cfg.burn_in + 100_000 * 20;
    let r = mcmc_vs_exact(&cfg, &prior, &fit).unwrap();
    assert!(r.chi_square.p_value > 0.01 && r.tv < 0.02, "{r:?}");
}

#[test]
fn fixed_urn_sweep_agrees_with_the_exact_collapse_rate() {
    // On the atoms {0.05, 0.3, 0.8} the chain is the three-label chain with
    // φ = (0.25, 0, 0.5), and W1 to δ_0.3 is (0.25 n_0 + 0.5 n_2) / n.
    let n = 20;
    let law = exact_stationary_counts(Space::finite(3), &[5.0 / 3.0; 3], &table(&[0.25, 0.0, 0.5], 0.5), n).unwrap();
    let exact: f64 = law
        .counts
        .iter()
        .zip(&law.probs)
        .map(|(c, p)| p * (0.25 * c[0] as f64 + 0.5 * c[2] as f64) / n as f64)
        .sum();
    let s = Space::interval(DEFAULT_CELLS);
    let third = 1.0 / 3.0;
    let atoms = Measure::new(
        s,
        vec![(Genotype::Point(0.05), third), (Genotype::Point(0.3), third), (Genotype::Point(0.8), third)],
        vec![],
    )
    .unwrap();
    let spec = SweepSpec {
        lambdas: vec![0.5],
        ns: vec![n],
        prior: PriorSpec::Dirichlet(DirichletPrior::new(5.0, atoms, MassRule::Fixed).unwrap()),
        fit: FitnessSpec::new(PhiSpec::PowerDistance { x_o: 0.3, p: 1.0 }, 0.5),
        metric: Metric::W1,
        kernel: Kernel::Tournament,
        samples: 5_000,
        replicas: 4,
        thin_per_n: 2,
        seed: 9,
    };
    let cell = sweep_convergence(&spec).unwrap()[0];
    assert!((cell.value - exact).abs() < 0.01, "sampled {} exact {exact}", cell.value);
}

#[test]
fn exact_law_dispatches_on_the_prior() {
    let d = PriorSpec::Dirichlet(DirichletPrior::new(3.0, Measure::pmf(&[0.5, 0.5]).unwrap(), MassRule::Scaled).unwrap());
    let fit = table(&[0.0, 1.0], 0.5);
    let via = exact_stationary_law(&d, &fit, 4).unwrap();
    let alpha = 3.0 * 4f64.powf(0.5) * 0.5;
    let direct = exact_stationary_counts(Space::finite(2), &[alpha, alpha], &fit, 4).unwrap();
    assert_eq!(via, direct);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

    #[test]
    fn exact_law_is_a_probability_and_flat_fitness_is_neutral(
        alpha in proptest::collection::vec(0.05f64..4.0, 2..5),
        n in 1usize..7,
        level in 0.0f64..3.0,
    ) {
        let k = alpha.len();
        let law = exact_stationary_counts(Space::finite(k), &alpha, &table(&vec![level; k], 0.0), n).unwrap();
        proptest::prop_assert!((law.total() - 1.0).abs() < 1e-12);
        proptest::prop_assert!(law.probs.iter().all(|p| *p >= 0.0));
        let neutral = exact_stationary_counts(Space::finite(k), &alpha, &table(&vec![0.0; k], 0.0), n).unwrap();
        for (a, b) in law.probs.iter().zip(&neutral.probs) {
            proptest::prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
