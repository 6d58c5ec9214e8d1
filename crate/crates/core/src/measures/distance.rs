use super::{Genotype, Measure};
use crate::{Error, Result};

fn same_space(a: &Measure, b: &Measure) -> Result<()> {
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch(a.space().describe(), b.space().describe()));
    }
    Ok(())
}

fn interval_only(a: &Measure, what: &str) -> Result<()> {
    if a.space().is_finite() {
        return Err(Error::Unsupported(format!("{what} is defined on the unit interval only")));
    }
    Ok(())
}

/// Walks the distribution function of an interval measure at nondecreasing
/// abscissae.
pub(crate) struct CdfWalker<'a> {
    atoms: &'a [(Genotype, f64)],
    next_atom: usize,
    atoms_below: f64,
    density: &'a [f64],
    prefix: Vec<f64>,
    cells: usize,
}

impl<'a> CdfWalker<'a> {
    pub(crate) fn new(m: &'a Measure) -> Self {
        let cells = m.space().size();
        let mut prefix = Vec::with_capacity(m.density().len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for d in m.density() {
            acc += d / cells as f64;
            prefix.push(acc);
        }
        Self {
            atoms: m.atoms(),
            next_atom: 0,
            atoms_below: 0.0,
            density: m.density(),
            prefix,
            cells,
        }
    }

    fn continuous(&self, x: f64) -> f64 {
        if self.density.is_empty() || x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.prefix[self.cells];
        }
        let scaled = x * self.cells as f64;
        let c = (scaled.floor() as usize).min(self.cells - 1);
        self.prefix[c] + self.density[c] * (scaled - c as f64) / self.cells as f64
    }

    /// `(F(x−), F(x))`.
    pub(crate) fn at(&mut self, x: f64) -> (f64, f64) {
        while self.next_atom < self.atoms.len() && self.atoms[self.next_atom].0.value() < x {
            self.atoms_below += self.atoms[self.next_atom].1;
            self.next_atom += 1;
        }
        let mut at = 0.0;
        let mut j = self.next_atom;
        while j < self.atoms.len() && self.atoms[j].0.value() == x {
            at += self.atoms[j].1;
            j += 1;
        }
        let c = self.continuous(x);
        (self.atoms_below + c, self.atoms_below + at + c)
    }
}

fn breakpoints(a: &Measure, b: &Measure) -> Vec<f64> {
    let cells = a.space().size();
    let mut xs: Vec<f64> = if a.density().is_empty() && b.density().is_empty() {
        vec![0.0, 1.0]
    } else {
        (0..=cells).map(|i| i as f64 / cells as f64).collect()
    };
    xs.extend(a.atoms().iter().chain(b.atoms()).map(|g| g.0.value()));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// `(∫|F_a − F_b| dx, sup |F_a − F_b|)` for piecewise linear CDFs with jumps.
fn cdf_gap(a: &Measure, b: &Measure) -> (f64, f64) {
    let xs = breakpoints(a, b);
    let mut wa = CdfWalker::new(a);
    let mut wb = CdfWalker::new(b);
    let mut area = 0.0;
    let mut sup: f64 = 0.0;
    let mut prev_x = xs[0];
    let (la, ra) = wa.at(prev_x);
    let (lb, rb) = wb.at(prev_x);
    sup = sup.max((la - lb).abs()).max((ra - rb).abs());
    let mut prev_d = ra - rb;
    for &x in &xs[1..] {
        let (la, ra) = wa.at(x);
        let (lb, rb) = wb.at(x);
        let d_left = la - lb;
        let d_right = ra - rb;
        let h = x - prev_x;
        area += if prev_d * d_left >= 0.0 {
            0.5 * h * (prev_d.abs() + d_left.abs())
        } else {
            0.5 * h * (prev_d * prev_d + d_left * d_left) / (prev_d.abs() + d_left.abs())
        };
        sup = sup.max(d_left.abs()).max(d_right.abs());
        prev_d = d_right;
        prev_x = x;
    }
    (area, sup)
}

/// Total variation `sup_A |a(A) − b(A)|`.
pub fn tv_distance(a: &Measure, b: &Measure) -> Result<f64> {
    same_space(a, b)?;
    let cells = a.space().size() as f64;
    let mut sum = atom_l1(a.atoms(), b.atoms());
    if !a.space().is_finite() {
        let len = a.density().len().max(b.density().len());
        let da = |i: usize| a.density().get(i).copied().unwrap_or(0.0);
        let db = |i: usize| b.density().get(i).copied().unwrap_or(0.0);
        sum += (0..len).map(|i| (da(i) - db(i)).abs()).sum::<f64>() / cells;
    }
    Ok((0.5 * sum).min(1.0))
}

fn atom_l1(a: &[(Genotype, f64)], b: &[(Genotype, f64)]) -> f64 {
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x.0 == y.0 => {
                sum += (x.1 - y.1).abs();
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x.0 < y.0 => {
                sum += x.1;
                i += 1;
            }
            (Some(_), Some(y)) => {
                sum += y.1;
                j += 1;
            }
            (Some(x), None) => {
                sum += x.1;
                i += 1;
            }
            (None, Some(y)) => {
                sum += y.1;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    sum
}

/// Wasserstein-1 distance `∫₀¹ |F_a − F_b| dx`.
pub fn wasserstein1(a: &Measure, b: &Measure) -> Result<f64> {
    same_space(a, b)?;
    interval_only(a, "the Wasserstein distance")?;
    Ok(cdf_gap(a, b).0)
}

/// Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &Measure, b: &Measure) -> Result<f64> {
    same_space(a, b)?;
    interval_only(a, "the Kolmogorov-Smirnov statistic")?;
    Ok(cdf_gap(a, b).1)
}

/// `D(a‖b) = ∫ ln(da/db) da`, `+∞` unless `a ≪ b`.
pub fn relative_entropy(a: &Measure, b: &Measure) -> Result<f64> {
    same_space(a, b)?;
    let term = |p: f64, q: f64| -> f64 {
        if p == 0.0 {
            0.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            p * (p / q).ln()
        }
    };
    let mut d = 0.0;
    for &(g, p) in a.atoms() {
        d += term(p, b.atom_mass(g));
    }
    if !a.space().is_finite() {
        let cells = a.space().size() as f64;
        for (i, &p) in a.density().iter().enumerate() {
            let q = b.density().get(i).copied().unwrap_or(0.0);
            d += term(p, q) / cells;
        }
    }
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Space;
    use proptest::prelude::*;

    fn pt(x: f64) -> Genotype {
        Genotype::Point(x)
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let m = Measure::new(Space::interval(8), vec![(pt(0.4), 0.3)], vec![0.7; 8]).unwrap();
        assert_eq!(tv_distance(&m, &m).unwrap(), 0.0);
        assert_eq!(wasserstein1(&m, &m).unwrap(), 0.0);
        assert_eq!(ks_statistic(&m, &m).unwrap(), 0.0);
        assert_eq!(relative_entropy(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn dirac_against_uniform() {
        let s = Space::interval(4096);
        let d = Measure::dirac(s, pt(0.3)).unwrap();
        let u = Measure::uniform(4096).unwrap();
        let oracle = 0.3f64 * 0.3 / 2.0 + 0.7 * 0.7 / 2.0;
        assert!((wasserstein1(&d, &u).unwrap() - oracle).abs() < 1e-12);
        assert!((wasserstein1(&d, &u).unwrap() - 0.29).abs() < 1e-12);
        assert!((ks_statistic(&d, &u).unwrap() - 0.7).abs() < 1e-12);
        assert!((tv_distance(&d, &u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_diracs() {
        let s = Space::interval(16);
        let a = Measure::dirac(s, pt(0.2)).unwrap();
        let b = Measure::dirac(s, pt(0.7)).unwrap();
        assert!((wasserstein1(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ks_statistic(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn finite_examples() {
        let a = Measure::pmf(&[1.0, 0.0]).unwrap();
        let b = Measure::pmf(&[0.0, 1.0]).unwrap();
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let half = Measure::pmf(&[0.5, 0.5]).unwrap();
        assert_eq!(relative_entropy(&half, &a).unwrap(), f64::INFINITY);
        let q = Measure::pmf(&[0.25, 0.75]).unwrap();
        let oracle = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!((relative_entropy(&half, &q).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - (0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln())).abs() < 1e-15);
        assert!(wasserstein1(&a, &b).is_err());
        assert!(tv_distance(&a, &Measure::uniform(4).unwrap()).is_err());
    }

    #[test]
    fn entropy_support_violations() {
        let s = Space::interval(4);
        let u = Measure::uniform(4).unwrap();
        let d = Measure::dirac(s, pt(0.5)).unwrap();
        assert_eq!(relative_entropy(&d, &u).unwrap(), f64::INFINITY);
        assert_eq!(relative_entropy(&u, &d).unwrap(), f64::INFINITY);
        let half = Measure::from_density(vec![2.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(relative_entropy(&u, &half).unwrap(), f64::INFINITY);
        assert!((relative_entropy(&half, &u).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    fn grid_measure() -> impl Strategy<Value = Measure> {
        (prop::collection::vec(0.01f64..1.0, 8), prop::collection::vec((0.0f64..=1.0, 0.0f64..1.0), 0..3)).prop_map(
            |(dens, atoms)| {
                let atoms: Vec<(Genotype, f64)> = atoms.into_iter().map(|(x, m)| (pt(x), m)).collect();
                Measure::normalized(Space::interval(8), atoms, dens).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn distances_are_metrics(a in grid_measure(), b in grid_measure()) {
            let tv = tv_distance(&a, &b).unwrap();
            let w = wasserstein1(&a, &b).unwrap();
            let ks = ks_statistic(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&tv));
            prop_assert!(w >= 0.0 && w <= ks + 1e-12);
            prop_assert!(ks <= tv + 1e-12);
            prop_assert!((tv - tv_distance(&b, &a).unwrap()).abs() < 1e-15);
            prop_assert!((w - wasserstein1(&b, &a).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn entropy_is_nonnegative_and_vanishes_only_on_equality(a in grid_measure(), b in grid_measure()) {
            let d = relative_entropy(&a, &b).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(relative_entropy(&a, &a).unwrap(), 0.0);
            if tv_distance(&a, &b).unwrap() > 1e-6 {
                prop_assert!(d > 0.0);
            }
        }
    }
}
