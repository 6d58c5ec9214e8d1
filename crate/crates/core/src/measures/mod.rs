//! Type spaces, probability measures, fitness, quadrature and distances.
//!
//! A [`Measure`] on the unit interval is a list of atoms plus an optional
//! density given as cell averages on a uniform grid; inside a cell the density
//! is treated as constant. On a finite space a measure is just a pmf, stored
//! as one atom per label.

mod distance;
mod fitness;
pub mod quad;
mod space;

use serde::{Deserialize, Serialize};

pub use distance::{ks_statistic, relative_entropy, tv_distance, wasserstein1};
pub use fitness::{weight_at, FitnessSpec, PhiSpec};
pub use quad::{QuadOptions, SingularValue};
pub use space::{Genotype, Space, DEFAULT_CELLS};

use crate::{Error, Result};

/// Mass normalisation tolerance for every constructed measure.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    space: Space,
    atoms: Vec<(Genotype, f64)>,
    density: Vec<f64>,
}

impl Measure {
    /// Builds and validates a measure. Finite spaces take their pmf as atoms
    /// (missing labels get mass zero) and no density; interval atoms are
    /// sorted and zero-mass atoms dropped.
    pub fn new(space: Space, atoms: Vec<(Genotype, f64)>, density: Vec<f64>) -> Result<Self> {
        let m = Self::unchecked(space, atoms, density)?;
        let total = m.total_mass();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass is {total}, not 1")));
        }
        Ok(m)
    }

    /// Like [`Measure::new`] but rescales a positive finite total mass to one.
    pub fn normalized(space: Space, atoms: Vec<(Genotype, f64)>, density: Vec<f64>) -> Result<Self> {
        let mut m = Self::unchecked(space, atoms, density)?;
        let total = m.total_mass();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure(format!("cannot normalise total mass {total}")));
        }
        m.atoms.iter_mut().for_each(|a| a.1 /= total);
        m.density.iter_mut().for_each(|d| *d /= total);
        Ok(m)
    }

    fn unchecked(space: Space, atoms: Vec<(Genotype, f64)>, density: Vec<f64>) -> Result<Self> {
        space.validate()?;
        for &(g, mass) in &atoms {
            if !space.contains(g) {
                return Err(Error::InvalidMeasure(format!("atom {g} is outside the {}", space.describe())));
            }
            if !(mass >= 0.0 && mass.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom {g} has mass {mass}")));
            }
        }
        if let Some(d) = density.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidMeasure(format!("density value {d} is not a nonnegative real")));
        }
        let mut sorted = atoms;
        sorted.sort_by_key(|a| a.0);
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidMeasure("atom locations must be distinct".into()));
        }
        match space {
            Space::Finite { k } => {
                if !density.is_empty() {
                    return Err(Error::InvalidMeasure("finite measures carry no density".into()));
                }
                let mut dense: Vec<(Genotype, f64)> = (0..k as u32).map(|l| (Genotype::Label(l), 0.0)).collect();
                for (g, mass) in sorted {
                    dense[g.label().expect("finite atoms are labels")].1 = mass;
                }
                Ok(Self {
                    space,
                    atoms: dense,
                    density,
                })
            }
            Space::UnitInterval { cells } => {
                if !density.is_empty() && density.len() != cells {
                    return Err(Error::InvalidMeasure(format!(
                        "density has {} cells, the grid has {cells}",
                        density.len()
                    )));
                }
                sorted.retain(|a| a.1 > 0.0);
                Ok(Self {
                    space,
                    atoms: sorted,
                    density,
                })
            }
        }
    }

    /// A pmf on `0..probs.len()`.
    pub fn pmf(probs: &[f64]) -> Result<Self> {
        let atoms = probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (Genotype::Label(i as u32), p))
            .collect();
        Self::new(Space::finite(probs.len()), atoms, Vec::new())
    }

    /// Lebesgue measure on `[0, 1]`.
    pub fn uniform(cells: usize) -> Result<Self> {
        Self::new(Space::interval(cells), Vec::new(), vec![1.0; cells])
    }

    pub fn dirac(space: Space, g: Genotype) -> Result<Self> {
        Self::new(space, vec![(g, 1.0)], Vec::new())
    }

    /// Cell-average density values on a grid with `density.len()` cells.
    pub fn from_density(density: Vec<f64>) -> Result<Self> {
        Self::new(Space::interval(density.len()), Vec::new(), density)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn atoms(&self) -> &[(Genotype, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn has_density(&self) -> bool {
        self.density.iter().any(|&d| d > 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        let cells = self.space.size() as f64;
        let atoms: f64 = self.atoms.iter().map(|a| a.1).sum();
        let dens: f64 = if self.space.is_finite() {
            0.0
        } else {
            self.density.iter().sum::<f64>() / cells
        };
        atoms + dens
    }

    /// Mass of the atom at `g` (zero when there is none).
    pub fn atom_mass(&self, g: Genotype) -> f64 {
        match self.space {
            Space::Finite { .. } => g.label().and_then(|l| self.atoms.get(l)).map_or(0.0, |a| a.1),
            Space::UnitInterval { .. } => self
                .atoms
                .binary_search_by(|a| a.0.cmp(&g))
                .map_or(0.0, |i| self.atoms[i].1),
        }
    }

    /// Mass of grid cell `i` (interval only).
    pub fn cell_mass(&self, i: usize) -> f64 {
        self.density.get(i).map_or(0.0, |d| d / self.space.size() as f64)
    }

    /// Dense pmf of a finite measure.
    pub fn masses(&self) -> Option<Vec<f64>> {
        self.space.is_finite().then(|| self.atoms.iter().map(|a| a.1).collect())
    }

    /// Whether `g` carries positive mass, or lies in a cell of positive
    /// density.
    pub fn charges(&self, g: Genotype) -> bool {
        if self.atom_mass(g) > 0.0 {
            return true;
        }
        match (self.space, g) {
            (Space::UnitInterval { .. }, Genotype::Point(x)) => self.cell_mass(self.space.cell_of(x)) > 0.0,
            _ => false,
        }
    }

    /// `∫ f dμ` for a nonnegative `f`, possibly singular at `singularity`.
    ///
    /// Density runs of equal value are integrated as one piece; the piece
    /// holding the singular point goes through the shell integrator and can
    /// come back as `+∞`.
    pub fn integrate(
        &self,
        f: &dyn Fn(Genotype) -> f64,
        singularity: Option<Genotype>,
        opts: &QuadOptions,
    ) -> Result<SingularValue> {
        let mut value = 0.0;
        let mut lower = 0.0;
        for &(g, mass) in &self.atoms {
            if mass > 0.0 {
                let v = mass * f(g);
                value += v;
                lower += v;
            }
        }
        if !self.space.is_finite() && !self.density.is_empty() {
            let m = self.space.size();
            let s = match singularity {
                Some(Genotype::Point(x)) => Some(x),
                _ => None,
            };
            let fx = |x: f64| f(Genotype::Point(x));
            let mut i = 0;
            while i < m {
                let d = self.density[i];
                let mut j = i + 1;
                while j < m && self.density[j] == d {
                    j += 1;
                }
                if d > 0.0 {
                    let a = i as f64 / m as f64;
                    let b = j as f64 / m as f64;
                    let part = match s {
                        Some(s) if (a..=b).contains(&s) => quad::integrate_with_singularity(&fx, a, b, s, opts)?,
                        _ => {
                            let v = quad::integrate_interval(&fx, a, b, opts)?;
                            SingularValue { value: v, lower_bound: v }
                        }
                    };
                    value += d * part.value;
                    lower += d * part.lower_bound;
                }
                i = j;
            }
        }
        Ok(SingularValue {
            value,
            lower_bound: lower,
        })
    }

    /// `∫ f dμ` for a regular integrand.
    pub fn expect(&self, f: &dyn Fn(Genotype) -> f64) -> Result<f64> {
        Ok(self.integrate(f, None, &QuadOptions::default())?.value)
    }

    /// Distribution function on the interval: `(F(x−), F(x))`.
    pub fn cdf_at(&self, x: f64) -> (f64, f64) {
        let mut below = 0.0;
        let mut at = 0.0;
        for &(g, mass) in &self.atoms {
            let v = g.value();
            if v < x {
                below += mass;
            } else if v == x {
                at += mass;
            }
        }
        let cont = self.density_cdf(x);
        (below + cont, below + at + cont)
    }

    fn density_cdf(&self, x: f64) -> f64 {
        if self.density.is_empty() || x <= 0.0 {
            return 0.0;
        }
        let m = self.space.size();
        if x >= 1.0 {
            return self.density.iter().sum::<f64>() / m as f64;
        }
        let c = self.space.cell_of(x);
        let head: f64 = self.density[..c].iter().sum::<f64>() / m as f64;
        head + self.density[c] * (x * m as f64 - c as f64) / m as f64
    }

    /// CSV table of the distribution function with columns `x,cdf_left,cdf`.
    ///
    /// Rows are the label values on a finite space, and the grid boundaries
    /// plus atom locations on the interval.
    pub fn cdf_csv(&self) -> String {
        let mut out = String::from("x,cdf_left,cdf\n");
        match self.space {
            Space::Finite { .. } => {
                let mut acc = 0.0;
                for &(g, mass) in &self.atoms {
                    let left = acc;
                    acc += mass;
                    out.push_str(&format!("{},{},{}\n", g, left, acc));
                }
            }
            Space::UnitInterval { cells } => {
                let mut points: Vec<f64> = if self.density.is_empty() {
                    vec![0.0, 1.0]
                } else {
                    (0..=cells).map(|i| i as f64 / cells as f64).collect()
                };
                points.extend(self.atoms.iter().map(|a| a.0.value()));
                points.sort_by(f64::total_cmp);
                points.dedup();
                let walker = distance::CdfWalker::new(self);
                let mut w = walker;
                for x in points {
                    let (l, r) = w.at(x);
                    out.push_str(&format!("{x},{l},{r}\n"));
                }
            }
        }
        out
    }

    /// Inverse-CDF sampler over the pieces of the measure.
    pub fn sampler(&self) -> MeasureSampler {
        MeasureSampler::new(self)
    }
}

/// Empirical measure of a population: mass `count / n` at each distinct value.
pub fn empirical_measure(space: Space, pop: &[Genotype]) -> Result<Measure> {
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut sorted = pop.to_vec();
    sorted.sort();
    let n = pop.len() as f64;
    let mut atoms: Vec<(Genotype, f64)> = Vec::new();
    for g in sorted {
        match atoms.last_mut() {
            Some(last) if last.0 == g => last.1 += 1.0,
            _ => atoms.push((g, 1.0)),
        }
    }
    atoms.iter_mut().for_each(|a| a.1 /= n);
    Measure::new(space, atoms, Vec::new())
}

#[derive(Clone, Copy, Debug)]
enum Piece {
    Atom(Genotype),
    Cell(usize),
}

/// Draws from a measure with one uniform per draw.
///
/// Pieces (atoms and grid cells) are laid out in location order; the uniform
/// picks a piece by its cumulative mass and, inside a cell, the leftover
/// fraction of the uniform sets the position.
#[derive(Clone, Debug)]
pub struct MeasureSampler {
    cells: usize,
    upper: Vec<f64>,
    pieces: Vec<Piece>,
}

impl MeasureSampler {
    fn new(m: &Measure) -> Self {
        let mut entries: Vec<(f64, u8, Piece, f64)> = Vec::new();
        for &(g, mass) in m.atoms() {
            if mass > 0.0 {
                entries.push((g.value(), 0, Piece::Atom(g), mass));
            }
        }
        let cells = m.space().size();
        for (i, &d) in m.density().iter().enumerate() {
            if d > 0.0 {
                entries.push((i as f64 / cells as f64, 1, Piece::Cell(i), d / cells as f64));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let total: f64 = entries.iter().map(|e| e.3).sum();
        let mut acc = 0.0;
        let mut upper = Vec::with_capacity(entries.len());
        let mut pieces = Vec::with_capacity(entries.len());
        for e in entries {
            acc += e.3 / total;
            upper.push(acc);
            pieces.push(e.2);
        }
        Self { cells, upper, pieces }
    }

    /// Maps a uniform `u ∈ [0, 1)` to a point.
    pub fn sample(&self, u: f64) -> Genotype {
        let last = self.pieces.len() - 1;
        let i = self.upper.partition_point(|&c| c <= u).min(last);
        match self.pieces[i] {
            Piece::Atom(g) => g,
            Piece::Cell(c) => {
                let lo = if i == 0 { 0.0 } else { self.upper[i - 1] };
                let width = self.upper[i] - lo;
                let frac = if width > 0.0 { ((u - lo) / width).clamp(0.0, 1.0) } else { 0.5 };
                let x = (c as f64 + frac) / self.cells as f64;
                Genotype::Point(x.min(1.0))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AtomLocation {
    Label(u32),
    Point(f64),
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum SpaceKind {
    Finite,
    UnitInterval,
}

/// JSON shape of a measure: `{"space", "atoms": [[loc, mass], ...],
/// "density": [...], "grid": M}`. On a finite space `grid` is the number of
/// labels.
#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    space: SpaceKind,
    atoms: Vec<(AtomLocation, f64)>,
    density: Vec<f64>,
    grid: usize,
}

impl Serialize for Measure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (space, grid) = match self.space {
            Space::Finite { k } => (SpaceKind::Finite, k),
            Space::UnitInterval { cells } => (SpaceKind::UnitInterval, cells),
        };
        let atoms = self
            .atoms
            .iter()
            .map(|&(g, m)| match g {
                Genotype::Label(l) => (AtomLocation::Label(l), m),
                Genotype::Point(x) => (AtomLocation::Point(x), m),
            })
            .collect();
        MeasureRepr {
            space,
            atoms,
            density: self.density.clone(),
            grid,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Measure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MeasureRepr::deserialize(deserializer)?;
        let space = match repr.space {
            SpaceKind::Finite => Space::finite(repr.grid),
            SpaceKind::UnitInterval => Space::interval(repr.grid),
        };
        let mut atoms = Vec::with_capacity(repr.atoms.len());
        for (loc, mass) in repr.atoms {
            let g = match (repr.space, loc) {
                (SpaceKind::Finite, AtomLocation::Label(l)) => Genotype::Label(l),
                (SpaceKind::UnitInterval, AtomLocation::Point(x)) => Genotype::Point(x),
                (SpaceKind::UnitInterval, AtomLocation::Label(l)) => Genotype::Point(f64::from(l)),
                (SpaceKind::Finite, AtomLocation::Point(x)) => {
                    return Err(serde::de::Error::custom(format!("finite atom location {x} is not a label")))
                }
            };
            atoms.push((g, mass));
        }
        Measure::new(space, atoms, repr.density).map_err(serde::de::Error::custom)
    }
}
