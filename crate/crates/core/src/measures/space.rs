use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

/// The type space: a finite label set `0..k` or the unit interval cut into
/// `cells` equal grid cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    Finite { k: usize },
    UnitInterval { cells: usize },
}

pub const DEFAULT_CELLS: usize = 4096;

impl Space {
    pub fn finite(k: usize) -> Self {
        Space::Finite { k }
    }

    pub fn interval(cells: usize) -> Self {
        Space::UnitInterval { cells }
    }

    pub fn validate(&self) -> crate::Result<()> {
        match *self {
            Space::Finite { k } if k >= 1 => Ok(()),
            Space::UnitInterval { cells } if cells >= 2 => Ok(()),
            Space::Finite { .. } => Err(crate::Error::InvalidParameter(
                "a finite space needs at least one label".into(),
            )),
            Space::UnitInterval { .. } => Err(crate::Error::InvalidParameter(
                "the interval grid needs at least two cells".into(),
            )),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Space::Finite { .. })
    }

    /// Number of labels (finite) or grid cells (interval).
    pub fn size(&self) -> usize {
        match *self {
            Space::Finite { k } => k,
            Space::UnitInterval { cells } => cells,
        }
    }

    pub fn contains(&self, g: Genotype) -> bool {
        match (*self, g) {
            (Space::Finite { k }, Genotype::Label(l)) => (l as usize) < k,
            (Space::UnitInterval { .. }, Genotype::Point(x)) => (0.0..=1.0).contains(&x),
            _ => false,
        }
    }

    /// Grid cell holding `x`; the right end point belongs to the last cell.
    pub fn cell_of(&self, x: f64) -> usize {
        let m = self.size();
        ((x * m as f64).floor() as usize).min(m - 1)
    }

    pub fn describe(&self) -> String {
        match *self {
            Space::Finite { k } => format!("finite space with {k} labels"),
            Space::UnitInterval { cells } => format!("unit interval on {cells} cells"),
        }
    }
}

/// A point of the type space.
///
/// Equality, hashing and ordering of interval points go through the bit
/// pattern, so two genotypes are the same exactly when they are the same
/// floating point number.
#[derive(Clone, Copy, Debug)]
pub enum Genotype {
    Label(u32),
    Point(f64),
}

impl Genotype {
    /// The label, or the point as a real.
    pub fn value(&self) -> f64 {
        match *self {
            Genotype::Label(l) => f64::from(l),
            Genotype::Point(x) => x,
        }
    }

    pub fn label(&self) -> Option<usize> {
        match *self {
            Genotype::Label(l) => Some(l as usize),
            Genotype::Point(_) => None,
        }
    }
}

impl PartialEq for Genotype {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Genotype::Label(a), Genotype::Label(b)) => a == b,
            (Genotype::Point(a), Genotype::Point(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Genotype {}

impl Hash for Genotype {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Genotype::Label(l) => {
                0u8.hash(state);
                l.hash(state);
            }
            Genotype::Point(x) => {
                1u8.hash(state);
                x.to_bits().hash(state);
            }
        }
    }
}

impl Ord for Genotype {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Genotype::Label(a), Genotype::Label(b)) => a.cmp(b),
            (Genotype::Point(a), Genotype::Point(b)) => a.total_cmp(b),
            (Genotype::Label(_), Genotype::Point(_)) => Ordering::Less,
            (Genotype::Point(_), Genotype::Label(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for Genotype {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Genotype::Label(l) => write!(f, "{l}"),
            Genotype::Point(x) => write!(f, "{x}"),
        }
    }
}
