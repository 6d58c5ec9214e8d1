use super::dp::Problem;
use super::Mode;
use crate::measures::{quad, relative_entropy, FitnessSpec, Genotype, Measure, PhiSpec, QuadOptions};
use crate::{Error, Result};

/// `F(q) = ln⟨e^{−φ}, q⟩ − c·D(ᾱ‖q)` (λ = 0) or `F(q) = −⟨φ, q⟩ − c·D(ᾱ‖q)`
/// (0 < λ < 1), evaluated on the grid representation of `q`.
///
/// Atoms of `q` off the support of ᾱ do not enter `D(ᾱ‖q)`. Returns `−∞`
/// when ᾱ is not absolutely continuous with respect to `q`.
pub fn objective_f(q: &Measure, fit: &FitnessSpec, base: &Measure, c: f64, mode: Mode) -> Result<f64> {
    let d = relative_entropy(base, q)?;
    if d.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let phi = &fit.phi;
    Ok(match mode {
        Mode::Lambda0 => q.expect(&|g| (-phi.eval(g)).exp())?.ln() - c * d,
        Mode::Frac => -q.expect(&|g| phi.eval(g))? - c * d,
    })
}

/// `F(q*)` from its closed form: `ln θ + c ∫ ln f dᾱ` for λ = 0 and
/// `−θ + c ∫ ln f dᾱ` otherwise, with θ = θ_o in the atom regime.
pub fn objective_at_limit(phi: &PhiSpec, base: &Measure, c: f64, mode: Mode) -> Result<f64> {
    let p = Problem::new(phi, base, c, mode)?;
    let (u, theta, _) = p.optimum()?;
    let floor = p.f_min(u).ln();
    let log_f = p.integrate(&|g| (p.f(u, g).ln() - floor).max(0.0), &QuadOptions::default())?;
    let log_f = log_f.value + floor * base.total_mass();
    Ok(match mode {
        Mode::Lambda0 => theta.ln() + c * log_f,
        Mode::Frac => -theta + c * log_f,
    })
}

/// Exact objective on measures whose density is a cellwise multiple of the
/// density of q*.
///
/// A measure with cell masses `m_i` is read as the density `s_i f*` on cell
/// `i`, where `s_i = m_i / q*(cell i)`, plus atoms. Then `⟨w, q⟩` and
/// `D(ᾱ‖q)` reduce to sums over cells of integrals of `f*` computed once,
/// so perturbations of q* are compared without grid error.
#[derive(Clone, Debug)]
pub struct ShapedObjective {
    phi: PhiSpec,
    c: f64,
    mode: Mode,
    x_o: Option<Genotype>,
    base_mass: Vec<f64>,
    ref_mass: Vec<f64>,
    ref_moment: Vec<f64>,
    ref_log: Vec<f64>,
    atom: f64,
}

impl ShapedObjective {
    /// Needs an interval base measure given by a density alone.
    pub fn new(phi: &PhiSpec, base: &Measure, c: f64, mode: Mode) -> Result<Self> {
        if base.space().is_finite() || !base.atoms().is_empty() || !base.has_density() {
            return Err(Error::Unsupported("shaped objectives need an atomless base on the unit interval".into()));
        }
        let p = Problem::new(phi, base, c, mode)?;
        let (u, _, atom) = p.optimum()?;
        let s = match p.x_o {
            Some(Genotype::Point(s)) => Some(s),
            _ => None,
        };
        let cells = base.space().size();
        let opts = QuadOptions::default();
        let floor = p.f_min(u).ln();
        let moment = |x: f64| match mode {
            Mode::Lambda0 => (-phi.eval(Genotype::Point(x))).exp(),
            Mode::Frac => phi.eval(Genotype::Point(x)),
        };
        let f = |x: f64| p.f(u, Genotype::Point(x));
        let cell_integral = |h: &dyn Fn(f64) -> f64, a: f64, b: f64| -> Result<f64> {
            Ok(match s {
                Some(s) => quad::integrate_with_singularity(h, a, b, s, &opts)?.value,
                None => quad::integrate_interval(h, a, b, &opts)?,
            })
        };
        let mut out = Self {
            phi: phi.clone(),
            c,
            mode,
            x_o: p.x_o,
            base_mass: Vec::with_capacity(cells),
            ref_mass: Vec::with_capacity(cells),
            ref_moment: Vec::with_capacity(cells),
            ref_log: Vec::with_capacity(cells),
            atom,
        };
        for (i, &d) in base.density().iter().enumerate() {
            let a = i as f64 / cells as f64;
            let b = (i + 1) as f64 / cells as f64;
            out.base_mass.push(d / cells as f64);
            if d == 0.0 {
                out.ref_mass.push(0.0);
                out.ref_moment.push(0.0);
                out.ref_log.push(0.0);
                continue;
            }
            out.ref_mass.push(d * cell_integral(&f, a, b)?);
            out.ref_moment.push(d * cell_integral(&|x| moment(x) * f(x), a, b)?);
            let shifted = cell_integral(&|x| (f(x).ln() - floor).max(0.0), a, b)?;
            out.ref_log.push(d * (shifted + floor * (b - a)));
        }
        Ok(out)
    }

    /// Cell masses and the atom at x_o of q* itself.
    pub fn reference(&self) -> (Vec<f64>, f64) {
        (self.ref_mass.clone(), self.atom)
    }

    pub fn x_o(&self) -> Option<Genotype> {
        self.x_o
    }

    /// `F` at the measure with the given cell masses and atoms.
    pub fn evaluate(&self, cell_masses: &[f64], atoms: &[(Genotype, f64)]) -> Result<f64> {
        if cell_masses.len() != self.ref_mass.len() {
            return Err(Error::InvalidParameter(format!(
                "{} cell masses for {} cells",
                cell_masses.len(),
                self.ref_mass.len()
            )));
        }
        let total: f64 = cell_masses.iter().sum::<f64>() + atoms.iter().map(|a| a.1).sum::<f64>();
        if (total - 1.0).abs() > 1e-9 || cell_masses.iter().chain(atoms.iter().map(|a| &a.1)).any(|m| *m < 0.0) {
            return Err(Error::InvalidMeasure(format!("perturbed measure has total mass {total}")));
        }
        let mut moment = 0.0;
        let mut neg_entropy = 0.0;
        for i in 0..cell_masses.len() {
            if self.base_mass[i] == 0.0 {
                continue;
            }
            if cell_masses[i] == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            let s = cell_masses[i] / self.ref_mass[i];
            moment += s * self.ref_moment[i];
            neg_entropy += self.base_mass[i] * s.ln() + self.ref_log[i];
        }
        for &(g, m) in atoms {
            let v = self.phi.eval(g);
            moment += m * match self.mode {
                Mode::Lambda0 => (-v).exp(),
                Mode::Frac => v,
            };
        }
        Ok(match self.mode {
            Mode::Lambda0 => moment.ln() + self.c * neg_entropy,
            Mode::Frac => -moment + self.c * neg_entropy,
        })
    }
}
