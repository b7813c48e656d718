//! Probability measures on the circle `ℝ/ℤ`, represented as finitely many
//! atoms plus a piecewise-constant density.

mod density;
mod field;
mod push;

use serde::{Deserialize, Serialize};

pub use density::{AtomicPart, StepDensity, ATOM_MERGE_TOL, MASS_TOL};
pub(crate) use density::superpose;
pub use field::{AffinePiece, PiecewiseAffine, TangentField, MEAN_ZERO_TOL};
pub use push::{push_forward, CircleMap, FnMap, PiecewiseAffineMap, COLLAPSE_RATIO, SUBDIVISION_WIDTH};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, wrap_unit, NeumaierSum};

/// Largest double strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Quantile runs at least this long count as an atom in [`max_atom_mass`].
pub const ATOM_RUN: usize = 3;

/// A probability measure on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRecord", into = "MeasureRecord")]
pub struct CircleMeasure {
    pub atomic: AtomicPart,
    pub density: StepDensity,
}

#[derive(Serialize, Deserialize)]
struct MeasureRecord {
    atoms: Vec<(f64, f64)>,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl From<CircleMeasure> for MeasureRecord {
    fn from(m: CircleMeasure) -> Self {
        Self {
            atoms: m.atomic.atoms,
            breakpoints: m.density.breakpoints,
            values: m.density.values,
        }
    }
}

impl TryFrom<MeasureRecord> for CircleMeasure {
    type Error = Error;

    fn try_from(r: MeasureRecord) -> Result<Self> {
        CircleMeasure::new(
            AtomicPart { atoms: r.atoms },
            StepDensity {
                breakpoints: r.breakpoints,
                values: r.values,
            },
        )
    }
}

impl CircleMeasure {
    pub fn new(atomic: AtomicPart, density: StepDensity) -> Result<Self> {
        let m = Self { atomic, density };
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_parts_unchecked(atomic: AtomicPart, density: StepDensity) -> Self {
        Self { atomic, density }
    }

    /// Lebesgue measure `λ`.
    pub fn lebesgue() -> Self {
        Self::from_parts_unchecked(AtomicPart::empty(), StepDensity::uniform())
    }

    pub fn dirac(x: f64) -> Self {
        Self::from_parts_unchecked(AtomicPart::from_raw([(x, 1.0)]), StepDensity::zero())
    }

    pub fn from_density(d: StepDensity) -> Self {
        Self::from_parts_unchecked(AtomicPart::empty(), d)
    }

    pub fn from_atoms(a: AtomicPart) -> Self {
        Self::from_parts_unchecked(a, StepDensity::zero())
    }

    pub fn mass(&self) -> f64 {
        self.atomic.mass() + self.density.mass()
    }

    pub fn is_atomless(&self) -> bool {
        self.atomic.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.atomic.validate()?;
        self.density.validate()?;
        let m = self.mass();
        if (m - 1.0).abs() > MASS_TOL {
            return Err(Error::Invalid(format!("total mass {m} differs from 1")));
        }
        Ok(())
    }

    /// `μ([0, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atomic.cdf(x) + self.density.cdf(x)
    }

    /// Quantiles for nondecreasing `us`, sweeping the measure once.
    fn quantiles_sorted(&self, us: impl IntoIterator<Item = f64>) -> Vec<f64> {
        let atoms = &self.atomic.atoms;
        let dens = &self.density;
        let ncells = dens.len();
        let mut out = Vec::new();
        let mut c = NeumaierSum::new();
        let mut x = 0.0;
        let mut ci = 0usize;
        let mut ai = 0usize;
        let mut at_atom = atoms.first().is_some_and(|a| a.0 <= 0.0);
        let mut last_support = 0.0;
        for u in us {
            loop {
                if at_atom {
                    let (p, m) = atoms[ai];
                    if c.value() + m >= u {
                        out.push(p);
                        break;
                    }
                    c.add(m);
                    last_support = p;
                    ai += 1;
                    at_atom = false;
                    continue;
                }
                if ci >= ncells {
                    out.push(last_support);
                    break;
                }
                let (_, b) = dens.cell(ci);
                let val = dens.values[ci];
                let next_atom = atoms.get(ai).map(|a| a.0).filter(|&p| p < b);
                let seg_end = next_atom.unwrap_or(b);
                let seg_mass = val * (seg_end - x);
                if val > 0.0 && c.value() + seg_mass >= u {
                    let q = (x + (u - c.value()) / val).clamp(x, seg_end);
                    out.push(q.min(BELOW_ONE));
                    break;
                }
                c.add(seg_mass);
                if val > 0.0 && seg_end > x {
                    last_support = seg_end.min(BELOW_ONE);
                }
                x = seg_end;
                if next_atom.is_some() {
                    at_atom = true;
                } else {
                    ci += 1;
                }
            }
        }
        out
    }
}

/// `inf { x : F(x) ≥ u }` with `F` the CDF from origin 0.
pub fn quantile(mu: &CircleMeasure, u: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Domain(format!("quantile level {u} outside [0,1)")));
    }
    Ok(mu.quantiles_sorted([u])[0])
}

/// `N` equal-mass atoms; positions may repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub positions: Vec<f64>,
}

impl Quantized {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn atom_mass(&self) -> f64 {
        1.0 / self.positions.len() as f64
    }

    /// Total mass, `N · (1/N)`.
    pub fn mass(&self) -> f64 {
        compensated_sum(self.positions.iter().map(|_| self.atom_mass()))
    }

    /// Merge repeated positions into an [`AtomicPart`].
    pub fn to_atomic(&self) -> AtomicPart {
        let w = self.atom_mass();
        AtomicPart::from_raw(self.positions.iter().map(|&x| (x, w)))
    }
}

/// Midpoint quantiles `quantile(μ, (i + ½)/N)`, `i = 0..N`.
pub fn quantize(mu: &CircleMeasure, n: usize) -> Result<Quantized> {
    if n == 0 {
        return Err(Error::Domain("quantization needs N ≥ 1".into()));
    }
    let nf = n as f64;
    let positions = mu.quantiles_sorted((0..n).map(|i| (i as f64 + 0.5) / nf));
    Ok(Quantized { positions })
}

/// `μ + t v := (Id + t v)_# μ`.
pub fn exp_map(mu: &CircleMeasure, v: &TangentField, t: f64) -> Result<CircleMeasure> {
    if t == 0.0 {
        return Ok(mu.clone());
    }
    push_forward(mu, &v.displacement(t))
}

/// Density of `(Id + t v)_#(ρ λ)`, mass-exact on every image cell.
pub fn pushed_density(rho: &StepDensity, v: &TangentField, t: f64) -> Result<StepDensity> {
    if t == 0.0 {
        return Ok(rho.clone());
    }
    let (x, jacobian) = v.min_jacobian(t);
    if !(jacobian > 0.0) {
        return Err(Error::Fold { x, jacobian });
    }
    let mu = CircleMeasure::from_density(rho.clone());
    let out = push_forward(&mu, &v.displacement(t))?;
    if !out.atomic.is_empty() {
        let (x, _) = out.atomic.atoms[0];
        return Err(Error::Fold { x, jacobian: 0.0 });
    }
    Ok(out.density)
}

/// `Σ α_i μ_i` for positive weights summing to 1.
pub fn convex_sum(terms: &[(f64, CircleMeasure)]) -> Result<CircleMeasure> {
    if terms.is_empty() {
        return Err(Error::Domain("empty convex combination".into()));
    }
    if let Some((a, _)) = terms.iter().find(|(a, _)| !(*a > 0.0)) {
        return Err(Error::Domain(format!("weight {a} is not positive")));
    }
    let total = compensated_sum(terms.iter().map(|t| t.0));
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("weights sum to {total}, not 1")));
    }
    if terms.len() == 1 {
        return Ok(terms[0].1.clone());
    }
    let atoms = terms
        .iter()
        .flat_map(|(a, m)| m.atomic.atoms.iter().map(move |&(x, w)| (x, a * w)));
    let intervals = terms
        .iter()
        .flat_map(|(a, m)| m.density.cells().map(move |(s, e, v)| (s, e, a * v)))
        .collect();
    Ok(CircleMeasure::from_parts_unchecked(
        AtomicPart::from_raw(atoms),
        superpose(0.0, intervals),
    ))
}

/// Largest atom mass seen either exactly or as a run of quantiles.
///
/// Quantizes to `N` points and finds the longest cyclic run whose spread
/// is at most `width_tol`; returns the larger of that run's mass and the
/// heaviest exact atom.
pub fn max_atom_mass(mu: &CircleMeasure, n: usize, width_tol: f64) -> Result<f64> {
    heaviest_atom(mu, n, width_tol).map(|(m, _)| m)
}

/// [`max_atom_mass`] together with the position of that atom.
pub fn heaviest_atom(mu: &CircleMeasure, n: usize, width_tol: f64) -> Result<(f64, f64)> {
    if n < 16 {
        return Err(Error::Domain(format!("atom detection needs N ≥ 16, got {n}")));
    }
    let q = quantize(mu, n)?.positions;
    let ext: Vec<f64> = q.iter().copied().chain(q.iter().map(|x| x + 1.0)).collect();
    let mut best = (1usize, 0usize);
    let mut lo = 0usize;
    for hi in 0..ext.len() {
        while ext[hi] - ext[lo] > width_tol || hi - lo + 1 > n {
            lo += 1;
        }
        if hi - lo + 1 > best.0 {
            best = (hi - lo + 1, lo);
        }
    }
    let run = (best.0 as f64 / n as f64, wrap_unit(ext[best.1]));
    let exact = mu
        .atomic
        .atoms
        .iter()
        .copied()
        .fold((0.0, 0.0), |acc, (x, m)| if m > acc.1 { (x, m) } else { acc });
    Ok(if exact.1 >= run.0 { (exact.1, exact.0) } else { run })
}

/// Whether `max_atom_mass` exceeds the run threshold `ATOM_RUN / N`.
pub fn atom_detected(mass: f64, n: usize) -> bool {
    mass > ATOM_RUN as f64 / n as f64
}

struct CdfTable<'a> {
    mu: &'a CircleMeasure,
    dens_cum: Vec<f64>,
    atom_cum: Vec<f64>,
}

impl<'a> CdfTable<'a> {
    fn new(mu: &'a CircleMeasure) -> Self {
        let mut s = NeumaierSum::new();
        let mut dens_cum = Vec::with_capacity(mu.density.len());
        for (a, b, v) in mu.density.cells() {
            dens_cum.push(s.value());
            s.add(v * (b - a));
        }
        let mut s = NeumaierSum::new();
        let mut atom_cum = vec![0.0];
        for &(_, m) in &mu.atomic.atoms {
            s.add(m);
            atom_cum.push(s.value());
        }
        Self { mu, dens_cum, atom_cum }
    }

    /// `(F(x⁻), F(x))`.
    fn eval(&self, x: f64) -> (f64, f64) {
        let d = &self.mu.density;
        let i = d.breakpoints.partition_point(|&b| b <= x).saturating_sub(1);
        let dc = self.dens_cum[i] + d.values[i] * (x.min(1.0) - d.breakpoints[i]);
        let atoms = &self.mu.atomic.atoms;
        let left = atoms.partition_point(|a| a.0 < x);
        let right = atoms.partition_point(|a| a.0 <= x);
        (dc + self.atom_cum[left], dc + self.atom_cum[right])
    }
}

/// `sup_x |F_μ(x) − F_ν(x)|`, exact for these piecewise-linear CDFs.
pub fn cdf_sup_distance(mu: &CircleMeasure, nu: &CircleMeasure) -> f64 {
    let (tm, tn) = (CdfTable::new(mu), CdfTable::new(nu));
    let knots = mu
        .density
        .breakpoints
        .iter()
        .chain(&nu.density.breakpoints)
        .copied()
        .chain(mu.atomic.atoms.iter().map(|a| a.0))
        .chain(nu.atomic.atoms.iter().map(|a| a.0))
        .chain(std::iter::once(1.0));
    let mut best = 0.0f64;
    for x in knots {
        let (a0, a1) = tm.eval(x);
        let (b0, b1) = tn.eval(x);
        best = best.max((a0 - b0).abs()).max((a1 - b1).abs());
    }
    best
}
