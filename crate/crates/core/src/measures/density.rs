use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, wrap_unit, NeumaierSum};

/// Atoms closer than this (on the circle) are merged.
pub const ATOM_MERGE_TOL: f64 = 1e-12;

/// Tolerance on total mass.
pub const MASS_TOL: f64 = 1e-12;

/// Finitely many Dirac masses with strictly increasing positions in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomicPart {
    pub atoms: Vec<(f64, f64)>,
}

impl AtomicPart {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Sorts, drops non-positive masses and merges atoms within
    /// [`ATOM_MERGE_TOL`], including across the seam at 0.
    pub fn from_raw(raw: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut v: Vec<(f64, f64)> = raw
            .into_iter()
            .filter(|&(_, m)| m > 0.0)
            .map(|(x, m)| (wrap_unit(x), m))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (x, m) in v {
            match out.last_mut() {
                Some(last) if x - last.0 <= ATOM_MERGE_TOL => {
                    if m > last.1 {
                        last.0 = x;
                    }
                    last.1 += m;
                }
                _ => out.push((x, m)),
            }
        }
        if out.len() >= 2 {
            let first = out[0];
            let last = out[out.len() - 1];
            if first.0 + 1.0 - last.0 <= ATOM_MERGE_TOL {
                out.pop();
                let m = first.1 + last.1;
                if last.1 > first.1 {
                    out.remove(0);
                    out.push((last.0, m));
                } else {
                    out[0].1 = m;
                }
            }
        }
        Self { atoms: out }
    }

    pub fn mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.1))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn max_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(x, m)| (x, m * s)).collect(),
        }
    }

    /// Mass of atoms at positions `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.atoms.partition_point(|a| a.0 <= x);
        compensated_sum(self.atoms[..idx].iter().map(|a| a.1))
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.atoms.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::Invalid(format!(
                    "atom positions not strictly increasing: {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(x, m) in &self.atoms {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::Invalid(format!("atom position {x} outside [0,1)")));
            }
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::Invalid(format!("atom mass {m} not positive")));
            }
        }
        if self.mass() > 1.0 + MASS_TOL {
            return Err(Error::Invalid(format!("atomic mass {} exceeds 1", self.mass())));
        }
        Ok(())
    }
}

/// Piecewise-constant density on `[0, 1)`: cell `i` is
/// `[breakpoints[i], breakpoints[i+1])` with the last cell ending at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDensity {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl Default for StepDensity {
    fn default() -> Self {
        Self::zero()
    }
}

impl StepDensity {
    /// Lebesgue measure.
    pub fn uniform() -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![1.0],
        }
    }

    pub fn zero() -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![0.0],
        }
    }

    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let d = Self { breakpoints, values };
        d.validate()?;
        Ok(d)
    }

    /// Equal cells of width `1/n` carrying the given values.
    pub fn from_cell_values(values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            breakpoints: (0..n).map(|i| i as f64 / n as f64).collect(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let a = self.breakpoints[i];
        let b = self.breakpoints.get(i + 1).copied().unwrap_or(1.0);
        (a, b)
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.len()).map(move |i| {
            let (a, b) = self.cell(i);
            (a, b, self.values[i])
        })
    }

    pub fn mass(&self) -> f64 {
        compensated_sum(self.cells().map(|(a, b, v)| v * (b - a)))
    }

    /// Value on the cell containing `x` (right-continuous).
    pub fn eval(&self, x: f64) -> f64 {
        let x = wrap_unit(x);
        let i = self.breakpoints.partition_point(|&b| b <= x).saturating_sub(1);
        self.values[i]
    }

    /// `∫_0^x ρ`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let x = x.min(1.0);
        let mut s = NeumaierSum::new();
        for (a, b, v) in self.cells() {
            if a >= x {
                break;
            }
            s.add(v * (b.min(x) - a));
        }
        s.value()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Merge adjacent cells whose values agree to a relative `1e-13`,
    /// replacing them by their mass-weighted mean.
    pub fn simplify(&self) -> Self {
        let mut bp: Vec<f64> = Vec::with_capacity(self.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.len());
        let mut widths: Vec<f64> = Vec::with_capacity(self.len());
        for (a, b, v) in self.cells() {
            let w = b - a;
            if w <= 0.0 {
                continue;
            }
            if let (Some(lv), Some(lw)) = (vals.last_mut(), widths.last_mut()) {
                if (*lv - v).abs() <= 1e-13 * lv.abs().max(v.abs()) {
                    *lv = (*lv * *lw + v * w) / (*lw + w);
                    *lw += w;
                    continue;
                }
            }
            bp.push(a);
            vals.push(v);
            widths.push(w);
        }
        if bp.is_empty() {
            return Self::zero();
        }
        Self {
            breakpoints: bp,
            values: vals,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() || self.breakpoints.len() != self.values.len() {
            return Err(Error::Invalid(format!(
                "{} breakpoints for {} values",
                self.breakpoints.len(),
                self.values.len()
            )));
        }
        if self.breakpoints[0] != 0.0 {
            return Err(Error::Invalid("first breakpoint must be 0".into()));
        }
        for w in self.breakpoints.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Invalid(format!(
                    "breakpoints not increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = self.breakpoints.last() {
            if last >= 1.0 {
                return Err(Error::Invalid(format!("breakpoint {last} not below 1")));
            }
        }
        if let Some(v) = self.values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Invalid(format!("density value {v} is negative or non-finite")));
        }
        Ok(())
    }
}

const EVENT_SNAP: f64 = 1e-15;

/// Superpose constant densities on sub-intervals of `[0, 1)`.
///
/// Each `(start, end, value)` has `0 <= start < end <= 1`; `base` is added everywhere.
pub(crate) fn superpose(base: f64, mut intervals: Vec<(f64, f64, f64)>) -> StepDensity {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * intervals.len());
    for (s, e, v) in intervals.drain(..) {
        if v == 0.0 || !(e > s) {
            continue;
        }
        events.push((s, v));
        if e < 1.0 {
            events.push((e, -v));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Endpoints that differ only by rounding (e.g. `(1 + y) - 1` vs `y`) share a position.
    let mut anchor = f64::NEG_INFINITY;
    for e in events.iter_mut() {
        if e.0 - anchor <= EVENT_SNAP {
            e.0 = anchor;
        } else {
            anchor = e.0;
        }
    }
    for e in events.iter_mut().rev() {
        if 1.0 - e.0 <= EVENT_SNAP {
            e.0 = 1.0;
        } else {
            break;
        }
    }
    let mut bp = vec![0.0];
    let mut vals = Vec::new();
    let mut run = NeumaierSum::new();
    run.add(base);
    let mut i = 0;
    while i < events.len() && events[i].0 <= EVENT_SNAP {
        run.add(events[i].1);
        i += 1;
    }
    vals.push(run.value().max(0.0));
    while i < events.len() {
        let x = events[i].0;
        if x >= 1.0 {
            break;
        }
        while i < events.len() && events[i].0 == x {
            run.add(events[i].1);
            i += 1;
        }
        bp.push(x);
        vals.push(run.value().max(0.0));
    }
    StepDensity {
        breakpoints: bp,
        values: vals,
    }
    .simplify()
}
