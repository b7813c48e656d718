use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::numeric::{wrap_unit, NeumaierSum};

use super::density::{superpose, AtomicPart};
use super::CircleMeasure;

/// Maximum width of the pieces a non-affine cell is cut into before pushing.
pub const SUBDIVISION_WIDTH: f64 = 1.0 / 32768.0;

/// Image pieces shorter than this fraction of their source collapse to an atom.
pub const COLLAPSE_RATIO: f64 = 1e-9;

/// A circle map that is continuous and monotone on finitely many cells.
///
/// Cell `i` is `[breaks[i], breaks[i+1])`, the last one ending at 1.
/// `lift_on_cell(i, x)` is a real-valued lift, continuous and monotone on
/// the closed cell; the map is its reduction mod 1.
pub trait CircleMap: Sync {
    fn cell_breaks(&self) -> Cow<'_, [f64]>;

    fn lift_on_cell(&self, cell: usize, x: f64) -> f64;

    /// Whether each cell's lift is affine, making push-forwards exact.
    fn affine_cells(&self) -> bool {
        false
    }

    fn apply(&self, x: f64) -> f64 {
        let x = wrap_unit(x);
        let breaks = self.cell_breaks();
        let i = breaks.partition_point(|&b| b <= x).saturating_sub(1);
        wrap_unit(self.lift_on_cell(i, x))
    }
}

/// Affine on each cell `(a, b, lift(a), lift(b))`; cells contiguous from 0 to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineMap {
    pub cells: Vec<(f64, f64, f64, f64)>,
    breaks: Vec<f64>,
}

impl PiecewiseAffineMap {
    pub fn new(cells: Vec<(f64, f64, f64, f64)>) -> Result<Self> {
        if cells.is_empty() || cells[0].0 != 0.0 {
            return Err(Error::UnsupportedMap("cells must start at 0".into()));
        }
        for w in cells.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(Error::UnsupportedMap(format!("gap between cells at {}", w[0].1)));
            }
        }
        if cells.iter().any(|c| !(c.1 > c.0)) {
            return Err(Error::UnsupportedMap("empty cell".into()));
        }
        Ok(Self::new_unchecked(cells))
    }

    pub(crate) fn new_unchecked(cells: Vec<(f64, f64, f64, f64)>) -> Self {
        let breaks = cells.iter().map(|c| c.0).collect();
        Self { cells, breaks }
    }
}

impl CircleMap for PiecewiseAffineMap {
    fn cell_breaks(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.breaks)
    }

    fn lift_on_cell(&self, cell: usize, x: f64) -> f64 {
        let (a, b, ya, yb) = self.cells[cell];
        if x == b {
            return yb;
        }
        ya + (yb - ya) * (x - a) / (b - a)
    }

    fn affine_cells(&self) -> bool {
        true
    }
}

/// A map given by a closure lift on declared monotone cells.
pub struct FnMap<F> {
    breaks: Vec<f64>,
    lift: F,
}

impl<F: Fn(f64) -> f64 + Sync> FnMap<F> {
    /// Checks monotonicity of `lift` on each cell by sampling.
    pub fn new(breaks: Vec<f64>, lift: F) -> Result<Self> {
        if breaks.first() != Some(&0.0) || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::UnsupportedMap("cell breaks must increase from 0".into()));
        }
        const PROBES: usize = 64;
        for i in 0..breaks.len() {
            let a = breaks[i];
            let b = breaks.get(i + 1).copied().unwrap_or(1.0);
            let ys: Vec<f64> = (0..=PROBES)
                .map(|j| lift(a + (b - a) * j as f64 / PROBES as f64))
                .collect();
            let up = ys.windows(2).all(|w| w[1] >= w[0]);
            let down = ys.windows(2).all(|w| w[1] <= w[0]);
            if !(up || down) {
                return Err(Error::UnsupportedMap(format!(
                    "lift is not monotone on [{a}, {b})"
                )));
            }
        }
        Ok(Self { breaks, lift })
    }
}

impl<F: Fn(f64) -> f64 + Sync> CircleMap for FnMap<F> {
    fn cell_breaks(&self) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.breaks)
    }

    fn lift_on_cell(&self, _cell: usize, x: f64) -> f64 {
        (self.lift)(x)
    }
}

struct ImageAccumulator {
    base: NeumaierSum,
    intervals: Vec<(f64, f64, f64)>,
    atoms: Vec<(f64, f64)>,
}

impl ImageAccumulator {
    fn emit(&mut self, width: f64, ya: f64, yb: f64, mass: f64) {
        if mass <= 0.0 {
            return;
        }
        let (lo, hi) = if ya <= yb { (ya, yb) } else { (yb, ya) };
        let len = hi - lo;
        if len <= COLLAPSE_RATIO * width {
            self.atoms.push((wrap_unit(0.5 * (lo + hi)), mass));
            return;
        }
        let dens = mass / len;
        let turns = len.floor();
        if turns > 0.0 {
            self.base.add(turns * dens);
        }
        let rem = len - turns;
        if rem <= 0.0 {
            return;
        }
        let s = wrap_unit(lo);
        let e = s + rem;
        if e <= 1.0 {
            self.intervals.push((s, e, dens));
        } else {
            self.intervals.push((s, 1.0, dens));
            self.intervals.push((0.0, e - 1.0, dens));
        }
    }
}

/// `T_# μ` for a piecewise monotone circle map.
///
/// Affine cells are pushed exactly. Other cells are cut into pieces of
/// width at most [`SUBDIVISION_WIDTH`], each pushed with constant image
/// density carrying exactly its mass.
pub fn push_forward(mu: &CircleMeasure, map: &dyn CircleMap) -> Result<CircleMeasure> {
    let breaks = map.cell_breaks();
    if breaks.first() != Some(&0.0) {
        return Err(Error::UnsupportedMap("cell breaks must start at 0".into()));
    }
    let cell_of = |x: f64| breaks.partition_point(|&b| b <= x).saturating_sub(1);
    let affine = map.affine_cells();

    let mut acc = ImageAccumulator {
        base: NeumaierSum::new(),
        intervals: Vec::new(),
        atoms: Vec::with_capacity(mu.atomic.len()),
    };
    for &(x, m) in &mu.atomic.atoms {
        let i = cell_of(x);
        acc.atoms.push((wrap_unit(map.lift_on_cell(i, x)), m));
    }

    let dens = &mu.density;
    let mut knots: Vec<f64> = dens.breakpoints.iter().chain(breaks.iter()).copied().collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut di = 0usize;
    let mut mi = 0usize;
    for (j, &a) in knots.iter().enumerate() {
        let b = knots.get(j + 1).copied().unwrap_or(1.0);
        if !(b > a) {
            continue;
        }
        while di + 1 < dens.breakpoints.len() && dens.breakpoints[di + 1] <= a {
            di += 1;
        }
        while mi + 1 < breaks.len() && breaks[mi + 1] <= a {
            mi += 1;
        }
        let val = dens.values[di];
        if val <= 0.0 {
            continue;
        }
        let cell_end = breaks.get(mi + 1).copied().unwrap_or(1.0);
        let lift = |x: f64| map.lift_on_cell(mi, if x >= cell_end { cell_end } else { x });
        if affine {
            acc.emit(b - a, lift(a), lift(b), val * (b - a));
        } else {
            let m = ((b - a) / SUBDIVISION_WIDTH).ceil().max(1.0) as usize;
            let mut ya = lift(a);
            for s in 0..m {
                let xa = a + (b - a) * s as f64 / m as f64;
                let xb = if s + 1 == m { b } else { a + (b - a) * (s + 1) as f64 / m as f64 };
                let yb = lift(xb);
                acc.emit(xb - xa, ya, yb, val * (xb - xa));
                ya = yb;
            }
        }
    }

    let atomic = AtomicPart::from_raw(acc.atoms);
    let density = superpose(acc.base.value(), acc.intervals);
    Ok(CircleMeasure::from_parts_unchecked(atomic, density))
}
