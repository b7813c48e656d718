//! Expanding circle maps `x ↦ d x + (ε/2π) sin(2πx)` and their invariant densities.

use std::borrow::Cow;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{push_forward, CircleMap, CircleMeasure, StepDensity};
use crate::numeric::{grid_mean, periodic_cubic, wrap_unit};

const TAU: f64 = 2.0 * PI;

/// Margin keeping the perturbation strictly expanding.
pub const EXPANSION_MARGIN: f64 = 1e-6;

const NEWTON_MAX_ITER: usize = 50;

/// Degree-`d` self-cover `Φ` with lift `d x + (ε/2π) sin(2πx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapRecord", into = "MapRecord")]
pub struct ExpandingMapSpec {
    degree: usize,
    epsilon: f64,
    /// `a_i` with `lift(a_i) = i`, `i = 0..d`.
    branch_starts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MapRecord {
    degree: usize,
    epsilon: f64,
}

impl From<ExpandingMapSpec> for MapRecord {
    fn from(m: ExpandingMapSpec) -> Self {
        Self {
            degree: m.degree,
            epsilon: m.epsilon,
        }
    }
}

impl TryFrom<MapRecord> for ExpandingMapSpec {
    type Error = Error;

    fn try_from(r: MapRecord) -> Result<Self> {
        ExpandingMapSpec::new(r.degree, r.epsilon)
    }
}

impl ExpandingMapSpec {
    pub fn new(degree: usize, epsilon: f64) -> Result<Self> {
        if degree < 2 {
            return Err(Error::Domain(format!("degree {degree} must be at least 2")));
        }
        let bound = degree as f64 - 1.0 - EXPANSION_MARGIN;
        if !(epsilon.abs() <= bound) {
            return Err(Error::Domain(format!(
                "|epsilon| = {} exceeds {bound} for degree {degree}",
                epsilon.abs()
            )));
        }
        let mut m = Self {
            degree,
            epsilon,
            branch_starts: Vec::new(),
        };
        m.branch_starts = (0..degree).map(|i| m.solve_lift_bisect(i as f64)).collect();
        Ok(m)
    }

    /// The model map `Φ_d(x) = d x mod 1`.
    pub fn model(degree: usize) -> Result<Self> {
        Self::new(degree, 0.0)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_model(&self) -> bool {
        self.epsilon == 0.0
    }

    #[inline]
    pub fn lift(&self, x: f64) -> f64 {
        self.degree as f64 * x + self.epsilon / TAU * (TAU * x).sin()
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.degree as f64 + self.epsilon * (TAU * x).cos()
    }

    pub fn min_derivative(&self) -> f64 {
        self.degree as f64 - self.epsilon.abs()
    }

    pub fn max_derivative(&self) -> f64 {
        self.degree as f64 + self.epsilon.abs()
    }

    /// Left endpoints of the branch cells.
    pub fn branch_starts(&self) -> &[f64] {
        &self.branch_starts
    }

    fn solve_lift_bisect(&self, target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        if target <= 0.0 {
            return 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.lift(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `lift(y) = target` on `[lo, hi]` by Newton steps safeguarded by bisection.
    fn solve_lift(&self, target: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
        let d = self.degree as f64;
        let mut y = (target / d).clamp(lo, hi);
        for _ in 0..NEWTON_MAX_ITER {
            let r = self.lift(y) - target;
            if r.abs() <= 4.0 * f64::EPSILON * target.abs().max(1.0) {
                return Ok(y);
            }
            if r < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let mut next = y - r / self.derivative(y);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == y || hi - lo <= f64::EPSILON * 4.0 {
                return Ok(next);
            }
            y = next;
        }
        let r = self.lift(y) - target;
        if r.abs() <= 1e-12 {
            Ok(y)
        } else {
            Err(Error::Numeric(format!(
                "inverse branch for {target} did not converge (residual {r:e})"
            )))
        }
    }
}

impl CircleMap for ExpandingMapSpec {
    fn cell_breaks(&self) -> Cow<'_, [f64]> {
        Cow::Owned(vec![0.0])
    }

    fn lift_on_cell(&self, _cell: usize, x: f64) -> f64 {
        self.lift(x)
    }

    fn affine_cells(&self) -> bool {
        self.is_model()
    }
}

/// `Φ(x) = lift(x) mod 1`.
pub fn eval_map(map: &ExpandingMapSpec, x: f64) -> f64 {
    wrap_unit(map.lift(wrap_unit(x)))
}

/// The `d` preimages of `x`, one per branch, in increasing order.
pub fn inverse_branches(map: &ExpandingMapSpec, x: f64) -> Result<Vec<f64>> {
    let x = wrap_unit(x);
    let d = map.degree;
    if map.is_model() {
        return Ok((0..d).map(|i| (x + i as f64) / d as f64).collect());
    }
    (0..d)
        .map(|i| {
            let lo = map.branch_starts[i];
            let hi = map.branch_starts.get(i + 1).copied().unwrap_or(1.0);
            map.solve_lift(x + i as f64, lo, hi)
        })
        .collect()
}

/// Fixed point of the Perron–Frobenius operator on a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantDensity {
    /// `ρ(j / N)`.
    pub samples: Vec<f64>,
    /// Sup-norm change of the last normalized iterate.
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

impl InvariantDensity {
    /// `ρ ≡ 1`.
    pub fn uniform(n: usize) -> Self {
        Self {
            samples: vec![1.0; n],
            residual: 0.0,
            iterations: 0,
            residual_history: Vec::new(),
        }
    }

    pub fn grid_len(&self) -> usize {
        self.samples.len()
    }

    /// Smooth evaluation between nodes.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        periodic_cubic(&self.samples, x)
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫ρ λ` for the piecewise-linear interpolant.
    pub fn integral(&self) -> f64 {
        grid_mean(&self.samples)
    }

    /// Cell averages of the piecewise-linear interpolant.
    pub fn to_step_density(&self) -> StepDensity {
        let n = self.samples.len();
        if self.samples.iter().all(|&s| s == self.samples[0]) {
            return StepDensity::uniform().scaled(self.samples[0]);
        }
        StepDensity::from_cell_values(
            (0..n)
                .map(|j| 0.5 * (self.samples[j] + self.samples[(j + 1) % n]))
                .collect(),
        )
    }

    /// `ρ λ`.
    pub fn measure(&self) -> CircleMeasure {
        CircleMeasure::from_density(self.to_step_density())
    }

    /// Samples of `ρ` on a grid of another size.
    pub fn resample(&self, m: usize) -> Vec<f64> {
        if m == self.samples.len() {
            return self.samples.clone();
        }
        (0..m).map(|j| self.eval(j as f64 / m as f64)).collect()
    }
}

/// Preimages and inverse Jacobians of the grid nodes `{j / N}`.
pub(crate) fn grid_preimages(map: &ExpandingMapSpec, n: usize) -> Result<Vec<Vec<(f64, f64)>>> {
    (0..n)
        .into_par_iter()
        .map(|j| {
            let ys = inverse_branches(map, j as f64 / n as f64)?;
            Ok(ys.into_iter().map(|y| (y, 1.0 / map.derivative(y))).collect())
        })
        .collect()
}

/// Iterates `(P f)(x) = Σ_{Φ(y)=x} f(y) / Φ′(y)` from `f ≡ 1`, with linear
/// interpolation at preimages and normalization to unit mean after each step.
pub fn invariant_density(
    map: &ExpandingMapSpec,
    n: usize,
    tol: f64,
    max_iter: usize,
) -> Result<InvariantDensity> {
    if n < 256 || !n.is_power_of_two() {
        return Err(Error::Domain(format!("grid size {n} must be a power of two ≥ 256")));
    }
    let pre = grid_preimages(map, n)?;
    let mut f = vec![1.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let mut g: Vec<f64> = pre
            .par_iter()
            .map(|ys| {
                ys.iter()
                    .map(|&(y, w)| crate::numeric::periodic_lerp(&f, y) * w)
                    .sum::<f64>()
            })
            .collect();
        let mean = grid_mean(&g);
        g.iter_mut().for_each(|v| *v /= mean);
        let residual = f
            .iter()
            .zip(&g)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        history.push(residual);
        f = g;
        if residual <= tol {
            return Ok(InvariantDensity {
                samples: f,
                residual,
                iterations: it,
                residual_history: history,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}

/// `Φ^k_# μ`.
pub fn iterate_pushforward(mu: &CircleMeasure, map: &ExpandingMapSpec, k: usize) -> Result<CircleMeasure> {
    let mut cur = mu.clone();
    for _ in 0..k {
        cur = push_forward(&cur, map)?;
    }
    Ok(cur)
}
