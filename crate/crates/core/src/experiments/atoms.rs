use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{atom_detected, exp_map, heaviest_atom, AffinePiece, CircleMeasure, PiecewiseAffine, TangentField};

use super::report::Check;

/// Largest tolerated fraction of `t` values with an atom.
pub const ATOM_FRACTION: f64 = 0.05;

/// Quantile runs narrower than this count as a single atom.
pub const ATOM_WIDTH: f64 = 1e-9;

/// Deepest supported Cantor approximation.
pub const MAX_CANTOR_DEPTH: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSample {
    pub t: f64,
    pub mass: f64,
    pub location: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomScanReport {
    pub samples: Vec<AtomSample>,
    pub fraction: f64,
    pub threshold: f64,
    pub resolution: usize,
}

impl AtomScanReport {
    pub fn detected_at(&self) -> Vec<f64> {
        self.samples.iter().filter(|s| s.detected).map(|s| s.t).collect()
    }
}

impl Check for AtomScanReport {
    fn passes(&self) -> bool {
        if self.samples.is_empty() {
            return false;
        }
        let hits = self
            .samples
            .iter()
            .filter(|s| atom_detected(s.mass, self.resolution))
            .count();
        hits as f64 / self.samples.len() as f64 <= self.threshold
    }
}

/// Looks for atoms of `μ + t v` over the given `t`.
pub fn atomless_scan(mu: &CircleMeasure, v: &TangentField, t_samples: &[f64], n: usize) -> Result<AtomScanReport> {
    if !mu.is_atomless() {
        return Err(Error::Domain("scan needs an atomless base measure".into()));
    }
    if t_samples.is_empty() {
        return Err(Error::Domain("no t samples".into()));
    }
    let samples: Vec<AtomSample> = t_samples
        .par_iter()
        .map(|&t| -> Result<AtomSample> {
            let (mass, location) = heaviest_atom(&exp_map(mu, v, t)?, n, ATOM_WIDTH)?;
            Ok(AtomSample { t, mass, location, detected: atom_detected(mass, n) })
        })
        .collect::<Result<_>>()?;
    let hits = samples.iter().filter(|s| s.detected).count();
    Ok(AtomScanReport {
        fraction: hits as f64 / samples.len() as f64,
        samples,
        threshold: ATOM_FRACTION,
        resolution: n,
    })
}

/// Heights of the corners at `x = digit` of the square whose four-corner Cantor set projects
/// vertically onto `[0, 1]`.
const CORNERS: [f64; 4] = [0.0, -2.0, 1.0, -1.0];

/// Lower edge of the convex hull `{Σ 4^{-j} P_{d_j}}` on `[0, 1]`.
fn hull_bottom(s: f64) -> f64 {
    if s <= 1.0 / 3.0 {
        -2.0 * s
    } else {
        -2.0 / 3.0 + 0.5 * (s - 1.0 / 3.0)
    }
}

/// Lowest point above each `x` of the depth-`m` approximation of the
/// four-corner Cantor set, recentred to λ-mean 0.
pub fn cantor_pieces(depth: usize) -> Result<PiecewiseAffine> {
    let raw = lower_boundary(depth)?;
    Ok(raw.shifted(-raw.mean()))
}

fn lower_boundary(depth: usize) -> Result<PiecewiseAffine> {
    if depth > MAX_CANTOR_DEPTH {
        return Err(Error::Domain(format!("depth {depth} exceeds {MAX_CANTOR_DEPTH}")));
    }
    let cells = 1usize << (2 * depth);
    let w = 1.0 / cells as f64;
    let mut pieces = Vec::with_capacity(2 * cells);
    for c in 0..cells {
        let mut y0 = 0.0;
        let mut scale = 1.0;
        for j in 0..depth {
            scale /= 4.0;
            let digit = (c >> (2 * (depth - 1 - j))) & 3;
            y0 += scale * CORNERS[digit];
        }
        let a = c as f64 * w;
        let b = if c + 1 == cells { 1.0 } else { (c + 1) as f64 * w };
        let mid = a + w / 3.0;
        pieces.push(AffinePiece { start: a, end: mid, left: y0, right: y0 + w * hull_bottom(1.0 / 3.0) });
        pieces.push(AffinePiece {
            start: mid,
            end: b,
            left: y0 + w * hull_bottom(1.0 / 3.0),
            right: y0 + w * hull_bottom(1.0),
        });
    }
    PiecewiseAffine::new(pieces)
}

/// [`cantor_pieces`] as a tangent field sampled on `4^depth · 4` nodes.
pub fn cantor_field(depth: usize) -> Result<TangentField> {
    let p = cantor_pieces(depth)?;
    let n = (1usize << (2 * depth)) * 4;
    Ok(TangentField::from_pieces(p, n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorReport {
    pub depth: usize,
    pub lambda_mean: f64,
    pub l2_norm: f64,
    /// `sup |v_depth − v_{depth−1}|` before recentring; `None` at depth 0.
    pub refinement_change: Option<f64>,
    /// `4^{−(depth−1)}` times the square height.
    pub refinement_bound: Option<f64>,
    pub scan: AtomScanReport,
}

impl Check for CantorReport {
    fn passes(&self) -> bool {
        let refine_ok = match (self.refinement_change, self.refinement_bound) {
            (Some(c), Some(b)) => c <= b,
            _ => true,
        };
        self.lambda_mean.abs() <= 1e-12 && refine_ok && self.scan.passes()
    }
}

/// Vertical extent of the hull square.
const SQUARE_HEIGHT: f64 = 1.0;

/// Construction checks plus an atom scan over `t_count` uniform `t ∈ (0, 1]`.
pub fn cantor_report(depth: usize, t_count: usize, n: usize) -> Result<CantorReport> {
    let p = cantor_pieces(depth)?;
    let (refinement_change, refinement_bound) = if depth == 0 {
        (None, None)
    } else {
        // The finer boundary refines the coarser one, so the gap is affine on
        // each fine piece and peaks at an end.
        let fine = lower_boundary(depth)?;
        let coarse = lower_boundary(depth - 1)?;
        let change = fine
            .pieces
            .iter()
            .flat_map(|q| {
                let inner = q.end - 1e-9 * (q.end - q.start);
                [
                    (q.left - coarse.eval(q.start)).abs(),
                    (q.eval(inner) - coarse.eval(inner)).abs(),
                ]
            })
            .fold(0.0, f64::max);
        (Some(change), Some(SQUARE_HEIGHT * 4f64.powi(-(depth as i32 - 1))))
    };
    let field = cantor_field(depth)?;
    let ts: Vec<f64> = (1..=t_count).map(|j| j as f64 / t_count as f64).collect();
    let scan = atomless_scan(&CircleMeasure::lebesgue(), &field, &ts, n)?;
    Ok(CantorReport {
        depth,
        lambda_mean: p.mean(),
        l2_norm: p.l2_norm_sq().sqrt(),
        refinement_change,
        refinement_bound,
        scan,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_is_hull_bottom() {
        let p = cantor_pieces(0).unwrap();
        assert_eq!(p.pieces.len(), 2);
        assert!(p.mean().abs() < 1e-15);
        let shift = p.eval(0.0);
        assert!((p.eval(1.0 / 3.0) - shift + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn digits_follow_corner_heights() {
        let p = cantor_pieces(1).unwrap();
        let c = p.eval(0.0);
        for (digit, y) in CORNERS.iter().enumerate() {
            assert!((p.eval(digit as f64 / 4.0) - c - y / 4.0).abs() < 1e-15);
        }
    }
}
