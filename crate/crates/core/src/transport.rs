//! Exact `W_p` between circle measures via equal-mass quantization.
//!
//! For two sorted lists of `N` equal-mass atoms on the circle, every
//! optimal coupling can be taken non-crossing, and the non-crossing
//! bijections are exactly the cyclic shifts of the sorted matching.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{push_forward, quantize, AtomicPart, CircleMap, CircleMeasure, Quantized};
use crate::numeric::NeumaierSum;

/// Default quantization resolution.
pub const DEFAULT_RESOLUTION: usize = 4096;

/// Atom cap for [`brute_force_wasserstein`].
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Equal-mass inputs up to this size are solved by enumerating bijections.
const PERMUTATION_LIMIT: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub cost: f64,
    pub p: f64,
    /// Optimal cyclic offset; `None` for couplings not found by a shift scan.
    pub shift: Option<usize>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize, f64)>>,
}

/// Geodesic distance on `ℝ/ℤ`.
#[inline]
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).abs() % 1.0;
    d.min(1.0 - d)
}

#[inline]
fn cost_term(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("exponent p = {p} must be a finite number ≥ 1")));
    }
    Ok(())
}

/// `Σ_i d(x_i, y_{(i+k) mod N})^p` for one shift.
fn shift_sum(x: &[f64], y: &[f64], k: usize, p: f64) -> f64 {
    let n = x.len();
    let mut s = NeumaierSum::new();
    for (i, &xi) in x.iter().enumerate() {
        let j = if i + k >= n { i + k - n } else { i + k };
        s.add(cost_term(circle_distance(xi, y[j]), p));
    }
    s.value()
}

/// Minimum over cyclic shifts; ties resolve to the smallest shift.
pub fn cyclic_shift_transport(x: &[f64], y: &[f64], p: f64) -> Result<TransportResult> {
    check_p(p)?;
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Invalid(format!(
            "need two non-empty atom lists of equal length, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    // Scan from the lexicographically smaller side so that swapping the
    // arguments sums identical terms in identical order.
    let swapped = x.iter().zip(y).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()) == Some(std::cmp::Ordering::Greater);
    let (x, y) = if swapped { (y, x) } else { (x, y) };
    let sums: Vec<f64> = (0..n).into_par_iter().map(|k| shift_sum(x, y, k, p)).collect();
    let (shift, best) = sums
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc });
    let shift = if swapped { (n - shift) % n } else { shift };
    Ok(TransportResult {
        cost: (best / n as f64).max(0.0).powf(1.0 / p),
        p,
        shift: Some(shift),
        n,
        pairs: None,
    })
}

pub fn wasserstein_quantized(a: &Quantized, b: &Quantized, p: f64) -> Result<TransportResult> {
    cyclic_shift_transport(&a.positions, &b.positions, p)
}

/// `W_p(μ, ν)` of the `N`-point quantizations.
pub fn wasserstein(mu: &CircleMeasure, nu: &CircleMeasure, p: f64, n: usize) -> Result<TransportResult> {
    check_p(p)?;
    if n == 0 {
        return Err(Error::Domain("resolution N must be at least 1".into()));
    }
    let (a, b) = rayon::join(|| quantize(mu, n), || quantize(nu, n));
    wasserstein_quantized(&a?, &b?, p)
}

/// As [`wasserstein`], also listing the coupling `(i, (i+k) mod N, 1/N)`.
pub fn wasserstein_with_pairs(
    mu: &CircleMeasure,
    nu: &CircleMeasure,
    p: f64,
    n: usize,
) -> Result<TransportResult> {
    let mut r = wasserstein(mu, nu, p, n)?;
    let k = r.shift.unwrap_or(0);
    let w = 1.0 / n as f64;
    r.pairs = Some((0..n).map(|i| (i, (i + k) % n, w)).collect());
    Ok(r)
}

/// `(Σ mass · d^p)^{1/p}` of a listed coupling.
pub fn coupling_cost(a: &AtomicPart, b: &AtomicPart, pairs: &[(usize, usize, f64)], p: f64) -> f64 {
    let mut s = NeumaierSum::new();
    for &(i, j, m) in pairs {
        s.add(m * cost_term(circle_distance(a.atoms[i].0, b.atoms[j].0), p));
    }
    s.value().max(0.0).powf(1.0 / p)
}

/// Exact optimal coupling of two small atomic measures.
///
/// Equal-mass inputs of at most nine atoms enumerate all bijections;
/// everything else goes through a min-cost flow on the transport polytope.
pub fn brute_force_wasserstein(a: &AtomicPart, b: &AtomicPart, p: f64) -> Result<TransportResult> {
    check_p(p)?;
    for part in [a, b] {
        if part.len() > BRUTE_FORCE_LIMIT {
            return Err(Error::Capacity {
                len: part.len(),
                limit: BRUTE_FORCE_LIMIT,
            });
        }
    }
    let (ma, mb) = (a.mass(), b.mass());
    if (ma - mb).abs() > 1e-12 {
        return Err(Error::Domain(format!("total masses differ: {ma} vs {mb}")));
    }
    if a.is_empty() {
        return Ok(TransportResult { cost: 0.0, p, shift: None, n: 0, pairs: Some(vec![]) });
    }
    let m0 = a.atoms[0].1;
    let equal = a.len() == b.len()
        && a.atoms.iter().chain(&b.atoms).all(|x| (x.1 - m0).abs() <= 1e-15 * m0.max(1.0));
    let pairs = if equal && a.len() <= PERMUTATION_LIMIT {
        best_bijection(a, b, p)
    } else {
        min_cost_flow(a, b, p)
    };
    let cost = coupling_cost(a, b, &pairs, p);
    Ok(TransportResult {
        cost,
        p,
        shift: None,
        n: a.len().max(b.len()),
        pairs: Some(pairs),
    })
}

fn best_bijection(a: &AtomicPart, b: &AtomicPart, p: f64) -> Vec<(usize, usize, f64)> {
    let n = a.len();
    let c: Vec<Vec<f64>> = a
        .atoms
        .iter()
        .map(|x| b.atoms.iter().map(|y| cost_term(circle_distance(x.0, y.0), p)).collect())
        .collect();
    let total = |perm: &[usize]| -> f64 {
        let mut s = NeumaierSum::new();
        for (i, &j) in perm.iter().enumerate() {
            s.add(c[i][j]);
        }
        s.value()
    };
    // Heap's algorithm, iterative form.
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = total(&perm);
    let mut ctr = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if ctr[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(ctr[i], i);
            }
            let cst = total(&perm);
            if cst < best_cost {
                best_cost = cst;
                best.clone_from(&perm);
            }
            ctr[i] += 1;
            i = 1;
        } else {
            ctr[i] = 0;
            i += 1;
        }
    }
    best.iter()
        .enumerate()
        .map(|(i, &j)| (i, j, a.atoms[i].1))
        .collect()
}

/// Successive shortest paths with Bellman–Ford on the residual graph.
fn min_cost_flow(a: &AtomicPart, b: &AtomicPart, p: f64) -> Vec<(usize, usize, f64)> {
    const EPS: f64 = 1e-15;
    let (na, nb) = (a.len(), b.len());
    let src = na + nb;
    let snk = src + 1;
    let nodes = snk + 1;
    // Edge list: (to, cap, cost); reverse edge at index ^ 1.
    let mut to: Vec<usize> = Vec::new();
    let mut cap: Vec<f64> = Vec::new();
    let mut cost: Vec<f64> = Vec::new();
    let mut adj = vec![Vec::new(); nodes];
    let mut edges: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (i, x) in a.atoms.iter().enumerate() {
        edges.push((src, i, x.1, 0.0));
    }
    for (j, y) in b.atoms.iter().enumerate() {
        edges.push((na + j, snk, y.1, 0.0));
    }
    let mut pair_edges = Vec::new();
    for (i, x) in a.atoms.iter().enumerate() {
        for (j, y) in b.atoms.iter().enumerate() {
            pair_edges.push((i, j, 2 * edges.len()));
            edges.push((i, na + j, f64::INFINITY, cost_term(circle_distance(x.0, y.0), p)));
        }
    }
    for (u, v, c, w) in edges {
        adj[u].push(to.len());
        to.push(v);
        cap.push(c);
        cost.push(w);
        adj[v].push(to.len());
        to.push(u);
        cap.push(0.0);
        cost.push(-w);
    }
    loop {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<usize>> = vec![None; nodes];
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for &e in &adj[u] {
                    if cap[e] > EPS && dist[u] + cost[e] < dist[to[e]] - 1e-18 {
                        dist[to[e]] = dist[u] + cost[e];
                        prev[to[e]] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[snk] == f64::INFINITY {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = snk;
        while let Some(e) = prev[v] {
            push = push.min(cap[e]);
            v = to[e ^ 1];
        }
        if push <= EPS {
            break;
        }
        let mut v = snk;
        while let Some(e) = prev[v] {
            cap[e] -= push;
            cap[e ^ 1] += push;
            v = to[e ^ 1];
        }
    }
    pair_edges
        .into_iter()
        .filter_map(|(i, j, e)| {
            let flow = cap[e ^ 1];
            (flow > EPS).then_some((i, j, flow))
        })
        .collect()
}

/// Outcome of a Bowen-metric separation test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationOutcome {
    pub separated: bool,
    /// Smallest `max_{k≤n} W_p(Φ^k_# μ, Φ^k_# ν)` over the tested pairs.
    pub min_distance: f64,
    /// First pair (in index order) closer than `eps`, with its distance.
    pub witness: Option<(usize, usize, f64)>,
    pub pairs_checked: usize,
}

/// Quantized orbits `Φ^k_# μ`, `k = 0..=n`, for each measure.
pub fn quantized_orbits(
    set: &[CircleMeasure],
    map: &dyn CircleMap,
    n: usize,
    resolution: usize,
) -> Result<Vec<Vec<Quantized>>> {
    set.par_iter()
        .map(|mu| {
            let mut cur = mu.clone();
            let mut out = Vec::with_capacity(n + 1);
            for k in 0..=n {
                if k > 0 {
                    cur = push_forward(&cur, map)?;
                }
                out.push(quantize(&cur, resolution)?);
            }
            Ok(out)
        })
        .collect()
}

/// Bowen distance `max_k W_p` between two quantized orbits.
pub fn bowen_distance(a: &[Quantized], b: &[Quantized], p: f64) -> Result<f64> {
    let mut best = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        best = best.max(wasserstein_quantized(x, y, p)?.cost);
    }
    Ok(best)
}

/// Tests the listed pairs of quantized orbits for `(n, eps)`-separation.
pub fn separation_over_pairs(
    orbits: &[Vec<Quantized>],
    pairs: &[(usize, usize)],
    p: f64,
    eps: f64,
) -> Result<SeparationOutcome> {
    check_p(p)?;
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| bowen_distance(&orbits[i], &orbits[j], p))
        .collect::<Result<_>>()?;
    let witness = pairs
        .iter()
        .zip(&dists)
        .find(|(_, &d)| d < eps)
        .map(|(&(i, j), &d)| (i, j, d));
    Ok(SeparationOutcome {
        separated: witness.is_none(),
        min_distance: dists.iter().copied().fold(f64::INFINITY, f64::min),
        witness,
        pairs_checked: pairs.len(),
    })
}

/// Whether every pair in `set` is `eps`-apart in the Bowen metric `d_n`
/// built from `W_p` at resolution `resolution`.
pub fn bowen_separation_check(
    set: &[CircleMeasure],
    map: &dyn CircleMap,
    n: usize,
    p: f64,
    eps: f64,
    resolution: usize,
) -> Result<SeparationOutcome> {
    check_p(p)?;
    let orbits = quantized_orbits(set, map, n, resolution)?;
    let pairs: Vec<(usize, usize)> = (0..set.len())
        .flat_map(|i| (i + 1..set.len()).map(move |j| (i, j)))
        .collect();
    separation_over_pairs(&orbits, &pairs, p, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::PiecewiseAffineMap;

    fn parts(xs: &[(f64, f64)]) -> AtomicPart {
        AtomicPart::from_raw(xs.iter().copied())
    }

    #[test]
    fn distance_examples() {
        assert_eq!(circle_distance(0.0, 0.5), 0.5);
        assert!((circle_distance(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(circle_distance(0.3, 0.3), 0.0);
    }

    #[test]
    fn antipodal_diracs() {
        let r = wasserstein(&CircleMeasure::dirac(0.0), &CircleMeasure::dirac(0.5), 2.0, 16).unwrap();
        assert!((r.cost - 0.5).abs() < 1e-15);
        assert!(wasserstein(&CircleMeasure::dirac(0.0), &CircleMeasure::dirac(0.5), 0.5, 16).is_err());
    }

    #[test]
    fn brute_force_shift_example() {
        let a = parts(&[(0.0, 0.5), (0.4, 0.5)]);
        let b = parts(&[(0.1, 0.5), (0.5, 0.5)]);
        let r = brute_force_wasserstein(&a, &b, 2.0).unwrap();
        assert!((r.cost - 0.1).abs() < 1e-15);
        let same = brute_force_wasserstein(&parts(&[(0.0, 0.5), (0.5, 0.5)]), &parts(&[(0.0, 0.5), (0.5, 0.5)]), 2.0).unwrap();
        assert_eq!(same.cost, 0.0);
    }

    #[test]
    fn flow_matches_permutations_on_equal_masses() {
        let a = parts(&[(0.05, 0.25), (0.3, 0.25), (0.61, 0.25), (0.9, 0.25)]);
        let b = parts(&[(0.12, 0.25), (0.2, 0.25), (0.55, 0.25), (0.77, 0.25)]);
        for p in [1.0, 2.0, 3.0] {
            let x = best_bijection(&a, &b, p);
            let y = min_cost_flow(&a, &b, p);
            let cx = coupling_cost(&a, &b, &x, p);
            let cy = coupling_cost(&a, &b, &y, p);
            assert!((cx - cy).abs() <= 1e-12 * cx.max(1e-300), "p={p}: {cx} vs {cy}");
        }
    }

    #[test]
    fn unequal_masses_use_flow() {
        let a = parts(&[(0.0, 0.75), (0.5, 0.25)]);
        let b = parts(&[(0.25, 1.0)]);
        let r = brute_force_wasserstein(&a, &b, 1.0).unwrap();
        assert!((r.cost - 0.25).abs() < 1e-15);
        let pairs = r.pairs.unwrap();
        assert!((pairs.iter().map(|q| q.2).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn capacity_limit() {
        let many: Vec<(f64, f64)> = (0..13).map(|i| (i as f64 / 13.0, 1.0 / 13.0)).collect();
        let a = parts(&many);
        assert!(matches!(
            brute_force_wasserstein(&a, &a, 1.0),
            Err(Error::Capacity { len: 13, limit: 12 })
        ));
    }

    #[test]
    fn pairs_reproduce_cost() {
        let mu = CircleMeasure::dirac(0.2);
        let r = wasserstein_with_pairs(&mu, &CircleMeasure::lebesgue(), 2.0, 64).unwrap();
        let pairs = r.pairs.as_ref().unwrap();
        let qa = quantize(&mu, 64).unwrap();
        let qb = quantize(&CircleMeasure::lebesgue(), 64).unwrap();
        let mut s = 0.0;
        for &(i, j, m) in pairs {
            s += m * circle_distance(qa.positions[i], qb.positions[j]).powi(2);
        }
        assert!((s.sqrt() - r.cost).abs() < 1e-10);
    }

    #[test]
    fn separation_of_antipodal_diracs() {
        let doubling = PiecewiseAffineMap::new(vec![(0.0, 1.0, 0.0, 2.0)]).unwrap();
        let set = [CircleMeasure::dirac(0.0), CircleMeasure::dirac(0.5)];
        let out = bowen_separation_check(&set, &doubling, 0, 1.0, 0.4, 16).unwrap();
        assert!(out.separated);
        assert!((out.min_distance - 0.5).abs() < 1e-15);
        let single = bowen_separation_check(&set[..1], &doubling, 3, 1.0, 0.4, 16).unwrap();
        assert!(single.separated && single.pairs_checked == 0);
        // After one doubling both land on 0, so n = 1 still separates but
        // only through the k = 0 term.
        let out = bowen_separation_check(&set, &doubling, 1, 1.0, 0.6, 16).unwrap();
        assert_eq!(out.witness.map(|w| (w.0, w.1)), Some((0, 1)));
    }
}
