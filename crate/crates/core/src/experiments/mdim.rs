use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ExpandingMapSpec;
use crate::error::{Error, Result};
use crate::measures::{push_forward, AtomicPart, CircleMeasure};
use crate::numeric::compensated_sum;
use crate::transport::{quantized_orbits, separation_over_pairs};

/// Largest level kept in full; bigger levels are subsampled.
pub const LEVEL_CAP: usize = 10_000;

/// Largest number of pairs tested for separation.
pub const PAIR_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSetReport {
    pub d: usize,
    pub k: usize,
    pub alpha: usize,
    pub p: f64,
    pub n: usize,
    /// `d^{-1} 2^{-k(α/p+1) − 1/p}`.
    pub eps: f64,
    pub set_size: usize,
    /// `None` for a singleton.
    pub min_pairwise_bowen: Option<f64>,
    pub bound_size: usize,
    /// `|S_0|, …, |S_n|`.
    pub level_sizes: Vec<usize>,
    /// Distinct children of the first element of each level.
    pub branching: Vec<usize>,
    /// Admissible tuples `ℓ` per element.
    pub tuples: usize,
    pub in_a_k: bool,
    pub preimages_exact: bool,
    pub subsampled: bool,
    pub pairs_checked: usize,
    pub pairs_total: usize,
    pub resolution: usize,
    pub seed: u64,
}

impl super::report::Check for SeparatedSetReport {
    fn passes(&self) -> bool {
        let separated = self
            .min_pairwise_bowen
            .is_none_or(|m| m >= self.eps * (1.0 - 1e-12));
        separated
            && self.set_size >= self.bound_size
            && self.in_a_k
            && self.preimages_exact
            && self.branching.iter().all(|&b| b == self.tuples)
    }
}

/// `d^{-1} 2^{-k(α/p+1) − 1/p}`.
pub fn separation_scale(d: usize, k: usize, alpha: usize, p: f64) -> f64 {
    let kf = k as f64;
    (2f64).powf(-kf * (alpha as f64 / p + 1.0) - 1.0 / p) / d as f64
}

/// Integer tuples with `ℓ_1 ≥ 2^{αk−1}` and `Σ ℓ_i = 2^{αk}`.
pub fn admissible_tuples(d: usize, k: usize, alpha: usize) -> Vec<Vec<u64>> {
    let total = 1u64 << (alpha * k);
    let mut out = Vec::new();
    fn fill(rest: u64, slots: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if slots == 1 {
            cur.push(rest);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for x in 0..=rest {
            cur.push(x);
            fill(rest - x, slots - 1, cur, out);
            cur.pop();
        }
    }
    for l1 in (total / 2)..=total {
        let mut cur = vec![l1];
        if d == 1 {
            if l1 == total {
                out.push(cur);
            }
            continue;
        }
        fill(total - l1, d - 1, &mut cur, &mut out);
    }
    out
}

/// Whether `μ((1−2^{−k}, 1)) = 0` and `μ([0, 1/d]) ≥ 1/2`.
pub fn in_a_k(mu: &AtomicPart, d: usize, k: usize) -> bool {
    let top = 1.0 - (2f64).powi(-(k as i32));
    let tail = compensated_sum(mu.atoms.iter().filter(|a| a.0 > top).map(|a| a.1));
    let head = compensated_sum(mu.atoms.iter().filter(|a| a.0 <= 1.0 / d as f64).map(|a| a.1));
    tail == 0.0 && head >= 0.5
}

/// `μ_ℓ = e_{1#}(ℓ_1 2^{−αk} μ_h + μ_t) + Σ_{i>1} e_{i#}(ℓ_i 2^{−αk} μ_h)`.
pub fn antecedent(mu: &AtomicPart, ell: &[u64], d: usize, k: usize, alpha: usize) -> AtomicPart {
    let cut = 1.0 - d as f64 * (2f64).powi(-(k as i32));
    let scale = (2f64).powi(-((alpha * k) as i32));
    let df = d as f64;
    let mut atoms = Vec::new();
    for &(x, m) in &mu.atoms {
        if x <= cut {
            for (i, &l) in ell.iter().enumerate() {
                if l > 0 {
                    atoms.push(((x + i as f64) / df, m * l as f64 * scale));
                }
            }
        } else {
            atoms.push((x / df, m));
        }
    }
    AtomicPart::from_raw(atoms)
}

fn key(a: &AtomicPart) -> Vec<(u64, u64)> {
    a.atoms.iter().map(|&(x, m)| (x.to_bits(), m.to_bits())).collect()
}

/// Builds `S_0 = {δ_0}, …, S_n` and tests `(n, ε)`-separation in the Bowen
/// metric of `W_p`.
pub fn mdim_separated_sets(d: usize, k: usize, alpha: usize, p: f64, n: usize, seed: u64) -> Result<SeparatedSetReport> {
    if !(2..=3).contains(&d) {
        return Err(Error::Domain(format!("degree {d} outside 2..=3")));
    }
    if k == 0 || k > 4 || alpha == 0 || alpha > 2 || n > 2 {
        return Err(Error::Domain(format!(
            "parameters k = {k}, alpha = {alpha}, n = {n} exceed k ≤ 4, alpha ≤ 2, n ≤ 2"
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p = {p} must be at least 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tuples = admissible_tuples(d, k, alpha);
    let map = ExpandingMapSpec::model(d)?;
    let mut level = vec![AtomicPart::from_raw([(0.0, 1.0)])];
    let mut level_sizes = vec![1];
    let mut branching = Vec::new();
    let mut bound_size = 1usize;
    let mut subsampled = false;
    let mut in_ak = in_a_k(&level[0], d, k);
    let mut exact = true;
    for _ in 0..n {
        let first: HashSet<_> = tuples.iter().map(|l| key(&antecedent(&level[0], l, d, k, alpha))).collect();
        branching.push(first.len());
        let total = level.len() * tuples.len();
        bound_size = total.min(LEVEL_CAP);
        let picks: Vec<usize> = if total > LEVEL_CAP {
            subsampled = true;
            let mut v = sample(&mut rng, total, LEVEL_CAP).into_vec();
            v.sort_unstable();
            v
        } else {
            (0..total).collect()
        };
        let mut next = Vec::with_capacity(picks.len());
        let mut seen = HashSet::new();
        for idx in picks {
            let parent = &level[idx / tuples.len()];
            let child = antecedent(parent, &tuples[idx % tuples.len()], d, k, alpha);
            in_ak &= in_a_k(&child, d, k);
            let image = push_forward(&CircleMeasure::from_atoms(child.clone()), &map)?;
            exact &= image.density.mass() == 0.0 && key(&image.atomic) == key(parent);
            if seen.insert(key(&child)) {
                next.push(child);
            }
        }
        level = next;
        level_sizes.push(level.len());
    }

    let size = level.len();
    let pairs_total = size * size.saturating_sub(1) / 2;
    let pairs: Vec<(usize, usize)> = if pairs_total <= PAIR_CAP {
        (0..size).flat_map(|i| (i + 1..size).map(move |j| (i, j))).collect()
    } else {
        let mut set = HashSet::new();
        while set.len() < PAIR_CAP {
            let i = rng.random_range(0..size);
            let j = rng.random_range(0..size);
            if i != j {
                set.insert((i.min(j), i.max(j)));
            }
        }
        let mut v: Vec<_> = set.into_iter().collect();
        v.sort_unstable();
        v
    };
    let resolution = (1usize << (alpha * k * n)).max(64);
    let eps = separation_scale(d, k, alpha, p);
    let (min_pairwise_bowen, pairs_checked) = if pairs.is_empty() {
        (None, 0)
    } else {
        let measures: Vec<CircleMeasure> = level.iter().cloned().map(CircleMeasure::from_atoms).collect();
        let orbits = quantized_orbits(&measures, &map, n.saturating_sub(1), resolution)?;
        let out = separation_over_pairs(&orbits, &pairs, p, eps)?;
        (Some(out.min_distance), out.pairs_checked)
    };
    Ok(SeparatedSetReport {
        d,
        k,
        alpha,
        p,
        n,
        eps,
        set_size: size,
        min_pairwise_bowen,
        bound_size,
        level_sizes,
        branching,
        tuples: tuples.len(),
        in_a_k: in_ak,
        preimages_exact: exact,
        subsampled,
        pairs_checked,
        pairs_total,
        resolution,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuple_counts() {
        assert_eq!(admissible_tuples(2, 2, 1).len(), 3);
        assert_eq!(admissible_tuples(2, 3, 2).len(), 33);
        for t in admissible_tuples(3, 2, 1) {
            assert_eq!(t.iter().sum::<u64>(), 4);
            assert!(t[0] >= 2);
        }
    }

    #[test]
    fn scale_formula() {
        assert_eq!(separation_scale(2, 3, 1, 1.0), 2f64.powi(-8));
    }

    #[test]
    fn antecedents_of_dirac() {
        let delta = AtomicPart::from_raw([(0.0, 1.0)]);
        let mu = antecedent(&delta, &[3, 1], 2, 2, 1);
        assert_eq!(mu.atoms, vec![(0.0, 0.75), (0.5, 0.25)]);
        assert!(in_a_k(&mu, 2, 2));
    }

    #[test]
    fn singleton_level() {
        let r = mdim_separated_sets(2, 2, 1, 2.0, 0, 0).unwrap();
        assert_eq!(r.set_size, 1);
        assert!(r.min_pairwise_bowen.is_none());
        assert!(super::super::report::Check::passes(&r));
    }
}
