use circle_ot::dynamics::{eval_map, inverse_branches, invariant_density, iterate_pushforward, ExpandingMapSpec};
use circle_ot::numeric::grid_mean;
use circle_ot::transport::wasserstein;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn configured_maps() -> Vec<ExpandingMapSpec> {
    [(2, 0.0), (3, 0.0), (5, 0.0), (2, 0.1), (2, 0.2), (2, 0.3), (3, 0.5), (2, -0.3)]
        .iter()
        .map(|&(d, e)| ExpandingMapSpec::new(d, e).unwrap())
        .collect()
}

fn circle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 1.0;
    d.min(1.0 - d)
}

#[test]
fn branches_invert_the_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for map in configured_maps() {
        for _ in 0..1000 {
            let x: f64 = rng.random();
            let ys = inverse_branches(&map, x).unwrap();
            assert_eq!(ys.len(), map.degree());
            for y in ys {
                assert!(circle_gap(eval_map(&map, y), x) <= 1e-12, "{map:?} x = {x}");
            }
        }
    }
}

#[test]
fn transfer_of_one_has_unit_integral() {
    let n = 4096;
    for map in configured_maps() {
        let l1: Vec<f64> = (0..n)
            .map(|j| {
                inverse_branches(&map, j as f64 / n as f64)
                    .unwrap()
                    .iter()
                    .map(|&y| 1.0 / map.derivative(y))
                    .sum()
            })
            .collect();
        assert!((grid_mean(&l1) - 1.0).abs() <= 1e-10, "{map:?}");
    }
}

#[test]
fn density_iteration_contracts() {
    for eps in [0.1, 0.3] {
        let map = ExpandingMapSpec::new(2, eps).unwrap();
        let rho = invariant_density(&map, 4096, 1e-12, 500).unwrap();
        assert!(rho.residual_history.windows(2).all(|w| w[1] <= w[0] + 1e-14), "{:?}", rho.residual_history);
    }
}

#[test]
fn invariant_measure_stays_put() {
    let map = ExpandingMapSpec::new(2, 0.3).unwrap();
    let rho = invariant_density(&map, 4096, 1e-12, 500).unwrap();
    let base = rho.measure();
    for k in [1, 3, 10] {
        let d = wasserstein(&iterate_pushforward(&base, &map, k).unwrap(), &base, 2.0, 4096).unwrap().cost;
        assert!(d <= k as f64 * 1e-4, "k = {k}: {d}");
    }
}
