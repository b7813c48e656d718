use circle_ot::fourier::FourierField;
use circle_ot::measures::{exp_map, quantize, AtomicPart, CircleMeasure, Quantized, StepDensity, TangentField};
use circle_ot::transport::{brute_force_wasserstein, circle_distance, wasserstein, wasserstein_quantized};
use proptest::prelude::*;

fn equal_mass(xs: &[f64]) -> CircleMeasure {
    let w = 1.0 / xs.len() as f64;
    CircleMeasure::from_atoms(AtomicPart::from_raw(xs.iter().map(|&x| (x, w))))
}

fn atom_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=8).prop_flat_map(|n| (prop::collection::vec(0.0..1.0f64, n), prop::collection::vec(0.0..1.0f64, n)))
}

fn step_density() -> impl Strategy<Value = CircleMeasure> {
    prop::collection::vec(0.05..2.0f64, 1..12).prop_map(|v| {
        let total: f64 = v.iter().sum::<f64>() / v.len() as f64;
        CircleMeasure::from_density(StepDensity::from_cell_values(v.iter().map(|x| x / total).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_scan_matches_assignment((xs, ys) in atom_pair(), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let (mu, nu) = (equal_mass(&xs), equal_mass(&ys));
        let fast = wasserstein(&mu, &nu, p, xs.len()).unwrap().cost;
        let exact = brute_force_wasserstein(&mu.atomic, &nu.atomic, p).unwrap().cost;
        prop_assert!((fast - exact).abs() <= 1e-9 * exact.max(1e-300), "{fast} vs {exact}");
    }

    #[test]
    fn metric_axioms(a in step_density(), b in step_density(), c in step_density(), p in 1.0..3.0f64) {
        let n = 512;
        let (qa, qb, qc) = (quantize(&a, n).unwrap(), quantize(&b, n).unwrap(), quantize(&c, n).unwrap());
        let ab = wasserstein_quantized(&qa, &qb, p).unwrap().cost;
        let ba = wasserstein_quantized(&qb, &qa, p).unwrap().cost;
        let bc = wasserstein_quantized(&qb, &qc, p).unwrap().cost;
        let ac = wasserstein_quantized(&qa, &qc, p).unwrap().cost;
        prop_assert_eq!(ab, ba);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert_eq!(wasserstein_quantized(&qa, &qa, p).unwrap().cost, 0.0);
    }

    #[test]
    fn arc_supported_measures_keep_cyclic_order(start in 0.0..1.0f64, len in 0.01..0.45f64, n in 2usize..8, seed in 0u64..1000) {
        let xs: Vec<f64> = (0..n).map(|i| (start + len * ((i as f64 * 0.37 + seed as f64 * 0.11).fract())) % 1.0).collect();
        let ys: Vec<f64> = (0..n).map(|i| (start + len * ((i as f64 * 0.71 + seed as f64 * 0.23).fract())) % 1.0).collect();
        let (mu, nu) = (equal_mass(&xs), equal_mass(&ys));
        let r = wasserstein(&mu, &nu, 2.0, n).unwrap();
        // Unwrap positions onto the arc and pair them in sorted order.
        let unwrap = |v: &[f64]| { let mut u: Vec<f64> = v.iter().map(|&x| (x - start).rem_euclid(1.0)).collect(); u.sort_by(f64::total_cmp); u };
        let (ux, uy) = (unwrap(&xs), unwrap(&ys));
        let monotone = (ux.iter().zip(&uy).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64).sqrt();
        prop_assert!((r.cost - monotone).abs() <= 1e-12, "{} vs {}", r.cost, monotone);
    }
}

#[test]
fn quantization_converges_at_first_order() {
    let mu = CircleMeasure::from_density(StepDensity::from_cell_values(vec![0.5, 1.5, 1.0, 1.0]));
    // Doubling every atom of the coarse quantization keeps the measure and matches lengths.
    let err = |n: usize| {
        let coarse = quantize(&mu, n).unwrap();
        let doubled = Quantized { positions: coarse.positions.iter().flat_map(|&x| [x, x]).collect() };
        wasserstein_quantized(&doubled, &quantize(&mu, 2 * n).unwrap(), 1.0).unwrap().cost
    };
    let (e1, e2) = (err(256), err(2048));
    assert!(e1 > 0.0);
    assert!(e2 <= e1 / 8.0 * 1.5, "{e1} -> {e2}");
}

#[test]
fn first_order_metric_on_pairs_of_fields() {
    let v = TangentField::from_fourier(FourierField::cos_mode(1), 4096);
    let w = TangentField::from_fourier(FourierField::sin_mode(2), 4096);
    let expected = (0.5f64 + 0.5).sqrt();
    let lam = CircleMeasure::lebesgue();
    // Mass t crosses the origin, so t N integral keeps the quantile grids aligned.
    let errs: Vec<f64> = [(1e-1, 4000), (1e-2, 4000), (1e-3, 4000), (1e-4, 50_000)]
        .iter()
        .map(|&(t, n)| {
            let d = wasserstein(&exp_map(&lam, &v, t).unwrap(), &exp_map(&lam, &w, t).unwrap(), 2.0, n).unwrap().cost;
            (d / t - expected).abs()
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[0] && errs[3] < errs[0], "{errs:?}");
    assert!(errs.iter().skip(1).all(|&e| e < 1e-2), "{errs:?}");
}

#[test]
fn antipodal_distance_is_half() {
    let d = wasserstein(&CircleMeasure::dirac(0.0), &CircleMeasure::dirac(0.5), 2.0, 64).unwrap().cost;
    assert!((d - 0.5).abs() < 1e-15);
    assert_eq!(circle_distance(0.9, 0.1), circle_distance(0.1, 0.9));
}
