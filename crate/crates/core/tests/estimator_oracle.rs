//! OLS against the normal equations, plus lookup-table monotonicity.

use approx::assert_abs_diff_eq;
use gastimate::estimator::{ols, LinearModel, LookupRow, LookupTable};
use gastimate::PriceCategory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `[n Σx; Σx Σx²] [a b]ᵀ = [Σy Σxy]ᵀ` by Cramer's rule.
fn normal_equations(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    ((sy * sxx - sx * sxy) / det, (n * sxy - sx * sy) / det)
}

#[test]
fn ols_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.random_range(3..400);
        let a = rng.random_range(-3.0..3.0);
        let b = rng.random_range(-2.0..2.0);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.7)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a + b * x + rng.random_range(-0.5..0.5)).collect();
        let (ga, gb) = ols(&xs, &ys).unwrap();
        let (ea, eb) = normal_equations(&xs, &ys);
        assert_abs_diff_eq!(ga, ea, epsilon = 1e-9);
        assert_abs_diff_eq!(gb, eb, epsilon = 1e-9);
    }
}

#[test]
fn noiseless_line_is_recovered_exactly() {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 0.75 * x).collect();
    let (a, b) = ols(&xs, &ys).unwrap();
    assert_abs_diff_eq!(a, 1.5, epsilon = 1e-12);
    assert_abs_diff_eq!(b, -0.75, epsilon = 1e-12);
}

#[test]
fn predictions_never_increase_with_price_when_slope_is_not_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let model = LinearModel::from_coefficients(rng.random_range(-2.0..6.0), -rng.random_range(0.0..3.0));
        // feature is non-decreasing in price
        let mut feature = 0.0;
        let rows: Vec<LookupRow> = (1..=rng.random_range(2..80))
            .map(|p| {
                feature = (feature + rng.random_range(0.0..5.0f64)).min(100.0);
                LookupRow {
                    gas_price_gwei: p as f64,
                    category: PriceCategory::Regular,
                    predicted_minutes: model.predict(feature),
                }
            })
            .collect();
        assert!(LookupTable::new(1, rows).monotone_ok);
    }
}
