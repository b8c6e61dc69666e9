use mdiqkd_core::finitekey::chernoff::chernoff_interval;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

#[test]
fn relative_width_scales_as_inverse_sqrt() {
    let xi = 1e-10;
    let pts: Vec<(f64, f64)> = (3..=9)
        .map(|e| {
            let o = 10f64.powi(e);
            let iv = chernoff_interval(o, xi).unwrap();
            (o.ln(), ((iv.upper - iv.lower) / o).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((slope + 0.5).abs() <= 0.05, "slope {slope}");
}

#[test]
fn coverage_at_fixed_mean() {
    let lambda = 1e5;
    let xi = 1e-3;
    let poisson = Poisson::new(lambda).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20261016);
    let trials = 10_000;
    let covered = (0..trials)
        .filter(|_| {
            let o: f64 = poisson.sample(&mut rng);
            let iv = chernoff_interval(o, xi).unwrap();
            iv.lower <= lambda && lambda <= iv.upper
        })
        .count();
    let rate = covered as f64 / trials as f64;
    assert!(rate >= 0.995, "coverage {rate}");
}
