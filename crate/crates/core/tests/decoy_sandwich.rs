use mdiqkd_core::decoy::{bounds_from_pair_gains, IntensitySet, ProtocolParams, BOUND_PAIRS};
use mdiqkd_core::decoy::Intensity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: usize = 40;

fn poisson(k: usize, x: f64) -> f64 {
    // independent of the crate's weights: log-space factorial
    let lf: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    (-x + k as f64 * x.ln() - lf).exp()
}

fn mixture(y: &[[f64; K]; K], a: f64, b: f64) -> f64 {
    let mut s = 0.0;
    for k in 0..K {
        for j in 0..K {
            let wa = if a == 0.0 { (k == 0) as u8 as f64 } else { poisson(k, a) };
            let wb = if b == 0.0 { (j == 0) as u8 as f64 } else { poisson(j, b) };
            s += wa * wb * y[k][j];
        }
    }
    s
}

fn random_set(rng: &mut ChaCha8Rng) -> IntensitySet {
    let omega = rng.random_range(0.01..0.15);
    let nu = omega + rng.random_range(0.05..0.4);
    let mu = nu + rng.random_range(0.02..0.5);
    IntensitySet {
        mu,
        nu,
        omega,
        p_mu: 0.4,
        p_nu: 0.2,
        p_omega: 0.3,
        p_code_given_nu: 0.5,
        p_code_given_omega: 0.5,
    }
}

#[test]
fn asymptotic_bounds_bracket_single_photon_yield() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut held = 0;
    let trials = 200;
    for _ in 0..trials {
        let set = random_set(&mut rng);
        let params = ProtocolParams::symmetric(set);
        // arbitrary yields in [0, 1]; dark-count-like vacuum rows
        let mut y = [[0.0; K]; K];
        for (k, row) in y.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if k == 0 || j == 0 {
                    rng.random_range(0.0..1e-3)
                } else {
                    rng.random_range(0.0..1.0)
                };
            }
        }
        let value = |i: Intensity| match i {
            Intensity::Mu => set.mu,
            Intensity::Nu => set.nu,
            Intensity::Omega => set.omega,
            Intensity::Vacuum => 0.0,
        };
        let gains: [f64; 7] = core::array::from_fn(|i| {
            let (l, r) = BOUND_PAIRS[i];
            mixture(&y, value(l), value(r))
        });
        let b = bounds_from_pair_gains(&gains, &params).unwrap();
        let truth = y[1][1];
        if b.lower <= truth * (1.0 + 1e-9) && truth <= b.upper * (1.0 + 1e-9) {
            held += 1;
        } else {
            eprintln!("violated: L={} Y11={} U={}", b.lower, truth, b.upper);
        }
    }
    assert_eq!(held, trials);
}
