use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phdsel::divergence::PenaltyWeight;
use phdsel::inference::{gof_df, gof_test, power_approx, required_sample_size, sample_size_root};
use phdsel::model::{default_partition, sample_mixture, BinnedSample, DiscreteModel, MixtureDGP};
use phdsel::special::chi_square_quantile;
use phdsel::Error;

#[test]
fn power_is_monotone() {
    let q = chi_square_quantile(0.95, 6.0).unwrap();
    let d = 0.03;
    let start = (q / (2.0 * d)).ceil() as u64;
    let mut prev = 0.0;
    for n in start..start + 10_000 {
        let b = power_approx(d, 0.4, n, 0.05, 6).unwrap();
        assert!(b >= prev, "n = {n}");
        prev = b;
    }
    assert!(prev > 0.999);
    let mut prev = 0.0;
    for i in 0..200 {
        let b = power_approx(i as f64 * 1e-3, 0.4, 500, 0.05, 6).unwrap();
        assert!(b >= prev);
        prev = b;
    }
    // with no divergence the argument shrinks to 0+, so power creeps up to 1/2
    let small = power_approx(0.0, 0.4, 100, 0.05, 6).unwrap();
    let large = power_approx(0.0, 0.4, 1_000_000, 0.05, 6).unwrap();
    assert!(small < large && large < 0.5 && large > 0.49);
}

#[test]
fn sample_size_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let d = rng.random_range(0.005..0.3);
        let om = rng.random_range(0.01..2.0);
        let beta = rng.random_range(0.05..0.99);
        let n0 = required_sample_size(d, om, 0.05, beta, 6).unwrap();
        assert!(power_approx(d, om, n0, 0.05, 6).unwrap() >= beta);
        let n_star = sample_size_root(d, om, 0.05, beta, 6).unwrap();
        assert!((n_star.floor() as u64) + 1 == n0);
        if n_star >= 1.0 {
            assert!(power_approx(d, om, n_star.floor() as u64, 0.05, 6).unwrap() <= beta + 1e-9);
        }
    }
}

#[test]
fn sample_size_errors() {
    assert!(matches!(required_sample_size(0.1, 0.0, 0.05, 0.8, 6), Err(Error::DegenerateVariance { .. })));
    assert!(matches!(required_sample_size(0.1, 0.5, 0.05, 1.0, 6), Err(Error::InvalidInput(_))));
    assert!(matches!(power_approx(0.1, 0.5, 0, 0.05, 6), Err(Error::InvalidInput(_))));
}

#[test]
fn gof_degrees_of_freedom() {
    let part = default_partition();
    assert_eq!(gof_df(&DiscreteModel::poisson(part.clone())).unwrap(), 6);
    assert_eq!(gof_df(&DiscreteModel::by_name("zip", part).unwrap()).unwrap(), 5);
    let sample = BinnedSample::new(vec![5, 5, 5, 5, 5, 5, 5, 5]).unwrap();
    let model = DiscreteModel::poisson(default_partition());
    assert!(gof_test(&sample, &model, PenaltyWeight::ordinary(), 0.0).is_err());
    let r = gof_test(&sample, &model, PenaltyWeight::ordinary(), 0.05).unwrap();
    assert_eq!(r.reject, r.statistic > r.critical);
    assert!((r.critical - 12.5916).abs() < 1e-4);
}

#[test]
fn gof_rejects_wrong_family_at_large_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let part = default_partition();
    let draws = sample_mixture(&MixtureDGP::new(0.0).unwrap(), 2000, &mut rng).unwrap();
    let mut counts = vec![0u64; 8];
    for x in draws {
        counts[part.cell_of(x as f64).unwrap()] += 1;
    }
    let sample = BinnedSample::new(counts).unwrap();
    let r = gof_test(&sample, &DiscreteModel::poisson(part), PenaltyWeight::new(0.5).unwrap(), 0.05).unwrap();
    assert!(r.reject);
    assert!(r.p_value < 1e-6);
}
