//! Minimum penalized Hellinger distance and binned maximum-likelihood fits.

use crate::divergence::{kl_modified, penalized_hellinger_raw, PenaltyWeight};
use crate::error::{Error, Result};
use crate::model::{BinnedSample, DiscreteModel, ProbVector};
use crate::optimize::minimize_box;

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    /// Divergence at `theta_hat`.
    pub objective: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn check_cells(model: &DiscreteModel, cells: usize) -> Result<()> {
    if model.cells() != cells {
        return Err(Error::InvalidInput(format!(
            "sample has {cells} cells but model '{}' has {}",
            model.name(),
            model.cells()
        )));
    }
    Ok(())
}

/// Minimizes `PHD^h(p̂, P_θ)` over the model's parameter box, starting from
/// frequencies rather than counts (used for population-level fits).
pub fn fit_phd(model: &DiscreteModel, phat: &ProbVector, h: PenaltyWeight) -> Result<FitResult> {
    check_cells(model, phat.len())?;
    let freq = phat.as_slice();
    let min = minimize_box(
        |theta| match model.cell_prob(theta) {
            Ok(p) => penalized_hellinger_raw(freq, p.as_slice(), h.value()),
            Err(_) => f64::NAN,
        },
        model.bounds(),
    )?;
    Ok(FitResult { theta_hat: min.x, objective: min.value, evaluations: min.evaluations, converged: min.converged })
}

/// Minimum penalized Hellinger distance estimate from binned counts.
pub fn minimize_phd(model: &DiscreteModel, sample: &BinnedSample, h: PenaltyWeight) -> Result<FitResult> {
    fit_phd(model, &sample.frequencies(), h)
}

/// Minimizes `KL_m(P_θ, p̂)`, i.e. maximizes `Σ p̂_j log p_j(θ)`.
pub fn fit_mle(model: &DiscreteModel, phat: &ProbVector) -> Result<FitResult> {
    check_cells(model, phat.len())?;
    let min = minimize_box(
        |theta| match model.cell_prob(theta) {
            Ok(p) => kl_modified(&p, phat).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        },
        model.bounds(),
    );
    let min = match min {
        Err(Error::FitFailed(_)) => None,
        other => Some(other?),
    };
    let Some(min) = min.filter(|m| m.value.is_finite()) else {
        return Err(Error::FitFailed(format!(
            "model '{}' assigns zero probability to an observed cell for every parameter",
            model.name()
        )));
    };
    Ok(FitResult {
        theta_hat: min.x,
        objective: min.value.max(0.0),
        evaluations: min.evaluations,
        converged: min.converged,
    })
}

/// Grouped-data multinomial maximum likelihood estimate.
pub fn mle_binned(model: &DiscreteModel, sample: &BinnedSample) -> Result<FitResult> {
    fit_mle(model, &sample.frequencies())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::penalized_hellinger;
    use crate::model::{default_partition, poisson_cell_probs, CellPartition};

    fn half() -> PenaltyWeight {
        PenaltyWeight::new(0.5).unwrap()
    }

    #[test]
    fn perfect_fit_on_grid_point() {
        let model = DiscreteModel::poisson(default_partition());
        let (lo, hi) = model.bounds()[0];
        let theta_star = lo + (hi - lo) / 31.0 * 3.0;
        let phat = poisson_cell_probs(theta_star, model.partition()).unwrap();
        let fit = fit_phd(&model, &phat, half()).unwrap();
        assert_eq!(fit.theta_hat, vec![theta_star]);
        assert_eq!(fit.objective, 0.0);
    }

    #[test]
    fn perfect_fit_off_grid() {
        let model = DiscreteModel::poisson(default_partition());
        let phat = poisson_cell_probs(4.0, model.partition()).unwrap();
        let fit = fit_phd(&model, &phat, half()).unwrap();
        assert!((fit.theta_hat[0] - 4.0).abs() < 1e-6);
        assert!(fit.objective < 1e-12);
        let mle = fit_mle(&model, &phat).unwrap();
        assert!((mle.theta_hat[0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn objective_matches_distance_at_estimate() {
        let model = DiscreteModel::geometric(default_partition());
        let sample = BinnedSample::new(vec![0, 5, 4, 3, 3, 1, 0, 4]).unwrap();
        let fit = minimize_phd(&model, &sample, half()).unwrap();
        let at = penalized_hellinger(&sample.frequencies(), &model.cell_prob(&fit.theta_hat).unwrap(), half()).unwrap();
        assert_eq!(fit.objective, at);
        assert!(fit.converged);
    }

    #[test]
    fn geometric_mle_undefined_with_zeros() {
        let model = DiscreteModel::geometric(default_partition());
        let sample = BinnedSample::new(vec![2, 5, 4, 3, 3, 1, 0, 4]).unwrap();
        assert!(matches!(mle_binned(&model, &sample), Err(Error::FitFailed(_))));
    }

    #[test]
    fn cell_count_mismatch() {
        let model = DiscreteModel::poisson(CellPartition::parse("1,2,3").unwrap());
        let sample = BinnedSample::new(vec![1, 2, 3, 4, 5]).unwrap();
        assert!(matches!(minimize_phd(&model, &sample, half()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn vertex_sample_is_fitted() {
        // every observation in [3, 4): the penalty keeps the objective informative
        let model = DiscreteModel::poisson(default_partition());
        let sample = BinnedSample::new(vec![0, 0, 0, 12, 0, 0, 0, 0]).unwrap();
        let fit = minimize_phd(&model, &sample, half()).unwrap();
        assert!(fit.theta_hat[0] > 2.0 && fit.theta_hat[0] < 5.0, "{:?}", fit.theta_hat);
    }

    #[test]
    fn zero_inflated_fit() {
        let model = DiscreteModel::by_name("zip", default_partition()).unwrap();
        let phat = model.cell_prob(&[0.3, 4.0]).unwrap();
        let fit = fit_phd(&model, &phat, half()).unwrap();
        assert!((fit.theta_hat[0] - 0.3).abs() < 1e-5, "{:?}", fit.theta_hat);
        assert!((fit.theta_hat[1] - 4.0).abs() < 1e-4, "{:?}", fit.theta_hat);
        assert!(fit.converged);
    }
}
