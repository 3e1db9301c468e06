//! Goodness-of-fit test, power and sample-size approximations, and the
//! penalized Hellinger model-selection test.

use std::fmt;

use serde::Serialize;

use crate::asymptotics::lambda_star_hat;
use crate::divergence::PenaltyWeight;
use crate::error::{Error, Result};
use crate::estimate::{minimize_phd, FitResult};
use crate::model::{BinnedSample, DiscreteModel};
use crate::special::{chi_square_quantile, chi_square_sf, normal_cdf, normal_quantile};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofReport {
    pub statistic: f64,
    pub df: usize,
    pub critical: f64,
    pub p_value: f64,
    pub reject: bool,
    pub theta_hat: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    FavorFirst,
    FavorSecond,
    Indecisive,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::FavorFirst => "favor_first",
            Decision::FavorSecond => "favor_second",
            Decision::Indecisive => "indecisive",
        }
    }

    /// Three-way rule with a closed indecision region `|hi| ≤ z`.
    pub fn from_statistic(hi: f64, z: f64) -> Self {
        if hi < -z {
            Decision::FavorFirst
        } else if hi > z {
            Decision::FavorSecond
        } else {
            Decision::Indecisive
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// `NaN` when the variance estimate is degenerate.
    pub hi: f64,
    pub gamma_hat: f64,
    pub d1: f64,
    pub d2: f64,
    pub z: f64,
    pub decision: Decision,
    pub degenerate: bool,
    pub fit1: FitResult,
    pub fit2: FitResult,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Degrees of freedom `m - k - 1` of the limiting chi-square law.
pub fn gof_df(model: &DiscreteModel) -> Result<usize> {
    let (m, k) = (model.cells(), model.dim());
    if m < k + 2 {
        return Err(Error::InvalidInput(format!("{m} cells leave no degrees of freedom for {k} parameters")));
    }
    Ok(m - k - 1)
}

/// Rejects the model when `2n·PHD^h(p̂, P_θ̂)` exceeds the `1 - α` chi-square
/// quantile.
pub fn gof_test(sample: &BinnedSample, model: &DiscreteModel, h: PenaltyWeight, alpha: f64) -> Result<GofReport> {
    check_alpha(alpha)?;
    let df = gof_df(model)?;
    let fit = minimize_phd(model, sample, h)?;
    let statistic = 2.0 * sample.n() as f64 * fit.objective;
    let critical = chi_square_quantile(1.0 - alpha, df as f64)?;
    Ok(GofReport {
        statistic,
        df,
        critical,
        p_value: chi_square_sf(statistic, df as f64),
        reject: statistic > critical,
        theta_hat: fit.theta_hat,
    })
}

/// Normal approximation to the power of the goodness-of-fit test when the
/// true divergence from the model is `d`.
pub fn power_approx(d: f64, omega_sq: f64, n: u64, alpha: f64, df: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if !(omega_sq > 0.0) || !omega_sq.is_finite() {
        return Err(Error::DegenerateVariance { variance: omega_sq });
    }
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    if !(d >= 0.0) || !d.is_finite() {
        return Err(Error::InvalidInput(format!("divergence must be finite and nonnegative, got {d}")));
    }
    let q = chi_square_quantile(1.0 - alpha, df as f64)?;
    let n = n as f64;
    let arg = (q - 2.0 * n * d) / (2.0 * n.sqrt() * omega_sq.sqrt());
    Ok(1.0 - normal_cdf(arg))
}

/// Real solution `n*` of `power_approx(d, Ω², n) = β*`.
pub fn sample_size_root(d: f64, omega_sq: f64, alpha: f64, beta_star: f64, df: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidInput(format!("divergence must be positive to separate the hypotheses, got {d}")));
    }
    if !(omega_sq > 0.0) || !omega_sq.is_finite() {
        return Err(Error::DegenerateVariance { variance: omega_sq });
    }
    if !(beta_star > 0.0 && beta_star < 1.0) {
        return Err(Error::InvalidInput(format!("target power must lie in (0, 1), got {beta_star}")));
    }
    let q = chi_square_quantile(1.0 - alpha, df as f64)?;
    let z = normal_quantile(1.0 - beta_star)?;
    let a = omega_sq * z * z;
    let b = q * d;
    // the root with √n on the correct side of the vertex; its sign flips with z
    let disc = (a * (a + 2.0 * b)).sqrt();
    let root = if z > 0.0 { (a + b) - disc } else { (a + b) + disc };
    Ok(root / (2.0 * d * d))
}

/// Smallest integer sample size `floor(n*) + 1` reaching power `β*`.
pub fn required_sample_size(d: f64, omega_sq: f64, alpha: f64, beta_star: f64, df: usize) -> Result<u64> {
    let n_star = sample_size_root(d, omega_sq, alpha, beta_star, df)?;
    if !(n_star < u64::MAX as f64) {
        return Err(Error::InvalidInput(format!("required sample size overflows ({n_star})")));
    }
    Ok(n_star.floor() as u64 + 1)
}

/// Fits both models by minimum penalized Hellinger distance and studentizes
/// the difference of the fitted distances. Negative `hi` favors `model1`.
pub fn model_select(
    sample: &BinnedSample,
    model1: &DiscreteModel,
    model2: &DiscreteModel,
    h: PenaltyWeight,
    alpha: f64,
) -> Result<SelectionReport> {
    check_alpha(alpha)?;
    if model1.cells() != model2.cells() {
        return Err(Error::InvalidInput("both models must use the same partition".into()));
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    let fit1 = minimize_phd(model1, sample, h)?;
    let fit2 = minimize_phd(model2, sample, h)?;
    let (d1, d2) = (fit1.objective, fit2.objective);
    let phat = sample.frequencies();
    let (hi, gamma_hat, degenerate) = match lambda_star_hat(&phat, model1, &fit1.theta_hat, model2, &fit2.theta_hat, h)
    {
        Ok(var) => {
            let g = var.gamma_sq.sqrt();
            ((sample.n() as f64).sqrt() * (d1 - d2) / g, g, false)
        }
        Err(Error::DegenerateVariance { variance }) => (f64::NAN, variance.max(0.0).sqrt(), true),
        Err(e) => return Err(e),
    };
    let decision = if degenerate { Decision::Indecisive } else { Decision::from_statistic(hi, z) };
    Ok(SelectionReport { hi, gamma_hat, d1, d2, z, decision, degenerate, fit1, fit2 })
}
