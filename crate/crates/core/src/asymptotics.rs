//! Limiting covariance machinery for binned minimum-distance fits.
//!
//! Notation follows the usual multinomial setup: `J` is the `m × k` Jacobian
//! of the cell probabilities, `D = diag(P^{-1/2}) J`, `I = DᵀD` the Fisher
//! information, `Σ = diag(P) - PPᵀ`, and `M = J I⁻¹ Dᵀ diag(P^{-1/2})` the
//! linear map taking `P̂ - P` to the first-order change of the fitted cell
//! probabilities.
//!
//! Wherever a formula divides by `p_i(θ)` the model probability is floored at
//! [`PROB_FLOOR`]; the distances themselves never are.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::divergence::{grad_first_raw, grad_second_raw, PenaltyWeight};
use crate::error::{Error, Result};
use crate::model::{DiscreteModel, ProbVector};

pub const PROB_FLOOR: f64 = 1e-12;
/// Largest condition number accepted for the Fisher information.
pub const MAX_CONDITION: f64 = 1e12;
/// `Γ̂²` below this is treated as degenerate.
pub const MIN_SELECTION_VARIANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AsymptoticMatrices {
    pub jacobian: DMatrix<f64>,
    pub scaled_jacobian: DMatrix<f64>,
    pub information: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub projection: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
}

/// Plug-in pieces of the two-model selection variance.
///
/// `lambda_star` is the covariance of the stacked innovation
/// `(P̂ - P, P_θ̂ - P_θ, G_μ̂ - G_μ)` under the shared linearization
/// `[I; M₁; M₂] Σ(p̂) [I, M₁ᵀ, M₂ᵀ]`, and `gamma_sq = wᵀ Λ* w` with
/// `w = (K₁ - K₂, Q₁, -Q₂)`.
#[derive(Debug, Clone)]
pub struct SelectionVariance {
    pub k1: Vec<f64>,
    pub q1: Vec<f64>,
    pub k2: Vec<f64>,
    pub q2: Vec<f64>,
    pub lambda_star: DMatrix<f64>,
    pub gamma_sq: f64,
}

impl SelectionVariance {
    /// Top-left block, `Σ(p̂)`.
    pub fn lambda11(&self) -> DMatrix<f64> {
        let m = self.k1.len();
        self.lambda_star.view((0, 0), (m, m)).into_owned()
    }
}

fn floored(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&v| v.max(PROB_FLOOR)).collect()
}

/// Central finite-difference Jacobian `∂p_i/∂θ_j`, steps clipped to the box.
pub fn jacobian(model: &DiscreteModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    let k = model.dim();
    if theta.len() != k {
        return Err(Error::InvalidParameter(format!("expected {k} parameters, got {}", theta.len())));
    }
    for (j, (&t, &(lo, hi))) in theta.iter().zip(model.bounds()).enumerate() {
        if !(t > lo && t < hi) {
            return Err(Error::BoundaryParameter { index: j, value: t });
        }
    }
    let m = model.cells();
    let mut jac = DMatrix::zeros(m, k);
    for j in 0..k {
        let (lo, hi) = model.bounds()[j];
        let step = (1e-6 * theta[j].abs()).max(1e-6);
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[j] = (theta[j] + step).min(hi);
        down[j] = (theta[j] - step).max(lo);
        let width = up[j] - down[j];
        let pu = model.cell_prob(&up)?;
        let pd = model.cell_prob(&down)?;
        for i in 0..m {
            jac[(i, j)] = (pu[i] - pd[i]) / width;
        }
    }
    Ok(jac)
}

fn scaled_jacobian(jac: &DMatrix<f64>, p_floor: &[f64]) -> DMatrix<f64> {
    let mut d = jac.clone();
    for (i, &p) in p_floor.iter().enumerate() {
        let s = 1.0 / p.sqrt();
        d.row_mut(i).scale_mut(s);
    }
    d
}

fn check_information(info: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(info.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || !(max / min <= MAX_CONDITION) {
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(Error::SingularInformation { condition });
    }
    Ok(())
}

/// Fisher information `I = DᵀD`.
pub fn fisher_info(model: &DiscreteModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    let jac = jacobian(model, theta)?;
    let p = floored(model.cell_prob(theta)?.as_slice());
    let d = scaled_jacobian(&jac, &p);
    let info = d.transpose() * &d;
    check_information(&info)?;
    Ok(info)
}

/// Multinomial covariance `diag(P) - PPᵀ`.
pub fn sigma(p: &ProbVector) -> DMatrix<f64> {
    sigma_raw(p.as_slice())
}

fn sigma_raw(p: &[f64]) -> DMatrix<f64> {
    let m = p.len();
    DMatrix::from_fn(m, m, |i, j| if i == j { p[i] - p[i] * p[i] } else { -p[i] * p[j] })
}

fn projection_parts(model: &DiscreteModel, theta: &[f64]) -> Result<AsymptoticMatrices> {
    let jac = jacobian(model, theta)?;
    let ptheta = model.cell_prob(theta)?;
    let p = floored(ptheta.as_slice());
    let d = scaled_jacobian(&jac, &p);
    let info = d.transpose() * &d;
    check_information(&info)?;
    let info_inv = info.clone().try_inverse().ok_or(Error::SingularInformation { condition: f64::INFINITY })?;
    let inv_sqrt = DMatrix::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|v| 1.0 / v.sqrt())));
    let projection = &jac * info_inv * d.transpose() * inv_sqrt;
    let sig = sigma(&ptheta);
    let lambda =
        &sig - &sig * projection.transpose() - &projection * &sig + &projection * &sig * projection.transpose();
    Ok(AsymptoticMatrices { jacobian: jac, scaled_jacobian: d, information: info, sigma: sig, projection, lambda })
}

/// All matrices at once, evaluated at `theta`.
pub fn asymptotic_matrices(model: &DiscreteModel, theta: &[f64]) -> Result<AsymptoticMatrices> {
    projection_parts(model, theta)
}

/// `M = J I⁻¹ Dᵀ diag(P^{-1/2})`; satisfies `M J = J`.
pub fn m_matrix(model: &DiscreteModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    Ok(projection_parts(model, theta)?.projection)
}

/// `Λ = Σ - ΣMᵀ - MΣ + MΣMᵀ`, the limiting covariance of `√n(P̂ - P_θ̂)`
/// under correct specification.
pub fn lambda_correct(model: &DiscreteModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    Ok(projection_parts(model, theta)?.lambda)
}

fn quad(a: &[f64], mat: &DMatrix<f64>, b: &[f64]) -> f64 {
    let a = DVector::from_column_slice(a);
    let b = DVector::from_column_slice(b);
    (a.transpose() * mat * b)[(0, 0)]
}

/// Limiting variance of `√n(D(P̂, P_θ̂) - D(P, P_θ₁))` when the data come from
/// `p` and `theta1` is the pseudo-true parameter.
pub fn omega_sq(p: &ProbVector, model: &DiscreteModel, theta1: &[f64], h: PenaltyWeight) -> Result<f64> {
    if p.len() != model.cells() {
        return Err(Error::InvalidInput("probability vector and model differ in length".into()));
    }
    let ptheta = model.cell_prob(theta1)?;
    let hgrad = grad_first_raw(p.as_slice(), ptheta.as_slice());
    let qgrad = grad_second_raw(p.as_slice(), &floored(ptheta.as_slice()), h.value())?;
    let mm = m_matrix(model, theta1)?;
    let l11 = sigma(p);
    let l12 = &l11 * mm.transpose();
    let l21 = l12.transpose();
    let l22 = &mm * &l11 * mm.transpose();
    let value = quad(&hgrad, &l11, &hgrad)
        + quad(&hgrad, &l12, &qgrad)
        + quad(&qgrad, &l21, &hgrad)
        + quad(&qgrad, &l22, &qgrad);
    Ok(value.max(0.0))
}

// A fit pinned to the edge of its box does not move to first order.
fn projection_or_pinned(model: &DiscreteModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    match m_matrix(model, theta) {
        Ok(mm) => Ok(mm),
        Err(Error::BoundaryParameter { .. }) => Ok(DMatrix::zeros(model.cells(), model.cells())),
        Err(e) => Err(e),
    }
}

/// Plug-in estimate of the selection variance `Γ̂²` from the observed
/// frequencies and both fits.
pub fn lambda_star_hat(
    phat: &ProbVector,
    model1: &DiscreteModel,
    theta1: &[f64],
    model2: &DiscreteModel,
    theta2: &[f64],
    h: PenaltyWeight,
) -> Result<SelectionVariance> {
    let m = phat.len();
    if model1.cells() != m || model2.cells() != m {
        return Err(Error::InvalidInput("models and frequencies differ in cell count".into()));
    }
    let f = phat.as_slice();
    let p1 = model1.cell_prob(theta1)?;
    let p2 = model2.cell_prob(theta2)?;
    let k1 = grad_first_raw(f, p1.as_slice());
    let k2 = grad_first_raw(f, p2.as_slice());
    let q1 = grad_second_raw(f, &floored(p1.as_slice()), h.value())?;
    let q2 = grad_second_raw(f, &floored(p2.as_slice()), h.value())?;
    let m1 = projection_or_pinned(model1, theta1)?;
    let m2 = projection_or_pinned(model2, theta2)?;

    let mut lift = DMatrix::zeros(3 * m, m);
    lift.view_mut((0, 0), (m, m)).copy_from(&DMatrix::identity(m, m));
    lift.view_mut((m, 0), (m, m)).copy_from(&m1);
    lift.view_mut((2 * m, 0), (m, m)).copy_from(&m2);
    let lambda_star = &lift * sigma(phat) * lift.transpose();

    let w: Vec<f64> =
        k1.iter().zip(&k2).map(|(a, b)| a - b).chain(q1.iter().copied()).chain(q2.iter().map(|v| -v)).collect();
    let gamma_sq = quad(&w, &lambda_star, &w);
    if !(gamma_sq >= MIN_SELECTION_VARIANCE) {
        return Err(Error::DegenerateVariance { variance: gamma_sq });
    }
    Ok(SelectionVariance { k1, q1, k2, q2, lambda_star, gamma_sq })
}

/// Smallest eigenvalue relative to the largest absolute eigenvalue is at
/// least `-rel_tol`.
pub fn is_psd(mat: &DMatrix<f64>, rel_tol: f64) -> bool {
    let eig = SymmetricEigen::new(mat.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    eig.eigenvalues.min() >= -rel_tol * scale.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_partition, CellPartition};

    fn pois() -> DiscreteModel {
        DiscreteModel::poisson(default_partition())
    }

    #[test]
    fn jacobian_poisson_first_cell() {
        let j = jacobian(&pois(), &[4.0]).unwrap();
        assert!((j[(0, 0)] + (-4.0f64).exp()).abs() < 1e-9);
        assert!(j.column(0).sum().abs() < 1e-8);
    }

    #[test]
    fn jacobian_geometric_linear_cell() {
        let j = jacobian(&DiscreteModel::geometric(default_partition()), &[0.2]).unwrap();
        assert!((j[(1, 0)] - 1.0).abs() < 1e-8);
        assert_eq!(j[(0, 0)], 0.0);
    }

    #[test]
    fn jacobian_rejects_boundary() {
        let model = pois();
        let lo = model.bounds()[0].0;
        assert!(matches!(jacobian(&model, &[lo]), Err(Error::BoundaryParameter { .. })));
    }

    #[test]
    fn fisher_info_matches_analytic_sum() {
        let model = pois();
        let info = fisher_info(&model, &[4.0]).unwrap();
        // d/dλ of P(X = x) is pmf(x-1) - pmf(x); tail cell derivative is pmf(6)
        let pmf = |x: i32| -> f64 {
            if x < 0 {
                return 0.0;
            }
            let mut v = (-4.0f64).exp();
            for i in 1..=x {
                v *= 4.0 / f64::from(i);
            }
            v
        };
        let p = model.cell_prob(&[4.0]).unwrap();
        let mut oracle = 0.0;
        for i in 0..7 {
            let d = pmf(i - 1) - pmf(i);
            oracle += d * d / p[i as usize];
        }
        oracle += pmf(6) * pmf(6) / p[7];
        assert!((info[(0, 0)] - oracle).abs() < 1e-7 * oracle, "{} vs {oracle}", info[(0, 0)]);
    }

    #[test]
    fn coarsening_loses_information() {
        let fine = fisher_info(&pois(), &[4.0]).unwrap()[(0, 0)];
        let coarse_part = CellPartition::parse("1,2,3,5,6,7").unwrap();
        let coarse = fisher_info(&DiscreteModel::poisson(coarse_part), &[4.0]).unwrap()[(0, 0)];
        assert!(coarse <= fine + 1e-12, "{coarse} > {fine}");
        assert!(coarse < fine);
    }

    #[test]
    fn sigma_two_cells() {
        let s = sigma(&ProbVector::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]));
        let v = sigma(&ProbVector::new(vec![1.0, 0.0, 0.0]).unwrap());
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn projection_properties() {
        let model = pois();
        let parts = asymptotic_matrices(&model, &[4.0]).unwrap();
        let mj = &parts.projection * &parts.jacobian;
        assert!((mj - &parts.jacobian).amax() < 1e-8);
        let sv = parts.projection.clone().svd(false, false).singular_values;
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        assert!(sv[1] < 1e-10 * sv[0]);
        let zero = &parts.projection * DVector::zeros(8);
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lambda_symmetric_psd() {
        let l = lambda_correct(&pois(), &[4.0]).unwrap();
        assert!((&l - l.transpose()).amax() < 1e-10);
        assert!(is_psd(&l, 1e-8));
        let s = sigma(&pois().cell_prob(&[4.0]).unwrap());
        assert!(l.trace() <= s.trace() + 1e-8);
    }

    #[test]
    fn omega_vanishes_under_correct_specification() {
        let model = pois();
        let p = model.cell_prob(&[4.0]).unwrap();
        let h = PenaltyWeight::new(0.5).unwrap();
        assert!(omega_sq(&p, &model, &[4.0], h).unwrap() < 1e-20);
        let geo = DiscreteModel::geometric(default_partition());
        let pg = geo.cell_prob(&[0.2]).unwrap();
        assert!(omega_sq(&pg, &geo, &[0.2], h).unwrap() < 1e-20);
    }

    #[test]
    fn identical_models_are_degenerate() {
        let model = pois();
        let phat = ProbVector::new(vec![0.02, 0.08, 0.15, 0.2, 0.2, 0.15, 0.1, 0.1]).unwrap();
        let h = PenaltyWeight::new(0.5).unwrap();
        let r = lambda_star_hat(&phat, &model, &[4.0], &model, &[4.0], h);
        assert!(matches!(r, Err(Error::DegenerateVariance { .. })));
    }
}
