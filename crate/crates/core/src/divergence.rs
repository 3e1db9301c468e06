//! φ-divergences and the penalized Hellinger distance.
//!
//! All distances take the observed frequencies first and the model vector
//! second. The penalized Hellinger distance splits the cells into those with
//! observations and the empty ones; on empty cells the squared-root term is
//! replaced by `h · p_i(θ)`, so `h = 1` is the ordinary Hellinger distance.

use crate::error::{Error, Result};
use crate::model::ProbVector;

/// A convex generator `φ` with `φ(1) = 0`, plus `lim_{u→∞} φ(u)/u` for the
/// `0 · φ(p/0)` convention.
#[derive(Clone, Copy)]
pub struct PhiKernel {
    name: &'static str,
    phi: fn(f64) -> f64,
    slope_at_infinity: f64,
}

impl std::fmt::Debug for PhiKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiKernel")
            .field("name", &self.name)
            .field("slope_at_infinity", &self.slope_at_infinity)
            .finish()
    }
}

impl PhiKernel {
    /// Validates `φ(1) = 0` and spot-checks midpoint convexity on a grid.
    pub fn new(name: &'static str, phi: fn(f64) -> f64, slope_at_infinity: f64) -> Result<Self> {
        if phi(1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("kernel '{name}': φ(1) = {} ≠ 0", phi(1.0))));
        }
        let grid: Vec<f64> = (0..=60).map(|i| 0.05 * f64::from(i) + 1e-3).collect();
        for a in &grid {
            for b in &grid {
                let mid = phi(0.5 * (a + b));
                let chord = 0.5 * (phi(*a) + phi(*b));
                if mid > chord + 1e-12 * (1.0 + chord.abs()) {
                    return Err(Error::InvalidParameter(format!("kernel '{name}' is not convex between {a} and {b}")));
                }
            }
        }
        Ok(Self { name, phi, slope_at_infinity })
    }

    /// `φ₁(x) = -4[√x - (x + 1)/2]`, which yields the Hellinger distance.
    pub fn hellinger() -> Self {
        Self { name: "hellinger", phi: |x| -4.0 * (x.sqrt() - 0.5 * (x + 1.0)), slope_at_infinity: 2.0 }
    }

    /// `φ(x) = -log x + x - 1`; `D_φ(P_θ, P̂)` is the modified Kullback–Leibler divergence.
    pub fn modified_kl() -> Self {
        Self {
            name: "modified-kl",
            phi: |x| if x == 0.0 { f64::INFINITY } else { -x.ln() + x - 1.0 },
            slope_at_infinity: 1.0,
        }
    }

    /// `φ(x) = (x - 1)² / 2`: half the Pearson chi-square.
    pub fn pearson() -> Self {
        Self { name: "pearson", phi: |x| 0.5 * (x - 1.0) * (x - 1.0), slope_at_infinity: f64::INFINITY }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.phi)(x)
    }
}

/// Positive penalty weight `h` applied to model mass on empty cells.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PenaltyWeight(f64);

impl PenaltyWeight {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidParameter(format!("penalty weight h = {h} must be positive")));
        }
        Ok(Self(h))
    }

    /// `h = 1`, the ordinary Hellinger distance.
    pub fn ordinary() -> Self {
        Self(1.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

fn same_len(a: &ProbVector, b: &ProbVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "probability vectors have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `D_φ(P, Q) = Σ q_i φ(p_i / q_i)` with `0·φ(0/0) = 0` and `0·φ(p/0) = p · lim φ(u)/u`.
pub fn phi_divergence(p: &ProbVector, q: &ProbVector, kernel: &PhiKernel) -> Result<f64> {
    same_len(p, q)?;
    let total = p
        .as_slice()
        .iter()
        .zip(q.as_slice())
        .map(|(&pi, &qi)| {
            if qi > 0.0 {
                qi * kernel.eval(pi / qi)
            } else if pi > 0.0 {
                pi * kernel.slope_at_infinity
            } else {
                0.0
            }
        })
        .sum();
    Ok(total)
}

/// `2 Σ (√p_i - √q_i)²`.
pub fn hellinger(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    same_len(p, q)?;
    Ok(hellinger_raw(p.as_slice(), q.as_slice()))
}

fn hellinger_raw(p: &[f64], q: &[f64]) -> f64 {
    2.0 * p
        .iter()
        .zip(q)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum::<f64>()
}

/// `2[Σ_{p̂_i > 0} (√p̂_i - √p_i)² + h Σ_{p̂_i = 0} p_i]`.
pub fn penalized_hellinger(phat: &ProbVector, ptheta: &ProbVector, h: PenaltyWeight) -> Result<f64> {
    same_len(phat, ptheta)?;
    Ok(penalized_hellinger_raw(phat.as_slice(), ptheta.as_slice(), h.value()))
}

pub(crate) fn penalized_hellinger_raw(phat: &[f64], ptheta: &[f64], h: f64) -> f64 {
    let mut observed = 0.0;
    let mut empty = 0.0;
    for (&a, &b) in phat.iter().zip(ptheta) {
        if a != 0.0 {
            let d = a.sqrt() - b.sqrt();
            observed += d * d;
        } else {
            empty += b;
        }
    }
    2.0 * (observed + h * empty)
}

/// Modified Kullback–Leibler divergence `KL_m(P_θ, P̂) = D_φ(P_θ, P̂)` with
/// `φ(x) = -log x + x - 1`. Equals `Σ p̂_i log(p̂_i / p_i(θ))`, and is `+∞`
/// when the model puts zero mass on an observed cell.
pub fn kl_modified(ptheta: &ProbVector, phat: &ProbVector) -> Result<f64> {
    phi_divergence(ptheta, phat, &PhiKernel::modified_kl())
}

/// Gradient of the penalized distance in its first (observed) argument.
/// Entries on empty cells are zero.
pub fn grad_phd_first(phat: &ProbVector, ptheta: &ProbVector, h: PenaltyWeight) -> Result<Vec<f64>> {
    same_len(phat, ptheta)?;
    let _ = h;
    Ok(grad_first_raw(phat.as_slice(), ptheta.as_slice()))
}

pub(crate) fn grad_first_raw(phat: &[f64], ptheta: &[f64]) -> Vec<f64> {
    phat.iter().zip(ptheta).map(|(&a, &b)| if a > 0.0 { 2.0 * (1.0 - (b / a).sqrt()) } else { 0.0 }).collect()
}

/// Gradient of the penalized distance in its second (model) argument.
/// Empty cells contribute `2h`.
pub fn grad_phd_second(phat: &ProbVector, ptheta: &ProbVector, h: PenaltyWeight) -> Result<Vec<f64>> {
    same_len(phat, ptheta)?;
    grad_second_raw(phat.as_slice(), ptheta.as_slice(), h.value())
}

pub(crate) fn grad_second_raw(phat: &[f64], ptheta: &[f64], h: f64) -> Result<Vec<f64>> {
    phat.iter()
        .zip(ptheta)
        .enumerate()
        .map(|(i, (&a, &b))| {
            if a > 0.0 {
                if b > 0.0 {
                    Ok(2.0 * (1.0 - (a / b).sqrt()))
                } else {
                    Err(Error::DegenerateGradient { cell: i })
                }
            } else {
                Ok(2.0 * h)
            }
        })
        .collect()
}
