//! Deterministic derivative-free minimization over a parameter box.
//!
//! One-dimensional problems use a 32-point grid followed by golden-section
//! refinement of the bracket around the best grid point. Two-dimensional
//! problems run Nelder–Mead from 16 fixed starting points, with every vertex
//! projected back into the box.

use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 32;
/// Bracket / simplex tolerance, relative to the box width.
pub const REL_TOL: f64 = 1e-8;
const GOLDEN: f64 = 0.618_033_988_749_894_9;
const MAX_GOLDEN_ITER: usize = 500;
const MAX_SIMPLEX_ITER: usize = 5_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("invalid search interval [{lo}, {hi}]")));
    }
    Ok(())
}

/// Minimizes `f` on `[lo, hi]`; the returned bracket width is below
/// `tol` (default `1e-8 · (hi - lo)` when `tol` is `None`).
pub fn minimize_scalar<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: Option<f64>) -> Result<ScalarMinimum> {
    check_interval(lo, hi)?;
    let tol = tol.unwrap_or(REL_TOL * (hi - lo));
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> =
        (0..GRID_POINTS).map(|i| if i == GRID_POINTS - 1 { hi } else { lo + step * i as f64 }).collect();
    let values: Vec<f64> = grid.iter().map(|&x| finite_or_inf(f(x))).collect();
    let mut evaluations = GRID_POINTS;

    let mut best_i = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best_i] {
            best_i = i;
        }
    }
    if !values[best_i].is_finite() {
        return Err(Error::FitFailed("objective is not finite anywhere on the start grid".into()));
    }
    let mut best_x = grid[best_i];
    let mut best_v = values[best_i];

    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(GRID_POINTS - 1)];
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = finite_or_inf(f(c));
    let mut fd = finite_or_inf(f(d));
    evaluations += 2;
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best_v {
            best_x = x;
            best_v = v;
        }
    }
    let mut iter = 0;
    while b - a > tol && iter < MAX_GOLDEN_ITER {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = finite_or_inf(f(c));
            if fc < best_v {
                best_x = c;
                best_v = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = finite_or_inf(f(d));
            if fd < best_v {
                best_x = d;
                best_v = fd;
            }
        }
        evaluations += 1;
        iter += 1;
    }
    Ok(ScalarMinimum { x: best_x, value: best_v, evaluations, converged: b - a <= tol })
}

/// Minimizes `f` over the box `bounds` (one or two dimensions).
pub fn minimize_box<F: FnMut(&[f64]) -> f64>(mut f: F, bounds: &[(f64, f64)]) -> Result<Minimum> {
    for &(lo, hi) in bounds {
        check_interval(lo, hi)?;
    }
    match bounds.len() {
        1 => {
            let (lo, hi) = bounds[0];
            let r = minimize_scalar(|x| f(&[x]), lo, hi, None)?;
            Ok(Minimum { x: vec![r.x], value: r.value, evaluations: r.evaluations, converged: r.converged })
        }
        2 => nelder_mead_multistart(f, bounds),
        k => Err(Error::InvalidInput(format!("parameter dimension {k} is not supported (k must be 1 or 2)"))),
    }
}

fn nelder_mead_multistart<F: FnMut(&[f64]) -> f64>(mut f: F, bounds: &[(f64, f64)]) -> Result<Minimum> {
    let k = bounds.len();
    let to_x = |u: &[f64]| -> Vec<f64> {
        u.iter().zip(bounds).map(|(&ui, &(lo, hi))| lo + ui.clamp(0.0, 1.0) * (hi - lo)).collect()
    };
    let mut evaluations = 0usize;
    let mut eval = |u: &[f64], evaluations: &mut usize| -> f64 {
        *evaluations += 1;
        finite_or_inf(f(&to_x(u)))
    };

    // 4 x 4 grid of interior starts
    let levels = [0.125, 0.375, 0.625, 0.875];
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for &s0 in &levels {
        for &s1 in &levels {
            let start = [s0, s1];
            let (u, v, conv) = nelder_mead(&start[..k], &mut eval, &mut evaluations);
            let x = to_x(&u);
            let better = match &best {
                None => true,
                Some((bx, bv, _)) => v < *bv || (v == *bv && lexicographic_lt(&x, bx)),
            };
            if better {
                best = Some((x, v, conv));
            }
        }
    }
    let (x, value, converged) = best.expect("at least one start");
    if !value.is_finite() {
        return Err(Error::FitFailed("objective is not finite at any start".into()));
    }
    Ok(Minimum { x, value, evaluations, converged })
}

fn lexicographic_lt(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

// Nelder–Mead in the unit cube; returns (point, value, converged).
fn nelder_mead<E: FnMut(&[f64], &mut usize) -> f64>(
    start: &[f64],
    eval: &mut E,
    evaluations: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let k = start.len();
    let clamp = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x.clamp(0.0, 1.0)).collect() };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(k + 1);
    simplex.push((start.to_vec(), eval(start, evaluations)));
    for j in 0..k {
        let mut v = start.to_vec();
        v[j] += if v[j] + 0.1 <= 1.0 { 0.1 } else { -0.1 };
        let fv = eval(&v, evaluations);
        simplex.push((v, fv));
    }
    let diameter = |s: &[(Vec<f64>, f64)]| -> f64 {
        let mut d: f64 = 0.0;
        for a in s {
            for b in s {
                for (x, y) in a.0.iter().zip(&b.0) {
                    d = d.max((x - y).abs());
                }
            }
        }
        d
    };
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| {
            a.1.total_cmp(&b.1).then_with(|| {
                if lexicographic_lt(&a.0, &b.0) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            })
        })
    };

    let mut converged = false;
    for _ in 0..MAX_SIMPLEX_ITER {
        order(&mut simplex);
        if diameter(&simplex) < REL_TOL {
            converged = true;
            break;
        }
        let worst = simplex[k].clone();
        let centroid: Vec<f64> = (0..k).map(|j| simplex[..k].iter().map(|v| v.0[j]).sum::<f64>() / k as f64).collect();
        let along =
            |t: f64| -> Vec<f64> { clamp(centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()) };
        let refl = along(1.0);
        let fr = eval(&refl, evaluations);
        if fr < simplex[0].1 {
            let exp = along(2.0);
            let fe = eval(&exp, evaluations);
            simplex[k] = if fe < fr { (exp, fe) } else { (refl, fr) };
        } else if fr < simplex[k - 1].1 {
            simplex[k] = (refl, fr);
        } else {
            let (contr, fc) = if fr < worst.1 {
                let c = along(0.5);
                let fc = eval(&c, evaluations);
                (c, fc)
            } else {
                let c = along(-0.5);
                let fc = eval(&c, evaluations);
                (c, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[k] = (contr, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = best.iter().zip(&v.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fs = eval(&shrunk, evaluations);
                    *v = (shrunk, fs);
                }
            }
        }
    }
    order(&mut simplex);
    let (u, v) = simplex.swap_remove(0);
    (u, v, converged)
}
