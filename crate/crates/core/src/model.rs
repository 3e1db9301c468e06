//! Binned discrete data and parametric cell-probability models.
//!
//! Observations on the nonnegative reals are grouped into the cells of a
//! [`CellPartition`]; a [`DiscreteModel`] maps a parameter vector to the
//! probability of each cell. The last cell always absorbs the residual mass
//! `1 - Σ(other cells)` so model vectors are normalized exactly rather than by
//! truncated summation.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Geometric as GeometricDist, Poisson as PoissonDist};

use crate::error::{Error, Result};

/// Allowed deviation of `Σ p_i` from one.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Ordered cut points `0 = c_0 < c_1 < … < c_m = +∞`; cell `i` is `[c_i, c_{i+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    cuts: Vec<f64>,
}

impl CellPartition {
    /// Builds a partition from the full list of boundaries, including the
    /// leading `0` and trailing `+∞`.
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "a partition needs at least 2 cells, got {} boundaries",
                cuts.len()
            )));
        }
        if cuts[0] != 0.0 {
            return Err(Error::InvalidInput("first cut must be 0".into()));
        }
        if cuts[cuts.len() - 1] != f64::INFINITY {
            return Err(Error::InvalidInput("last cut must be +inf".into()));
        }
        for w in cuts.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidInput(format!("cuts must be strictly increasing ({} then {})", w[0], w[1])));
            }
        }
        if cuts[..cuts.len() - 1].iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("interior cuts must be finite".into()));
        }
        Ok(Self { cuts })
    }

    /// Builds a partition from the finite interior cuts only; `0` and `+∞`
    /// are implied.
    pub fn from_finite_cuts(inner: &[f64]) -> Result<Self> {
        let mut cuts = Vec::with_capacity(inner.len() + 2);
        cuts.push(0.0);
        cuts.extend_from_slice(inner);
        cuts.push(f64::INFINITY);
        Self::new(cuts)
    }

    /// Parses a comma-separated list of finite interior cuts, e.g. `"1,2,3"`.
    pub fn parse(text: &str) -> Result<Self> {
        let inner = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad cut value '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_finite_cuts(&inner)
    }

    pub fn cells(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Interior cuts, excluding the implied `0` and `+∞`.
    pub fn finite_cuts(&self) -> &[f64] {
        &self.cuts[1..self.cuts.len() - 1]
    }

    /// Index of the cell holding `x`, or `None` for negative or non-finite values.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= 0.0) || !x.is_finite() {
            return None;
        }
        let above = self.cuts.partition_point(|&c| c <= x);
        Some((above - 1).min(self.cells() - 1))
    }

    /// Integers `x` in cell `i`, as `start..end`; `end` is `None` for the last cell.
    pub fn integer_span(&self, i: usize) -> (u64, Option<u64>) {
        let start = self.cuts[i].ceil() as u64;
        let end = self.cuts[i + 1];
        if end.is_finite() {
            (start, Some(end.ceil() as u64))
        } else {
            (start, None)
        }
    }
}

impl Default for CellPartition {
    fn default() -> Self {
        default_partition()
    }
}

impl fmt::Display for CellPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.finite_cuts().iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// The eight-cell partition `[0,1), [1,2), …, [6,7), [7,∞)`.
pub fn default_partition() -> CellPartition {
    CellPartition::from_finite_cuts(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).expect("static partition is valid")
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    p: Vec<f64>,
}

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("entry {i} = {v} is not a probability")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!("entries sum to {total}, not 1")));
        }
        Ok(Self { p })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.p
    }

    /// `weight * self + (1 - weight) * other`.
    pub fn mix(&self, other: &ProbVector, weight: f64) -> Result<ProbVector> {
        if self.len() != other.len() {
            return Err(Error::InvalidInput("length mismatch in mixture".into()));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!("mixing weight {weight} outside [0, 1]")));
        }
        let p = self.p.iter().zip(&other.p).map(|(a, b)| weight * a + (1.0 - weight) * b).collect();
        ProbVector::new(p)
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.p[i]
    }
}

/// Cell counts `N_j` and their total `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinnedSample {
    counts: Vec<u64>,
    n: u64,
}

impl BinnedSample {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidInput("sample has no observations".into()));
        }
        if counts.len() < 2 {
            return Err(Error::InvalidInput("sample needs at least 2 cells".into()));
        }
        Ok(Self { counts, n })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn cells(&self) -> usize {
        self.counts.len()
    }

    /// Observed frequencies `N_j / n`.
    pub fn frequencies(&self) -> ProbVector {
        let n = self.n as f64;
        ProbVector { p: self.counts.iter().map(|&c| c as f64 / n).collect() }
    }
}

/// Bins `data` on `part` and returns the counts together with the observed frequencies.
pub fn empirical_frequencies(data: &[f64], part: &CellPartition) -> Result<(BinnedSample, ProbVector)> {
    if data.is_empty() {
        return Err(Error::InvalidInput("no observations".into()));
    }
    let mut counts = vec![0u64; part.cells()];
    for (k, &x) in data.iter().enumerate() {
        let cell = part
            .cell_of(x)
            .ok_or_else(|| Error::InvalidInput(format!("observation {k} = {x} is not a finite nonnegative value")))?;
        counts[cell] += 1;
    }
    let sample = BinnedSample::new(counts)?;
    let freq = sample.frequencies();
    Ok((sample, freq))
}

/// Parses one observation per line; blank lines and `#` comments are skipped.
pub fn parse_observations(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let x: f64 =
            line.parse().map_err(|_| Error::InvalidInput(format!("line {}: '{line}' is not a number", lineno + 1)))?;
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::InvalidInput(format!(
                "line {}: observation {x} must be finite and nonnegative",
                lineno + 1
            )));
        }
        out.push(x);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("data file contains no observations".into()));
    }
    Ok(out)
}

pub fn read_observations(path: impl AsRef<Path>) -> std::io::Result<Result<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_observations(&text))
}

// Residual mass goes to the last cell; tiny negative residuals from rounding are clamped.
fn absorb_tail(mut head: Vec<f64>) -> ProbVector {
    let used: f64 = head.iter().sum();
    head.push((1.0 - used).max(0.0));
    ProbVector { p: head }
}

/// Cell probabilities of Poisson(`lambda`) on `part`.
pub fn poisson_cell_probs(lambda: f64, part: &CellPartition) -> Result<ProbVector> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("Poisson rate {lambda} must be positive")));
    }
    let m = part.cells();
    let mut head = vec![0.0; m - 1];
    let mut pmf = (-lambda).exp();
    let mut x: u64 = 0;
    for (i, slot) in head.iter_mut().enumerate() {
        let (start, end) = part.integer_span(i);
        let end = end.expect("only the last cell is unbounded");
        let mut mass = 0.0;
        while x < end {
            if x >= start {
                mass += pmf;
            }
            x += 1;
            pmf *= lambda / x as f64;
            if pmf == 0.0 && x as f64 > lambda {
                break;
            }
        }
        *slot = mass;
        if pmf == 0.0 && x as f64 > lambda {
            break;
        }
    }
    Ok(absorb_tail(head))
}

/// Cell probabilities of the geometric law on `{1, 2, …}` with success probability `p`.
pub fn geometric_cell_probs(p: f64, part: &CellPartition) -> Result<ProbVector> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("geometric probability {p} outside (0, 1)")));
    }
    let q = 1.0 - p;
    // P(X >= k) = q^(k-1) for k >= 1
    let survival = |k: u64| -> f64 {
        if k <= 1 {
            1.0
        } else {
            q.powf((k - 1) as f64)
        }
    };
    let m = part.cells();
    let head = (0..m - 1)
        .map(|i| {
            let (start, end) = part.integer_span(i);
            let end = end.expect("only the last cell is unbounded");
            let start = start.max(1);
            if end <= start {
                0.0
            } else {
                survival(start) - survival(end)
            }
        })
        .collect();
    Ok(absorb_tail(head))
}

/// Cell probabilities of the two-component DGP `pi * Pois(lambda) + (1 - pi) * Geom(p)`.
pub fn mixture_cell_probs(dgp: &MixtureDGP, part: &CellPartition) -> Result<ProbVector> {
    let a = poisson_cell_probs(dgp.lambda, part)?;
    let b = geometric_cell_probs(dgp.p, part)?;
    a.mix(&b, dgp.pi)
}

/// A parametric family of discrete laws that can be binned on any partition.
pub trait Family: Send + Sync {
    fn name(&self) -> &str;
    /// Parameter dimension `k`.
    fn dim(&self) -> usize;
    fn default_bounds(&self) -> Vec<(f64, f64)>;
    fn cell_probs(&self, theta: &[f64], part: &CellPartition) -> Result<ProbVector>;
}

fn expect_dim(theta: &[f64], k: usize, name: &str) -> Result<()> {
    if theta.len() != k {
        return Err(Error::InvalidParameter(format!("{name} takes {k} parameter(s), got {}", theta.len())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Poisson;

impl Family for Poisson {
    fn name(&self) -> &str {
        "poisson"
    }
    fn dim(&self) -> usize {
        1
    }
    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(1e-6, 50.0)]
    }
    fn cell_probs(&self, theta: &[f64], part: &CellPartition) -> Result<ProbVector> {
        expect_dim(theta, 1, self.name())?;
        poisson_cell_probs(theta[0], part)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Geometric;

impl Family for Geometric {
    fn name(&self) -> &str {
        "geometric"
    }
    fn dim(&self) -> usize {
        1
    }
    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(1e-6, 1.0 - 1e-6)]
    }
    fn cell_probs(&self, theta: &[f64], part: &CellPartition) -> Result<ProbVector> {
        expect_dim(theta, 1, self.name())?;
        geometric_cell_probs(theta[0], part)
    }
}

/// Zero-inflated Poisson, `theta = (w, lambda)`: an extra point mass `w` at zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroInflatedPoisson;

impl Family for ZeroInflatedPoisson {
    fn name(&self) -> &str {
        "zip"
    }
    fn dim(&self) -> usize {
        2
    }
    fn default_bounds(&self) -> Vec<(f64, f64)> {
        vec![(1e-6, 0.99), (1e-6, 50.0)]
    }
    fn cell_probs(&self, theta: &[f64], part: &CellPartition) -> Result<ProbVector> {
        expect_dim(theta, 2, self.name())?;
        let w = theta[0];
        if !(0.0..1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!("zero-inflation weight {w} outside [0, 1)")));
        }
        let base = poisson_cell_probs(theta[1], part)?;
        let m = base.len();
        // zero always falls in the first cell
        let mut head: Vec<f64> = base.as_slice()[..m - 1].iter().map(|v| (1.0 - w) * v).collect();
        head[0] += w;
        Ok(absorb_tail(head))
    }
}

type FamilyCtor = fn() -> Arc<dyn Family>;

const REGISTRY: &[(&str, FamilyCtor)] = &[
    ("poisson", || Arc::new(Poisson)),
    ("geometric", || Arc::new(Geometric)),
    ("zip", || Arc::new(ZeroInflatedPoisson)),
];

/// Names accepted by [`family_by_name`].
pub fn family_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

pub fn family_by_name(name: &str) -> Option<Arc<dyn Family>> {
    let name = name.to_ascii_lowercase();
    REGISTRY.iter().find(|(n, _)| *n == name).map(|(_, ctor)| ctor())
}

/// A parametric family bound to a partition and a parameter box.
#[derive(Clone)]
pub struct DiscreteModel {
    family: Arc<dyn Family>,
    partition: CellPartition,
    bounds: Vec<(f64, f64)>,
}

impl fmt::Debug for DiscreteModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteModel")
            .field("family", &self.family.name())
            .field("partition", &self.partition)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl DiscreteModel {
    pub fn new(family: Arc<dyn Family>, partition: CellPartition) -> Result<Self> {
        let bounds = family.default_bounds();
        Self::with_bounds(family, partition, bounds)
    }

    pub fn with_bounds(family: Arc<dyn Family>, partition: CellPartition, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let k = family.dim();
        let m = partition.cells();
        if k == 0 || k + 1 >= m {
            return Err(Error::InvalidInput(format!(
                "model '{}' has k = {k} parameters but {m} cells; need 1 <= k < m - 1",
                family.name()
            )));
        }
        if bounds.len() != k {
            return Err(Error::InvalidInput(format!("expected {k} bound pairs, got {}", bounds.len())));
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidInput(format!("bad bounds ({lo}, {hi}) for parameter {j}")));
            }
        }
        Ok(Self { family, partition, bounds })
    }

    pub fn by_name(name: &str, partition: CellPartition) -> Result<Self> {
        let family = family_by_name(name).ok_or_else(|| {
            Error::InvalidInput(format!("unknown model '{name}' (valid: {})", family_names().join(", ")))
        })?;
        Self::new(family, partition)
    }

    pub fn poisson(partition: CellPartition) -> Self {
        Self::new(Arc::new(Poisson), partition).expect("poisson fits any partition with m >= 3")
    }

    pub fn geometric(partition: CellPartition) -> Self {
        Self::new(Arc::new(Geometric), partition).expect("geometric fits any partition with m >= 3")
    }

    pub fn name(&self) -> &str {
        self.family.name()
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn cells(&self) -> usize {
        self.partition.cells()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn partition(&self) -> &CellPartition {
        &self.partition
    }

    pub fn family(&self) -> &Arc<dyn Family> {
        &self.family
    }

    pub fn cell_prob(&self, theta: &[f64]) -> Result<ProbVector> {
        self.family.cell_probs(theta, &self.partition)
    }
}

/// Data generating process `pi * Pois(lambda) + (1 - pi) * Geom(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureDGP {
    pub pi: f64,
    pub lambda: f64,
    pub p: f64,
}

impl MixtureDGP {
    /// Mixture of the calibrated components Pois(4) and Geom(0.2).
    pub fn new(pi: f64) -> Result<Self> {
        Self::with_components(pi, 4.0, 0.2)
    }

    pub fn with_components(pi: f64, lambda: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::InvalidParameter(format!("mixing weight {pi} outside [0, 1]")));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("Poisson rate {lambda} must be positive")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("geometric probability {p} outside (0, 1)")));
        }
        Ok(Self { pi, lambda, p })
    }
}

/// Draws `n` independent observations from `dgp`.
pub fn sample_mixture<R: Rng + ?Sized>(dgp: &MixtureDGP, n: usize, rng: &mut R) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let pois = PoissonDist::new(dgp.lambda).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let geom = GeometricDist::new(dgp.p).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let draws = (0..n)
        .map(|_| {
            if rng.random::<f64>() < dgp.pi {
                pois.sample(rng) as u64
            } else {
                // rand_distr counts failures before the first success
                geom.sample(rng) + 1
            }
        })
        .collect();
    Ok(draws)
}
