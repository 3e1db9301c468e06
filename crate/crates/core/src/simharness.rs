//! Monte Carlo study of Poisson-versus-geometric selection under the mixture
//! `π·Pois(λ) + (1-π)·Geom(p)`.
//!
//! Each replication draws from its own ChaCha8 stream keyed by
//! `(seed, n, h, rep)`, and per-replication outcomes are reduced in index
//! order, so a run's output does not depend on the number of worker threads.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::divergence::PenaltyWeight;
use crate::error::{Error, Result};
use crate::estimate::fit_phd;
use crate::inference::{model_select, Decision};
use crate::model::{
    default_partition, mixture_cell_probs, sample_mixture, BinnedSample, CellPartition, DiscreteModel, MixtureDGP,
};

const CONFIG_KEYS: [&str; 7] = ["pi", "sizes", "reps", "h_values", "alpha", "seed", "cuts"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub pi: f64,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub h_values: Vec<f64>,
    pub alpha: f64,
    pub seed: u64,
    pub partition: CellPartition,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pi: 1.0,
            sizes: vec![20, 30, 40, 50, 300],
            reps: 1000,
            h_values: vec![1.0, 0.5],
            alpha: 0.05,
            seed: 20240607,
            partition: default_partition(),
        }
    }
}

fn bad_key(key: &str, why: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("config key '{key}': {why}"))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| bad_key(key, format!("expected a number, got {v}")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .and_then(|x| usize::try_from(x).ok())
        .ok_or_else(|| bad_key(key, format!("expected a nonnegative integer, got {v}")))
}

fn as_array<'a>(key: &str, v: &'a Value) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| bad_key(key, format!("expected an array, got {v}")))
}

impl ExperimentConfig {
    /// Parses the flat JSON form; absent keys take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("config is not valid JSON: {e}")))?;
        let map: &Map<String, Value> =
            value.as_object().ok_or_else(|| Error::InvalidInput("config must be a JSON object".into()))?;
        let mut cfg = Self::default();
        for (key, v) in map {
            match key.as_str() {
                "pi" => cfg.pi = as_f64(key, v)?,
                "sizes" => {
                    cfg.sizes = as_array(key, v)?.iter().map(|x| as_usize(key, x)).collect::<Result<_>>()?;
                }
                "reps" => cfg.reps = as_usize(key, v)?,
                "h_values" => {
                    cfg.h_values = as_array(key, v)?.iter().map(|x| as_f64(key, x)).collect::<Result<_>>()?;
                }
                "alpha" => cfg.alpha = as_f64(key, v)?,
                "seed" => {
                    cfg.seed =
                        v.as_u64().ok_or_else(|| bad_key(key, format!("expected a nonnegative integer, got {v}")))?;
                }
                "cuts" => {
                    cfg.partition = match v {
                        Value::String(s) => CellPartition::parse(s),
                        Value::Array(items) => {
                            let cuts = items.iter().map(|x| as_f64(key, x)).collect::<Result<Vec<_>>>()?;
                            CellPartition::from_finite_cuts(&cuts)
                        }
                        _ => return Err(bad_key(key, "expected an array of numbers or a comma-separated string")),
                    }
                    .map_err(|e| bad_key(key, e))?;
                }
                other => {
                    return Err(bad_key(other, format!("unknown key (expected one of {})", CONFIG_KEYS.join(", "))))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> std::io::Result<Result<Self>> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_json(&text))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(bad_key("pi", format!("{} is outside [0, 1]", self.pi)));
        }
        if self.sizes.is_empty() {
            return Err(bad_key("sizes", "must be nonempty"));
        }
        if self.sizes.contains(&0) {
            return Err(bad_key("sizes", "sample sizes must be at least 1"));
        }
        if self.reps == 0 {
            return Err(bad_key("reps", "must be at least 1"));
        }
        if self.h_values.is_empty() {
            return Err(bad_key("h_values", "must be nonempty"));
        }
        if let Some(h) = self.h_values.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(bad_key("h_values", format!("penalty weights must be positive, got {h}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(bad_key("alpha", format!("{} is outside (0, 1)", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub n: usize,
    pub h: f64,
    pub reps: usize,
    pub lambda_mean: f64,
    pub lambda_sd: f64,
    pub p_mean: f64,
    pub p_sd: f64,
    pub d_pois_mean: f64,
    pub d_pois_sd: f64,
    pub d_geom_mean: f64,
    pub d_geom_sd: f64,
    /// Over replications with a nondegenerate variance estimate.
    pub hi_mean: f64,
    pub hi_sd: f64,
    pub favor_poisson: usize,
    pub indecisive: usize,
    pub favor_geometric: usize,
    /// Included in `indecisive`.
    pub degenerate: usize,
    /// `Some(true)` for a pure Poisson DGP, `Some(false)` for pure geometric.
    pub poisson_is_true: Option<bool>,
}

impl ExperimentRow {
    fn pct(&self, count: usize) -> f64 {
        100.0 * count as f64 / self.reps as f64
    }

    pub fn pct_favor_poisson(&self) -> f64 {
        self.pct(self.favor_poisson)
    }

    pub fn pct_indecisive(&self) -> f64 {
        self.pct(self.indecisive)
    }

    pub fn pct_favor_geometric(&self) -> f64 {
        self.pct(self.favor_geometric)
    }

    pub fn correct(&self) -> Option<usize> {
        self.poisson_is_true.map(|p| if p { self.favor_poisson } else { self.favor_geometric })
    }

    pub fn incorrect(&self) -> Option<usize> {
        self.poisson_is_true.map(|p| if p { self.favor_geometric } else { self.favor_poisson })
    }

    pub fn pct_correct(&self) -> Option<f64> {
        self.correct().map(|c| self.pct(c))
    }

    pub fn pct_incorrect(&self) -> Option<f64> {
        self.incorrect().map(|c| self.pct(c))
    }
}

#[derive(Debug, Clone, Copy)]
struct Replication {
    lambda: f64,
    p: f64,
    d_pois: f64,
    d_geom: f64,
    hi: f64,
    decision: Decision,
    degenerate: bool,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream used by replication `rep` at sample size `n` and weight `h`.
pub fn substream_seed(seed: u64, n: usize, h: f64, rep: usize) -> u64 {
    [n as u64, h.to_bits(), rep as u64].iter().fold(splitmix64(seed), |acc, &x| splitmix64(acc ^ x))
}

fn bin_counts(draws: &[u64], part: &CellPartition) -> Result<BinnedSample> {
    let mut counts = vec![0u64; part.cells()];
    for &x in draws {
        let cell = part
            .cell_of(x as f64)
            .ok_or_else(|| Error::InvalidInput(format!("observation {x} falls outside the partition")))?;
        counts[cell] += 1;
    }
    BinnedSample::new(counts)
}

fn replicate(
    cfg: &ExperimentConfig,
    dgp: &MixtureDGP,
    models: &(DiscreteModel, DiscreteModel),
    n: usize,
    h: PenaltyWeight,
    rep: usize,
) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, n, h.value(), rep));
    let draws = sample_mixture(dgp, n, &mut rng)?;
    let sample = bin_counts(&draws, &cfg.partition)?;
    let report = model_select(&sample, &models.0, &models.1, h, cfg.alpha)?;
    Ok(Replication {
        lambda: report.fit1.theta_hat[0],
        p: report.fit2.theta_hat[0],
        d_pois: report.d1,
        d_geom: report.d2,
        hi: report.hi,
        decision: report.decision,
        degenerate: report.degenerate,
    })
}

fn mean_sd(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn summarize(n: usize, h: f64, pi: f64, reps: &[Replication]) -> ExperimentRow {
    let (lambda_mean, lambda_sd) = mean_sd(reps.iter().map(|r| r.lambda));
    let (p_mean, p_sd) = mean_sd(reps.iter().map(|r| r.p));
    let (d_pois_mean, d_pois_sd) = mean_sd(reps.iter().map(|r| r.d_pois));
    let (d_geom_mean, d_geom_sd) = mean_sd(reps.iter().map(|r| r.d_geom));
    let (hi_mean, hi_sd) = mean_sd(reps.iter().filter(|r| !r.degenerate).map(|r| r.hi));
    let count = |d: Decision| reps.iter().filter(|r| r.decision == d).count();
    ExperimentRow {
        n,
        h,
        reps: reps.len(),
        lambda_mean,
        lambda_sd,
        p_mean,
        p_sd,
        d_pois_mean,
        d_pois_sd,
        d_geom_mean,
        d_geom_sd,
        hi_mean,
        hi_sd,
        favor_poisson: count(Decision::FavorFirst),
        indecisive: count(Decision::Indecisive),
        favor_geometric: count(Decision::FavorSecond),
        degenerate: reps.iter().filter(|r| r.degenerate).count(),
        poisson_is_true: if pi == 1.0 {
            Some(true)
        } else if pi == 0.0 {
            Some(false)
        } else {
            None
        },
    }
}

/// Runs every `(n, h)` block of the study; rows come out with sizes varying
/// fastest within each `h`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    run_experiment_with_progress(cfg, |_| {})
}

/// As [`run_experiment`], calling `progress` after each finished row.
pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(&ExperimentRow),
) -> Result<Vec<ExperimentRow>> {
    cfg.validate()?;
    let dgp = MixtureDGP::new(cfg.pi)?;
    let models = (DiscreteModel::poisson(cfg.partition.clone()), DiscreteModel::geometric(cfg.partition.clone()));
    let mut rows = Vec::with_capacity(cfg.sizes.len() * cfg.h_values.len());
    for &h in &cfg.h_values {
        let weight = PenaltyWeight::new(h)?;
        for &n in &cfg.sizes {
            let reps = (0..cfg.reps)
                .into_par_iter()
                .map(|rep| replicate(cfg, &dgp, &models, n, weight, rep))
                .collect::<Result<Vec<_>>>()?;
            let row = summarize(n, h, cfg.pi, &reps);
            progress(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equidistance {
    pub pi: f64,
    /// Both models are the same family, so every `π` is a solution.
    pub identical: bool,
}

/// Population-level gap `min_θ PHD(m(π), P_θ) - min_μ PHD(m(π), G_μ)`.
pub fn equidistance_gap(
    model1: &DiscreteModel,
    model2: &DiscreteModel,
    components: &MixtureDGP,
    pi: f64,
    h: PenaltyWeight,
) -> Result<f64> {
    let dgp = MixtureDGP::with_components(pi, components.lambda, components.p)?;
    let truth = mixture_cell_probs(&dgp, model1.partition())?;
    let d1 = fit_phd(model1, &truth, h)?.objective;
    let d2 = fit_phd(model2, &truth, h)?.objective;
    Ok(d1 - d2)
}

/// Mixing weight at which both models are equally far from the mixture with
/// the components of `components` (its own `pi` is ignored).
pub fn equidistance_pi(
    model1: &DiscreteModel,
    model2: &DiscreteModel,
    components: &MixtureDGP,
    h: PenaltyWeight,
) -> Result<Equidistance> {
    if model1.partition() != model2.partition() {
        return Err(Error::InvalidInput("both models must use the same partition".into()));
    }
    if model1.name() == model2.name() && model1.bounds() == model2.bounds() {
        return Ok(Equidistance { pi: 0.5, identical: true });
    }
    let gap = |pi: f64| equidistance_gap(model1, model2, components, pi, h);
    let (mut lo, mut hi) = (0.0, 1.0);
    let (g_lo, g_hi) = (gap(lo)?, gap(hi)?);
    if g_lo == 0.0 {
        return Ok(Equidistance { pi: lo, identical: false });
    }
    if g_hi == 0.0 {
        return Ok(Equidistance { pi: hi, identical: false });
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::NoEquidistance);
    }
    let lo_sign = g_lo.signum();
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid)?;
        if g == 0.0 {
            return Ok(Equidistance { pi: mid, identical: false });
        }
        if g.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(Equidistance { pi: 0.5 * (lo + hi), identical: false })
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

fn fmt_pct(x: f64) -> String {
    format!("{}", x.round() as i64)
}

fn table_columns(rows: &[ExperimentRow]) -> (bool, Vec<&'static str>) {
    let pure = rows.iter().all(|r| r.poisson_is_true.is_some());
    let mut cols = vec![
        "n",
        "h",
        "lambda_hat",
        "lambda_sd",
        "p_hat",
        "p_sd",
        "dhp_pois",
        "dhp_pois_sd",
        "dhp_geom",
        "dhp_geom_sd",
        "hi",
        "hi_sd",
    ];
    if pure {
        cols.extend(["pct_correct", "pct_indecisive", "pct_incorrect"]);
    } else {
        cols.extend(["pct_favor_poisson", "pct_indecisive", "pct_favor_geometric"]);
    }
    cols.push("degenerate");
    (pure, cols)
}

fn row_cells(row: &ExperimentRow, pure: bool) -> Vec<String> {
    let (first, last) = if pure {
        (row.pct_correct().unwrap_or(f64::NAN), row.pct_incorrect().unwrap_or(f64::NAN))
    } else {
        (row.pct_favor_poisson(), row.pct_favor_geometric())
    };
    vec![
        row.n.to_string(),
        row.h.to_string(),
        fmt3(row.lambda_mean),
        fmt3(row.lambda_sd),
        fmt3(row.p_mean),
        fmt3(row.p_sd),
        fmt3(row.d_pois_mean),
        fmt3(row.d_pois_sd),
        fmt3(row.d_geom_mean),
        fmt3(row.d_geom_sd),
        fmt3(row.hi_mean),
        fmt3(row.hi_sd),
        fmt_pct(first),
        fmt_pct(row.pct_indecisive()),
        fmt_pct(last),
        row.degenerate.to_string(),
    ]
}

/// Renders rows as `"csv"` or aligned `"text"`.
pub fn emit_table(rows: &[ExperimentRow], format: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("no rows to render".into()));
    }
    let (pure, cols) = table_columns(rows);
    let body: Vec<Vec<String>> = rows.iter().map(|r| row_cells(r, pure)).collect();
    match format {
        "csv" => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::InvalidInput(e.to_string());
            w.write_record(&cols).map_err(io)?;
            for line in &body {
                w.write_record(line).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
        }
        "text" => {
            let widths: Vec<usize> = (0..cols.len())
                .map(|j| body.iter().map(|l| l[j].len()).chain([cols[j].len()]).max().unwrap_or(0))
                .collect();
            let mut out = String::new();
            let mut line = |cells: &[&str]| {
                let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
                let _ = writeln!(out, "{}", parts.join("  "));
            };
            line(&cols);
            for l in &body {
                let refs: Vec<&str> = l.iter().map(String::as_str).collect();
                line(&refs);
            }
            Ok(out)
        }
        other => Err(Error::InvalidInput(format!("unknown table format '{other}' (expected csv or text)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(pi: f64) -> ExperimentConfig {
        ExperimentConfig { pi, sizes: vec![25], reps: 8, h_values: vec![0.5], ..Default::default() }
    }

    #[test]
    fn config_defaults_and_keys() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let cfg = ExperimentConfig::from_json(r#"{"pi": 0.5, "cuts": "1,2,3", "sizes": [10]}"#).unwrap();
        assert_eq!(cfg.partition.cells(), 4);
        let err = ExperimentConfig::from_json(r#"{"pie": 0.5}"#).unwrap_err().to_string();
        assert!(err.contains("pie"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"reps": "many"}"#).unwrap_err().to_string();
        assert!(err.contains("reps"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"h_values": [0.5, 0]}"#).unwrap_err().to_string();
        assert!(err.contains("h_values"), "{err}");
    }

    #[test]
    fn substreams_differ() {
        let a = substream_seed(1, 20, 0.5, 0);
        assert_ne!(a, substream_seed(1, 20, 0.5, 1));
        assert_ne!(a, substream_seed(1, 20, 1.0, 0));
        assert_ne!(a, substream_seed(1, 30, 0.5, 0));
        assert_ne!(a, substream_seed(2, 20, 0.5, 0));
    }

    #[test]
    fn percentages_partition_reps() {
        let rows = run_experiment(&small(0.5)).unwrap();
        let r = &rows[0];
        assert_eq!(r.favor_poisson + r.indecisive + r.favor_geometric, r.reps);
        assert!(r.correct().is_none());
        let total = r.pct_favor_poisson() + r.pct_indecisive() + r.pct_favor_geometric();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn repeated_runs_identical() {
        let cfg = ExperimentConfig { reps: 1, ..small(1.0) };
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
    }

    #[test]
    fn table_shapes() {
        let rows = run_experiment(&small(1.0)).unwrap();
        let csv = emit_table(&rows, "csv").unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("n,h,lambda_hat,"));
        assert!(csv.contains("pct_correct,pct_indecisive,pct_incorrect"));
        let text = emit_table(&rows, "text").unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(matches!(emit_table(&rows, "xml"), Err(Error::InvalidInput(_))));
        assert!(emit_table(&[], "csv").is_err());
    }

    #[test]
    fn identical_models_flagged() {
        let m = DiscreteModel::poisson(default_partition());
        let eq = equidistance_pi(&m, &m, &MixtureDGP::new(0.5).unwrap(), PenaltyWeight::ordinary()).unwrap();
        assert!(eq.identical);
        assert_eq!(eq.pi, 0.5);
    }
}
