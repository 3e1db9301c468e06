use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{builder::PossibleValuesParser, Parser, Subcommand, ValueEnum};

use phdsel::divergence::PenaltyWeight;
use phdsel::estimate::{minimize_phd, mle_binned, FitResult};
use phdsel::inference::{gof_test, model_select};
use phdsel::model::{
    empirical_frequencies, family_names, read_observations, BinnedSample, CellPartition, DiscreteModel, MixtureDGP,
};
use phdsel::simharness::{emit_table, equidistance_pi, run_experiment_with_progress, ExperimentConfig};
use phdsel::Error;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Minimum penalized Hellinger distance estimation and model selection for
/// binned count data.
#[derive(Parser, Debug)]
#[command(name = "phdsel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Cell boundaries between 0 and infinity, comma-separated
    #[arg(long, default_value = "1,2,3,4,5,6,7")]
    cuts: String,
    /// Penalty weight on empty cells (1 gives the ordinary Hellinger distance)
    #[arg(long, default_value_t = 0.5, value_parser = positive_f64)]
    h: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Phd,
    Mle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model to a data file
    Estimate {
        /// Observations, one per line; '#' starts a comment
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = PossibleValuesParser::new(family_names()))]
        model: Option<String>,
        #[arg(long, value_enum, default_value_t = Method::Phd)]
        method: Method,
        #[command(flatten)]
        common: Common,
    },
    /// Goodness-of-fit test of one model
    Gof {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = PossibleValuesParser::new(family_names()))]
        model: Option<String>,
        /// Test level
        #[arg(long, default_value_t = 0.05, value_parser = unit_interval)]
        alpha: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Choose between two models; negative hi favors --model1
    Select {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = PossibleValuesParser::new(family_names()))]
        model1: Option<String>,
        #[arg(long, value_parser = PossibleValuesParser::new(family_names()))]
        model2: Option<String>,
        /// Test level
        #[arg(long, default_value_t = 0.05, value_parser = unit_interval)]
        alpha: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Run the Monte Carlo study described by a JSON config
    Simulate {
        /// Flat JSON object with keys pi, sizes, reps, h_values, alpha, seed, cuts
        #[arg(long)]
        config: PathBuf,
        /// Write the table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads (default: all cores)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Mixing weight at which two models are equally distant from the mixture
    Equidistance {
        #[arg(long, default_value = "poisson", value_parser = PossibleValuesParser::new(family_names()))]
        model1: String,
        #[arg(long, default_value = "geometric", value_parser = PossibleValuesParser::new(family_names()))]
        model2: String,
        /// Poisson component rate
        #[arg(long, default_value_t = 4.0)]
        lambda: f64,
        /// Geometric component success probability
        #[arg(long, default_value_t = 0.2)]
        p: f64,
        #[command(flatten)]
        common: Common,
    },
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1), got {v}"))
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::InvalidParameter(_) => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn require(model: Option<String>, flag: &str) -> Result<String, Failure> {
    model.ok_or_else(|| usage(format!("missing --{flag}; valid models: {}", family_names().join(", "))))
}

fn partition(cuts: &str) -> Result<CellPartition, Failure> {
    CellPartition::parse(cuts).map_err(|e| usage(format!("--cuts: {e}")))
}

fn load_sample(path: &Path, part: &CellPartition) -> Result<BinnedSample, Failure> {
    let data = read_observations(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let (sample, _) = empirical_frequencies(&data, part).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(sample)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn print_fit(prefix: &str, fit: &FitResult) {
    println!("{prefix}theta_hat={}", join(&fit.theta_hat));
    println!("{prefix}objective={}", fit.objective);
    println!("{prefix}evaluations={}", fit.evaluations);
    println!("{prefix}converged={}", fit.converged);
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Estimate { data, model, method, common } => {
            let part = partition(&common.cuts)?;
            let model = DiscreteModel::by_name(&require(model, "model")?, part.clone())?;
            let sample = load_sample(&data, &part)?;
            let h = PenaltyWeight::new(common.h)?;
            let fit = match method {
                Method::Phd => minimize_phd(&model, &sample, h)?,
                Method::Mle => mle_binned(&model, &sample)?,
            };
            println!("model={}", model.name());
            println!("n={}", sample.n());
            print_fit("", &fit);
        }
        Command::Gof { data, model, alpha, common } => {
            let part = partition(&common.cuts)?;
            let model = DiscreteModel::by_name(&require(model, "model")?, part.clone())?;
            let sample = load_sample(&data, &part)?;
            let rep = gof_test(&sample, &model, PenaltyWeight::new(common.h)?, alpha)?;
            println!("model={}", model.name());
            println!("theta_hat={}", join(&rep.theta_hat));
            println!("statistic={}", rep.statistic);
            println!("df={}", rep.df);
            println!("critical={}", rep.critical);
            println!("p_value={}", rep.p_value);
            println!("reject={}", rep.reject);
        }
        Command::Select { data, model1, model2, alpha, common } => {
            let part = partition(&common.cuts)?;
            let m1 = DiscreteModel::by_name(&require(model1, "model1")?, part.clone())?;
            let m2 = DiscreteModel::by_name(&require(model2, "model2")?, part.clone())?;
            let sample = load_sample(&data, &part)?;
            let rep = model_select(&sample, &m1, &m2, PenaltyWeight::new(common.h)?, alpha)?;
            println!("model1={}", m1.name());
            println!("model2={}", m2.name());
            println!("hi={}", rep.hi);
            println!("gamma_hat={}", rep.gamma_hat);
            println!("d1={}", rep.d1);
            println!("d2={}", rep.d2);
            println!("z={}", rep.z);
            println!("decision={}", rep.decision);
            println!("degenerate={}", rep.degenerate);
            println!("theta1={}", join(&rep.fit1.theta_hat));
            println!("theta2={}", join(&rep.fit2.theta_hat));
        }
        Command::Simulate { config, out, format, threads } => {
            let cfg = ExperimentConfig::from_path(&config)
                .map_err(|e| usage(format!("cannot read {}: {e}", config.display())))?
                .map_err(|e| usage(format!("{}: {e}", config.display())))?;
            if let Some(t) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build_global()
                    .map_err(|e| usage(format!("--threads: {e}")))?;
            }
            let total = cfg.sizes.len() * cfg.h_values.len();
            let mut done = 0;
            let rows = run_experiment_with_progress(&cfg, |row| {
                done += 1;
                eprintln!("[{done}/{total}] n={} h={} done", row.n, row.h);
            })?;
            let fmt = match format {
                Format::Csv => "csv",
                Format::Text => "text",
            };
            let table = emit_table(&rows, fmt)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, table).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?
                }
                None => print!("{table}"),
            }
        }
        Command::Equidistance { model1, model2, lambda, p, common } => {
            let part = partition(&common.cuts)?;
            let m1 = DiscreteModel::by_name(&model1, part.clone())?;
            let m2 = DiscreteModel::by_name(&model2, part)?;
            let components = MixtureDGP::with_components(0.5, lambda, p)?;
            let eq = equidistance_pi(&m1, &m2, &components, PenaltyWeight::new(common.h)?)?;
            println!("pi={}", eq.pi);
            println!("identical={}", eq.identical);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
