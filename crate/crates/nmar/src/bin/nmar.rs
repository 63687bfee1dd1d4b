//! Command-line front end. Exit codes: 0 success, 1 configuration error,
//! 2 runtime failure.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nmar::config::ExperimentConfig;
use nmar::core::cover::{validate_cover, CoverClass, PhiFunction};
use nmar::core::classify::{risk_report, PluginClassifier};
use nmar::core::data::{derive_seed, split};
use nmar::core::ht::{select_phi_ht, HtVariant};
use nmar::core::plugin::{EstimatorKind, Regressor};
use nmar::core::selection::select_phi;
use nmar::core::synth::generate;
use nmar::experiment::{fit_estimator, replicate, run_experiment};
use nmar::{io as nio, plot, Error, Result};

#[derive(Parser)]
#[command(name = "nmar", version, about = "Kernel regression with responses missing not at random")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset from the configured model.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one estimator and write predictions `x1..xd,m_hat`.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "select_phi")]
        estimator: String,
        #[arg(long, default_value_t = 1)]
        split_seed: u64,
        /// Query points as `x1..xd` CSV; defaults to the data covariates.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validation risk of every cover member.
    SelectPhi {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Criterion::Plugin)]
        criterion: Criterion,
        #[arg(long, default_value_t = 1)]
        split_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the configured cover at sample size `n`; exits 2 if it fails.
    CoverCheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        y_grid: usize,
    },
    /// Excess misclassification risk of a plug-in classifier.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long, default_value = "select_phi")]
        estimator: String,
    },
    /// Full experiment: results CSV, summary and optional plot.
    Rates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Criterion {
    Plugin,
    Tilde,
    Breve,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| Error::Runtime(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn estimator(name: &str) -> Result<EstimatorKind> {
    EstimatorKind::parse(name).ok_or_else(|| Error::Config(format!("unknown estimator '{name}'")))
}

fn load_data(cfg: &ExperimentConfig, path: &Path) -> Result<nmar::core::data::Dataset> {
    nio::read_csv(path, &cfg.z_coords()?, cfg.model.bound)
}

fn read_queries(path: &Path, d: usize) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))?;
    let mut xs = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Runtime(format!("row {}: {e}", k + 1)))?;
        if rec.len() < d {
            return Err(Error::Runtime(format!("row {}: expected {d} coordinates", k + 1)));
        }
        for f in rec.iter().take(d) {
            xs.push(f.trim().parse::<f64>().map_err(|_| Error::Runtime(format!("row {}: '{f}' is not a number", k + 1)))?);
        }
    }
    Ok(xs)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, n, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (ds, _) = generate(&cfg.model()?, n, seed.unwrap_or(cfg.seed))?;
            nio::write_dataset(output(out.as_deref())?, &ds)
        }
        Command::Fit { config, data, estimator: name, split_seed, queries, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let kind = estimator(&name)?;
            let ds = load_data(&cfg, &data)?;
            let sp = split(&ds, cfg.split_alpha, split_seed)?;
            let est = fit_estimator(&cfg, kind, &ds, &sp)?;
            let d = ds.dim();
            let xs = match queries {
                Some(q) => read_queries(&q, d)?,
                None => ds.observations().iter().flat_map(|o| o.x.iter().copied()).collect(),
            };
            nio::write_predictions(output(out.as_deref())?, &xs, d, &est.predict_batch(&xs, d))
        }
        Command::SelectPhi { config, data, criterion, split_seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ds = load_data(&cfg, &data)?;
            let sp = split(&ds, cfg.split_alpha, split_seed)?;
            let cover = cfg.cover(ds.len())?;
            let (risks, variant) = match criterion {
                Criterion::Plugin => (select_phi(&ds, &sp, &cover, &cfg.smoothing(ds.dim())?)?.risks, None),
                Criterion::Tilde | Criterion::Breve => {
                    let v = if matches!(criterion, Criterion::Tilde) { HtVariant::Tilde } else { HtVariant::Breve };
                    (select_phi_ht(&ds, &sp, &cover, &cfg.ht_config(v)?)?.result.risks, Some(v.name()))
                }
            };
            nio::write_risk_table(output(out.as_deref())?, &cover, &risks, variant)
        }
        Command::CoverCheck { config, n, samples, y_grid } => {
            let cfg = ExperimentConfig::load(&config)?;
            if samples < 2 || y_grid < 100 {
                return Err(Error::Config("cover-check needs samples >= 2 and y_grid >= 100".into()));
            }
            let cover = cfg.cover(n)?;
            let l = cfg.model.bound;
            let c = &cfg.cover;
            let t = |k: usize| k as f64 / (samples - 1) as f64;
            let sample: Vec<PhiFunction> = match cover.class() {
                CoverClass::ExpFamily { m_bound, .. } => {
                    (0..samples).map(|k| PhiFunction::exp_gamma(-m_bound + 2.0 * m_bound * t(k), l)).collect::<nmar::core::Result<_>>()?
                }
                CoverClass::Grid { .. } => (0..samples)
                    .map(|k| {
                        let gamma = c.gamma_range[0] + (c.gamma_range[1] - c.gamma_range[0]) * t(k);
                        let scale = c.scale_range[0] + (c.scale_range[1] - c.scale_range[0]) * t((k * 7919) % samples);
                        PhiFunction::scaled_exp(scale, gamma, l)
                    })
                    .collect::<nmar::core::Result<_>>()?,
                CoverClass::Explicit => cover.members().to_vec(),
            };
            let check = validate_cover(&cover, &sample, y_grid, 1e-3);
            println!("members,epsilon,worst_distance,worst_sample,worst_y,ok");
            println!("{},{},{},{},{},{}", cover.len(), cover.epsilon(), check.worst_distance, check.worst_sample, check.worst_y, check.ok);
            if check.ok {
                Ok(())
            } else {
                Err(Error::Runtime(format!("cover fails: sampled member {} is {} away at y = {}", check.worst_sample, check.worst_distance, check.worst_y)))
            }
        }
        Command::Classify { config, n, rep, estimator: name } => {
            let cfg = ExperimentConfig::load(&config)?;
            let model = cfg.model()?;
            if !model.is_classification() {
                return Err(Error::Config("classify needs model.task = \"classification\"".into()));
            }
            let kind = estimator(&name)?;
            let r = replicate(&cfg, &model, n, rep)?;
            let data = if kind == EstimatorKind::NwFull { &r.revealed } else { &r.dataset };
            let est = fit_estimator(&cfg, kind, data, &r.split)?;
            let report = risk_report(&PluginClassifier(est), &model, cfg.n_eval, derive_seed(cfg.seed, &[n as u64, rep as u64, 2]))?;
            println!("estimator,n,risk,bayes_risk,excess,conditional_excess,n_eval");
            println!("{},{n},{},{},{},{},{}", kind.name(), report.empirical_risk, report.bayes_risk, report.excess, report.conditional_excess, report.n_eval);
            Ok(())
        }
        Command::Rates { config, out, plot: plot_path } => {
            let cfg = ExperimentConfig::load(&config)?;
            let result = run_experiment(&cfg)?;
            let csv_path = out.or_else(|| cfg.output.csv.as_ref().map(PathBuf::from));
            result.write_csv(output(csv_path.as_deref())?)?;
            eprint!("{}", result.summary());
            if let Some(p) = plot_path.or_else(|| cfg.output.plot.as_ref().map(PathBuf::from)) {
                plot::write_rate_plot(&result, &p)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nmar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
