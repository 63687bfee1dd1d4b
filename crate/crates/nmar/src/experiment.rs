//! Monte Carlo replications: generate, split, fit, score, aggregate.
//!
//! Every replication derives its seeds from `(seed, n, rep)` alone, so rows
//! do not depend on scheduling and all estimators at one `(n, rep)` see the
//! same sample.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use nmar_core::classify::{risk_report, PluginClassifier};
use nmar_core::data::{derive_seed, DataSplit, Dataset, Observation, Rows};
use nmar_core::ht::{fit_ht, HtVariant};
use nmar_core::metrics::{iqr, lp_error, median, rate_fit, RateFit};
use nmar_core::plugin::{EstimatorKind, RegressionEstimate};
use nmar_core::selection::fit;
use nmar_core::synth::{generate, SyntheticModel, TruthRecord};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::{Error, Result};

const DATA_STREAM: u64 = 0;
const SPLIT_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub estimator: String,
    pub n: usize,
    pub rep: usize,
    pub lp_error: Option<f64>,
    pub phi_index: Option<usize>,
    /// 0 unless timing is enabled.
    pub runtime_ms: u64,
    pub risk: Option<f64>,
    pub bayes_risk: Option<f64>,
    pub excess: Option<f64>,
    /// `ok`, or the error that aborted the replication.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub estimator: String,
    pub n: usize,
    pub median: f64,
    pub iqr: f64,
    pub median_excess: Option<f64>,
    pub succeeded: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Sorted by estimator (config order), then `n`, then `rep`.
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<Aggregate>,
    /// Log-log fit of median error on `n`, per estimator with at least
    /// three positive medians.
    pub rate_fits: Vec<(String, RateFit)>,
}

/// The sample the estimators see, plus the fully observed copy that only
/// the `nw_full` benchmark is given.
pub struct Replicate {
    pub dataset: Dataset,
    pub revealed: Dataset,
    pub split: DataSplit,
}

pub fn replicate(cfg: &ExperimentConfig, model: &SyntheticModel, n: usize, rep: usize) -> Result<Replicate> {
    let (dataset, truth) = generate(model, n, derive_seed(cfg.seed, &[n as u64, rep as u64, DATA_STREAM]))?;
    let revealed = reveal(&dataset, &truth)?;
    let split = DataSplit::random(n, cfg.split_alpha, derive_seed(cfg.seed, &[n as u64, rep as u64, SPLIT_STREAM]))?;
    Ok(Replicate { dataset, revealed, split })
}

fn reveal(ds: &Dataset, truth: &TruthRecord) -> Result<Dataset> {
    let obs = ds.observations().iter().zip(truth.y()).map(|(o, &y)| Observation::observed(o.x.clone(), y)).collect();
    Ok(Dataset::new(obs, ds.dim(), ds.z_coords().to_vec(), ds.bound())?)
}

/// Fits one estimator. Split-free estimators use all `n` rows.
pub fn fit_estimator(cfg: &ExperimentConfig, kind: EstimatorKind, dataset: &Dataset, split: &DataSplit) -> Result<RegressionEstimate> {
    let d = dataset.dim();
    let smoothing = cfg.smoothing(d)?;
    let h_all = || smoothing.bandwidth.bandwidth(dataset.len(), d);
    Ok(match kind {
        EstimatorKind::NwFull => RegressionEstimate::fit_nw_full(Rows::all(dataset), smoothing.kernel, h_all()?)?,
        EstimatorKind::CompleteCase => RegressionEstimate::fit_complete_case(Rows::all(dataset), smoothing.kernel, h_all()?),
        EstimatorKind::PluginGamma => {
            let gamma = cfg.plugin.gamma.ok_or_else(|| Error::Config("plugin_gamma needs plugin.gamma".into()))?;
            RegressionEstimate::fit_plugin_gamma(Rows::all(dataset), smoothing.kernel, h_all()?, gamma)
        }
        EstimatorKind::SelectPhi => fit(dataset, split, &cfg.cover(dataset.len())?, &smoothing)?,
        EstimatorKind::HtTilde => fit_ht(dataset, split, &cfg.cover(dataset.len())?, &cfg.ht_config(HtVariant::Tilde)?)?,
        EstimatorKind::HtBreve => fit_ht(dataset, split, &cfg.cover(dataset.len())?, &cfg.ht_config(HtVariant::Breve)?)?,
    })
}

struct Scored {
    lp: f64,
    phi_index: Option<usize>,
    risk: Option<(f64, f64, f64)>,
}

fn score(cfg: &ExperimentConfig, model: &SyntheticModel, est: RegressionEstimate, n: usize, rep: usize) -> Result<Scored> {
    let seed = derive_seed(cfg.seed, &[n as u64, rep as u64, EVAL_STREAM]);
    let lp = lp_error(&est, model, cfg.p, cfg.n_eval, seed)?;
    let phi_index = est.meta().chosen_index;
    let risk = if model.is_classification() {
        let r = risk_report(&PluginClassifier(est), model, cfg.n_eval, seed)?;
        Some((r.empirical_risk, r.bayes_risk, r.excess))
    } else {
        None
    };
    Ok(Scored { lp, phi_index, risk })
}

fn run_one(cfg: &ExperimentConfig, model: &SyntheticModel, kind: EstimatorKind, n: usize, rep: usize) -> ResultRow {
    let start = Instant::now();
    let outcome = replicate(cfg, model, n, rep).and_then(|r| {
        let data = if kind == EstimatorKind::NwFull { &r.revealed } else { &r.dataset };
        let est = fit_estimator(cfg, kind, data, &r.split)?;
        score(cfg, model, est, n, rep)
    });
    let runtime_ms = if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 };
    let mut row = ResultRow {
        estimator: kind.name().into(),
        n,
        rep,
        lp_error: None,
        phi_index: None,
        runtime_ms,
        risk: None,
        bayes_risk: None,
        excess: None,
        status: "ok".into(),
    };
    match outcome {
        Ok(s) => {
            row.lp_error = Some(s.lp);
            row.phi_index = s.phi_index;
            if let Some((r, b, e)) = s.risk {
                row.risk = Some(r);
                row.bayes_risk = Some(b);
                row.excess = Some(e);
            }
        }
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let model = cfg.model()?;
    let jobs: Vec<(EstimatorKind, usize, usize)> = cfg
        .estimator_kinds()
        .into_iter()
        .flat_map(|k| cfg.n_grid.iter().flat_map(move |&n| (0..cfg.replications).map(move |r| (k, n, r))))
        .collect();
    let work = || jobs.par_iter().map(|&(k, n, r)| run_one(cfg, &model, k, n, r)).collect::<Vec<_>>();
    let rows = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build().map_err(|e| Error::Runtime(e.to_string()))?.install(work)
    } else {
        work()
    };
    let aggregates = aggregate(&rows);
    let mut rate_fits = Vec::new();
    for name in &cfg.estimators {
        let pts: Vec<(f64, f64)> = aggregates.iter().filter(|a| &a.estimator == name && a.succeeded > 0).map(|a| (a.n as f64, a.median)).collect();
        if let Ok(f) = rate_fit(&pts) {
            rate_fits.push((name.clone(), f));
        }
    }
    Ok(ExperimentResult { rows, aggregates, rate_fits })
}

/// Median and IQR over the successful replications of each `(estimator, n)`,
/// in row order.
pub fn aggregate(rows: &[ResultRow]) -> Vec<Aggregate> {
    let mut out: Vec<Aggregate> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (&rows[start].estimator, rows[start].n);
        let end = start + rows[start..].iter().take_while(|r| (&r.estimator, r.n) == key).count();
        let group = &rows[start..end];
        let errs: Vec<f64> = group.iter().filter_map(|r| r.lp_error).collect();
        let excess: Vec<f64> = group.iter().filter_map(|r| r.excess).collect();
        out.push(Aggregate {
            estimator: key.0.clone(),
            n: key.1,
            median: median(&errs),
            iqr: iqr(&errs),
            median_excess: (!excess.is_empty()).then(|| median(&excess)),
            succeeded: errs.len(),
            failed: group.len() - errs.len(),
        });
        start = end;
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentResult {
    /// Results CSV: one row per replication, then one `rep = -1` median row
    /// per `(estimator, n)`.
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
        let err = |e: csv::Error| Error::Runtime(e.to_string());
        w.write_record(["estimator", "n", "rep", "lp_error", "phi_index", "runtime_ms", "risk", "bayes_risk", "excess", "iqr", "status"]).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.estimator.clone(),
                r.n.to_string(),
                r.rep.to_string(),
                opt(r.lp_error),
                r.phi_index.map(|i| i.to_string()).unwrap_or_default(),
                r.runtime_ms.to_string(),
                opt(r.risk),
                opt(r.bayes_risk),
                opt(r.excess),
                String::new(),
                r.status.clone(),
            ])
            .map_err(err)?;
        }
        for a in &self.aggregates {
            let group = self.rows.iter().filter(|r| r.estimator == a.estimator && r.n == a.n);
            let times: Vec<f64> = group.clone().map(|r| r.runtime_ms as f64).collect();
            let risks: Vec<f64> = group.clone().filter_map(|r| r.risk).collect();
            let bayes = group.clone().find_map(|r| r.bayes_risk);
            w.write_record([
                a.estimator.clone(),
                a.n.to_string(),
                "-1".into(),
                if a.succeeded > 0 { a.median.to_string() } else { String::new() },
                String::new(),
                (median(&times) as u64).to_string(),
                if risks.is_empty() { String::new() } else { median(&risks).to_string() },
                opt(bayes),
                opt(a.median_excess),
                if a.succeeded > 0 { a.iqr.to_string() } else { String::new() },
                format!("median of {} (failed {})", a.succeeded, a.failed),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Runtime(e.to_string()))
    }

    /// Plain-text table of medians, IQRs and rate fits.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<14} {:>7} {:>12} {:>12} {:>6}", "estimator", "n", "median", "iqr", "failed");
        for a in &self.aggregates {
            let _ = writeln!(s, "{:<14} {:>7} {:>12.6} {:>12.6} {:>6}", a.estimator, a.n, a.median, a.iqr, a.failed);
        }
        for (name, f) in &self.rate_fits {
            let _ = writeln!(s, "rate {name}: slope {:.4}, intercept {:.4}, R^2 {:.4}", f.slope, f.intercept, f.r_squared);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ExperimentConfig {
        let text = format!("{extra}\nn_eval = 1000\n[model]\nnoise = 0.5\n[model.m]\nkind = \"sine\"\namp = 0.3\n");
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn smallest_run() {
        let c = cfg("estimators = [\"nw_full\"]\nn_grid = [200]");
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].lp_error.unwrap().is_finite());
        assert_eq!(r.aggregates.len(), 1);
        assert!(r.rate_fits.is_empty());
    }

    #[test]
    fn failures_become_rows() {
        // split_alpha = 0.5 of n = 3 leaves one training row, too few for leave-one-out
        let c = cfg("estimators = [\"ht_breve\", \"complete_case\"]\nn_grid = [3, 100]\nreplications = 2");
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert!(r.rows[0].status.starts_with("failed"));
        assert!(r.rows[0].lp_error.is_none());
        assert!(r.rows[2].status == "ok");
        assert_eq!(r.aggregates[0].failed, 2);
        assert!(r.to_csv_string().unwrap().contains("ht_breve,3,-1,,,0,,,,,median of 0 (failed 2)"));
    }

    #[test]
    fn aggregates_match_rows() {
        let c = cfg("estimators = [\"complete_case\", \"select_phi\"]\nn_grid = [100, 200, 400]\nreplications = 3");
        let r = run_experiment(&c).unwrap();
        assert_eq!(aggregate(&r.rows), r.aggregates);
        assert_eq!(r.rate_fits.len(), 2);
        assert!(r.rows.iter().filter(|x| x.estimator == "select_phi").all(|x| x.phi_index.is_some()));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = run_experiment(&cfg("threads = 1\nestimators = [\"select_phi\", \"ht_tilde\"]\nn_grid = [150]\nreplications = 4")).unwrap();
        let b = run_experiment(&cfg("threads = 3\nestimators = [\"select_phi\", \"ht_tilde\"]\nn_grid = [150]\nreplications = 4")).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    }
}
