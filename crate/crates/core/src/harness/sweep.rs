use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dump::config_hash;
use crate::error::{Error, Result};
use crate::recovery::SolverKind;

use super::config::ExperimentConfig;
use super::metrics::{mean_ci, ratio_to_db, Cdf, MeanCi};
use super::plot;
use super::trial::{run_trial, TrialRecord};

/// Aggregates for one solver at one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: usize,
    pub value: f64,
    pub solver: SolverKind,
    pub pe: MeanCi,
    /// dB of the mean linear NMSE.
    pub nmse_db: f64,
    /// Half-width on per-trial dB values.
    pub nmse_db_ci95: f64,
    pub rmse: MeanCi,
    pub rmse_cdf: Cdf,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub axis: String,
    pub rows: Vec<PointSummary>,
}

impl MetricSummary {
    pub fn get(&self, point: usize, solver: SolverKind) -> Option<&PointSummary> {
        self.rows.iter().find(|r| r.point == point && r.solver == solver)
    }

    /// `(value, metric)` pairs of one solver along the sweep.
    pub fn series(&self, solver: SolverKind, f: impl Fn(&PointSummary) -> f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.solver == solver)
            .map(|r| (r.value, f(r)))
            .collect()
    }
}

/// Reduces raw records to per-point, per-solver statistics.
pub fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> MetricSummary {
    let mut rows = Vec::new();
    for (point, &value) in cfg.sweep.values.iter().enumerate() {
        let here: Vec<&TrialRecord> = records.iter().filter(|r| r.point == point).collect();
        for &solver in &cfg.sweep.solvers {
            let recs: Vec<_> = here.iter().filter_map(|r| r.solver(solver)).collect();
            let ok: Vec<_> = recs.iter().filter(|s| s.error.is_none()).collect();
            let pe: Vec<f64> = ok.iter().map(|s| s.pe).collect();
            let ratios: Vec<f64> = ok.iter().map(|s| s.nmse_ratio).collect();
            let db: Vec<f64> = ok.iter().map(|s| s.nmse_db).filter(|v| v.is_finite()).collect();
            let rmse: Vec<f64> = ok.iter().flat_map(|s| s.rmse.iter().map(|u| u.rmse_m)).collect();
            rows.push(PointSummary {
                point,
                value,
                solver,
                pe: mean_ci(&pe),
                nmse_db: ratio_to_db(mean_ci(&ratios).mean),
                nmse_db_ci95: mean_ci(&db).ci95,
                rmse: mean_ci(&rmse),
                rmse_cdf: Cdf::new(&rmse),
                failures: recs.len() - ok.len(),
            });
        }
    }
    MetricSummary {
        axis: cfg.sweep.axis.name().to_string(),
        rows,
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub summary: MetricSummary,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Runs every point × trial, in parallel across trials. With `out` set, the
/// lock file, raw records (flushed after each point), CSV table, gnuplot
/// data and SVG plots are written there.
pub fn run_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<SweepOutput> {
    cfg.validate()?;
    let points: Vec<ExperimentConfig> = cfg
        .sweep
        .values
        .iter()
        .map(|&v| cfg.at_point(v))
        .collect::<Result<_>>()?;
    let mut jsonl = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_lock(cfg, &dir.join("config.lock.json"))?;
            Some(BufWriter::new(File::create(dir.join("records.jsonl"))?))
        }
        None => None,
    };
    let pool = thread_pool(cfg.sweep.workers)?;
    let mut records = Vec::with_capacity(points.len() * cfg.sweep.trials);
    for (point, pcfg) in points.iter().enumerate() {
        let value = cfg.sweep.values[point];
        let batch: Vec<TrialRecord> = pool.install(|| {
            (0..cfg.sweep.trials)
                .into_par_iter()
                .map(|t| run_trial(pcfg, point, value, t))
                .collect::<Result<_>>()
        })?;
        if let Some(w) = jsonl.as_mut() {
            for r in &batch {
                serde_json::to_writer(&mut *w, r)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        records.extend(batch);
    }
    let summary = summarize(cfg, &records);
    if let Some(dir) = out {
        write_results_csv(&summary, &dir.join("results.csv"))?;
        plot::write_figures(cfg, &summary, dir)?;
    }
    Ok(SweepOutput { records, summary })
}

#[derive(Serialize)]
struct Lock<'a> {
    crate_version: &'static str,
    config_sha256: String,
    config: &'a ExperimentConfig,
}

fn write_lock(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    let lock = Lock {
        crate_version: env!("CARGO_PKG_VERSION"),
        config_sha256: config_hash(cfg)?,
        config: cfg,
    };
    fs::write(path, serde_json::to_string_pretty(&lock)?)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Columns: axis, value, solver, metric, mean, ci95.
pub fn write_results_csv(summary: &MetricSummary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["axis", "value", "solver", "metric", "mean", "ci95"])?;
    for r in &summary.rows {
        let mut row = |metric: &str, mean: f64, ci: f64| {
            w.write_record([
                summary.axis.clone(),
                r.value.to_string(),
                r.solver.name().to_string(),
                metric.to_string(),
                mean.to_string(),
                ci.to_string(),
            ])
        };
        row("pe", r.pe.mean, r.pe.ci95)?;
        row("nmse_db", r.nmse_db, r.nmse_db_ci95)?;
        if r.rmse.n > 0 {
            row("rmse_m", r.rmse.mean, r.rmse.ci95)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SweepAxis;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::reduced_scale();
        c.scenario.users = 8;
        c.scenario.active_users = 2;
        c.scenario.subarrays = 3;
        c.channel.subcarriers = 128;
        c.frontend.g_symbols = 12;
        c.localization.enabled = false;
        c.sweep.axis = SweepAxis::Ptx;
        c.sweep.values = vec![20.0];
        c.sweep.trials = 1;
        c
    }

    #[test]
    fn one_point_one_trial_table() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let out = run_sweep(&cfg, Some(dir.path())).unwrap();
        assert_eq!(out.records.len(), 1);
        let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
        // Header plus pe and nmse per solver.
        assert_eq!(text.lines().count(), 1 + 2 * cfg.sweep.solvers.len());
        assert!(text.starts_with("axis,value,solver,metric,mean,ci95"));
        let back = read_records(&dir.path().join("records.jsonl")).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].solvers, out.records[0].solvers);
        assert!(dir.path().join("config.lock.json").exists());
    }

    #[test]
    fn summary_matches_hand_average() {
        let mut cfg = tiny();
        cfg.sweep.trials = 5;
        cfg.sweep.solvers = vec![SolverKind::StrBomp, SolverKind::Bomp];
        let out = run_sweep(&cfg, None).unwrap();
        for &s in &cfg.sweep.solvers {
            let hand: f64 = out.records.iter().map(|r| r.solver(s).unwrap().pe).sum::<f64>() / 5.0;
            assert!((out.summary.get(0, s).unwrap().pe.mean - hand).abs() < 1e-15);
        }
    }
}
