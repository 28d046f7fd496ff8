//! Strategy × patch × rate × seed sweep with per-run, aggregate and t-test rows.

use std::io::Write;

use sarcd_core::evalstat::{self, ConfusionMatrix};
use sarcd_core::pcanet::PcaNetConfig;
use sarcd_core::raster::{ReferenceMap, TemporalPair};
use sarcd_core::sampling::Strategy;
use sarcd_core::synthgen::{self, SceneSpec};
use sarcd_core::{Error, Result as CoreResult};

use crate::config::RunConfig;
use crate::error::Result;
use crate::pipeline;

/// Where each run's scene comes from.
#[derive(Debug, Clone)]
pub enum SceneSource {
    /// A fresh synthetic scene per run, seeded with the run seed.
    Synthetic(SceneSpec),
    /// The same labelled pair for every run.
    Fixed {
        pair: TemporalPair,
        reference: ReferenceMap,
    },
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    pub patches: Vec<usize>,
    pub rates: Vec<f64>,
    pub runs: usize,
    /// Run `i` uses seed `master_seed + i`.
    pub master_seed: u64,
    /// Template for every run; strategy, patch, rate and seed are overridden.
    pub base: RunConfig,
    pub source: SceneSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Run,
    Aggregate,
    TTest,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Run => "run",
            RowKind::Aggregate => "aggregate",
            RowKind::TTest => "ttest",
        }
    }
}

/// One CSV row. Fields that do not apply to the row kind are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub kind: RowKind,
    /// For t-test rows, the strategy compared against `uc`.
    pub strategy: Strategy,
    pub patch: usize,
    pub rate: f64,
    pub seed: Option<u64>,
    pub n_changed: Option<usize>,
    pub n_unchanged: Option<usize>,
    pub kappa: Option<f64>,
    pub false_alarm: Option<f64>,
    pub missed: Option<f64>,
    pub overall_error: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub t_value: Option<f64>,
    pub dof: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: Option<bool>,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl BenchRow {
    fn blank(kind: RowKind, strategy: Strategy, patch: usize, rate: f64) -> Self {
        BenchRow {
            kind,
            strategy,
            patch,
            rate,
            seed: None,
            n_changed: None,
            n_unchanged: None,
            kappa: None,
            false_alarm: None,
            missed: None,
            overall_error: None,
            mean: None,
            std: None,
            t_value: None,
            dof: None,
            p_value: None,
            significant: None,
            status: "ok".into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const HEADER: [&str; 18] = [
    "kind", "strategy", "patch", "rate", "seed", "n_changed", "n_unchanged", "kappa", "fa",
    "missed", "oe", "mean", "std", "t", "dof", "p", "significant", "status",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.kind.as_str().to_string(),
            r.strategy.as_str().to_string(),
            r.patch.to_string(),
            r.rate.to_string(),
            cell(r.seed),
            cell(r.n_changed),
            cell(r.n_unchanged),
            cell(r.kappa),
            cell(r.false_alarm),
            cell(r.missed),
            cell(r.overall_error),
            cell(r.mean),
            cell(r.std),
            cell(r.t_value),
            cell(r.dof),
            cell(r.p_value),
            cell(r.significant),
            r.status.clone(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

struct RunResult {
    n_changed: usize,
    n_unchanged: usize,
    cm: ConfusionMatrix,
}

fn run_cell(cfg: &RunConfig, source: &SceneSource) -> CoreResult<RunResult> {
    let synthetic;
    let (pair, reference) = match source {
        SceneSource::Synthetic(spec) => {
            synthetic = synthgen::generate_scene(&SceneSpec {
                seed: cfg.seed,
                ..spec.clone()
            })?;
            (&synthetic.pair, &synthetic.reference)
        }
        SceneSource::Fixed { pair, reference } => (pair, reference),
    };
    let out = pipeline::train(cfg, pair, reference)?;
    let pred = pipeline::detect(&out.model, pair, cfg.workers)?;
    Ok(RunResult {
        n_changed: out.training_set.n_changed,
        n_unchanged: out.training_set.n_unchanged,
        cm: evalstat::confusion(&pred, reference)?,
    })
}

fn run_row(cfg: &RunConfig, source: &SceneSource) -> BenchRow {
    let mut row = BenchRow::blank(RowKind::Run, cfg.strategy, cfg.net.h, cfg.rate);
    row.seed = Some(cfg.seed);
    let filled = run_cell(cfg, source).and_then(|r| {
        let rates = evalstat::error_rates(&r.cm)?;
        row.kappa = Some(evalstat::kappa(&r.cm)?);
        row.n_changed = Some(r.n_changed);
        row.n_unchanged = Some(r.n_unchanged);
        row.false_alarm = rates.false_alarm;
        row.missed = rates.missed;
        row.overall_error = Some(rates.overall_error);
        Ok(())
    });
    if let Err(e) = filled {
        row.status = format!("failed: {e}");
    }
    row
}

fn validate(cfg: &BenchConfig) -> CoreResult<()> {
    if cfg.strategies.is_empty() || cfg.patches.is_empty() || cfg.rates.is_empty() || cfg.runs == 0 {
        return Err(Error::Parameter("benchmark matrix is empty".into()));
    }
    for &h in &cfg.patches {
        let net = PcaNetConfig {
            h,
            block_side: h,
            ..cfg.base.net.clone()
        };
        net.validate()?;
    }
    if let SceneSource::Synthetic(spec) = &cfg.source {
        spec.validate()?;
    }
    cfg.base.hinge.validate()
}

/// Runs the whole matrix. Cells that fail become `failed` rows; the sweep continues.
/// Row order: all run rows, then aggregate rows, then t-test rows, each in
/// patch, rate, strategy order.
pub fn run_bench(cfg: &BenchConfig, mut progress: impl FnMut(&BenchRow)) -> CoreResult<Vec<BenchRow>> {
    validate(cfg)?;
    let mut runs = Vec::new();
    let mut aggregates = Vec::new();
    let mut tests = Vec::new();
    for &h in &cfg.patches {
        for &rate in &cfg.rates {
            let mut kappas_by_strategy = Vec::new();
            for &strategy in &cfg.strategies {
                let mut kappas = Vec::new();
                for i in 0..cfg.runs {
                    let run_cfg = RunConfig {
                        net: PcaNetConfig {
                            h,
                            block_side: h,
                            ..cfg.base.net.clone()
                        },
                        strategy,
                        rate,
                        seed: cfg.master_seed.wrapping_add(i as u64),
                        ..cfg.base.clone()
                    };
                    let row = run_row(&run_cfg, &cfg.source);
                    progress(&row);
                    kappas.extend(row.kappa);
                    runs.push(row);
                }
                let mut agg = BenchRow::blank(RowKind::Aggregate, strategy, h, rate);
                match evalstat::aggregate(&kappas) {
                    Ok(a) => {
                        agg.mean = Some(a.mean);
                        agg.std = a.std;
                        if kappas.len() < cfg.runs {
                            agg.status = format!("ok ({} of {} runs failed)", cfg.runs - kappas.len(), cfg.runs);
                        }
                    }
                    Err(e) => agg.status = format!("failed: {e}"),
                }
                aggregates.push(agg);
                kappas_by_strategy.push((strategy, kappas));
            }
            let Some((_, baseline)) = kappas_by_strategy.iter().find(|(s, _)| *s == Strategy::Uc) else {
                continue;
            };
            for (strategy, kappas) in &kappas_by_strategy {
                if !matches!(strategy, Strategy::Buc | Strategy::Obuc) {
                    continue;
                }
                let mut row = BenchRow::blank(RowKind::TTest, *strategy, h, rate);
                match evalstat::welch_t_test(baseline, kappas) {
                    Ok(t) => {
                        row.t_value = t.t_value;
                        row.dof = t.dof;
                        row.p_value = t.p_value;
                        row.significant = Some(t.significant);
                    }
                    Err(e) => row.status = format!("failed: {e}"),
                }
                tests.push(row);
            }
        }
    }
    runs.extend(aggregates);
    runs.extend(tests);
    Ok(runs)
}
