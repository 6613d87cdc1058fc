//! Experiment drivers: Monte-Carlo trials over scenarios, the pick ablation,
//! calibration and collusion batches, plus their CSV and JSON outputs.
//!
//! Every trial or run draws from its own substream of the root seed, and
//! results are gathered in index order, so output bytes do not depend on the
//! number of worker threads.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{run_cycles, CalibrationRun, CycleResult};
use crate::collusion::{run_detection, DetectionOutcome};
use crate::config::{AblationConfig, CalibrationRuns, CollusionRuns, ScenarioConfig};
use crate::error::{Error, Result};
use crate::investor::{distribution_density, generate_pool, Investor, IrDistribution, IrInit};
use crate::protocol::cp::run_cp;
use crate::protocol::passive::run_passive_im;
use crate::protocol::rebel::{run_rebel_im, RebelConfig};
use crate::protocol::Protocol;
use crate::rng::{label, StreamKey};
use crate::scoring::{gem_recall, nis, rank, recall_of_set, spearman, InvestmentLedger};
use crate::universe::{generate_universe, Paper};

/// Substream of trial `trial`. Scenarios share trial keys, so trial `t` of
/// every scenario sees the same universe.
pub fn trial_key(seed: u64, trial: usize) -> StreamKey {
    StreamKey::root(seed).path(&[label::TRIAL, trial as u64])
}

/// Substream of independent run `run` of a multi-run batch.
pub fn run_key(seed: u64, run: usize) -> StreamKey {
    StreamKey::root(seed).path(&[label::RUN, run as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub recall: f64,
    pub gems_found: usize,
    /// Spearman correlation of NIS with true value; `None` for CP or constant NIS.
    pub spearman_nis_vtrue: Option<f64>,
}

/// Everything one trial generated.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialArtifacts {
    pub papers: Vec<Paper>,
    pub investors: Vec<Investor>,
    /// Empty for CP.
    pub ledger: InvestmentLedger,
}

pub fn run_trial(sc: &ScenarioConfig, top_slots: usize, trial: usize, key: StreamKey) -> Result<(TrialResult, TrialArtifacts)> {
    let papers = generate_universe(&sc.universe, &mut key.child(label::UNIVERSE).rng())?;
    let investors = generate_pool(&sc.pool, &mut key.child(label::POOL).rng())?;
    let (recall, gems_found, rho, ledger) = match sc.protocol {
        Protocol::Cp => {
            let accepted = run_cp(&papers, &sc.cp, &mut key.child(label::CP).rng())?;
            let found = accepted.iter().filter(|&&p| papers[p as usize].is_gem()).count();
            (recall_of_set(&accepted, &papers)?, found, None, InvestmentLedger::new())
        }
        Protocol::ImPassive | Protocol::ImRebel => {
            let ledger = if sc.protocol == Protocol::ImPassive {
                run_passive_im(&papers, &investors, &sc.passive, key)?
            } else {
                run_rebel_im(&papers, &investors, &sc.rebel, key)?
            };
            let scores = nis(&ledger, &investors, &papers)?;
            let ranked = rank(&scores);
            let found = ranked.iter().take(top_slots).filter(|&&p| papers[p as usize].is_gem()).count();
            let v_true: Vec<f64> = papers.iter().map(|p| p.v_true).collect();
            (gem_recall(&ranked, &papers, top_slots)?, found, spearman(&scores, &v_true).ok(), ledger)
        }
    };
    Ok((
        TrialResult { trial, recall, gems_found, spearman_nis_vtrue: rho },
        TrialArtifacts { papers, investors, ledger },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub protocol: String,
    pub trials: usize,
    pub mean_recall: f64,
    pub sd_recall: f64,
    pub mean_gems_found: f64,
    pub gems_per_trial: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub summary: ScenarioSummary,
    pub trials: Vec<TrialResult>,
    /// Trial-0 artifacts when requested.
    pub first_trial: Option<TrialArtifacts>,
}

/// Runs `trials` independent trials of one scenario.
pub fn run_scenario(sc: &ScenarioConfig, seed: u64, trials: usize, top_slots: usize, keep_first: bool) -> Result<ScenarioOutcome> {
    sc.validate()?;
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let results: Vec<(TrialResult, Option<TrialArtifacts>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (r, a) = run_trial(sc, top_slots, t, trial_key(seed, t))?;
            Ok((r, (keep_first && t == 0).then_some(a)))
        })
        .collect::<Result<_>>()?;
    let mut first_trial = None;
    let mut rows = Vec::with_capacity(trials);
    for (r, a) in results {
        if a.is_some() {
            first_trial = a;
        }
        rows.push(r);
    }
    let recalls: Vec<f64> = rows.iter().map(|r| r.recall).collect();
    let (mean, sd) = mean_sd(&recalls);
    let gems_per_trial = sc.universe.target_counts().0;
    Ok(ScenarioOutcome {
        summary: ScenarioSummary {
            name: sc.name.clone(),
            protocol: sc.protocol.as_str().to_string(),
            trials,
            mean_recall: mean,
            sd_recall: sd,
            mean_gems_found: rows.iter().map(|r| r.gems_found as f64).sum::<f64>() / trials as f64,
            gems_per_trial,
        },
        trials: rows,
        first_trial,
    })
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pick × pool grid of gems found in the top slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationOutcome {
    pub scan: usize,
    pub picks: Vec<usize>,
    pub pools: Vec<String>,
    /// `mean_gems[i][j]`: pick `picks[i]`, pool `pools[j]`.
    pub mean_gems: Vec<Vec<f64>>,
    /// Per-trial gem counts, same indexing.
    #[serde(skip)]
    pub gems: Vec<Vec<Vec<usize>>>,
}

pub fn run_ablation(cfg: &AblationConfig, seed: u64, trials: usize, top_slots: usize) -> Result<AblationOutcome> {
    cfg.validate()?;
    let mut mean_gems = Vec::new();
    let mut gems = Vec::new();
    for &pick in &cfg.picks {
        let mut row_mean = Vec::new();
        let mut row = Vec::new();
        for dist in &cfg.pools {
            let sc = ScenarioConfig {
                name: format!("pick{pick}-{}", dist.label()),
                protocol: Protocol::ImRebel,
                universe: cfg.universe.clone(),
                pool: crate::investor::PoolConfig { distribution: *dist, ..cfg.pool.clone() },
                cp: Default::default(),
                passive: Default::default(),
                rebel: RebelConfig { n_scan: cfg.scan, n_pick: pick, ..cfg.rebel.clone() },
            };
            let out = run_scenario(&sc, seed, trials, top_slots, false)?;
            row_mean.push(out.summary.mean_gems_found);
            row.push(out.trials.iter().map(|t| t.gems_found).collect());
        }
        mean_gems.push(row_mean);
        gems.push(row);
    }
    Ok(AblationOutcome {
        scan: cfg.scan,
        picks: cfg.picks.clone(),
        pools: cfg.pools.iter().map(|d| d.label()).collect(),
        mean_gems,
        gems,
    })
}

/// Independent calibration runs, in run order.
pub fn run_calibration(spec: &CalibrationRuns, seed: u64) -> Result<Vec<CalibrationRun>> {
    spec.cycles.validate()?;
    (0..spec.runs).into_par_iter().map(|r| run_cycles(&spec.cycles, run_key(seed, r))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub runs: usize,
    pub n_cycles: usize,
    /// Runs whose final spearman(IR, skill) exceeds the first cycle's.
    pub spearman_improved: usize,
    pub mean_recall_first: f64,
    pub mean_recall_last: f64,
    /// Honest top-decile-skill mean IR, start and end, averaged over runs.
    pub top_decile_ir_start: f64,
    pub top_decile_ir_end: f64,
    /// Runs where the ring mean IR fell below 0.75 of its start by cycle 5.
    pub ring_collapsed_by_cycle5: Option<usize>,
}

pub fn summarize_calibration(spec: &CalibrationRuns, runs: &[CalibrationRun]) -> CalibrationSummary {
    let n_cycles = spec.cycles.n_cycles;
    let start_ir = match spec.cycles.pool.initial_ir {
        IrInit::Fixed(v) => Some(v),
        IrInit::Skill => None,
    };
    let improved = runs
        .iter()
        .filter(|r| match (r.cycles.first().and_then(|c| c.spearman_ir_skill), r.cycles.last().and_then(|c| c.spearman_ir_skill)) {
            (Some(a), Some(b)) => b > a,
            (None, Some(_)) => true,
            _ => false,
        })
        .count();
    let mean = |f: &dyn Fn(&CalibrationRun) -> f64| runs.iter().map(f).sum::<f64>() / runs.len().max(1) as f64;
    let first_ir = |r: &CalibrationRun| start_ir.unwrap_or_else(|| r.top_skill_mean_ir(1, 0.1, 1.0));
    let collapsed = spec.cycles.ring.as_ref().map(|_| {
        let by = 5.min(n_cycles);
        runs.iter()
            .filter(|r| {
                let start = match start_ir {
                    Some(v) => v,
                    None => r.ring_members.iter().map(|&m| r.skill[m as usize]).sum::<f64>() / r.ring_members.len() as f64,
                };
                r.cycles[..by].iter().any(|c| c.ring_mean_ir.is_some_and(|m| m < 0.75 * start))
            })
            .count()
    });
    CalibrationSummary {
        runs: runs.len(),
        n_cycles,
        spearman_improved: improved,
        mean_recall_first: mean(&|r| r.cycles[0].recall),
        mean_recall_last: mean(&|r| r.cycles[n_cycles - 1].recall),
        top_decile_ir_start: mean(&|r| r.top_skill_mean_ir(0, 0.1, first_ir(r))),
        top_decile_ir_end: mean(&|r| r.top_skill_mean_ir(n_cycles, 0.1, 1.0)),
        ring_collapsed_by_cycle5: collapsed,
    }
}

/// Per-cycle means over runs, in the single-run `cycles.csv` shape.
pub fn mean_cycles(runs: &[CalibrationRun]) -> Vec<CycleResult> {
    let Some(first) = runs.first() else { return Vec::new() };
    (0..first.cycles.len())
        .map(|c| {
            let opt_mean = |f: &dyn Fn(&CycleResult) -> Option<f64>| {
                let xs: Vec<f64> = runs.iter().filter_map(|r| f(&r.cycles[c])).collect();
                (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
            };
            let n_inv = first.cycles[c].ir.len();
            let ir = (0..n_inv)
                .map(|i| runs.iter().map(|r| r.cycles[c].ir[i]).sum::<f64>() / runs.len() as f64)
                .collect();
            CycleResult {
                cycle: c + 1,
                recall: opt_mean(&|x| Some(x.recall)).unwrap_or(f64::NAN),
                ir,
                spearman_ir_skill: opt_mean(&|x| x.spearman_ir_skill),
                ring_mean_ir: opt_mean(&|x| x.ring_mean_ir),
                nis_mvis_spearman: opt_mean(&|x| x.nis_mvis_spearman),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollusionOutcome {
    pub planted: Vec<DetectionOutcome>,
    pub null: Vec<DetectionOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollusionSummary {
    pub runs: usize,
    pub recovered: usize,
    pub recovery_rate: f64,
    pub null_runs: usize,
    pub false_flags: usize,
    pub false_flag_rate: f64,
}

/// Ring runs use `run_key(seed, r)`; null runs continue the numbering after them.
pub fn run_collusion(spec: &CollusionRuns, seed: u64) -> Result<CollusionOutcome> {
    let planted_sc = &spec.scenario;
    if planted_sc.ring.is_none() && spec.runs > 0 {
        return Err(Error::config("collusion: planted runs need a [collusion.scenario.ring] table"));
    }
    let null_sc = crate::collusion::DetectionScenario { ring: None, ..planted_sc.clone() };
    let planted = (0..spec.runs)
        .into_par_iter()
        .map(|r| run_detection(planted_sc, run_key(seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let null = (0..spec.null_runs)
        .into_par_iter()
        .map(|r| run_detection(&null_sc, run_key(seed, spec.runs + r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CollusionOutcome { planted, null })
}

pub fn summarize_collusion(out: &CollusionOutcome) -> CollusionSummary {
    let recovered = out.planted.iter().filter(|o| o.jaccard >= 0.9).count();
    let false_flags = out.null.iter().filter(|o| !o.flagged.is_empty()).count();
    let rate = |k: usize, n: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    CollusionSummary {
        runs: out.planted.len(),
        recovered,
        recovery_rate: rate(recovered, out.planted.len()),
        null_runs: out.null.len(),
        false_flags,
        false_flag_rate: rate(false_flags, out.null.len()),
    }
}

// ---- writers ----

fn join_ids<T: ToString>(ids: &[T]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `recall.csv`: `scenario,protocol,trial,recall,spearman_nis_vtrue`.
pub fn write_recall_csv(path: &Path, outcomes: &[ScenarioOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "protocol", "trial", "recall", "spearman_nis_vtrue"])?;
    for o in outcomes {
        for t in &o.trials {
            w.write_record([
                o.summary.name.as_str(),
                o.summary.protocol.as_str(),
                &t.trial.to_string(),
                &t.recall.to_string(),
                &opt(t.spearman_nis_vtrue),
            ])?;
        }
    }
    flush(w, path)
}

/// `ablation.csv`: one row per pick, one column of mean gems per pool.
pub fn write_ablation_csv(path: &Path, a: &AblationOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["pick".to_string()];
    header.extend(a.pools.iter().cloned());
    w.write_record(&header)?;
    for (i, pick) in a.picks.iter().enumerate() {
        let mut rec = vec![pick.to_string()];
        rec.extend(a.mean_gems[i].iter().map(|g| g.to_string()));
        w.write_record(&rec)?;
    }
    flush(w, path)
}

/// `ablation_trials.csv`: `pick,pool,trial,gems_found`.
pub fn write_ablation_trials_csv(path: &Path, a: &AblationOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pick", "pool", "trial", "gems_found"])?;
    for (i, pick) in a.picks.iter().enumerate() {
        for (j, pool) in a.pools.iter().enumerate() {
            for (t, g) in a.gems[i][j].iter().enumerate() {
                w.write_record([pick.to_string(), pool.clone(), t.to_string(), g.to_string()])?;
            }
        }
    }
    flush(w, path)
}

/// `cycles_runs.csv`: `cycles.csv` columns with a leading `run`.
pub fn write_cycles_runs_csv(path: &Path, runs: &[CalibrationRun]) -> Result<()> {
    let rows: Vec<(usize, &[CycleResult])> = runs.iter().enumerate().map(|(i, r)| (i, r.cycles.as_slice())).collect();
    crate::calibration::write_cycles_csv(path, &rows, true)
}

/// `detection.csv`: `run,planted_ring,flagged_set,jaccard,z_score`. Null runs
/// follow the planted runs and have an empty `planted_ring`. The reported
/// set is the flagged set closest to the planted ring (or the first one).
pub fn write_detection_csv(path: &Path, out: &CollusionOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "planted_ring", "flagged_set", "jaccard", "z_score"])?;
    for (run, o) in out.planted.iter().chain(&out.null).enumerate() {
        let best = o
            .flagged
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                crate::collusion::jaccard(&a.members, &o.planted)
                    .total_cmp(&crate::collusion::jaccard(&b.members, &o.planted))
                    .then(ib.cmp(ia))
            })
            .map(|(_, f)| f);
        w.write_record([
            run.to_string(),
            join_ids(&o.planted),
            best.map(|f| join_ids(&f.members)).unwrap_or_default(),
            o.jaccard.to_string(),
            best.map(|f| f.z_score.to_string()).unwrap_or_default(),
        ])?;
    }
    flush(w, path)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `ir_density.csv`: `x` and one density column per Beta scenario.
pub fn write_ir_density_csv(path: &Path, points: usize) -> Result<()> {
    let grid: Vec<f64> = (1..=points).map(|i| i as f64 / (points + 1) as f64).collect();
    let dists: Vec<IrDistribution> = IrDistribution::SCENARIOS.iter().filter(|d| d.beta_params().is_some()).cloned().collect();
    let cols = dists.iter().map(|d| distribution_density(d, &grid)).collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["x".to_string()];
    header.extend(dists.iter().map(|d| d.label()));
    w.write_record(&header)?;
    for (i, x) in grid.iter().enumerate() {
        let mut rec = vec![x.to_string()];
        rec.extend(cols.iter().map(|c| c[i].to_string()));
        w.write_record(&rec)?;
    }
    flush(w, path)
}

/// `recall_bars.csv` from a `recall.csv`: `scenario,protocol,trials,mean_recall,sd_recall`,
/// scenarios in first-appearance order.
pub fn write_recall_bars_csv(recall_csv: &Path, path: &Path) -> Result<()> {
    let mut r = csv::Reader::from_path(recall_csv)?;
    let headers = r.headers()?.clone();
    let expected = ["scenario", "protocol", "trial", "recall", "spearman_nis_vtrue"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::data(format!("{}: expected columns {}", recall_csv.display(), expected.join(","))));
    }
    let mut groups: Vec<(String, String, Vec<f64>)> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let recall: f64 = rec[3]
            .parse()
            .map_err(|_| Error::Parse { path: recall_csv.to_path_buf(), line: i + 2, message: format!("bad recall '{}'", &rec[3]) })?;
        match groups.iter_mut().find(|g| g.0 == rec[0]) {
            Some(g) => g.2.push(recall),
            None => groups.push((rec[0].to_string(), rec[1].to_string(), vec![recall])),
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scenario", "protocol", "trials", "mean_recall", "sd_recall"])?;
    for (name, protocol, xs) in groups {
        let (m, s) = mean_sd(&xs);
        w.write_record([name, protocol, xs.len().to_string(), m.to_string(), s.to_string()])?;
    }
    flush(w, path)
}

/// Creates `dir` (and parents).
pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}
