//! Long-term calibration: simulated impact outcomes, portfolio scoring and
//! multi-cycle Investor-Rating dynamics.

use std::collections::VecDeque;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::collusion::{recruit_ring, tag_ring_papers, RingConfig, RingRoster};
use crate::error::{Error, Result};
use crate::investor::{generate_pool, Investor, InvestorId, IrInit, PoolConfig};
use crate::protocol::rebel::{run_rebel_im_with, RebelConfig};
use crate::rng::{label, StreamKey};
use crate::scoring::{average_ranks, gem_recall, nis, rank, spearman, InvestmentLedger};
use crate::universe::{generate_universe, Paper, UniverseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MvisMode {
    TruthPlusNoise,
}

/// How realized impact is simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvisModel {
    pub sigma_mvis: f64,
    pub mode: MvisMode,
}

impl Default for MvisModel {
    fn default() -> Self {
        MvisModel { sigma_mvis: 1.0, mode: MvisMode::TruthPlusNoise }
    }
}

/// `v_true + Normal(0, sigma_mvis)` per paper, indexed by paper id.
pub fn simulate_mvis<R: Rng + ?Sized>(papers: &[Paper], model: &MvisModel, rng: &mut R) -> Result<Vec<f64>> {
    if !(model.sigma_mvis >= 0.0 && model.sigma_mvis.is_finite()) {
        return Err(Error::config(format!("mvis: sigma_mvis must be non-negative, got {}", model.sigma_mvis)));
    }
    match model.mode {
        MvisMode::TruthPlusNoise => {
            if model.sigma_mvis == 0.0 {
                return Ok(papers.iter().map(|p| p.v_true).collect());
            }
            let noise = Normal::new(0.0, model.sigma_mvis).expect("finite sigma");
            Ok(papers.iter().map(|p| p.v_true + noise.sample(rng)).collect())
        }
    }
}

/// Percentile of each paper's MVIS: `(average rank − 1) / (n − 1)`, so the
/// lowest paper sits at 0 and the highest at 1. A single paper gets 1.
pub fn mvis_percentiles(mvis: &[f64]) -> Vec<f64> {
    if mvis.len() == 1 {
        return vec![1.0];
    }
    let denom = (mvis.len() - 1) as f64;
    average_ranks(mvis).into_iter().map(|r| (r - 1.0) / denom).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentMetric {
    /// Token-weighted mean MVIS percentile of the invested papers.
    MvisPercentile,
}

/// Alignment of one investor's portfolio, or `None` if they hold nothing.
pub fn portfolio_alignment(
    investor: InvestorId,
    ledger: &InvestmentLedger,
    percentiles: &[f64],
    metric: AlignmentMetric,
) -> Result<Option<f64>> {
    let mut tokens = 0.0;
    let mut acc = 0.0;
    for r in ledger.rows().iter().filter(|r| r.investor == investor) {
        let pct = percentiles
            .get(r.paper as usize)
            .ok_or_else(|| Error::data(format!("alignment: unknown paper {}", r.paper)))?;
        match metric {
            AlignmentMetric::MvisPercentile => acc += r.tokens * pct,
        }
        tokens += r.tokens;
    }
    Ok((tokens > 0.0).then(|| acc / tokens))
}

/// Alignment for every investor id in `0..n_investors` in one ledger pass.
fn alignments(n_investors: usize, ledger: &InvestmentLedger, percentiles: &[f64]) -> Vec<Option<f64>> {
    let mut tokens = vec![0.0; n_investors];
    let mut acc = vec![0.0; n_investors];
    for r in ledger.rows() {
        let i = r.investor as usize;
        tokens[i] += r.tokens;
        acc[i] += r.tokens * percentiles[r.paper as usize];
    }
    tokens.into_iter().zip(acc).map(|(t, a)| (t > 0.0).then(|| a / t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Compare alignment against `alignment_threshold` directly.
    Absolute,
    /// Use the `alignment_threshold` quantile of this cycle's alignments.
    CohortQuantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationRule {
    pub up_factor: f64,
    pub down_factor: f64,
    /// Pull toward 1.0 applied after every update.
    pub decay_lambda: f64,
    pub ir_floor: f64,
    pub ir_cap: f64,
    pub alignment_threshold: f64,
    pub threshold_mode: ThresholdMode,
    pub metric: AlignmentMetric,
}

impl Default for CalibrationRule {
    fn default() -> Self {
        CalibrationRule {
            up_factor: 1.1,
            down_factor: 0.9,
            decay_lambda: 0.05,
            ir_floor: 0.05,
            ir_cap: 2.0,
            alignment_threshold: 0.65,
            threshold_mode: ThresholdMode::Absolute,
            metric: AlignmentMetric::MvisPercentile,
        }
    }
}

impl CalibrationRule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.down_factor && self.down_factor < 1.0 && 1.0 < self.up_factor && self.up_factor.is_finite()) {
            return Err(Error::config(format!(
                "calibration: need 0 < down_factor < 1 < up_factor, got {} / {}",
                self.down_factor, self.up_factor
            )));
        }
        if !(0.0..1.0).contains(&self.decay_lambda) {
            return Err(Error::config(format!("calibration: decay_lambda must lie in [0, 1), got {}", self.decay_lambda)));
        }
        if !(self.ir_floor > 0.0 && self.ir_floor < self.ir_cap) {
            return Err(Error::config("calibration: need 0 < ir_floor < ir_cap"));
        }
        if !(0.0..=1.0).contains(&self.alignment_threshold) {
            return Err(Error::config("calibration: alignment_threshold must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Threshold for one cycle given every investor's alignment.
    pub fn threshold(&self, alignments: &[Option<f64>]) -> f64 {
        match self.threshold_mode {
            ThresholdMode::Absolute => self.alignment_threshold,
            ThresholdMode::CohortQuantile => {
                let mut xs: Vec<f64> = alignments.iter().flatten().copied().collect();
                if xs.is_empty() {
                    return self.alignment_threshold;
                }
                xs.sort_by(f64::total_cmp);
                let pos = self.alignment_threshold * (xs.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo])
            }
        }
    }
}

/// Reward or penalty, clamp, then decay toward 1.0. `None` applies decay only.
pub fn update_ir(ir: f64, alignment: Option<f64>, threshold: f64, rule: &CalibrationRule) -> f64 {
    let scaled = match alignment {
        Some(a) if a >= threshold => (ir * rule.up_factor).clamp(rule.ir_floor, rule.ir_cap),
        Some(_) => (ir * rule.down_factor).clamp(rule.ir_floor, rule.ir_cap),
        None => ir,
    };
    scaled + rule.decay_lambda * (1.0 - scaled)
}

/// Multi-cycle experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub n_cycles: usize,
    /// A ledger placed in cycle `c` is scored at the end of cycle `c + lag − 1`.
    pub lag: usize,
    pub top_slots: usize,
    pub universe: UniverseConfig,
    pub pool: PoolConfig,
    pub rebel: RebelConfig,
    pub rule: CalibrationRule,
    pub mvis: MvisModel,
    pub ring: Option<RingConfig>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            n_cycles: 10,
            lag: 1,
            top_slots: 120,
            universe: UniverseConfig::default(),
            pool: PoolConfig { initial_ir: IrInit::Fixed(1.0), ..Default::default() },
            rebel: RebelConfig::default(),
            rule: CalibrationRule::default(),
            mvis: MvisModel::default(),
            ring: None,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cycles == 0 {
            return Err(Error::config("calibration: n_cycles must be at least 1"));
        }
        if self.lag == 0 {
            return Err(Error::config("calibration: lag must be at least 1"));
        }
        self.universe.validate()?;
        self.pool.validate()?;
        self.rebel.validate(self.universe.market_size)?;
        self.rule.validate()?;
        if let Some(r) = &self.ring {
            r.validate()?;
        }
        Ok(())
    }
}

/// Metrics recorded at the end of one cycle, after that cycle's IR update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    /// 1-based.
    pub cycle: usize,
    pub recall: f64,
    pub ir: Vec<f64>,
    pub spearman_ir_skill: Option<f64>,
    pub ring_mean_ir: Option<f64>,
    pub nis_mvis_spearman: Option<f64>,
}

/// One multi-cycle run: the pool's latent skills, the ring roster and the
/// per-cycle metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRun {
    pub skill: Vec<f64>,
    pub ring_members: Vec<InvestorId>,
    pub cycles: Vec<CycleResult>,
}

impl CalibrationRun {
    /// Mean IR after `cycle` (1-based; 0 means the initial IR) of the honest
    /// investors in the top `fraction` by skill.
    pub fn top_skill_mean_ir(&self, cycle: usize, fraction: f64, initial_ir: f64) -> f64 {
        let mut honest: Vec<usize> = (0..self.skill.len())
            .filter(|i| !self.ring_members.contains(&(*i as InvestorId)))
            .collect();
        honest.sort_by(|&a, &b| self.skill[b].total_cmp(&self.skill[a]).then(a.cmp(&b)));
        let k = ((honest.len() as f64 * fraction).ceil() as usize).clamp(1, honest.len().max(1));
        let top = &honest[..k.min(honest.len())];
        let ir = |i: usize| if cycle == 0 { initial_ir } else { self.cycles[cycle - 1].ir[i] };
        top.iter().map(|&i| ir(i)).sum::<f64>() / top.len() as f64
    }
}

/// Runs `n_cycles` cycles on one pool. Each cycle draws a fresh universe from
/// `key/CYCLE/c`; investors keep their latent skill, while NIS uses the
/// current IR. Ring members, if any, are recruited once from `key/RING`.
pub fn run_cycles(cfg: &CalibrationConfig, key: StreamKey) -> Result<CalibrationRun> {
    cfg.validate()?;
    let mut pool = generate_pool(&cfg.pool, &mut key.child(label::POOL).rng())?;
    let members = match &cfg.ring {
        Some(r) => Some(recruit_ring(&mut pool, r, 0, &mut key.child(label::RING).rng())?),
        None => None,
    };
    let skills: Vec<f64> = pool.iter().map(|i| i.skill).collect();
    let mut pending: VecDeque<(InvestmentLedger, Vec<f64>)> = VecDeque::new();
    let mut results = Vec::with_capacity(cfg.n_cycles);

    for c in 1..=cfg.n_cycles {
        let ck = key.path(&[label::CYCLE, c as u64]);
        let mut papers = generate_universe(&cfg.universe, &mut ck.child(label::UNIVERSE).rng())?;
        let roster: Option<RingRoster> = match (&cfg.ring, &members) {
            (Some(r), Some(m)) => Some(tag_ring_papers(m, &mut papers, r, 0, &mut ck.child(label::RING).rng())?),
            _ => None,
        };
        let ledger = run_rebel_im_with(&papers, &pool, &cfg.rebel, ck, |inv| {
            roster.as_ref().and_then(|r| r.coordinated_spend(inv))
        })?;
        let scores = nis(&ledger, &pool, &papers)?;
        let recall = gem_recall(&rank(&scores), &papers, cfg.top_slots)?;
        let mvis = simulate_mvis(&papers, &cfg.mvis, &mut ck.child(label::MVIS).rng())?;
        let nis_mvis_spearman = spearman(&scores, &mvis).ok();

        // a ledger is judged against the MVIS of the universe it was placed in
        pending.push_back((ledger, mvis_percentiles(&mvis)));
        let align: Vec<Option<f64>> = if pending.len() >= cfg.lag {
            let (due, pct) = pending.pop_front().expect("non-empty queue");
            alignments(pool.len(), &due, &pct)
        } else {
            vec![None; pool.len()]
        };
        let thr = cfg.rule.threshold(&align);
        for (inv, a) in pool.iter_mut().zip(&align) {
            inv.ir = update_ir(inv.ir, *a, thr, &cfg.rule);
        }

        let ir: Vec<f64> = pool.iter().map(|i| i.ir).collect();
        results.push(CycleResult {
            cycle: c,
            recall,
            spearman_ir_skill: spearman(&ir, &skills).ok(),
            ring_mean_ir: members.as_ref().map(|m| mean_ir(&pool, m)),
            nis_mvis_spearman,
            ir,
        });
    }
    Ok(CalibrationRun {
        skill: skills,
        ring_members: members.unwrap_or_default(),
        cycles: results,
    })
}

fn mean_ir(pool: &[Investor], ids: &[InvestorId]) -> f64 {
    ids.iter().map(|&i| pool[i as usize].ir).sum::<f64>() / ids.len() as f64
}

/// Writes `cycles.csv`: `cycle,recall,spearman_ir_skill,ring_mean_ir,nis_mvis_spearman`.
/// Undefined statistics are left empty. With `run` set, a leading `run` column is added.
pub fn write_cycles_csv(path: &Path, runs: &[(usize, &[CycleResult])], with_run: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["cycle", "recall", "spearman_ir_skill", "ring_mean_ir", "nis_mvis_spearman"];
    if with_run {
        header.insert(0, "run");
    }
    w.write_record(&header)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for (run, cycles) in runs {
        for c in cycles.iter() {
            let mut rec = vec![
                c.cycle.to_string(),
                c.recall.to_string(),
                opt(c.spearman_ir_skill),
                opt(c.ring_mean_ir),
                opt(c.nis_mvis_spearman),
            ];
            if with_run {
                rec.insert(0, run.to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
