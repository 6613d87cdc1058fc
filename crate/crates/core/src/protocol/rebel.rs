//! Agent-based Impact Market. Investors scan a random slice of the
//! proceedings, keep the most attractive papers, evaluate them with
//! skill-dependent noise and spread their wallet with a softmax over the
//! observed values.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::investor::Investor;
use crate::protocol::apply_cap;
use crate::rng::{label, StreamKey};
use crate::scoring::InvestmentLedger;
use crate::universe::{Paper, PaperId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RebelConfig {
    pub n_scan: usize,
    pub n_pick: usize,
    pub wallet_size: f64,
    /// Softmax temperature.
    pub tau: f64,
    /// Evaluation noise is `Normal(0, noise_sigma0 · (1 − skill))`.
    pub noise_sigma0: f64,
    pub cap_per_paper: Option<f64>,
}

impl Default for RebelConfig {
    fn default() -> Self {
        RebelConfig {
            n_scan: 50,
            n_pick: 20,
            wallet_size: 100.0,
            tau: 1.0,
            noise_sigma0: 2.0,
            cap_per_paper: None,
        }
    }
}

impl RebelConfig {
    pub fn validate(&self, n_papers: usize) -> Result<()> {
        if !(1 <= self.n_pick && self.n_pick <= self.n_scan && self.n_scan <= n_papers) {
            return Err(Error::config(format!(
                "rebel: need 1 <= n_pick ({}) <= n_scan ({}) <= papers ({n_papers})",
                self.n_pick, self.n_scan
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("rebel: tau must be positive, got {}", self.tau)));
        }
        if !(self.noise_sigma0 >= 0.0 && self.noise_sigma0.is_finite()) {
            return Err(Error::config("rebel: noise_sigma0 must be non-negative"));
        }
        if !(self.wallet_size >= 0.0 && self.wallet_size.is_finite()) {
            return Err(Error::config("rebel: wallet_size must be non-negative"));
        }
        if let Some(cap) = self.cap_per_paper {
            if !(cap > 0.0) {
                return Err(Error::config("rebel: cap_per_paper must be positive"));
            }
        }
        Ok(())
    }
}

/// `skill · v_true + (1 − skill) · hype`.
pub fn attractiveness(investor: &Investor, paper: &Paper) -> f64 {
    let s = investor.accuracy();
    s * paper.v_true + (1.0 - s) * paper.hype
}

/// Scans `n_scan` papers uniformly without replacement and keeps the `n_pick`
/// most attractive, ties to the lower id. Returned in selection order.
pub fn discover<R: Rng + ?Sized>(investor: &Investor, papers: &[Paper], cfg: &RebelConfig, rng: &mut R) -> Vec<PaperId> {
    let mut scanned: Vec<(f64, PaperId)> = rand::seq::index::sample(rng, papers.len(), cfg.n_scan)
        .into_iter()
        .map(|i| (attractiveness(investor, &papers[i]), papers[i].id))
        .collect();
    scanned.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scanned.truncate(cfg.n_pick);
    scanned.into_iter().map(|(_, id)| id).collect()
}

/// Observed value `v_true + ε`. A zero noise scale returns `v_true` without drawing.
pub fn evaluate<R: Rng + ?Sized>(investor: &Investor, paper: &Paper, cfg: &RebelConfig, rng: &mut R) -> f64 {
    let sigma = cfg.noise_sigma0 * (1.0 - investor.accuracy());
    if sigma <= 0.0 {
        return paper.v_true;
    }
    paper.v_true + Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
}

/// Softmax split of `wallet` with temperature `tau`, max-subtracted.
pub fn softmax_allocation(v_obs: &[f64], wallet: f64, tau: f64, cap: Option<f64>) -> Result<Vec<f64>> {
    if v_obs.is_empty() {
        return Err(Error::data("softmax: empty portfolio"));
    }
    let max = v_obs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v_obs.iter().map(|v| ((v - max) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    let mut alloc: Vec<f64> = exps.iter().map(|e| wallet * e / z).collect();
    if let Some(cap) = cap {
        apply_cap(&mut alloc, cap);
    }
    Ok(alloc)
}

pub fn allocate_softmax(v_obs: &[f64], cfg: &RebelConfig) -> Result<Vec<f64>> {
    softmax_allocation(v_obs, cfg.wallet_size, cfg.tau, cfg.cap_per_paper)
}

/// Part of a wallet an investor commits to fixed targets before the honest
/// discover/evaluate/allocate pass (collusion rings use this).
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatedSpend {
    pub fraction: f64,
    pub targets: Vec<PaperId>,
}

/// Honest investment with an optional coordinated slice. The coordinated
/// slice is spread uniformly over its targets, clamped at the cap with the
/// clamped excess returned to the honest budget. With `fraction = 0` the
/// draws and the result match a plain honest investor exactly.
pub fn invest<R: Rng + ?Sized>(
    investor: &Investor,
    papers: &[Paper],
    cfg: &RebelConfig,
    coordinated: Option<&CoordinatedSpend>,
    rng: &mut R,
) -> Result<Vec<(PaperId, f64)>> {
    let wallet = cfg.wallet_size;
    let mut fixed: Vec<(PaperId, f64)> = Vec::new();
    let mut honest_budget = wallet;
    if let Some(c) = coordinated.filter(|c| c.fraction > 0.0 && !c.targets.is_empty()) {
        let mut per = c.fraction * wallet / c.targets.len() as f64;
        if let Some(cap) = cfg.cap_per_paper {
            per = per.min(cap);
        }
        fixed = c.targets.iter().map(|&p| (p, per)).collect();
        honest_budget = wallet - per * c.targets.len() as f64;
    }

    let portfolio = discover(investor, papers, cfg, rng);
    let v_obs: Vec<f64> = portfolio.iter().map(|&p| evaluate(investor, &papers[p as usize], cfg, rng)).collect();
    let honest = softmax_allocation(&v_obs, honest_budget, cfg.tau, cfg.cap_per_paper)?;

    if fixed.is_empty() {
        return Ok(portfolio.into_iter().zip(honest).collect());
    }
    let mut merged: std::collections::BTreeMap<PaperId, f64> = std::collections::BTreeMap::new();
    for (p, t) in fixed.into_iter().chain(portfolio.into_iter().zip(honest)) {
        *merged.entry(p).or_insert(0.0) += t;
    }
    let (ids, mut tokens): (Vec<PaperId>, Vec<f64>) = merged.into_iter().unzip();
    if let Some(cap) = cfg.cap_per_paper {
        apply_cap(&mut tokens, cap);
    }
    Ok(ids.into_iter().zip(tokens).collect())
}

/// One agent-based cycle. Investor `i` draws from `key/REBEL/i`, so the result
/// does not depend on how investors are scheduled across threads.
pub fn run_rebel_im(papers: &[Paper], investors: &[Investor], cfg: &RebelConfig, key: StreamKey) -> Result<InvestmentLedger> {
    run_rebel_im_with(papers, investors, cfg, key, |_| None)
}

pub fn run_rebel_im_with<F>(
    papers: &[Paper],
    investors: &[Investor],
    cfg: &RebelConfig,
    key: StreamKey,
    coordination: F,
) -> Result<InvestmentLedger>
where
    F: Fn(&Investor) -> Option<CoordinatedSpend> + Sync,
{
    cfg.validate(papers.len())?;
    let allocations: Vec<Vec<(PaperId, f64)>> = investors
        .par_iter()
        .map(|inv| {
            let mut rng = key.path(&[label::REBEL, inv.id as u64]).rng();
            let spend = coordination(inv);
            invest(inv, papers, cfg, spend.as_ref(), &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut ledger = InvestmentLedger::new();
    for (inv, alloc) in investors.iter().zip(&allocations) {
        ledger.extend_investor(inv.id, alloc);
    }
    Ok(ledger)
}
