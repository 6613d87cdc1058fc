//! Net Invested Score, rankings, Gem Recall and rank-correlation diagnostics.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::investor::{Investor, InvestorId};
use crate::universe::{Paper, PaperId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub investor: InvestorId,
    pub paper: PaperId,
    pub tokens: f64,
}

/// Token allocations of one cycle. Each `(investor, paper)` pair appears at most once.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvestmentLedger {
    rows: Vec<LedgerRow>,
}

impl InvestmentLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Validates non-negative finite tokens and unique pairs.
    pub fn from_rows(rows: Vec<LedgerRow>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(rows.len());
        for r in &rows {
            if !(r.tokens >= 0.0 && r.tokens.is_finite()) {
                return Err(Error::data(format!(
                    "ledger: investor {} paper {} has invalid token amount {}",
                    r.investor, r.paper, r.tokens
                )));
            }
            if !seen.insert((r.investor, r.paper)) {
                return Err(Error::data(format!("ledger: duplicate pair (investor {}, paper {})", r.investor, r.paper)));
            }
        }
        Ok(InvestmentLedger { rows })
    }

    /// Appends one investor's allocation. Zero-token entries are skipped.
    pub(crate) fn extend_investor(&mut self, investor: InvestorId, alloc: &[(PaperId, f64)]) {
        self.rows.extend(
            alloc
                .iter()
                .filter(|(_, t)| *t > 0.0)
                .map(|&(paper, tokens)| LedgerRow { investor, paper, tokens }),
        );
    }

    /// Union of two ledgers; tokens of shared pairs are summed.
    pub fn merge(&self, other: &InvestmentLedger) -> InvestmentLedger {
        let mut acc: BTreeMap<(InvestorId, PaperId), f64> = BTreeMap::new();
        for r in self.rows.iter().chain(&other.rows) {
            *acc.entry((r.investor, r.paper)).or_insert(0.0) += r.tokens;
        }
        InvestmentLedger {
            rows: acc
                .into_iter()
                .map(|((investor, paper), tokens)| LedgerRow { investor, paper, tokens })
                .collect(),
        }
    }

    pub fn rows(&self) -> &[LedgerRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total tokens spent by each investor.
    pub fn spend_by_investor(&self) -> BTreeMap<InvestorId, f64> {
        let mut acc = BTreeMap::new();
        for r in &self.rows {
            *acc.entry(r.investor).or_insert(0.0) += r.tokens;
        }
        acc
    }

    /// Rows grouped by investor, in ledger order.
    pub fn by_investor(&self) -> BTreeMap<InvestorId, Vec<LedgerRow>> {
        let mut acc: BTreeMap<InvestorId, Vec<LedgerRow>> = BTreeMap::new();
        for r in &self.rows {
            acc.entry(r.investor).or_default().push(*r);
        }
        acc
    }
}

/// Eq. `NIS_p = sum_i T_ip * IR_i`, using each investor's current `ir`.
/// Returned vector is indexed by paper id; papers without rows score 0.
pub fn nis(ledger: &InvestmentLedger, investors: &[Investor], papers: &[Paper]) -> Result<Vec<f64>> {
    let ir: HashMap<InvestorId, f64> = investors.iter().map(|i| (i.id, i.ir)).collect();
    let mut scores = vec![0.0; papers.len()];
    for r in ledger.rows() {
        let weight = *ir
            .get(&r.investor)
            .ok_or_else(|| Error::data(format!("nis: unknown investor id {}", r.investor)))?;
        let slot = scores
            .get_mut(r.paper as usize)
            .ok_or_else(|| Error::data(format!("nis: unknown paper id {}", r.paper)))?;
        *slot += r.tokens * weight;
    }
    Ok(scores)
}

/// Paper ids by descending score, ties by ascending id.
pub fn rank(scores: &[f64]) -> Vec<PaperId> {
    let mut ids: Vec<PaperId> = (0..scores.len() as PaperId).collect();
    ids.sort_by(|&a, &b| {
        scores[b as usize]
            .total_cmp(&scores[a as usize])
            .then(a.cmp(&b))
    });
    ids
}

/// Fraction of gems among the first `top_slots` entries of `ranked`.
pub fn gem_recall(ranked: &[PaperId], papers: &[Paper], top_slots: usize) -> Result<f64> {
    if top_slots > papers.len() || top_slots > ranked.len() {
        return Err(Error::config(format!(
            "recall: top_slots {top_slots} exceeds ranked list length {}",
            ranked.len().min(papers.len())
        )));
    }
    recall_of_set(&ranked[..top_slots], papers)
}

/// Fraction of gems contained in an unranked accept set.
pub fn recall_of_set(selected: &[PaperId], papers: &[Paper]) -> Result<f64> {
    let gems = papers.iter().filter(|p| p.is_gem()).count();
    if gems == 0 {
        return Err(Error::Degenerate("recall: universe contains no gems".into()));
    }
    let mut found = 0usize;
    for &id in selected {
        let p = papers
            .get(id as usize)
            .ok_or_else(|| Error::data(format!("recall: unknown paper id {id}")))?;
        if p.is_gem() {
            found += 1;
        }
    }
    Ok(found as f64 / gems as f64)
}

/// Ranks starting at 1, ties receive the average of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::data(format!("correlation: length mismatch {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::data("correlation: need at least two observations"));
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(Error::Degenerate("correlation: constant input".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("correlation: constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average-rank ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::data(format!("spearman: length mismatch {} vs {}", xs.len(), ys.len())));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Writes the ledger as `trial,investor_id,paper_id,tokens`.
pub fn write_ledger_csv(path: &Path, ledgers: &[(usize, &InvestmentLedger)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "investor_id", "paper_id", "tokens"])?;
    for (trial, ledger) in ledgers {
        for r in ledger.rows() {
            w.write_record([trial.to_string(), r.investor.to_string(), r.paper.to_string(), r.tokens.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
