//! Current Protocol baseline: lazy random selection, then "turf war" rejections
//! down to the acceptance target.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::universe::{Paper, PaperId};

/// How the rejection phase picks its victims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionRule {
    /// Round-robin over Top20, Mid60, Bot20: equal absolute removals per class.
    Even,
    /// Uniform over the selected set, i.e. removals proportional to class share.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpConfig {
    pub select_fraction: f64,
    pub accept_target: usize,
    pub rejection: RejectionRule,
}

impl Default for CpConfig {
    fn default() -> Self {
        CpConfig {
            select_fraction: 0.40,
            accept_target: 200,
            rejection: RejectionRule::Even,
        }
    }
}

impl CpConfig {
    pub fn selected_count(&self, n_papers: usize) -> usize {
        ((n_papers as f64) * self.select_fraction).round() as usize
    }

    pub fn validate(&self, n_papers: usize) -> Result<()> {
        if !(self.select_fraction > 0.0 && self.select_fraction <= 1.0) {
            return Err(Error::config(format!("cp: select_fraction must lie in (0, 1], got {}", self.select_fraction)));
        }
        let selected = self.selected_count(n_papers);
        if self.accept_target > selected {
            return Err(Error::config(format!(
                "cp: accept_target {} exceeds the {} papers selected in the lottery (the model only rejects)",
                self.accept_target, selected
            )));
        }
        Ok(())
    }
}

/// Returns the accepted paper ids in ascending order.
pub fn run_cp<R: Rng + ?Sized>(papers: &[Paper], cfg: &CpConfig, rng: &mut R) -> Result<Vec<PaperId>> {
    cfg.validate(papers.len())?;
    let n_select = cfg.selected_count(papers.len());
    let mut selected: Vec<PaperId> = rand::seq::index::sample(rng, papers.len(), n_select)
        .into_iter()
        .map(|i| papers[i].id)
        .collect();
    selected.sort_unstable();
    let to_reject = selected.len() - cfg.accept_target;

    let mut accepted = match cfg.rejection {
        RejectionRule::Proportional => {
            selected.shuffle(rng);
            selected.truncate(cfg.accept_target);
            selected
        }
        RejectionRule::Even => {
            let mut bins: [Vec<PaperId>; 3] = Default::default();
            for &id in &selected {
                bins[papers[id as usize].true_class.index()].push(id);
            }
            let mut turn = 0usize;
            for _ in 0..to_reject {
                // spill to the next non-empty class in cycle order
                let class = (0..3)
                    .map(|k| (turn + k) % 3)
                    .find(|&c| !bins[c].is_empty())
                    .expect("fewer selected papers than rejections");
                let victim = rng.gen_range(0..bins[class].len());
                bins[class].swap_remove(victim);
                turn = (turn + 1) % 3;
            }
            bins.into_iter().flatten().collect()
        }
    };
    accepted.sort_unstable();
    Ok(accepted)
}

/// Rejections each class receives under the even rule when no class runs dry.
pub fn even_rejection_quota(to_reject: usize) -> [usize; 3] {
    let base = to_reject / 3;
    let extra = to_reject % 3;
    let mut q = [base; 3];
    for slot in q.iter_mut().take(extra) {
        *slot += 1;
    }
    q
}
