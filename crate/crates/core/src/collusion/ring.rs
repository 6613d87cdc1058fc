//! Ring injection: recruiting members from a pool, tagging their papers and
//! turning the roster into coordinated spends for the rebel model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::investor::{Investor, InvestorId};
use crate::protocol::rebel::CoordinatedSpend;
use crate::universe::{Paper, PaperId, TrueClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingConfig {
    pub ring_size: usize,
    pub papers_per_member: usize,
    /// Share of each member's wallet (and citation effort) pointed at the ring.
    pub coordination: f64,
    pub target_class: TrueClass,
}

impl Default for RingConfig {
    fn default() -> Self {
        RingConfig {
            ring_size: 10,
            papers_per_member: 1,
            coordination: 1.0,
            target_class: TrueClass::Mid60,
        }
    }
}

impl RingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ring_size < 2 {
            return Err(Error::config(format!("ring: ring_size must be at least 2, got {}", self.ring_size)));
        }
        if self.papers_per_member == 0 {
            return Err(Error::config("ring: papers_per_member must be positive"));
        }
        if !(0.0..=1.0).contains(&self.coordination) {
            return Err(Error::config(format!("ring: coordination must lie in [0, 1], got {}", self.coordination)));
        }
        Ok(())
    }
}

/// Members of one ring and the papers each of them authored this cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingRoster {
    pub ring_id: u32,
    pub coordination: f64,
    /// Ascending member ids.
    pub members: Vec<InvestorId>,
    /// `papers[k]` belongs to `members[k]`.
    pub papers: Vec<Vec<PaperId>>,
}

impl RingRoster {
    pub fn is_member(&self, id: InvestorId) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    /// Every ring paper, ascending.
    pub fn ring_papers(&self) -> Vec<PaperId> {
        let mut all: Vec<PaperId> = self.papers.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Papers of the other members.
    pub fn targets_of(&self, id: InvestorId) -> Vec<PaperId> {
        let mut out: Vec<PaperId> = self
            .members
            .iter()
            .zip(&self.papers)
            .filter(|(&m, _)| m != id)
            .flat_map(|(_, ps)| ps.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// The coordinated slice for `investor`, or `None` for non-members.
    pub fn coordinated_spend(&self, investor: &Investor) -> Option<CoordinatedSpend> {
        if !self.is_member(investor.id) {
            return None;
        }
        Some(CoordinatedSpend {
            fraction: self.coordination,
            targets: self.targets_of(investor.id),
        })
    }
}

/// Picks `ring_size` members uniformly from the pool and stamps their `ring_id`.
pub fn recruit_ring<R: Rng + ?Sized>(
    pool: &mut [Investor],
    cfg: &RingConfig,
    ring_id: u32,
    rng: &mut R,
) -> Result<Vec<InvestorId>> {
    cfg.validate()?;
    if cfg.ring_size > pool.len() {
        return Err(Error::config(format!(
            "ring: ring_size {} exceeds the pool of {} investors",
            cfg.ring_size,
            pool.len()
        )));
    }
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, pool.len(), cfg.ring_size).into_vec();
    picked.sort_unstable();
    for &i in &picked {
        pool[i].ring_id = Some(ring_id);
    }
    Ok(picked.into_iter().map(|i| pool[i].id).collect())
}

/// Hands each member `papers_per_member` papers of the target class, drawn
/// uniformly, and makes the member their sole author.
pub fn tag_ring_papers<R: Rng + ?Sized>(
    members: &[InvestorId],
    papers: &mut [Paper],
    cfg: &RingConfig,
    ring_id: u32,
    rng: &mut R,
) -> Result<RingRoster> {
    cfg.validate()?;
    let candidates: Vec<PaperId> = papers
        .iter()
        .filter(|p| p.true_class == cfg.target_class)
        .map(|p| p.id)
        .collect();
    let needed = members.len() * cfg.papers_per_member;
    if needed > candidates.len() {
        return Err(Error::config(format!(
            "ring: {needed} ring papers requested but only {} {} papers exist",
            candidates.len(),
            cfg.target_class
        )));
    }
    let mut members = members.to_vec();
    members.sort_unstable();
    let chosen = rand::seq::index::sample(rng, candidates.len(), needed).into_vec();
    let mut roster_papers = Vec::with_capacity(members.len());
    for (k, &m) in members.iter().enumerate() {
        let mut own: Vec<PaperId> = chosen[k * cfg.papers_per_member..(k + 1) * cfg.papers_per_member]
            .iter()
            .map(|&c| candidates[c])
            .collect();
        own.sort_unstable();
        for &p in &own {
            papers[p as usize].authors = vec![m];
        }
        roster_papers.push(own);
    }
    Ok(RingRoster {
        ring_id,
        coordination: cfg.coordination,
        members,
        papers: roster_papers,
    })
}

/// Recruits a ring and tags its papers in one step.
pub fn inject_ring<R: Rng + ?Sized>(
    pool: &mut [Investor],
    papers: &mut [Paper],
    cfg: &RingConfig,
    rng: &mut R,
) -> Result<RingRoster> {
    let members = recruit_ring(pool, cfg, 0, rng)?;
    tag_ring_papers(&members, papers, cfg, 0, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::investor::{generate_pool, PoolConfig};
    use crate::protocol::rebel::{run_rebel_im, run_rebel_im_with, RebelConfig};
    use crate::rng::StreamKey;
    use crate::scoring::nis;
    use crate::universe::{generate_universe, UniverseConfig};

    fn setup(seed: u64) -> (Vec<Investor>, Vec<Paper>) {
        let key = StreamKey::root(seed);
        let papers = generate_universe(&UniverseConfig::default(), &mut key.child(1).rng()).unwrap();
        let pool = generate_pool(&PoolConfig::default(), &mut key.child(2).rng()).unwrap();
        (pool, papers)
    }

    #[test]
    fn roster_shape() {
        let (mut pool, mut papers) = setup(1);
        let roster = inject_ring(&mut pool, &mut papers, &RingConfig::default(), &mut StreamKey::root(3).rng()).unwrap();
        assert_eq!(roster.members.len(), 10);
        assert_eq!(pool.iter().filter(|i| i.ring_id == Some(0)).count(), 10);
        for (m, ps) in roster.members.iter().zip(&roster.papers) {
            assert_eq!(ps.len(), 1);
            assert_eq!(papers[ps[0] as usize].authors, vec![*m]);
            assert_eq!(papers[ps[0] as usize].true_class, TrueClass::Mid60);
        }
        assert_eq!(roster.targets_of(roster.members[0]).len(), 9);
    }

    #[test]
    fn infeasible_sizes_rejected() {
        let (mut pool, mut papers) = setup(1);
        let big = RingConfig { ring_size: 201, ..Default::default() };
        assert!(matches!(inject_ring(&mut pool, &mut papers, &big, &mut StreamKey::root(3).rng()), Err(Error::Config(_))));
        let greedy = RingConfig { ring_size: 200, papers_per_member: 2, ..Default::default() };
        assert!(matches!(inject_ring(&mut pool, &mut papers, &greedy, &mut StreamKey::root(3).rng()), Err(Error::Config(_))));
        let loner = RingConfig { ring_size: 1, ..Default::default() };
        assert!(loner.validate().is_err());
    }

    #[test]
    fn zero_coordination_matches_honest_run() {
        let (mut pool, mut papers) = setup(4);
        let cfg = RingConfig { coordination: 0.0, ..Default::default() };
        let roster = inject_ring(&mut pool, &mut papers, &cfg, &mut StreamKey::root(5).rng()).unwrap();
        let key = StreamKey::root(6);
        let honest = run_rebel_im(&papers, &pool, &RebelConfig::default(), key).unwrap();
        let ringed = run_rebel_im_with(&papers, &pool, &RebelConfig::default(), key, |i| roster.coordinated_spend(i)).unwrap();
        assert_eq!(honest, ringed);
    }

    #[test]
    fn full_coordination_spreads_wallet_evenly() {
        let (mut pool, mut papers) = setup(7);
        let roster = inject_ring(&mut pool, &mut papers, &RingConfig::default(), &mut StreamKey::root(8).rng()).unwrap();
        let ledger = run_rebel_im_with(&papers, &pool, &RebelConfig::default(), StreamKey::root(9), |i| roster.coordinated_spend(i)).unwrap();
        let m = roster.members[0];
        let rows: Vec<_> = ledger.rows().iter().filter(|r| r.investor == m).collect();
        assert_eq!(rows.len(), 9);
        for r in rows {
            assert!((r.tokens - 100.0 / 9.0).abs() < 1e-9);
        }
    }

    #[test]
    fn capped_coordination_returns_excess_to_honest_budget() {
        let (mut pool, mut papers) = setup(7);
        let roster = inject_ring(&mut pool, &mut papers, &RingConfig::default(), &mut StreamKey::root(8).rng()).unwrap();
        let cfg = RebelConfig { cap_per_paper: Some(10.0), ..Default::default() };
        let ledger = run_rebel_im_with(&papers, &pool, &cfg, StreamKey::root(9), |i| roster.coordinated_spend(i)).unwrap();
        let m = roster.members[0];
        let targets = roster.targets_of(m);
        let spent: f64 = ledger.rows().iter().filter(|r| r.investor == m).map(|r| r.tokens).sum();
        assert!((spent - 100.0).abs() < 1e-9);
        for r in ledger.rows().iter().filter(|r| r.investor == m) {
            assert!(r.tokens <= 10.0 + 1e-9);
            if targets.contains(&r.paper) {
                assert!(r.tokens >= 10.0 - 1e-9);
            }
        }
    }

    #[test]
    fn ring_papers_gain_nis_in_paired_runs() {
        for seed in 0..20 {
            let (mut pool, mut papers) = setup(100 + seed);
            let roster = inject_ring(&mut pool, &mut papers, &RingConfig::default(), &mut StreamKey::root(seed).rng()).unwrap();
            let key = StreamKey::root(1000 + seed);
            let honest = run_rebel_im(&papers, &pool, &RebelConfig::default(), key).unwrap();
            let ringed = run_rebel_im_with(&papers, &pool, &RebelConfig::default(), key, |i| roster.coordinated_spend(i)).unwrap();
            let a = nis(&honest, &pool, &papers).unwrap();
            let b = nis(&ringed, &pool, &papers).unwrap();
            let sum = |s: &[f64]| roster.ring_papers().iter().map(|&p| s[p as usize]).sum::<f64>();
            assert!(sum(&b) > sum(&a), "seed {seed}");
        }
    }
}
