//! Passive Impact Market: a fixed-degree bipartite reviewer assignment,
//! probabilistic bin classification and weight-normalized token allocation.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::investor::{Investor, InvestorId};
use crate::protocol::apply_cap;
use crate::rng::{label, StreamKey};
use crate::scoring::InvestmentLedger;
use crate::universe::{Paper, PaperId, TrueClass};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassWeights {
    pub top: f64,
    pub mid: f64,
    pub bot: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights { top: 2.5, mid: 1.5, bot: 1.0 }
    }
}

impl ClassWeights {
    pub fn weight(&self, class: TrueClass) -> f64 {
        match class {
            TrueClass::Top20 => self.top,
            TrueClass::Mid60 => self.mid,
            TrueClass::Bot20 => self.bot,
        }
    }
}

/// Distribution of the wrong label when a reviewer misclassifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Misclassification {
    /// Each of the two wrong classes with probability 1/2.
    Uniform,
    /// A neighbouring class is twice as likely as the far one (Top <-> Bot).
    AdjacentBiased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassiveImConfig {
    pub reviews_per_paper: usize,
    pub class_weights: ClassWeights,
    pub wallet_size: f64,
    pub misclassification: Misclassification,
    /// Per-paper token cap; `None` disables it.
    pub cap_per_paper: Option<f64>,
}

impl Default for PassiveImConfig {
    fn default() -> Self {
        PassiveImConfig {
            reviews_per_paper: 10,
            class_weights: ClassWeights::default(),
            wallet_size: 100.0,
            misclassification: Misclassification::Uniform,
            cap_per_paper: None,
        }
    }
}

impl PassiveImConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reviews_per_paper == 0 {
            return Err(Error::config("passive: reviews_per_paper must be at least 1"));
        }
        let w = self.class_weights;
        if !(w.bot > 0.0 && w.mid > w.bot && w.top > w.mid) {
            return Err(Error::config(format!(
                "passive: class weights must be positive and strictly decreasing top > mid > bot, got {w:?}"
            )));
        }
        if !(self.wallet_size >= 0.0 && self.wallet_size.is_finite()) {
            return Err(Error::config("passive: wallet_size must be non-negative"));
        }
        if let Some(cap) = self.cap_per_paper {
            if !(cap > 0.0) {
                return Err(Error::config("passive: cap_per_paper must be positive"));
            }
        }
        Ok(())
    }
}

/// Reviewer-to-paper edges of a bipartite graph with fixed degree on both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub edges: Vec<(InvestorId, PaperId)>,
}

impl Assignment {
    /// Assigned papers per investor, each list in ascending paper id.
    pub fn by_investor(&self) -> HashMap<InvestorId, Vec<PaperId>> {
        let mut m: HashMap<InvestorId, Vec<PaperId>> = HashMap::new();
        for &(i, p) in &self.edges {
            m.entry(i).or_default().push(p);
        }
        for v in m.values_mut() {
            v.sort_unstable();
        }
        m
    }
}

const MAX_REPAIR_ROUNDS: usize = 200;
const MAX_RESTARTS: usize = 20;

/// Seeded stub matching. Each paper gets `k` stubs and each investor
/// `|papers|·k / |investors|`; stubs are paired at random and conflicting
/// edges (duplicate pair, or an investor reviewing their own paper) are
/// repaired by swapping paper endpoints with random other edges.
pub fn build_fixed_graph<R: Rng + ?Sized>(
    papers: &[Paper],
    investors: &[Investor],
    k: usize,
    rng: &mut R,
) -> Result<Assignment> {
    let (n, m) = (papers.len(), investors.len());
    if k == 0 || m == 0 {
        return Err(Error::config("graph: need k >= 1 and at least one investor"));
    }
    if k > m {
        return Err(Error::config(format!("graph: k = {k} exceeds the number of investors {m}")));
    }
    if !(n * k).is_multiple_of(m) {
        return Err(Error::config(format!(
            "graph: {n} papers x {k} reviews = {} is not divisible by {m} investors",
            n * k
        )));
    }
    let degree = n * k / m;
    if degree > n {
        return Err(Error::config(format!("graph: investor degree {degree} exceeds paper count {n}")));
    }

    let authored: HashSet<(InvestorId, PaperId)> = papers
        .iter()
        .flat_map(|p| p.authors.iter().map(move |&a| (a, p.id)))
        .collect();
    let investor_ids: HashSet<InvestorId> = investors.iter().map(|i| i.id).collect();
    let conflicted = |i: InvestorId, p: PaperId| investor_ids.contains(&i) && authored.contains(&(i, p));

    for _ in 0..MAX_RESTARTS {
        let mut paper_stubs: Vec<PaperId> = papers.iter().flat_map(|p| std::iter::repeat_n(p.id, k)).collect();
        paper_stubs.shuffle(rng);
        let mut edges: Vec<(InvestorId, PaperId)> = investors
            .iter()
            .flat_map(|inv| std::iter::repeat_n(inv.id, degree))
            .zip(paper_stubs)
            .collect();
        if repair(&mut edges, &conflicted, rng) {
            edges.sort_unstable();
            return Ok(Assignment { edges });
        }
    }
    Err(Error::Generation(format!(
        "graph: conflict repair failed after {MAX_RESTARTS} restarts ({n} papers, {m} investors, k = {k})"
    )))
}

fn repair<R: Rng + ?Sized>(
    edges: &mut [(InvestorId, PaperId)],
    conflicted: &impl Fn(InvestorId, PaperId) -> bool,
    rng: &mut R,
) -> bool {
    let mut count: HashMap<(InvestorId, PaperId), u32> = HashMap::with_capacity(edges.len());
    for &e in edges.iter() {
        *count.entry(e).or_insert(0) += 1;
    }
    let is_bad = |e: (InvestorId, PaperId), count: &HashMap<_, u32>| count[&e] > 1 || conflicted(e.0, e.1);

    for _ in 0..MAX_REPAIR_ROUNDS {
        let bad: Vec<usize> = (0..edges.len()).filter(|&x| is_bad(edges[x], &count)).collect();
        if bad.is_empty() {
            return true;
        }
        for x in bad {
            if !is_bad(edges[x], &count) {
                continue;
            }
            let y = rng.gen_range(0..edges.len());
            let ((i, p), (j, q)) = (edges[x], edges[y]);
            if x == y || p == q || i == j {
                continue;
            }
            let (nx, ny) = ((i, q), (j, p));
            if count.get(&nx).copied().unwrap_or(0) > 0
                || count.get(&ny).copied().unwrap_or(0) > 0
                || conflicted(nx.0, nx.1)
                || conflicted(ny.0, ny.1)
            {
                continue;
            }
            for e in [edges[x], edges[y]] {
                *count.get_mut(&e).unwrap() -= 1;
            }
            edges[x] = nx;
            edges[y] = ny;
            *count.entry(nx).or_insert(0) += 1;
            *count.entry(ny).or_insert(0) += 1;
        }
    }
    false
}

/// Correct with probability `accuracy`, otherwise one of the two wrong classes.
pub fn classify<R: Rng + ?Sized>(
    true_class: TrueClass,
    accuracy: f64,
    mode: Misclassification,
    rng: &mut R,
) -> TrueClass {
    if rng.gen::<f64>() < accuracy {
        return true_class;
    }
    let wrong: [TrueClass; 2] = match true_class {
        TrueClass::Top20 => [TrueClass::Mid60, TrueClass::Bot20],
        TrueClass::Mid60 => [TrueClass::Top20, TrueClass::Bot20],
        TrueClass::Bot20 => [TrueClass::Mid60, TrueClass::Top20],
    };
    // wrong[0] is always adjacent to the true class
    let p_first = match (mode, true_class) {
        (Misclassification::AdjacentBiased, TrueClass::Top20 | TrueClass::Bot20) => 2.0 / 3.0,
        _ => 0.5,
    };
    if rng.gen::<f64>() < p_first {
        wrong[0]
    } else {
        wrong[1]
    }
}

/// `tokens_p = wallet · w(class_p) / Σ_q w(class_q)`, then the optional cap.
pub fn allocate_passive(classifications: &[TrueClass], cfg: &PassiveImConfig) -> Result<Vec<f64>> {
    if classifications.is_empty() {
        return Err(Error::data("passive: investor has no assigned papers"));
    }
    let weights: Vec<f64> = classifications.iter().map(|&c| cfg.class_weights.weight(c)).collect();
    let total: f64 = weights.iter().sum();
    let mut alloc: Vec<f64> = weights.iter().map(|w| cfg.wallet_size * w / total).collect();
    if let Some(cap) = cfg.cap_per_paper {
        apply_cap(&mut alloc, cap);
    }
    Ok(alloc)
}

/// One passive-market cycle. Graph construction draws from `key/GRAPH`;
/// investor `i` classifies from `key/PASSIVE/i`.
pub fn run_passive_im(
    papers: &[Paper],
    investors: &[Investor],
    cfg: &PassiveImConfig,
    key: StreamKey,
) -> Result<InvestmentLedger> {
    cfg.validate()?;
    let assignment = build_fixed_graph(papers, investors, cfg.reviews_per_paper, &mut key.child(label::GRAPH).rng())?;
    let by_investor = assignment.by_investor();
    let mut ledger = InvestmentLedger::new();
    for inv in investors {
        let Some(assigned) = by_investor.get(&inv.id) else { continue };
        let mut rng = key.path(&[label::PASSIVE, inv.id as u64]).rng();
        let labels: Vec<TrueClass> = assigned
            .iter()
            .map(|&p| classify(papers[p as usize].true_class, inv.accuracy(), cfg.misclassification, &mut rng))
            .collect();
        let alloc = allocate_passive(&labels, cfg)?;
        let rows: Vec<(PaperId, f64)> = assigned.iter().copied().zip(alloc).collect();
        ledger.extend_investor(inv.id, &rows);
    }
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::investor::{generate_pool, IrDistribution, PoolConfig};
    use crate::scoring::{nis, rank};
    use crate::universe::{generate_universe, UniverseConfig};

    fn setup(seed: u64, dist: IrDistribution) -> (Vec<Paper>, Vec<Investor>) {
        let key = StreamKey::root(seed);
        let papers = generate_universe(&UniverseConfig::default(), &mut key.child(label::UNIVERSE).rng()).unwrap();
        let pool = PoolConfig { distribution: dist, ..Default::default() };
        let investors = generate_pool(&pool, &mut key.child(label::POOL).rng()).unwrap();
        (papers, investors)
    }

    fn toy_paper(id: u32, authors: Vec<u32>) -> Paper {
        Paper { id, true_class: TrueClass::Mid60, v_true: 6.0, hype: 8.0, authors }
    }

    fn toy_investor(id: u32) -> Investor {
        Investor { id, skill: 1.0, ir: 1.0, wallet: 100.0, scrutiny_fraction: 0.4, ring_id: None }
    }

    #[test]
    fn default_graph_is_regular() {
        let (papers, investors) = setup(1, IrDistribution::Normal);
        let a = build_fixed_graph(&papers, &investors, 10, &mut StreamKey::root(2).rng()).unwrap();
        assert_eq!(a.edges.len(), 6000);
        let by_inv = a.by_investor();
        assert_eq!(by_inv.len(), 200);
        assert!(by_inv.values().all(|v| v.len() == 30));
        let mut per_paper = vec![0; 600];
        for &(_, p) in &a.edges {
            per_paper[p as usize] += 1;
        }
        assert!(per_paper.iter().all(|&c| c == 10));
        let unique: HashSet<_> = a.edges.iter().collect();
        assert_eq!(unique.len(), 6000);
    }

    #[test]
    fn single_edge_graph() {
        let a = build_fixed_graph(&[toy_paper(0, vec![99])], &[toy_investor(0)], 1, &mut StreamKey::root(1).rng()).unwrap();
        assert_eq!(a.edges, vec![(0, 0)]);
    }

    #[test]
    fn indivisible_degree_is_config_error() {
        let (papers, investors) = setup(1, IrDistribution::Normal);
        let err = build_fixed_graph(&papers, &investors[..7], 10, &mut StreamKey::root(2).rng()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn authors_never_review_own_papers() {
        // investors 0..20 author every paper pair-wise; graph must route around them
        let papers: Vec<Paper> = (0..40).map(|i| toy_paper(i, vec![i % 20, (i + 1) % 20])).collect();
        let investors: Vec<Investor> = (0..20).map(toy_investor).collect();
        for seed in 0..20 {
            let a = build_fixed_graph(&papers, &investors, 5, &mut StreamKey::root(seed).rng()).unwrap();
            for &(i, p) in &a.edges {
                assert!(!papers[p as usize].authors.contains(&i));
            }
            let unique: HashSet<_> = a.edges.iter().collect();
            assert_eq!(unique.len(), a.edges.len());
        }
    }

    #[test]
    fn infeasible_repair_reports_generation_error() {
        // the single investor authors the single paper
        let err = build_fixed_graph(&[toy_paper(0, vec![0])], &[toy_investor(0)], 1, &mut StreamKey::root(1).rng()).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn perfect_classifier() {
        let mut rng = StreamKey::root(1).rng();
        for _ in 0..1000 {
            assert_eq!(classify(TrueClass::Top20, 1.0, Misclassification::Uniform, &mut rng), TrueClass::Top20);
        }
    }

    // Frequency oracle: 10^5 draws, 3-sigma bands.
    #[test]
    fn classification_frequencies() {
        let n = 100_000;
        let mut rng = StreamKey::root(7).rng();
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[classify(TrueClass::Mid60, 0.0, Misclassification::Uniform, &mut rng).index()] += 1;
        }
        assert_eq!(counts[TrueClass::Mid60.index()], 0);
        let sd = (n as f64 * 0.25).sqrt();
        assert!((counts[TrueClass::Top20.index()] as f64 - n as f64 / 2.0).abs() < 3.0 * sd);

        let hits = (0..n)
            .filter(|_| classify(TrueClass::Top20, 0.25, Misclassification::Uniform, &mut rng) == TrueClass::Top20)
            .count();
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        assert!((hits as f64 - 0.25 * n as f64).abs() < 3.0 * sd, "{hits}");
    }

    #[test]
    fn adjacent_biased_prefers_neighbour() {
        let n = 30_000;
        let mut rng = StreamKey::root(8).rng();
        let mid = (0..n)
            .filter(|_| classify(TrueClass::Top20, 0.0, Misclassification::AdjacentBiased, &mut rng) == TrueClass::Mid60)
            .count();
        let f = mid as f64 / n as f64;
        assert!((f - 2.0 / 3.0).abs() < 0.02, "{f}");
    }

    #[test]
    fn allocation_examples() {
        let cfg = PassiveImConfig::default();
        let all_mid = allocate_passive(&[TrueClass::Mid60; 30], &cfg).unwrap();
        assert!(all_mid.iter().all(|t| (t - 100.0 / 30.0).abs() < 1e-12));
        let two = allocate_passive(&[TrueClass::Top20, TrueClass::Bot20], &cfg).unwrap();
        assert!((two[0] - 250.0 / 3.5).abs() < 1e-9 && (two[1] - 100.0 / 3.5).abs() < 1e-9);
        assert!((two[0] - 71.43).abs() < 0.005 && (two[1] - 28.57).abs() < 0.005);
        for c in TrueClass::ALL {
            assert_eq!(allocate_passive(&[c], &cfg).unwrap(), vec![100.0]);
        }
        assert!(allocate_passive(&[], &cfg).is_err());
    }

    #[test]
    fn weights_must_decrease() {
        let cfg = PassiveImConfig { class_weights: ClassWeights { top: 1.0, mid: 1.5, bot: 1.0 }, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ledger_invariants() {
        let (papers, investors) = setup(3, IrDistribution::Crisis);
        let ledger = run_passive_im(&papers, &investors, &PassiveImConfig::default(), StreamKey::root(4)).unwrap();
        assert_eq!(ledger.len(), 6000);
        for (_, spent) in ledger.spend_by_investor() {
            assert!((spent - 100.0).abs() < 1e-9);
        }
        let again = run_passive_im(&papers, &investors, &PassiveImConfig::default(), StreamKey::root(4)).unwrap();
        assert_eq!(ledger, again);
    }

    #[test]
    fn perfect_pool_separates_gems() {
        for seed in 0..100 {
            let (papers, investors) = setup(seed, IrDistribution::Perfect);
            let ledger = run_passive_im(&papers, &investors, &PassiveImConfig::default(), StreamKey::root(seed + 1000)).unwrap();
            let scores = nis(&ledger, &investors, &papers).unwrap();
            let min_gem = papers.iter().filter(|p| p.is_gem()).map(|p| scores[p.id as usize]).fold(f64::INFINITY, f64::min);
            let max_other = papers.iter().filter(|p| !p.is_gem()).map(|p| scores[p.id as usize]).fold(0.0, f64::max);
            assert!(min_gem > max_other, "seed {seed}: {min_gem} <= {max_other}");
            let top: HashSet<u32> = rank(&scores)[..120].iter().copied().collect();
            assert!(papers.iter().filter(|p| p.is_gem()).all(|p| top.contains(&p.id)));
        }
    }
}
