//! Collusion rings: injection into a scenario, simulated citations, and a
//! detector that looks for actor sets whose investments and citations are
//! jointly dense and reciprocal.

mod densest;
mod detect;
mod ring;

pub use densest::{densest_subgraph, peel, subset_density, DenseSet, SymGraph};
pub use detect::{candidate_sets, detect_rings, null_best_densities, rewire, robust_location_scale, DetectorParams, FlaggedRing};
pub use ring::{inject_ring, recruit_ring, tag_ring_papers, RingConfig, RingRoster};

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::investor::{generate_pool, PoolConfig};
use crate::protocol::rebel::{run_rebel_im_with, RebelConfig};
use crate::rng::{label, StreamKey};
use crate::scoring::InvestmentLedger;
use crate::universe::{generate_universe, ActorId, Paper, PaperId, UniverseConfig};

/// Dense weighted digraph over actors `0..n`. Self-loops are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorGraph {
    n: usize,
    w: Vec<f64>,
}

impl ActorGraph {
    pub fn new(n: usize) -> Self {
        ActorGraph { n, w: vec![0.0; n * n] }
    }

    pub fn n_actors(&self) -> usize {
        self.n
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.w[from * self.n + to]
    }

    /// Adds `weight` to the edge; self-loops are dropped.
    pub fn add(&mut self, from: usize, to: usize, weight: f64) {
        if from != to {
            self.w[from * self.n + to] += weight;
        }
    }

    pub fn set(&mut self, from: usize, to: usize, weight: f64) {
        if from != to {
            self.w[from * self.n + to] = weight;
        }
    }

    /// Non-zero edges as `(from, to, weight)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in 0..self.n {
                let w = self.weight(a, b);
                if w != 0.0 {
                    out.push((a, b, w));
                }
            }
        }
        out
    }

    /// Copy with every edge touching `removed` zeroed.
    pub fn without(&self, removed: &[usize]) -> ActorGraph {
        let mut g = self.clone();
        for &r in removed {
            for x in 0..self.n {
                g.w[r * self.n + x] = 0.0;
                g.w[x * self.n + r] = 0.0;
            }
        }
        g
    }

    /// Joint graph: `min(gi·gc on a→b, gi·gc on b→a)` for every pair, i.e.
    /// weight only where both actors invested in and cited each other.
    pub fn reciprocal_product(gi: &ActorGraph, gc: &ActorGraph) -> Result<SymGraph> {
        if gi.n != gc.n {
            return Err(Error::data(format!(
                "investment graph has {} actors, citation graph {}",
                gi.n, gc.n
            )));
        }
        let n = gi.n;
        let mut g = SymGraph::new(n);
        for a in 0..n {
            for b in (a + 1)..n {
                let ab = gi.weight(a, b) * gc.weight(a, b);
                let ba = gi.weight(b, a) * gc.weight(b, a);
                let w = ab.min(ba);
                if w > 0.0 {
                    g.add_edge(a, b, w);
                }
            }
        }
        Ok(g)
    }
}

/// Investor → author graph: tokens on a paper count toward each of its authors.
pub fn investment_graph(ledger: &InvestmentLedger, papers: &[Paper], n_actors: usize) -> Result<ActorGraph> {
    let mut g = ActorGraph::new(n_actors);
    for r in ledger.rows() {
        let paper = papers
            .get(r.paper as usize)
            .ok_or_else(|| Error::data(format!("investment graph: unknown paper {}", r.paper)))?;
        check_actor(r.investor, n_actors)?;
        for &a in &paper.authors {
            check_actor(a, n_actors)?;
            g.add(r.investor as usize, a as usize, r.tokens);
        }
    }
    Ok(g)
}

fn check_actor(a: ActorId, n: usize) -> Result<()> {
    if (a as usize) < n {
        Ok(())
    } else {
        Err(Error::data(format!("actor id {a} outside the universe of {n} actors")))
    }
}

/// Citation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CitationConfig {
    /// Poisson mean of each paper's baseline reference count.
    pub mean_out_degree: f64,
}

impl Default for CitationConfig {
    fn default() -> Self {
        CitationConfig { mean_out_degree: 8.0 }
    }
}

/// Paper-level citations `citing → cited`, each pair at most once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CitationGraph {
    edges: BTreeSet<(PaperId, PaperId)>,
    ring_excess: usize,
}

impl CitationGraph {
    pub fn edges(&self) -> impl Iterator<Item = (PaperId, PaperId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, citing: PaperId, cited: PaperId) -> bool {
        self.edges.contains(&(citing, cited))
    }

    /// Ring edges that were not already present in the baseline.
    pub fn ring_excess(&self) -> usize {
        self.ring_excess
    }

    pub fn out_degree(&self, paper: PaperId) -> usize {
        self.edges.range((paper, 0)..=(paper, PaperId::MAX)).count()
    }

    /// Author-level graph: each citation adds 1 from every citing author to every cited author.
    pub fn to_actor_graph(&self, papers: &[Paper], n_actors: usize) -> Result<ActorGraph> {
        let mut g = ActorGraph::new(n_actors);
        for (q, t) in self.edges() {
            for &a in &papers[q as usize].authors {
                check_actor(a, n_actors)?;
                for &b in &papers[t as usize].authors {
                    check_actor(b, n_actors)?;
                    g.add(a as usize, b as usize, 1.0);
                }
            }
        }
        Ok(g)
    }
}

/// Baseline: every paper cites `Poisson(mean_out_degree)` distinct others,
/// drawn with probability proportional to `v_true`. A ring then adds each
/// member-to-member paper citation with probability `coordination`.
pub fn simulate_citations<R: Rng + ?Sized>(
    papers: &[Paper],
    ring: Option<&RingRoster>,
    cfg: &CitationConfig,
    rng: &mut R,
) -> Result<CitationGraph> {
    if !(cfg.mean_out_degree > 0.0 && cfg.mean_out_degree.is_finite()) {
        return Err(Error::config("citations: mean_out_degree must be positive"));
    }
    let poisson = Poisson::new(cfg.mean_out_degree).map_err(|e| Error::config(format!("citations: {e}")))?;
    let mut graph = CitationGraph::default();
    let n = papers.len();
    for q in papers {
        let c = (poisson.sample(rng) as usize).min(n.saturating_sub(1));
        if c == 0 {
            continue;
        }
        let weight = |i: usize| if i == q.id as usize { 0.0 } else { papers[i].v_true };
        let picks = rand::seq::index::sample_weighted(rng, n, weight, c)
            .map_err(|e| Error::Generation(format!("citations: {e}")))?;
        for t in picks.into_iter() {
            graph.edges.insert((q.id, t as PaperId));
        }
    }
    if let Some(roster) = ring {
        for (k, own) in roster.papers.iter().enumerate() {
            for (j, other) in roster.papers.iter().enumerate() {
                if j == k {
                    continue;
                }
                for &q in own {
                    for &t in other {
                        if q != t && rng.gen_bool(roster.coordination) && graph.edges.insert((q, t)) {
                            graph.ring_excess += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(graph)
}

/// Pearson correlation of `gi` and `gc` weights over the ordered off-diagonal
/// pairs of `subset`. A constant vector on either side yields 0.
pub fn subgraph_correlation(gi: &ActorGraph, gc: &ActorGraph, subset: &[usize]) -> Result<f64> {
    if subset.len() < 2 {
        return Err(Error::data("subgraph correlation needs at least two actors"));
    }
    let mut xs = Vec::with_capacity(subset.len() * (subset.len() - 1));
    let mut ys = Vec::with_capacity(xs.capacity());
    for &a in subset {
        for &b in subset {
            if a != b {
                xs.push(gi.weight(a, b));
                ys.push(gc.weight(a, b));
            }
        }
    }
    match crate::scoring::pearson(&xs, &ys) {
        Ok(r) => Ok(r),
        Err(Error::Degenerate(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Jaccard overlap of two id sets; two empty sets give 1.
pub fn jaccard(a: &[usize], b: &[usize]) -> f64 {
    let sa: BTreeSet<usize> = a.iter().copied().collect();
    let sb: BTreeSet<usize> = b.iter().copied().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// One planted-ring detection experiment: investors double as authors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionScenario {
    pub universe: UniverseConfig,
    pub pool: PoolConfig,
    pub rebel: RebelConfig,
    /// `None` runs the honest null world.
    pub ring: Option<RingConfig>,
    pub citations: CitationConfig,
    pub detector: DetectorParams,
}

impl Default for DetectionScenario {
    fn default() -> Self {
        DetectionScenario {
            universe: UniverseConfig { author_id_offset: 0, author_pool_size: 200, ..Default::default() },
            pool: PoolConfig::default(),
            rebel: RebelConfig::default(),
            ring: Some(RingConfig::default()),
            citations: CitationConfig::default(),
            detector: DetectorParams::default(),
        }
    }
}

impl DetectionScenario {
    /// Actors are `0..max(investors, author ids)`.
    pub fn n_actors(&self) -> usize {
        let authors = self.universe.author_id_offset as usize + self.universe.author_pool_size;
        authors.max(self.pool.n_investors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    /// Planted members, empty without a ring.
    pub planted: Vec<usize>,
    pub flagged: Vec<FlaggedRing>,
    /// Best Jaccard overlap between a flagged set and the planted ring;
    /// 0 when nothing was planted or nothing was flagged.
    pub jaccard: f64,
}

/// Generates one world from `key`, invests, cites and runs the detector.
pub fn run_detection(sc: &DetectionScenario, key: StreamKey) -> Result<DetectionOutcome> {
    let mut papers = generate_universe(&sc.universe, &mut key.child(label::UNIVERSE).rng())?;
    let mut pool = generate_pool(&sc.pool, &mut key.child(label::POOL).rng())?;
    let roster = match &sc.ring {
        Some(r) => {
            let mut rng = key.child(label::RING).rng();
            let members = recruit_ring(&mut pool, r, 0, &mut rng)?;
            Some(tag_ring_papers(&members, &mut papers, r, 0, &mut rng)?)
        }
        None => None,
    };
    let ledger = run_rebel_im_with(&papers, &pool, &sc.rebel, key, |inv| {
        roster.as_ref().and_then(|r| r.coordinated_spend(inv))
    })?;
    let citations = simulate_citations(&papers, roster.as_ref(), &sc.citations, &mut key.child(label::CITATIONS).rng())?;
    let n = sc.n_actors();
    let gi = investment_graph(&ledger, &papers, n)?;
    let gc = citations.to_actor_graph(&papers, n)?;
    let flagged = detect_rings(&gi, &gc, &sc.detector, key.child(label::NULL_MODEL))?;
    let planted: Vec<usize> = roster.map(|r| r.members.iter().map(|&m| m as usize).collect()).unwrap_or_default();
    let jaccard = if planted.is_empty() {
        0.0
    } else {
        flagged.iter().map(|f| self::jaccard(&f.members, &planted)).fold(0.0, f64::max)
    };
    Ok(DetectionOutcome { planted, flagged, jaccard })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use crate::universe::{generate_universe, TrueClass, UniverseConfig};
    use rand::Rng;

    fn papers(n: usize) -> Vec<Paper> {
        (0..n as u32)
            .map(|i| Paper { id: i, true_class: TrueClass::Mid60, v_true: 6.0, hype: 5.0, authors: vec![i % 7] })
            .collect()
    }

    #[test]
    fn correlation_identical_is_one() {
        let mut rng = StreamKey::root(1).rng();
        let mut g = ActorGraph::new(6);
        for a in 0..6 {
            for b in 0..6 {
                g.add(a, b, rng.gen::<f64>());
            }
        }
        let r = subgraph_correlation(&g, &g.clone(), &[0, 2, 3, 5]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_constant_is_zero() {
        let mut gi = ActorGraph::new(4);
        let mut gc = ActorGraph::new(4);
        let mut rng = StreamKey::root(2).rng();
        for a in 0..4 {
            for b in 0..4 {
                gi.add(a, b, 11.1);
                gc.add(a, b, rng.gen::<f64>());
            }
        }
        assert_eq!(subgraph_correlation(&gi, &gc, &[0, 1, 2, 3]).unwrap(), 0.0);
        assert!(subgraph_correlation(&gi, &gc, &[1]).is_err());
    }

    #[test]
    fn correlation_null_distribution_is_narrow() {
        // independent uniform weights on 20 actors: 380 pairs, sd of r ≈ 0.05
        let mut rng = StreamKey::root(3).rng();
        let subset: Vec<usize> = (0..20).collect();
        let mut wide = 0;
        let draws = 2_000;
        for _ in 0..draws {
            let mut gi = ActorGraph::new(20);
            let mut gc = ActorGraph::new(20);
            for a in 0..20 {
                for b in 0..20 {
                    gi.add(a, b, rng.gen::<f64>());
                    gc.add(a, b, rng.gen::<f64>());
                }
            }
            if subgraph_correlation(&gi, &gc, &subset).unwrap().abs() >= 0.3 {
                wide += 1;
            }
        }
        assert!(wide as f64 <= 0.01 * draws as f64, "{wide} of {draws}");
    }

    #[test]
    fn baseline_citations_have_poisson_mean() {
        let ps = papers(10_000);
        let g = simulate_citations(&ps, None, &CitationConfig::default(), &mut StreamKey::root(4).rng()).unwrap();
        let mean = g.len() as f64 / ps.len() as f64;
        // Poisson(8): sd of the mean over 10^4 papers is sqrt(8/10^4)
        let se = (8.0f64 / 1e4).sqrt();
        assert!((mean - 8.0).abs() < 3.0 * se, "mean {mean}");
        assert_eq!(g.ring_excess(), 0);
        assert!(g.edges().all(|(q, t)| q != t));
    }

    #[test]
    fn citations_prefer_gems() {
        let ps = generate_universe(&UniverseConfig::default(), &mut StreamKey::root(5).rng()).unwrap();
        let g = simulate_citations(&ps, None, &CitationConfig::default(), &mut StreamKey::root(6).rng()).unwrap();
        let mut incoming = [0usize; 3];
        for (_, t) in g.edges() {
            incoming[ps[t as usize].true_class.index()] += 1;
        }
        let per = |c: TrueClass| incoming[c.index()] as f64 / ps.iter().filter(|p| p.true_class == c).count() as f64;
        assert!(per(TrueClass::Top20) > per(TrueClass::Mid60));
        assert!(per(TrueClass::Mid60) > per(TrueClass::Bot20));
    }

    #[test]
    fn full_ring_cites_every_other_member() {
        let mut ps = papers(100);
        let roster = RingRoster {
            ring_id: 0,
            coordination: 1.0,
            members: vec![0, 1, 2],
            papers: vec![vec![10], vec![20], vec![30, 31]],
        };
        for (m, own) in roster.members.iter().zip(&roster.papers) {
            for &p in own {
                ps[p as usize].authors = vec![*m];
            }
        }
        let g = simulate_citations(&ps, Some(&roster), &CitationConfig::default(), &mut StreamKey::root(7).rng()).unwrap();
        for (k, own) in roster.papers.iter().enumerate() {
            for (j, other) in roster.papers.iter().enumerate() {
                if j != k {
                    for &q in own {
                        for &t in other {
                            assert!(g.contains(q, t));
                        }
                    }
                }
            }
        }
        assert!(!g.contains(30, 31));
    }

    #[test]
    fn investment_graph_sums_over_author_papers() {
        let ps = vec![
            Paper { id: 0, true_class: TrueClass::Top20, v_true: 10.0, hype: 5.0, authors: vec![2] },
            Paper { id: 1, true_class: TrueClass::Mid60, v_true: 6.0, hype: 5.0, authors: vec![2, 3] },
        ];
        let ledger = InvestmentLedger::from_rows(vec![
            crate::scoring::LedgerRow { investor: 0, paper: 0, tokens: 30.0 },
            crate::scoring::LedgerRow { investor: 0, paper: 1, tokens: 70.0 },
            crate::scoring::LedgerRow { investor: 3, paper: 1, tokens: 5.0 },
        ])
        .unwrap();
        let g = investment_graph(&ledger, &ps, 4).unwrap();
        assert_eq!(g.weight(0, 2), 100.0);
        assert_eq!(g.weight(0, 3), 70.0);
        assert_eq!(g.weight(3, 2), 5.0);
        assert_eq!(g.weight(3, 3), 0.0);
        assert!(investment_graph(&ledger, &ps, 3).is_err());
    }

    #[test]
    fn jaccard_basics() {
        assert_eq!(jaccard(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(jaccard(&[1, 2], &[3]), 0.0);
        assert!((jaccard(&[1, 2, 3], &[2, 3, 4]) - 0.5).abs() < 1e-12);
    }
}
