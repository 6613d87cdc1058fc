//! Densest subgraph of a weighted undirected graph, where density is the
//! total edge weight inside a set divided by its size.

use std::collections::VecDeque;

/// Undirected weighted graph on `0..n`, adjacency lists with unique neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct SymGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

/// A vertex set (ascending) and its density.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSet {
    pub members: Vec<usize>,
    pub density: f64,
}

impl SymGraph {
    pub fn new(n: usize) -> Self {
        SymGraph { adj: vec![Vec::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    /// Adds weight to `{a, b}`; loops and non-positive weights are ignored.
    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        if a == b || w <= 0.0 {
            return;
        }
        for (x, y) in [(a, b), (b, a)] {
            match self.adj[x].iter_mut().find(|(v, _)| *v == y) {
                Some(e) => e.1 += w,
                None => self.adj[x].push((y, w)),
            }
        }
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.adj[a].iter().find(|(v, _)| *v == b).map_or(0.0, |e| e.1)
    }

    pub fn neighbours(&self, a: usize) -> &[(usize, f64)] {
        &self.adj[a]
    }

    pub fn degree(&self, a: usize) -> f64 {
        self.adj[a].iter().map(|e| e.1).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.adj.iter().flatten().map(|e| e.1).sum::<f64>() / 2.0
    }

    /// Edge count (each undirected edge once).
    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Inner weight of `set` divided by its size; empty sets have density 0.
pub fn subset_density(g: &SymGraph, set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let mut inside = vec![false; g.n()];
    for &v in set {
        inside[v] = true;
    }
    let w: f64 = set
        .iter()
        .flat_map(|&v| g.neighbours(v).iter().filter(|(u, _)| inside[*u]).map(|e| e.1))
        .sum();
    w / 2.0 / set.len() as f64
}

/// Greedy peeling: repeatedly drop the minimum-degree vertex (ties to the
/// lower id) and keep the densest intermediate set. A 1/2-approximation.
pub fn peel(g: &SymGraph) -> DenseSet {
    let n = g.n();
    if n == 0 {
        return DenseSet { members: Vec::new(), density: 0.0 };
    }
    let mut alive = vec![true; n];
    let mut deg: Vec<f64> = (0..n).map(|v| g.degree(v)).collect();
    let mut total = g.total_weight();
    let mut order = Vec::with_capacity(n);
    let mut best = (total / n as f64, 0usize);
    for step in 0..n - 1 {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by(|&a, &b| deg[a].total_cmp(&deg[b]).then(a.cmp(&b)))
            .expect("alive vertex");
        alive[v] = false;
        order.push(v);
        total -= deg[v];
        for &(u, w) in g.neighbours(v) {
            if alive[u] {
                deg[u] -= w;
            }
        }
        let remaining = n - step - 1;
        let d = total.max(0.0) / remaining as f64;
        if d > best.0 {
            best = (d, step + 1);
        }
    }
    let removed = &order[..best.1];
    let mut members: Vec<usize> = (0..n).filter(|v| !removed.contains(v)).collect();
    members.sort_unstable();
    DenseSet { density: subset_density(g, &members), members }
}

/// Exact maximum-density set. Among several densest sets the largest one
/// (their union) is returned. An edgeless graph yields the empty set.
///
/// Starts from the peeling bound and runs Dinkelbach iterations, each a
/// min-cut maximising `w(S) − g·|S|`.
pub fn densest_subgraph(g: &SymGraph) -> DenseSet {
    if g.edge_count() == 0 {
        return DenseSet { members: Vec::new(), density: 0.0 };
    }
    let scale = g.adj.iter().flatten().map(|e| e.1).fold(0.0, f64::max);
    let eps = 1e-9 * scale;
    let mut best = peel(g);
    loop {
        let cand = max_excess_set(g, best.density);
        if cand.is_empty() {
            break;
        }
        let d = subset_density(g, &cand);
        if d <= best.density + eps {
            break;
        }
        best = DenseSet { members: cand, density: d };
    }
    // a slightly lower price makes the largest optimal set strictly best
    let slack = 1e-7 * (1.0 + best.density) / g.n() as f64;
    let widest = max_excess_set(g, best.density - slack);
    let d = subset_density(g, &widest);
    if !widest.is_empty() && d >= best.density - eps && widest.len() >= best.members.len() {
        best = DenseSet { members: widest, density: d };
    }
    best
}

/// A set maximising `w(S) − price·|S|` (possibly empty), via s-t min cut with
/// vertex capacities `d_v − 2·price` and edge capacities `w_uv`.
fn max_excess_set(g: &SymGraph, price: f64) -> Vec<usize> {
    let n = g.n();
    let s = n;
    let t = n + 1;
    let mut flow = Dinic::new(n + 2);
    for v in 0..n {
        let a = g.degree(v) - 2.0 * price;
        if a > 0.0 {
            flow.add_edge(s, v, a, 0.0);
        } else if a < 0.0 {
            flow.add_edge(v, t, -a, 0.0);
        }
        for &(u, w) in g.neighbours(v) {
            if u > v {
                flow.add_edge(v, u, w, w);
            }
        }
    }
    let scale = g.adj.iter().flatten().map(|e| e.1).fold(1.0, f64::max);
    flow.max_flow(s, t, 1e-12 * scale * n as f64);
    let side = flow.source_side(s);
    (0..n).filter(|&v| side[v]).collect()
}

struct Dinic {
    to: Vec<usize>,
    cap: Vec<f64>,
    head: Vec<Vec<usize>>,
    level: Vec<i32>,
    it: Vec<usize>,
    eps: f64,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Dinic { to: Vec::new(), cap: Vec::new(), head: vec![Vec::new(); n], level: vec![0; n], it: vec![0; n], eps: 0.0 }
    }

    fn add_edge(&mut self, a: usize, b: usize, cap_ab: f64, cap_ba: f64) {
        self.head[a].push(self.to.len());
        self.to.push(b);
        self.cap.push(cap_ab);
        self.head[b].push(self.to.len());
        self.to.push(a);
        self.cap.push(cap_ba);
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &e in &self.head[v] {
                let u = self.to[e];
                if self.cap[e] > self.eps && self.level[u] < 0 {
                    self.level[u] = self.level[v] + 1;
                    q.push_back(u);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: f64) -> f64 {
        if v == t {
            return pushed;
        }
        while self.it[v] < self.head[v].len() {
            let e = self.head[v][self.it[v]];
            let u = self.to[e];
            if self.cap[e] > self.eps && self.level[u] == self.level[v] + 1 {
                let got = self.dfs(u, t, pushed.min(self.cap[e]));
                if got > 0.0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            self.it[v] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        self.eps = eps;
        let mut total = 0.0;
        while self.bfs(s, t) {
            self.it.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= self.eps {
                    break;
                }
                total += f;
            }
        }
        total
    }

    /// Vertices reachable from `s` in the residual graph.
    fn source_side(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.head.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &e in &self.head[v] {
                let u = self.to[e];
                if self.cap[e] > self.eps && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use rand::Rng;

    #[test]
    fn clique_plus_pendant() {
        let mut g = SymGraph::new(6);
        for a in 0..4 {
            for b in (a + 1)..4 {
                g.add_edge(a, b, 1.0);
            }
        }
        g.add_edge(3, 4, 1.0);
        g.add_edge(4, 5, 1.0);
        let d = densest_subgraph(&g);
        assert_eq!(d.members, vec![0, 1, 2, 3]);
        assert!((d.density - 1.5).abs() < 1e-12);
    }

    #[test]
    fn ties_return_the_union() {
        // two disjoint triangles of equal density
        let mut g = SymGraph::new(7);
        for (a, b) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            g.add_edge(a, b, 2.0);
        }
        let d = densest_subgraph(&g);
        assert_eq!(d.members, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn empty_graph() {
        assert!(densest_subgraph(&SymGraph::new(5)).members.is_empty());
        assert!(peel(&SymGraph::new(0)).members.is_empty());
    }

    #[test]
    fn peel_is_half_approximation() {
        let mut rng = StreamKey::root(11).rng();
        for _ in 0..200 {
            let n = rng.gen_range(2..30);
            let mut g = SymGraph::new(n);
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.gen_bool(0.3) {
                        g.add_edge(a, b, rng.gen_range(0.1..5.0));
                    }
                }
            }
            let exact = densest_subgraph(&g);
            let greedy = peel(&g);
            assert!(greedy.density <= exact.density + 1e-9);
            assert!(greedy.density >= 0.5 * exact.density - 1e-9);
        }
    }
}
