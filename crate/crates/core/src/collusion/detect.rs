//! Ring detection against degree-preserving null models.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::densest::{densest_subgraph, DenseSet};
use super::{subgraph_correlation, ActorGraph};
use crate::error::{Error, Result};
use crate::rng::{label, StreamKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Smallest set that can be flagged.
    pub min_size: usize,
    /// Candidate density must exceed this multiple of the median null density.
    pub density_threshold: f64,
    /// Candidate density z-score against the null distribution must exceed this.
    pub corr_threshold: f64,
    /// Null randomizations per candidate.
    pub n_null: usize,
    /// Attempted endpoint swaps per edge when rewiring.
    pub swaps_per_edge: usize,
    /// Rings to peel off before stopping.
    pub max_rings: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            min_size: 4,
            density_threshold: 2.0,
            corr_threshold: 3.0,
            n_null: 20,
            swaps_per_edge: 5,
            max_rings: 3,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_size < 2 {
            return Err(Error::config("detector: min_size must be at least 2"));
        }
        if self.n_null < 2 {
            return Err(Error::config("detector: n_null must be at least 2"));
        }
        if !(self.density_threshold >= 0.0 && self.corr_threshold.is_finite()) {
            return Err(Error::config("detector: thresholds must be finite and non-negative"));
        }
        Ok(())
    }
}

/// One flagged actor set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedRing {
    /// Ascending actor ids.
    pub members: Vec<usize>,
    pub density: f64,
    /// Median best density over the null randomizations.
    pub null_center: f64,
    /// `1.4826 × MAD` of the null best densities.
    pub null_scale: f64,
    /// Robust density z-score against the null; infinite when the null has no spread.
    pub z_score: f64,
    /// Investment/citation correlation on the set.
    pub correlation: f64,
}

/// Degree-preserving randomization: repeatedly picks two edges `a→b`, `c→d`
/// and rewires them to `a→d`, `c→b`, weights travelling with their source.
/// Out-strengths and in-degrees are preserved; swaps that would create a
/// self-loop or a duplicate edge are skipped.
pub fn rewire<R: Rng + ?Sized>(g: &ActorGraph, swaps_per_edge: usize, rng: &mut R) -> ActorGraph {
    let n = g.n_actors();
    let mut edges = g.edges();
    let m = edges.len();
    let mut present = vec![false; n * n];
    for &(a, b, _) in &edges {
        present[a * n + b] = true;
    }
    if m >= 2 {
        for _ in 0..swaps_per_edge * m {
            let i = rng.gen_range(0..m);
            let j = rng.gen_range(0..m);
            let (a, b, _) = edges[i];
            let (c, d, _) = edges[j];
            if i == j || a == d || c == b || present[a * n + d] || present[c * n + b] {
                continue;
            }
            present[a * n + b] = false;
            present[c * n + d] = false;
            present[a * n + d] = true;
            present[c * n + b] = true;
            edges[i].1 = d;
            edges[j].1 = b;
        }
    }
    let mut out = ActorGraph::new(n);
    for (a, b, w) in edges {
        out.set(a, b, w);
    }
    out
}

/// Median and normal-consistent MAD. The null best density has a heavy right
/// tail (a single rewiring occasionally stacks two large weights on one pair).
pub fn robust_location_scale(xs: &[f64]) -> (f64, f64) {
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    let mut v = xs.to_vec();
    let center = median(&mut v);
    let mut dev: Vec<f64> = xs.iter().map(|x| (x - center).abs()).collect();
    (center, 1.4826 * median(&mut dev))
}

/// Best joint density of `n_null` independently rewired graph pairs.
/// Randomization `k` draws from `key/NULL_MODEL/k`.
pub fn null_best_densities(gi: &ActorGraph, gc: &ActorGraph, params: &DetectorParams, key: StreamKey) -> Result<Vec<f64>> {
    (0..params.n_null)
        .into_par_iter()
        .map(|k| {
            let mut rng = key.path(&[label::NULL_MODEL, k as u64]).rng();
            let ri = rewire(gi, params.swaps_per_edge, &mut rng);
            let rc = rewire(gc, params.swaps_per_edge, &mut rng);
            let joint = ActorGraph::reciprocal_product(&ri, &rc)?;
            Ok(densest_subgraph(&joint).density)
        })
        .collect()
}

/// Repeatedly takes the maximal densest set of the reciprocal joint graph.
/// Sets smaller than `min_size` are set aside and the search continues;
/// larger ones are tested against the null and removed once flagged. Stops
/// at the first non-significant candidate or after `max_rings` flags.
pub fn detect_rings(gi: &ActorGraph, gc: &ActorGraph, params: &DetectorParams, key: StreamKey) -> Result<Vec<FlaggedRing>> {
    params.validate()?;
    let mut excluded: Vec<usize> = Vec::new();
    let mut flagged = Vec::new();
    let mut round = 0u64;
    while flagged.len() < params.max_rings {
        let gi_r = gi.without(&excluded);
        let gc_r = gc.without(&excluded);
        let cand = densest_subgraph(&ActorGraph::reciprocal_product(&gi_r, &gc_r)?);
        if cand.members.is_empty() {
            break;
        }
        if cand.members.len() < params.min_size {
            excluded.extend(&cand.members);
            continue;
        }
        let null = null_best_densities(&gi_r, &gc_r, params, key.child(round))?;
        round += 1;
        let (center, scale) = robust_location_scale(&null);
        let z = if scale > 0.0 {
            (cand.density - center) / scale
        } else if cand.density > center {
            f64::INFINITY
        } else {
            0.0
        };
        if !(cand.density > params.density_threshold * center && z > params.corr_threshold) {
            break;
        }
        let correlation = subgraph_correlation(gi, gc, &cand.members)?;
        excluded.extend(&cand.members);
        flagged.push(FlaggedRing {
            members: cand.members,
            density: cand.density,
            null_center: center,
            null_scale: scale,
            z_score: z,
            correlation,
        });
    }
    Ok(flagged)
}

/// The candidate sets `detect_rings` would test, in order, ignoring the null:
/// undersized densest sets are skipped and every candidate is removed.
pub fn candidate_sets(gi: &ActorGraph, gc: &ActorGraph, min_size: usize, max_candidates: usize) -> Result<Vec<DenseSet>> {
    let mut excluded: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    while out.len() < max_candidates {
        let cand = densest_subgraph(&ActorGraph::reciprocal_product(&gi.without(&excluded), &gc.without(&excluded))?);
        if cand.members.is_empty() {
            break;
        }
        excluded.extend(&cand.members);
        if cand.members.len() >= min_size {
            out.push(cand);
        }
    }
    Ok(out)
}
