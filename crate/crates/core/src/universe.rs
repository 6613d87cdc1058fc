//! Ground-truth paper population for one conference cycle.
//!
//! Papers fall into three merit bins with fixed true scores (10 / 6 / 4) and a
//! visible hype score drawn from a class-dependent interval. Paper ids are
//! dense: `papers[i].id == i`, so per-paper quantities elsewhere in the crate
//! are plain vectors indexed by id.

use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PaperId = u32;
/// Shared id space for investors and authors. Investor `i` is actor `i`.
pub type ActorId = u32;

/// Merit bin. Ordering follows merit: `Top20 > Mid60 > Bot20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TrueClass {
    Bot20,
    Mid60,
    Top20,
}

impl TrueClass {
    /// Cycle order used by round-robin procedures.
    pub const ALL: [TrueClass; 3] = [TrueClass::Top20, TrueClass::Mid60, TrueClass::Bot20];

    pub fn v_true(self) -> f64 {
        match self {
            TrueClass::Top20 => 10.0,
            TrueClass::Mid60 => 6.0,
            TrueClass::Bot20 => 4.0,
        }
    }

    /// Position in [`TrueClass::ALL`].
    pub fn index(self) -> usize {
        match self {
            TrueClass::Top20 => 0,
            TrueClass::Mid60 => 1,
            TrueClass::Bot20 => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TrueClass::Top20 => "Top20",
            TrueClass::Mid60 => "Mid60",
            TrueClass::Bot20 => "Bot20",
        }
    }
}

impl fmt::Display for TrueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paper {
    pub id: PaperId,
    pub true_class: TrueClass,
    pub v_true: f64,
    pub hype: f64,
    pub authors: Vec<ActorId>,
}

impl Paper {
    pub fn is_gem(&self) -> bool {
        self.true_class == TrueClass::Top20
    }
}

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypeRanges {
    pub top: Interval,
    pub mid: Interval,
    pub bot: Interval,
}

impl Default for HypeRanges {
    fn default() -> Self {
        HypeRanges {
            top: Interval::new(4.0, 10.0),
            mid: Interval::new(7.0, 10.0),
            bot: Interval::new(3.0, 8.0),
        }
    }
}

impl HypeRanges {
    pub fn for_class(&self, class: TrueClass) -> Interval {
        match class {
            TrueClass::Top20 => self.top,
            TrueClass::Mid60 => self.mid,
            TrueClass::Bot20 => self.bot,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniverseConfig {
    /// Submissions before the soundness filter. Only the load model reads this.
    pub n_submissions: usize,
    pub market_size: usize,
    pub frac_top: f64,
    pub frac_mid: f64,
    pub frac_bot: f64,
    pub hype: HypeRanges,
    pub authors_per_paper: usize,
    pub author_pool_size: usize,
    /// First actor id of the author pool. Authors are actors
    /// `author_id_offset .. author_id_offset + author_pool_size`; an offset at
    /// or beyond the investor count keeps authors and investors disjoint.
    pub author_id_offset: ActorId,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        UniverseConfig {
            n_submissions: 1000,
            market_size: 600,
            frac_top: 0.20,
            frac_mid: 0.60,
            frac_bot: 0.20,
            hype: HypeRanges::default(),
            authors_per_paper: 2,
            author_pool_size: 200,
            author_id_offset: 200,
        }
    }
}

impl UniverseConfig {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.frac_top, self.frac_mid, self.frac_bot];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::config(format!("universe: class fractions must lie in [0, 1], got {fracs:?}")));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("universe: class fractions must sum to 1, got {sum}")));
        }
        if self.n_submissions == 0 {
            return Err(Error::config("universe: n_submissions must be positive"));
        }
        if self.market_size > self.n_submissions {
            return Err(Error::config(format!(
                "universe: market_size {} exceeds n_submissions {}",
                self.market_size, self.n_submissions
            )));
        }
        if self.authors_per_paper == 0 || self.author_pool_size == 0 {
            return Err(Error::config("universe: authors_per_paper and author_pool_size must be positive"));
        }
        if self.authors_per_paper > self.author_pool_size {
            return Err(Error::config(format!(
                "universe: authors_per_paper {} exceeds author_pool_size {}",
                self.authors_per_paper, self.author_pool_size
            )));
        }
        for class in TrueClass::ALL {
            let iv = self.hype.for_class(class);
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= iv.hi) {
                return Err(Error::config(format!("universe: hype interval for {class} is invalid: {iv:?}")));
            }
        }
        Ok(())
    }

    /// Per-class counts `(top, mid, bot)`: top and bot are rounded, mid takes the remainder.
    pub fn target_counts(&self) -> (usize, usize, usize) {
        let n = self.market_size;
        let top = (((n as f64) * self.frac_top).round() as usize).min(n);
        let bot = (((n as f64) * self.frac_bot).round() as usize).min(n - top);
        (top, n - top - bot, bot)
    }
}

/// Draws `cfg.market_size` papers. Classes are shuffled over ids so that
/// id-based tie-breaking downstream carries no class information.
pub fn generate_universe<R: Rng + ?Sized>(cfg: &UniverseConfig, rng: &mut R) -> Result<Vec<Paper>> {
    cfg.validate()?;
    let (top, mid, bot) = cfg.target_counts();
    let mut classes = Vec::with_capacity(cfg.market_size);
    classes.extend(std::iter::repeat_n(TrueClass::Top20, top));
    classes.extend(std::iter::repeat_n(TrueClass::Mid60, mid));
    classes.extend(std::iter::repeat_n(TrueClass::Bot20, bot));
    classes.shuffle(rng);

    let papers = classes
        .into_iter()
        .enumerate()
        .map(|(i, class)| {
            let hype = cfg.hype.for_class(class).sample(rng);
            let mut authors: Vec<ActorId> = rand::seq::index::sample(rng, cfg.author_pool_size, cfg.authors_per_paper)
                .into_iter()
                .map(|a| cfg.author_id_offset + a as ActorId)
                .collect();
            authors.sort_unstable();
            Paper {
                id: i as PaperId,
                true_class: class,
                v_true: class.v_true(),
                hype,
                authors,
            }
        })
        .collect();
    Ok(papers)
}

/// `(|Top20|, |Mid60|, |Bot20|)`.
pub fn class_counts(papers: &[Paper]) -> (usize, usize, usize) {
    papers.iter().fold((0, 0, 0), |(t, m, b), p| match p.true_class {
        TrueClass::Top20 => (t + 1, m, b),
        TrueClass::Mid60 => (t, m + 1, b),
        TrueClass::Bot20 => (t, m, b + 1),
    })
}

pub fn gem_count(papers: &[Paper]) -> usize {
    papers.iter().filter(|p| p.is_gem()).count()
}

/// Writes `papers.csv`: `id,true_class,v_true,hype,authors` with `;`-joined authors.
pub fn write_papers_csv(path: &Path, papers: &[Paper]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "true_class", "v_true", "hype", "authors"])?;
    for p in papers {
        let authors = p.authors.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";");
        w.write_record([
            p.id.to_string(),
            p.true_class.to_string(),
            p.v_true.to_string(),
            p.hype.to_string(),
            authors,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
