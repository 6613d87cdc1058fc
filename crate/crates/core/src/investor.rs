//! Investor population: latent skill, Investor Rating, wallets, ring membership.
//!
//! `skill` is the behavioral accuracy used by every protocol (classification
//! accuracy, attractiveness weighting, evaluation noise). `ir` is the influence
//! weight applied when scoring. Single-cycle experiments set `ir = skill`;
//! calibration runs start every `ir` at 1.0 and let the feedback loop move it.

use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaPdf, Continuous};

use crate::error::{Error, Result};
use crate::universe::ActorId;

pub type InvestorId = ActorId;

/// Skill distribution of the investor community.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrDistribution {
    /// Beta(1, 3), mean 0.25.
    Crisis,
    /// Beta(2, 2), mean 0.5.
    Normal,
    /// Beta(5, 1), mean 5/6.
    Desired,
    /// Every investor has skill exactly 1.0.
    Perfect,
    Custom { alpha: f64, beta: f64 },
}

impl IrDistribution {
    /// The four community scenarios, weakest first.
    pub const SCENARIOS: [IrDistribution; 4] =
        [IrDistribution::Crisis, IrDistribution::Normal, IrDistribution::Desired, IrDistribution::Perfect];

    /// Beta shape parameters, or `None` for the point mass at 1.
    pub fn beta_params(&self) -> Option<(f64, f64)> {
        match *self {
            IrDistribution::Crisis => Some((1.0, 3.0)),
            IrDistribution::Normal => Some((2.0, 2.0)),
            IrDistribution::Desired => Some((5.0, 1.0)),
            IrDistribution::Perfect => None,
            IrDistribution::Custom { alpha, beta } => Some((alpha, beta)),
        }
    }

    pub fn mean(&self) -> f64 {
        match self.beta_params() {
            Some((a, b)) => a / (a + b),
            None => 1.0,
        }
    }

    pub fn label(&self) -> String {
        match self {
            IrDistribution::Crisis => "crisis".into(),
            IrDistribution::Normal => "normal".into(),
            IrDistribution::Desired => "desired".into(),
            IrDistribution::Perfect => "perfect".into(),
            IrDistribution::Custom { alpha, beta } => format!("beta({alpha},{beta})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((a, b)) = self.beta_params() {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::config(format!("pool: Beta parameters must be positive, got ({a}, {b})")));
            }
        }
        Ok(())
    }
}

/// How the initial Investor Rating is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrInit {
    /// `ir = clamp(skill)`; single-cycle experiments.
    Skill,
    /// Every investor starts at the same rating (1.0 for calibration runs).
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Investor {
    pub id: InvestorId,
    pub skill: f64,
    pub ir: f64,
    pub wallet: f64,
    pub scrutiny_fraction: f64,
    pub ring_id: Option<u32>,
}

impl Investor {
    /// Behavioral accuracy used by classification, discovery and evaluation.
    pub fn accuracy(&self) -> f64 {
        self.skill
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub n_investors: usize,
    pub distribution: IrDistribution,
    pub wallet_size: f64,
    pub scrutiny_fraction: f64,
    pub ir_floor: f64,
    pub ir_cap: f64,
    pub initial_ir: IrInit,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            n_investors: 200,
            distribution: IrDistribution::Normal,
            wallet_size: 100.0,
            scrutiny_fraction: 0.40,
            ir_floor: 0.05,
            ir_cap: 2.0,
            initial_ir: IrInit::Skill,
        }
    }
}

impl PoolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_investors == 0 {
            return Err(Error::config("pool: n_investors must be positive"));
        }
        self.distribution.validate()?;
        if !(self.wallet_size >= 0.0 && self.wallet_size.is_finite()) {
            return Err(Error::config(format!("pool: wallet_size must be non-negative, got {}", self.wallet_size)));
        }
        if !(0.0..=1.0).contains(&self.scrutiny_fraction) {
            return Err(Error::config("pool: scrutiny_fraction must lie in [0, 1]"));
        }
        if !(self.ir_floor > 0.0 && self.ir_floor < self.ir_cap) {
            return Err(Error::config(format!(
                "pool: need 0 < ir_floor < ir_cap, got {} / {}",
                self.ir_floor, self.ir_cap
            )));
        }
        if let IrInit::Fixed(v) = self.initial_ir {
            if !(self.ir_floor..=self.ir_cap).contains(&v) {
                return Err(Error::config(format!("pool: initial ir {v} outside [ir_floor, ir_cap]")));
            }
        }
        Ok(())
    }

    pub fn clamp_ir(&self, ir: f64) -> f64 {
        ir.clamp(self.ir_floor, self.ir_cap)
    }
}

pub fn generate_pool<R: Rng + ?Sized>(cfg: &PoolConfig, rng: &mut R) -> Result<Vec<Investor>> {
    cfg.validate()?;
    let beta = match cfg.distribution.beta_params() {
        Some((a, b)) => Some(Beta::new(a, b).map_err(|e| Error::config(format!("pool: {e}")))?),
        None => None,
    };
    let investors = (0..cfg.n_investors)
        .map(|i| {
            let skill = match &beta {
                Some(d) => d.sample(rng).clamp(0.0, 1.0),
                None => 1.0,
            };
            let ir = match cfg.initial_ir {
                IrInit::Skill => cfg.clamp_ir(skill),
                IrInit::Fixed(v) => v,
            };
            Investor {
                id: i as InvestorId,
                skill,
                ir,
                wallet: cfg.wallet_size,
                scrutiny_fraction: cfg.scrutiny_fraction,
                ring_id: None,
            }
        })
        .collect();
    Ok(investors)
}

/// Skill density on `grid`. The point-mass `Perfect` distribution has zero
/// density everywhere on the open interval (0, 1).
pub fn distribution_density(dist: &IrDistribution, grid: &[f64]) -> Result<Vec<f64>> {
    dist.validate()?;
    match dist.beta_params() {
        None => Ok(vec![0.0; grid.len()]),
        Some((a, b)) => {
            let pdf = BetaPdf::new(a, b).map_err(|e| Error::config(format!("density: {e}")))?;
            Ok(grid.iter().map(|&x| pdf.pdf(x)).collect())
        }
    }
}

/// Writes `investors.csv`: `id,skill,ir,ring_id` (empty ring_id for honest investors).
pub fn write_investors_csv(path: &Path, investors: &[Investor]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "skill", "ir", "ring_id"])?;
    for inv in investors {
        w.write_record([
            inv.id.to_string(),
            inv.skill.to_string(),
            inv.ir.to_string(),
            inv.ring_id.map(|r| r.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
