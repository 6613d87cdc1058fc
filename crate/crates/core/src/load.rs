//! Reviewer workload of the Current Protocol and the Impact Market for one venue.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    pub n_submissions: f64,
    pub pc_size: f64,
    pub erc_size: f64,
    pub cp_initial_reviews_per_paper: f64,
    /// Share of papers that reach the second review round.
    pub cp_phase2_fraction: f64,
    pub cp_phase2_extra_reviews: f64,
    /// Share of first-round reviews written by the ERC; the PC writes the
    /// rest plus every second-round review.
    pub cp_erc_initial_share: f64,
    pub im_p1_pc_reviews: f64,
    pub im_p1_erc_reviews: f64,
    /// Investment reads per PC member.
    pub im_scrutiny: f64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            n_submissions: 850.0,
            pc_size: 150.0,
            erc_size: 100.0,
            cp_initial_reviews_per_paper: 3.0,
            cp_phase2_fraction: 0.6,
            cp_phase2_extra_reviews: 2.0,
            // 760 of the 2550 first-round reviews: 7.6 per ERC member
            cp_erc_initial_share: 76.0 / 255.0,
            im_p1_pc_reviews: 2.0,
            im_p1_erc_reviews: 1.0,
            im_scrutiny: 10.0,
        }
    }
}

impl LoadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pc_size > 0.0 && self.erc_size > 0.0) {
            return Err(Error::config("load: pc_size and erc_size must be positive"));
        }
        let counts = [
            self.n_submissions,
            self.cp_initial_reviews_per_paper,
            self.cp_phase2_extra_reviews,
            self.im_p1_pc_reviews,
            self.im_p1_erc_reviews,
            self.im_scrutiny,
        ];
        if counts.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::config("load: counts must be non-negative"));
        }
        for (name, f) in [("cp_phase2_fraction", self.cp_phase2_fraction), ("cp_erc_initial_share", self.cp_erc_initial_share)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(format!("load: {name} must lie in [0, 1], got {f}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpLoad {
    pub pc_reviews_per_member: f64,
    pub erc_reviews_per_member: f64,
    pub pc_reviews_per_paper: f64,
    pub total_reviews: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImLoad {
    pub pc_phase1_per_member: f64,
    pub pc_phase2_reads_per_member: f64,
    pub total_per_pc_member: f64,
    pub erc_phase1_per_member: f64,
}

pub fn cp_load(cfg: &LoadConfig) -> Result<CpLoad> {
    cfg.validate()?;
    let initial = cfg.n_submissions * cfg.cp_initial_reviews_per_paper;
    let phase2 = cfg.n_submissions * cfg.cp_phase2_fraction * cfg.cp_phase2_extra_reviews;
    let erc = initial * cfg.cp_erc_initial_share;
    let pc = initial - erc + phase2;
    let per_paper = if cfg.n_submissions > 0.0 { pc / cfg.n_submissions } else { 0.0 };
    Ok(CpLoad {
        pc_reviews_per_member: pc / cfg.pc_size,
        erc_reviews_per_member: erc / cfg.erc_size,
        pc_reviews_per_paper: per_paper,
        total_reviews: initial + phase2,
    })
}

pub fn im_load(cfg: &LoadConfig) -> Result<ImLoad> {
    cfg.validate()?;
    let p1 = cfg.n_submissions * cfg.im_p1_pc_reviews / cfg.pc_size;
    Ok(ImLoad {
        pc_phase1_per_member: p1,
        pc_phase2_reads_per_member: cfg.im_scrutiny,
        total_per_pc_member: p1 + cfg.im_scrutiny,
        erc_phase1_per_member: cfg.n_submissions * cfg.im_p1_erc_reviews / cfg.erc_size,
    })
}

/// Two-protocol comparison as aligned text.
pub fn comparison_table(cp: &CpLoad, im: &ImLoad) -> String {
    let rows = [
        ("PC reviews per member", format!("{:.2}", cp.pc_reviews_per_member), format!("{:.2}", im.pc_phase1_per_member)),
        ("PC investment reads per member", "-".to_string(), format!("{:.2}", im.pc_phase2_reads_per_member)),
        ("PC total per member", format!("{:.2}", cp.pc_reviews_per_member), format!("{:.2}", im.total_per_pc_member)),
        ("ERC reviews per member", format!("{:.2}", cp.erc_reviews_per_member), format!("{:.2}", im.erc_phase1_per_member)),
        ("PC reviews per paper", format!("{:.2}", cp.pc_reviews_per_paper), "-".to_string()),
    ];
    let mut out = format!("{:<32} {:>8} {:>8}\n", "", "CP", "IM");
    for (label, a, b) in rows {
        out.push_str(&format!("{label:<32} {a:>8} {b:>8}\n"));
    }
    out
}

/// Writes `load.csv`: `protocol,metric,value`.
pub fn write_load_csv(path: &Path, cp: &CpLoad, im: &ImLoad) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["protocol", "metric", "value"])?;
    let rows = [
        ("CP", "pc_reviews_per_member", cp.pc_reviews_per_member),
        ("CP", "erc_reviews_per_member", cp.erc_reviews_per_member),
        ("CP", "pc_reviews_per_paper", cp.pc_reviews_per_paper),
        ("CP", "total_reviews", cp.total_reviews),
        ("IM", "pc_phase1_per_member", im.pc_phase1_per_member),
        ("IM", "pc_phase2_reads_per_member", im.pc_phase2_reads_per_member),
        ("IM", "total_per_pc_member", im.total_per_pc_member),
        ("IM", "erc_phase1_per_member", im.erc_phase1_per_member),
    ];
    for (p, m, v) in rows {
        w.write_record([p, m, &v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
