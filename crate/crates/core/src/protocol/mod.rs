//! Review protocols: the Current Protocol baseline and the two Impact Market models.

pub mod cp;
pub mod passive;
pub mod rebel;

use serde::{Deserialize, Serialize};

/// Protocol selector used in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "CP")]
    Cp,
    #[serde(rename = "IM_PASSIVE")]
    ImPassive,
    #[serde(rename = "IM_REBEL")]
    ImRebel,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Cp => "CP",
            Protocol::ImPassive => "IM-PASSIVE",
            Protocol::ImRebel => "IM-REBEL",
        }
    }
}

/// Clamps every entry of `alloc` at `cap` and redistributes the excess over
/// the unclamped entries in proportion to their weight, until no entry exceeds
/// the cap. When `cap * alloc.len()` is below the budget every entry ends at
/// `cap` and the rest of the budget stays unspent.
pub fn apply_cap(alloc: &mut [f64], cap: f64) {
    let total: f64 = alloc.iter().sum();
    let mut fixed = vec![false; alloc.len()];
    loop {
        let over: Vec<usize> = (0..alloc.len()).filter(|&i| !fixed[i] && alloc[i] > cap).collect();
        if over.is_empty() {
            return;
        }
        for &i in &over {
            alloc[i] = cap;
            fixed[i] = true;
        }
        let fixed_sum: f64 = (0..alloc.len()).filter(|&i| fixed[i]).map(|i| alloc[i]).sum();
        let free_sum: f64 = (0..alloc.len()).filter(|&i| !fixed[i]).map(|i| alloc[i]).sum();
        let remaining = (total - fixed_sum).max(0.0);
        if free_sum <= 0.0 {
            // every entry clamped or zero-weighted
            return;
        }
        let scale = remaining / free_sum;
        for i in 0..alloc.len() {
            if !fixed[i] {
                alloc[i] *= scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_redistributes_excess() {
        let mut a = vec![70.0, 20.0, 10.0];
        apply_cap(&mut a, 40.0);
        assert!((a[0] - 40.0).abs() < 1e-12);
        assert!((a.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        // excess 30 split 2:1
        assert!((a[1] - 40.0).abs() < 1e-9 && (a[2] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_cap_saturates() {
        let mut a = vec![50.0, 50.0];
        apply_cap(&mut a, 10.0);
        assert_eq!(a, vec![10.0, 10.0]);
    }

    #[test]
    fn cascade_clamps() {
        // after clamping 90 -> 20 the redistribution pushes the next entry over the cap too
        let mut a = vec![90.0, 6.0, 2.0, 2.0, 0.0];
        apply_cap(&mut a, 30.0);
        assert!(a.iter().all(|&x| x <= 30.0 + 1e-9));
        assert!((a.iter().sum::<f64>() - 100.0).abs() < 1e-9);
        assert_eq!(a[4], 0.0);
        assert!((a[1] - 30.0).abs() < 1e-9);
    }
}
