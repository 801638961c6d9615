//! Published reference rows at `tau = 0.5`: strategy, the fractions that were
//! fixed by hand, and the reported fractions, initial state and cost.

use std::sync::OnceLock;

use cstr_periodic_core::StrategyId;
use serde::Deserialize;

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub strategy: String,
    /// `(index, value)` with 1-based indices.
    pub pinned: Vec<(usize, f64)>,
    pub alpha: Vec<f64>,
    pub x0: [f64; 2],
    pub cost: f64,
}

impl ReferenceRow {
    pub fn strategy_id(&self) -> StrategyId {
        self.strategy
            .parse()
            .expect("manifest strategies are valid")
    }

    /// Pinned fractions with 0-based indices.
    pub fn pins(&self) -> Vec<(usize, f64)> {
        self.pinned.iter().map(|&(i, v)| (i - 1, v)).collect()
    }
}

pub const REFERENCE_TAU: f64 = 0.5;

static ROWS: OnceLock<Vec<ReferenceRow>> = OnceLock::new();

pub fn reference_rows() -> &'static [ReferenceRow] {
    ROWS.get_or_init(|| {
        serde_json::from_str(include_str!("../data/reference_rows.json"))
            .expect("embedded manifest parses")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_shape() {
        let rows = reference_rows();
        assert_eq!(rows.len(), 17);
        for r in rows {
            let n = r.strategy_id().strategy.len();
            assert_eq!(r.alpha.len(), n, "{r:?}");
            assert!(r.pinned.iter().all(|&(i, _)| (1..=n).contains(&i)));
            assert!((r.alpha.iter().sum::<f64>() - 1.0).abs() < 2e-4, "{r:?}");
        }
    }
}
