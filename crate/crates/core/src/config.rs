use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label inheritance rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// Inherit the heads of the most overhanging in-neighbor only.
    A,
    /// Inherit the union of the heads of every overhanging in-neighbor.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    /// Sum of the similarities of all oriented links inside the 1-neighborhood.
    Sum,
    /// The same sum divided by `n (n - 1)`, `n` the 1-neighborhood size.
    Coefficient,
}

/// Which in-neighbors count as overhanging ("surplombant").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurplombantMode {
    /// Any in-neighbor of strictly greater density.
    StrictGreater,
    /// Only an in-neighbor whose density strictly exceeds that of the node
    /// and of every other member of the node's 1-neighborhood.
    DominatesNeighborhood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub k: usize,
    pub sim_threshold: f64,
    pub rule: Rule,
    pub density: DensityKind,
    pub surplombant: SurplombantMode,
    /// When a node has no overhanging in-neighbor but has older in-neighbors
    /// of exactly equal density, inherit from them instead of founding a
    /// class. Makes the head of a density plateau depend on arrival order.
    #[serde(default)]
    pub plateau_oldest: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k: 3,
            sim_threshold: 0.1,
            rule: Rule::B,
            density: DensityKind::Sum,
            surplombant: SurplombantMode::StrictGreater,
            plateau_oldest: false,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.sim_threshold) {
            return Err(Error::InvalidConfig(format!(
                "similarity threshold {} outside [0, 1)",
                self.sim_threshold
            )));
        }
        Ok(())
    }
}
