//! One module per subcommand. Each builds its task list, runs it through
//! the [`Runner`](crate::Runner) and assembles artifacts in task order.

pub mod calibrate;
pub mod levels;
pub mod nems;
pub mod qpt;
pub mod ramp;

use crate::config::{ExperimentConfig, SweepPoint};
use kerrcat_core::dynamics::LindbladModel;
use kerrcat_core::schedule::CompensationStrategy;

pub fn strategy_name(s: CompensationStrategy) -> &'static str {
    match s {
        CompensationStrategy::None => "none",
        CompensationStrategy::Static => "static",
        CompensationStrategy::Dynamic => "dynamic",
    }
}

/// Decoherence setting of a task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelVariant {
    Noiseless,
    Lindblad(LindbladModel),
}

impl ModelVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::Noiseless => "noiseless",
            ModelVariant::Lindblad(_) => "lindblad",
        }
    }

    pub fn model(&self) -> Option<&LindbladModel> {
        match self {
            ModelVariant::Noiseless => None,
            ModelVariant::Lindblad(m) => Some(m),
        }
    }

    /// Noiseless always; the configured Lindblad model when present.
    pub fn all(config: &ExperimentConfig) -> Vec<Self> {
        let mut v = vec![ModelVariant::Noiseless];
        if let Some(m) = config.model() {
            v.push(ModelVariant::Lindblad(m));
        }
        v
    }
}

/// Every (point, strategy) pair in configuration order.
pub fn point_strategy_pairs(config: &ExperimentConfig) -> Vec<(SweepPoint, CompensationStrategy)> {
    let strategies = &config.protocol.strategies;
    config
        .sweep()
        .into_iter()
        .flat_map(|p| strategies.iter().map(move |&s| (p, s)))
        .collect()
}
