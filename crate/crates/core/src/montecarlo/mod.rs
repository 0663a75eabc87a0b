//! Simulation-based verification of the optimality and duality statements.

pub mod ito;
pub mod martingale;
pub mod rhq;
pub mod stats;

pub use ito::{minimal_measure_constant, minimal_measure_density, ItoModel};
pub use martingale::{
    dual_supermartingale_test, dual_supermartingale_test_blocks, primal_martingale_test, primal_martingale_test_on, suboptimality_gap, verdict,
    GapReport, MartingaleTestReport, Verdict, SE_BAND,
};
pub use rhq::{
    dichotomy_check, lognormal_ratios, optimal_dual_ratios, optimal_dual_rhq, phi_curve, phi_lognormal, ratios, rhq_constant_transfer, rhq_estimate, rhq_moments, DichotomyReport, PhiCurve,
    RhqReport, TransferCheck,
};
pub use stats::{Estimate, Moments};

/// Size and seed of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Number of checkpoint intervals for martingale tests.
    pub checkpoints: usize,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self { n_paths, seed, checkpoints: 10 }
    }
}
