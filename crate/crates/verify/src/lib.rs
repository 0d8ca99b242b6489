//! Independent oracles and acceptance checks for `vtol-nav`.

pub mod criteria;
pub mod fit;
pub mod oracle;

use std::fmt;

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

/// Every acceptance criterion, in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criteria::algebra(),
        criteria::exponentials(),
        criteria::reconstruction(),
        criteria::observer_convergence(),
        criteria::tracking_convergence(),
        criteria::noisy_robustness(),
        criteria::derivative_oracles(),
        criteria::quaternion_equivalence(),
        criteria::integrator_physics(),
        criteria::determinism_and_replay(),
    ]
}
