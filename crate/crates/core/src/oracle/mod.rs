//! Independent brute-force checks: finite-difference gradients and
//! exhaustive permissibility audits.

mod audit;
mod gradcheck;

pub use audit::{
    audit_actions, permissibility_audit, permissible_existence_scan, sample_states, true_label, AuditRecord,
    AuditReport, CheatingModel, ConfusionStats, ExistenceScan, FeatureModel, OracleError,
};
pub use gradcheck::{finite_diff_grad, grads_agree};
