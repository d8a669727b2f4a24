//! Manufactured solutions, integral identities and estimate-with-scale sweeps.

mod identities;
mod manufactured;
mod sweep;

pub use identities::{
    ibp_identity, ibp_mismatch, maclaurin_field_check, sigma2_rewrite_check, stokes_invariant,
    third_order_contraction_check, torsion_curvature_check, InequalityReport, OriginalConvention,
};
pub use manufactured::{
    manufacture, reference_profile, reference_rho, reference_state, ManufacturedCase,
    MANUFACTURED_MEAN_TOL,
};
pub use sweep::{
    scale_sweep, ColumnRule, ColumnSummary, SweepFamily, SweepRow, SweepSummary, SweepTable,
    SWEEP_FACTOR,
};
