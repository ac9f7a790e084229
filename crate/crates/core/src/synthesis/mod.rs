//! Stratification of the target, local syntheses from the catalog of
//! cases, closed-form McKeithan strata and a brute-force reference.

pub mod catalog;
pub mod mckeithan;
pub mod oracle;
pub mod strata;

pub use catalog::{
    attach_splitting_loci, classify_anchor, local_synthesis, sweep_loci, CatalogLabel, LocusPoint, SynthesisLoci,
    SynthesisOptions, SynthesisReport,
};
pub use mckeithan::{
    exceptional_discriminant, exceptional_residual, locus_separation, mckeithan_exceptional_locus,
    mckeithan_singular_locus, semi_bridge_points, singular_discriminant, singular_residual, BranchSample,
    ClosedFormLocus, SemiBridgePoint, SemiBridges,
};
pub use oracle::{brute_force_oracle, brute_force_oracle_with, OracleOptions, OracleResult};
pub use strata::{
    intersect_loci, locus_value_grad, stratify_target, trace_locus, LocusFn, Stratification, StrataTolerances,
    StratumSample, TargetGrid, TargetPlane,
};
