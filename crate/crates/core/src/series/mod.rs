//! Truncated multivariate power series and series expansions of extremal
//! flows.

pub mod flow;
pub mod locus;
pub mod truncated;

pub use flow::{
    bc_flow, crossing_test, gamma_surface, lie_series_flow, switching_surface_series, ControlLaw,
    FlowExpansion, PolynomialSystem, SwitchingSurface,
};
pub use truncated::{poisson, Polynomial, Ring, TruncatedSeries};
pub use locus::{
    newton, singular_leaf, singular_leaf_numeric, splitting_locus, FlowMap, LeafSample, LocusGrid, LocusKind,
    LocusSample, NewtonOptions, SingularLeaf,
};
