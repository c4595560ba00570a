//! Hodge cascade u^q = (κ∪u^{q−1})_h over a sampled base, its curvature
//! inequalities, and the Finsler metric built from the potentials φ_q.

mod bergman;
mod cascade;
mod metric;

pub use bergman::{bergman_cy, degeneration_probe, BergmanCy, DegenerationTrace, TraceRow};
pub use cascade::{
    cascade_at, cascade_curvature_check, run_cascade, to_yeung_check, BaseGrid, CascadeCheck, CascadePoint, CascadeState,
    CASCADE_TOL, VANISHING,
};
pub use metric::{
    ahlfors_schwarz, build_finsler, comparison_density, convexity_gap, default_discs, disc_samples, finsler_coefficients,
    finsler_weight, kobayashi_bound, DiscCheck, DiscMap, FinslerMetric, KobayashiReport,
};
