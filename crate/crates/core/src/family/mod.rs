//! Geometry of a family of tori over a disc in the t-plane: the Kähler form Ω
//! on the total space, horizontal lifts, Kodaira–Spencer forms and the
//! decomposition of ∂̄û and ∂^φû for a vertical representative û.

mod geometry;
mod scenario;
mod stencil;
mod total;

pub use geometry::{
    cup_product, geodesic_curvature, geodesic_curvature_at, horizontal_lift, kodaira_spencer, omega_adapted,
    omega_coords, FiberVectorField, KodairaSpencerForm,
};
pub use scenario::{catalog_entry, CatalogEntry, FamilyKind, FamilyScenario, PeriodMap, CATALOG};
pub use stencil::{deform_decompose, DeformDecomposition, FamilyPoint, FamilyStencil, FdMeta, PointSet, ARMS, FD_CONSISTENCY};
pub use total::{vertical_projection, Gens, TotalForm, TotalVector};
