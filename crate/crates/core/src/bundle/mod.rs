//! Hodge bundles over the base stencil: frames, Gram metrics, the Chern
//! connection and its curvature, by the analytic formulas and by finite
//! differences of Gram matrices.

mod curvature;
mod duality;
mod frame;
mod oracle;

pub use curvature::{
    analytic_terms, curvature, curvature_flat, curvature_negative, curvature_positive, regime_name, terms_flat,
    terms_negative, terms_positive, CurvatureReport, TermBlocks, VectorTerms,
};
pub use duality::{serre_duality_check, serre_from_reports, serre_pairing, SerreReport};
pub use frame::{build_frame, connection, gram_matrix, ConnectionData, HodgeFrame};
pub use oracle::{curvature_fd_oracle, FdCurvature, OracleMeta};
