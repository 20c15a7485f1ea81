//! Convex relaxations of AC optimal power flow.
//!
//! Networks are read from MATPOWER case files or built by hand, relaxed
//! into conic programs (full SDP, chordal SDP, edge-wise SOCP and the
//! branch flow SOCP), solved with the embedded interior-point solver from
//! `opfrelax-conic`, and checked for exactness. An exact relaxation yields
//! an optimal voltage profile.

pub mod cases;
pub mod chordal;
pub mod network;
pub mod partial;
pub mod projection;
pub mod recovery;
pub mod relax;

pub use chordal::{chordal_extend, fundamental_cycles, is_chordal, mcs_order, ChordalExtension, Graph};
pub use network::{parse_matpower, to_matpower, Bus, Complex, CostKind, CostSpec, Line, Network, NetworkError};
pub use partial::{GPartialMatrix, HermitianMatrix, PartialError};
pub use recovery::{
    compare_relaxations, f_map, g_inv, g_map, recover_bf, recover_from_full, recover_from_partial, BranchFlowPoint,
    ComparisonRow, ExactnessTolerances, RecoveryError, RecoveryReport, VoltageProfile,
};
pub use cases::{load_case, table1, BundledCase, CaseError};
pub use projection::{
    project_convex, project_edge_rank1, project_nonconvex, raster_components, raster_resolution, CloudPoint, Plane, ProjectionError, ProjectionSpec,
    RasterComponents, SupportPoint,
};
pub use relax::{build, build_bf, build_r1, build_r2, build_rch, BuiltProgram, Objective, OpfModel, Pin, RelaxError, RelaxedPoint, Relaxation};
