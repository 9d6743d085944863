//! Geometric ray tracing through a city layout.

pub mod em;
pub mod scene;
pub mod tracer;

pub use em::{diffraction_loss, knife_edge_loss_db, reflection_coefficient, slab_transmission, Polarization};
pub use scene::Scene;
pub use tracer::{
    line_of_sight, path_amplitude, path_response, rank_paths, trace_paths, Interaction, LineOfSight,
    PathResponse, PropagationPath, RayGeometry, TraceConfig, TxTracer,
};
