//! Regularization of the switching: `sign(y)` is replaced by `ψ(y/ε)` and
//! the threshold becomes a layer `|v| ≤ 1` in the fast variable `v = y/ε`.

pub mod exit;
pub mod integrator;
pub mod layer;
pub mod orbits;
pub mod transition;
pub mod vr;

pub use integrator::{integrate_layer, integrate_layer_until, LayerOptions, LayerRun, StopReason, StopRule};
pub use layer::{critical_branch, fold_points, layer_field, slow_manifold_expansion, LayerState, LayerSystem};
