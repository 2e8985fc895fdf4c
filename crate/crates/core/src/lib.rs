//! Simulation and analysis of a first-order oscillator whose forcing
//! frequency switches when the state crosses `y = 0`.
//!
//! Two switching models are covered: a *linear* (Filippov) combination of
//! the two forcings and a *nonlinear* one in which the switching multiplier
//! enters the frequency itself. Both are available as discontinuous hybrid
//! systems and as smooth regularizations with a thin switching layer.
//!
//! ```
//! use switchosc::poincare;
//!
//! let orbit = poincare::find_nonsliding_period4(0.01, 1e-13).unwrap();
//! assert!((orbit.x_star - 0.6261249968).abs() < 1e-8);
//! assert!(orbit.multiplier > 0.0 && orbit.multiplier < 1.0);
//! ```

pub mod analytic;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod io;
pub mod model;
pub mod plot;
pub mod poincare;
pub mod regularization;
pub mod roots;
pub mod sliding;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{
    classify_threshold_point, forcing, params_from_circuit, vector_field, BranchId, Frequencies,
    Frequency, HybridState, Mode, OscillatorParams, Region, Side, SwitchingModel,
};
pub use regularization::transition::TransitionFunction;
pub use trajectory::{Event, EventKind, Segment, Trajectory};
