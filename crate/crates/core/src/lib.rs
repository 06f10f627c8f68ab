//! Bifurcation toolkit for periodic traveling waves of the capillary-gravity
//! Whitham equation `u − c L_T u + L_T(u²) = 0`.
//!
//! The modules build on each other bottom-up:
//!
//! * [`symbol`]: the dispersion symbol and the location of bifurcation points.
//! * [`kernel`]: the convolution kernel of `L_T` on the line and on the circle.
//! * [`spectral`]: cosine-series discretization of the steady equation.
//! * [`continuation`]: Newton, pseudo-arclength continuation, event detection.
//! * [`asymptotics`]: second-order local expansions at simple bifurcation points.
//! * [`twodim`]: two-parameter solution sheets at double bifurcation points.
//! * [`diagnostics`]: exact identities and qualitative checks on solutions.
//! * [`io`]: line-delimited persistence of branches and sheets.

pub mod asymptotics;
pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod kernel;
pub(crate) mod special;
pub mod spectral;
pub mod symbol;
pub mod twodim;

pub use error::{Error, Result};
pub use spectral::{CosineSeries, SteadyState};
pub use symbol::{BifurcationKind, BifurcationPoint, SymbolParams};

/// Crate version recorded in persisted file headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
