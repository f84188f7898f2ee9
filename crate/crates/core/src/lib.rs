//! Linear water waves on a monotone shear current in a channel of finite
//! depth: Rayleigh shooting, the dispersion function, neutral modes and
//! the continuation of unstable eigenvalue branches.

pub mod contour;
pub mod dispersion;
pub mod expr;
pub mod modes;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod rayleigh;
pub mod roots;
pub mod scalar;
pub mod sturm;
pub mod tolerances;
pub mod tracer;

pub use dispersion::{DispersionSample, Physics, SampleValidity};
pub use expr::ProfileExpr;
pub use profile::{Inflection, ShearProfile};
pub use rayleigh::{CriticalLayer, RaySolution, SolverOptions};
