//! Numerical laboratory for the semilinear heat equation
//! `u_t = u_xx + c(t) u^p` on `(0, L)` with the nonlinear memory flux
//! `∂u/∂ν = k(t) ∫_0^t u^q dτ` at both endpoints.

pub mod asymptotic;
pub mod coeffs;
pub mod constructions;
pub mod criteria;
pub mod error;
pub mod ode_oracle;
pub mod pde;
pub mod quad;
pub mod transform;
pub mod weights;

pub use coeffs::{CoefficientSpec, Family, IntegralStatus, IntegralVerdict, QuadraturePolicy, Weight};
pub use criteria::{classify_regime, Regime, RegimeVerdict, Rule};
pub use error::{Error, Result};
