//! Newton-equivalent Hamiltonians and Lagrangians for systems with one
//! degree of freedom.
//!
//! The crate builds every member of the family as an evaluable object
//! ([`zoo`]), integrates their phase flows ([`dynamics`]), realises the
//! matching Lagrangian hierarchy by quadrature ([`legendre`]), and checks the
//! identities that tie them together ([`verify`]).

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod expr;
pub mod legendre;
pub mod quad;
pub mod verify;
pub mod zoo;

pub use error::{Result, ZooError};
pub use expr::{parse_potential, Expr, Potential};
pub use zoo::{
    chain_factor, eval_derivs, eval_h, HDerivs, HamiltonianSpec, PhasePoint, Sign, SystemParams,
};
