//! Numerical laboratory for two families of open problems:
//!
//! - Erdős–Mordell-type inequalities `Σ|MA_i| ≥ c·Σ|MP_i|` for convex polygons
//!   ([`geom2d`]), convex polyhedra ([`geom3d`]), and the nested derivative-free
//!   search that estimates the best constants ([`optimizer`]).
//! - The generalized Fermat family `P(k) = a^(b^k) + c` ([`fermat`]): exact
//!   evaluation, algebraic compositeness filters, layered primality testing and
//!   prime searches.
//!
//! Results are persisted as JSON Lines through [`store`], and everything is
//! reachable from the `conjlab` binary ([`cli`]).

pub mod cli;
pub mod fermat;
pub mod geom2d;
pub mod geom3d;
pub mod optimizer;
pub mod par;
pub mod store;
