//! p-adic continuum models of reaction-diffusion systems on networks.
//!
//! A network with `n` vertices is embedded in the `p`-adic integers by
//! giving vertex `k` the `N`-digit code of `k`; each vertex owns the ball of
//! radius `p^{-N}` around its code. Discretising at level `M ≥ N` gives the
//! finite-dimensional spaces `X_M`, on which the diffusion operator, its
//! spectrum, the Turing conditions and the reaction-diffusion flow are
//! computed.

pub mod error;
pub mod kinetics;
pub mod linalg;
pub mod network;
pub mod operator;
pub mod padic;
pub mod simulate;
pub mod spectral;
pub mod turing;

pub use error::{Error, Result};
pub use network::{embed, refine, Graph, LevelGrid, NetworkEmbedding, Site};
pub use operator::{OperatorKind, OperatorMatrix};
pub use padic::{PAdicCode, PFraction};
