//! Finite conformal deformations as operators in completed Virasoro
//! enveloping algebras, the coherent-state representations they induce, the
//! Virasoro Wick theorem for pairs of hulls, and Monte Carlo checks of SLE
//! martingales.

pub mod coherent;
pub mod deform;
pub mod error;
pub mod pbw;
pub mod poly;
pub mod quad;
pub mod series;
pub mod sle;
pub mod verma;
pub mod wick;

pub use error::{Error, Result};
pub use poly::{Poly, Var, Q};
pub use pbw::{AlgebraElement, Side, Word};
pub use series::{Basepoint, Germ, Laurent};
