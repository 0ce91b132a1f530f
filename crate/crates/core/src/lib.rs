//! Flat rectangle covers for bivariate polynomials and smooth surfaces,
//! with certificates and a numerical decoupling estimator.

pub mod certify;
pub mod constants;
pub mod cover2d;
pub mod decest;
pub mod error;
pub mod flat1d;
pub mod hesssmall;
pub mod implicit2d;
pub mod partition3d;
pub mod polycore;
pub mod roots1d;
pub mod smooth;

pub use constants::ConstantsTable;
pub use cover2d::Rect;
pub use error::{Error, Result};
pub use partition3d::FlatCover;
pub use polycore::{AffineMap2, Poly1, Poly2};
