//! Benchmark inputs shared by the criterion targets.

use flatdec_core::Poly2;

/// A fixed cubic with both curved and flat regions.
pub fn sample_cubic() -> Poly2 {
    "x^3 + 0.5*x^2*y - 0.3*y^3 + 0.2*x*y + 0.4*y^2".parse().expect("valid polynomial")
}
