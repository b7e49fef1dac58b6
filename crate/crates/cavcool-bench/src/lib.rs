//! Benchmark-only crate; see the `benches/` targets.
//!
//! Shared parameter points used by both benchmark files.

use cavcool::SystemParams;

/// A representative cooling point on the upper resonance.
pub fn upper_resonance() -> SystemParams {
    SystemParams {
        nu: 1.0,
        delta: 6.0,
        omega: 5.0,
        kappa: 1.0,
        gamma_atom: 1.0,
        eta: 0.05,
        g: 1.0,
    }
}

/// The oracle validation point.
pub fn oracle_point() -> SystemParams {
    SystemParams {
        nu: 1.0,
        delta: 3.0,
        omega: 2.0,
        kappa: 1.0,
        gamma_atom: 1.0,
        eta: 0.02,
        g: 5.0,
    }
}
