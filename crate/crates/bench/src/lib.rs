//! Benchmark fixtures shared by the criterion targets.

use hwdetect_core::{make_qam, Constellation, ImpairmentParams};

/// A square QAM at the given order with σ_g² = σ_φ² = 10⁻³.
pub fn fixture(order: usize, snr_db: f64) -> (Constellation, ImpairmentParams) {
    let c = make_qam(order).expect("supported QAM order");
    let p = ImpairmentParams::at_snr_db(snr_db, 1e-3, 1e-3).expect("valid impairments");
    (c, p)
}
