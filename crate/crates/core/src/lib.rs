//! Symbol detection and constellation design for links impaired by residual
//! amplitude distortion and Gaussian phase noise.
//!
//! The crate is organised bottom-up:
//!
//! * [`specialfn`]: Gaussian Q-function, Owen's T function and the skew-normal
//!   machinery used by the analytic error-probability approximation.
//! * [`constellation`]: QAM / SAPSK generators, normalisation and text I/O.
//! * [`channel`]: the impaired channel `r = g|s|e^{j(φ + arg s)} + n` with
//!   counter-based random streams.
//! * [`detector`]: Euclidean (EUC-D), phase-noise (GAP-D) and joint
//!   phase/amplitude distortion (PAD-D) decision rules.
//! * [`sep_analytic`]: closed-form high-SNR union-bound SEP for PAD-D.
//! * [`mc_engine`]: deterministic parallel Monte Carlo SEP estimation.
//! * [`optimizer`]: simulated annealing plus projected finite-difference
//!   refinement of free-form constellations.

pub mod channel;
pub mod constellation;
pub mod detector;
mod error;
pub mod mc_engine;
pub mod optimizer;
pub mod sep_analytic;
pub mod specialfn;

pub use channel::{snr_to_sigma_n2, ImpairmentParams, RandomStream};
pub use constellation::{
    load_constellation, make_qam, make_sapsk, normalize, save_constellation, Constellation,
    SapskSpec,
};
pub use detector::{detect, Detector, DetectorKind};
pub use error::{Error, Result};
pub use mc_engine::{estimate_sep, sweep, SepEstimate, SepSource};
pub use optimizer::{optimize, ObjectiveMode, OptimizeConfig, OptimizeResult};
pub use sep_analytic::{error_floor, pairwise_coeffs, pairwise_pep, sep_union, PairwiseStats};
pub use specialfn::{owen_t, q_function, SkewNormalParams};

pub use num_complex::Complex64;
