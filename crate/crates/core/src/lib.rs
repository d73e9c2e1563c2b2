//! Log-correlated Gaussian fields built from decomposable kernels, mollified complex
//! multiplicative chaos, and the Monte Carlo checks that go with them.

pub mod chaos;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod mollifier;
pub mod phase;
pub mod quad;
pub mod rng;
pub mod sampler;
pub mod verify;

pub use chaos::{
    chaos_density, chaos_integral, sobolev_diag, truncated_chaos, truncation_indicator, wick_exp, ChaosInput,
    ChaosMode, ChaosParams, ChaosValue, Indicator, TestFunction, Truncation, TruncationVariant, VarianceTable, Wick,
};
pub use error::{Error, Result};
pub use grid::{shrink_domain, BoxDomain, Grid, Layout, ShrunkenDomain};
pub use kernels::{
    k_exact, k_mollified, k_partial, kappa, pd_check, q_n, GramLevel, KernelSpec, MidpointRule, MollifiedCovariance,
    MollifiedKernelTable, PdReport, Q0Kind,
};
pub use mollifier::{convolve_grid, theta_eps, MollifiedField, MollifierSpec, Profile};
pub use phase::{classify, lambda_admissible, lambda_interval, phase_scan, pick_lambda, Phase, PhaseLabel};
pub use rng::{map_replicas, replica_rng, Channel};
pub use sampler::{
    apply_tilt, sample_increments, sample_mollified, Backend, FieldSample, FieldSampler, TiltMeans, TiltShift,
};
