//! Collaborative beamforming for amplify-and-forward two-way relay networks.
//!
//! Two single-antenna sources exchange data through a cluster of `K`
//! single-antenna relays. Each relay scales its received superposition by a
//! complex weight and forwards it; each source cancels its own
//! self-interference before decoding. This crate computes the beamforming
//! weights that trace the boundary of the achievable rate region and
//! assembles the region itself:
//!
//! * [`model`]: channels, system parameters, SNR/rate/power evaluation.
//! * [`recip`]: closed-form weighted sum inverse-SNR minimizers for
//!   reciprocal channels, plus the local (per-relay) weight rules.
//! * [`sdp`]: a small dense interior-point SDP solver.
//! * [`nonrecip`]: rate-profile bisection over semidefinite relaxations for
//!   non-reciprocal channels, with rank-one recovery.
//! * [`heuristics`]: equal-power, max-power and greedy-phase baselines.
//! * [`region`]: Monte Carlo region construction, hulls, containment, I/O.
//! * [`oracle`]: brute-force reference engines for validation.

pub mod error;
pub mod heuristics;
pub mod linalg;
pub mod model;
pub mod nonrecip;
pub mod oracle;
pub mod recip;
pub mod region;
pub mod sdp;

pub use error::{Error, Result};
pub use model::{
    map_u, map_u_inverse, rate_pair, relay_powers, snr_pair, Beamformer, ChannelSet,
    NoiseMatrices, PowerBudget, RatePair, SnrPair, SystemParams,
};
pub use num_complex::Complex64;
