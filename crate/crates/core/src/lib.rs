//! Long-term throughput of power-controlled repetition protocols on the
//! K-user block-fading Gaussian multiple access channel.
//!
//! The crate has three layers:
//!
//! * closed-form policy throughputs and their optimized operating points
//!   ([`policies`]), benchmarked against the ergodic water-filling
//!   capacity ([`capacity`]);
//! * a slot-level Monte Carlo engine ([`sim`]) that runs the actual
//!   protocols (feedback computation, power selection, decoding,
//!   renewal-reward accounting) and verifies every closed form;
//! * the exact Markov renewal analysis of the two-user ALO scheduler
//!   ([`markov`]).
//!
//! Rates are nats per channel use throughout; noise and fading are unit
//! power, so a power budget is also an average SNR.

pub mod capacity;
pub mod error;
pub mod markov;
pub mod optimize;
pub mod policies;
pub mod sim;
pub mod special;

pub use capacity::{ewfc_capacity, ewfc_power_of_level, PowerConvention, WaterFillingSolution};
pub use error::{Error, Result};
pub use markov::{alo_renewal_quantities, build_alo_fsm, stationary_distribution, FsmModel};
pub use optimize::{maximize_1d, maximize_nd, OptimizerConfig};
pub use policies::{PolicyKind, PolicyParams, ThroughputPoint};
pub use sim::{inr_single_user, optimize_inr_levels, simulate, SimReport, SystemSpec};
pub use special::{exp_integral, max_fading_cdf, sample_fading, FadingModel};
