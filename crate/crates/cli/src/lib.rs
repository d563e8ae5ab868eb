//! Library surface of the CLI: configuration parsing, sweep execution and
//! the verification suite, kept separate from argument handling so the
//! integration tests can drive them directly.

pub mod config;
pub mod evaluate;
pub mod sweep;
pub mod verify;

/// Convert a dB value to linear power (unit noise, unit fading power, so
/// this is also the average SNR).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
