//! Full analytic-versus-simulation agreement suite.

use harqmac_core::error::Result;
use harqmac_core::policies::PolicyKind;
use harqmac_core::special::derive_seed;

use crate::db_to_linear;
use crate::evaluate::{analytic_point, verify_point, PointRequest};

pub struct VerifyOutcome {
    pub lines: Vec<String>,
    pub disagreements: usize,
}

/// Run every policy at the given SNR grid and report AGREE/DISAGREE per
/// point.
pub fn run_verify(slots: u64, seed: u64, snrs_db: &[f64]) -> Result<VerifyOutcome> {
    let mut lines = Vec::new();
    let mut disagreements = 0;
    for policy in PolicyKind::ALL {
        for (i, &db) in snrs_db.iter().enumerate() {
            let req = PointRequest {
                policy,
                users: 2,
                attempts: match policy {
                    PolicyKind::CdTdmaInr => 2,
                    _ => policy.required_attempts().unwrap_or(1),
                },
                levels: match policy {
                    PolicyKind::MultilevelCdTdma | PolicyKind::CdTdmaInr => 3,
                    _ => 1,
                },
                pbar: db_to_linear(db),
                seed: derive_seed(seed, &[policy as u64 + 1, i as u64]),
                inr_budget: 100_000,
                inr_eval_slots: slots.max(200_000),
            };
            let outcome = analytic_point(&req)?;
            let verdict = verify_point(&req, &outcome, slots)?;
            let reference = outcome
                .inr_reference
                .as_ref()
                .map(|r| r.throughput_est)
                .unwrap_or(outcome.point.throughput);
            let verdict_str = if verdict.agrees() { "AGREE" } else { "DISAGREE" };
            if !verdict.agrees() {
                disagreements += 1;
            }
            lines.push(format!(
                "policy={:<16} snr_db={db:>5} analytic={reference:<12.6} simulated={:<12.6} ci3={:<10.3e} power={:<9.6} {verdict_str}",
                policy.name(),
                verdict.report.throughput_est,
                verdict.report.ci_halfwidth_throughput,
                verdict.report.power_est,
            ));
        }
    }
    Ok(VerifyOutcome { lines, disagreements })
}
