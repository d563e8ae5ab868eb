//! Evaluation of one (policy, power) point: analytic/optimized operating
//! point plus optional simulation verification.

use harqmac_core::error::{Error, Result};
use harqmac_core::optimize::OptimizerConfig;
use harqmac_core::policies::{self, InrEvalOptions, PolicyKind, ThroughputPoint};
use harqmac_core::sim::{simulate, SimReport, SystemSpec};
use harqmac_core::special::{derive_seed, FadingModel};

/// Fully resolved request for one evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct PointRequest {
    pub policy: PolicyKind,
    pub users: usize,
    pub attempts: usize,
    pub levels: usize,
    pub pbar: f64,
    pub seed: u64,
    /// Slots per objective evaluation of the INR level optimizer.
    pub inr_budget: u64,
    /// Slots of the final INR throughput estimate.
    pub inr_eval_slots: u64,
}

impl PointRequest {
    pub fn feedback_size(&self) -> usize {
        self.policy.implied_feedback(self.users, self.levels)
    }

    pub fn system_spec(&self) -> SystemSpec {
        SystemSpec {
            k_users: self.users,
            max_attempts: self.attempts,
            feedback_size: self.feedback_size(),
            power_budget: self.pbar,
            fading: FadingModel::UnitRayleigh,
        }
    }

    /// Check the (policy, K, M) combination before doing any work.
    pub fn validate(&self) -> Result<()> {
        if self.users < 1 {
            return Err(Error::Config("user count must be at least 1".into()));
        }
        let f = self.feedback_size();
        if let Some(m) = self.policy.required_attempts() {
            if self.attempts != m {
                return Err(Error::Config(format!(
                    "policy {} requires M={m} (implied F={f}), got M={}",
                    self.policy, self.attempts
                )));
            }
        }
        match self.policy {
            PolicyKind::JointDecoding | PolicyKind::JointPlusTdma | PolicyKind::CdTdmaAlo => {
                if self.users != 2 {
                    return Err(Error::Config(format!(
                        "policy {} has a two-user closed form only (implied F={f}), got K={}",
                        self.policy, self.users
                    )));
                }
            }
            _ => {}
        }
        if matches!(self.policy, PolicyKind::MultilevelCdTdma | PolicyKind::CdTdmaInr)
            && self.levels < 1
        {
            return Err(Error::Config("level count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Analytic (or, for INR, simulation-optimized) operating point. The INR
/// reference report rides along when one was produced.
pub struct PointOutcome {
    pub point: ThroughputPoint,
    pub inr_reference: Option<SimReport>,
}

pub fn analytic_point(req: &PointRequest) -> Result<PointOutcome> {
    req.validate()?;
    let cfg = OptimizerConfig::default();
    let point = match req.policy {
        PolicyKind::StaticTdma => policies::static_tdma(req.users, req.pbar, &cfg)?,
        PolicyKind::JointDecoding => policies::joint_decoding_sym(req.pbar, &cfg)?,
        PolicyKind::JointPlusTdma => policies::joint_plus_tdma(req.pbar, &cfg)?,
        PolicyKind::CdTdmaOn => policies::cdtdma_on(req.users, req.pbar, &cfg)?,
        PolicyKind::CdTdmaOnOff => policies::cdtdma_onoff(req.users, req.pbar, &cfg)?,
        PolicyKind::MultilevelCdTdma => {
            policies::multilevel_cdtdma(req.users, req.pbar, req.levels, &cfg)?
        }
        PolicyKind::CdTdmaAlo => policies::cdtdma_alo(req.pbar, &cfg)?,
        PolicyKind::CdTdmaInr => {
            let opts = InrEvalOptions {
                sim_budget: req.inr_budget,
                eval_slots: req.inr_eval_slots,
                seed: derive_seed(req.seed, &[0x17f2]),
                ..Default::default()
            };
            let (point, report) =
                policies::cdtdma_inr(req.users, req.attempts, req.levels, req.pbar, &opts)?;
            return Ok(PointOutcome { point, inr_reference: Some(report) });
        }
    };
    Ok(PointOutcome { point, inr_reference: None })
}

/// Simulation verdict for one point.
pub struct Verification {
    pub report: SimReport,
    pub throughput_agrees: bool,
    pub power_agrees: bool,
}

impl Verification {
    pub fn agrees(&self) -> bool {
        self.throughput_agrees && self.power_agrees
    }
}

/// Run the slot simulator against an analytic point and compare at the
/// 3-sigma level.
pub fn verify_point(req: &PointRequest, outcome: &PointOutcome, slots: u64) -> Result<Verification> {
    let spec = req.system_spec();
    let report = simulate(&spec, &outcome.point.params, slots, derive_seed(req.seed, &[0x51]))?;
    // fp-accumulation allowance for the deterministic-power policies
    let eps = 1e-9 * req.pbar.max(1.0);
    let (throughput_agrees, power_agrees) = match &outcome.inr_reference {
        None => {
            let thr_ok = (report.throughput_est - outcome.point.throughput).abs()
                <= report.ci_halfwidth_throughput;
            let pow_ok = report
                .per_user_power
                .iter()
                .all(|p| (p - req.pbar).abs() <= report.ci_halfwidth_power + eps);
            (thr_ok, pow_ok)
        }
        Some(reference) => {
            // Two independent estimates of the same protocol: compare
            // with combined uncertainty; power obeys the budget
            // one-sidedly.
            let combined = (report.ci_halfwidth_throughput.powi(2)
                + reference.ci_halfwidth_throughput.powi(2))
            .sqrt();
            let thr_ok = (report.throughput_est - reference.throughput_est).abs() <= combined;
            let pow_ok = report
                .per_user_power
                .iter()
                .all(|p| *p <= req.pbar + report.ci_halfwidth_power + eps);
            (thr_ok, pow_ok)
        }
    };
    Ok(Verification { report, throughput_agrees, power_agrees })
}
