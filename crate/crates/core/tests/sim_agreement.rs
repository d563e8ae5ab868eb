//! Analytic closed forms against the slot-level simulator.

mod common;

use harqmac_core::markov::{build_alo_fsm, stationary_distribution};
use harqmac_core::optimize::OptimizerConfig;
use harqmac_core::policies::{self, PolicyKind, PolicyParams};
use harqmac_core::sim::{simulate, SystemSpec};
use harqmac_core::special::FadingModel;

fn cfg() -> OptimizerConfig {
    OptimizerConfig::default()
}

fn spec_for(kind: PolicyKind, k: usize, levels: usize, pbar: f64) -> SystemSpec {
    SystemSpec {
        k_users: k,
        max_attempts: kind.required_attempts().unwrap_or(1),
        feedback_size: kind.implied_feedback(k, levels),
        power_budget: pbar,
        fading: FadingModel::UnitRayleigh,
    }
}

fn check_agreement(point: &policies::ThroughputPoint, spec: &SystemSpec, slots: u64, seed: u64) {
    let rep = simulate(spec, &point.params, slots, seed).unwrap();
    assert!(
        (rep.throughput_est - point.throughput).abs() <= rep.ci_halfwidth_throughput,
        "{:?}: simulated {} vs analytic {} (3sigma {})",
        point.params.kind(),
        rep.throughput_est,
        point.throughput,
        rep.ci_halfwidth_throughput
    );
    // deterministic-power policies have 3sigma = 0; allow for summation
    // roundoff over the slot loop
    let eps = 1e-9 * spec.power_budget.max(1.0);
    for (u, p) in rep.per_user_power.iter().enumerate() {
        assert!(
            (p - spec.power_budget).abs() <= rep.ci_halfwidth_power + eps,
            "{:?} user {u}: realized power {p} vs budget {} (3sigma {})",
            point.params.kind(),
            spec.power_budget,
            rep.ci_halfwidth_power
        );
    }
    assert_eq!(rep.feedback_histogram.len(), spec.feedback_size);
    assert_eq!(rep.feedback_histogram.iter().sum::<u64>(), rep.slots);
}

#[test]
fn every_analytic_policy_matches_its_simulation() {
    let slots = 300_000;
    for pbar in [0.3, 3.0] {
        let k = 2;
        check_agreement(
            &policies::static_tdma(k, pbar, &cfg()).unwrap(),
            &spec_for(PolicyKind::StaticTdma, k, 1, pbar),
            slots,
            1,
        );
        check_agreement(
            &policies::joint_decoding_sym(pbar, &cfg()).unwrap(),
            &spec_for(PolicyKind::JointDecoding, k, 1, pbar),
            slots,
            2,
        );
        check_agreement(
            &policies::joint_plus_tdma(pbar, &cfg()).unwrap(),
            &spec_for(PolicyKind::JointPlusTdma, k, 1, pbar),
            slots,
            3,
        );
        check_agreement(
            &policies::cdtdma_on(k, pbar, &cfg()).unwrap(),
            &spec_for(PolicyKind::CdTdmaOn, k, 1, pbar),
            slots,
            4,
        );
        check_agreement(
            &policies::cdtdma_onoff(k, pbar, &cfg()).unwrap(),
            &spec_for(PolicyKind::CdTdmaOnOff, k, 1, pbar),
            slots,
            5,
        );
        check_agreement(
            &policies::multilevel_cdtdma(k, pbar, 3, &cfg()).unwrap(),
            &spec_for(PolicyKind::MultilevelCdTdma, k, 3, pbar),
            slots,
            6,
        );
        check_agreement(
            &policies::cdtdma_alo(pbar, &cfg()).unwrap(),
            &spec_for(PolicyKind::CdTdmaAlo, k, 1, pbar),
            slots,
            7,
        );
    }
}

#[test]
fn three_user_policies_simulate_correctly() {
    // Closed forms for K=3 exist for the TDMA-type policies.
    let pbar = 1.0;
    let slots = 300_000;
    check_agreement(
        &policies::cdtdma_onoff(3, pbar, &cfg()).unwrap(),
        &spec_for(PolicyKind::CdTdmaOnOff, 3, 1, pbar),
        slots,
        8,
    );
    check_agreement(
        &policies::multilevel_cdtdma(3, pbar, 2, &cfg()).unwrap(),
        &spec_for(PolicyKind::MultilevelCdTdma, 3, 2, pbar),
        slots,
        9,
    );
}

#[test]
fn alo_occupancy_matches_stationary_distribution() {
    let pbar = 1.0;
    let pt = policies::cdtdma_alo(pbar, &cfg()).unwrap();
    let s = match &pt.params {
        PolicyParams::CdTdmaAlo { threshold, .. } => *threshold,
        _ => unreachable!(),
    };
    let spec = spec_for(PolicyKind::CdTdmaAlo, 2, 1, pbar);
    let slots = 1_000_000;
    let rep = simulate(&spec, &pt.params, slots, 13).unwrap();
    let fsm = build_alo_fsm(s, pbar).unwrap();
    let pi = stationary_distribution(&fsm).unwrap();
    for (i, count) in rep.state_occupancy.iter().enumerate() {
        let frac = *count as f64 / slots as f64;
        // binomial-ish 3 sigma band (conservative: occupancy samples are
        // positively correlated across slots, widen by 2x)
        let sigma = (pi[i] * (1.0 - pi[i]) / slots as f64).sqrt();
        assert!(
            (frac - pi[i]).abs() <= 6.0 * sigma,
            "state {i}: occupancy {frac} vs pi {}",
            pi[i]
        );
    }
    // E[T] anchor
    assert!(
        (rep.cycle_len_mean - (4.0 - harqmac_core::special::max_fading_sf(2, s)))
            .abs()
            <= rep.cycle_len_ci3
    );
}

#[test]
fn inr_mac_simulation_matches_single_user_reduction() {
    // The K-user cdTDMA+INR slot loop and the single-user engine on the
    // max-gain law estimate the same protocol.
    let pbar = 1.0;
    let opts = policies::InrEvalOptions {
        eval_slots: 400_000,
        ..Default::default()
    };
    let (point, report) = policies::cdtdma_inr(2, 2, 3, pbar, &opts).unwrap();
    let params = match &point.params {
        PolicyParams::CdTdmaInr { levels } => levels.clone(),
        _ => unreachable!(),
    };
    let spec = SystemSpec {
        k_users: 2,
        max_attempts: 2,
        feedback_size: 7,
        power_budget: pbar,
        fading: FadingModel::UnitRayleigh,
    };
    let mac = simulate(&spec, &point.params, 400_000, 21).unwrap();
    let combined = (mac.ci_halfwidth_throughput.powi(2) + report.ci_halfwidth_throughput.powi(2))
        .sqrt();
    assert!(
        (mac.throughput_est - report.throughput_est).abs() <= combined,
        "MAC loop {} vs single-user {} (3sigma {combined})",
        mac.throughput_est,
        report.throughput_est
    );
    // K-user per-user power obeys the per-user budget.
    for p in &mac.per_user_power {
        assert!(*p <= pbar * (1.0 + 0.02) + mac.ci_halfwidth_power);
    }
    assert_eq!(mac.feedback_histogram.len(), 7);
    let _ = params;
}

#[test]
fn inr_beats_multilevel_at_ten_db() {
    let pbar = 10.0f64;
    let opts = policies::InrEvalOptions::default();
    let (point, report) = policies::cdtdma_inr(2, 2, 3, pbar, &opts).unwrap();
    let ml = policies::multilevel_cdtdma(2, pbar, 3, &cfg()).unwrap();
    assert!(
        point.throughput >= ml.throughput - report.ci_halfwidth_throughput,
        "INR {} vs multilevel {}",
        point.throughput,
        ml.throughput
    );
}
