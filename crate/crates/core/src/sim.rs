//! Slot-based Monte Carlo engine for every protocol: receiver-side
//! feedback computation, transmitter-side power selection, decoding, and
//! renewal-reward accounting with ratio-estimator confidence intervals.

use rand::Rng;

use crate::error::{Error, Result};
use crate::optimize::{maximize_nd, OptimizerConfig};
use crate::policies::{
    joint_decode, multilevel_rate, InrAttemptMode, InrLevelParams, InrPartial, InrStage,
    PolicyKind, PolicyParams,
};
use crate::special::{
    derive_seed, max_fading_cdf, max_fading_quantile, max_fading_sf, rng_from_seed, sample_gain,
    FadingModel, SimRng,
};

/// System-level configuration of one simulation run.
#[derive(Debug, Clone, Copy)]
pub struct SystemSpec {
    pub k_users: usize,
    /// Max transmission attempts per packet, including the first.
    pub max_attempts: usize,
    /// Feedback alphabet size.
    pub feedback_size: usize,
    /// Per-user long-term power budget (average SNR).
    pub power_budget: f64,
    pub fading: FadingModel,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_users < 1 || self.max_attempts < 1 || self.feedback_size < 1 {
            return Err(Error::Config(
                "K, M and F must all be at least 1".into(),
            ));
        }
        if self.power_budget < 0.0 {
            return Err(Error::Config("power budget must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Monte Carlo estimates with renewal-reward confidence intervals.
#[derive(Debug, Clone)]
pub struct SimReport {
    /// Sum throughput estimate, nats per channel use.
    pub throughput_est: f64,
    /// Realized long-term average power per user (mean over users).
    pub power_est: f64,
    pub per_user_power: Vec<f64>,
    /// 3-sigma half-width of the throughput estimate.
    pub ci_halfwidth_throughput: f64,
    /// 3-sigma half-width of the per-user power estimate (worst user).
    pub ci_halfwidth_power: f64,
    /// Completed renewal cycles.
    pub renewals: u64,
    pub slots: u64,
    /// Per-symbol feedback counts; length equals the feedback alphabet.
    pub feedback_histogram: Vec<u64>,
    /// Mean inter-renewal time in slots, with 3-sigma half-width.
    pub cycle_len_mean: f64,
    pub cycle_len_ci3: f64,
    /// Slot counts per protocol state (ALO only, empty otherwise).
    pub state_occupancy: Vec<u64>,
}

// ---------------------------------------------------------------------------
// Renewal-cycle accounting
// ---------------------------------------------------------------------------

/// Streaming moments of per-cycle (reward, length, per-user energy)
/// triples; yields ratio-estimator variances without storing cycles.
struct CycleStats {
    users: usize,
    n: u64,
    sum_y: f64,
    sum_t: f64,
    sum_yy: f64,
    sum_tt: f64,
    sum_yt: f64,
    sum_e: Vec<f64>,
    sum_ee: Vec<f64>,
    sum_et: Vec<f64>,
    // current (open) cycle
    cur_y: f64,
    cur_t: f64,
    cur_e: Vec<f64>,
}

impl CycleStats {
    fn new(users: usize) -> Self {
        Self {
            users,
            n: 0,
            sum_y: 0.0,
            sum_t: 0.0,
            sum_yy: 0.0,
            sum_tt: 0.0,
            sum_yt: 0.0,
            sum_e: vec![0.0; users],
            sum_ee: vec![0.0; users],
            sum_et: vec![0.0; users],
            cur_y: 0.0,
            cur_t: 0.0,
            cur_e: vec![0.0; users],
        }
    }

    fn record_slot(&mut self, reward: f64, energy: &[f64]) {
        self.cur_y += reward;
        self.cur_t += 1.0;
        for (acc, e) in self.cur_e.iter_mut().zip(energy) {
            *acc += e;
        }
    }

    fn close_cycle(&mut self) {
        let (y, t) = (self.cur_y, self.cur_t);
        self.n += 1;
        self.sum_y += y;
        self.sum_t += t;
        self.sum_yy += y * y;
        self.sum_tt += t * t;
        self.sum_yt += y * t;
        for u in 0..self.users {
            let e = self.cur_e[u];
            self.sum_e[u] += e;
            self.sum_ee[u] += e * e;
            self.sum_et[u] += e * t;
            self.cur_e[u] = 0.0;
        }
        self.cur_y = 0.0;
        self.cur_t = 0.0;
    }

    /// 3-sigma half-width of the ratio estimator sum(a)/sum(t) given the
    /// moments of a.
    fn ratio_ci3(&self, sum_a: f64, sum_aa: f64, sum_at: f64) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        let n = self.n as f64;
        let mean_t = self.sum_t / n;
        let theta = sum_a / self.sum_t;
        let var_a = (sum_aa / n - (sum_a / n).powi(2)).max(0.0);
        let var_t = (self.sum_tt / n - mean_t * mean_t).max(0.0);
        let cov_at = sum_at / n - (sum_a / n) * mean_t;
        let s2 = (var_a - 2.0 * theta * cov_at + theta * theta * var_t).max(0.0);
        3.0 * (s2 / n).sqrt() / mean_t
    }

    fn throughput_ci3(&self) -> f64 {
        self.ratio_ci3(self.sum_y, self.sum_yy, self.sum_yt)
    }

    fn power_ci3(&self, user: usize) -> f64 {
        self.ratio_ci3(self.sum_e[user], self.sum_ee[user], self.sum_et[user])
    }

    fn cycle_len_stats(&self) -> (f64, f64) {
        if self.n < 2 {
            return (f64::NAN, f64::INFINITY);
        }
        let n = self.n as f64;
        let mean = self.sum_t / n;
        let var = (self.sum_tt / n - mean * mean).max(0.0);
        (mean, 3.0 * (var / n).sqrt())
    }
}

struct Tally {
    reward_total: f64,
    energy_total: Vec<f64>,
    histogram: Vec<u64>,
    stats: CycleStats,
}

impl Tally {
    fn new(users: usize, feedback: usize) -> Self {
        Self {
            reward_total: 0.0,
            energy_total: vec![0.0; users],
            histogram: vec![0; feedback],
            stats: CycleStats::new(users),
        }
    }

    fn slot(&mut self, symbol: usize, reward: f64, energy: &[f64]) {
        self.histogram[symbol] += 1;
        self.reward_total += reward;
        for (acc, e) in self.energy_total.iter_mut().zip(energy) {
            *acc += e;
        }
        self.stats.record_slot(reward, energy);
    }

    fn finish(self, slots: u64, occupancy: Vec<u64>) -> SimReport {
        let per_user: Vec<f64> = self
            .energy_total
            .iter()
            .map(|e| e / slots as f64)
            .collect();
        let power_est = per_user.iter().sum::<f64>() / per_user.len() as f64;
        let ci_power = (0..per_user.len())
            .map(|u| self.stats.power_ci3(u))
            .fold(0.0f64, f64::max);
        let (cycle_mean, cycle_ci) = self.stats.cycle_len_stats();
        SimReport {
            throughput_est: self.reward_total / slots as f64,
            power_est,
            per_user_power: per_user,
            ci_halfwidth_throughput: self.stats.throughput_ci3(),
            ci_halfwidth_power: ci_power,
            renewals: self.stats.n,
            slots,
            feedback_histogram: self.histogram,
            cycle_len_mean: cycle_mean,
            cycle_len_ci3: cycle_ci,
            state_occupancy: occupancy,
        }
    }
}

fn argmax_gain(gains: &[f64]) -> usize {
    let mut best = 0;
    for (i, g) in gains.iter().enumerate().skip(1) {
        if *g > gains[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Main entry point
// ---------------------------------------------------------------------------

const MIN_SLOTS: u64 = 10_000;

/// Run the slot loop for one policy and report renewal-reward estimates.
pub fn simulate(spec: &SystemSpec, params: &PolicyParams, slots: u64, seed: u64) -> Result<SimReport> {
    spec.validate()?;
    if slots < MIN_SLOTS {
        return Err(Error::Argument(format!(
            "at least {MIN_SLOTS} slots required, got {slots}"
        )));
    }
    let kind = params.kind();
    let implied_f = kind.implied_feedback(spec.k_users, params.levels());
    if spec.feedback_size != implied_f {
        return Err(Error::Config(format!(
            "policy {kind} with K={} and L={} implies F={implied_f}, spec has F={}",
            spec.k_users,
            params.levels(),
            spec.feedback_size
        )));
    }
    if let Some(m) = kind.required_attempts() {
        if spec.max_attempts != m {
            return Err(Error::Config(format!(
                "policy {kind} is defined for M={m}, spec has M={}",
                spec.max_attempts
            )));
        }
    }
    match kind {
        PolicyKind::JointDecoding | PolicyKind::JointPlusTdma | PolicyKind::CdTdmaAlo => {
            if spec.k_users != 2 {
                return Err(Error::Config(format!(
                    "policy {kind} closed form is two-user only, got K={}",
                    spec.k_users
                )));
            }
        }
        _ => {}
    }

    let mut rng = rng_from_seed(seed);
    match params {
        PolicyParams::StaticTdma { threshold, .. } => {
            Ok(sim_static(spec, *threshold, slots, &mut rng))
        }
        PolicyParams::JointDecoding { threshold, .. } => {
            Ok(sim_joint(spec, *threshold, slots, &mut rng))
        }
        PolicyParams::JointPlusTdma {
            time_share,
            power_share,
            single_threshold,
            joint_threshold,
            ..
        } => Ok(sim_joint_plus_tdma(
            spec,
            *time_share,
            *power_share,
            *single_threshold,
            *joint_threshold,
            slots,
            &mut rng,
        )),
        PolicyParams::CdTdmaOn { threshold, .. } => Ok(sim_cdtdma_on(spec, *threshold, slots, &mut rng)),
        PolicyParams::CdTdmaOnOff { threshold, .. } => {
            Ok(sim_cdtdma_onoff(spec, *threshold, slots, &mut rng))
        }
        PolicyParams::MultilevelCdTdma { thresholds, .. } => {
            if thresholds.is_empty() || thresholds.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(
                    "multilevel thresholds must be nonempty and strictly increasing".into(),
                ));
            }
            Ok(sim_multilevel(spec, thresholds, slots, &mut rng))
        }
        PolicyParams::CdTdmaAlo { threshold, .. } => Ok(sim_alo(spec, *threshold, slots, &mut rng)),
        PolicyParams::CdTdmaInr { levels } => {
            levels.validate()?;
            if levels.stages.len() != spec.max_attempts {
                return Err(Error::Config(format!(
                    "INR parameter set has {} stages, spec has M={}",
                    levels.stages.len(),
                    spec.max_attempts
                )));
            }
            Ok(sim_inr_mac(spec, levels, slots, &mut rng))
        }
    }
}

fn sim_static(spec: &SystemSpec, s: f64, slots: u64, rng: &mut SimRng) -> SimReport {
    let k = spec.k_users;
    let kp = k as f64 * spec.power_budget;
    let rate = (s * kp).ln_1p();
    let mut tally = Tally::new(k, 1);
    let mut energy = vec![0.0; k];
    for t in 0..slots {
        let active = (t % k as u64) as usize;
        let mut gain_active = 0.0;
        for u in 0..k {
            let g = sample_gain(rng);
            if u == active {
                gain_active = g;
            }
        }
        energy.iter_mut().for_each(|e| *e = 0.0);
        energy[active] = kp;
        let reward = if gain_active > s { rate } else { 0.0 };
        tally.slot(0, reward, &energy);
        if (t + 1) % k as u64 == 0 {
            tally.stats.close_cycle();
        }
    }
    tally.finish(slots, Vec::new())
}

fn sim_joint(spec: &SystemSpec, s: f64, slots: u64, rng: &mut SimRng) -> SimReport {
    let pbar = spec.power_budget;
    let rate = (s * pbar).ln_1p();
    let mut tally = Tally::new(2, 1);
    for _ in 0..slots {
        let g1 = sample_gain(rng);
        let g2 = sample_gain(rng);
        let (d1, d2) = joint_decode(rate, rate, g1 * pbar, g2 * pbar);
        let reward = rate * (u8::from(d1) + u8::from(d2)) as f64;
        tally.slot(0, reward, &[pbar, pbar]);
        tally.stats.close_cycle();
    }
    tally.finish(slots, Vec::new())
}

fn sim_joint_plus_tdma(
    spec: &SystemSpec,
    tau: f64,
    alpha: f64,
    s_single: f64,
    s_joint: f64,
    slots: u64,
    rng: &mut SimRng,
) -> SimReport {
    let pbar = spec.power_budget;
    let p_single = if tau > 1e-12 { 2.0 * alpha * pbar / tau } else { 0.0 };
    let p_joint = if 1.0 - tau > 1e-12 { (1.0 - alpha) * pbar / (1.0 - tau) } else { 0.0 };
    let r_single = (s_single * p_single).ln_1p();
    let r_joint = (s_joint * p_joint).ln_1p();
    let mut tally = Tally::new(2, 1);
    for _ in 0..slots {
        let g = [sample_gain(rng), sample_gain(rng)];
        let tdma_phase: bool = rng.gen::<f64>() < tau;
        let mut energy = [0.0, 0.0];
        let reward;
        if tdma_phase {
            let active = usize::from(rng.gen::<f64>() < 0.5);
            energy[active] = p_single;
            reward = if g[active] > s_single { r_single } else { 0.0 };
        } else {
            energy = [p_joint, p_joint];
            let (d1, d2) = joint_decode(r_joint, r_joint, g[0] * p_joint, g[1] * p_joint);
            reward = r_joint * (u8::from(d1) + u8::from(d2)) as f64;
        }
        tally.slot(0, reward, &energy);
        tally.stats.close_cycle();
    }
    tally.finish(slots, Vec::new())
}

fn sim_cdtdma_on(spec: &SystemSpec, s: f64, slots: u64, rng: &mut SimRng) -> SimReport {
    let k = spec.k_users;
    let kp = k as f64 * spec.power_budget;
    let rate = (s * kp).ln_1p();
    let mut tally = Tally::new(k, k);
    let mut gains = vec![0.0; k];
    let mut energy = vec![0.0; k];
    for _ in 0..slots {
        for g in gains.iter_mut() {
            *g = sample_gain(rng);
        }
        let u = argmax_gain(&gains);
        energy.iter_mut().for_each(|e| *e = 0.0);
        energy[u] = kp;
        let reward = if gains[u] > s { rate } else { 0.0 };
        tally.slot(u, reward, &energy);
        tally.stats.close_cycle();
    }
    tally.finish(slots, Vec::new())
}

fn sim_cdtdma_onoff(spec: &SystemSpec, s: f64, slots: u64, rng: &mut SimRng) -> SimReport {
    let k = spec.k_users;
    let p_on = max_fading_sf(k, s);
    let power = k as f64 * spec.power_budget / p_on;
    let rate = (s * power).ln_1p();
    let mut tally = Tally::new(k, k + 1);
    let mut gains = vec![0.0; k];
    let mut energy = vec![0.0; k];
    for _ in 0..slots {
        for g in gains.iter_mut() {
            *g = sample_gain(rng);
        }
        let u = argmax_gain(&gains);
        energy.iter_mut().for_each(|e| *e = 0.0);
        let (symbol, reward) = if gains[u] > s {
            energy[u] = power;
            (1 + u, rate)
        } else {
            (0, 0.0)
        };
        tally.slot(symbol, reward, &energy);
        tally.stats.close_cycle();
    }
    tally.finish(slots, Vec::new())
}

fn sim_multilevel(spec: &SystemSpec, thresholds: &[f64], slots: u64, rng: &mut SimRng) -> SimReport {
    let k = spec.k_users;
    let levels = thresholds.len();
    let rate = multilevel_rate(k, spec.power_budget, thresholds);
    let scale = rate.exp_m1();
    let powers: Vec<f64> = thresholds.iter().map(|s| scale / s).collect();
    let mut tally = Tally::new(k, k * levels + 1);
    let mut gains = vec![0.0; k];
    let mut energy = vec![0.0; k];
    for _ in 0..slots {
        for g in gains.iter_mut() {
            *g = sample_gain(rng);
        }
        let u = argmax_gain(&gains);
        energy.iter_mut().for_each(|e| *e = 0.0);
        // level = largest l with s_l < gain
        let bin = thresholds.partition_point(|s| *s < gains[u]);
        let (symbol, reward) = if bin == 0 {
            (0, 0.0)
        } else {
            energy[u] = powers[bin - 1];
            (1 + u * levels + (bin - 1), rate)
        };
        tally.slot(symbol, reward, &energy);
        tally.stats.close_cycle();
    }
    tally.finish(slots, Vec::new())
}

fn sim_alo(spec: &SystemSpec, s: f64, slots: u64, rng: &mut SimRng) -> SimReport {
    let p_on = max_fading_sf(2, s);
    let power = 2.0 * spec.power_budget / p_on;
    let rate = (s * power).ln_1p();
    let mut tally = Tally::new(2, 3);
    // attempt indices of the two users; state (1,1) is index 0
    let mut attempts = [1usize; 2];
    let mut occupancy = vec![0u64; 4];
    let mut first_cycle_open = false;
    for _ in 0..slots {
        let state_idx = (attempts[0] - 1) * 2 + (attempts[1] - 1);
        occupancy[state_idx] += 1;
        if attempts == [1, 1] {
            if first_cycle_open {
                tally.stats.close_cycle();
            }
            first_cycle_open = true;
        }
        let gains = [sample_gain(rng), sample_gain(rng)];
        let u = argmax_gain(&gains);
        let scheduled = gains[u] > s;
        let mut energy = [0.0, 0.0];
        let (symbol, reward) = if scheduled {
            energy[u] = power;
            (1 + u, rate)
        } else {
            (0, 0.0)
        };
        tally.slot(symbol, reward, &energy);
        for k in 0..2 {
            if scheduled && k == u {
                attempts[k] = 1; // decoded
            } else if attempts[k] == spec.max_attempts {
                attempts[k] = 1; // outage
            } else {
                attempts[k] += 1;
            }
        }
    }
    tally.finish(slots, occupancy)
}

// ---------------------------------------------------------------------------
// Incremental redundancy
// ---------------------------------------------------------------------------

/// Fading-gain law handed to the single-user INR engine.
#[derive(Debug, Clone, Copy)]
pub enum GainDistribution {
    /// Max of `users` i.i.d. unit-Rayleigh power gains.
    MaxRayleigh { users: usize },
}

impl GainDistribution {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            GainDistribution::MaxRayleigh { users } => max_fading_cdf(*users, x),
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            GainDistribution::MaxRayleigh { users } => {
                let u: f64 = rng.gen();
                max_fading_quantile(*users, u)
            }
        }
    }
}

/// Per-packet INR state machine shared by the single-user engine and the
/// K-user wrapper. One call = one slot with gain `g`; returns the
/// feedback level (0 = silence), transmit power and decoded rate.
struct InrMachine<'a> {
    params: &'a InrLevelParams,
    stage: usize,
    deficit: f64,
    /// Set when a cycle (packet) completed this slot.
    renewed: bool,
}

impl<'a> InrMachine<'a> {
    fn new(params: &'a InrLevelParams) -> Self {
        Self {
            params,
            stage: 0,
            deficit: params.rate,
            renewed: false,
        }
    }

    fn reset(&mut self) {
        self.stage = 0;
        self.deficit = self.params.rate;
    }

    /// Advance one slot. Returns (local feedback symbol in 0..=L,
    /// transmit power, decoded rate).
    fn step(&mut self, g: f64) -> (usize, f64, f64) {
        self.renewed = false;
        let stage = &self.params.stages[self.stage];
        let needed = self.deficit.exp_m1() / g;
        let n_cover = stage.cover_powers.len();
        let top = stage.cover_powers[n_cover - 1];
        if needed <= top {
            // cheapest covering level
            let idx = stage.cover_powers.partition_point(|p| *p < needed);
            let power = stage.cover_powers[idx];
            let rate = self.params.rate;
            self.reset();
            self.renewed = true;
            return (1 + idx, power, rate);
        }
        if let Some(InrPartial { q_cap, power }) = stage.partial {
            if needed <= q_cap {
                // partial accumulation: consumes a transmission
                self.deficit -= (g * power).ln_1p();
                self.stage += 1;
                debug_assert!(self.deficit > 0.0 && self.stage < self.params.stages.len());
                return (1 + n_cover, power, 0.0);
            }
        }
        // overflow
        match self.params.mode {
            InrAttemptMode::Transmissions => (0, 0.0, 0.0),
            InrAttemptMode::SlotsSilent => {
                if self.stage + 1 >= self.params.stages.len() {
                    self.reset();
                    self.renewed = true;
                } else {
                    self.stage += 1;
                }
                (0, 0.0, 0.0)
            }
            InrAttemptMode::SlotsLastChance => {
                if self.stage + 1 >= self.params.stages.len() {
                    // last-chance top-level shot; q > top, so the packet
                    // stays undecoded and outages
                    self.reset();
                    self.renewed = true;
                    (n_cover, top, 0.0)
                } else {
                    self.stage += 1;
                    (0, 0.0, 0.0)
                }
            }
        }
    }
}

/// Single-user incremental-redundancy HARQ over an arbitrary gain law.
///
/// `power` is the long-term budget of the (single) transmitter; in the
/// K-user reduction it is the network total K * pbar.
pub fn inr_single_user(
    max_attempts: usize,
    levels: usize,
    power_budget: f64,
    dist: GainDistribution,
    slots: u64,
    seed: u64,
    params: &InrLevelParams,
) -> Result<SimReport> {
    if max_attempts < 1 || levels < 1 {
        return Err(Error::Argument("M and L must be at least 1".into()));
    }
    params.validate()?;
    if params.stages.len() != max_attempts {
        return Err(Error::Argument(format!(
            "parameter set has {} stages, expected M={max_attempts}",
            params.stages.len()
        )));
    }
    if params.levels() > levels {
        return Err(Error::Argument(format!(
            "parameter set uses {} feedback levels, expected at most {levels}",
            params.levels()
        )));
    }
    if slots < MIN_SLOTS {
        return Err(Error::Argument(format!(
            "at least {MIN_SLOTS} slots required, got {slots}"
        )));
    }
    if !(power_budget > 0.0) {
        return Err(Error::Argument("power budget must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut tally = Tally::new(1, levels + 1);
    let mut machine = InrMachine::new(params);
    for _ in 0..slots {
        let g = dist.sample(&mut rng);
        let (symbol, pw, rate) = machine.step(g);
        tally.slot(symbol, rate, &[pw]);
        if machine.renewed {
            tally.stats.close_cycle();
        }
    }
    Ok(tally.finish(slots, Vec::new()))
}

/// K-user cdTDMA+INR slot loop: the strongest user runs the single-user
/// protocol on the max gain.
fn sim_inr_mac(spec: &SystemSpec, params: &InrLevelParams, slots: u64, rng: &mut SimRng) -> SimReport {
    let k = spec.k_users;
    let levels_per_user = params.levels();
    let mut tally = Tally::new(k, k * levels_per_user + 1);
    let mut machine = InrMachine::new(params);
    let mut gains = vec![0.0; k];
    let mut energy = vec![0.0; k];
    for _ in 0..slots {
        for g in gains.iter_mut() {
            *g = sample_gain(rng);
        }
        let u = argmax_gain(&gains);
        let (local, pw, rate) = machine.step(gains[u]);
        energy.iter_mut().for_each(|e| *e = 0.0);
        let symbol = if local == 0 {
            0
        } else {
            energy[u] = pw;
            1 + u * levels_per_user + (local - 1)
        };
        tally.slot(symbol, rate, &energy);
        if machine.renewed {
            tally.stats.close_cycle();
        }
    }
    tally.finish(slots, Vec::new())
}

// ---------------------------------------------------------------------------
// Exact evaluation of the M <= 2 protocol (initialization aid)
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Success probability and expected cover spend of a stage at deficit
/// scale c2 = e^D - 1 against gain law `dist`.
fn cover_stats(c2: f64, cover_powers: &[f64], dist: &GainDistribution) -> (f64, f64) {
    let n = cover_powers.len();
    let top = cover_powers[n - 1];
    let p_succ = 1.0 - dist.cdf(c2 / top);
    let mut spend = 0.0;
    for i in 0..n {
        let lo = c2 / cover_powers[i];
        let hi = if i == 0 { f64::INFINITY } else { c2 / cover_powers[i - 1] };
        let mass = if hi.is_finite() {
            dist.cdf(hi) - dist.cdf(lo)
        } else {
            1.0 - dist.cdf(lo)
        };
        spend += cover_powers[i] * mass;
    }
    (p_succ, spend)
}

/// Exact (throughput, total power) of the Transmissions-mode protocol
/// for M in {1, 2}: waiting costs slots, partial investment carries the
/// deficit into the second transmission.
pub fn inr_exact_eval(params: &InrLevelParams, dist: &GainDistribution, quad: &(Vec<f64>, Vec<f64>)) -> (f64, f64) {
    let rate = params.rate;
    let c = rate.exp_m1();
    let stage1 = &params.stages[0];
    let (p_cover, e_cover) = cover_stats(c, &stage1.cover_powers, dist);
    let (mut p_event, mut e_event) = (p_cover, e_cover);
    let mut extra_time = 0.0;
    let mut extra_energy = 0.0;
    if let Some(InrPartial { q_cap, power }) = stage1.partial {
        let stage2 = &params.stages[1];
        let g_lo = c / q_cap;
        let g_hi = c / *stage1.cover_powers.last().unwrap();
        if g_hi > g_lo * (1.0 + 1e-12) {
            let p_part = dist.cdf(g_hi) - dist.cdf(g_lo);
            p_event += p_part;
            e_event += power * p_part;
            let users = match dist {
                GainDistribution::MaxRayleigh { users } => *users,
            };
            let (nodes, weights) = quad;
            for (x, w) in nodes.iter().zip(weights) {
                let g = 0.5 * (g_hi - g_lo) * x + 0.5 * (g_hi + g_lo);
                let dens = users as f64
                    * (1.0 - (-g).exp()).powi(users as i32 - 1)
                    * (-g).exp();
                let wq = 0.5 * (g_hi - g_lo) * w * dens;
                let d2 = (rate - (g * power).ln_1p()).max(0.0);
                let c2 = d2.exp_m1();
                let (ps2, een2) = cover_stats(c2, &stage2.cover_powers, dist);
                if ps2 <= 1e-12 {
                    return (0.0, f64::INFINITY);
                }
                extra_time += wq / ps2;
                extra_energy += wq * een2 / ps2;
            }
        }
    }
    if p_event <= 1e-12 {
        return (0.0, 0.0);
    }
    let expected_time = (1.0 + extra_time) / p_event;
    let expected_energy = (e_event + extra_energy) / p_event;
    (rate / expected_time, expected_energy / expected_time)
}

// ---------------------------------------------------------------------------
// Level optimization
// ---------------------------------------------------------------------------

/// Tuning for `optimize_inr_levels`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InrOptOptions {
    pub optimizer: OptimizerConfig,
    pub mode: InrAttemptMode,
}

/// Transformed coordinates for the M=2 invest-capable shape:
/// [ln R, ln increments of stage-1 cover gains (k of them),
///  logit of partial window, logit of partial power fraction,
///  ln increments of stage-2 cover gains (L of them)].
/// For the no-partial shape the partial block is absent and the stage-2
/// block is ignored (never reached).
fn params_from_coords(
    u: &[f64],
    covers1: usize,
    with_partial: bool,
    max_attempts: usize,
    mode: InrAttemptMode,
) -> InrLevelParams {
    let mut idx = 0;
    let mut take = || {
        let v = u[idx].clamp(-12.0, 12.0);
        idx += 1;
        v
    };
    let rate = take().clamp(-6.0, 4.5).exp();
    let c = rate.exp_m1();
    let mut s1 = Vec::with_capacity(covers1);
    let mut acc = 0.0;
    for _ in 0..covers1 {
        acc += take().exp();
        s1.push(acc);
    }
    // ascending powers from descending thresholds
    let cover1: Vec<f64> = s1.iter().rev().map(|s| c / s).collect();
    let partial = if with_partial {
        let wfrac = 1.0 / (1.0 + (-take()).exp());
        let pfrac = 1.0 / (1.0 + (-take()).exp());
        let w = s1[0] * wfrac;
        let top = *cover1.last().unwrap();
        Some(InrPartial { q_cap: c / w.max(1e-9), power: (pfrac * top).max(top * 1e-6) })
    } else {
        None
    };
    let mut stages = Vec::with_capacity(max_attempts);
    stages.push(InrStage { cover_powers: cover1.clone(), partial });
    for _ in 1..max_attempts {
        if with_partial {
            let mut s2 = Vec::new();
            let mut acc2 = 0.0;
            for _ in 0..(covers1 + 1) {
                acc2 += take().exp();
                s2.push(acc2);
            }
            let cover2: Vec<f64> = s2.iter().rev().map(|s| c / s).collect();
            stages.push(InrStage { cover_powers: cover2, partial: None });
        } else {
            stages.push(InrStage { cover_powers: cover1.clone(), partial: None });
        }
    }
    InrLevelParams { rate, stages, mode }
}

fn coords_dim(covers1: usize, with_partial: bool, max_attempts: usize) -> usize {
    let mut d = 1 + covers1;
    if with_partial {
        d += 2 + (max_attempts - 1) * (covers1 + 1);
    }
    d
}

/// Penalized objective used by both the exact and the simulated search.
fn penalized(throughput: f64, power: f64, budget: f64) -> f64 {
    if !throughput.is_finite() || !power.is_finite() {
        return -1e6;
    }
    let over = (power / budget - 1.0).max(0.0);
    throughput * (1.0 - 2.0 * over) - 5.0 * over
}

/// Search the level tables: maximize the simulated throughput under the
/// power budget (penalty formulation, common random numbers), seeded by
/// an exact-integral pre-optimization for M <= 2.
pub fn optimize_inr_levels(
    max_attempts: usize,
    levels: usize,
    power: f64,
    dist: GainDistribution,
    sim_budget: u64,
    seed: u64,
    opts: &InrOptOptions,
) -> Result<InrLevelParams> {
    if max_attempts < 1 || levels < 1 {
        return Err(Error::Argument("M and L must be at least 1".into()));
    }
    if !(power > 0.0) {
        return Err(Error::Argument("power budget must be positive".into()));
    }
    if sim_budget < MIN_SLOTS * 10 {
        return Err(Error::Argument(format!(
            "simulation budget must be at least {} slots per evaluation",
            MIN_SLOTS * 10
        )));
    }
    let users = match dist {
        GainDistribution::MaxRayleigh { users } => users,
    };
    // Multilevel corner: L cover levels, no waiting gain, R from the
    // power constraint. Always a feasible fallback.
    let mlv_cfg = opts.optimizer;
    let mlv = crate::policies::multilevel_cdtdma(users, power / users as f64, levels, &mlv_cfg)?;
    let (mlv_thresholds, mlv_rate) = match mlv.params {
        PolicyParams::MultilevelCdTdma { thresholds, rate } => (thresholds, rate),
        _ => unreachable!(),
    };
    let corner = {
        let c = mlv_rate.exp_m1();
        let cover: Vec<f64> = mlv_thresholds.iter().rev().map(|s| c / s).collect();
        InrLevelParams {
            rate: mlv_rate,
            stages: (0..max_attempts)
                .map(|_| InrStage { cover_powers: cover.clone(), partial: None })
                .collect(),
            mode: opts.mode,
        }
    };

    let mut candidates: Vec<InrLevelParams> = vec![corner.clone()];

    // Exact-integral search over the invest-capable shape.
    if opts.mode == InrAttemptMode::Transmissions && max_attempts == 2 && levels >= 2 {
        let quad = gauss_legendre(96);
        let covers1 = levels - 1;
        let dim = coords_dim(covers1, true, max_attempts);
        let budget = power;
        let mut best: Option<(Vec<f64>, f64)> = None;
        let s0 = mlv_thresholds[0];
        let mut seeds: Vec<Vec<f64>> = Vec::new();
        for rmul in [1.0, 1.5, 2.0, 2.5] {
            for s1mul in [0.7, 2.0, 6.0, 18.0] {
                let r0 = (mlv_rate * rmul).max(0.05);
                let mut u = vec![r0.ln()];
                let mut prev = 0.0;
                for i in 0..covers1 {
                    let s = s0 * s1mul * (1.0 + 0.6 * i as f64);
                    u.push((s - prev).max(1e-9).ln());
                    prev = s;
                }
                u.push(-1.0); // window fraction logit
                u.push(-0.2); // partial power fraction logit
                let mut prev2 = 0.0;
                for i in 0..(covers1 + 1) {
                    let s = s0 * 1.2 * (1.0 + 0.9 * i as f64);
                    u.push((s - prev2).max(1e-9).ln());
                    prev2 = s;
                }
                seeds.push(u);
            }
        }
        let objective = |u: &[f64]| -> f64 {
            let p = params_from_coords(u, covers1, true, max_attempts, InrAttemptMode::Transmissions);
            let (thr, pw) = inr_exact_eval(&p, &dist, &quad);
            penalized(thr, pw, budget)
        };
        let inner_cfg = OptimizerConfig {
            nd_restarts: 3,
            nd_max_iters: opts.optimizer.nd_max_iters,
            ..opts.optimizer
        };
        for sd in &seeds {
            let init_box: Vec<(f64, f64)> = sd.iter().map(|&v| (v - 0.8, v + 0.8)).collect();
            let (u_star, v) = maximize_nd(objective, dim, &init_box, &inner_cfg)?;
            if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
                best = Some((u_star, v));
            }
        }
        if let Some((u_star, _)) = best {
            candidates.push(params_from_coords(
                &u_star,
                covers1,
                true,
                max_attempts,
                opts.mode,
            ));
        }
    }

    // Simulated refinement with common random numbers.
    let mut crn_rng = rng_from_seed(derive_seed(seed, &[0x1_2e7]));
    let gain_buffer: Vec<f64> = (0..sim_budget).map(|_| dist.sample(&mut crn_rng)).collect();
    let sim_eval = |params: &InrLevelParams| -> (f64, f64) {
        let mut machine = InrMachine::new(params);
        let mut reward = 0.0;
        let mut energy = 0.0;
        for &g in &gain_buffer {
            let (_, pw, r) = machine.step(g);
            reward += r;
            energy += pw;
        }
        (reward / sim_budget as f64, energy / sim_budget as f64)
    };

    let mut best_params = candidates[0].clone();
    let mut best_value = f64::NEG_INFINITY;
    for cand in &candidates {
        if cand.validate().is_err() {
            continue;
        }
        let (thr, pw) = sim_eval(cand);
        let v = penalized(thr, pw, power);
        if v > best_value {
            best_value = v;
            best_params = cand.clone();
        }
    }

    // Local simulated polish around the invest shape (only when the
    // winning candidate carries a partial symbol; the corner shape is
    // already optimal within its family).
    if best_params.stages[0].partial.is_some() && max_attempts == 2 {
        let covers1 = best_params.stages[0].cover_powers.len();
        let dim = coords_dim(covers1, true, max_attempts);
        let u0 = coords_of(&best_params);
        let objective = |u: &[f64]| -> f64 {
            let p = params_from_coords(u, covers1, true, max_attempts, opts.mode);
            let (thr, pw) = sim_eval(&p);
            penalized(thr, pw, power)
        };
        let polish_cfg = OptimizerConfig {
            nd_restarts: 2,
            nd_max_iters: 160,
            ..opts.optimizer
        };
        let init_box: Vec<(f64, f64)> = u0.iter().map(|&v| (v - 0.12, v + 0.12)).collect();
        let (u_star, v) = maximize_nd(objective, dim, &init_box, &polish_cfg)?;
        if v > best_value {
            best_params = params_from_coords(&u_star, covers1, true, max_attempts, opts.mode);
        }
    }

    // Enforce the power contract on the exact expected power (the CRN
    // estimate is too noisy to certify the constraint): if it exceeds
    // the budget, shrink every power level by a common factor (coverage
    // shrinks with it, so spend is monotone). A 0.05% undershoot leaves
    // independent re-estimates inside their own confidence band.
    let exact_power = |params: &InrLevelParams| -> f64 {
        if opts.mode == InrAttemptMode::Transmissions && max_attempts <= 2 {
            let quad = gauss_legendre(96);
            inr_exact_eval(params, &dist, &quad).1
        } else {
            // no closed form for this shape; average several CRN streams
            let mut rng = rng_from_seed(derive_seed(seed, &[0xfea5]));
            let mut machine = InrMachine::new(params);
            let long = 4 * sim_budget;
            let mut energy = 0.0;
            for _ in 0..long {
                let (_, pw, _) = machine.step(dist.sample(&mut rng));
                energy += pw;
            }
            energy / long as f64
        }
    };
    let pw = exact_power(&best_params);
    if pw > power {
        let target = power * 0.9995;
        let mut lo = 0.2;
        let mut hi = 1.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if exact_power(&scale_powers(&best_params, mid)) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        best_params = scale_powers(&best_params, lo);
    }
    best_params.validate()?;
    Ok(best_params)
}

/// Scale every power level (and the partial window) by `zeta`.
fn scale_powers(params: &InrLevelParams, zeta: f64) -> InrLevelParams {
    let mut out = params.clone();
    for st in out.stages.iter_mut() {
        for p in st.cover_powers.iter_mut() {
            *p *= zeta;
        }
        if let Some(pt) = st.partial.as_mut() {
            pt.power *= zeta;
            pt.q_cap *= zeta;
        }
    }
    out
}

/// Inverse of `params_from_coords` for the invest shape.
fn coords_of(params: &InrLevelParams) -> Vec<f64> {
    let c = params.rate.exp_m1();
    let stage1 = &params.stages[0];
    let s1: Vec<f64> = stage1.cover_powers.iter().rev().map(|p| c / p).collect();
    let mut u = vec![params.rate.ln()];
    let mut prev = 0.0;
    for &s in &s1 {
        u.push((s - prev).max(1e-12).ln());
        prev = s;
    }
    let partial = stage1.partial.expect("invest shape");
    let w = c / partial.q_cap;
    let wfrac = (w / s1[0]).clamp(1e-6, 1.0 - 1e-6);
    u.push((wfrac / (1.0 - wfrac)).ln());
    let top = *stage1.cover_powers.last().unwrap();
    let pfrac = (partial.power / top).clamp(1e-6, 1.0 - 1e-6);
    u.push((pfrac / (1.0 - pfrac)).ln());
    for stage in &params.stages[1..] {
        let s2: Vec<f64> = stage.cover_powers.iter().rev().map(|p| c / p).collect();
        let mut prev2 = 0.0;
        for &s in &s2 {
            u.push((s - prev2).max(1e-12).ln());
            prev2 = s;
        }
    }
    u
}
