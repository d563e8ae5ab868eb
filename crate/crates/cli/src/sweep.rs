//! SNR sweeps over a set of policies, emitted as CSV.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;

use harqmac_core::capacity::{ewfc_capacity, PowerConvention};
use harqmac_core::error::{Error, Result};
use harqmac_core::policies::PolicyKind;
use harqmac_core::special::derive_seed;

use crate::config::ConfigFile;
use crate::db_to_linear;
use crate::evaluate::{analytic_point, verify_point, PointRequest};

/// Fully resolved sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub snr_from: f64,
    pub snr_to: f64,
    pub snr_step: f64,
    pub policies: Vec<PolicyKind>,
    pub users: usize,
    pub attempts: usize,
    pub levels: usize,
    pub slots: u64,
    pub seed: u64,
    pub simulate: bool,
    pub convention: PowerConvention,
    pub inr_budget: u64,
    pub output: PathBuf,
    pub per_policy: BTreeMap<&'static str, (Option<usize>, Option<usize>)>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_from: -10.0,
            snr_to: 20.0,
            snr_step: 5.0,
            policies: PolicyKind::ALL.to_vec(),
            users: 2,
            attempts: 2,
            levels: 3,
            slots: 100_000,
            seed: 1,
            simulate: false,
            convention: PowerConvention::Standard,
            inr_budget: 100_000,
            output: PathBuf::from("sweep.csv"),
            per_policy: BTreeMap::new(),
        }
    }
}

fn parse_key<T: std::str::FromStr>(cfg: &ConfigFile, key: &str, into: &mut T) -> Result<()>
where
    T::Err: std::fmt::Display,
{
    if let Some(raw) = cfg.get(key) {
        *into = raw
            .parse()
            .map_err(|e| Error::Config(format!("config key '{key}': {e}")))?;
    }
    Ok(())
}

impl SweepConfig {
    /// Apply a configuration file on top of the defaults. CLI flags are
    /// applied afterwards by the caller and therefore win.
    pub fn apply_file(&mut self, file: &ConfigFile) -> Result<()> {
        parse_key(file, "from", &mut self.snr_from)?;
        parse_key(file, "to", &mut self.snr_to)?;
        parse_key(file, "step", &mut self.snr_step)?;
        parse_key(file, "users", &mut self.users)?;
        parse_key(file, "attempts", &mut self.attempts)?;
        parse_key(file, "levels", &mut self.levels)?;
        parse_key(file, "slots", &mut self.slots)?;
        parse_key(file, "seed", &mut self.seed)?;
        parse_key(file, "inr_budget", &mut self.inr_budget)?;
        if let Some(v) = file.get("simulate") {
            self.simulate = v
                .parse()
                .map_err(|e| Error::Config(format!("config key 'simulate': {e}")))?;
        }
        if let Some(v) = file.get("convention") {
            self.convention = match v {
                "standard" => PowerConvention::Standard,
                "paper" => PowerConvention::Paper,
                other => {
                    return Err(Error::Config(format!(
                        "config key 'convention': expected standard|paper, got {other}"
                    )))
                }
            };
        }
        if let Some(v) = file.get("output") {
            self.output = PathBuf::from(v);
        }
        if let Some(v) = file.get("policies") {
            self.policies = v
                .split(',')
                .map(|p| PolicyKind::parse(p.trim()))
                .collect::<Result<Vec<_>>>()?;
        }
        for kind in PolicyKind::ALL {
            let ov = file.overrides(kind);
            if ov.attempts.is_some() || ov.levels.is_some() {
                self.per_policy.insert(kind.name(), (ov.attempts, ov.levels));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_from > self.snr_to {
            return Err(Error::Config(format!(
                "sweep range is empty: from={} > to={}",
                self.snr_from, self.snr_to
            )));
        }
        if !(self.snr_step > 0.0) {
            return Err(Error::Config("sweep step must be positive".into()));
        }
        if self.slots < 10_000 {
            return Err(Error::Config("sweep needs at least 10000 slots".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("no policies selected".into()));
        }
        Ok(())
    }

    pub fn snr_points(&self) -> Vec<f64> {
        let mut points = Vec::new();
        let mut db = self.snr_from;
        let mut i = 0u32;
        while db <= self.snr_to + 1e-9 {
            points.push(db);
            i += 1;
            db = self.snr_from + f64::from(i) * self.snr_step;
        }
        points
    }

    fn request(&self, policy: PolicyKind, pbar: f64, seed: u64) -> PointRequest {
        let (ov_m, ov_l) = self
            .per_policy
            .get(policy.name())
            .copied()
            .unwrap_or((None, None));
        let attempts = policy
            .required_attempts()
            .unwrap_or_else(|| ov_m.unwrap_or(self.attempts));
        let levels = match policy {
            PolicyKind::MultilevelCdTdma | PolicyKind::CdTdmaInr => ov_l.unwrap_or(self.levels),
            _ => 1,
        };
        PointRequest {
            policy,
            users: self.users,
            attempts,
            levels,
            pbar,
            seed,
            inr_budget: self.inr_budget,
            inr_eval_slots: self.slots.max(200_000),
        }
    }
}

/// One CSV row.
struct Row {
    policy: &'static str,
    snr_index: usize,
    text: String,
}

/// Run the sweep and return the full CSV as a string (callers decide
/// where to write it).
pub fn run_sweep(config: &SweepConfig) -> Result<String> {
    config.validate()?;
    let snrs = config.snr_points();
    let mut jobs: Vec<(PolicyKind, usize, f64)> = Vec::new();
    for &policy in &config.policies {
        for (i, &db) in snrs.iter().enumerate() {
            jobs.push((policy, i, db));
        }
    }
    let rows: Result<Vec<Row>> = jobs
        .par_iter()
        .map(|&(policy, snr_index, db)| -> Result<Row> {
            let pbar = db_to_linear(db);
            let seed = derive_seed(config.seed, &[policy as u64 + 1, snr_index as u64]);
            let req = config.request(policy, pbar, seed);
            let outcome = analytic_point(&req)?;
            let point = &outcome.point;
            let normalized = match config.convention {
                PowerConvention::Standard => point.normalized,
                PowerConvention::Paper => {
                    point.throughput
                        / ewfc_capacity(req.users, point.avg_power, PowerConvention::Paper)?
                            .capacity
                }
            };
            let (sim_throughput, sim_ci) = if config.simulate {
                let verdict = verify_point(&req, &outcome, config.slots)?;
                (
                    format_float(verdict.report.throughput_est),
                    format_float(verdict.report.ci_halfwidth_throughput),
                )
            } else {
                (String::new(), String::new())
            };
            let params = point
                .params
                .describe()
                .into_iter()
                .map(|(k, v)| format!("{k}={}", format_float(v)))
                .collect::<Vec<_>>()
                .join(";");
            let text = format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                format_float(db),
                format_float(pbar),
                policy.name(),
                req.users,
                req.attempts,
                req.feedback_size(),
                format_float(point.throughput),
                format_float(point.throughput / std::f64::consts::LN_2),
                format_float(normalized),
                params,
                sim_throughput,
                sim_ci,
            );
            Ok(Row { policy: policy.name(), snr_index, text })
        })
        .collect();
    let mut rows = rows?;
    rows.sort_by(|a, b| (a.policy, a.snr_index).cmp(&(b.policy, b.snr_index)));

    let mut out = String::new();
    out.push_str(&format!("# version={}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# seed={}\n", config.seed));
    out.push_str(&format!("# convention={}\n", config.convention.name()));
    out.push_str(
        "snr_db,pbar,policy,K,M,F,throughput_nats,throughput_bits,normalized,params,sim_throughput,sim_ci\n",
    );
    for row in rows {
        out.push_str(&row.text);
        out.push('\n');
    }
    Ok(out)
}

/// Shortest-roundtrip float formatting; deterministic for equal values.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_grid_includes_endpoints() {
        let cfg = SweepConfig::default();
        let pts = cfg.snr_points();
        assert_eq!(pts.first(), Some(&-10.0));
        assert_eq!(pts.last(), Some(&20.0));
        assert_eq!(pts.len(), 7);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SweepConfig { snr_from: 5.0, snr_to: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg.snr_to = 10.0;
        cfg.snr_step = 0.0;
        assert!(cfg.validate().is_err());
        cfg.snr_step = 5.0;
        cfg.slots = 10;
        assert!(cfg.validate().is_err());
    }
}
