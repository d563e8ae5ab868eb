//! Flat `key = value` configuration files with optional `[policy]`
//! sections. CLI flags override file values; file values override the
//! defaults.

use std::collections::BTreeMap;
use std::path::Path;

use harqmac_core::policies::PolicyKind;

/// Per-policy overrides (only the protocol-shape knobs).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolicyOverrides {
    pub attempts: Option<usize>,
    pub levels: Option<usize>,
}

/// Parsed configuration file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub globals: BTreeMap<String, String>,
    pub policy_sections: BTreeMap<String, PolicyOverrides>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = ConfigFile::default();
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim().to_string();
                PolicyKind::parse(&name)
                    .map_err(|_| format!("line {}: unknown policy section [{name}]", lineno + 1))?;
                cfg.policy_sections.entry(name.clone()).or_default();
                section = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("line {}: expected key = value, got '{line}'", lineno + 1));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            match &section {
                None => {
                    cfg.globals.insert(key, value);
                }
                Some(name) => {
                    let entry = cfg.policy_sections.get_mut(name).unwrap();
                    match key.as_str() {
                        "attempts" => {
                            entry.attempts = Some(value.parse().map_err(|e| {
                                format!("line {}: bad attempts value: {e}", lineno + 1)
                            })?)
                        }
                        "levels" => {
                            entry.levels = Some(value.parse().map_err(|e| {
                                format!("line {}: bad levels value: {e}", lineno + 1)
                            })?)
                        }
                        other => {
                            return Err(format!(
                                "line {}: unknown per-policy key '{other}'",
                                lineno + 1
                            ))
                        }
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.globals.get(key).map(|s| s.as_str())
    }

    pub fn overrides(&self, policy: PolicyKind) -> PolicyOverrides {
        self.policy_sections
            .get(policy.name())
            .copied()
            .unwrap_or_default()
    }
}
