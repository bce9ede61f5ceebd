//! Flat `key=value` run configuration covering the network and training keys.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use freqdeblur_core::network::NetworkConfig;
use freqdeblur_core::training::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CliConfig {
    pub net: NetworkConfig,
    pub train: TrainConfig,
}

impl CliConfig {
    /// `base`, then `path` (if any), then `overrides` in order.
    pub fn load_over(
        base: Self,
        path: Option<&Path>,
        overrides: &[String],
    ) -> anyhow::Result<Self> {
        let mut cfg = base;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            cfg.apply_text(&text)
                .with_context(|| format!("in config {}", p.display()))?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects key=value, got `{o}`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.net.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> anyhow::Result<()> {
        let mut seen = HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value, got `{line}`", no + 1))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                bail!("line {}: key `{k}` given twice", no + 1);
            }
            self.set(k, v.trim())
                .with_context(|| format!("line {}", no + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        if NetworkConfig::KEYS.contains(&key) {
            self.net.set(key, value)?;
        } else if TrainConfig::KEYS.contains(&key) {
            self.train.set(key, value)?;
        } else {
            bail!("unknown config key `{key}`");
        }
        Ok(())
    }

    /// Every key, in a form [`CliConfig::apply_text`] reads back unchanged.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.net.to_pairs().into_iter().chain(self.train.to_pairs()) {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}
