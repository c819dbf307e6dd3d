//! JSON scenario documents.
//!
//! ```json
//! {
//!   "system": { "packet_bits": 100, "processing_gain": 100, "noise_w": 1.0 },
//!   "pcg": {
//!     "total_load": 0.1,
//!     "rate_bps": 100000,
//!     "classes": [
//!       { "name": "A", "max_transmissions": 1, "confidence": 0.99 },
//!       { "name": "B", "max_transmissions": 3, "confidence": 0.9 }
//!     ]
//!   },
//!   "sweep": { "variable": "split", "start": 0, "stop": 1, "steps": 11 }
//! }
//! ```
//!
//! Exactly one of `pcg` and `prcg` must be present.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use qosgame::pcg::ClassMember;
use qosgame::prcg::{PrcgUser, SystemParams};
use qosgame::{AverageDelaySpec, EfficiencyModel, OutageDelaySpec, RadioEnv, Receiver};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcg: Option<PcgConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prcg: Option<PrcgConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub packet_bits: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub processing_gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(default = "one")]
    pub noise_w: f64,
    /// Absent means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_power_w: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcgConfig {
    /// Subset of `mf`, `de`, `mmse`; all three when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub receivers: Vec<String>,
    pub total_load: f64,
    pub rate_bps: f64,
    pub classes: Vec<ClassConfig>,
    /// Finite user population for `best-response`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<MemberConfig>,
}

/// A class with an `(L, β)` requirement; both fields absent means delay
/// tolerant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_transmissions: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    pub class: String,
    #[serde(default = "one")]
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrcgConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<PrcgUserConfig>,
    /// Delay bounds swept by `prcg-sweep`, one curve each.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delay_bounds_s: Vec<f64>,
}

/// Give exactly one of `arrival_rate_pps` and `source_rate_bps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrcgUserConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_rate_pps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_rate_bps: Option<f64>,
    pub delay_bound_s: f64,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_power_w: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Fraction of the load in the first class.
    Split,
    SourceRateBps,
    ArrivalRatePps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl SweepAxis {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.start + t * (self.stop - self.start),
                    Scale::Log => self.start * (self.stop / self.start).powf(t),
                }
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return config("sweep.steps must be at least 1");
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return config("sweep.start and sweep.stop must be finite");
        }
        if self.start > self.stop {
            return config("sweep.start must not exceed sweep.stop");
        }
        if self.scale == Scale::Log && self.start <= 0.0 {
            return config("sweep.start must be positive for a log scale");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Config(msg.into()))
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.pcg, &self.prcg) {
            (Some(_), Some(_)) => return config("give either `pcg` or `prcg`, not both"),
            (None, None) => return config("one of `pcg` or `prcg` is required"),
            _ => {}
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        self.model()?;
        let sys = &self.system;
        if !(sys.noise_w > 0.0 && sys.noise_w.is_finite()) {
            return config("system.noise_w must be positive");
        }
        if let Some(p) = sys.max_power_w {
            if !(p > 0.0) {
                return config("system.max_power_w must be positive");
            }
        }
        if let Some(pcg) = &self.pcg {
            self.validate_pcg(pcg)?;
        }
        if let Some(prcg) = &self.prcg {
            if sys.bandwidth_hz.is_none() {
                return config("system.bandwidth_hz is required for prcg scenarios");
            }
            if let Some(d) = prcg.delay_bounds_s.iter().find(|d| !(**d > 0.0)) {
                return config(format!("prcg.delay_bounds_s: {d} is not positive"));
            }
        }
        Ok(())
    }

    fn validate_pcg(&self, pcg: &PcgConfig) -> Result<()> {
        if !(pcg.total_load > 0.0 && pcg.total_load.is_finite()) {
            return config("pcg.total_load must be positive");
        }
        if !(pcg.rate_bps > 0.0 && pcg.rate_bps.is_finite()) {
            return config("pcg.rate_bps must be positive");
        }
        if pcg.classes.is_empty() {
            return config("pcg.classes must not be empty");
        }
        let mut names = HashSet::new();
        for c in &pcg.classes {
            if !names.insert(c.name.as_str()) {
                return config(format!("pcg.classes: duplicate class name `{}`", c.name));
            }
            c.requirement()?;
        }
        for r in &pcg.receivers {
            r.parse::<Receiver>()
                .map_err(|e| CliError::Config(format!("pcg.receivers: {e}")))?;
        }
        for u in &pcg.users {
            if !names.contains(u.class.as_str()) {
                return config(format!("pcg.users: unknown class `{}`", u.class));
            }
        }
        if let Some(sweep) = &self.sweep {
            let unit = 0.0..=1.0;
            if sweep.variable == SweepVariable::Split
                && !(unit.contains(&sweep.start) && unit.contains(&sweep.stop))
            {
                return config("sweep: split must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<EfficiencyModel> {
        EfficiencyModel::exponential(self.system.packet_bits)
            .map_err(|e| CliError::Config(format!("system.packet_bits: {e}")))
    }

    pub fn max_power(&self) -> f64 {
        self.system.max_power_w.unwrap_or(f64::INFINITY)
    }

    pub fn receivers(&self) -> Vec<Receiver> {
        match &self.pcg {
            Some(p) if !p.receivers.is_empty() => p
                .receivers
                .iter()
                .map(|r| r.parse().expect("validated"))
                .collect(),
            _ => Receiver::ALL.to_vec(),
        }
    }

    pub fn pcg(&self) -> Result<&PcgConfig> {
        self.pcg
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a `pcg` section".into()))
    }

    pub fn prcg(&self) -> Result<&PrcgConfig> {
        self.prcg
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a `prcg` section".into()))
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        let b = self
            .system
            .bandwidth_hz
            .ok_or_else(|| CliError::Config("system.bandwidth_hz is required".into()))?;
        Ok(SystemParams::new(b, self.system.noise_w, self.model()?)?)
    }

    pub fn prcg_users(&self) -> Result<Vec<PrcgUser>> {
        let prcg = self.prcg()?;
        let bits = self.system.packet_bits;
        prcg.users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let lambda = match (u.arrival_rate_pps, u.source_rate_bps) {
                    (Some(l), None) => l,
                    (None, Some(r)) => r / bits as f64,
                    _ => return config(format!(
                        "prcg.users[{i}]: give exactly one of arrival_rate_pps and source_rate_bps"
                    )),
                };
                let qos = AverageDelaySpec::new(lambda, u.delay_bound_s)
                    .map_err(|e| CliError::Config(format!("prcg.users[{i}]: {e}")))?;
                let pmax = u.max_power_w.unwrap_or(self.max_power());
                PrcgUser::new(qos, u.gain, pmax)
                    .map_err(|e| CliError::Config(format!("prcg.users[{i}]: {e}")))
            })
            .collect()
    }

    /// Finite-K environment and per-user class indices for `best-response`.
    pub fn radio_env(&self) -> Result<(RadioEnv, Vec<ClassMember>)> {
        let pcg = self.pcg()?;
        if pcg.users.is_empty() {
            return config("pcg.users must list the finite user population");
        }
        let n = self.system.processing_gain.ok_or_else(|| {
            CliError::Config("system.processing_gain is required for best-response".into())
        })?;
        let members: Vec<ClassMember> = pcg
            .users
            .iter()
            .map(|u| ClassMember {
                class: pcg
                    .classes
                    .iter()
                    .position(|c| c.name == u.class)
                    .expect("validated"),
                gain: u.gain,
            })
            .collect();
        let env = RadioEnv::new(
            self.system.noise_w,
            members.iter().map(|m| m.gain).collect(),
            n,
            self.max_power(),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
        Ok((env, members))
    }
}

impl ClassConfig {
    pub fn requirement(&self) -> Result<Option<OutageDelaySpec>> {
        match (self.max_transmissions, self.confidence) {
            (None, None) => Ok(None),
            (Some(l), Some(b)) => OutageDelaySpec::new(l, b)
                .map(Some)
                .map_err(|e| CliError::Config(format!("pcg.classes `{}`: {e}", self.name))),
            _ => config(format!(
                "pcg.classes `{}`: give both max_transmissions and confidence, or neither",
                self.name
            )),
        }
    }
}
