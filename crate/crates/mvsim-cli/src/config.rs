//! Scenario config file schema (TOML) and validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use mvsim::desim::CampusConfig;
use mvsim::rrproto::RrConfig;
use mvsim::workloads::{
    Activity, DeviceClass, HubsParams, ScheduleEntry, VRChatParams, VircadiaParams,
};
use mvsim::SimTime;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: String,
    /// mandatory: no wall-clock default, every run is reproducible
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub topology: TopologySection,
    pub workload: WorkloadSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub access_bw_bps: u64,
    pub dist_bw_bps: u64,
    pub core_bw_bps: u64,
    pub prop_delay_us: u64,
    pub queue_cap: usize,
    /// optional uniform propagation jitter, off by default
    pub jitter_frac: Option<f64>,
}

impl Default for TopologySection {
    fn default() -> Self {
        let c = CampusConfig::default();
        TopologySection {
            access_bw_bps: c.access_bw_bps,
            dist_bw_bps: c.dist_bw_bps,
            core_bw_bps: c.core_bw_bps,
            prop_delay_us: c.prop_delay.as_micros(),
            queue_cap: c.queue_cap,
            jitter_frac: None,
        }
    }
}

impl TopologySection {
    pub fn campus(&self, n_clients: usize) -> CampusConfig {
        CampusConfig {
            access_bw_bps: self.access_bw_bps,
            dist_bw_bps: self.dist_bw_bps,
            core_bw_bps: self.core_bw_bps,
            prop_delay: SimTime::from_micros(self.prop_delay_us),
            queue_cap: self.queue_cap,
            n_servers: 1,
            n_clients,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Vircadia,
    Hubs,
    Vrchat,
    RemoteRender,
    LocalVsRemote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub platform: Platform,
    #[serde(default)]
    pub users: Vec<UserSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vircadia: Option<VircadiaParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hubs: Option<HubsParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vrchat: Option<VRChatParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remote_render: Option<RrSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RrSection {
    /// frames to stream; default fills the scenario duration
    pub n_frames: Option<u64>,
    #[serde(flatten)]
    pub config: RrConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserSection {
    pub device: DeviceClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    pub join_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leave_s: Option<f64>,
    pub schedule: Vec<ScheduleSection>,
}

impl Default for UserSection {
    fn default() -> Self {
        UserSection {
            device: DeviceClass::Desktop,
            city: None,
            join_s: 0.0,
            leave_s: None,
            schedule: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub start_s: f64,
    pub end_s: f64,
    pub activity: ActivityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_bytes: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    Idle,
    Move,
    Talk,
    Webcam,
    UploadFile,
}

impl ScheduleSection {
    pub fn to_entry(&self) -> Result<ScheduleEntry, ConfigError> {
        for (name, v) in [("start_s", self.start_s), ("end_s", self.end_s)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ConfigError(format!("{name} must be finite and >= 0")));
            }
        }
        if self.end_s <= self.start_s {
            return Err(ConfigError("schedule entry must end after it starts".into()));
        }
        let activity = match self.activity {
            ActivityKind::Idle => Activity::Idle,
            ActivityKind::Move => Activity::Move,
            ActivityKind::Talk => Activity::Talk,
            ActivityKind::Webcam => Activity::Webcam,
            ActivityKind::UploadFile => Activity::UploadFile {
                bytes: self
                    .file_bytes
                    .ok_or_else(|| ConfigError("upload_file needs file_bytes".into()))?,
            },
        };
        Ok(ScheduleEntry {
            start: SimTime::from_secs_f64(self.start_s),
            end: SimTime::from_secs_f64(self.end_s),
            activity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub window_s: f64,
    pub burst_threshold_bps: f64,
    pub burst_min_gap_ms: f64,
    /// packets spaced at most this far apart group into one frame burst
    pub pacing_gap_ms: f64,
    /// pacing looks only at packets strictly larger than this
    pub pacing_min_size: u32,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            window_s: 1.0,
            burst_threshold_bps: 50e6,
            burst_min_gap_ms: 100.0,
            pacing_gap_ms: 5.0,
            pacing_min_size: 1000,
        }
    }
}

/// Reads just the `[metrics]` table, so `analyze` accepts both full
/// scenario configs and standalone metrics files.
pub fn parse_metrics(text: &str) -> Result<MetricsSection, ConfigError> {
    #[derive(Deserialize, Default)]
    struct MetricsOnly {
        #[serde(default)]
        metrics: MetricsSection,
    }
    let only: MetricsOnly = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    Ok(only.metrics)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.scenario.is_empty() {
            return Err(ConfigError("scenario name must not be empty".into()));
        }
        if !self.duration_s.is_finite() || self.duration_s <= 0.0 {
            return Err(ConfigError("duration_s must be > 0".into()));
        }
        let w = &self.workload;
        let tables: [(&str, bool); 4] = [
            ("vircadia", w.vircadia.is_some()),
            ("hubs", w.hubs.is_some()),
            ("vrchat", w.vrchat.is_some()),
            ("remote_render", w.remote_render.is_some()),
        ];
        let expected = match w.platform {
            Platform::Vircadia => Some("vircadia"),
            Platform::Hubs => Some("hubs"),
            Platform::Vrchat => Some("vrchat"),
            Platform::RemoteRender => Some("remote_render"),
            Platform::LocalVsRemote => None,
        };
        for (name, present) in tables {
            if present && expected != Some(name) {
                return Err(ConfigError(format!(
                    "workload.{name} table does not match the declared platform"
                )));
            }
        }
        match w.platform {
            Platform::Vircadia | Platform::Hubs | Platform::Vrchat => {
                if w.users.is_empty() {
                    return Err(ConfigError("workload needs at least one user".into()));
                }
            }
            Platform::RemoteRender => {
                if w.users.len() != 1 {
                    return Err(ConfigError(
                        "remote_render streams to exactly one user".into(),
                    ));
                }
            }
            Platform::LocalVsRemote => {
                if !w.users.is_empty() {
                    return Err(ConfigError(
                        "local_vs_remote compares presets and takes no users".into(),
                    ));
                }
            }
        }
        for (i, u) in w.users.iter().enumerate() {
            if !u.join_s.is_finite() || u.join_s < 0.0 {
                return Err(ConfigError(format!("user {i}: join_s must be >= 0")));
            }
            if let Some(l) = u.leave_s {
                if l <= u.join_s {
                    return Err(ConfigError(format!("user {i}: leave_s before join_s")));
                }
            }
            for s in &u.schedule {
                s.to_entry()
                    .map_err(|e| ConfigError(format!("user {i}: {}", e.0)))?;
            }
        }
        let m = &self.metrics;
        for (name, v) in [
            ("window_s", m.window_s),
            ("burst_threshold_bps", m.burst_threshold_bps),
            ("burst_min_gap_ms", m.burst_min_gap_ms),
            ("pacing_gap_ms", m.pacing_gap_ms),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(ConfigError(format!("metrics.{name} must be > 0")));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_s)
    }
}
