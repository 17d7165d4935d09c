//! The engine configuration file shared by `arena serve` and `arena validate`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use arena_core::store::{AssignmentPolicy, TaskConfig};
use arena_core::{RatingParams, SchedulerPolicy, StoreConfig};
use serde::{Deserialize, Serialize};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EngineConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub rating: RatingParams,
    #[serde(default)]
    pub scheduler: SchedulerPolicy,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
    #[serde(default)]
    pub service: ServiceSettings,
    #[serde(default)]
    pub store: StoreSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub bind: String,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub auth_token: Option<String>,
    pub lease_minutes: i64,
    /// Cap on contractor matches per agent and task; unlimited when absent.
    pub contractor_cap: Option<u64>,
    /// `k` in the `mu - k * sigma` score the leaderboards sort by.
    pub leaderboard_k: f64,
    pub default_page_size: usize,
    pub max_page_size: usize,
    /// Seed for the left/right placement of each new lease.
    pub slot_seed: u64,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            auth_token: None,
            lease_minutes: 30,
            contractor_cap: None,
            leaderboard_k: 3.0,
            default_page_size: 50,
            max_page_size: 500,
            slot_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct StoreSettings {
    /// Event log directory; in-memory only when absent.
    pub dir: Option<PathBuf>,
    pub reciprocity_quota: u64,
    pub snapshot_every: u64,
    pub durable: bool,
}

impl Default for StoreSettings {
    fn default() -> Self {
        let base = StoreConfig::default();
        Self {
            dir: None,
            reciprocity_quota: base.reciprocity_quota,
            snapshot_every: base.snapshot_every,
            durable: base.durable,
        }
    }
}

/// A config problem and where in the document it is.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn at(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            rating: RatingParams::default(),
            scheduler: SchedulerPolicy::default(),
            tasks: Vec::new(),
            service: ServiceSettings::default(),
            store: StoreSettings::default(),
        }
    }
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: EngineConfig =
            serde_path_to_error::deserialize(de).map_err(|e| at(e.path().to_string(), e.inner().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| at("", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(at(
                "schemaVersion",
                format!("unsupported version {} (expected {CONFIG_SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.rating.validate().map_err(|e| at("rating", e.to_string()))?;
        self.scheduler.validate().map_err(|e| at("scheduler", e))?;
        let mut seen = BTreeSet::new();
        for (i, task) in self.tasks.iter().enumerate() {
            if !seen.insert(&task.task_id) {
                return Err(at(format!("tasks[{i}].taskId"), format!("duplicate task {}", task.task_id)));
            }
            if task.eval_seeds.is_empty() {
                return Err(at(format!("tasks[{i}].evalSeeds"), "at least one seed is required"));
            }
        }
        let s = &self.service;
        if s.lease_minutes <= 0 {
            return Err(at("service.leaseMinutes", "must be positive"));
        }
        if !(s.leaderboard_k.is_finite() && s.leaderboard_k >= 0.0) {
            return Err(at("service.leaderboardK", "must be a finite number >= 0"));
        }
        if s.default_page_size == 0 || s.default_page_size > s.max_page_size {
            return Err(at("service.defaultPageSize", "must be between 1 and maxPageSize"));
        }
        if s.auth_token.as_deref().is_some_and(|t| t.trim().is_empty()) {
            return Err(at("service.authToken", "must not be blank"));
        }
        Ok(())
    }

    pub fn store_config(&self) -> StoreConfig {
        StoreConfig {
            rating: self.rating,
            reciprocity_quota: self.store.reciprocity_quota,
            snapshot_every: self.store.snapshot_every,
            durable: self.store.durable,
        }
    }

    pub fn assignment_policy(&self) -> AssignmentPolicy {
        AssignmentPolicy {
            scheduler: self.scheduler,
            lease_minutes: self.service.lease_minutes,
            contractor_cap: self.service.contractor_cap,
        }
    }
}
