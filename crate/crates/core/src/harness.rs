//! Experiment drivers: power studies over benchmark alternatives, the
//! empirical separation-rate probe over random spike alternatives, named
//! presets for both, and the shared plumbing they need (calibration-table
//! store, CSV emission, level diagnostics).
//!
//! Everything here is deterministic given a config: seeds derive from the
//! config's master seed through fixed stream tags, replication tallies are
//! order-independent integer sums, and no output contains timestamps, so
//! re-running a command reproduces its files byte for byte.

mod power;
mod presets;
mod rate;

pub use power::{
    run_power, write_power_csv, PowerCell, PowerConfig, PowerFamily, PowerOutcome, PowerRow,
    ProcedureSelect,
};
pub use presets::{
    calibration_preset, desk_scale_calibration, desk_scale_power, desk_scale_rate, power_preset,
    rate_preset, theory_max_level, theory_models, CALIBRATION_PRESET_NAMES, DEFAULT_MASTER_SEED,
    DESK_MC_SAMPLES, DESK_REPLICATIONS, BENCHMARK_MC_SAMPLES, BENCHMARK_REPLICATIONS, POWER_PRESET_NAMES,
    RATE_PRESET_NAMES,
};
pub use rate::{
    run_rate_probe, spike_rejection_count, AdaptiveChoice, ParameterRule, RateCell,
    RateProbeConfig, RateProbeReport,
};

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::calibration::{CalibrationConfig, CalibrationError, QuantileTable};
use crate::intensity::IntensityError;
use crate::poisson::PatternError;
use crate::stream::{derive_rng, tag};
use crate::testing::{conditional_rejection_rate, TestError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Test(#[from] TestError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Intensity(#[from] IntensityError),
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Whether this is the caller's configuration/input-format fault (CLI
    /// exit code 2) rather than a runtime failure (exit code 1). Unreadable
    /// files are runtime failures; files that read fine but have the wrong
    /// shape are configuration errors.
    pub fn is_config_error(&self) -> bool {
        match self {
            Self::BadConfig(_) | Self::Test(_) | Self::Intensity(_) => true,
            Self::Io { .. } => false,
            Self::Calibration(c) => !matches!(c, CalibrationError::Io { .. }),
            Self::Pattern(p) => !matches!(p, PatternError::Io(_)),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// FNV-1a 64-bit content hash; used to key cached calibration tables and to
/// stamp reports with the identity of the tables they used.
pub fn fingerprint64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Fingerprint of a calibration config's canonical JSON form. Two configs
/// share a fingerprint exactly when they would produce identical tables.
pub fn config_fingerprint(config: &CalibrationConfig) -> u64 {
    let json = serde_json::to_string(config).expect("config serialization");
    fingerprint64(json.as_bytes())
}

/// Calibration tables keyed by config fingerprint, with an in-memory cache
/// and an optional on-disk directory. Tables are deterministic given their
/// config, so a cache hit (memory or disk) is exact reuse, not approximation.
pub struct TableStore {
    dir: Option<PathBuf>,
    cache: RwLock<HashMap<u64, Arc<QuantileTable>>>,
}

impl TableStore {
    /// Cache tables in memory only.
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// Also persist tables as `table_<fingerprint>.json` under `dir`.
    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// The on-disk path a config's table would use, if persistence is on.
    pub fn table_path(&self, config: &CalibrationConfig) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("table_{:016x}.json", config_fingerprint(config))))
    }

    /// Fetch the table for `config`, loading it from disk or calibrating from
    /// scratch (and persisting) as needed.
    pub fn get_or_build(&self, config: &CalibrationConfig) -> Result<Arc<QuantileTable>> {
        let fp = config_fingerprint(config);
        if let Some(table) = self.cache.read().unwrap().get(&fp) {
            return Ok(Arc::clone(table));
        }
        let path = self.table_path(config);
        let table = match &path {
            Some(p) if p.exists() => {
                let loaded = QuantileTable::load(p)?;
                if loaded.config() != config {
                    return Err(HarnessError::BadConfig(format!(
                        "table file {} holds a different configuration than requested",
                        p.display()
                    )));
                }
                loaded
            }
            _ => {
                let built = QuantileTable::calibrate(config.clone())?;
                if let (Some(p), Some(d)) = (&path, &self.dir) {
                    std::fs::create_dir_all(d).map_err(|source| HarnessError::Io {
                        path: d.display().to_string(),
                        source,
                    })?;
                    built.save(p)?;
                }
                built
            }
        };
        let table = Arc::new(table);
        self.cache
            .write()
            .unwrap()
            .entry(fp)
            .or_insert_with(|| Arc::clone(&table));
        Ok(table)
    }
}

/// Achieved-level diagnostic for one count: the stored calibrated level and a
/// fresh-data conditional rejection estimate.
#[derive(Clone, Debug)]
pub struct LevelDiagnostic {
    pub n: u64,
    pub calibrated_level: f64,
    pub fresh_rejection_rate: f64,
    pub replications: u64,
}

/// Check the achieved conditional level at five counts spread across the
/// table's range (endpoints and quartiles). The check streams derive from the
/// table's own master seed under a tag unused by calibration, so the data are
/// fresh yet reproducible.
pub fn level_diagnostics(table: &QuantileTable, replications: u64) -> Vec<LevelDiagnostic> {
    let config = table.config();
    let span = config.n_max - config.n_min;
    let mut picks: Vec<u64> = [0, span / 4, span / 2, 3 * span / 4, span]
        .iter()
        .map(|offset| config.n_min + offset)
        .collect();
    picks.dedup();
    picks
        .into_iter()
        .map(|n| {
            let mut rng = derive_rng(config.master_seed, &[tag::LEVEL_CHECK, n]);
            LevelDiagnostic {
                n,
                calibrated_level: table.entry(n).calibrated_level,
                fresh_rejection_rate: conditional_rejection_rate(table, n, replications, &mut rng),
                replications,
            }
        })
        .collect()
}

/// Write `lines` joined by `\n` with a trailing newline; the single exit
/// point for report files, keeping output bytes platform-independent.
pub fn write_text(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}
