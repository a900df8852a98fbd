//! Power estimation over families of benchmark alternatives: for each cell
//! (one intensity at one parameter value) draw `replications` processes and
//! run every selected procedure on each, tallying rejections.
//!
//! Each replication gets its own derived RNG stream keyed by family, cell and
//! replication index, and every procedure sees the same simulated pattern, so
//! tallies are reproducible bit for bit regardless of thread count and the
//! procedures' estimates are positively coupled (as in a paired comparison).

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{config_fingerprint, write_text, HarnessError, Result, TableStore};
use crate::calibration::{default_u_grid, CalibrationConfig, Procedure, QuantileTable};
use crate::poisson::Sampler;
use crate::stream::{derive_rng, tag};
use crate::testing::{
    test_combined, test_ks, test_laplace, test_model_selection, test_thresholding, test_z,
};
use crate::Intensity;

/// The procedures a power study can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureSelect {
    ModelSelection,
    Thresholding,
    Combined,
    Ks,
    Laplace,
    Z,
}

impl fmt::Display for ProcedureSelect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Self::ModelSelection => "model_selection",
            Self::Thresholding => "thresholding",
            Self::Combined => "combined",
            Self::Ks => "ks",
            Self::Laplace => "laplace",
            Self::Z => "z",
        };
        f.write_str(tag)
    }
}

/// One alternative at one parameter value. The label names the parameter
/// (e.g. `epsilon=0.5`); it becomes a CSV field, so commas and newlines are
/// rejected at validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerCell {
    pub label: String,
    pub intensity: Intensity,
}

/// A named family of cells, reported as one CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFamily {
    pub name: String,
    pub cells: Vec<PowerCell>,
}

/// Full specification of a power study. The calibration fields describe the
/// tables the adaptive procedures use; tables are fetched from a
/// [`TableStore`], so repeated runs share them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub scale_l: f64,
    pub alpha: f64,
    pub replications: u64,
    /// Monte-Carlo samples per count for calibration tables.
    pub mc_samples: u64,
    /// Precomputed count range of the calibration tables.
    pub n_min: u64,
    pub n_max: u64,
    /// Model collection and penalty weights for the model-selection test.
    pub models: Vec<u32>,
    pub weights: Vec<f64>,
    /// Haar depth `J̄` for the thresholding test.
    pub max_level: u32,
    pub procedures: Vec<ProcedureSelect>,
    pub families: Vec<PowerFamily>,
    pub master_seed: u64,
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::BadConfig(msg));
        if self.replications == 0 {
            return fail("replications must be ≥ 1".into());
        }
        if self.procedures.is_empty() {
            return fail("no procedures selected".into());
        }
        for (i, p) in self.procedures.iter().enumerate() {
            if self.procedures[..i].contains(p) {
                return fail(format!("duplicate procedure {p}"));
            }
        }
        if self.families.is_empty() {
            return fail("no alternative families configured".into());
        }
        for family in &self.families {
            if family.name.is_empty()
                || !family
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return fail(format!(
                    "family name {:?} must be nonempty [A-Za-z0-9_-]",
                    family.name
                ));
            }
            if family.cells.is_empty() {
                return fail(format!("family {} has no cells", family.name));
            }
            for cell in &family.cells {
                if cell.label.is_empty() || cell.label.contains(',') || cell.label.contains('\n') {
                    return fail(format!(
                        "cell label {:?} must be nonempty without commas/newlines",
                        cell.label
                    ));
                }
                cell.intensity.validate()?;
            }
        }
        // Table-side parameters are validated by the calibration config.
        self.ms_calibration(self.alpha).validate()?;
        self.th_calibration(self.alpha).validate()?;
        Ok(())
    }

    /// Calibration config for the model-selection table at the given level.
    pub fn ms_calibration(&self, alpha: f64) -> CalibrationConfig {
        let max_weight = self.weights.iter().copied().fold(0.0f64, f64::max);
        CalibrationConfig {
            scale_l: self.scale_l,
            alpha,
            procedure: Procedure::ModelSelection {
                models: self.models.clone(),
                weights: self.weights.clone(),
            },
            n_min: self.n_min,
            n_max: self.n_max,
            mc_samples: self.mc_samples,
            u_grid: default_u_grid(alpha, max_weight),
            master_seed: self.master_seed,
        }
    }

    /// Calibration config for the thresholding table at the given level.
    pub fn th_calibration(&self, alpha: f64) -> CalibrationConfig {
        CalibrationConfig {
            scale_l: self.scale_l,
            alpha,
            procedure: Procedure::Thresholding {
                max_level: self.max_level,
            },
            n_min: self.n_min,
            n_max: self.n_max,
            mc_samples: self.mc_samples,
            u_grid: default_u_grid(alpha, 0.0),
            master_seed: self.master_seed,
        }
    }
}

/// Tally for one (cell, procedure) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerRow {
    pub cell: String,
    pub procedure: ProcedureSelect,
    pub replications: u64,
    pub rejections: u64,
}

impl PowerRow {
    pub fn power(&self) -> f64 {
        self.rejections as f64 / self.replications as f64
    }

    /// Binomial standard error `√(p̂(1−p̂)/R)`.
    pub fn std_err(&self) -> f64 {
        let p = self.power();
        (p * (1.0 - p) / self.replications as f64).sqrt()
    }
}

/// All rows for one family, plus `#`-prefixed metadata lines identifying the
/// run (scale, level, seed, table fingerprints).
#[derive(Clone, Debug, PartialEq)]
pub struct PowerOutcome {
    pub family: String,
    pub metadata: Vec<String>,
    pub rows: Vec<PowerRow>,
}

impl PowerOutcome {
    pub const CSV_HEADER: &'static str =
        "family,cell,procedure,replications,rejections,power,mc_std_err";

    pub fn csv_lines(&self) -> Vec<String> {
        let mut lines = self.metadata.clone();
        lines.push(Self::CSV_HEADER.to_string());
        for row in &self.rows {
            lines.push(format!(
                "{},{},{},{},{},{},{}",
                self.family,
                row.cell,
                row.procedure,
                row.replications,
                row.rejections,
                row.power(),
                row.std_err()
            ));
        }
        lines
    }

    /// Look up a tally by cell label and procedure.
    pub fn find(&self, cell: &str, procedure: ProcedureSelect) -> Option<&PowerRow> {
        self.rows
            .iter()
            .find(|r| r.cell == cell && r.procedure == procedure)
    }
}

/// Tables prepared for one study; which are present depends on the selected
/// procedures.
struct Tables {
    ms: Option<std::sync::Arc<QuantileTable>>,
    th: Option<std::sync::Arc<QuantileTable>>,
    half_ms: Option<std::sync::Arc<QuantileTable>>,
    half_th: Option<std::sync::Arc<QuantileTable>>,
}

fn prepare_tables(config: &PowerConfig, store: &TableStore) -> Result<(Tables, Vec<String>)> {
    let sel = &config.procedures;
    let mut meta = Vec::new();
    let mut fetch = |cal: CalibrationConfig, tag: &str| -> Result<std::sync::Arc<QuantileTable>> {
        meta.push(format!("# table {}={:016x}", tag, config_fingerprint(&cal)));
        store.get_or_build(&cal)
    };
    let ms = if sel.contains(&ProcedureSelect::ModelSelection) {
        Some(fetch(config.ms_calibration(config.alpha), "model_selection")?)
    } else {
        None
    };
    let th = if sel.contains(&ProcedureSelect::Thresholding) {
        Some(fetch(config.th_calibration(config.alpha), "thresholding")?)
    } else {
        None
    };
    let (half_ms, half_th) = if sel.contains(&ProcedureSelect::Combined) {
        let half = config.alpha / 2.0;
        (
            Some(fetch(config.ms_calibration(half), "combined_model_selection")?),
            Some(fetch(config.th_calibration(half), "combined_thresholding")?),
        )
    } else {
        (None, None)
    };
    Ok((
        Tables {
            ms,
            th,
            half_ms,
            half_th,
        },
        meta,
    ))
}

fn rejects(
    procedure: ProcedureSelect,
    pattern: &crate::Pattern,
    alpha: f64,
    tables: &Tables,
) -> bool {
    // Tables were built from the same config as the patterns, so the only
    // possible errors (scale/kind mismatches) are construction bugs.
    let expect = "tables prepared for this configuration";
    match procedure {
        ProcedureSelect::ModelSelection => {
            test_model_selection(pattern, tables.ms.as_deref().expect(expect))
                .expect(expect)
                .reject
        }
        ProcedureSelect::Thresholding => {
            test_thresholding(pattern, tables.th.as_deref().expect(expect))
                .expect(expect)
                .reject
        }
        ProcedureSelect::Combined => test_combined(
            pattern,
            tables.half_ms.as_deref().expect(expect),
            tables.half_th.as_deref().expect(expect),
        )
        .expect(expect)
        .reject,
        ProcedureSelect::Ks => test_ks(pattern, alpha).expect(expect).reject,
        ProcedureSelect::Laplace => test_laplace(pattern, alpha).expect(expect).reject,
        ProcedureSelect::Z => test_z(pattern, alpha).expect(expect).reject,
    }
}

/// Run the full study: one [`PowerOutcome`] per family, cells in config
/// order, procedures in selection order.
pub fn run_power(config: &PowerConfig, store: &TableStore) -> Result<Vec<PowerOutcome>> {
    config.validate()?;
    let (tables, table_meta) = prepare_tables(config, store)?;
    let mut outcomes = Vec::with_capacity(config.families.len());
    for (family_index, family) in config.families.iter().enumerate() {
        let mut rows = Vec::with_capacity(family.cells.len() * config.procedures.len());
        for (cell_index, cell) in family.cells.iter().enumerate() {
            let sampler = Sampler::new(&cell.intensity, config.scale_l)?;
            let tallies = (0..config.replications)
                .into_par_iter()
                .fold(
                    || vec![0u64; config.procedures.len()],
                    |mut acc, rep| {
                        let mut rng = derive_rng(
                            config.master_seed,
                            &[tag::POWER, family_index as u64, cell_index as u64, rep],
                        );
                        let pattern = sampler.draw(&mut rng);
                        for (slot, &procedure) in config.procedures.iter().enumerate() {
                            acc[slot] +=
                                rejects(procedure, &pattern, config.alpha, &tables) as u64;
                        }
                        acc
                    },
                )
                .reduce(
                    || vec![0u64; config.procedures.len()],
                    |mut a, b| {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                        a
                    },
                );
            for (slot, &procedure) in config.procedures.iter().enumerate() {
                rows.push(PowerRow {
                    cell: cell.label.clone(),
                    procedure,
                    replications: config.replications,
                    rejections: tallies[slot],
                });
            }
        }
        let mut metadata = vec![format!(
            "# family={} scale_l={} alpha={} replications={} mc_samples={} master_seed={}",
            family.name,
            config.scale_l,
            config.alpha,
            config.replications,
            config.mc_samples,
            config.master_seed
        )];
        metadata.extend(table_meta.iter().cloned());
        outcomes.push(PowerOutcome {
            family: family.name.clone(),
            metadata,
            rows,
        });
    }
    Ok(outcomes)
}

/// Write one family's report as `power_<family>.csv` under `dir`.
pub fn write_power_csv(outcome: &PowerOutcome, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("power_{}.csv", outcome.family));
    write_text(&path, &outcome.csv_lines())?;
    Ok(path)
}
