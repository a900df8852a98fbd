//! Empirical separation-rate probe: how small a distance `r` a test can
//! detect against random spike alternatives, as the scale `L` grows.
//!
//! For each scale the probe locates `r*(L)`, the smallest grid `r` whose
//! estimated power reaches the target, by bisection over the (stochastically
//! monotone) power-in-`r` curve; it then fits the slope of `log r*` against
//! `log L` by least squares. Each replication draws a fresh random spike
//! pattern — the probe measures detection of the *family* of alternatives at
//! distance `r`, not of one fixed alternative. Exploratory output: the slope
//! is reported next to a theoretical exponent supplied in config, with no
//! pass/fail judgement.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Result, TableStore};
use crate::calibration::{default_u_grid, CalibrationConfig, Procedure, QuantileTable};
use crate::intensity::make_spike_alternative;
use crate::poisson::simulate;
use crate::stream::{derive_rng, tag};
use crate::testing::test_with_table;

use super::presets::{theory_max_level, theory_models};

/// Which adaptive test the probe drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveChoice {
    ModelSelection,
    Thresholding,
}

impl fmt::Display for AdaptiveChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ModelSelection => "model_selection",
            Self::Thresholding => "thresholding",
        })
    }
}

/// How the test's tuning parameters scale with `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterRule {
    /// Fixed small settings: models `{1,…,6}` with weight `ln 6`, depth 6.
    Simulation,
    /// Scale-driven settings: models up to `⌊log₂(L²/(ln ln L)³)⌋` with
    /// weight `ln |𝒥|`, depth `⌊log₂(L/ln L)⌋`.
    Theory,
}

/// Specification of a rate probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateProbeConfig {
    /// Scales `L`, strictly increasing.
    pub scales: Vec<f64>,
    pub alpha: f64,
    /// Spike resolution `J` (cells `2^J`) and spike count `D`.
    pub spike_level: u32,
    pub spikes: u32,
    /// Candidate distances, strictly increasing, `r ≥ 0`. Values violating
    /// the positivity bound `r² ≤ D/2^J` are skipped.
    pub r_grid: Vec<f64>,
    pub replications: u64,
    /// Power level defining `r*`; must exceed `alpha`.
    pub target_power: f64,
    /// Monte-Carlo samples per count for the per-scale calibration tables.
    pub mc_samples: u64,
    pub procedure: AdaptiveChoice,
    pub parameters: ParameterRule,
    /// Exponent to print beside the fitted slope (e.g. −0.5 for the
    /// fixed-dimension parametric rate); not used in any computation.
    pub theoretical_exponent: Option<f64>,
    pub master_seed: u64,
}

impl RateProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::BadConfig(msg));
        if self.scales.is_empty()
            || self.scales.windows(2).any(|w| w[0] >= w[1])
            || self.scales.iter().any(|&l| !(l > 1.0) || !l.is_finite())
        {
            return fail("scales must be strictly increasing and > 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must be in (0,1), got {}", self.alpha));
        }
        if !(self.target_power > self.alpha && self.target_power < 1.0) {
            return fail(format!(
                "target_power must be in (alpha, 1), got {}",
                self.target_power
            ));
        }
        if self.replications == 0 {
            return fail("replications must be ≥ 1".into());
        }
        if !(1..=20).contains(&self.spike_level) {
            return fail(format!("spike_level must be in 1..=20, got {}", self.spike_level));
        }
        let cells = 1u64 << self.spike_level;
        if self.spikes == 0 || self.spikes as u64 > cells {
            return fail(format!(
                "spikes must be in 1..=2^spike_level, got {}",
                self.spikes
            ));
        }
        if self.r_grid.is_empty()
            || self.r_grid.windows(2).any(|w| w[0] >= w[1])
            || self.r_grid.iter().any(|&r| !(r >= 0.0) || !r.is_finite())
        {
            return fail("r_grid must be strictly increasing and ≥ 0".into());
        }
        if self.feasible_r_indices().is_empty() {
            let bound = (self.spikes as f64 / cells as f64).sqrt();
            return fail(format!(
                "no r in the grid satisfies the positivity bound r ≤ {bound}"
            ));
        }
        Ok(())
    }

    /// Indices into `r_grid` satisfying the positivity bound.
    fn feasible_r_indices(&self) -> Vec<usize> {
        let bound = self.spikes as f64 / (1u64 << self.spike_level) as f64;
        self.r_grid
            .iter()
            .enumerate()
            .filter(|(_, &r)| r * r <= bound * (1.0 + 1e-12))
            .map(|(i, _)| i)
            .collect()
    }

    /// Calibration config for one scale under the parameter rule.
    pub fn table_config(&self, scale_l: f64) -> CalibrationConfig {
        let procedure = match (self.procedure, self.parameters) {
            (AdaptiveChoice::Thresholding, ParameterRule::Simulation) => {
                Procedure::Thresholding { max_level: 6 }
            }
            (AdaptiveChoice::Thresholding, ParameterRule::Theory) => Procedure::Thresholding {
                max_level: theory_max_level(scale_l),
            },
            (AdaptiveChoice::ModelSelection, ParameterRule::Simulation) => {
                let models: Vec<u32> = (1..=6).collect();
                Procedure::ModelSelection {
                    weights: vec![(models.len() as f64).ln(); models.len()],
                    models,
                }
            }
            (AdaptiveChoice::ModelSelection, ParameterRule::Theory) => {
                let (models, weights) = theory_models(scale_l);
                Procedure::ModelSelection { models, weights }
            }
        };
        let max_weight = match &procedure {
            Procedure::ModelSelection { weights, .. } => {
                weights.iter().copied().fold(0.0f64, f64::max)
            }
            Procedure::Thresholding { .. } => 0.0,
        };
        // Spike alternatives keep unit mass, so counts concentrate at
        // mean L: precompute mean ± 5√mean and rely on lazy calibration
        // outside.
        let spread = 5.0 * scale_l.sqrt();
        CalibrationConfig {
            scale_l,
            alpha: self.alpha,
            procedure,
            n_min: (scale_l - spread).max(0.0).floor() as u64,
            n_max: (scale_l + spread).ceil() as u64,
            mc_samples: self.mc_samples,
            u_grid: default_u_grid(self.alpha, max_weight),
            master_seed: self.master_seed,
        }
    }
}

/// Power tally for one `(L, r)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RateCell {
    pub scale_l: f64,
    pub r: f64,
    pub replications: u64,
    pub rejections: u64,
}

impl RateCell {
    pub fn power(&self) -> f64 {
        self.rejections as f64 / self.replications as f64
    }

    pub fn std_err(&self) -> f64 {
        let p = self.power();
        (p * (1.0 - p) / self.replications as f64).sqrt()
    }
}

/// Probe results: every evaluated cell, the located `r*` per scale, and the
/// least-squares slope of `log r*` vs `log L`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateProbeReport {
    pub procedure: AdaptiveChoice,
    pub spike_level: u32,
    pub spikes: u32,
    pub alpha: f64,
    pub target_power: f64,
    pub cells: Vec<RateCell>,
    /// Per scale: the smallest evaluated `r` reaching the target power, if
    /// any grid point does.
    pub r_star: Vec<(f64, Option<f64>)>,
    /// Fitted only when at least two scales have a positive `r*`.
    pub slope: Option<f64>,
    pub theoretical_exponent: Option<f64>,
}

impl RateProbeReport {
    pub const CSV_HEADER: &'static str =
        "scale_l,spike_level,spikes,r,procedure,replications,rejections,power,mc_std_err";

    pub fn csv_lines(&self) -> Vec<String> {
        let mut lines = vec![format!(
            "# procedure={} alpha={} spike_level={} spikes={} target_power={}",
            self.procedure, self.alpha, self.spike_level, self.spikes, self.target_power
        )];
        let r_star = self
            .r_star
            .iter()
            .map(|(l, r)| match r {
                Some(r) => format!("{l}={r}"),
                None => format!("{l}=none"),
            })
            .collect::<Vec<_>>()
            .join(" ");
        lines.push(format!("# r_star {r_star}"));
        lines.push(match self.slope {
            Some(s) => format!("# slope={s}"),
            None => "# slope=none".to_string(),
        });
        lines.push(match self.theoretical_exponent {
            Some(e) => format!("# theoretical_exponent={e}"),
            None => "# theoretical_exponent=none".to_string(),
        });
        lines.push(Self::CSV_HEADER.to_string());
        for cell in &self.cells {
            lines.push(format!(
                "{},{},{},{},{},{},{},{},{}",
                cell.scale_l,
                self.spike_level,
                self.spikes,
                cell.r,
                self.procedure,
                cell.replications,
                cell.rejections,
                cell.power(),
                cell.std_err()
            ));
        }
        lines
    }
}

/// Estimate rejections of the table's test against fresh random spike
/// alternatives at distance `r`: each replication draws its own spike layout
/// and its own process. `stream_path` distinguishes cells (and callers) under
/// one master seed.
pub fn spike_rejection_count(
    table: &QuantileTable,
    spike_level: u32,
    spikes: u32,
    r: f64,
    replications: u64,
    master_seed: u64,
    stream_path: (u64, u64),
) -> u64 {
    let scale_l = table.config().scale_l;
    (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derive_rng(
                master_seed,
                &[tag::RATE_PROBE, stream_path.0, stream_path.1, rep],
            );
            let spec = make_spike_alternative::<f64>(spike_level, spikes, r, &mut rng)
                .expect("feasible spike parameters");
            let pattern = simulate(&spec, scale_l, &mut rng).expect("valid spike intensity");
            test_with_table(&pattern, table)
                .expect("table matches scale")
                .reject as u64
        })
        .sum()
}

/// Run the probe: per scale, bisect the feasible `r` grid for the smallest
/// `r` with estimated power ≥ target (correct under monotone power in `r`),
/// then fit the slope across scales.
pub fn run_rate_probe(config: &RateProbeConfig, store: &TableStore) -> Result<RateProbeReport> {
    config.validate()?;
    let feasible = config.feasible_r_indices();
    let mut cells: BTreeMap<(usize, usize), RateCell> = BTreeMap::new();
    let mut r_star = Vec::with_capacity(config.scales.len());
    for (scale_index, &scale_l) in config.scales.iter().enumerate() {
        let table = store.get_or_build(&config.table_config(scale_l))?;
        let power_at = |grid_index: usize, cells: &mut BTreeMap<_, _>| -> f64 {
            cells
                .entry((scale_index, grid_index))
                .or_insert_with(|| {
                    let r = config.r_grid[grid_index];
                    let rejections = spike_rejection_count(
                        &table,
                        config.spike_level,
                        config.spikes,
                        r,
                        config.replications,
                        config.master_seed,
                        (scale_index as u64, grid_index as u64),
                    );
                    RateCell {
                        scale_l,
                        r,
                        replications: config.replications,
                        rejections,
                    }
                })
                .power()
        };
        let mut lo = 0usize;
        let mut hi = feasible.len();
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if power_at(feasible[mid], &mut cells) >= config.target_power {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let star = (lo < feasible.len()).then(|| config.r_grid[feasible[lo]]);
        r_star.push((scale_l, star));
    }
    // least squares of ln r* on ln L over scales with positive r*
    let points: Vec<(f64, f64)> = r_star
        .iter()
        .filter_map(|&(l, r)| r.filter(|&r| r > 0.0).map(|r| (l.ln(), r.ln())))
        .collect();
    let slope = (points.len() >= 2).then(|| {
        let n = points.len() as f64;
        let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points
            .iter()
            .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
            .sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
        sxy / sxx
    });
    Ok(RateProbeReport {
        procedure: config.procedure,
        spike_level: config.spike_level,
        spikes: config.spikes,
        alpha: config.alpha,
        target_power: config.target_power,
        cells: cells.into_values().collect(),
        r_star,
        slope,
        theoretical_exponent: config.theoretical_exponent,
    })
}
