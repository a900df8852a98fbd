//! The test procedures: the two adaptive Haar tests (model selection and
//! thresholding), their combination, and three classical comparators.
//!
//! * Model selection: rejects when `max_J (T'_J − q'_J) > 0` over the model
//!   collection, thresholds taken from a calibrated table at the observed
//!   count.
//! * Thresholding: rejects when any single coefficient statistic `T_{(j,k)}`
//!   exceeds its per-level threshold.
//! * Combined: runs both at half the target level and rejects if either does.
//! * Kolmogorov–Smirnov: distance of the conditional empirical CDF from
//!   uniform against the exact finite-`n` critical value.
//! * Laplace: `Σ X_l` against the upper Irwin–Hall quantile (one-sided, for
//!   increasing trend).
//! * Z: `2Σ ln X_l` against the lower chi-square(2n) quantile (one-sided).
//!
//! All procedures accept on an empty pattern: no statistic carries evidence
//! without points, and under the intended scales an empty observation has
//! probability `e^{−L}`.

use std::fmt;

use thiserror::Error;

use crate::calibration::{Procedure, QuantileTable};
use crate::dist;
use crate::haar::{HaarIndex, StatisticEngine};
use crate::poisson::{simulate_conditional_uniform, PointPattern};

#[derive(Debug, Error)]
pub enum TestError {
    #[error("table was calibrated for L = {table} but the pattern has L = {data}")]
    ScaleMismatch { table: f64, data: f64 },
    #[error("expected a table calibrated for {expected}, found {found}")]
    ProcedureMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("combined test needs both tables at the same level, got {half1} and {half2}")]
    AlphaMismatch { half1: f64, half2: f64 },
    #[error("alpha must be in (0,1), got {0}")]
    BadAlpha(f64),
    #[error("table entry is missing a threshold for key {0}")]
    MissingThreshold(u32),
}

pub type Result<T> = std::result::Result<T, TestError>;

/// Which procedure produced a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcedureKind {
    ModelSelection,
    Thresholding,
    Combined,
    KolmogorovSmirnov,
    Laplace,
    Z,
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Self::ModelSelection => "model_selection",
            Self::Thresholding => "thresholding",
            Self::Combined => "combined",
            Self::KolmogorovSmirnov => "ks",
            Self::Laplace => "laplace",
            Self::Z => "z",
        };
        f.write_str(tag)
    }
}

/// The index attaining the sup in an adaptive test's statistic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Witness {
    /// The model `J` for the model-selection statistic.
    Model(u32),
    /// The coefficient `(j,k)` for the thresholding statistic.
    Coefficient(HaarIndex),
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Model(j) => write!(f, "J={j}"),
            Self::Coefficient(idx) => write!(f, "j={};k={}", idx.j, idx.k),
        }
    }
}

/// Outcome of one procedure on one pattern.
///
/// For the adaptive tests the statistic is the achieved sup of
/// (statistic − threshold) and `reject ⇔ statistic > 0`. The comparators
/// store their natural statistic (`D_n`, `ΣX − q`, `2Σln X + q`); for Laplace
/// and Z, `reject ⇔ statistic > 0` holds as well, while KS rejects when its
/// distance exceeds the critical value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestVerdict {
    pub procedure: ProcedureKind,
    pub n_observed: u64,
    pub statistic: f64,
    pub witness: Option<Witness>,
    pub reject: bool,
}

impl TestVerdict {
    pub const CSV_HEADER: &'static str = "procedure,n,statistic,witness,reject";

    /// One CSV row matching [`Self::CSV_HEADER`]; the witness column is empty
    /// when no index attains a sup (comparators, empty patterns).
    pub fn csv_row(&self) -> String {
        let witness = self.witness.map(|w| w.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.procedure, self.n_observed, self.statistic, witness, self.reject
        )
    }
}

fn check_scale(table: &QuantileTable, pattern: &PointPattern<f64>) -> Result<()> {
    let table_l = table.config().scale_l;
    if table_l == pattern.scale() {
        Ok(())
    } else {
        Err(TestError::ScaleMismatch {
            table: table_l,
            data: pattern.scale(),
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(TestError::BadAlpha(alpha))
    }
}

/// Model-selection test: `T'_J` against its stored threshold for every model
/// `J`, rejecting iff the largest difference is positive. The table must be a
/// model-selection calibration at the pattern's scale; counts outside the
/// precomputed range calibrate lazily.
pub fn test_model_selection(
    pattern: &PointPattern<f64>,
    table: &QuantileTable,
) -> Result<TestVerdict> {
    check_scale(table, pattern)?;
    let models = match &table.config().procedure {
        Procedure::ModelSelection { models, .. } => models.clone(),
        other => {
            return Err(TestError::ProcedureMismatch {
                expected: "model_selection",
                found: match other {
                    Procedure::ModelSelection { .. } => unreachable!(),
                    Procedure::Thresholding { .. } => "thresholding",
                },
            })
        }
    };
    let n = pattern.len() as u64;
    let entry = table.entry(n);
    let mut engine = StatisticEngine::<f64>::new(*models.last().expect("validated config"));
    engine.compute(pattern.points(), pattern.scale());
    let sums = engine.model_sums(&models);
    let mut statistic = f64::NEG_INFINITY;
    let mut witness = None;
    for (&model, sum) in models.iter().zip(sums) {
        let q = entry
            .thresholds
            .get(&model)
            .copied()
            .ok_or(TestError::MissingThreshold(model))?;
        let diff = sum - q;
        if diff > statistic {
            statistic = diff;
            witness = Some(Witness::Model(model));
        }
    }
    Ok(TestVerdict {
        procedure: ProcedureKind::ModelSelection,
        n_observed: n,
        statistic,
        witness,
        reject: statistic > 0.0,
    })
}

/// Thresholding test: every coefficient statistic `T_{(j,k)}`, `j < J̄`,
/// against the shared per-level threshold, rejecting iff any difference is
/// positive. Witness is the first `(j,k)` attaining the sup.
pub fn test_thresholding(
    pattern: &PointPattern<f64>,
    table: &QuantileTable,
) -> Result<TestVerdict> {
    check_scale(table, pattern)?;
    let max_level = match &table.config().procedure {
        Procedure::Thresholding { max_level } => *max_level,
        Procedure::ModelSelection { .. } => {
            return Err(TestError::ProcedureMismatch {
                expected: "thresholding",
                found: "model_selection",
            })
        }
    };
    let n = pattern.len() as u64;
    let entry = table.entry(n);
    let mut engine = StatisticEngine::<f64>::new(max_level);
    engine.compute(pattern.points(), pattern.scale());
    let mut statistic = f64::NEG_INFINITY;
    let mut witness = None;
    for j in 0..max_level {
        let q = entry
            .thresholds
            .get(&j)
            .copied()
            .ok_or(TestError::MissingThreshold(j))?;
        for (k, &value) in engine.level_values(j).iter().enumerate() {
            let diff = value - q;
            if diff > statistic {
                statistic = diff;
                witness = Some(Witness::Coefficient(HaarIndex::new(j, k as u64)));
            }
        }
    }
    Ok(TestVerdict {
        procedure: ProcedureKind::Thresholding,
        n_observed: n,
        statistic,
        witness,
        reject: statistic > 0.0,
    })
}

/// Combined test at overall level `2·α_half`: runs the model-selection test
/// with `table_ms` and the thresholding test with `table_th` (both calibrated
/// at the same half level) and rejects iff either rejects. The statistic is
/// the larger sub-statistic, so `reject ⇔ statistic > 0` still holds.
pub fn test_combined(
    pattern: &PointPattern<f64>,
    table_ms: &QuantileTable,
    table_th: &QuantileTable,
) -> Result<TestVerdict> {
    let (a1, a2) = (table_ms.config().alpha, table_th.config().alpha);
    if a1 != a2 {
        return Err(TestError::AlphaMismatch {
            half1: a1,
            half2: a2,
        });
    }
    let ms = test_model_selection(pattern, table_ms)?;
    let th = test_thresholding(pattern, table_th)?;
    let (statistic, witness) = if ms.statistic >= th.statistic {
        (ms.statistic, ms.witness)
    } else {
        (th.statistic, th.witness)
    };
    Ok(TestVerdict {
        procedure: ProcedureKind::Combined,
        n_observed: ms.n_observed,
        statistic,
        witness,
        reject: ms.reject || th.reject,
    })
}

/// Run whichever adaptive test the table was calibrated for.
pub fn test_with_table(pattern: &PointPattern<f64>, table: &QuantileTable) -> Result<TestVerdict> {
    match table.config().procedure {
        Procedure::ModelSelection { .. } => test_model_selection(pattern, table),
        Procedure::Thresholding { .. } => test_thresholding(pattern, table),
    }
}

/// Kolmogorov–Smirnov test of the conditional sample against `Uniform[0,1]`,
/// using the exact finite-`n` critical value at level `alpha`. The statistic
/// is the KS distance `D_n` itself.
pub fn test_ks(pattern: &PointPattern<f64>, alpha: f64) -> Result<TestVerdict> {
    check_alpha(alpha)?;
    let n = pattern.len() as u64;
    if n == 0 {
        return Ok(accept_empty(ProcedureKind::KolmogorovSmirnov));
    }
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in pattern.points().iter().enumerate() {
        let upper = (i + 1) as f64 / nf - x;
        let lower = x - i as f64 / nf;
        d = d.max(upper).max(lower);
    }
    let critical = dist::ks_critical_value(n, alpha);
    Ok(TestVerdict {
        procedure: ProcedureKind::KolmogorovSmirnov,
        n_observed: n,
        statistic: d,
        witness: None,
        reject: d > critical,
    })
}

/// Laplace trend test: rejects when `Σ X_l` exceeds the `(1−α)` quantile of a
/// sum of `n` independent uniforms (exact Irwin–Hall CDF for `n ≤ 30`, normal
/// approximation beyond). The statistic is `Σ X_l − q`, positive iff
/// rejecting.
pub fn test_laplace(pattern: &PointPattern<f64>, alpha: f64) -> Result<TestVerdict> {
    check_alpha(alpha)?;
    let n = pattern.len() as u64;
    if n == 0 {
        return Ok(accept_empty(ProcedureKind::Laplace));
    }
    let sum: f64 = pattern.points().iter().sum();
    let statistic = sum - dist::uniform_sum_quantile(n, 1.0 - alpha);
    Ok(TestVerdict {
        procedure: ProcedureKind::Laplace,
        n_observed: n,
        statistic,
        witness: None,
        reject: statistic > 0.0,
    })
}

/// Z trend test: the statistic is `2Σ ln X_l + q` with `q` the `α` quantile
/// of chi-square with `2n` degrees of freedom (under uniformity,
/// `−2Σ ln X_l` is exactly chi-square(2n)); rejects when positive. A point at
/// exactly 0 drives the statistic to `−∞`, hence acceptance.
pub fn test_z(pattern: &PointPattern<f64>, alpha: f64) -> Result<TestVerdict> {
    check_alpha(alpha)?;
    let n = pattern.len() as u64;
    if n == 0 {
        return Ok(accept_empty(ProcedureKind::Z));
    }
    let log_sum: f64 = pattern.points().iter().map(|&x| x.ln()).sum();
    let statistic = 2.0 * log_sum + dist::chi_square_quantile(alpha, 2.0 * n as f64);
    Ok(TestVerdict {
        procedure: ProcedureKind::Z,
        n_observed: n,
        statistic,
        witness: None,
        reject: statistic > 0.0,
    })
}

fn accept_empty(procedure: ProcedureKind) -> TestVerdict {
    TestVerdict {
        procedure,
        n_observed: 0,
        statistic: 0.0,
        witness: None,
        reject: false,
    }
}

/// Fresh-data estimate of the conditional rejection probability at a fixed
/// count `n` for a calibrated table: draws `replications` conditional-uniform
/// samples and runs the table's own test on each. Used to verify the
/// calibration guarantee (rate ≤ α up to Monte-Carlo error).
pub fn conditional_rejection_rate(
    table: &QuantileTable,
    n: u64,
    replications: u64,
    rng: &mut impl rand::Rng,
) -> f64 {
    let scale = table.config().scale_l;
    let mut rejections = 0u64;
    for _ in 0..replications {
        let pattern = simulate_conditional_uniform::<f64>(n, scale, rng);
        if test_with_table(&pattern, table)
            .expect("table matches its own scale")
            .reject
        {
            rejections += 1;
        }
    }
    rejections as f64 / replications as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{default_u_grid, CalibrationConfig};
    use crate::haar::{t_lambda, IndexSet};
    use crate::stream::derive_rng;

    /// Build a table by hand through the public JSON interface: thresholds
    /// chosen by the test, one entry per listed n.
    fn synthetic_table(
        procedure: serde_json::Value,
        alpha: f64,
        entries: &[(u64, f64, &[(u32, f64)])],
    ) -> QuantileTable {
        let per_n: Vec<_> = entries
            .iter()
            .map(|(n, level, th)| {
                let map: serde_json::Map<String, serde_json::Value> = th
                    .iter()
                    .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
                    .collect();
                serde_json::json!({"n": n, "calibrated_level": level, "thresholds": map})
            })
            .collect();
        let file = serde_json::json!({
            "schema_version": 1,
            "config": {
                "scale_l": 100.0,
                "alpha": alpha,
                "procedure": procedure,
                "n_min": entries.first().unwrap().0,
                "n_max": entries.last().unwrap().0,
                "mc_samples": 2,
                "u_grid": [0.5, 0.4],
                "master_seed": 0,
            },
            "per_n": per_n,
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        QuantileTable::load(&path).unwrap()
    }

    fn ms_proc_json() -> serde_json::Value {
        serde_json::json!({
            "kind": "model_selection",
            "models": [1, 2, 3],
            "weights": [1.0986122886681098, 1.0986122886681098, 1.0986122886681098],
        })
    }

    fn th_proc_json(max_level: u32) -> serde_json::Value {
        serde_json::json!({"kind": "thresholding", "max_level": max_level})
    }

    #[test]
    fn ks_single_midpoint_accepts() {
        let pattern = PointPattern::new(vec![0.5], 100.0).unwrap();
        let v = test_ks(&pattern, 0.05).unwrap();
        assert_eq!(v.statistic, 0.5);
        assert!(!v.reject, "critical value at n=1 is 0.975");
        assert_eq!(v.csv_row(), "ks,1,0.5,,false");
    }

    #[test]
    fn ks_statistic_matches_direct_definition() {
        let pts = vec![0.05, 0.3, 0.31, 0.94];
        let pattern = PointPattern::new(pts.clone(), 100.0).unwrap();
        let v = test_ks(&pattern, 0.05).unwrap();
        // brute force over a fine grid of the empirical CDF deviation
        let mut sup = 0.0f64;
        for i in 0..=100_000 {
            let x = i as f64 / 100_000.0;
            let ecdf = pts.iter().filter(|&&p| p <= x).count() as f64 / 4.0;
            sup = sup.max((ecdf - x).abs());
        }
        assert!((v.statistic - sup).abs() < 1e-4);
    }

    #[test]
    fn laplace_small_sample_decisions() {
        // q_{0.95} of Irwin–Hall(2) is ≈ 1.6838
        let high = PointPattern::new(vec![0.9, 0.95], 100.0).unwrap();
        let v = test_laplace(&high, 0.05).unwrap();
        assert!(v.reject);
        assert!((v.statistic - (1.85 - 1.6837722339831621)).abs() < 1e-12);
        let low = PointPattern::new(vec![0.1, 0.2], 100.0).unwrap();
        assert!(!test_laplace(&low, 0.05).unwrap().reject);
    }

    #[test]
    fn z_single_point_cutoff_at_095() {
        // n=1: reject ⇔ 2 ln x > −χ²_{2,0.05} ⇔ x > e^{ln(0.95)} = 0.95.
        let just_above = PointPattern::new(vec![0.9501], 100.0).unwrap();
        assert!(test_z(&just_above, 0.05).unwrap().reject);
        let just_below = PointPattern::new(vec![0.9499], 100.0).unwrap();
        assert!(!test_z(&just_below, 0.05).unwrap().reject);
        // a point at zero sends the statistic to −∞: accept
        let degenerate = PointPattern::new(vec![0.0, 0.9], 100.0).unwrap();
        let v = test_z(&degenerate, 0.05).unwrap();
        assert_eq!(v.statistic, f64::NEG_INFINITY);
        assert!(!v.reject);
    }

    #[test]
    fn comparator_levels_are_exact() {
        // All three comparators have exact conditional level; check by MC.
        let mut rng = derive_rng(11, &[901]);
        let reps = 20_000;
        let mut rej = [0u64; 3];
        for _ in 0..reps {
            let pattern = simulate_conditional_uniform::<f64>(25, 100.0, &mut rng);
            rej[0] += test_ks(&pattern, 0.05).unwrap().reject as u64;
            rej[1] += test_laplace(&pattern, 0.05).unwrap().reject as u64;
            rej[2] += test_z(&pattern, 0.05).unwrap().reject as u64;
        }
        for (name, r) in ["ks", "laplace", "z"].iter().zip(rej) {
            let rate = r as f64 / reps as f64;
            // 3σ ≈ 0.0046 at 20 000 replications; KS is conservative
            // (discrete critical value), so allow the low side more room.
            assert!(
                rate <= 0.056 && rate >= 0.035,
                "{name} level {rate} out of band"
            );
        }
    }

    #[test]
    fn empty_patterns_accept_everywhere() {
        let empty = PointPattern::new(vec![], 100.0).unwrap();
        for v in [
            test_ks(&empty, 0.05).unwrap(),
            test_laplace(&empty, 0.05).unwrap(),
            test_z(&empty, 0.05).unwrap(),
        ] {
            assert!(!v.reject);
            assert_eq!(v.statistic, 0.0);
            assert_eq!(v.witness, None);
        }
        // adaptive tests: zero thresholds, zero statistics
        let table = synthetic_table(
            ms_proc_json(),
            0.05,
            &[(0, 0.9, &[(1, 0.0), (2, 0.0), (3, 0.0)])],
        );
        let v = test_model_selection(&empty, &table).unwrap();
        assert!(!v.reject);
        assert_eq!(v.statistic, 0.0);
    }

    #[test]
    fn adaptive_reject_iff_positive_statistic() {
        let pattern = PointPattern::new(vec![0.1, 0.2, 0.3], 100.0).unwrap();
        // Thresholds far below any statistic: reject with positive statistic.
        let loose = synthetic_table(
            ms_proc_json(),
            0.05,
            &[(3, 0.9, &[(1, -1.0), (2, -1.0), (3, -1.0)])],
        );
        let v = test_model_selection(&pattern, &loose).unwrap();
        assert!(v.reject && v.statistic > 0.0);
        // Thresholds far above: accept with negative statistic.
        let tight = synthetic_table(
            ms_proc_json(),
            0.05,
            &[(3, 0.9, &[(1, 9.0), (2, 9.0), (3, 9.0)])],
        );
        let v = test_model_selection(&pattern, &tight).unwrap();
        assert!(!v.reject && v.statistic < 0.0);
    }

    #[test]
    fn thresholding_witness_is_argmax_coefficient() {
        let pattern = PointPattern::new(vec![0.03, 0.07, 0.11, 0.6], 100.0).unwrap();
        let table = synthetic_table(
            th_proc_json(3),
            0.05,
            &[(4, 0.9, &[(0, 0.0), (1, 0.0), (2, 0.0)])],
        );
        let v = test_thresholding(&pattern, &table).unwrap();
        // brute-force argmax of T_{(j,k)} over all levels j < 3
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = None;
        for idx in IndexSet::full_levels(3).indices() {
            let t = t_lambda(*idx, &pattern);
            if t > best {
                best = t;
                best_idx = Some(*idx);
            }
        }
        assert_eq!(v.witness, Some(Witness::Coefficient(best_idx.unwrap())));
        assert!((v.statistic - best).abs() < 1e-15);
    }

    #[test]
    fn combined_rejects_iff_either_rejects() {
        let pattern = PointPattern::new(vec![0.1, 0.2, 0.3], 100.0).unwrap();
        let ms_loose = synthetic_table(
            ms_proc_json(),
            0.025,
            &[(3, 0.9, &[(1, -1.0), (2, -1.0), (3, -1.0)])],
        );
        let ms_tight = synthetic_table(
            ms_proc_json(),
            0.025,
            &[(3, 0.9, &[(1, 9.0), (2, 9.0), (3, 9.0)])],
        );
        let th_tight = synthetic_table(th_proc_json(3), 0.025, &[(3, 0.9, &[(0, 9.0), (1, 9.0), (2, 9.0)])]);
        let th_loose = synthetic_table(th_proc_json(3), 0.025, &[(3, 0.9, &[(0, -1.0), (1, -1.0), (2, -1.0)])]);
        assert!(!test_combined(&pattern, &ms_tight, &th_tight).unwrap().reject);
        assert!(test_combined(&pattern, &ms_loose, &th_tight).unwrap().reject);
        assert!(test_combined(&pattern, &ms_tight, &th_loose).unwrap().reject);
        let v = test_combined(&pattern, &ms_loose, &th_loose).unwrap();
        assert!(v.reject && v.statistic > 0.0);
        assert_eq!(v.procedure, ProcedureKind::Combined);
    }

    #[test]
    fn configuration_errors_are_reported() {
        let pattern = PointPattern::new(vec![0.5], 50.0).unwrap();
        let table = synthetic_table(ms_proc_json(), 0.05, &[(1, 0.9, &[(1, 0.0), (2, 0.0), (3, 0.0)])]);
        assert!(matches!(
            test_model_selection(&pattern, &table),
            Err(TestError::ScaleMismatch { .. })
        ));
        let pattern = PointPattern::new(vec![0.5], 100.0).unwrap();
        assert!(matches!(
            test_thresholding(&pattern, &table),
            Err(TestError::ProcedureMismatch { .. })
        ));
        let th = synthetic_table(th_proc_json(2), 0.05, &[(1, 0.9, &[(0, 0.0), (1, 0.0)])]);
        assert!(matches!(
            test_model_selection(&pattern, &th),
            Err(TestError::ProcedureMismatch { .. })
        ));
        let th_other = synthetic_table(th_proc_json(2), 0.01, &[(1, 0.9, &[(0, 0.0), (1, 0.0)])]);
        assert!(matches!(
            test_combined(&pattern, &table, &th_other),
            Err(TestError::AlphaMismatch { .. })
        ));
        assert!(matches!(
            test_ks(&pattern, 1.5),
            Err(TestError::BadAlpha(_))
        ));
    }

    #[test]
    fn calibrated_tables_hold_conditional_level() {
        let models = vec![1, 2, 3, 4, 5, 6];
        let w = (models.len() as f64).ln();
        let config = CalibrationConfig {
            scale_l: 100.0,
            alpha: 0.05,
            procedure: crate::calibration::Procedure::ModelSelection {
                weights: vec![w; models.len()],
                models,
            },
            n_min: 50,
            n_max: 50,
            mc_samples: 30_000,
            u_grid: default_u_grid(0.05, w),
            master_seed: 311,
        };
        let table = QuantileTable::calibrate(config.clone()).unwrap();
        let mut rng = derive_rng(312, &[44]);
        let rate = conditional_rejection_rate(&table, 50, 8_000, &mut rng);
        // 3σ at 8 000 reps ≈ 0.0073; must stay at or below α up to MC noise
        assert!(rate <= 0.058, "conditional level {rate} exceeds α band");
        assert!(rate >= 0.02, "conditional level {rate} suspiciously low");

        let mut th_config = config;
        th_config.procedure = crate::calibration::Procedure::Thresholding { max_level: 6 };
        th_config.u_grid = default_u_grid(0.05, 0.0);
        let table = QuantileTable::calibrate(th_config).unwrap();
        let rate = conditional_rejection_rate(&table, 50, 8_000, &mut rng);
        assert!(rate <= 0.058, "conditional level {rate} exceeds α band");
        assert!(rate >= 0.02, "conditional level {rate} suspiciously low");
    }

    #[test]
    fn verdict_csv_shape() {
        let pattern = PointPattern::new(vec![0.1, 0.2, 0.9], 100.0).unwrap();
        let table = synthetic_table(
            ms_proc_json(),
            0.05,
            &[(3, 0.9, &[(1, -1.0), (2, 0.5), (3, 0.5)])],
        );
        let v = test_model_selection(&pattern, &table).unwrap();
        let row = v.csv_row();
        assert_eq!(row.split(',').count(), 5);
        assert!(row.starts_with("model_selection,3,"));
        assert!(row.contains(",J="));
        assert!(row.ends_with(",true"));
        assert_eq!(TestVerdict::CSV_HEADER.split(',').count(), 5);
    }
}
