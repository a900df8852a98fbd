//! Named presets: the benchmark study configurations (five alternative
//! families at scale `L = 100`, level `0.05`, models `{1,…,6}` with weight
//! `ln 6`, depth 6, counts 40–160, 200 000 calibration samples and 20 000
//! replications), a matching calibration preset, and the two parameter rules
//! for the rate probe. Desk-scale helpers shrink the Monte-Carlo sizes for
//! quick runs at correspondingly wider tolerances.

use super::power::{PowerCell, PowerConfig, PowerFamily, ProcedureSelect};
use super::rate::{AdaptiveChoice, ParameterRule, RateProbeConfig};
use crate::calibration::{default_u_grid, CalibrationConfig, Procedure};
use crate::intensity::IntensitySpec;
use crate::Intensity;

/// Replications per power cell in the full-scale study.
pub const BENCHMARK_REPLICATIONS: u64 = 20_000;
/// Calibration samples per count in the full-scale study.
pub const BENCHMARK_MC_SAMPLES: u64 = 200_000;
/// Desk-scale replications (tolerances roughly double).
pub const DESK_REPLICATIONS: u64 = 2_000;
/// Desk-scale calibration samples.
pub const DESK_MC_SAMPLES: u64 = 20_000;

const BENCHMARK_SCALE_L: f64 = 100.0;
const BENCHMARK_ALPHA: f64 = 0.05;
const BENCHMARK_N_MIN: u64 = 40;
const BENCHMARK_N_MAX: u64 = 160;

/// Master seed the presets ship with; every stream derives from it.
pub const DEFAULT_MASTER_SEED: u64 = 271_828;

pub const POWER_PRESET_NAMES: [&str; 5] =
    ["paper-s1", "paper-s2", "paper-s3", "paper-s4", "paper-s5"];
pub const CALIBRATION_PRESET_NAMES: [&str; 1] = ["paper-calibration"];
pub const RATE_PRESET_NAMES: [&str; 2] = ["simulation", "theory"];

fn benchmark_models() -> (Vec<u32>, Vec<f64>) {
    let models: Vec<u32> = (1..=6).collect();
    let weights = vec![(models.len() as f64).ln(); models.len()];
    (models, weights)
}

fn cell(label: String, intensity: Intensity) -> PowerCell {
    PowerCell { label, intensity }
}

fn family(name: &str, cells: Vec<PowerCell>) -> PowerFamily {
    PowerFamily {
        name: name.to_string(),
        cells,
    }
}

/// The zero-parameter column of every family is the homogeneous intensity.
fn null_cell(parameter: &str) -> PowerCell {
    cell(
        format!("{parameter}=0"),
        IntensitySpec::Constant { level: 1.0 },
    )
}

fn family_s1() -> PowerFamily {
    let mut cells = vec![null_cell("epsilon")];
    for eps in [0.5, 0.6, 0.7, 0.8, 0.9, 1.0] {
        cells.push(cell(
            format!("epsilon={eps}"),
            IntensitySpec::S1 { epsilon: eps },
        ));
    }
    family("s1", cells)
}

fn family_s2() -> PowerFamily {
    let mut cells = vec![null_cell("eta")];
    for eta in [0.5, 1.0, 1.5, 2.0] {
        cells.push(cell(format!("eta={eta}"), IntensitySpec::S2 { eta }));
    }
    family("s2", cells)
}

fn family_s3() -> PowerFamily {
    let mut cells = vec![null_cell("epsilon")];
    for eps in [0.2, 0.3, 0.4, 0.5, 0.6] {
        cells.push(cell(
            format!("epsilon={eps}"),
            IntensitySpec::S3 { epsilon: eps },
        ));
    }
    family("s3", cells)
}

fn family_s4() -> PowerFamily {
    let mut cells = vec![null_cell("epsilon")];
    for eps in [0.1, 0.2, 0.3, 0.4] {
        cells.push(cell(
            format!("epsilon={eps}"),
            IntensitySpec::S4 { epsilon: eps },
        ));
    }
    family("s4", cells)
}

fn family_s5() -> PowerFamily {
    let mut cells = Vec::new();
    for beta in [1.5, 2.0] {
        for eps in [0.2, 0.6, 1.0] {
            cells.push(cell(
                format!("beta={beta};epsilon={eps}"),
                IntensitySpec::S5 {
                    epsilon: eps,
                    beta,
                },
            ));
        }
    }
    family("s5", cells)
}

/// Full-scale power study for one benchmark family: `paper-s1` … `paper-s5`.
pub fn power_preset(name: &str) -> Option<PowerConfig> {
    let family = match name {
        "paper-s1" => family_s1(),
        "paper-s2" => family_s2(),
        "paper-s3" => family_s3(),
        "paper-s4" => family_s4(),
        "paper-s5" => family_s5(),
        _ => return None,
    };
    let (models, weights) = benchmark_models();
    Some(PowerConfig {
        scale_l: BENCHMARK_SCALE_L,
        alpha: BENCHMARK_ALPHA,
        replications: BENCHMARK_REPLICATIONS,
        mc_samples: BENCHMARK_MC_SAMPLES,
        n_min: BENCHMARK_N_MIN,
        n_max: BENCHMARK_N_MAX,
        models,
        weights,
        max_level: 6,
        procedures: vec![
            ProcedureSelect::ModelSelection,
            ProcedureSelect::Thresholding,
            ProcedureSelect::Ks,
            ProcedureSelect::Laplace,
            ProcedureSelect::Z,
        ],
        families: vec![family],
        master_seed: DEFAULT_MASTER_SEED,
    })
}

/// The standard model-selection calibration: `paper-calibration`.
pub fn calibration_preset(name: &str) -> Option<CalibrationConfig> {
    if name != "paper-calibration" {
        return None;
    }
    let (models, weights) = benchmark_models();
    let max_weight = weights[0];
    Some(CalibrationConfig {
        scale_l: BENCHMARK_SCALE_L,
        alpha: BENCHMARK_ALPHA,
        procedure: Procedure::ModelSelection { models, weights },
        n_min: BENCHMARK_N_MIN,
        n_max: BENCHMARK_N_MAX,
        mc_samples: BENCHMARK_MC_SAMPLES,
        u_grid: default_u_grid(BENCHMARK_ALPHA, max_weight),
        master_seed: DEFAULT_MASTER_SEED,
    })
}

/// Rate probe presets: `simulation` (fixed small test parameters) and
/// `theory` (parameters growing with the scale).
pub fn rate_preset(name: &str) -> Option<RateProbeConfig> {
    let parameters = match name {
        "simulation" => ParameterRule::Simulation,
        "theory" => ParameterRule::Theory,
        _ => return None,
    };
    Some(RateProbeConfig {
        scales: vec![50.0, 100.0, 200.0, 400.0],
        alpha: BENCHMARK_ALPHA,
        spike_level: 3,
        spikes: 8,
        r_grid: vec![
            0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
        ],
        replications: 2_000,
        target_power: 0.5,
        mc_samples: DESK_MC_SAMPLES,
        procedure: AdaptiveChoice::Thresholding,
        parameters,
        // with spike resolution and count fixed, the detectable distance
        // shrinks at the parametric rate L^{−1/2}
        theoretical_exponent: Some(-0.5),
        master_seed: DEFAULT_MASTER_SEED,
    })
}

/// Shrink a power study to desk scale (2 000 replications, 20 000
/// calibration samples); tolerances roughly double.
pub fn desk_scale_power(config: &mut PowerConfig) {
    config.replications = DESK_REPLICATIONS;
    config.mc_samples = DESK_MC_SAMPLES;
}

/// Shrink a calibration to desk scale.
pub fn desk_scale_calibration(config: &mut CalibrationConfig) {
    config.mc_samples = DESK_MC_SAMPLES;
}

/// Shrink a rate probe to desk scale.
pub fn desk_scale_rate(config: &mut RateProbeConfig) {
    config.replications = 500;
    config.mc_samples = 4_000;
}

/// Depth rule for the thresholding test at scale `L`:
/// `⌊log₂(L/ln L)⌋`, clamped to `1..=16`.
pub fn theory_max_level(scale_l: f64) -> u32 {
    let raw = (scale_l / scale_l.ln()).log2().floor();
    if raw.is_finite() {
        (raw as i64).clamp(1, 16) as u32
    } else {
        1
    }
}

/// Model rule for the model-selection test at scale `L`: models up to
/// `⌊log₂(L²/(ln ln L)³)⌋` (clamped to `1..=16`) with weight `ln |𝒥|` each.
pub fn theory_models(scale_l: f64) -> (Vec<u32>, Vec<f64>) {
    let lnln = scale_l.ln().ln();
    let raw = (scale_l * scale_l / lnln.powi(3)).log2().floor();
    let top = if raw.is_finite() {
        (raw as i64).clamp(1, 16) as u32
    } else {
        1
    };
    let models: Vec<u32> = (1..=top).collect();
    let weights = vec![(models.len() as f64).ln(); models.len()];
    (models, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_presets_validate_and_match_published_grids() {
        let cells: Vec<(&str, usize)> = vec![
            ("paper-s1", 7),
            ("paper-s2", 5),
            ("paper-s3", 6),
            ("paper-s4", 5),
            ("paper-s5", 6),
        ];
        for (name, expected) in cells {
            let config = power_preset(name).unwrap();
            config.validate().unwrap();
            assert_eq!(config.families.len(), 1);
            assert_eq!(config.families[0].cells.len(), expected, "{name}");
            assert_eq!(config.replications, 20_000);
            assert_eq!(config.mc_samples, 200_000);
            assert_eq!(config.scale_l, 100.0);
            assert_eq!(config.models, vec![1, 2, 3, 4, 5, 6]);
            assert!((config.weights[0] - 6f64.ln()).abs() < 1e-15);
        }
        assert!(power_preset("paper-s6").is_none());
    }

    #[test]
    fn s5_preset_has_no_null_cell_and_composite_labels() {
        let config = power_preset("paper-s5").unwrap();
        let labels: Vec<&str> = config.families[0]
            .cells
            .iter()
            .map(|c| c.label.as_str())
            .collect();
        assert_eq!(labels[0], "beta=1.5;epsilon=0.2");
        assert_eq!(labels[5], "beta=2;epsilon=1");
        assert!(labels.iter().all(|l| !l.contains(',')));
    }

    #[test]
    fn calibration_preset_matches_study_settings() {
        let config = calibration_preset("paper-calibration").unwrap();
        config.validate().unwrap();
        assert_eq!(config.mc_samples, 200_000);
        assert_eq!((config.n_min, config.n_max), (40, 160));
        assert_eq!(config.u_grid.len(), 200);
        let mut desk = config.clone();
        desk_scale_calibration(&mut desk);
        assert_eq!(desk.mc_samples, 20_000);
        assert!(calibration_preset("other").is_none());
    }

    #[test]
    fn rate_presets_validate() {
        for name in RATE_PRESET_NAMES {
            let config = rate_preset(name).unwrap();
            config.validate().unwrap();
            assert_eq!(config.scales, vec![50.0, 100.0, 200.0, 400.0]);
            // largest r exactly meets the positivity bound √(8/8) = 1
            assert_eq!(config.r_grid.last(), Some(&1.0));
        }
        assert!(rate_preset("paper").is_none());
    }

    #[test]
    fn theory_rules_scale_with_l() {
        assert_eq!(theory_max_level(50.0), 3);
        assert_eq!(theory_max_level(100.0), 4);
        assert_eq!(theory_max_level(200.0), 5);
        assert_eq!(theory_max_level(400.0), 6);
        let (models, weights) = theory_models(50.0);
        assert_eq!(models.last(), Some(&9));
        assert!((weights[0] - 9f64.ln()).abs() < 1e-15);
        let (models, _) = theory_models(400.0);
        assert_eq!(models.last(), Some(&14));
        // tiny scales stay clamped and usable
        assert_eq!(theory_max_level(1.5), 1);
        let (models, _) = theory_models(1.5);
        assert!(!models.is_empty());
    }
}
