//! The Haar system on `[0,1]` and the coefficient U-statistics.
//!
//! With `ψ = 𝟙_{[0,1/2)} − 𝟙_{[1/2,1)}`, the Haar function at index `λ = (j,k)`
//! is `φ_{(j,k)}(x) = 2^{j/2} ψ(2^j x − k)`. For an observed pattern
//! `X_1,…,X_n` with scale `L`, the statistic
//!
//! ```text
//! T_λ = α̂_λ² − (1/L²) Σ_l φ_λ(X_l)²  =  (1/L²) Σ_{l≠l'} φ_λ(X_l) φ_λ(X_{l'})
//! ```
//!
//! is an unbiased estimator of `α_λ²` where `α̂_λ = (1/L) Σ_l φ_λ(X_l)`. The
//! aggregated forms are `T'_J = Σ_{λ∈Λ_J} T_λ` over the full dyadic index set
//! `Λ_J = {(j,k) : j < J}` and `T''_Λ` over an arbitrary finite set.
//!
//! Because `φ_λ` is constant on each half of its support, every statistic
//! reduces to half-support point counts: with `n⁺`/`n⁻` the counts in the left
//! and right halves, `T_λ = (2^j/L²)·((n⁺−n⁻)² − (n⁺+n⁻))`. The
//! [`StatisticEngine`] computes all counts for levels `j < J` in one binning
//! pass plus dyadic aggregation, `O(n + J·2^J)` total.
//!
//! Floating-point determinism: aggregated statistics are summed level-major,
//! `k`-ascending, by a plain left fold ([`crate::numeric::sum_in_order`]
//! switches to pairwise accumulation only beyond 1024 terms), so `t_prime`,
//! `t_doubleprime`, and the engine agree bit-for-bit wherever they overlap.

use serde::{Deserialize, Serialize};

use crate::numeric::sum_in_order;
use crate::poisson::PointPattern;
use crate::real::Real;

/// Index `λ = (j,k)` of a Haar function: level `j ≥ 0`, position `0 ≤ k < 2^j`.
///
/// The derived ordering is level-major, `k`-ascending — the canonical
/// summation order for every aggregate in this crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HaarIndex {
    pub j: u32,
    pub k: u64,
}

impl HaarIndex {
    /// Build an index, checking `k < 2^j`.
    pub fn new(j: u32, k: u64) -> Self {
        assert!(j < 64, "Haar level {j} out of range");
        assert!(k < (1u64 << j), "Haar position k={k} needs k < 2^{j}");
        Self { j, k }
    }

    /// Support `[k/2^j, (k+1)/2^j)` endpoints and midpoint, in that order.
    pub fn support_thirds<R: Real>(&self) -> (R, R, R) {
        let width = R::of(2f64.powi(-(self.j as i32)));
        let lo = R::of(self.k as f64) * width;
        (lo, lo + width * R::of(0.5), lo + width)
    }

    /// `2^{j/2}`, the height of `φ_λ`.
    fn height<R: Real>(&self) -> R {
        R::of(2f64.powi(self.j as i32)).sqrt()
    }
}

impl core::fmt::Display for HaarIndex {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({},{})", self.j, self.k)
    }
}

/// A finite, duplicate-free set of Haar indices, kept in canonical
/// (level-major, `k`-ascending) order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    indices: Vec<HaarIndex>,
}

impl IndexSet {
    /// `Λ_J = {(j,k) : j < max_level}`; `2^max_level − 1` indices.
    pub fn full_levels(max_level: u32) -> Self {
        let mut indices = Vec::with_capacity((1usize << max_level) - 1);
        for j in 0..max_level {
            for k in 0..(1u64 << j) {
                indices.push(HaarIndex { j, k });
            }
        }
        Self { indices }
    }

    /// The one-element set `{λ}`.
    pub fn singleton(index: HaarIndex) -> Self {
        Self {
            indices: vec![index],
        }
    }

    /// Build from arbitrary indices; sorts and removes duplicates.
    pub fn from_indices(mut indices: Vec<HaarIndex>) -> Self {
        indices.sort();
        indices.dedup();
        Self { indices }
    }

    /// Union, preserving canonical order.
    pub fn union(&self, other: &Self) -> Self {
        let mut indices = self.indices.clone();
        indices.extend_from_slice(&other.indices);
        Self::from_indices(indices)
    }

    pub fn indices(&self) -> &[HaarIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Evaluate `φ_λ(x) = 2^{j/2} ψ(2^j x − k)`; zero outside the support, and in
/// particular `φ_λ(1) = 0` for every `λ` (the supports are right-open).
pub fn phi<R: Real>(index: HaarIndex, x: R) -> R {
    let t = x * R::of(2f64.powi(index.j as i32)) - R::of(index.k as f64);
    if t >= R::zero() && t < R::of(0.5) {
        index.height()
    } else if t >= R::of(0.5) && t < R::one() {
        -index.height::<R>()
    } else {
        R::zero()
    }
}

/// Count points in the left and right halves of `λ`'s support. The pattern's
/// points are sorted, so three binary searches suffice.
fn half_counts<R: Real>(index: HaarIndex, pattern: &PointPattern<R>) -> (u64, u64) {
    let (lo, mid, hi) = index.support_thirds::<R>();
    let points = pattern.points();
    let a = points.partition_point(|&x| x < lo);
    let b = points.partition_point(|&x| x < mid);
    let c = points.partition_point(|&x| x < hi);
    ((b - a) as u64, (c - b) as u64)
}

/// Empirical Haar coefficient `α̂_λ = (1/L) Σ_l φ_λ(X_l)`.
pub fn alpha_hat<R: Real>(index: HaarIndex, pattern: &PointPattern<R>) -> R {
    let (plus, minus) = half_counts(index, pattern);
    let diff = R::of(plus as f64) - R::of(minus as f64);
    index.height::<R>() * diff / pattern.scale()
}

/// The statistic from half-support counts; shared by every code path so the
/// per-`λ` values are bit-identical throughout.
#[inline]
fn t_from_counts<R: Real>(j: u32, plus: u64, minus: u64, scale_l: R) -> R {
    let diff = R::of(plus as f64) - R::of(minus as f64);
    let total = R::of((plus + minus) as f64);
    R::of(2f64.powi(j as i32)) * (diff * diff - total) / (scale_l * scale_l)
}

/// Unbiased estimator `T_λ` of `α_λ²`, via the algebraic identity
/// `α̂_λ² − (1/L²)Σφ_λ(X_l)²` reduced to half-support counts (the `O(n²)`
/// pairwise double loop exists only as a test oracle).
pub fn t_lambda<R: Real>(index: HaarIndex, pattern: &PointPattern<R>) -> R {
    let (plus, minus) = half_counts(index, pattern);
    t_from_counts(index.j, plus, minus, pattern.scale())
}

/// `T'_J = Σ_{λ∈Λ_J} T_λ` through the binned engine.
pub fn t_prime<R: Real>(max_level: u32, pattern: &PointPattern<R>) -> R {
    assert!(max_level >= 1);
    let mut engine = StatisticEngine::new(max_level);
    engine.compute(pattern.points(), pattern.scale());
    engine.model_sums(&[max_level])[0]
}

/// `T''_Λ = Σ_{λ∈Λ} T_λ` in canonical order.
pub fn t_doubleprime<R: Real>(set: &IndexSet, pattern: &PointPattern<R>) -> R {
    let values: Vec<R> = set
        .indices()
        .iter()
        .map(|&idx| t_lambda(idx, pattern))
        .collect();
    sum_in_order(&values)
}

/// Reusable workspace computing `T_{(j,k)}` for every `j < max_level` from one
/// binning pass: points land in the `2^max_level` finest dyadic bins, and each
/// coarser level's half-support counts come from summing adjacent bins.
#[derive(Clone, Debug)]
pub struct StatisticEngine<R> {
    max_level: u32,
    counts: Vec<u64>,
    /// `values[j][k] = T_{(j,k)}` after [`Self::compute`].
    values: Vec<Vec<R>>,
}

impl<R: Real> StatisticEngine<R> {
    pub fn new(max_level: u32) -> Self {
        assert!((1..=30).contains(&max_level), "max_level {max_level} out of range");
        Self {
            max_level,
            counts: vec![0; 1 << max_level],
            values: (0..max_level).map(|j| vec![R::zero(); 1 << j]).collect(),
        }
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Fill the per-index statistics for a pattern with the given scale.
    /// Points need not be sorted; a point exactly at 1 is outside every
    /// right-open support and is skipped.
    pub fn compute(&mut self, points: &[R], scale_l: R) {
        let bins = 1usize << self.max_level;
        self.counts[..bins].fill(0);
        let factor = R::of(bins as f64);
        for &x in points {
            debug_assert!(x >= R::zero() && x <= R::one());
            let bin = (x * factor).floor().to_f64_lossy() as usize;
            if bin < bins {
                self.counts[bin] += 1;
            }
        }
        // Fine-to-coarse: at level j the half-supports are the current
        // adjacent bin pairs; afterwards merge pairs to move one level up.
        for j in (0..self.max_level).rev() {
            let cells = 1usize << j;
            for k in 0..cells {
                let plus = self.counts[2 * k];
                let minus = self.counts[2 * k + 1];
                self.values[j as usize][k] = t_from_counts(j, plus, minus, scale_l);
                self.counts[k] = plus + minus;
            }
        }
    }

    /// `T_{(j,k)}` values at one level, `k`-ascending.
    pub fn level_values(&self, j: u32) -> &[R] {
        &self.values[j as usize]
    }

    /// `max_k T_{(j,k)}` for one level.
    pub fn level_max(&self, j: u32) -> R {
        self.values[j as usize]
            .iter()
            .fold(R::neg_infinity(), |acc, &v| acc.max(v))
    }

    /// `T'_J` for each requested `J ≤ max_level` (ascending), from one
    /// left-fold prefix pass over the level-major value sequence — so each
    /// result is bit-identical to an independent `t_prime(J, ·)`.
    pub fn model_sums(&self, models: &[u32]) -> Vec<R> {
        debug_assert!(models.windows(2).all(|w| w[0] < w[1]));
        let mut out = Vec::with_capacity(models.len());
        let total_terms = (1usize << self.max_level) - 1;
        if total_terms > 1024 {
            // Rare large-J path: no prefix trick, sum each model separately.
            for &m in models {
                assert!(m >= 1 && m <= self.max_level);
                let flat: Vec<R> = self.values[..m as usize].concat();
                out.push(sum_in_order(&flat));
            }
            return out;
        }
        let mut acc = R::zero();
        let mut next = 0usize;
        for j in 0..self.max_level {
            for &v in &self.values[j as usize] {
                acc = acc + v;
            }
            while next < models.len() && models[next] == j + 1 {
                out.push(acc);
                next += 1;
            }
        }
        assert!(next == models.len(), "models must be ≤ max_level");
        out
    }
}
