//! Statistical features and shape classification for metric windows.
//!
//! The classifier assigns at most one of five shapes to a window using
//! ratio-based predicates, so its output is invariant under positive
//! rescaling of the samples. Precedence is fixed: spike, dip, gradual
//! increase, gradual decrease, fluctuation; the first matching shape wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MetricSeries, PatternType};

/// Minimum window length the classifier accepts.
pub const MIN_CLASSIFY_LEN: usize = 4;

/// Minimum number of samples feature extraction accepts.
pub const MIN_FEATURE_LEN: usize = 2;

/// Fraction of first differences that must move in the trend direction for
/// a window to count as gradual.
pub const MONOTONE_MIN_FRACTION: f64 = 0.8;

/// Fraction of the baseline-to-extreme excursion that must happen in a
/// single sampling step for the excursion to count as abrupt. Separates
/// spikes and dips, which jump, from gradual ramps, which accumulate the
/// same excursion a little per step.
pub const ABRUPT_STEP_FRACTION: f64 = 0.5;

/// Thresholds for the shape predicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    /// A spike's post-baseline maximum must reach this multiple of the
    /// baseline mean.
    pub spike_ratio: f64,
    /// A dip's post-baseline minimum must fall to this fraction of the
    /// baseline mean.
    pub dip_ratio: f64,
    /// Minimum absolute normalized trend (OLS slope times window length,
    /// divided by the value range) for a gradual shape.
    pub trend_slope_min: f64,
    /// Minimum coefficient of variation for a fluctuation.
    pub fluctuation_cv_min: f64,
    /// Leading fraction of the window treated as the baseline.
    pub baseline_fraction: f64,
    /// Floor that keeps ratio predicates defined near zero.
    pub epsilon: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            spike_ratio: 2.0,
            dip_ratio: 0.5,
            trend_slope_min: 0.3,
            fluctuation_cv_min: 0.25,
            baseline_fraction: 0.3,
            epsilon: 1e-9,
        }
    }
}

impl PatternConfig {
    // Negated comparisons so that NaN thresholds fail validation too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.spike_ratio > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "spike_ratio must exceed 1, got {}",
                self.spike_ratio
            )));
        }
        if !(self.dip_ratio > 0.0 && self.dip_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dip_ratio must lie in (0, 1), got {}",
                self.dip_ratio
            )));
        }
        if !(self.trend_slope_min > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "trend_slope_min must be positive, got {}",
                self.trend_slope_min
            )));
        }
        if !(self.fluctuation_cv_min > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "fluctuation_cv_min must be positive, got {}",
                self.fluctuation_cv_min
            )));
        }
        if !(self.baseline_fraction > 0.0 && self.baseline_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "baseline_fraction must lie in (0, 1), got {}",
                self.baseline_fraction
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Summary statistics of one metric window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Coefficient of variation, zero for an all-zero window.
    pub variation: f64,
    /// Fisher moment skewness, zero for a constant window.
    pub skewness: f64,
    /// Ordinary least squares slope of value against sample index.
    pub trend: f64,
    /// Population standard deviation of the first differences.
    pub volatility: f64,
}

fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_std(values: &[f64]) -> f64 {
    let mean = mean_of(values);
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    var.sqrt()
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn features_of(values: &[f64]) -> FeatureVector {
    debug_assert!(values.len() >= MIN_FEATURE_LEN);
    let n = values.len() as f64;
    let mean = mean_of(values);
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let variation = if mean == 0.0 { 0.0 } else { std / mean };
    let skewness = if std == 0.0 {
        0.0
    } else {
        let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        m3 / (var * std)
    };
    let t_mean = (n - 1.0) / 2.0;
    let denom = n * (n * n - 1.0) / 12.0;
    let cov = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - t_mean) * (v - mean))
        .sum::<f64>();
    let trend = cov / denom;
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let volatility = population_std(&diffs);
    FeatureVector {
        mean,
        std,
        min: min_of(values),
        max: max_of(values),
        variation,
        skewness,
        trend,
        volatility,
    }
}

/// Computes the feature vector of a series. Needs at least two samples.
pub fn extract_features(series: &MetricSeries) -> Result<FeatureVector> {
    if series.values.len() < MIN_FEATURE_LEN {
        return Err(Error::ShortSeries {
            min: MIN_FEATURE_LEN,
            len: series.values.len(),
        });
    }
    Ok(features_of(&series.values))
}

/// Index of the first sample after the baseline prefix.
pub(crate) fn baseline_len(n: usize, config: &PatternConfig) -> usize {
    (((n as f64) * config.baseline_fraction).floor() as usize).max(1)
}

pub(crate) fn classify_values(values: &[f64], config: &PatternConfig) -> Option<PatternType> {
    debug_assert!(values.len() >= MIN_CLASSIFY_LEN);
    let n = values.len();
    let b = baseline_len(n, config);
    let base_mean = mean_of(&values[..b]);
    let post = &values[b..];
    let post_max = max_of(post);
    let post_min = min_of(post);
    let mut max_rise = f64::NEG_INFINITY;
    let mut max_drop = f64::NEG_INFINITY;
    let mut rises = 0usize;
    let mut drops = 0usize;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        max_rise = max_rise.max(d);
        max_drop = max_drop.max(-d);
        if d > 0.0 {
            rises += 1;
        } else if d < 0.0 {
            drops += 1;
        }
    }
    let steps = (n - 1) as f64;

    let spike = post_max >= config.spike_ratio * base_mean.max(config.epsilon)
        && post_max > base_mean
        && max_rise >= ABRUPT_STEP_FRACTION * (post_max - base_mean);
    if spike {
        return Some(PatternType::Spike);
    }

    let dip = base_mean > config.epsilon
        && post_min <= config.dip_ratio * base_mean
        && max_drop >= ABRUPT_STEP_FRACTION * (base_mean - post_min);
    if dip {
        return Some(PatternType::Dip);
    }

    let feats = features_of(values);
    let range = (feats.max - feats.min).max(config.epsilon);
    let normalized_trend = feats.trend * steps / range;
    if rises as f64 / steps >= MONOTONE_MIN_FRACTION && normalized_trend >= config.trend_slope_min {
        return Some(PatternType::GradualIncrease);
    }
    if drops as f64 / steps >= MONOTONE_MIN_FRACTION && normalized_trend <= -config.trend_slope_min
    {
        return Some(PatternType::GradualDecrease);
    }

    if feats.variation >= config.fluctuation_cv_min {
        return Some(PatternType::Fluctuation);
    }
    None
}

/// Classifies the window's shape, or `None` when no predicate matches.
/// Needs at least [`MIN_CLASSIFY_LEN`] samples.
pub fn classify_pattern(
    series: &MetricSeries,
    config: &PatternConfig,
) -> Result<Option<PatternType>> {
    config.validate()?;
    if series.values.len() < MIN_CLASSIFY_LEN {
        return Err(Error::ShortSeries {
            min: MIN_CLASSIFY_LEN,
            len: series.values.len(),
        });
    }
    Ok(classify_values(&series.values, config))
}

/// Reflects a window about its own mean, `w = 2*mean - v`, turning spikes
/// into dips and rises into falls. Returns `None` when any reflected sample
/// would leave the non-negative value domain.
pub fn reflect_values(values: &[f64]) -> Option<Vec<f64>> {
    if values.is_empty() {
        return None;
    }
    let mean = mean_of(values);
    let reflected: Vec<f64> = values.iter().map(|v| 2.0 * mean - v).collect();
    if reflected.iter().any(|w| *w < 0.0) {
        None
    } else {
        Some(reflected)
    }
}

/// Finds the smallest prefix end index at which the series first classifies
/// as any shape. Gradual shapes onset near the window start by construction.
pub fn detect_onset(series: &MetricSeries, config: &PatternConfig) -> Result<Option<usize>> {
    config.validate()?;
    if series.values.len() < MIN_CLASSIFY_LEN {
        return Err(Error::ShortSeries {
            min: MIN_CLASSIFY_LEN,
            len: series.values.len(),
        });
    }
    for end in (MIN_CLASSIFY_LEN - 1)..series.values.len() {
        if classify_values(&series.values[..=end], config).is_some() {
            return Ok(Some(end));
        }
    }
    Ok(None)
}
