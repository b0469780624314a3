//! Seeded benchmark generator: labeled anomaly cases and deceptive normal
//! cases with paired metric windows and log lines.
//!
//! Every case draws from its own `ChaCha8Rng` stream derived from the
//! dataset seed and the case's global index, so a case's content does not
//! depend on how many cases precede it. Each generated case is certified
//! before it is emitted: its series must classify as the patterns its plan
//! asked for, an anomaly case must pass exactly its own type's metric and
//! log checks under the default ruleset, and a normal case must pass no
//! type's log signature.

mod templates;

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::metrics::{classify_values, PatternConfig};
use crate::model::{
    AnomalyType, CaseLabel, CaseRecord, Difficulty, LogEntry, MetricName, MetricSeries,
    PatternType, Unit,
};
use crate::prompt::{render_rewrite_prompt, PromptTemplates};
use crate::verifier::{verify_log, verify_metric, Ruleset};

pub use templates::MetricPlan;
pub(crate) use templates::{
    calm_plan, AnomalyScenario, NormalScenario, ANOMALY_SCENARIOS, DECEPTIVE_NORMALS, NOISE_POOL,
    NORMAL_SCENARIOS,
};

/// Multiplicative jitter applied to every level-style sample.
const JITTER: (f64, f64) = (0.97, 1.03);
/// Tighter jitter for calm series, keeping them under every change
/// threshold.
const CALM_JITTER: (f64, f64) = (0.98, 1.02);
/// Spike base level as a fraction of the plan range.
const SPIKE_BASE_BAND: (f64, f64) = (0.28, 0.34);
/// A spike plateau sits at this multiple of its base level.
const SPIKE_PLATEAU_RATIO: f64 = 2.4;
/// Fraction of the window at which step-style changes begin.
const STEP_ONSET_BAND: (f64, f64) = (0.55, 0.65);
/// Dip base level as a fraction of the plan range.
const DIP_BASE_BAND: (f64, f64) = (0.55, 0.65);
/// A dip floor sits at this fraction of its base level.
const DIP_DEPTH_BAND: (f64, f64) = (0.25, 0.32);
/// Ramp start level as a fraction of the plan range.
const RAMP_START_BAND: (f64, f64) = (0.05, 0.12);
/// Ramp end level as a fraction of the plan range.
const RAMP_TOP_BAND: (f64, f64) = (0.72, 0.82);
/// Additive per-sample ramp noise as a fraction of the ramp step.
const RAMP_NOISE_FRACTION: f64 = 0.3;
/// Fluctuation low level as a fraction of the plan range.
const FLUCT_LOW_BAND: (f64, f64) = (0.18, 0.24);
/// A fluctuation's high level sits at this multiple of its low level.
const FLUCT_RATIO_BAND: (f64, f64) = (2.05, 2.3);
/// Calm level as a fraction of the plan range.
const CALM_LEVEL_BAND: (f64, f64) = (0.10, 0.30);

/// Fewest samples a generated metric window may have.
pub const MIN_SAMPLES: usize = 8;

/// Redraws before the generator gives up on a plan. Short windows can,
/// rarely, land jitter in an order that reads as a different shape; a
/// redraw certifies every emitted series instead.
const MAX_DRAW_ATTEMPTS: usize = 16;

/// Parameters for one dataset generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    /// Root seed; every case derives its own stream from it.
    pub seed: u64,
    pub anomaly_cases: usize,
    pub normal_cases: usize,
    /// Samples per metric window in easy cases.
    pub easy_samples: usize,
    /// Samples per metric window in difficult cases.
    pub difficult_samples: usize,
    pub interval_seconds: u64,
    /// Inclusive range of background noise lines in easy cases.
    pub easy_noise_lines: (usize, usize),
    /// Inclusive range of background noise lines in difficult cases.
    pub difficult_noise_lines: (usize, usize),
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 17,
            anomaly_cases: 19,
            normal_cases: 30,
            easy_samples: 20,
            difficult_samples: 60,
            interval_seconds: 5,
            easy_noise_lines: (3, 8),
            difficult_noise_lines: (20, 60),
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.anomaly_cases + self.normal_cases == 0 {
            return Err(Error::InvalidConfig(
                "dataset must contain at least one case".to_string(),
            ));
        }
        for (name, samples) in [
            ("easy_samples", self.easy_samples),
            ("difficult_samples", self.difficult_samples),
        ] {
            if samples < MIN_SAMPLES {
                return Err(Error::InvalidConfig(format!(
                    "{name} is {samples} but the generator needs at least {MIN_SAMPLES}"
                )));
            }
        }
        if self.interval_seconds == 0 {
            return Err(Error::InvalidConfig(
                "interval_seconds must be at least 1".to_string(),
            ));
        }
        for (name, (lo, hi)) in [
            ("easy_noise_lines", self.easy_noise_lines),
            ("difficult_noise_lines", self.difficult_noise_lines),
        ] {
            if lo > hi {
                return Err(Error::InvalidConfig(format!(
                    "{name} range ({lo}, {hi}) is inverted"
                )));
            }
        }
        Ok(())
    }

    /// Anomaly cases labeled easy, about twelve in nineteen; the rest are
    /// difficult.
    pub fn easy_anomalies(&self) -> usize {
        (self.anomaly_cases * 12 + 9) / 19
    }

    /// Normal cases labeled easy, about three in five; the rest are
    /// difficult.
    pub fn easy_normals(&self) -> usize {
        (self.normal_cases * 3 + 2) / 5
    }
}

impl MetricPlan {
    /// Checks that the requested shape fits inside `[low, high]` for every
    /// possible draw, jitter included.
    pub fn validate(&self) -> Result<()> {
        if !self.low.is_finite() || !self.high.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "plan range for {} must be finite, got [{}, {}]",
                self.metric, self.low, self.high
            )));
        }
        if self.low < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "plan floor for {} is negative: {}",
                self.metric, self.low
            )));
        }
        if self.high <= self.low {
            return Err(Error::InvalidConfig(format!(
                "plan range for {} is empty: [{}, {}]",
                self.metric, self.low, self.high
            )));
        }
        if self.metric.unit() == Unit::Percent && self.high > 100.0 {
            return Err(Error::InvalidConfig(format!(
                "plan ceiling {} exceeds 100 percent for {}",
                self.high, self.metric
            )));
        }
        let lerp = |u: f64| self.low + (self.high - self.low) * u;
        let infeasible = |pattern: PatternType, message: String| {
            Err(Error::InfeasibleRange {
                pattern,
                low: self.low,
                high: self.high,
                message,
            })
        };
        match self.pattern {
            Some(PatternType::Spike) => {
                let peak = SPIKE_PLATEAU_RATIO * lerp(SPIKE_BASE_BAND.1) * JITTER.1;
                if peak > self.high {
                    return infeasible(
                        PatternType::Spike,
                        format!("worst-case plateau {peak:.2} exceeds the ceiling"),
                    );
                }
                let floor = lerp(SPIKE_BASE_BAND.0) * JITTER.0;
                if floor < self.low {
                    return infeasible(
                        PatternType::Spike,
                        format!("worst-case base {floor:.2} falls under the floor"),
                    );
                }
            }
            Some(PatternType::Dip) => {
                let floor = DIP_DEPTH_BAND.0 * lerp(DIP_BASE_BAND.0) * JITTER.0;
                if floor < self.low {
                    return infeasible(
                        PatternType::Dip,
                        format!("worst-case dip level {floor:.2} falls under the floor"),
                    );
                }
                let peak = lerp(DIP_BASE_BAND.1) * JITTER.1;
                if peak > self.high {
                    return infeasible(
                        PatternType::Dip,
                        format!("worst-case base {peak:.2} exceeds the ceiling"),
                    );
                }
            }
            Some(PatternType::Fluctuation) => {
                let peak = FLUCT_RATIO_BAND.1 * lerp(FLUCT_LOW_BAND.1) * JITTER.1;
                if peak > self.high {
                    return infeasible(
                        PatternType::Fluctuation,
                        format!("worst-case high level {peak:.2} exceeds the ceiling"),
                    );
                }
                let floor = lerp(FLUCT_LOW_BAND.0) * JITTER.0;
                if floor < self.low {
                    return infeasible(
                        PatternType::Fluctuation,
                        format!("worst-case low level {floor:.2} falls under the floor"),
                    );
                }
            }
            Some(PatternType::GradualIncrease) | Some(PatternType::GradualDecrease) => {}
            None => {
                let peak = lerp(CALM_LEVEL_BAND.1) * CALM_JITTER.1;
                let floor = lerp(CALM_LEVEL_BAND.0) * CALM_JITTER.0;
                if peak > self.high || floor < self.low {
                    return Err(Error::InvalidConfig(format!(
                        "calm range [{}, {}] for {} is too narrow for the level band",
                        self.low, self.high, self.metric
                    )));
                }
            }
        }
        Ok(())
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, band: (f64, f64)) -> f64 {
    rng.random_range(band.0..=band.1)
}

fn onset_index<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    (draw(rng, STEP_ONSET_BAND) * n as f64).round() as usize
}

fn ramp<R: Rng + ?Sized>(plan: &MetricPlan, n: usize, descending: bool, rng: &mut R) -> Vec<f64> {
    let lerp = |u: f64| plan.low + (plan.high - plan.low) * u;
    let start = lerp(draw(rng, RAMP_START_BAND));
    let top = lerp(draw(rng, RAMP_TOP_BAND));
    let step = (top - start) / (n - 1) as f64;
    let noise = RAMP_NOISE_FRACTION * step;
    (0..n)
        .map(|i| {
            let i = if descending { n - 1 - i } else { i };
            start + step * i as f64 + rng.random_range(-noise..=noise)
        })
        .collect()
}

/// Generates one metric window following `plan` and certifies it: the
/// returned series classifies as the planned pattern under `config`. For
/// step-style shapes the second element is the sample index where the
/// changed level begins.
pub fn gen_metric_series<R: Rng + ?Sized>(
    plan: &MetricPlan,
    samples: usize,
    interval_seconds: u64,
    config: &PatternConfig,
    rng: &mut R,
) -> Result<(MetricSeries, Option<usize>)> {
    plan.validate()?;
    config.validate()?;
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "window of {samples} samples is too short: the generator needs at least {MIN_SAMPLES}"
        )));
    }
    if interval_seconds == 0 {
        return Err(Error::InvalidConfig(
            "sampling interval must be at least 1 second".to_string(),
        ));
    }
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let (values, onset) = draw_values(plan, samples, rng);
        if classify_values(&values, config) == plan.pattern {
            let series = MetricSeries::new(plan.metric, interval_seconds, values);
            series.validate("generated series")?;
            return Ok((series, onset));
        }
    }
    Err(Error::TemplateClosure {
        template: format!("{} {}", plan.metric, pattern_name(plan.pattern)),
        message: format!(
            "no draw classified as {} within {MAX_DRAW_ATTEMPTS} attempts",
            pattern_name(plan.pattern)
        ),
    })
}

fn draw_values<R: Rng + ?Sized>(
    plan: &MetricPlan,
    samples: usize,
    rng: &mut R,
) -> (Vec<f64>, Option<usize>) {
    let n = samples;
    let lerp = |u: f64| plan.low + (plan.high - plan.low) * u;
    match plan.pattern {
        Some(PatternType::Spike) => {
            let base = lerp(draw(rng, SPIKE_BASE_BAND));
            let onset = onset_index(n, rng);
            let values = (0..n)
                .map(|i| {
                    let level = if i < onset {
                        base
                    } else {
                        base * SPIKE_PLATEAU_RATIO
                    };
                    level * draw(rng, JITTER)
                })
                .collect();
            (values, Some(onset))
        }
        Some(PatternType::Dip) => {
            let base = lerp(draw(rng, DIP_BASE_BAND));
            let dip = base * draw(rng, DIP_DEPTH_BAND);
            let onset = onset_index(n, rng);
            let values = (0..n)
                .map(|i| {
                    let level = if i < onset { base } else { dip };
                    level * draw(rng, JITTER)
                })
                .collect();
            (values, Some(onset))
        }
        Some(PatternType::GradualIncrease) => (ramp(plan, n, false, rng), None),
        Some(PatternType::GradualDecrease) => (ramp(plan, n, true, rng), None),
        Some(PatternType::Fluctuation) => {
            let low_level = lerp(draw(rng, FLUCT_LOW_BAND));
            let high_level = low_level * draw(rng, FLUCT_RATIO_BAND);
            let phase: bool = rng.random();
            let values = (0..n)
                .map(|i| {
                    let level = if (i % 2 == 0) == phase {
                        high_level
                    } else {
                        low_level
                    };
                    level * draw(rng, JITTER)
                })
                .collect();
            (values, None)
        }
        None => {
            let level = lerp(draw(rng, CALM_LEVEL_BAND));
            let values = (0..n).map(|_| level * draw(rng, CALM_JITTER)).collect();
            (values, None)
        }
    }
}

/// Independent deterministic stream for one case. All cases share the root
/// seed but draw from disjoint streams.
pub(crate) fn case_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Replaces `{p}` (pid), `{d}` (small number), `{q}` (large number), `{h}`
/// (hex token) and `{x}` (mac address) with random values; each occurrence
/// draws independently. Unknown braced tokens pass through untouched.
pub(crate) fn fill_placeholders<R: Rng + ?Sized>(template: &str, rng: &mut R) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let mut chars = tail.chars();
        chars.next();
        let key = chars.next();
        let close = chars.next();
        let token = match (key, close) {
            (Some(k), Some('}')) => k,
            _ => {
                out.push('{');
                rest = &tail[1..];
                continue;
            }
        };
        match token {
            'p' => out.push_str(&rng.random_range(100u32..=99_999).to_string()),
            'd' => out.push_str(&rng.random_range(1u32..=999).to_string()),
            'q' => out.push_str(&rng.random_range(1_000u32..=999_999).to_string()),
            'h' => {
                let v: u32 = rng.random();
                out.push_str(&format!("{v:08x}"));
            }
            'x' => {
                let mut mac = [0u8; 6];
                rng.fill(&mut mac[..]);
                out.push_str(&format!(
                    "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
                    mac[0], mac[1], mac[2], mac[3], mac[4], mac[5]
                ));
            }
            _ => {
                out.push('{');
                rest = &tail[1..];
                continue;
            }
        }
        rest = &tail[3..];
    }
    out.push_str(rest);
    out
}

fn metric_rank(name: MetricName) -> usize {
    MetricName::ALL
        .iter()
        .position(|m| *m == name)
        .unwrap_or(usize::MAX)
}

/// Pads the shaped plans with calm companions up to `total` series and
/// sorts the result in channel order.
fn plan_set(shaped: &[MetricPlan], total: usize) -> Vec<MetricPlan> {
    let mut plans: Vec<MetricPlan> = shaped.to_vec();
    for name in MetricName::ALL {
        if plans.len() >= total {
            break;
        }
        if plans.iter().any(|p| p.metric == name) {
            continue;
        }
        plans.push(calm_plan(name));
    }
    plans.sort_by_key(|p| metric_rank(p.metric));
    plans
}

/// Generates every planned series. Returns them plus the onset of the
/// `anchor` metric, when that metric has one.
fn build_metrics<R: Rng + ?Sized>(
    plans: &[MetricPlan],
    anchor: Option<MetricName>,
    samples: usize,
    interval_seconds: u64,
    config: &PatternConfig,
    rng: &mut R,
) -> Result<(Vec<MetricSeries>, Option<usize>)> {
    let mut series_set = Vec::with_capacity(plans.len());
    let mut anchor_onset = None;
    for plan in plans {
        let (series, onset) = gen_metric_series(plan, samples, interval_seconds, config, rng)?;
        if anchor == Some(plan.metric) {
            anchor_onset = onset;
        }
        series_set.push(series);
    }
    Ok((series_set, anchor_onset))
}

fn pattern_name(pattern: Option<PatternType>) -> String {
    match pattern {
        Some(p) => p.to_string(),
        None => "none".to_string(),
    }
}

fn noise_count<R: Rng + ?Sized>(spec: &GenSpec, difficulty: Difficulty, rng: &mut R) -> usize {
    let (lo, hi) = match difficulty {
        Difficulty::Easy => spec.easy_noise_lines,
        Difficulty::Difficult => spec.difficult_noise_lines,
    };
    rng.random_range(lo..=hi)
}

fn push_noise<R: Rng + ?Sized>(logs: &mut Vec<LogEntry>, count: usize, span: u64, rng: &mut R) {
    for _ in 0..count {
        let line = NOISE_POOL[rng.random_range(0..NOISE_POOL.len())];
        logs.push(LogEntry::new(
            rng.random_range(0..=span),
            fill_placeholders(line, rng),
        ));
    }
}

fn assemble_anomaly(
    spec: &GenSpec,
    index: usize,
    scenario: &AnomalyScenario,
    difficulty: Difficulty,
    ruleset: &Ruleset,
    config: &PatternConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CaseRecord> {
    let (samples, metric_count, shaped) = match difficulty {
        Difficulty::Easy => (spec.easy_samples, 2, vec![scenario.primary]),
        Difficulty::Difficult => (
            spec.difficult_samples,
            4,
            vec![scenario.primary, scenario.secondary],
        ),
    };
    let plans = plan_set(&shaped, metric_count);
    let (metrics, anchor_onset) = build_metrics(
        &plans,
        Some(scenario.primary.metric),
        samples,
        spec.interval_seconds,
        config,
        rng,
    )?;
    let span = (samples as u64 - 1) * spec.interval_seconds;
    // Signature lines land at or shortly after the primary onset. Shapes
    // without one (ramps, fluctuation) build up through the window, so
    // their evidence goes in its later portion.
    let sig_window = match anchor_onset {
        Some(onset) => {
            let start = (onset as u64 * spec.interval_seconds).min(span);
            (start, (start + 3 * spec.interval_seconds).min(span))
        }
        None => (span * 3 / 10, span),
    };
    let mut logs = Vec::new();
    for group in scenario.signature_variants {
        let line = group[rng.random_range(0..group.len())];
        logs.push(LogEntry::new(
            rng.random_range(sig_window.0..=sig_window.1),
            fill_placeholders(line, rng),
        ));
    }
    for line in scenario.flavor {
        logs.push(LogEntry::new(
            rng.random_range(0..=span),
            fill_placeholders(line, rng),
        ));
    }
    let noise = noise_count(spec, difficulty, rng);
    push_noise(&mut logs, noise, span, rng);
    logs.sort_by_key(|e| e.timestamp);
    let case = CaseRecord {
        id: format!("case-a{index:03}-{}", scenario.scenario),
        label: CaseLabel::anomaly(scenario.anomaly_type, difficulty, scenario.scenario),
        metrics,
        logs,
    };
    case.validate()?;
    closure_check(&case, ruleset, config)?;
    Ok(case)
}

fn assemble_normal(
    spec: &GenSpec,
    index: usize,
    scenario: &NormalScenario,
    difficulty: Difficulty,
    ruleset: &Ruleset,
    config: &PatternConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CaseRecord> {
    let (samples, metric_count) = match difficulty {
        Difficulty::Easy => (spec.easy_samples, 2),
        Difficulty::Difficult => (spec.difficult_samples, 4),
    };
    let shaped: Vec<MetricPlan> = scenario.plan.into_iter().collect();
    let plans = plan_set(&shaped, metric_count);
    let anchor = scenario.plan.map(|p| p.metric);
    let (metrics, anchor_onset) =
        build_metrics(&plans, anchor, samples, spec.interval_seconds, config, rng)?;
    let span = (samples as u64 - 1) * spec.interval_seconds;
    // Explanation lines narrate the activity from its onset onward.
    let window = match anchor_onset {
        Some(onset) => ((onset as u64 * spec.interval_seconds).min(span), span),
        None => (0, span),
    };
    let mut logs = Vec::new();
    for line in scenario.explain {
        logs.push(LogEntry::new(
            rng.random_range(window.0..=window.1),
            fill_placeholders(line, rng),
        ));
    }
    let noise = noise_count(spec, difficulty, rng);
    push_noise(&mut logs, noise, span, rng);
    logs.sort_by_key(|e| e.timestamp);
    let case = CaseRecord {
        id: format!("case-n{index:03}-{}", scenario.scenario),
        label: CaseLabel::normal(difficulty, scenario.scenario),
        metrics,
        logs,
    };
    case.validate()?;
    closure_check(&case, ruleset, config)?;
    Ok(case)
}

/// Certifies a generated case against a ruleset: an anomaly case must pass
/// its own type's metric and log checks and no other type's log signature;
/// a normal case must pass no type's log signature at all.
pub(crate) fn closure_check(
    case: &CaseRecord,
    ruleset: &Ruleset,
    config: &PatternConfig,
) -> Result<()> {
    let fail = |message: String| {
        Err(Error::TemplateClosure {
            template: case.label.scenario.clone(),
            message,
        })
    };
    match case.label.anomaly_type {
        Some(own) => {
            let metric = verify_metric(&case.metrics, own, ruleset, config)?;
            if !metric.passed {
                return fail(format!(
                    "metric checks for {own} failed: {}",
                    metric.failed_items.join("; ")
                ));
            }
            let log = verify_log(&case.logs, own, ruleset)?;
            if !log.passed {
                return fail(format!(
                    "log checks for {own} failed: {}",
                    log.failed_items.join("; ")
                ));
            }
            for other in AnomalyType::ALL {
                if other != own && verify_log(&case.logs, other, ruleset)?.passed {
                    return fail(format!("logs also satisfy the {other} signature"));
                }
            }
        }
        None => {
            for t in AnomalyType::ALL {
                if verify_log(&case.logs, t, ruleset)?.passed {
                    return fail(format!("logs satisfy the {t} signature"));
                }
            }
        }
    }
    Ok(())
}

/// Generates the full labeled dataset described by `spec`, anomaly cases
/// first. Anomaly cases cycle through the scenario per type; easy normal
/// cases cycle through the deceptive scenarios and difficult ones through
/// all normal scenarios, quiet ones included.
pub fn generate_dataset(spec: &GenSpec) -> Result<Vec<CaseRecord>> {
    spec.validate()?;
    let ruleset = Ruleset::default();
    let config = PatternConfig::default();
    let easy_anomalies = spec.easy_anomalies();
    let easy_normals = spec.easy_normals();
    let mut cases = Vec::with_capacity(spec.anomaly_cases + spec.normal_cases);
    for k in 0..spec.anomaly_cases {
        let scenario = &ANOMALY_SCENARIOS[k % ANOMALY_SCENARIOS.len()];
        let difficulty = if k < easy_anomalies {
            Difficulty::Easy
        } else {
            Difficulty::Difficult
        };
        let mut rng = case_rng(spec.seed, k as u64);
        cases.push(assemble_anomaly(
            spec, k, scenario, difficulty, &ruleset, &config, &mut rng,
        )?);
    }
    for k in 0..spec.normal_cases {
        let (scenario, difficulty) = if k < easy_normals {
            (&NORMAL_SCENARIOS[k % DECEPTIVE_NORMALS], Difficulty::Easy)
        } else {
            (
                &NORMAL_SCENARIOS[k % NORMAL_SCENARIOS.len()],
                Difficulty::Difficult,
            )
        };
        let mut rng = case_rng(spec.seed, (spec.anomaly_cases + k) as u64);
        cases.push(assemble_normal(
            spec, k, scenario, difficulty, &ruleset, &config, &mut rng,
        )?);
    }
    Ok(cases)
}

/// On-disk dataset document: the generation parameters plus every case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDoc {
    pub spec: GenSpec,
    pub cases: Vec<CaseRecord>,
}

pub fn write_dataset(path: &Path, spec: &GenSpec, cases: &[CaseRecord]) -> Result<()> {
    let doc = DatasetDoc {
        spec: spec.clone(),
        cases: cases.to_vec(),
    };
    let mut json =
        serde_json::to_string_pretty(&doc).map_err(|e| Error::json("dataset document", e))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Reads a dataset document back and validates it: the embedded [`GenSpec`]
/// must be sound, the case counts must agree with it, and every case must be
/// structurally valid.
pub fn load_dataset(path: &Path) -> Result<DatasetDoc> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: DatasetDoc =
        serde_json::from_str(&text).map_err(|e| Error::json("dataset document", e))?;
    doc.spec.validate()?;
    let anomalies = doc.cases.iter().filter(|c| c.label.is_anomaly).count();
    let normals = doc.cases.len() - anomalies;
    if anomalies != doc.spec.anomaly_cases || normals != doc.spec.normal_cases {
        return Err(Error::ManifestMismatch(format!(
            "spec declares {} anomaly and {} normal cases but the file holds {anomalies} and {normals}",
            doc.spec.anomaly_cases, doc.spec.normal_cases
        )));
    }
    for case in &doc.cases {
        case.validate()?;
    }
    Ok(doc)
}

/// Rewrites each case's log lines through the backend for surface variety.
/// A rewrite is kept only when it parses as `[seconds] text` lines, keeps
/// the line count, stays structurally valid, and still passes the closure
/// certification; otherwise the original lines stay. Returns how many cases
/// were rewritten.
pub fn llm_augment_logs(
    cases: &mut [CaseRecord],
    backend: &dyn Backend,
    templates: &PromptTemplates,
    ruleset: &Ruleset,
    config: &PatternConfig,
) -> Result<usize> {
    config.validate()?;
    let mut rewritten = 0;
    for case in cases.iter_mut() {
        let prompt = render_rewrite_prompt(templates, &case.logs);
        let Ok(reply) = backend.complete(&prompt) else {
            continue;
        };
        let Some(mut lines) = parse_rewritten_lines(&reply) else {
            continue;
        };
        if lines.len() != case.logs.len() {
            continue;
        }
        lines.sort_by_key(|e| e.timestamp);
        let mut candidate = case.clone();
        candidate.logs = lines;
        if candidate.validate().is_err() || closure_check(&candidate, ruleset, config).is_err() {
            continue;
        }
        *case = candidate;
        rewritten += 1;
    }
    Ok(rewritten)
}

/// Parses a rewrite reply. Every line must read `[seconds] text`; blank
/// lines and code fences are skipped, anything else rejects the reply.
fn parse_rewritten_lines(reply: &str) -> Option<Vec<LogEntry>> {
    let mut out = Vec::new();
    for line in reply.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        let rest = line.strip_prefix('[')?;
        let (ts, text) = rest.split_once(']')?;
        let ts = ts.trim().parse().ok()?;
        let text = text.trim();
        if text.is_empty() {
            return None;
        }
        out.push(LogEntry::new(ts, text));
    }
    (!out.is_empty()).then_some(out)
}
