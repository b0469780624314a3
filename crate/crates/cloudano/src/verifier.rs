//! Symbolic verification: per-type metric predicates and log regex
//! signatures, plus the critic loop that accepts, retests, or abstains on
//! the pipeline's verdicts.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    classify_pattern, extract_features, FeatureVector, PatternConfig, MIN_CLASSIFY_LEN,
    MIN_FEATURE_LEN,
};
use crate::model::{
    AnomalyType, CaseRecord, FinalVerdict, LogEntry, MetricName, MetricSeries, PatternType,
    Verdict, VerdictStatus,
};

/// Default number of retests the critic loop grants before abstaining.
pub const DEFAULT_MAX_RETRIES: u32 = 2;

/// Feature statistic an auxiliary check can constrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatName {
    Mean,
    Max,
    Variation,
    Volatility,
    Trend,
}

impl StatName {
    pub fn as_str(self) -> &'static str {
        match self {
            StatName::Mean => "mean",
            StatName::Max => "max",
            StatName::Variation => "variation",
            StatName::Volatility => "volatility",
            StatName::Trend => "trend",
        }
    }

    pub fn value(self, features: &FeatureVector) -> f64 {
        match self {
            StatName::Mean => features.mean,
            StatName::Max => features.max,
            StatName::Variation => features.variation,
            StatName::Volatility => features.volatility,
            StatName::Trend => features.trend,
        }
    }
}

impl fmt::Display for StatName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Ge,
    Le,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Ge => value >= threshold,
            Comparator::Le => value <= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
        }
    }
}

/// Threshold constraint on one feature statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxCheck {
    pub stat: StatName,
    pub comparator: Comparator,
    pub threshold: f64,
}

/// Requires a named metric to show a pattern, with optional feature bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPredicate {
    pub metric: MetricName,
    pub required_pattern: PatternType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aux_checks: Vec<AuxCheck>,
}

/// Conjunctive regex signature over the case's log lines. Every
/// `must_match` regex has to match at least one line; any `must_not_match`
/// hit (a benign explanation) fails the check outright.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSignature {
    pub must_match: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub must_not_match: Vec<String>,
}

/// Full symbolic rule for one anomaly type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub anomaly_type: AnomalyType,
    pub metric_predicates: Vec<MetricPredicate>,
    pub log_signature: LogSignature,
}

struct CompiledSignature {
    must: Vec<Regex>,
    must_not: Vec<Regex>,
}

/// A validated, compiled set of rules covering every anomaly type.
pub struct Ruleset {
    specs: Vec<RuleSpec>,
    index: HashMap<AnomalyType, usize>,
    compiled: Vec<CompiledSignature>,
}

#[derive(Serialize, Deserialize)]
struct RulesetDoc {
    rules: Vec<RuleSpec>,
}

fn compile(rule: AnomalyType, pattern: &str) -> Result<Regex> {
    Regex::new(pattern).map_err(|e| Error::InvalidRegex {
        rule: rule.to_string(),
        pattern: pattern.to_string(),
        message: e.to_string(),
    })
}

impl Ruleset {
    /// Validates and compiles a rule list. Every anomaly type must appear
    /// exactly once, every predicate list must be non-empty, and every
    /// regex must compile.
    pub fn from_specs(specs: Vec<RuleSpec>) -> Result<Self> {
        let mut index = HashMap::new();
        let mut compiled = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            if index.insert(spec.anomaly_type, i).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "duplicate rule for anomaly type {}",
                    spec.anomaly_type
                )));
            }
            if spec.metric_predicates.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "rule for {} has no metric predicates",
                    spec.anomaly_type
                )));
            }
            if spec.log_signature.must_match.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "rule for {} has an empty must_match list",
                    spec.anomaly_type
                )));
            }
            let must = spec
                .log_signature
                .must_match
                .iter()
                .map(|p| compile(spec.anomaly_type, p))
                .collect::<Result<Vec<_>>>()?;
            let must_not = spec
                .log_signature
                .must_not_match
                .iter()
                .map(|p| compile(spec.anomaly_type, p))
                .collect::<Result<Vec<_>>>()?;
            compiled.push(CompiledSignature { must, must_not });
        }
        for t in AnomalyType::ALL {
            if !index.contains_key(&t) {
                return Err(Error::InvalidConfig(format!("ruleset has no rule for {t}")));
            }
        }
        Ok(Ruleset {
            specs,
            index,
            compiled,
        })
    }

    pub fn specs(&self) -> &[RuleSpec] {
        &self.specs
    }

    pub fn get(&self, t: AnomalyType) -> Result<&RuleSpec> {
        self.index
            .get(&t)
            .map(|i| &self.specs[*i])
            .ok_or(Error::UnknownAnomalyType(t))
    }

    fn signature(&self, t: AnomalyType) -> Result<&CompiledSignature> {
        self.index
            .get(&t)
            .map(|i| &self.compiled[*i])
            .ok_or(Error::UnknownAnomalyType(t))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = RulesetDoc {
            rules: self.specs.clone(),
        };
        let mut out = serde_json::to_string_pretty(&doc).map_err(|e| Error::json("ruleset", e))?;
        out.push('\n');
        Ok(out)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: RulesetDoc = serde_json::from_str(json)
            .map_err(|e| Error::schema("ruleset document", e.to_string()))?;
        Ruleset::from_specs(doc.rules)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ruleset::from_json(&json)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

impl Default for Ruleset {
    fn default() -> Self {
        Ruleset::from_specs(default_specs()).expect("built-in ruleset must compile")
    }
}

fn pattern_rule(
    anomaly_type: AnomalyType,
    metric: MetricName,
    required_pattern: PatternType,
    aux_checks: Vec<AuxCheck>,
    must_match: &[&str],
    must_not_match: &[&str],
) -> RuleSpec {
    RuleSpec {
        anomaly_type,
        metric_predicates: vec![MetricPredicate {
            metric,
            required_pattern,
            aux_checks,
        }],
        log_signature: LogSignature {
            must_match: must_match.iter().map(|s| s.to_string()).collect(),
            must_not_match: must_not_match.iter().map(|s| s.to_string()).collect(),
        },
    }
}

fn aux_ge(stat: StatName, threshold: f64) -> AuxCheck {
    AuxCheck {
        stat,
        comparator: Comparator::Ge,
        threshold,
    }
}

/// The built-in rule catalogue, one rule per anomaly type.
pub fn default_specs() -> Vec<RuleSpec> {
    vec![
        pattern_rule(
            AnomalyType::Mine,
            MetricName::Cpu,
            PatternType::Spike,
            vec![aux_ge(StatName::Max, 60.0)],
            &[r"(?i)xmrig", r"(?i)\bcron\b"],
            &[],
        ),
        pattern_rule(
            AnomalyType::Oom,
            MetricName::Memory,
            PatternType::GradualIncrease,
            vec![aux_ge(StatName::Max, 70.0)],
            &[r"(?i)oom[- ]?kill", r"GC"],
            &[],
        ),
        pattern_rule(
            AnomalyType::GpuHijack,
            MetricName::Gpu,
            PatternType::Spike,
            vec![],
            &[
                r"(?i)unregistered container|unknown container|not in the registry allowlist",
                r"(?i)cuda|gpu compute|deep.?learning",
            ],
            &[r"(?i)approved (training|inference) queue"],
        ),
        pattern_rule(
            AnomalyType::PortScan,
            MetricName::NetIn,
            PatternType::Fluctuation,
            vec![],
            &[r"(?i)connection attempt", r"(?i)refused|dropped|rejected"],
            &[],
        ),
        pattern_rule(
            AnomalyType::IcmpFloodDos,
            MetricName::NetIn,
            PatternType::Spike,
            vec![aux_ge(StatName::Max, 30.0)],
            &[r"(?i)icmp echo request", r"(?i)flood|burst|rate.?limit"],
            &[],
        ),
        pattern_rule(
            AnomalyType::DnsAmplification,
            MetricName::NetOut,
            PatternType::Spike,
            vec![],
            &[r"(?i)dns quer(y|ies)", r"(?i)open resolver"],
            &[],
        ),
        pattern_rule(
            AnomalyType::DataExfiltration,
            MetricName::NetOut,
            PatternType::GradualIncrease,
            vec![],
            &[r"(?i)\b(scp|curl)\b", r"(?i)outbound"],
            &[r"(?i)change ticket|approved transfer"],
        ),
        pattern_rule(
            AnomalyType::ArpSpoofing,
            MetricName::NetIn,
            PatternType::Fluctuation,
            vec![],
            &[r"(?i)arp reply", r"(?i)duplicate|flip.?flop|conflict|spoof"],
            &[],
        ),
        pattern_rule(
            AnomalyType::LogStorm,
            MetricName::DiskIo,
            PatternType::Spike,
            vec![],
            &[r"(?i)crawler", r"(?i)rate.?limit|begins to drop"],
            &[],
        ),
        pattern_rule(
            AnomalyType::LogGrowthAnomaly,
            MetricName::DiskIo,
            PatternType::GradualIncrease,
            vec![],
            &[
                r"(?i)backup job",
                r"(?i)(retention|rotation).*(skipped|failed|disabled)",
            ],
            &[r"(?i)(retention|rotation).*(applied|completed|succeeded)"],
        ),
    ]
}

/// Outcome of one symbolic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub passed: bool,
    pub failed_items: Vec<String>,
    pub matched_evidence: Vec<String>,
}

impl CheckResult {
    fn new(failed_items: Vec<String>, matched_evidence: Vec<String>) -> Self {
        CheckResult {
            passed: failed_items.is_empty(),
            failed_items,
            matched_evidence,
        }
    }
}

/// Checks the metric predicates of type `t` against the case's series.
pub fn verify_metric(
    metrics: &[MetricSeries],
    t: AnomalyType,
    ruleset: &Ruleset,
    config: &PatternConfig,
) -> Result<CheckResult> {
    config.validate()?;
    let spec = ruleset.get(t)?;
    let mut failed = Vec::new();
    let mut evidence = Vec::new();
    for pred in &spec.metric_predicates {
        let Some(series) = metrics.iter().find(|m| m.name == pred.metric) else {
            failed.push(format!(
                "metric {}: required for {t} but absent from the case",
                pred.metric
            ));
            continue;
        };
        let observed = if series.values.len() >= MIN_CLASSIFY_LEN {
            classify_pattern(series, config)?
        } else {
            None
        };
        if observed == Some(pred.required_pattern) {
            evidence.push(format!(
                "metric {} shows {}",
                pred.metric, pred.required_pattern
            ));
        } else {
            failed.push(format!(
                "metric {}: expected pattern {}, observed {}",
                pred.metric,
                pred.required_pattern,
                match observed {
                    Some(p) => p.to_string(),
                    None => "none".to_string(),
                }
            ));
        }
        if series.values.len() >= MIN_FEATURE_LEN {
            let features = extract_features(series)?;
            for check in &pred.aux_checks {
                let value = check.stat.value(&features);
                if !check.comparator.holds(value, check.threshold) {
                    failed.push(format!(
                        "metric {}: {} {:.2} violates {} {} {}",
                        pred.metric,
                        check.stat,
                        value,
                        check.stat,
                        check.comparator.symbol(),
                        check.threshold
                    ));
                }
            }
        } else if !pred.aux_checks.is_empty() {
            failed.push(format!(
                "metric {}: too short for feature checks",
                pred.metric
            ));
        }
    }
    Ok(CheckResult::new(failed, evidence))
}

/// Checks the log signature of type `t` against the case's log lines.
pub fn verify_log(logs: &[LogEntry], t: AnomalyType, ruleset: &Ruleset) -> Result<CheckResult> {
    let spec = ruleset.get(t)?;
    let sig = ruleset.signature(t)?;
    let mut failed = Vec::new();
    let mut evidence = Vec::new();
    for (source, rx) in spec.log_signature.must_match.iter().zip(&sig.must) {
        match logs.iter().find(|e| rx.is_match(&e.text)) {
            Some(entry) => evidence.push(entry.text.clone()),
            None => failed.push(format!("log: no line matches /{source}/")),
        }
    }
    for (source, rx) in spec.log_signature.must_not_match.iter().zip(&sig.must_not) {
        if let Some(entry) = logs.iter().find(|e| rx.is_match(&e.text)) {
            failed.push(format!(
                "log: benign override /{source}/ matched {:?}",
                entry.text
            ));
        }
    }
    Ok(CheckResult::new(failed, evidence))
}

/// Finds the first anomaly type, in enum order, whose metric and log checks
/// both pass on the case.
pub fn scan_types(
    case: &CaseRecord,
    ruleset: &Ruleset,
    config: &PatternConfig,
) -> Result<Option<AnomalyType>> {
    for t in AnomalyType::ALL {
        if verify_metric(&case.metrics, t, ruleset, config)?.passed
            && verify_log(&case.logs, t, ruleset)?.passed
        {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Produces a replacement verdict when the verifier rejects the current one.
pub trait Retester {
    fn retest(
        &self,
        case: &CaseRecord,
        previous: &Verdict,
        failed_checks: &[String],
        suggested: Option<AnomalyType>,
    ) -> Result<Verdict>;
}

/// Backend-free retester that answers straight from the symbolic scan.
pub struct SymbolicRetester<'a> {
    pub ruleset: &'a Ruleset,
    pub config: &'a PatternConfig,
}

impl Retester for SymbolicRetester<'_> {
    fn retest(
        &self,
        case: &CaseRecord,
        _previous: &Verdict,
        _failed_checks: &[String],
        _suggested: Option<AnomalyType>,
    ) -> Result<Verdict> {
        Ok(match scan_types(case, self.ruleset, self.config)? {
            Some(t) => Verdict::anomaly(t, format!("symbolic scan: both checks pass for {t}")),
            None => Verdict::normal("symbolic scan: no type satisfies both checks"),
        })
    }
}

enum Consistency {
    Consistent,
    Inconsistent {
        failed: Vec<String>,
        suggested: Option<AnomalyType>,
    },
}

fn check_consistency(
    verdict: &Verdict,
    case: &CaseRecord,
    ruleset: &Ruleset,
    config: &PatternConfig,
) -> Result<Consistency> {
    if let Some(t) = verdict.anomaly_type {
        let metric = verify_metric(&case.metrics, t, ruleset, config)?;
        let log = verify_log(&case.logs, t, ruleset)?;
        if metric.passed && log.passed {
            return Ok(Consistency::Consistent);
        }
        let mut failed = metric.failed_items;
        failed.extend(log.failed_items);
        Ok(Consistency::Inconsistent {
            failed,
            suggested: None,
        })
    } else {
        match scan_types(case, ruleset, config)? {
            None => Ok(Consistency::Consistent),
            Some(t) => Ok(Consistency::Inconsistent {
                failed: vec![format!(
                    "verdict is normal but the case satisfies both checks for {t}"
                )],
                suggested: Some(t),
            }),
        }
    }
}

/// Validates a verdict against the ruleset, retesting on mismatch until the
/// verdict becomes consistent or `max_retries` runs out.
///
/// An anomaly verdict is consistent when both checks pass for its type; a
/// normal verdict is consistent when no type passes both checks. Each
/// inconsistency costs one retester call; exhaustion abstains with the last
/// verdict retained and the outstanding check failures attached.
pub fn verify_and_critic(
    initial: &Verdict,
    case: &CaseRecord,
    ruleset: &Ruleset,
    config: &PatternConfig,
    retester: &dyn Retester,
    max_retries: u32,
) -> Result<FinalVerdict> {
    initial.validate()?;
    let mut current = initial.clone();
    let mut retries = 0u32;
    loop {
        match check_consistency(&current, case, ruleset, config)? {
            Consistency::Consistent => {
                let status = if current.same_decision(initial) {
                    VerdictStatus::Accepted
                } else {
                    VerdictStatus::Corrected
                };
                return Ok(FinalVerdict {
                    verdict: current,
                    status,
                    retries_used: retries,
                    failed_checks: Vec::new(),
                });
            }
            Consistency::Inconsistent { failed, suggested } => {
                if retries >= max_retries {
                    return Ok(FinalVerdict {
                        verdict: current,
                        status: VerdictStatus::Abstained,
                        retries_used: retries,
                        failed_checks: failed,
                    });
                }
                retries += 1;
                current = retester.retest(case, &current, &failed, suggested)?;
                current.validate()?;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    use crate::model::{CaseLabel, Difficulty};

    fn step(base: f64, level: f64, n: usize, onset: usize) -> Vec<f64> {
        (0..n)
            .map(|i| if i < onset { base } else { level })
            .collect()
    }

    fn mine_case() -> CaseRecord {
        CaseRecord {
            id: "mine-1".to_string(),
            label: CaseLabel::anomaly(AnomalyType::Mine, Difficulty::Easy, "covert-miner"),
            metrics: vec![
                MetricSeries::new(MetricName::Cpu, 5, step(10.0, 80.0, 20, 12)),
                MetricSeries::new(MetricName::Memory, 5, vec![40.0; 20]),
            ],
            logs: vec![
                LogEntry::new(10, "sshd[4410]: Accepted publickey for deploy"),
                LogEntry::new(61, "CRON[9912]: (root) CMD (/tmp/.cache/xmrig --threads 8)"),
            ],
        }
    }

    fn benign_case() -> CaseRecord {
        CaseRecord {
            id: "benign-1".to_string(),
            label: CaseLabel::normal(Difficulty::Easy, "apt-upgrade-burst"),
            metrics: vec![
                MetricSeries::new(MetricName::Cpu, 5, step(10.0, 80.0, 20, 12)),
                MetricSeries::new(MetricName::Memory, 5, vec![40.0; 20]),
            ],
            logs: vec![
                LogEntry::new(
                    5,
                    "apt-daily.service: starting unattended upgrade of 14 packages",
                ),
                LogEntry::new(70, "dpkg: unpacking linux-headers"),
                LogEntry::new(92, "apt-daily.service: upgrade finished"),
            ],
        }
    }

    #[test]
    fn default_ruleset_covers_every_type_once() {
        let ruleset = Ruleset::default();
        assert_eq!(ruleset.specs().len(), AnomalyType::ALL.len());
        for t in AnomalyType::ALL {
            let spec = ruleset.get(t).unwrap();
            assert_eq!(spec.anomaly_type, t);
            assert!(!spec.metric_predicates.is_empty());
            assert!(!spec.log_signature.must_match.is_empty());
        }
    }

    #[test]
    fn ruleset_round_trips_through_json() {
        let ruleset = Ruleset::default();
        let json = ruleset.to_json().unwrap();
        let back = Ruleset::from_json(&json).unwrap();
        assert_eq!(back.specs(), ruleset.specs());
    }

    #[test]
    fn incomplete_or_broken_rulesets_are_rejected() {
        let mut specs = default_specs();
        specs.pop();
        assert!(matches!(
            Ruleset::from_specs(specs),
            Err(Error::InvalidConfig(_))
        ));

        let mut specs = default_specs();
        specs[0].log_signature.must_match = vec!["(unclosed".to_string()];
        assert!(matches!(
            Ruleset::from_specs(specs),
            Err(Error::InvalidRegex { .. })
        ));

        let mut specs = default_specs();
        let dup = specs[0].clone();
        specs.push(dup);
        assert!(Ruleset::from_specs(specs).is_err());

        let mut specs = default_specs();
        specs[3].metric_predicates.clear();
        assert!(Ruleset::from_specs(specs).is_err());
    }

    #[test]
    fn mine_logs_pass_the_mine_signature() {
        let ruleset = Ruleset::default();
        let result = verify_log(&mine_case().logs, AnomalyType::Mine, &ruleset).unwrap();
        assert!(result.passed, "failed: {:?}", result.failed_items);
        assert_eq!(result.matched_evidence.len(), 2);
        assert!(result.matched_evidence[0].contains("xmrig"));
    }

    #[test]
    fn empty_logs_fail_every_signature() {
        let ruleset = Ruleset::default();
        for t in AnomalyType::ALL {
            let result = verify_log(&[], t, &ruleset).unwrap();
            assert!(!result.passed);
            assert!(!result.failed_items.is_empty());
        }
    }

    #[test]
    fn benign_upgrade_logs_fail_every_signature() {
        let ruleset = Ruleset::default();
        for t in AnomalyType::ALL {
            let result = verify_log(&benign_case().logs, t, &ruleset).unwrap();
            assert!(!result.passed, "{t} matched benign logs");
        }
    }

    #[test]
    fn benign_override_defeats_a_keyword_collision() {
        let ruleset = Ruleset::default();
        let logs = vec![
            LogEntry::new(
                3,
                "transfer: curl push of nightly artifacts, outbound to mirror",
            ),
            LogEntry::new(9, "change ticket CHG-4412 approved transfer window"),
        ];
        let result = verify_log(&logs, AnomalyType::DataExfiltration, &ruleset).unwrap();
        assert!(!result.passed);
        assert!(result
            .failed_items
            .iter()
            .any(|item| item.contains("benign override")));
    }

    #[test]
    fn metric_check_passes_on_a_matching_spike() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let result =
            verify_metric(&mine_case().metrics, AnomalyType::Mine, &ruleset, &config).unwrap();
        assert!(result.passed, "failed: {:?}", result.failed_items);
        assert!(result.matched_evidence[0].contains("cpu shows spike"));
    }

    #[test]
    fn constant_metrics_fail_every_type() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let metrics = vec![
            MetricSeries::new(MetricName::Cpu, 5, vec![20.0; 20]),
            MetricSeries::new(MetricName::Memory, 5, vec![40.0; 20]),
            MetricSeries::new(MetricName::Gpu, 5, vec![5.0; 20]),
            MetricSeries::new(MetricName::DiskIo, 5, vec![8.0; 20]),
            MetricSeries::new(MetricName::NetIn, 5, vec![4.0; 20]),
            MetricSeries::new(MetricName::NetOut, 5, vec![4.0; 20]),
        ];
        for t in AnomalyType::ALL {
            let result = verify_metric(&metrics, t, &ruleset, &config).unwrap();
            assert!(!result.passed);
            assert!(result
                .failed_items
                .iter()
                .any(|item| item.contains("expected pattern")));
        }
    }

    #[test]
    fn gradual_memory_rise_fails_the_mine_predicates() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let ramp: Vec<f64> = (0..20).map(|i| 40.0 + 2.5 * i as f64).collect();
        let metrics = vec![
            MetricSeries::new(MetricName::Cpu, 5, vec![20.0; 20]),
            MetricSeries::new(MetricName::Memory, 5, ramp),
        ];
        let result = verify_metric(&metrics, AnomalyType::Mine, &ruleset, &config).unwrap();
        assert!(!result.passed);
        assert!(result.failed_items[0].contains("metric cpu"));
    }

    #[test]
    fn missing_metric_is_a_named_failure() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let metrics = vec![MetricSeries::new(MetricName::Memory, 5, vec![40.0; 20])];
        let result = verify_metric(&metrics, AnomalyType::Mine, &ruleset, &config).unwrap();
        assert!(!result.passed);
        assert!(result.failed_items[0].contains("absent from the case"));
    }

    #[test]
    fn aux_checks_catch_low_magnitude_spikes() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let metrics = vec![MetricSeries::new(
            MetricName::Cpu,
            5,
            step(5.0, 25.0, 20, 12),
        )];
        let result = verify_metric(&metrics, AnomalyType::Mine, &ruleset, &config).unwrap();
        assert!(!result.passed);
        assert!(result
            .failed_items
            .iter()
            .any(|item| item.contains("max") && item.contains(">= 60")));
    }

    #[test]
    fn check_result_flag_tracks_failed_items() {
        let ruleset = Ruleset::default();
        let ok = verify_log(&mine_case().logs, AnomalyType::Mine, &ruleset).unwrap();
        assert_eq!(ok.passed, ok.failed_items.is_empty());
        let bad = verify_log(&[], AnomalyType::Mine, &ruleset).unwrap();
        assert_eq!(bad.passed, bad.failed_items.is_empty());
    }

    struct ConstantRetester(Verdict);

    impl Retester for ConstantRetester {
        fn retest(
            &self,
            _case: &CaseRecord,
            _previous: &Verdict,
            _failed: &[String],
            _suggested: Option<AnomalyType>,
        ) -> Result<Verdict> {
            Ok(self.0.clone())
        }
    }

    struct CountingRetester<'a> {
        inner: SymbolicRetester<'a>,
        calls: Cell<u32>,
    }

    impl Retester for CountingRetester<'_> {
        fn retest(
            &self,
            case: &CaseRecord,
            previous: &Verdict,
            failed: &[String],
            suggested: Option<AnomalyType>,
        ) -> Result<Verdict> {
            self.calls.set(self.calls.get() + 1);
            self.inner.retest(case, previous, failed, suggested)
        }
    }

    struct PanicRetester;

    impl Retester for PanicRetester {
        fn retest(
            &self,
            _case: &CaseRecord,
            _previous: &Verdict,
            _failed: &[String],
            _suggested: Option<AnomalyType>,
        ) -> Result<Verdict> {
            panic!("retester must not be called");
        }
    }

    #[test]
    fn consistent_initial_verdict_is_accepted_without_retests() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let case = mine_case();
        let initial = Verdict::anomaly(AnomalyType::Mine, "cpu spike with miner logs");
        let fv = verify_and_critic(&initial, &case, &ruleset, &config, &PanicRetester, 2).unwrap();
        assert_eq!(fv.status, VerdictStatus::Accepted);
        assert_eq!(fv.retries_used, 0);
        assert!(fv.failed_checks.is_empty());
        assert_eq!(fv.verdict.anomaly_type, Some(AnomalyType::Mine));
    }

    #[test]
    fn benign_normal_verdict_is_accepted_without_retests() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let case = benign_case();
        let initial = Verdict::normal("looks like scheduled maintenance");
        let fv = verify_and_critic(&initial, &case, &ruleset, &config, &PanicRetester, 2).unwrap();
        assert_eq!(fv.status, VerdictStatus::Accepted);
        assert_eq!(fv.retries_used, 0);
        assert!(!fv.verdict.is_anomaly);
    }

    #[test]
    fn wrong_type_is_corrected_via_one_retest() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let case = mine_case();
        let retester = CountingRetester {
            inner: SymbolicRetester {
                ruleset: &ruleset,
                config: &config,
            },
            calls: Cell::new(0),
        };
        let initial = Verdict::anomaly(AnomalyType::Oom, "misread the memory curve");
        let fv = verify_and_critic(&initial, &case, &ruleset, &config, &retester, 2).unwrap();
        assert_eq!(fv.status, VerdictStatus::Corrected);
        assert_eq!(fv.retries_used, 1);
        assert_eq!(retester.calls.get(), 1);
        assert_eq!(fv.verdict.anomaly_type, Some(AnomalyType::Mine));
    }

    #[test]
    fn missed_anomaly_is_corrected_from_the_type_scan() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let case = mine_case();
        let retester = SymbolicRetester {
            ruleset: &ruleset,
            config: &config,
        };
        let initial = Verdict::normal("nothing suspicious");
        let fv = verify_and_critic(&initial, &case, &ruleset, &config, &retester, 2).unwrap();
        assert_eq!(fv.status, VerdictStatus::Corrected);
        assert_eq!(fv.verdict.anomaly_type, Some(AnomalyType::Mine));
        assert_eq!(fv.retries_used, 1);
    }

    #[test]
    fn stubborn_wrong_answers_exhaust_retries_and_abstain() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let case = mine_case();
        let retester = ConstantRetester(Verdict::anomaly(AnomalyType::Oom, "stuck"));
        let initial = Verdict::anomaly(AnomalyType::Oom, "stuck");
        let fv = verify_and_critic(&initial, &case, &ruleset, &config, &retester, 2).unwrap();
        assert_eq!(fv.status, VerdictStatus::Abstained);
        assert_eq!(fv.retries_used, 2);
        assert!(!fv.failed_checks.is_empty());
        assert_eq!(fv.verdict.anomaly_type, Some(AnomalyType::Oom));
    }

    #[test]
    fn zero_retries_abstains_immediately_on_inconsistency() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let case = mine_case();
        let initial = Verdict::anomaly(AnomalyType::Oom, "wrong");
        let fv = verify_and_critic(&initial, &case, &ruleset, &config, &PanicRetester, 0).unwrap();
        assert_eq!(fv.status, VerdictStatus::Abstained);
        assert_eq!(fv.retries_used, 0);
    }

    #[test]
    fn accepted_anomalies_really_pass_both_checks() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let case = mine_case();
        let retester = SymbolicRetester {
            ruleset: &ruleset,
            config: &config,
        };
        let initial = Verdict::anomaly(AnomalyType::Oom, "wrong at first");
        let fv = verify_and_critic(&initial, &case, &ruleset, &config, &retester, 2).unwrap();
        let t = fv.verdict.anomaly_type.unwrap();
        assert!(
            verify_metric(&case.metrics, t, &ruleset, &config)
                .unwrap()
                .passed
        );
        assert!(verify_log(&case.logs, t, &ruleset).unwrap().passed);
    }

    #[test]
    fn spurious_anomaly_on_a_benign_case_is_corrected_to_normal() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        let case = benign_case();
        let retester = SymbolicRetester {
            ruleset: &ruleset,
            config: &config,
        };
        let initial = Verdict::anomaly(AnomalyType::Mine, "spike looked like mining");
        let fv = verify_and_critic(&initial, &case, &ruleset, &config, &retester, 2).unwrap();
        assert_eq!(fv.status, VerdictStatus::Corrected);
        assert!(!fv.verdict.is_anomaly);
        assert_eq!(fv.retries_used, 1);
    }

    #[test]
    fn scan_finds_the_planted_type_and_nothing_on_benign_cases() {
        let ruleset = Ruleset::default();
        let config = PatternConfig::default();
        assert_eq!(
            scan_types(&mine_case(), &ruleset, &config).unwrap(),
            Some(AnomalyType::Mine)
        );
        assert_eq!(scan_types(&benign_case(), &ruleset, &config).unwrap(), None);
    }
}
