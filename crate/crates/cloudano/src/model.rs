//! Core domain types: telemetry series, log lines, labeled cases, and the
//! verdict types the detection pipeline produces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Telemetry channels a case may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Cpu,
    Gpu,
    Memory,
    DiskIo,
    NetIn,
    NetOut,
}

impl MetricName {
    pub const ALL: [MetricName; 6] = [
        MetricName::Cpu,
        MetricName::Gpu,
        MetricName::Memory,
        MetricName::DiskIo,
        MetricName::NetIn,
        MetricName::NetOut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Cpu => "cpu",
            MetricName::Gpu => "gpu",
            MetricName::Memory => "memory",
            MetricName::DiskIo => "disk_io",
            MetricName::NetIn => "net_in",
            MetricName::NetOut => "net_out",
        }
    }

    /// The unit this channel is sampled in.
    pub fn unit(self) -> Unit {
        match self {
            MetricName::Cpu | MetricName::Gpu | MetricName::Memory => Unit::Percent,
            MetricName::DiskIo | MetricName::NetIn | MetricName::NetOut => Unit::MbPerSec,
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::schema("metric name", format!("unknown metric {s:?}")))
    }
}

/// Unit of measure for a metric series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "percent")]
    Percent,
    #[serde(rename = "MB/s")]
    MbPerSec,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Percent => "percent",
            Unit::MbPerSec => "MB/s",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shapes the pattern classifier can assign to a metric window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternType {
    Spike,
    Dip,
    GradualIncrease,
    GradualDecrease,
    Fluctuation,
}

impl PatternType {
    pub const ALL: [PatternType; 5] = [
        PatternType::Spike,
        PatternType::Dip,
        PatternType::GradualIncrease,
        PatternType::GradualDecrease,
        PatternType::Fluctuation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternType::Spike => "spike",
            PatternType::Dip => "dip",
            PatternType::GradualIncrease => "gradual_increase",
            PatternType::GradualDecrease => "gradual_decrease",
            PatternType::Fluctuation => "fluctuation",
        }
    }

    /// The mirrored shape: spikes negate to dips, rises to falls.
    /// Fluctuation is its own mirror image.
    pub fn negated(self) -> PatternType {
        match self {
            PatternType::Spike => PatternType::Dip,
            PatternType::Dip => PatternType::Spike,
            PatternType::GradualIncrease => PatternType::GradualDecrease,
            PatternType::GradualDecrease => PatternType::GradualIncrease,
            PatternType::Fluctuation => PatternType::Fluctuation,
        }
    }
}

impl fmt::Display for PatternType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PatternType::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::schema("pattern type", format!("unknown pattern {s:?}")))
    }
}

/// The ten anomaly classes the pipeline can name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyType {
    Mine,
    Oom,
    GpuHijack,
    PortScan,
    IcmpFloodDos,
    DnsAmplification,
    DataExfiltration,
    ArpSpoofing,
    LogStorm,
    LogGrowthAnomaly,
}

impl AnomalyType {
    pub const ALL: [AnomalyType; 10] = [
        AnomalyType::Mine,
        AnomalyType::Oom,
        AnomalyType::GpuHijack,
        AnomalyType::PortScan,
        AnomalyType::IcmpFloodDos,
        AnomalyType::DnsAmplification,
        AnomalyType::DataExfiltration,
        AnomalyType::ArpSpoofing,
        AnomalyType::LogStorm,
        AnomalyType::LogGrowthAnomaly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyType::Mine => "mine",
            AnomalyType::Oom => "oom",
            AnomalyType::GpuHijack => "gpu_hijack",
            AnomalyType::PortScan => "port_scan",
            AnomalyType::IcmpFloodDos => "icmp_flood_dos",
            AnomalyType::DnsAmplification => "dns_amplification",
            AnomalyType::DataExfiltration => "data_exfiltration",
            AnomalyType::ArpSpoofing => "arp_spoofing",
            AnomalyType::LogStorm => "log_storm",
            AnomalyType::LogGrowthAnomaly => "log_growth_anomaly",
        }
    }
}

impl fmt::Display for AnomalyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnomalyType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::schema("anomaly type", format!("unknown anomaly type {s:?}")))
    }
}

/// How hard a benchmark case is meant to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Difficult,
}

impl Difficulty {
    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Difficult => "difficult",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sampled telemetry channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: MetricName,
    pub unit: Unit,
    pub interval_seconds: u64,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(name: MetricName, interval_seconds: u64, values: Vec<f64>) -> Self {
        MetricSeries {
            name,
            unit: name.unit(),
            interval_seconds,
            values,
        }
    }

    /// Seconds between the first and last sample.
    pub fn span_seconds(&self) -> u64 {
        (self.values.len() as u64).saturating_sub(1) * self.interval_seconds
    }

    /// Checks sample domain and sampling parameters. `field` names this
    /// series in error messages, e.g. `metrics[2]`.
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.interval_seconds == 0 {
            return Err(Error::schema(
                format!("{field}.interval_seconds"),
                "sampling interval must be at least 1 second",
            ));
        }
        if self.values.is_empty() {
            return Err(Error::schema(
                format!("{field}.values"),
                "series must contain at least one sample",
            ));
        }
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::schema(
                    format!("{field}.values[{i}]"),
                    format!("sample {v} is not finite"),
                ));
            }
            if *v < 0.0 {
                return Err(Error::schema(
                    format!("{field}.values[{i}]"),
                    format!("sample {v} is negative"),
                ));
            }
            if self.unit == Unit::Percent && *v > 100.0 {
                return Err(Error::schema(
                    format!("{field}.values[{i}]"),
                    format!("sample {v} exceeds 100 percent"),
                ));
            }
        }
        Ok(())
    }
}

/// One log line, timestamped as an offset in seconds from the start of the
/// case's observation window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub timestamp: u64,
    pub text: String,
}

impl LogEntry {
    pub fn new(timestamp: u64, text: impl Into<String>) -> Self {
        LogEntry {
            timestamp,
            text: text.into(),
        }
    }
}

/// Ground-truth label attached to a benchmark case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub is_anomaly: bool,
    pub anomaly_type: Option<AnomalyType>,
    pub difficulty: Difficulty,
    /// Short human-readable scenario slug, e.g. `covert-miner` or
    /// `apt-upgrade-burst`.
    pub scenario: String,
}

impl CaseLabel {
    pub fn anomaly(anomaly_type: AnomalyType, difficulty: Difficulty, scenario: &str) -> Self {
        CaseLabel {
            is_anomaly: true,
            anomaly_type: Some(anomaly_type),
            difficulty,
            scenario: scenario.to_string(),
        }
    }

    pub fn normal(difficulty: Difficulty, scenario: &str) -> Self {
        CaseLabel {
            is_anomaly: false,
            anomaly_type: None,
            difficulty,
            scenario: scenario.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_anomaly != self.anomaly_type.is_some() {
            return Err(Error::invariant(
                "label",
                format!(
                    "is_anomaly is {} but anomaly_type is {}",
                    self.is_anomaly,
                    match self.anomaly_type {
                        Some(t) => t.to_string(),
                        None => "absent".to_string(),
                    }
                ),
            ));
        }
        Ok(())
    }
}

/// One labeled benchmark case: parallel metric series plus a log script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub label: CaseLabel,
    pub metrics: Vec<MetricSeries>,
    pub logs: Vec<LogEntry>,
}

impl CaseRecord {
    /// Seconds covered by the observation window.
    pub fn span_seconds(&self) -> u64 {
        self.metrics
            .first()
            .map(MetricSeries::span_seconds)
            .unwrap_or(0)
    }

    /// Looks up a series by channel name.
    pub fn metric(&self, name: MetricName) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.name == name)
    }

    /// Full structural and coherence validation.
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::schema("id", "case id must be non-empty"));
        }
        self.label.validate()?;
        if self.metrics.is_empty() {
            return Err(Error::schema(
                "metrics",
                "case must carry at least one series",
            ));
        }
        let len = self.metrics[0].values.len();
        let interval = self.metrics[0].interval_seconds;
        let mut seen = Vec::with_capacity(self.metrics.len());
        for (i, m) in self.metrics.iter().enumerate() {
            let field = format!("metrics[{i}]");
            m.validate(&field)?;
            if m.values.len() != len {
                return Err(Error::invariant(
                    &field,
                    format!(
                        "series {} has {} samples but series {} has {}",
                        m.name,
                        m.values.len(),
                        self.metrics[0].name,
                        len
                    ),
                ));
            }
            if m.interval_seconds != interval {
                return Err(Error::invariant(
                    &field,
                    format!(
                        "series {} samples every {}s but series {} every {}s",
                        m.name, m.interval_seconds, self.metrics[0].name, interval
                    ),
                ));
            }
            if seen.contains(&m.name) {
                return Err(Error::invariant(
                    &field,
                    format!("duplicate series for metric {}", m.name),
                ));
            }
            seen.push(m.name);
        }
        let span = self.span_seconds();
        let mut prev = 0u64;
        for (i, entry) in self.logs.iter().enumerate() {
            let field = format!("logs[{i}]");
            if entry.text.is_empty() {
                return Err(Error::schema(&field, "log text must be non-empty"));
            }
            if entry.text.contains('\n') {
                return Err(Error::schema(&field, "log text must be a single line"));
            }
            if entry.timestamp < prev {
                return Err(Error::invariant(
                    &field,
                    format!(
                        "timestamp {} is earlier than the preceding entry at {}",
                        entry.timestamp, prev
                    ),
                ));
            }
            if entry.timestamp > span {
                return Err(Error::invariant(
                    &field,
                    format!(
                        "timestamp {} lies outside the {span}s observation window",
                        entry.timestamp
                    ),
                ));
            }
            prev = entry.timestamp;
        }
        Ok(())
    }
}

/// Outcome of the fast metrics screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionHypothesis {
    pub anomaly_detected: bool,
    /// Channels flagged as anomalous and the shape seen on each.
    pub findings: Vec<(MetricName, PatternType)>,
    pub raw_rationale: String,
}

impl DetectionHypothesis {
    /// Builds a hypothesis whose flag is coherent with its findings.
    pub fn from_findings(
        findings: Vec<(MetricName, PatternType)>,
        raw_rationale: impl Into<String>,
    ) -> Self {
        DetectionHypothesis {
            anomaly_detected: !findings.is_empty(),
            findings,
            raw_rationale: raw_rationale.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.anomaly_detected != !self.findings.is_empty() {
            return Err(Error::invariant(
                "hypothesis",
                "anomaly_detected must hold exactly when findings are present",
            ));
        }
        Ok(())
    }
}

/// How strongly the log agent believes the logs explain a genuine anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Possibility {
    Low,
    Medium,
    High,
}

impl Possibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Possibility::Low => "low",
            Possibility::Medium => "medium",
            Possibility::High => "high",
        }
    }
}

impl fmt::Display for Possibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Possibility {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Possibility::Low),
            "medium" => Ok(Possibility::Medium),
            "high" => Ok(Possibility::High),
            other => Err(Error::schema(
                "possibility",
                format!("unknown possibility {other:?}"),
            )),
        }
    }
}

/// Outcome of the slow log analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogAssessment {
    pub possibility: Possibility,
    /// Verbatim log lines cited as supporting evidence.
    pub evidence: Vec<String>,
    pub candidate_type: Option<AnomalyType>,
    pub raw_rationale: String,
}

impl LogAssessment {
    pub fn benign(raw_rationale: impl Into<String>) -> Self {
        LogAssessment {
            possibility: Possibility::Low,
            evidence: Vec::new(),
            candidate_type: None,
            raw_rationale: raw_rationale.into(),
        }
    }
}

/// A typed detection decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub is_anomaly: bool,
    pub anomaly_type: Option<AnomalyType>,
    pub explanation: String,
}

impl Verdict {
    pub fn anomaly(anomaly_type: AnomalyType, explanation: impl Into<String>) -> Self {
        Verdict {
            is_anomaly: true,
            anomaly_type: Some(anomaly_type),
            explanation: explanation.into(),
        }
    }

    pub fn normal(explanation: impl Into<String>) -> Self {
        Verdict {
            is_anomaly: false,
            anomaly_type: None,
            explanation: explanation.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_anomaly != self.anomaly_type.is_some() {
            return Err(Error::invariant(
                "verdict",
                "is_anomaly must hold exactly when anomaly_type is present",
            ));
        }
        Ok(())
    }

    /// True when two verdicts agree on both the flag and the type.
    pub fn same_decision(&self, other: &Verdict) -> bool {
        self.is_anomaly == other.is_anomaly && self.anomaly_type == other.anomaly_type
    }
}

/// How the verifier resolved a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    /// The initial verdict passed verification unchanged.
    Accepted,
    /// A retest changed the decision and the new verdict passed.
    Corrected,
    /// Retries ran out with checks still failing.
    Abstained,
}

impl VerdictStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictStatus::Accepted => "accepted",
            VerdictStatus::Corrected => "corrected",
            VerdictStatus::Abstained => "abstained",
        }
    }
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A verdict together with the verifier's resolution of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalVerdict {
    pub verdict: Verdict,
    pub status: VerdictStatus,
    pub retries_used: u32,
    /// Human-readable descriptions of the checks still failing at the end.
    /// Empty unless the verifier abstained.
    pub failed_checks: Vec<String>,
}

impl FinalVerdict {
    /// Wraps a verdict that was never sent through the verifier.
    pub fn unverified(verdict: Verdict) -> Self {
        FinalVerdict {
            verdict,
            status: VerdictStatus::Accepted,
            retries_used: 0,
            failed_checks: Vec::new(),
        }
    }
}

/// Parses a case document from JSON and validates it.
pub fn parse_case(json: &str) -> Result<CaseRecord> {
    let case: CaseRecord =
        serde_json::from_str(json).map_err(|e| Error::schema("case document", e.to_string()))?;
    case.validate()?;
    Ok(case)
}

/// Serializes a validated case as pretty-printed JSON with a trailing newline.
pub fn serialize_case(case: &CaseRecord) -> Result<String> {
    case.validate()?;
    let mut out = serde_json::to_string_pretty(case).map_err(|e| Error::json(&case.id, e))?;
    out.push('\n');
    Ok(out)
}
