//! Prompt rendering and tolerant parsing of structured agent replies.
//!
//! Prompts carry case evidence as plain text blocks with stable headers so
//! deterministic mocks can parse them back. Replies are key-value lines,
//! read case-insensitively and with optional markdown fences, because real
//! models rarely follow a format to the letter.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    AnomalyType, DetectionHypothesis, LogAssessment, LogEntry, MetricName, MetricSeries,
    PatternType, Possibility, Verdict,
};

/// Structured output schema a prompt requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Schema {
    Hypothesis,
    Assessment,
    Verdict,
    Rewrite,
}

impl Schema {
    pub fn as_str(self) -> &'static str {
        match self {
            Schema::Hypothesis => "hypothesis",
            Schema::Assessment => "assessment",
            Schema::Verdict => "verdict",
            Schema::Rewrite => "rewrite",
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One fully rendered backend request.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPrompt {
    pub system_text: String,
    pub user_text: String,
    pub expected_schema: Schema,
}

/// Header introducing the log line block in a prompt.
pub const LOG_BLOCK_HEADER: &str = "Log lines:";
/// Header introducing the per-metric pattern list in a retest prompt.
pub const PATTERN_LINE_PREFIX: &str = "Metric patterns:";
/// Marker distinguishing a retest request from the initial decision request.
pub const RETEST_MARKER: &str = "Verifier found inconsistencies:";
/// Prefix of each rendered metric sample line.
pub const METRIC_LINE_PREFIX: &str = "metric ";

/// The system prompt texts, loaded from versioned plain-text assets.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub metrics_system: String,
    pub log_system: String,
    pub decide_system: String,
    pub rewrite_system: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            metrics_system: include_str!("../prompts/metrics_system.txt").to_string(),
            log_system: include_str!("../prompts/log_system.txt").to_string(),
            decide_system: include_str!("../prompts/decide_system.txt").to_string(),
            rewrite_system: include_str!("../prompts/rewrite_system.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads the four templates from `<dir>/{metrics,log,decide,rewrite}_system.txt`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::io(path, e))
        };
        Ok(PromptTemplates {
            metrics_system: read("metrics_system.txt")?,
            log_system: read("log_system.txt")?,
            decide_system: read("decide_system.txt")?,
            rewrite_system: read("rewrite_system.txt")?,
        })
    }
}

fn format_samples(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn format_findings(findings: &[(MetricName, PatternType)]) -> String {
    if findings.is_empty() {
        "none".to_string()
    } else {
        findings
            .iter()
            .map(|(m, p)| format!("{m}={p}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn log_block(logs: &[LogEntry]) -> String {
    let mut out = String::from(LOG_BLOCK_HEADER);
    out.push('\n');
    for entry in logs {
        out.push_str(&format!("[{}] {}\n", entry.timestamp, entry.text));
    }
    out
}

/// Renders the metrics agent prompt. Contains samples only, never log text.
pub fn render_metrics_prompt(templates: &PromptTemplates, window: &[MetricSeries]) -> AgentPrompt {
    let mut user = String::new();
    let interval = window.first().map(|s| s.interval_seconds).unwrap_or(0);
    user.push_str(&format!("Sampling interval: {interval} seconds\n"));
    for series in window {
        user.push_str(&format!(
            "{METRIC_LINE_PREFIX}{} ({}): {}\n",
            series.name,
            series.unit,
            format_samples(&series.values)
        ));
    }
    user.push_str("\nReport whether any metric shows an anomalous pattern.\n");
    AgentPrompt {
        system_text: templates.metrics_system.clone(),
        user_text: user,
        expected_schema: Schema::Hypothesis,
    }
}

/// Renders the log agent prompt. Carries the hypothesis findings and the
/// log lines, never numeric samples.
pub fn render_log_prompt(
    templates: &PromptTemplates,
    hypothesis: &DetectionHypothesis,
    logs: &[LogEntry],
) -> AgentPrompt {
    let mut user = String::new();
    user.push_str("Metric hypothesis: anomaly detected\n");
    user.push_str(&format!(
        "Metric findings: {}\n",
        format_findings(&hypothesis.findings)
    ));
    user.push_str(&log_block(logs));
    user.push_str("\nAssess whether these logs explain a genuine anomaly.\n");
    AgentPrompt {
        system_text: templates.log_system.clone(),
        user_text: user,
        expected_schema: Schema::Assessment,
    }
}

/// Renders the final decision prompt from both agents' outputs.
pub fn render_decide_prompt(
    templates: &PromptTemplates,
    hypothesis: &DetectionHypothesis,
    assessment: &LogAssessment,
) -> AgentPrompt {
    let mut user = String::new();
    user.push_str(&format!(
        "Metric hypothesis: {}\n",
        if hypothesis.anomaly_detected {
            "anomaly detected"
        } else {
            "no anomaly detected"
        }
    ));
    user.push_str(&format!(
        "Metric findings: {}\n",
        format_findings(&hypothesis.findings)
    ));
    user.push_str(&format!("Possibility: {}\n", assessment.possibility));
    user.push_str(&format!(
        "Candidate type: {}\n",
        match assessment.candidate_type {
            Some(t) => t.to_string(),
            None => "none".to_string(),
        }
    ));
    user.push_str("Evidence:\n");
    for line in &assessment.evidence {
        user.push_str(&format!("- {line}\n"));
    }
    user.push_str("\nIntegrate both analyses into a final verdict.\n");
    AgentPrompt {
        system_text: templates.decide_system.clone(),
        user_text: user,
        expected_schema: Schema::Verdict,
    }
}

/// Renders the retest prompt the critic loop sends after failed checks.
/// Carries the previous verdict, the failed check descriptions, the
/// classifier's per-metric patterns, and the log lines.
pub fn render_retest_prompt(
    templates: &PromptTemplates,
    previous: &Verdict,
    failed_checks: &[String],
    suggested: Option<AnomalyType>,
    patterns: &[(MetricName, Option<PatternType>)],
    logs: &[LogEntry],
) -> AgentPrompt {
    let mut user = String::new();
    user.push_str(&format!(
        "Previous verdict: {}\n",
        match previous.anomaly_type {
            Some(t) => format!("anomaly of type {t}"),
            None => "normal".to_string(),
        }
    ));
    user.push_str(RETEST_MARKER);
    user.push('\n');
    for item in failed_checks {
        user.push_str(&format!("- {item}\n"));
    }
    if let Some(t) = suggested {
        user.push_str(&format!("Suggested type from symbolic scan: {t}\n"));
    }
    let rendered: Vec<String> = patterns
        .iter()
        .map(|(m, p)| {
            format!(
                "{m}={}",
                match p {
                    Some(p) => p.as_str(),
                    None => "none",
                }
            )
        })
        .collect();
    user.push_str(&format!("{PATTERN_LINE_PREFIX} {}\n", rendered.join(", ")));
    user.push_str(&log_block(logs));
    user.push_str("\nRe-evaluate and return a corrected verdict.\n");
    AgentPrompt {
        system_text: templates.decide_system.clone(),
        user_text: user,
        expected_schema: Schema::Verdict,
    }
}

/// Renders the optional log paraphrasing prompt used during generation.
pub fn render_rewrite_prompt(templates: &PromptTemplates, logs: &[LogEntry]) -> AgentPrompt {
    let mut user = log_block(logs);
    user.push_str("\nRewrite each line.\n");
    AgentPrompt {
        system_text: templates.rewrite_system.clone(),
        user_text: user,
        expected_schema: Schema::Rewrite,
    }
}

/// Appends a repair instruction after an unparseable reply.
pub fn with_repair_instruction(prompt: &AgentPrompt) -> AgentPrompt {
    let mut repaired = prompt.clone();
    repaired.user_text.push_str(
        "\nYour previous reply could not be parsed. Reply again with exactly the required fields and nothing else.\n",
    );
    repaired
}

/// Key-value fields plus list items from a structured reply.
#[derive(Debug, Default, Clone)]
pub struct StructuredReply {
    pub fields: HashMap<String, String>,
    pub lists: HashMap<String, Vec<String>>,
}

impl StructuredReply {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    pub fn list(&self, key: &str) -> &[String] {
        self.lists.get(key).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Parses `key: value` lines and `- item` lists case-insensitively,
/// ignoring markdown fences and unrecognized prose.
pub fn parse_structured_reply(raw: &str) -> StructuredReply {
    let mut reply = StructuredReply::default();
    let mut current_key: Option<String> = None;
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("```") {
            continue;
        }
        if let Some(item) = line.strip_prefix("- ").or_else(|| line.strip_prefix("* ")) {
            if let Some(key) = &current_key {
                reply
                    .lists
                    .entry(key.clone())
                    .or_default()
                    .push(item.trim().to_string());
            }
            continue;
        }
        if let Some((key, value)) = line.split_once(':') {
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() || key.contains(' ') && key.split_whitespace().count() > 4 {
                continue;
            }
            reply.fields.insert(key.clone(), value.trim().to_string());
            current_key = Some(key);
        }
    }
    reply
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" => Ok(true),
        "false" | "no" => Ok(false),
        other => Err(Error::schema(
            "reply",
            format!("expected a boolean, got {other:?}"),
        )),
    }
}

fn parse_optional_type(value: &str) -> Result<Option<AnomalyType>> {
    let value = value.trim().trim_matches(|c| c == '`' || c == '"');
    if value.is_empty() || value.eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    value.to_ascii_lowercase().parse::<AnomalyType>().map(Some)
}

/// Parses a metrics agent reply into a hypothesis, enforcing coherence
/// between the flag and the findings.
pub fn parse_hypothesis_reply(raw: &str) -> Result<DetectionHypothesis> {
    let reply = parse_structured_reply(raw);
    let detected = parse_bool(
        reply
            .field("anomaly_detected")
            .ok_or_else(|| Error::schema("reply", "missing anomaly_detected"))?,
    )?;
    let findings_value = reply.field("findings").unwrap_or("");
    let mut findings = Vec::new();
    if !findings_value.is_empty() && !findings_value.eq_ignore_ascii_case("none") {
        for pair in findings_value.split(',') {
            let pair = pair.trim();
            if pair.is_empty() {
                continue;
            }
            let (metric, pattern) = pair
                .split_once('=')
                .ok_or_else(|| Error::schema("reply", format!("malformed finding {pair:?}")))?;
            let metric = metric.trim().to_ascii_lowercase().parse::<MetricName>()?;
            let pattern = pattern.trim().to_ascii_lowercase().parse::<PatternType>()?;
            findings.push((metric, pattern));
        }
    }
    if detected != !findings.is_empty() {
        return Err(Error::schema(
            "reply",
            "anomaly_detected flag disagrees with the findings list",
        ));
    }
    let rationale = reply.field("rationale").unwrap_or("").to_string();
    Ok(DetectionHypothesis {
        anomaly_detected: detected,
        findings,
        raw_rationale: rationale,
    })
}

/// Parses a log agent reply. Evidence lines that are not verbatim
/// substrings of any case log line are dropped.
pub fn parse_assessment_reply(raw: &str, logs: &[LogEntry]) -> Result<LogAssessment> {
    let reply = parse_structured_reply(raw);
    let possibility = reply
        .field("possibility")
        .ok_or_else(|| Error::schema("reply", "missing possibility"))?
        .trim()
        .to_ascii_lowercase()
        .parse::<Possibility>()?;
    let candidate_type = parse_optional_type(reply.field("candidate_type").unwrap_or("none"))?;
    let evidence: Vec<String> = reply
        .list("evidence")
        .iter()
        .filter(|item| logs.iter().any(|e| e.text.contains(item.as_str())))
        .cloned()
        .collect();
    Ok(LogAssessment {
        possibility,
        evidence,
        candidate_type,
        raw_rationale: reply.field("rationale").unwrap_or("").to_string(),
    })
}

/// Parses a decision reply, enforcing flag/type coherence.
pub fn parse_verdict_reply(raw: &str) -> Result<Verdict> {
    let reply = parse_structured_reply(raw);
    let is_anomaly = parse_bool(
        reply
            .field("is_anomaly")
            .ok_or_else(|| Error::schema("reply", "missing is_anomaly"))?,
    )?;
    let anomaly_type = parse_optional_type(reply.field("anomaly_type").unwrap_or("none"))?;
    if is_anomaly != anomaly_type.is_some() {
        return Err(Error::schema(
            "reply",
            "is_anomaly flag disagrees with anomaly_type",
        ));
    }
    Ok(Verdict {
        is_anomaly,
        anomaly_type,
        explanation: reply.field("explanation").unwrap_or("").to_string(),
    })
}

/// Extracts the rendered metric sample lines from a prompt:
/// `metric <name> (<unit>): v, v, v`.
pub fn parse_metric_lines(user_text: &str) -> Vec<(MetricName, Vec<f64>)> {
    let mut out = Vec::new();
    for line in user_text.lines() {
        let Some(rest) = line.strip_prefix(METRIC_LINE_PREFIX) else {
            continue;
        };
        let Some((head, samples)) = rest.split_once("): ") else {
            continue;
        };
        let Some((name, _unit)) = head.split_once(" (") else {
            continue;
        };
        let Ok(name) = name.trim().parse::<MetricName>() else {
            continue;
        };
        let values: Vec<f64> = samples
            .split(',')
            .filter_map(|v| v.trim().parse::<f64>().ok())
            .collect();
        if !values.is_empty() {
            out.push((name, values));
        }
    }
    out
}

/// Extracts the `[seconds] text` lines of the prompt's log block.
pub fn parse_log_lines(user_text: &str) -> Vec<LogEntry> {
    let mut out = Vec::new();
    let mut in_block = false;
    for line in user_text.lines() {
        if line.trim() == LOG_BLOCK_HEADER {
            in_block = true;
            continue;
        }
        if !in_block {
            continue;
        }
        let Some(rest) = line.strip_prefix('[') else {
            break;
        };
        let Some((ts, text)) = rest.split_once("] ") else {
            break;
        };
        let Ok(ts) = ts.parse::<u64>() else {
            break;
        };
        out.push(LogEntry::new(ts, text));
    }
    out
}

/// Extracts the per-metric pattern list of a retest prompt.
pub fn parse_pattern_line(user_text: &str) -> Vec<(MetricName, Option<PatternType>)> {
    let mut out = Vec::new();
    for line in user_text.lines() {
        let Some(rest) = line.strip_prefix(PATTERN_LINE_PREFIX) else {
            continue;
        };
        for pair in rest.split(',') {
            let Some((metric, pattern)) = pair.trim().split_once('=') else {
                continue;
            };
            let Ok(metric) = metric.trim().parse::<MetricName>() else {
                continue;
            };
            let pattern = pattern.trim().parse::<PatternType>().ok();
            out.push((metric, pattern));
        }
        break;
    }
    out
}

/// Reads one named field from rendered prompt text (exact key prefix match).
pub fn parse_prompt_field<'a>(user_text: &'a str, key: &str) -> Option<&'a str> {
    for line in user_text.lines() {
        if let Some(rest) = line.strip_prefix(key) {
            if let Some(value) = rest.strip_prefix(':') {
                return Some(value.trim());
            }
        }
    }
    None
}
