//! Offline backends: a deterministic oracle that answers from the symbolic
//! ruleset, a fault-injection wrapper that corrupts decisions at a fixed
//! rate, and small fixed-behavior mocks for robustness tests.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::backend::{Backend, BackendError};
use crate::metrics::{classify_values, PatternConfig, MIN_CLASSIFY_LEN};
use crate::model::{AnomalyType, LogEntry, MetricName, PatternType};
use crate::prompt::{
    parse_log_lines, parse_metric_lines, parse_pattern_line, parse_prompt_field,
    parse_verdict_reply, AgentPrompt, Schema, RETEST_MARKER,
};
use crate::verifier::{verify_log, Ruleset};

/// Deterministic mock that computes every answer by parsing the prompt and
/// applying the same statistical classifier and log signatures the verifier
/// uses. It never sees case labels, so it exercises the real inference
/// paths while staying exactly reproducible.
#[derive(Default)]
pub struct OracleBackend {
    ruleset: Ruleset,
    config: PatternConfig,
}

impl OracleBackend {
    pub fn new(ruleset: Ruleset, config: PatternConfig) -> Self {
        OracleBackend { ruleset, config }
    }

    fn answer_hypothesis(&self, user_text: &str) -> String {
        let mut findings: Vec<(MetricName, PatternType)> = Vec::new();
        let series = parse_metric_lines(user_text);
        let count = series.len();
        for (name, values) in series {
            if values.len() < MIN_CLASSIFY_LEN {
                continue;
            }
            if let Some(pattern) = classify_values(&values, &self.config) {
                findings.push((name, pattern));
            }
        }
        let findings_text = findings
            .iter()
            .map(|(m, p)| format!("{m}={p}"))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "anomaly_detected: {}\nfindings: {}\nrationale: statistical screen over {count} series\n",
            !findings.is_empty(),
            findings_text
        )
    }

    fn first_log_match(&self, logs: &[LogEntry]) -> Option<(AnomalyType, Vec<String>)> {
        for t in AnomalyType::ALL {
            if let Ok(result) = verify_log(logs, t, &self.ruleset) {
                if result.passed {
                    return Some((t, result.matched_evidence));
                }
            }
        }
        None
    }

    fn answer_assessment(&self, user_text: &str) -> String {
        let logs = parse_log_lines(user_text);
        match self.first_log_match(&logs) {
            Some((t, evidence)) => {
                let mut out = format!("possibility: high\ncandidate_type: {t}\nevidence:\n");
                for line in evidence {
                    out.push_str(&format!("- {line}\n"));
                }
                out.push_str(&format!("rationale: log signature for {t} fully matches\n"));
                out
            }
            None => "possibility: low\ncandidate_type: none\nevidence:\nrationale: no anomaly signature matches the logs\n"
                .to_string(),
        }
    }

    fn answer_retest(&self, user_text: &str) -> String {
        let logs = parse_log_lines(user_text);
        let patterns = parse_pattern_line(user_text);
        for t in AnomalyType::ALL {
            let log_ok = verify_log(&logs, t, &self.ruleset)
                .map(|r| r.passed)
                .unwrap_or(false);
            if !log_ok {
                continue;
            }
            let metrics_ok = if patterns.is_empty() {
                true
            } else {
                self.ruleset.get(t).is_ok_and(|spec| {
                    spec.metric_predicates.iter().all(|pred| {
                        patterns
                            .iter()
                            .any(|(m, p)| *m == pred.metric && *p == Some(pred.required_pattern))
                    })
                })
            };
            if metrics_ok {
                return format!(
                    "is_anomaly: true\nanomaly_type: {t}\nexplanation: metric pattern and log signature for {t} both hold on retest\n"
                );
            }
        }
        "is_anomaly: false\nanomaly_type: none\nexplanation: no anomaly type passes both checks on retest\n"
            .to_string()
    }

    fn answer_decision(&self, user_text: &str) -> String {
        let possibility = parse_prompt_field(user_text, "Possibility").unwrap_or("low");
        let candidate = parse_prompt_field(user_text, "Candidate type").unwrap_or("none");
        if possibility.eq_ignore_ascii_case("high") {
            if let Ok(t) = candidate.parse::<AnomalyType>() {
                return format!(
                    "is_anomaly: true\nanomaly_type: {t}\nexplanation: metric findings corroborated by {t} log evidence\n"
                );
            }
        }
        "is_anomaly: false\nanomaly_type: none\nexplanation: logs offer a benign explanation for the metric pattern\n"
            .to_string()
    }

    fn answer_rewrite(user_text: &str) -> String {
        let logs = parse_log_lines(user_text);
        let mut out = String::new();
        for entry in logs {
            out.push_str(&format!("[{}] {}\n", entry.timestamp, entry.text));
        }
        out
    }
}

impl Backend for OracleBackend {
    fn complete(&self, prompt: &AgentPrompt) -> Result<String, BackendError> {
        Ok(match prompt.expected_schema {
            Schema::Hypothesis => self.answer_hypothesis(&prompt.user_text),
            Schema::Assessment => self.answer_assessment(&prompt.user_text),
            Schema::Verdict => {
                if prompt.user_text.contains(RETEST_MARKER) {
                    self.answer_retest(&prompt.user_text)
                } else {
                    self.answer_decision(&prompt.user_text)
                }
            }
            Schema::Rewrite => Self::answer_rewrite(&prompt.user_text),
        })
    }

    fn name(&self) -> &str {
        "mock"
    }
}

fn fnv1a(text: &str, seed: u64) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for byte in text.bytes().chain(seed.to_le_bytes()) {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Wraps a backend and corrupts a deterministic fraction of its decision
/// replies (verdict schema only), keyed by a hash of the prompt text and a
/// seed. A corrupted reply is a well-formed anomaly verdict with a wrong
/// type, so it models a confidently mistaken decision-maker rather than a
/// crashed one.
pub struct NoisyBackend<B: Backend> {
    inner: B,
    rate: f64,
    seed: u64,
}

impl<B: Backend> NoisyBackend<B> {
    pub fn new(inner: B, rate: f64, seed: u64) -> Self {
        NoisyBackend { inner, rate, seed }
    }
}

impl<B: Backend> Backend for NoisyBackend<B> {
    fn complete(&self, prompt: &AgentPrompt) -> Result<String, BackendError> {
        let raw = self.inner.complete(prompt)?;
        if prompt.expected_schema != Schema::Verdict {
            return Ok(raw);
        }
        let hash = fnv1a(&prompt.user_text, self.seed);
        let roll = (hash >> 11) as f64 / (1u64 << 53) as f64;
        if roll >= self.rate {
            return Ok(raw);
        }
        let Ok(verdict) = parse_verdict_reply(&raw) else {
            return Ok(raw);
        };
        let mut index = (hash % AnomalyType::ALL.len() as u64) as usize;
        if verdict.anomaly_type == Some(AnomalyType::ALL[index]) {
            index = (index + 1) % AnomalyType::ALL.len();
        }
        let wrong = AnomalyType::ALL[index];
        Ok(format!(
            "is_anomaly: true\nanomaly_type: {wrong}\nexplanation: the evidence points at {wrong} activity\n"
        ))
    }

    fn name(&self) -> &str {
        "noisy-mock"
    }
}

/// Always returns the same reply.
pub struct ConstantBackend {
    reply: String,
}

impl ConstantBackend {
    pub fn new(reply: impl Into<String>) -> Self {
        ConstantBackend {
            reply: reply.into(),
        }
    }
}

impl Backend for ConstantBackend {
    fn complete(&self, _prompt: &AgentPrompt) -> Result<String, BackendError> {
        Ok(self.reply.clone())
    }

    fn name(&self) -> &str {
        "constant-mock"
    }
}

/// Always returns unparseable prose, forcing every deterministic fallback.
pub struct GarbageBackend;

impl Backend for GarbageBackend {
    fn complete(&self, _prompt: &AgentPrompt) -> Result<String, BackendError> {
        Ok("%%%斬 completely unstructured reply ... nothing to parse here %%%".to_string())
    }

    fn name(&self) -> &str {
        "garbage-mock"
    }
}

/// Echoes the prompt's user text back, useful for rewrite no-op tests.
pub struct EchoBackend;

impl Backend for EchoBackend {
    fn complete(&self, prompt: &AgentPrompt) -> Result<String, BackendError> {
        Ok(prompt.user_text.clone())
    }

    fn name(&self) -> &str {
        "echo-mock"
    }
}

/// Pops scripted replies in order; erring once the script runs out.
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new(replies: Vec<String>) -> Self {
        ScriptedBackend {
            replies: Mutex::new(replies.into()),
        }
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, _prompt: &AgentPrompt) -> Result<String, BackendError> {
        self.replies
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| BackendError::BadResponse("script exhausted".to_string()))
    }

    fn name(&self) -> &str {
        "scripted-mock"
    }
}

fn schema_index(schema: Schema) -> usize {
    match schema {
        Schema::Hypothesis => 0,
        Schema::Assessment => 1,
        Schema::Verdict => 2,
        Schema::Rewrite => 3,
    }
}

/// Counts calls per schema while delegating to an inner backend.
pub struct CountingBackend<B: Backend> {
    inner: B,
    counts: [AtomicU64; 4],
}

impl<B: Backend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        CountingBackend {
            inner,
            counts: Default::default(),
        }
    }

    pub fn count(&self, schema: Schema) -> u64 {
        self.counts[schema_index(schema)].load(Ordering::SeqCst)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c.load(Ordering::SeqCst)).sum()
    }
}

impl<B: Backend> Backend for CountingBackend<B> {
    fn complete(&self, prompt: &AgentPrompt) -> Result<String, BackendError> {
        self.counts[schema_index(prompt.expected_schema)].fetch_add(1, Ordering::SeqCst);
        self.inner.complete(prompt)
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DetectionHypothesis, LogAssessment, MetricSeries, Possibility};
    use crate::prompt::{
        parse_assessment_reply, parse_hypothesis_reply, render_decide_prompt, render_log_prompt,
        render_metrics_prompt, render_retest_prompt, PromptTemplates,
    };

    fn spike_window() -> Vec<MetricSeries> {
        let values = (0..20).map(|i| if i < 12 { 10.0 } else { 80.0 }).collect();
        vec![
            MetricSeries::new(MetricName::Cpu, 5, values),
            MetricSeries::new(MetricName::Memory, 5, vec![40.0; 20]),
        ]
    }

    fn mine_logs() -> Vec<LogEntry> {
        vec![
            LogEntry::new(10, "sshd[4410]: Accepted publickey for deploy"),
            LogEntry::new(61, "CRON[9912]: (root) CMD (/tmp/.cache/xmrig --threads 8)"),
        ]
    }

    fn benign_logs() -> Vec<LogEntry> {
        vec![
            LogEntry::new(5, "apt-daily.service: starting unattended upgrade"),
            LogEntry::new(70, "dpkg: unpacking linux-headers"),
        ]
    }

    #[test]
    fn oracle_hypothesis_mirrors_the_classifier() {
        let oracle = OracleBackend::default();
        let templates = PromptTemplates::default();
        let prompt = render_metrics_prompt(&templates, &spike_window());
        let raw = oracle.complete(&prompt).unwrap();
        let hypothesis = parse_hypothesis_reply(&raw).unwrap();
        assert!(hypothesis.anomaly_detected);
        assert_eq!(
            hypothesis.findings,
            vec![(MetricName::Cpu, PatternType::Spike)]
        );

        let calm = vec![MetricSeries::new(MetricName::Cpu, 5, vec![30.0; 20])];
        let raw = oracle
            .complete(&render_metrics_prompt(&templates, &calm))
            .unwrap();
        assert!(!parse_hypothesis_reply(&raw).unwrap().anomaly_detected);
    }

    #[test]
    fn oracle_assessment_applies_the_log_signatures() {
        let oracle = OracleBackend::default();
        let templates = PromptTemplates::default();
        let hypothesis = DetectionHypothesis::from_findings(
            vec![(MetricName::Cpu, PatternType::Spike)],
            "spike",
        );

        let prompt = render_log_prompt(&templates, &hypothesis, &mine_logs());
        let raw = oracle.complete(&prompt).unwrap();
        let assessment = parse_assessment_reply(&raw, &mine_logs()).unwrap();
        assert_eq!(assessment.possibility, Possibility::High);
        assert_eq!(assessment.candidate_type, Some(AnomalyType::Mine));
        assert!(!assessment.evidence.is_empty());

        let prompt = render_log_prompt(&templates, &hypothesis, &benign_logs());
        let raw = oracle.complete(&prompt).unwrap();
        let assessment = parse_assessment_reply(&raw, &benign_logs()).unwrap();
        assert_eq!(assessment.possibility, Possibility::Low);
        assert_eq!(assessment.candidate_type, None);
    }

    #[test]
    fn oracle_decision_follows_the_assessment() {
        let oracle = OracleBackend::default();
        let templates = PromptTemplates::default();
        let hypothesis = DetectionHypothesis::from_findings(
            vec![(MetricName::Cpu, PatternType::Spike)],
            "spike",
        );
        let high = LogAssessment {
            possibility: Possibility::High,
            evidence: vec!["CRON[9912]: (root) CMD (/tmp/.cache/xmrig --threads 8)".to_string()],
            candidate_type: Some(AnomalyType::Mine),
            raw_rationale: "miner".to_string(),
        };
        let raw = oracle
            .complete(&render_decide_prompt(&templates, &hypothesis, &high))
            .unwrap();
        let verdict = parse_verdict_reply(&raw).unwrap();
        assert_eq!(verdict.anomaly_type, Some(AnomalyType::Mine));

        let low = LogAssessment::benign("explained by maintenance");
        let raw = oracle
            .complete(&render_decide_prompt(&templates, &hypothesis, &low))
            .unwrap();
        assert!(!parse_verdict_reply(&raw).unwrap().is_anomaly);
    }

    #[test]
    fn oracle_retest_rescans_both_modalities() {
        let oracle = OracleBackend::default();
        let templates = PromptTemplates::default();
        let previous = crate::model::Verdict::anomaly(AnomalyType::Oom, "wrong");
        let prompt = render_retest_prompt(
            &templates,
            &previous,
            &["metric memory: expected pattern gradual_increase, observed none".to_string()],
            None,
            &[
                (MetricName::Cpu, Some(PatternType::Spike)),
                (MetricName::Memory, None),
            ],
            &mine_logs(),
        );
        let raw = oracle.complete(&prompt).unwrap();
        let verdict = parse_verdict_reply(&raw).unwrap();
        assert_eq!(verdict.anomaly_type, Some(AnomalyType::Mine));

        let prompt = render_retest_prompt(
            &templates,
            &previous,
            &["log: no line matches /xmrig/".to_string()],
            None,
            &[(MetricName::Cpu, Some(PatternType::Spike))],
            &benign_logs(),
        );
        let raw = oracle.complete(&prompt).unwrap();
        assert!(!parse_verdict_reply(&raw).unwrap().is_anomaly);
    }

    #[test]
    fn noisy_backend_is_deterministic_and_schema_scoped() {
        let templates = PromptTemplates::default();
        let hypothesis = DetectionHypothesis::from_findings(
            vec![(MetricName::Cpu, PatternType::Spike)],
            "spike",
        );
        let assessment = LogAssessment::benign("benign");
        let decide_prompt = render_decide_prompt(&templates, &hypothesis, &assessment);

        let noisy = NoisyBackend::new(OracleBackend::default(), 1.0, 7);
        let a = noisy.complete(&decide_prompt).unwrap();
        let b = noisy.complete(&decide_prompt).unwrap();
        assert_eq!(a, b);
        let verdict = parse_verdict_reply(&a).unwrap();
        assert!(verdict.is_anomaly, "full corruption must flip the decision");

        let log_prompt = render_log_prompt(&templates, &hypothesis, &benign_logs());
        let clean = OracleBackend::default().complete(&log_prompt).unwrap();
        assert_eq!(noisy.complete(&log_prompt).unwrap(), clean);

        let quiet = NoisyBackend::new(OracleBackend::default(), 0.0, 7);
        let clean_decide = OracleBackend::default().complete(&decide_prompt).unwrap();
        assert_eq!(quiet.complete(&decide_prompt).unwrap(), clean_decide);
    }

    #[test]
    fn corrupted_type_differs_from_the_clean_one() {
        let templates = PromptTemplates::default();
        let hypothesis = DetectionHypothesis::from_findings(
            vec![(MetricName::Cpu, PatternType::Spike)],
            "spike",
        );
        let high = LogAssessment {
            possibility: Possibility::High,
            evidence: vec![],
            candidate_type: Some(AnomalyType::Mine),
            raw_rationale: String::new(),
        };
        let prompt = render_decide_prompt(&templates, &hypothesis, &high);
        let noisy = NoisyBackend::new(OracleBackend::default(), 1.0, 3);
        let verdict = parse_verdict_reply(&noisy.complete(&prompt).unwrap()).unwrap();
        assert!(verdict.is_anomaly);
        assert_ne!(verdict.anomaly_type, Some(AnomalyType::Mine));
    }

    #[test]
    fn counting_backend_tracks_calls_per_schema() {
        let counting = CountingBackend::new(OracleBackend::default());
        let templates = PromptTemplates::default();
        let prompt = render_metrics_prompt(&templates, &spike_window());
        counting.complete(&prompt).unwrap();
        counting.complete(&prompt).unwrap();
        assert_eq!(counting.count(Schema::Hypothesis), 2);
        assert_eq!(counting.count(Schema::Assessment), 0);
        assert_eq!(counting.total(), 2);
    }

    #[test]
    fn scripted_backend_pops_then_errs() {
        let scripted = ScriptedBackend::new(vec!["one".to_string(), "two".to_string()]);
        let prompt = AgentPrompt {
            system_text: String::new(),
            user_text: String::new(),
            expected_schema: Schema::Verdict,
        };
        assert_eq!(scripted.complete(&prompt).unwrap(), "one");
        assert_eq!(scripted.complete(&prompt).unwrap(), "two");
        assert!(scripted.complete(&prompt).is_err());
    }
}
