//! The metric screening agent, the log assessment agent, and the final
//! decision-maker. Each asks the backend once, re-asks once with a repair
//! instruction when the reply does not parse, and then falls back to a
//! deterministic symbolic answer, so a flaky backend degrades the pipeline
//! instead of stopping it.

use crate::backend::Backend;
use crate::error::Result;
use crate::metrics::{classify_pattern, PatternConfig, MIN_CLASSIFY_LEN};
use crate::model::{
    AnomalyType, CaseRecord, DetectionHypothesis, LogAssessment, LogEntry, MetricName,
    MetricSeries, PatternType, Possibility, Verdict,
};
use crate::prompt::{
    parse_assessment_reply, parse_hypothesis_reply, parse_verdict_reply, render_decide_prompt,
    render_log_prompt, render_metrics_prompt, render_retest_prompt, with_repair_instruction,
    AgentPrompt, PromptTemplates,
};
use crate::verifier::{scan_types, verify_log, Retester, Ruleset};

/// Shared state the three agents need: a backend, the prompt templates,
/// and the symbolic ruleset backing the fallbacks.
pub struct AgentContext<'a> {
    pub backend: &'a dyn Backend,
    pub templates: &'a PromptTemplates,
    pub ruleset: &'a Ruleset,
    pub pattern_config: PatternConfig,
}

impl<'a> AgentContext<'a> {
    pub fn new(
        backend: &'a dyn Backend,
        templates: &'a PromptTemplates,
        ruleset: &'a Ruleset,
    ) -> Self {
        AgentContext {
            backend,
            templates,
            ruleset,
            pattern_config: PatternConfig::default(),
        }
    }

    fn ask<T>(&self, prompt: &AgentPrompt, parse: impl Fn(&str) -> Result<T>) -> Option<T> {
        let raw = self.backend.complete(prompt).ok()?;
        if let Ok(value) = parse(&raw) {
            return Some(value);
        }
        let raw = self
            .backend
            .complete(&with_repair_instruction(prompt))
            .ok()?;
        parse(&raw).ok()
    }

    fn classify_window(&self, window: &[MetricSeries]) -> Vec<(MetricName, PatternType)> {
        let mut findings = Vec::new();
        for series in window {
            if series.values.len() < MIN_CLASSIFY_LEN {
                continue;
            }
            if let Ok(Some(pattern)) = classify_pattern(series, &self.pattern_config) {
                findings.push((series.name, pattern));
            }
        }
        findings
    }

    /// Per-metric classifier outcomes, `None` where no pattern fires.
    pub fn patterns_of(&self, window: &[MetricSeries]) -> Vec<(MetricName, Option<PatternType>)> {
        window
            .iter()
            .map(|series| {
                let pattern = if series.values.len() >= MIN_CLASSIFY_LEN {
                    classify_pattern(series, &self.pattern_config)
                        .ok()
                        .flatten()
                } else {
                    None
                };
                (series.name, pattern)
            })
            .collect()
    }

    /// Fast screening pass over the metric window.
    pub fn detect_metrics(&self, window: &[MetricSeries]) -> DetectionHypothesis {
        let prompt = render_metrics_prompt(self.templates, window);
        if let Some(hypothesis) = self.ask(&prompt, parse_hypothesis_reply) {
            return hypothesis;
        }
        DetectionHypothesis::from_findings(
            self.classify_window(window),
            "fallback: statistical pattern classifier",
        )
    }

    /// Deep log pass, run only after the metric screen raises a hypothesis.
    pub fn assess_logs(
        &self,
        hypothesis: &DetectionHypothesis,
        logs: &[LogEntry],
    ) -> LogAssessment {
        let prompt = render_log_prompt(self.templates, hypothesis, logs);
        if let Some(assessment) = self.ask(&prompt, |raw| parse_assessment_reply(raw, logs)) {
            return assessment;
        }
        self.fallback_assessment(logs)
    }

    fn fallback_assessment(&self, logs: &[LogEntry]) -> LogAssessment {
        for t in AnomalyType::ALL {
            if let Ok(result) = verify_log(logs, t, self.ruleset) {
                if result.passed {
                    return LogAssessment {
                        possibility: Possibility::High,
                        evidence: result.matched_evidence,
                        candidate_type: Some(t),
                        raw_rationale: format!("fallback: log signature for {t} matches"),
                    };
                }
            }
        }
        LogAssessment::benign("fallback: no log signature matches")
    }

    /// Final decision from both analyses. A negative hypothesis means there
    /// is nothing to integrate, so it resolves to normal without a backend
    /// call.
    pub fn decide(&self, hypothesis: &DetectionHypothesis, assessment: &LogAssessment) -> Verdict {
        if !hypothesis.anomaly_detected {
            return Verdict::normal("metric screen found no anomalous pattern");
        }
        let prompt = render_decide_prompt(self.templates, hypothesis, assessment);
        if let Some(verdict) = self.ask(&prompt, parse_verdict_reply) {
            return verdict;
        }
        match (assessment.possibility, assessment.candidate_type) {
            (Possibility::High, Some(t)) => Verdict::anomaly(
                t,
                format!("fallback: log evidence makes {t} highly possible"),
            ),
            _ => Verdict::normal("fallback: logs do not support an anomaly"),
        }
    }
}

/// Retests send exactly one backend call each, so the critic loop's retry
/// budget bounds the number of decision calls. An unusable reply falls back
/// to the symbolic type scan.
impl Retester for AgentContext<'_> {
    fn retest(
        &self,
        case: &CaseRecord,
        previous: &Verdict,
        failed_checks: &[String],
        suggested: Option<AnomalyType>,
    ) -> Result<Verdict> {
        let patterns = self.patterns_of(&case.metrics);
        let prompt = render_retest_prompt(
            self.templates,
            previous,
            failed_checks,
            suggested,
            &patterns,
            &case.logs,
        );
        if let Ok(raw) = self.backend.complete(&prompt) {
            if let Ok(verdict) = parse_verdict_reply(&raw) {
                return Ok(verdict);
            }
        }
        Ok(
            match scan_types(case, self.ruleset, &self.pattern_config)? {
                Some(t) => Verdict::anomaly(t, format!("fallback scan: both checks pass for {t}")),
                None => Verdict::normal("fallback scan: no type satisfies both checks"),
            },
        )
    }
}
