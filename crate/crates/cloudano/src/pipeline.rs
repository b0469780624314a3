//! Full per-case pipeline: metric screen, log assessment gated on a
//! positive screen, final decision, then symbolic verification with the
//! critic loop.

use crate::agents::AgentContext;
use crate::error::Result;
use crate::model::{CaseRecord, FinalVerdict, LogAssessment};
use crate::verifier::{verify_and_critic, DEFAULT_MAX_RETRIES};

pub struct Pipeline<'a> {
    pub ctx: AgentContext<'a>,
    pub verifier_enabled: bool,
    pub max_retries: u32,
}

impl<'a> Pipeline<'a> {
    pub fn new(ctx: AgentContext<'a>) -> Self {
        Pipeline {
            ctx,
            verifier_enabled: true,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    pub fn without_verifier(ctx: AgentContext<'a>) -> Self {
        Pipeline {
            ctx,
            verifier_enabled: false,
            max_retries: 0,
        }
    }

    /// Runs the whole pipeline on one case. The log agent only runs when
    /// the metric screen raises a hypothesis; quiet windows cost a single
    /// backend call.
    pub fn run_case(&self, case: &CaseRecord) -> Result<FinalVerdict> {
        case.validate()?;
        let hypothesis = self.ctx.detect_metrics(&case.metrics);
        let assessment = if hypothesis.anomaly_detected {
            self.ctx.assess_logs(&hypothesis, &case.logs)
        } else {
            LogAssessment::benign("log agent not invoked: metric screen negative")
        };
        let verdict = self.ctx.decide(&hypothesis, &assessment);
        if !self.verifier_enabled {
            return Ok(FinalVerdict::unverified(verdict));
        }
        verify_and_critic(
            &verdict,
            case,
            self.ctx.ruleset,
            &self.ctx.pattern_config,
            &self.ctx,
            self.max_retries,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mock::{ConstantBackend, CountingBackend, OracleBackend};
    use crate::model::{
        AnomalyType, CaseLabel, Difficulty, LogEntry, MetricName, MetricSeries, VerdictStatus,
    };
    use crate::prompt::{PromptTemplates, Schema};
    use crate::verifier::Ruleset;

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

    fn deceptive_normal_case() -> CaseRecord {
        CaseRecord {
            id: "normal-1".to_string(),
            label: CaseLabel::normal(Difficulty::Easy, "apt-upgrade-burst"),
            metrics: vec![
                MetricSeries::new(MetricName::Cpu, 5, step(10.0, 80.0, 20, 12)),
                MetricSeries::new(MetricName::Memory, 5, vec![40.0; 20]),
            ],
            logs: vec![
                LogEntry::new(5, "apt-daily.service: starting unattended upgrade"),
                LogEntry::new(70, "dpkg: unpacking linux-headers"),
            ],
        }
    }

    fn quiet_case() -> CaseRecord {
        CaseRecord {
            id: "quiet-1".to_string(),
            label: CaseLabel::normal(Difficulty::Easy, "steady-state"),
            metrics: vec![
                MetricSeries::new(MetricName::Cpu, 5, vec![22.0; 20]),
                MetricSeries::new(MetricName::Memory, 5, vec![41.0; 20]),
            ],
            logs: vec![LogEntry::new(30, "systemd: session opened for user deploy")],
        }
    }

    #[test]
    fn anomaly_case_resolves_to_an_accepted_typed_verdict() {
        let backend = OracleBackend::default();
        let templates = PromptTemplates::default();
        let ruleset = Ruleset::default();
        let pipeline = Pipeline::new(AgentContext::new(&backend, &templates, &ruleset));
        let fv = pipeline.run_case(&mine_case()).unwrap();
        assert_eq!(fv.status, VerdictStatus::Accepted);
        assert_eq!(fv.verdict.anomaly_type, Some(AnomalyType::Mine));
        assert_eq!(fv.retries_used, 0);
    }

    #[test]
    fn deceptive_normal_case_resolves_to_normal() {
        let backend = OracleBackend::default();
        let templates = PromptTemplates::default();
        let ruleset = Ruleset::default();
        let pipeline = Pipeline::new(AgentContext::new(&backend, &templates, &ruleset));
        let fv = pipeline.run_case(&deceptive_normal_case()).unwrap();
        assert_eq!(fv.status, VerdictStatus::Accepted);
        assert!(!fv.verdict.is_anomaly);
    }

    #[test]
    fn quiet_window_skips_the_log_and_decision_calls() {
        let backend = CountingBackend::new(OracleBackend::default());
        let templates = PromptTemplates::default();
        let ruleset = Ruleset::default();
        let pipeline = Pipeline::new(AgentContext::new(&backend, &templates, &ruleset));
        let fv = pipeline.run_case(&quiet_case()).unwrap();
        assert!(!fv.verdict.is_anomaly);
        assert_eq!(backend.count(Schema::Hypothesis), 1);
        assert_eq!(backend.count(Schema::Assessment), 0);
        assert_eq!(backend.count(Schema::Verdict), 0);
    }

    #[test]
    fn anomalous_window_runs_all_three_stages_once() {
        let backend = CountingBackend::new(OracleBackend::default());
        let templates = PromptTemplates::default();
        let ruleset = Ruleset::default();
        let pipeline = Pipeline::new(AgentContext::new(&backend, &templates, &ruleset));
        pipeline.run_case(&mine_case()).unwrap();
        assert_eq!(backend.count(Schema::Hypothesis), 1);
        assert_eq!(backend.count(Schema::Assessment), 1);
        assert_eq!(backend.count(Schema::Verdict), 1);
    }

    #[test]
    fn disabled_verifier_returns_the_raw_decision() {
        let backend = ConstantBackend::new(
            "is_anomaly: true\nanomaly_type: oom\nexplanation: always the same answer",
        );
        let templates = PromptTemplates::default();
        let ruleset = Ruleset::default();
        let pipeline =
            Pipeline::without_verifier(AgentContext::new(&backend, &templates, &ruleset));
        let fv = pipeline.run_case(&mine_case()).unwrap();
        assert_eq!(fv.verdict.anomaly_type, Some(AnomalyType::Oom));
        assert_eq!(fv.retries_used, 0);
        assert!(fv.failed_checks.is_empty());
    }

    #[test]
    fn stubborn_decision_exhausts_retries_and_abstains() {
        let backend = ConstantBackend::new(
            "is_anomaly: true\nanomaly_type: oom\nexplanation: always the same answer",
        );
        let templates = PromptTemplates::default();
        let ruleset = Ruleset::default();
        let pipeline = Pipeline::new(AgentContext::new(&backend, &templates, &ruleset));
        let fv = pipeline.run_case(&mine_case()).unwrap();
        assert_eq!(fv.status, VerdictStatus::Abstained);
        assert_eq!(fv.retries_used, pipeline.max_retries);
        assert!(!fv.failed_checks.is_empty());
    }
}
