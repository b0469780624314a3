//! Incident reports for operators: a one-paragraph summary, the reasoning
//! steps from metric finding through log evidence to verification outcome,
//! an inferred root cause, and a prioritized remediation list drawn from a
//! per-anomaly-type playbook.
//!
//! Reports render deterministically from structured inputs. An optional
//! backend pass can rewrite the summary prose; the rewrite is kept only when
//! every quoted log line and anomaly name survives verbatim, otherwise the
//! template text stands.

use serde::{Deserialize, Serialize};

use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::metrics::PatternConfig;
use crate::model::{AnomalyType, CaseRecord, FinalVerdict, VerdictStatus};
use crate::prompt::{AgentPrompt, Schema};
use crate::verifier::{verify_log, verify_metric, Ruleset};

/// Phrase marking a report whose verdict survived without verification.
pub const UNVERIFIED_MARKER: &str = "unverified hypothesis";

const POLISH_SYSTEM: &str = "You edit incident summaries for site reliability engineers. \
Rewrite the paragraph you are given so it reads clearly and concisely. Keep every \
double-quoted log line and every anomaly or metric name exactly as written. Reply \
with the rewritten paragraph only.";

/// Ordered remediation steps for one anomaly type, most urgent first.
pub fn remediation_playbook(t: AnomalyType) -> &'static [&'static str] {
    match t {
        AnomalyType::Mine => &[
            "Kill the mining process and quarantine its binary.",
            "Remove the persistence entry from the crontab.",
            "Rotate credentials for every account active on the host.",
            "Audit how the miner got in and patch the entry point.",
        ],
        AnomalyType::Oom => &[
            "Restart the leaking service to reclaim memory before the kernel kills it.",
            "Cap the service with a memory limit so a recurrence degrades gracefully.",
            "Capture a heap profile and file the leak against the owning team.",
        ],
        AnomalyType::GpuHijack => &[
            "Kill the unauthorized GPU job and evict its container.",
            "Revoke the scheduler token or credentials that admitted it.",
            "Audit recently pulled images for embedded mining payloads.",
        ],
        AnomalyType::PortScan => &[
            "Block the scanning source address at the firewall.",
            "Review which ports the host exposes and close the unneeded ones.",
            "Enable connection rate limiting to slow follow-up sweeps.",
        ],
        AnomalyType::IcmpFloodDos => &[
            "Rate-limit ICMP echo traffic at the network edge.",
            "Engage upstream filtering or scrubbing for the attacking ranges.",
            "Verify service health and fail over if latency breached its objective.",
        ],
        AnomalyType::DnsAmplification => &[
            "Disable open recursion or restrict it to known client networks.",
            "Enable response rate limiting on the resolver.",
            "Notify the upstream provider about the spoofed query sources.",
        ],
        AnomalyType::DataExfiltration => &[
            "Cut outbound network access for the host immediately.",
            "Revoke the credentials used by the copying process.",
            "Snapshot the disk and preserve logs for forensics.",
            "Identify what data left and start breach assessment.",
        ],
        AnomalyType::ArpSpoofing => &[
            "Enable dynamic ARP inspection or port security on the switch.",
            "Pin the gateway MAC address statically on affected hosts.",
            "Locate and isolate the machine sending forged ARP replies.",
        ],
        AnomalyType::LogStorm => &[
            "Throttle or block the client hammering the service.",
            "Add rate limiting on the affected endpoint.",
            "Tighten log rotation so the burst cannot fill the disk.",
        ],
        AnomalyType::LogGrowthAnomaly => &[
            "Lower the runaway logger back to its normal level.",
            "Force a log rotation and compress the accumulated backlog.",
            "Alert on disk headroom so the next runaway is caught earlier.",
        ],
    }
}

fn root_cause_text(t: AnomalyType) -> &'static str {
    match t {
        AnomalyType::Mine => "a cryptocurrency miner is running on the host",
        AnomalyType::Oom => "a process is leaking memory toward exhaustion",
        AnomalyType::GpuHijack => "an unauthorized job is consuming the GPU",
        AnomalyType::PortScan => "an external host is sweeping ports on this machine",
        AnomalyType::IcmpFloodDos => "the host is being flooded with ICMP echo requests",
        AnomalyType::DnsAmplification => "the resolver is being abused for DNS amplification",
        AnomalyType::DataExfiltration => "data is being copied off the host in bulk",
        AnomalyType::ArpSpoofing => "a peer is forging ARP replies to intercept traffic",
        AnomalyType::LogStorm => "a client is hammering the service and flooding its logs",
        AnomalyType::LogGrowthAnomaly => "log volume is growing without bound",
    }
}

/// How verification resolved the verdict, for the report's audit section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierTrace {
    pub status: VerdictStatus,
    pub retries_used: u32,
    pub passed_checks: Vec<String>,
    pub failed_checks: Vec<String>,
}

/// Operator-facing incident report for one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub case_id: String,
    /// One-paragraph finding.
    pub summary: String,
    /// Ordered steps: metric findings, then log evidence, then the
    /// verification outcome.
    pub reasoning_chain: Vec<String>,
    /// The inferred event, or the benign explanation for normal verdicts.
    pub root_cause: String,
    /// Suggested actions, most urgent first.
    pub remediation: Vec<String>,
    pub verifier_trace: VerifierTrace,
}

impl AnomalyReport {
    /// Renders the report as aligned plain text.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "detection report for {}\nstatus: {} (retests used: {})\n",
            self.case_id, self.verifier_trace.status, self.verifier_trace.retries_used
        );
        out.push_str("\nsummary:\n");
        out.push_str(&format!("  {}\n", self.summary));
        out.push_str("\nroot cause:\n");
        out.push_str(&format!("  {}\n", self.root_cause));
        out.push_str("\nreasoning:\n");
        for (i, step) in self.reasoning_chain.iter().enumerate() {
            out.push_str(&format!("  {}. {step}\n", i + 1));
        }
        out.push_str("\nremediation:\n");
        for (i, step) in self.remediation.iter().enumerate() {
            out.push_str(&format!("  {}. {step}\n", i + 1));
        }
        out.push_str("\nverifier trace:\n");
        if self.verifier_trace.passed_checks.is_empty() {
            out.push_str("  passed: (none)\n");
        }
        for item in &self.verifier_trace.passed_checks {
            out.push_str(&format!("  passed: {item}\n"));
        }
        for item in &self.verifier_trace.failed_checks {
            out.push_str(&format!("  failed: {item}\n"));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::json("anomaly report", e))?;
        text.push('\n');
        Ok(text)
    }
}

/// Builds a report from a verified pipeline outcome. Evidence is gathered by
/// re-running the verdict type's rule checks against the case, so an accepted
/// anomaly always cites the metric findings and verbatim log lines that made
/// it pass.
pub fn render_report(
    outcome: &FinalVerdict,
    case: &CaseRecord,
    ruleset: &Ruleset,
    config: &PatternConfig,
) -> Result<AnomalyReport> {
    let verdict = &outcome.verdict;
    let mut metric_findings = Vec::new();
    let mut log_evidence = Vec::new();
    let mut passed_checks = Vec::new();
    if let Some(t) = verdict.anomaly_type {
        let metric_check = verify_metric(&case.metrics, t, ruleset, config)?;
        let log_check = verify_log(&case.logs, t, ruleset)?;
        if metric_check.passed {
            passed_checks.push(format!("metric predicates for {t}"));
        }
        if log_check.passed {
            passed_checks.push(format!("log signature for {t}"));
        }
        metric_findings = metric_check.matched_evidence;
        log_evidence = log_check.matched_evidence;
    } else if outcome.status != VerdictStatus::Abstained {
        passed_checks.push("type scan matched no rule signature".to_string());
    }

    let mut chain: Vec<String> = metric_findings.clone();
    for line in &log_evidence {
        chain.push(format!("log evidence: {line}"));
    }
    if !verdict.explanation.is_empty() {
        chain.push(format!("decision: {}", verdict.explanation));
    }
    chain.push(match outcome.status {
        VerdictStatus::Accepted => {
            "verification: verdict accepted with every check passing".to_string()
        }
        VerdictStatus::Corrected => format!(
            "verification: initial verdict corrected after {} retest(s)",
            outcome.retries_used
        ),
        VerdictStatus::Abstained => format!(
            "verification: checks still failing after {} retest(s); hypothesis unverified",
            outcome.retries_used
        ),
    });

    let (summary, root_cause, remediation) = match (outcome.status, verdict.anomaly_type) {
        (VerdictStatus::Abstained, hypothesis) => {
            let proposal = match hypothesis {
                Some(t) => format!("a {t} anomaly"),
                None if verdict.is_anomaly => "an untyped anomaly".to_string(),
                None => "a normal verdict".to_string(),
            };
            let summary = format!(
                "Verification could not confirm {proposal} on {} after {} retest(s); \
                 {} check(s) still fail. Treat this as an {UNVERIFIED_MARKER} and triage manually.",
                case.id,
                outcome.retries_used,
                outcome.failed_checks.len()
            );
            let remediation = vec![
                "Escalate to an operator for manual triage; automated verification failed."
                    .to_string(),
                "Re-run detection after collecting a longer telemetry window.".to_string(),
            ];
            (
                summary,
                "undetermined; verification failed".to_string(),
                remediation,
            )
        }
        (status, Some(t)) => {
            let finding = metric_findings
                .first()
                .cloned()
                .unwrap_or_else(|| "metric predicates hold".to_string());
            let evidence = log_evidence
                .first()
                .map(|line| format!(" The logs corroborate it: \"{line}\"."))
                .unwrap_or_default();
            let closing = match status {
                VerdictStatus::Corrected => format!(
                    " The verifier corrected the initial verdict after {} retest(s); all checks now pass.",
                    outcome.retries_used
                ),
                _ => " The verifier accepted the verdict with every check passing.".to_string(),
            };
            let summary = format!(
                "Confirmed {t} anomaly on {}: {}. Strongest signal: {finding}.{evidence}{closing}",
                case.id,
                root_cause_text(t)
            );
            let remediation = remediation_playbook(t)
                .iter()
                .map(|s| s.to_string())
                .collect();
            (summary, format!("{t}: {}", root_cause_text(t)), remediation)
        }
        (status, None) => {
            let explanation = if verdict.explanation.is_empty() {
                "the observed activity is explained by routine operations".to_string()
            } else {
                verdict.explanation.clone()
            };
            let closing = match status {
                VerdictStatus::Corrected => format!(
                    " The verifier overturned the initial anomaly hypothesis after {} retest(s).",
                    outcome.retries_used
                ),
                _ => " No rule signature matched the evidence.".to_string(),
            };
            let summary = format!("No anomaly on {}: {explanation}.{closing}", case.id);
            (
                summary,
                "no incident; activity judged benign".to_string(),
                vec!["No action required; continue routine monitoring.".to_string()],
            )
        }
    };

    Ok(AnomalyReport {
        case_id: case.id.clone(),
        summary,
        reasoning_chain: chain,
        root_cause,
        remediation,
        verifier_trace: VerifierTrace {
            status: outcome.status,
            retries_used: outcome.retries_used,
            passed_checks,
            failed_checks: outcome.failed_checks.clone(),
        },
    })
}

/// Asks the backend to rewrite the summary paragraph. The rewrite is adopted
/// only when it is non-empty and keeps every double-quoted log line and every
/// anomaly type name from the template summary verbatim; on any backend error
/// or a failed check the template report is returned unchanged.
pub fn polish_report(report: &AnomalyReport, backend: &dyn Backend) -> AnomalyReport {
    let prompt = AgentPrompt {
        system_text: POLISH_SYSTEM.to_string(),
        user_text: format!("{}\n\nRewrite this summary.\n", report.summary),
        expected_schema: Schema::Rewrite,
    };
    let Ok(reply) = backend.complete(&prompt) else {
        return report.clone();
    };
    let polished = strip_fences(&reply);
    let keeps_evidence = required_fragments(&report.summary)
        .iter()
        .all(|fragment| polished.contains(fragment.as_str()));
    if polished.is_empty() || !keeps_evidence {
        return report.clone();
    }
    let mut out = report.clone();
    out.summary = polished;
    out
}

/// Fragments of a summary that any rewrite must preserve: double-quoted
/// spans (the cited log lines) and anomaly type names.
fn required_fragments(summary: &str) -> Vec<String> {
    let mut fragments = Vec::new();
    let chunks: Vec<&str> = summary.split('"').collect();
    if chunks.len() % 2 == 1 {
        for quoted in chunks.iter().skip(1).step_by(2) {
            fragments.push((*quoted).to_string());
        }
    }
    for t in AnomalyType::ALL {
        if summary.contains(t.as_str()) {
            fragments.push(t.as_str().to_string());
        }
    }
    fragments
}

fn strip_fences(reply: &str) -> String {
    let trimmed = reply.trim();
    let Some(rest) = trimmed.strip_prefix("```") else {
        return trimmed.to_string();
    };
    let body = rest.split_once('\n').map(|(_, b)| b).unwrap_or("");
    body.trim_end()
        .strip_suffix("```")
        .unwrap_or(body)
        .trim()
        .to_string()
}
