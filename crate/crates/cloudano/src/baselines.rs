//! Deterministic reference detectors: a rule-voting ensemble over metric
//! features and an out-of-vocabulary log token detector. Both emit binary
//! verdicts without an anomaly type.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::metrics::{
    classify_pattern, extract_features, PatternConfig, MIN_CLASSIFY_LEN, MIN_FEATURE_LEN,
};
use crate::model::{CaseRecord, MetricName, Verdict};

pub const RULE_PATTERN_PRESENT: &str = "pattern_present";
pub const RULE_VARIATION_HIGH: &str = "variation_high";
pub const RULE_TREND_HIGH: &str = "trend_high";
pub const RULE_VOLATILITY_HIGH: &str = "volatility_high";
pub const RULE_PEAK_RATIO: &str = "peak_ratio";

/// The fixed rule catalogue, in evaluation order.
pub const RULE_CATALOGUE: [&str; 5] = [
    RULE_PATTERN_PRESENT,
    RULE_VARIATION_HIGH,
    RULE_TREND_HIGH,
    RULE_VOLATILITY_HIGH,
    RULE_PEAK_RATIO,
];

/// Reference threshold for mean-normalized step-to-step volatility, set at
/// the 90th percentile observed on calm synthetic windows.
pub const NORMALIZED_VOLATILITY_REFERENCE: f64 = 0.15;

/// Default out-of-vocabulary fraction above which the OOV detector flags.
pub const DEFAULT_OOV_THRESHOLD: f64 = 0.05;

/// One rule evaluated against one metric series.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleVote {
    pub metric: MetricName,
    pub rule_id: &'static str,
    pub fired: bool,
    pub detail: String,
}

/// Votes needed to declare an anomaly across `metric_count` series: a third
/// of the series, rounded up, and never less than one.
pub fn adaptive_vote_threshold(metric_count: usize) -> usize {
    (metric_count * 34).div_ceil(100).max(1)
}

/// Evaluates the whole rule catalogue against every series in the case.
pub fn rule_votes(case: &CaseRecord, config: &PatternConfig) -> Result<Vec<RuleVote>> {
    config.validate()?;
    let mut votes = Vec::with_capacity(case.metrics.len() * RULE_CATALOGUE.len());
    for series in &case.metrics {
        let vote = |rule_id, fired, detail: String| RuleVote {
            metric: series.name,
            rule_id,
            fired,
            detail,
        };
        if series.values.len() < MIN_FEATURE_LEN {
            for rule_id in RULE_CATALOGUE {
                votes.push(vote(rule_id, false, "window too short".to_string()));
            }
            continue;
        }
        let feats = extract_features(series)?;

        if series.values.len() < MIN_CLASSIFY_LEN {
            votes.push(vote(
                RULE_PATTERN_PRESENT,
                false,
                "window too short to classify".to_string(),
            ));
        } else {
            let pattern = classify_pattern(series, config)?;
            votes.push(vote(
                RULE_PATTERN_PRESENT,
                pattern.is_some(),
                match pattern {
                    Some(p) => format!("classified {p}"),
                    None => "no pattern".to_string(),
                },
            ));
        }

        let fired = feats.variation >= config.fluctuation_cv_min;
        votes.push(vote(
            RULE_VARIATION_HIGH,
            fired,
            format!(
                "variation {:.4} vs {}",
                feats.variation, config.fluctuation_cv_min
            ),
        ));

        let range = (feats.max - feats.min).max(config.epsilon);
        let normalized_trend = feats.trend * (series.values.len() - 1) as f64 / range;
        let fired = normalized_trend.abs() >= config.trend_slope_min;
        votes.push(vote(
            RULE_TREND_HIGH,
            fired,
            format!(
                "|normalized trend| {:.4} vs {}",
                normalized_trend.abs(),
                config.trend_slope_min
            ),
        ));

        let normalized_volatility = feats.volatility / feats.mean.max(config.epsilon);
        let fired = normalized_volatility >= NORMALIZED_VOLATILITY_REFERENCE;
        votes.push(vote(
            RULE_VOLATILITY_HIGH,
            fired,
            format!(
                "volatility/mean {normalized_volatility:.4} vs {NORMALIZED_VOLATILITY_REFERENCE}"
            ),
        ));

        let peak_ratio = feats.max / feats.mean.max(config.epsilon);
        let fired = peak_ratio >= config.spike_ratio;
        votes.push(vote(
            RULE_PEAK_RATIO,
            fired,
            format!("max/mean {:.4} vs {}", peak_ratio, config.spike_ratio),
        ));
    }
    Ok(votes)
}

/// Binary ensemble detector: flags the case when at least the adaptive
/// threshold of series have one or more fired rules.
pub fn rule_ensemble_detect(case: &CaseRecord, config: &PatternConfig) -> Result<Verdict> {
    case.validate()?;
    let votes = rule_votes(case, config)?;
    let mut flagged: Vec<String> = Vec::new();
    for series in &case.metrics {
        let fired: Vec<&str> = votes
            .iter()
            .filter(|v| v.metric == series.name && v.fired)
            .map(|v| v.rule_id)
            .collect();
        if !fired.is_empty() {
            flagged.push(format!("{}[{}]", series.name, fired.join(",")));
        }
    }
    let threshold = adaptive_vote_threshold(case.metrics.len());
    if flagged.len() >= threshold {
        Ok(Verdict {
            is_anomaly: true,
            anomaly_type: None,
            explanation: format!(
                "{} of {} metrics fired rules (threshold {threshold}): {}",
                flagged.len(),
                case.metrics.len(),
                flagged.join(", ")
            ),
        })
    } else {
        Ok(Verdict::normal(format!(
            "{} of {} metrics fired rules, below threshold {threshold}",
            flagged.len(),
            case.metrics.len()
        )))
    }
}

/// Log token set the OOV detector treats as known.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub tokens: BTreeSet<String>,
    pub source_case_count: usize,
}

impl Vocabulary {
    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }
}

/// Lowercases, splits on anything that is not a letter or digit, and
/// collapses each run of digits to a single `0` so PIDs, ports, and
/// addresses normalize to one placeholder token.
pub fn tokenize_line(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for raw in text.split(|c: char| !c.is_ascii_alphanumeric()) {
        if raw.is_empty() {
            continue;
        }
        let mut token = String::with_capacity(raw.len());
        let mut in_digits = false;
        for c in raw.chars() {
            if c.is_ascii_digit() {
                if !in_digits {
                    token.push('0');
                    in_digits = true;
                }
            } else {
                token.push(c.to_ascii_lowercase());
                in_digits = false;
            }
        }
        tokens.push(token);
    }
    tokens
}

/// Unions the tokens of every log line across the corpus.
pub fn build_vocabulary(corpus: &[CaseRecord]) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut tokens = BTreeSet::new();
    for case in corpus {
        for entry in &case.logs {
            tokens.extend(tokenize_line(&entry.text));
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Vocabulary {
        tokens,
        source_case_count: corpus.len(),
    })
}

/// Fraction of the case's log tokens missing from the vocabulary.
/// A case without log tokens scores zero.
pub fn oov_fraction(case: &CaseRecord, vocab: &Vocabulary) -> f64 {
    let mut total = 0usize;
    let mut unseen = 0usize;
    for entry in &case.logs {
        for token in tokenize_line(&entry.text) {
            total += 1;
            if !vocab.contains(&token) {
                unseen += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        unseen as f64 / total as f64
    }
}

/// Binary detector: flags the case when its OOV fraction strictly exceeds
/// the threshold.
pub fn oov_detect(case: &CaseRecord, vocab: &Vocabulary, threshold: f64) -> Verdict {
    let fraction = oov_fraction(case, vocab);
    if fraction > threshold {
        Verdict {
            is_anomaly: true,
            anomaly_type: None,
            explanation: format!("oov token fraction {fraction:.4} exceeds {threshold}"),
        }
    } else {
        Verdict::normal(format!(
            "oov token fraction {fraction:.4} within {threshold}"
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CaseLabel, Difficulty, LogEntry, MetricSeries};

    fn case_with(metrics: Vec<MetricSeries>, logs: Vec<LogEntry>) -> CaseRecord {
        CaseRecord {
            id: "t".to_string(),
            label: CaseLabel::normal(Difficulty::Easy, "test"),
            metrics,
            logs,
        }
    }

    fn calm(name: MetricName) -> MetricSeries {
        MetricSeries::new(name, 5, vec![30.0; 20])
    }

    fn spiky(name: MetricName) -> MetricSeries {
        let values = (0..20).map(|i| if i < 12 { 10.0 } else { 80.0 }).collect();
        MetricSeries::new(name, 5, values)
    }

    #[test]
    fn vote_threshold_boundaries() {
        assert_eq!(adaptive_vote_threshold(1), 1);
        assert_eq!(adaptive_vote_threshold(2), 1);
        assert_eq!(adaptive_vote_threshold(3), 2);
        assert_eq!(adaptive_vote_threshold(6), 3);
    }

    #[test]
    fn constant_metrics_fire_nothing() {
        let case = case_with(
            vec![calm(MetricName::Cpu), calm(MetricName::Memory)],
            vec![],
        );
        let votes = rule_votes(&case, &PatternConfig::default()).unwrap();
        assert_eq!(votes.len(), 10);
        assert!(votes.iter().all(|v| !v.fired));
        let verdict = rule_ensemble_detect(&case, &PatternConfig::default()).unwrap();
        assert!(!verdict.is_anomaly);
        assert_eq!(verdict.anomaly_type, None);
    }

    #[test]
    fn a_spiking_series_out_votes_a_calm_companion() {
        let case = case_with(
            vec![spiky(MetricName::Cpu), calm(MetricName::Memory)],
            vec![],
        );
        let verdict = rule_ensemble_detect(&case, &PatternConfig::default()).unwrap();
        assert!(verdict.is_anomaly);
        assert_eq!(verdict.anomaly_type, None);
        assert!(verdict.explanation.contains("cpu["));
    }

    #[test]
    fn one_vote_among_many_calm_series_stays_below_threshold() {
        let case = case_with(
            vec![
                spiky(MetricName::Cpu),
                calm(MetricName::Memory),
                calm(MetricName::DiskIo),
                calm(MetricName::NetIn),
                calm(MetricName::NetOut),
            ],
            vec![],
        );
        assert_eq!(adaptive_vote_threshold(5), 2);
        let verdict = rule_ensemble_detect(&case, &PatternConfig::default()).unwrap();
        assert!(!verdict.is_anomaly);
    }

    #[test]
    fn adding_a_firing_metric_never_unflags_at_fixed_threshold() {
        let mut votes = 0usize;
        for m in [
            spiky(MetricName::Cpu),
            calm(MetricName::Memory),
            spiky(MetricName::NetIn),
        ] {
            let case = case_with(vec![m], vec![]);
            let fired = rule_votes(&case, &PatternConfig::default())
                .unwrap()
                .iter()
                .any(|v| v.fired);
            if fired {
                votes += 1;
            }
        }
        assert_eq!(votes, 2);
    }

    #[test]
    fn tokenizer_lowercases_splits_and_collapses_digits() {
        assert_eq!(
            tokenize_line("sshd accepted session"),
            vec!["sshd", "accepted", "session"]
        );
        assert_eq!(
            tokenize_line("Accepted publickey from 10.8.3.44 port 50312"),
            vec![
                "accepted",
                "publickey",
                "from",
                "0",
                "0",
                "0",
                "0",
                "port",
                "0"
            ]
        );
        assert_eq!(
            tokenize_line("eth12 up, CRON[4410]"),
            vec!["eth0", "up", "cron", "0"]
        );
        assert_eq!(tokenize_line("  --  "), Vec::<String>::new());
    }

    #[test]
    fn vocabulary_is_order_independent() {
        let a = case_with(
            vec![calm(MetricName::Cpu)],
            vec![LogEntry::new(0, "alpha beta")],
        );
        let b = case_with(
            vec![calm(MetricName::Cpu)],
            vec![LogEntry::new(0, "beta gamma")],
        );
        let v1 = build_vocabulary(&[a.clone(), b.clone()]).unwrap();
        let v2 = build_vocabulary(&[b, a]).unwrap();
        assert_eq!(v1.tokens, v2.tokens);
        assert_eq!(
            v1.tokens.iter().cloned().collect::<Vec<_>>(),
            vec!["alpha", "beta", "gamma"]
        );
        assert_eq!(v1.source_case_count, 2);
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(matches!(build_vocabulary(&[]), Err(Error::EmptyCorpus)));
        let no_logs = case_with(vec![calm(MetricName::Cpu)], vec![]);
        assert!(matches!(
            build_vocabulary(&[no_logs]),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn oov_detect_flags_unseen_tokens_and_respects_the_threshold() {
        let known = case_with(
            vec![calm(MetricName::Cpu)],
            vec![LogEntry::new(0, "sshd accepted session for deploy")],
        );
        let vocab = build_vocabulary(std::slice::from_ref(&known)).unwrap();

        assert!(!oov_detect(&known, &vocab, DEFAULT_OOV_THRESHOLD).is_anomaly);

        let sus = case_with(
            vec![calm(MetricName::Cpu)],
            vec![LogEntry::new(0, "sshd session running xmrig now")],
        );
        let verdict = oov_detect(&sus, &vocab, DEFAULT_OOV_THRESHOLD);
        assert!(verdict.is_anomaly);
        assert_eq!(verdict.anomaly_type, None);

        assert!(!oov_detect(&sus, &vocab, 1.0).is_anomaly);
    }

    #[test]
    fn raising_the_threshold_never_flips_false_to_true() {
        let known = case_with(
            vec![calm(MetricName::Cpu)],
            vec![LogEntry::new(0, "alpha beta gamma delta")],
        );
        let vocab = build_vocabulary(&[known]).unwrap();
        let sus = case_with(
            vec![calm(MetricName::Cpu)],
            vec![LogEntry::new(0, "alpha beta zeta eta")],
        );
        let mut last = true;
        for threshold in [0.0, 0.25, 0.49, 0.5, 0.75, 1.0] {
            let flagged = oov_detect(&sus, &vocab, threshold).is_anomaly;
            assert!(flagged <= last, "flip at threshold {threshold}");
            last = flagged;
        }
    }

    #[test]
    fn oov_fraction_counts_duplicate_tokens_per_occurrence() {
        let known = case_with(
            vec![calm(MetricName::Cpu)],
            vec![LogEntry::new(0, "alpha beta")],
        );
        let vocab = build_vocabulary(&[known]).unwrap();
        let sus = case_with(
            vec![calm(MetricName::Cpu)],
            vec![
                LogEntry::new(0, "alpha zeta"),
                LogEntry::new(1, "alpha zeta"),
            ],
        );
        let fraction = oov_fraction(&sus, &vocab);
        assert!((fraction - 0.5).abs() < 1e-12);
    }
}
