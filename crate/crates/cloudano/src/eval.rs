//! Evaluation harness: runs detectors over labeled cases, repeats each run
//! over shuffled case orders, and scores class accuracy, type accuracy,
//! and false positive rate, split by difficulty.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::agents::AgentContext;
use crate::backend::Backend;
use crate::baselines::{
    build_vocabulary, oov_detect, rule_ensemble_detect, Vocabulary, DEFAULT_OOV_THRESHOLD,
};
use crate::bench::case_rng;
use crate::error::{Error, Result};
use crate::metrics::PatternConfig;
use crate::model::{AnomalyType, CaseRecord, Difficulty, Verdict, VerdictStatus};
use crate::pipeline::Pipeline;
use crate::prompt::PromptTemplates;
use crate::verifier::Ruleset;

/// First rng stream used for shuffling; streams below it belong to case
/// generation.
const SHUFFLE_STREAM_BASE: u64 = 1_000;

/// What a detector says about one case.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub is_anomaly: bool,
    pub anomaly_type: Option<AnomalyType>,
    /// The verdict survived without verification; scoring may count it
    /// as wrong depending on [`EvalOptions::abstained_is_wrong`].
    pub abstained: bool,
}

impl Prediction {
    pub fn from_verdict(verdict: &Verdict) -> Self {
        Prediction {
            is_anomaly: verdict.is_anomaly,
            anomaly_type: verdict.anomaly_type,
            abstained: false,
        }
    }
}

/// Anything that can judge a case.
pub trait Detector {
    /// Short identifier used in reports.
    fn id(&self) -> &str;

    /// Whether detections carry an anomaly type worth scoring.
    fn produces_types(&self) -> bool {
        false
    }

    fn detect(&self, case: &CaseRecord) -> Result<Prediction>;
}

/// Harness parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Passes over the dataset; each pass shuffles the case order.
    pub repeats: u32,
    /// Seed for the shuffle streams.
    pub seed: u64,
    /// Scores abstained predictions as wrong instead of trusting the
    /// verdict they carry.
    pub abstained_is_wrong: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            repeats: 3,
            seed: 17,
            abstained_is_wrong: false,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig(
                "evaluation needs at least one repeat".to_string(),
            ));
        }
        Ok(())
    }
}

/// Per-case outcome, averaged over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub is_anomaly: bool,
    pub difficulty: Difficulty,
    /// Share of repeats that got the binary class right, in [0, 1].
    pub class_score: f64,
    /// Share of repeats that got the class right and, on anomaly cases,
    /// the type as well.
    pub type_score: f64,
    /// Detector errors across repeats; an errored repeat scores zero.
    pub errors: u32,
}

/// Raw evaluation output: one result per case.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub detector_id: String,
    pub produces_types: bool,
    pub options: EvalOptions,
    pub case_results: Vec<CaseResult>,
}

/// Dataset slice a score row covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Easy,
    Difficult,
    Overall,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Easy, Split::Difficult, Split::Overall];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Easy => "easy",
            Split::Difficult => "difficult",
            Split::Overall => "overall",
        }
    }

    fn includes(self, difficulty: Difficulty) -> bool {
        match self {
            Split::Easy => difficulty == Difficulty::Easy,
            Split::Difficult => difficulty == Difficulty::Difficult,
            Split::Overall => true,
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scores for one dataset slice. Metrics whose class has no cases in the
/// slice are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScores {
    pub split: Split,
    pub case_count: usize,
    pub anomaly_count: usize,
    pub normal_count: usize,
    /// Share of anomaly cases flagged anomalous, as a percentage.
    pub anomaly_accuracy: Option<f64>,
    /// Share of anomaly cases flagged with the right type.
    pub anomaly_type_accuracy: Option<f64>,
    /// Share of normal cases passed as normal.
    pub normal_accuracy: Option<f64>,
    /// Share of all cases classified right.
    pub class_accuracy: Option<f64>,
    /// Share of all cases classified right, requiring the type on
    /// anomaly cases.
    pub type_accuracy: Option<f64>,
    /// 100 minus the normal accuracy.
    pub false_positive_rate: Option<f64>,
}

/// Aggregated scores for one detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub detector_id: String,
    pub produces_types: bool,
    pub repeats: u32,
    pub seed: u64,
    pub errors: u64,
    pub splits: Vec<SplitScores>,
}

impl EvalSummary {
    pub fn split(&self, split: Split) -> &SplitScores {
        self.splits
            .iter()
            .find(|s| s.split == split)
            .expect("summaries carry every split")
    }
}

/// Rounds to two decimals, half away from zero.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Share of `hits` in `total` as a percentage, rounded to two decimals.
/// `hits` may be fractional after repeat averaging.
pub fn percentage(hits: f64, total: usize) -> f64 {
    assert!(total > 0, "percentage needs a non-empty class");
    round2(hits * 100.0 / total as f64)
}

/// Runs the detector over every case, `repeats` times in shuffled order,
/// and records per-case scores. Detector errors score zero for the repeat
/// and are counted.
pub fn run_evaluation(
    detector: &dyn Detector,
    cases: &[CaseRecord],
    options: &EvalOptions,
) -> Result<EvalRun> {
    options.validate()?;
    if cases.is_empty() {
        return Err(Error::InvalidConfig(
            "evaluation needs at least one case".to_string(),
        ));
    }
    let mut class_hits = vec![0u32; cases.len()];
    let mut type_hits = vec![0u32; cases.len()];
    let mut errors = vec![0u32; cases.len()];
    for repeat in 0..options.repeats {
        let mut order: Vec<usize> = (0..cases.len()).collect();
        let mut rng = case_rng(options.seed, SHUFFLE_STREAM_BASE + repeat as u64);
        order.shuffle(&mut rng);
        for &i in &order {
            let case = &cases[i];
            let prediction = match detector.detect(case) {
                Ok(p) => p,
                Err(_) => {
                    errors[i] += 1;
                    continue;
                }
            };
            let abstain_penalty = options.abstained_is_wrong && prediction.abstained;
            let class_ok = !abstain_penalty && prediction.is_anomaly == case.label.is_anomaly;
            let type_ok = class_ok
                && (!case.label.is_anomaly || prediction.anomaly_type == case.label.anomaly_type);
            if class_ok {
                class_hits[i] += 1;
            }
            if type_ok {
                type_hits[i] += 1;
            }
        }
    }
    let case_results = cases
        .iter()
        .enumerate()
        .map(|(i, case)| CaseResult {
            case_id: case.id.clone(),
            is_anomaly: case.label.is_anomaly,
            difficulty: case.label.difficulty,
            class_score: class_hits[i] as f64 / options.repeats as f64,
            type_score: type_hits[i] as f64 / options.repeats as f64,
            errors: errors[i],
        })
        .collect();
    Ok(EvalRun {
        detector_id: detector.id().to_string(),
        produces_types: detector.produces_types(),
        options: options.clone(),
        case_results,
    })
}

/// Aggregates a run into per-split scores.
pub fn summarize(run: &EvalRun) -> EvalSummary {
    let splits = Split::ALL
        .into_iter()
        .map(|split| {
            let selected: Vec<&CaseResult> = run
                .case_results
                .iter()
                .filter(|c| split.includes(c.difficulty))
                .collect();
            score_split(split, &selected)
        })
        .collect();
    EvalSummary {
        detector_id: run.detector_id.clone(),
        produces_types: run.produces_types,
        repeats: run.options.repeats,
        seed: run.options.seed,
        errors: run.case_results.iter().map(|c| c.errors as u64).sum(),
        splits,
    }
}

fn score_split(split: Split, cases: &[&CaseResult]) -> SplitScores {
    let anomaly_count = cases.iter().filter(|c| c.is_anomaly).count();
    let normal_count = cases.len() - anomaly_count;
    let anomaly_hits: f64 = cases
        .iter()
        .filter(|c| c.is_anomaly)
        .map(|c| c.class_score)
        .sum();
    let anomaly_type_hits: f64 = cases
        .iter()
        .filter(|c| c.is_anomaly)
        .map(|c| c.type_score)
        .sum();
    let normal_hits: f64 = cases
        .iter()
        .filter(|c| !c.is_anomaly)
        .map(|c| c.class_score)
        .sum();
    let normal_accuracy = (normal_count > 0).then(|| percentage(normal_hits, normal_count));
    SplitScores {
        split,
        case_count: cases.len(),
        anomaly_count,
        normal_count,
        anomaly_accuracy: (anomaly_count > 0).then(|| percentage(anomaly_hits, anomaly_count)),
        anomaly_type_accuracy: (anomaly_count > 0)
            .then(|| percentage(anomaly_type_hits, anomaly_count)),
        normal_accuracy,
        class_accuracy: (!cases.is_empty())
            .then(|| percentage(anomaly_hits + normal_hits, cases.len())),
        type_accuracy: (!cases.is_empty())
            .then(|| percentage(anomaly_type_hits + normal_hits, cases.len())),
        false_positive_rate: normal_accuracy.map(|acc| round2(100.0 - acc)),
    }
}

/// Renders summaries as long-format CSV, one row per metric.
pub fn to_csv(summaries: &[EvalSummary]) -> String {
    let mut out = String::from("detector_id,split,metric,value,case_count,repeats,seed\n");
    for summary in summaries {
        for row in &summary.splits {
            let mut push = |metric: &str, value: Option<f64>, count: usize| {
                if let Some(v) = value {
                    out.push_str(&format!(
                        "{},{},{metric},{v:.2},{count},{},{}\n",
                        summary.detector_id, row.split, summary.repeats, summary.seed
                    ));
                }
            };
            push("anomaly_accuracy", row.anomaly_accuracy, row.anomaly_count);
            push(
                "anomaly_type_accuracy",
                row.anomaly_type_accuracy,
                row.anomaly_count,
            );
            push("normal_accuracy", row.normal_accuracy, row.normal_count);
            push(
                "false_positive_rate",
                row.false_positive_rate,
                row.normal_count,
            );
            push("class_accuracy", row.class_accuracy, row.case_count);
            push("type_accuracy", row.type_accuracy, row.case_count);
        }
    }
    out
}

fn fmt_opt(value: Option<f64>) -> String {
    value
        .map(|v| format!("{v:.2}"))
        .unwrap_or_else(|| "-".to_string())
}

/// Renders summaries as an aligned text table.
pub fn to_table(summaries: &[EvalSummary]) -> String {
    let mut out = format!(
        "{:<18} {:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "detector", "split", "cases", "anom%", "norm%", "class%", "typed%", "fpr%"
    );
    for summary in summaries {
        for row in &summary.splits {
            let typed = if summary.produces_types {
                fmt_opt(row.type_accuracy)
            } else {
                "-".to_string()
            };
            out.push_str(&format!(
                "{:<18} {:<10} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
                summary.detector_id,
                row.split.as_str(),
                row.case_count,
                fmt_opt(row.anomaly_accuracy),
                fmt_opt(row.normal_accuracy),
                fmt_opt(row.class_accuracy),
                typed,
                fmt_opt(row.false_positive_rate),
            ));
        }
    }
    out
}

/// Votes over metric rules; never emits a type.
#[derive(Debug, Clone, Default)]
pub struct RuleEnsembleDetector {
    pub config: PatternConfig,
}

impl Detector for RuleEnsembleDetector {
    fn id(&self) -> &str {
        "rule-ensemble"
    }

    fn detect(&self, case: &CaseRecord) -> Result<Prediction> {
        Ok(Prediction::from_verdict(&rule_ensemble_detect(
            case,
            &self.config,
        )?))
    }
}

/// Flags cases whose log tokens stray from a fitted vocabulary.
#[derive(Debug, Clone)]
pub struct OovDetector {
    pub vocabulary: Vocabulary,
    pub threshold: f64,
}

impl OovDetector {
    /// Learns the vocabulary from the given corpus, normal cases usually.
    pub fn fit(corpus: &[CaseRecord]) -> Result<Self> {
        Ok(OovDetector {
            vocabulary: build_vocabulary(corpus)?,
            threshold: DEFAULT_OOV_THRESHOLD,
        })
    }
}

impl Detector for OovDetector {
    fn id(&self) -> &str {
        "oov-logs"
    }

    fn detect(&self, case: &CaseRecord) -> Result<Prediction> {
        Ok(Prediction::from_verdict(&oov_detect(
            case,
            &self.vocabulary,
            self.threshold,
        )))
    }
}

/// Flags everything; upper bound on anomaly accuracy.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysAnomalyDetector;

impl Detector for AlwaysAnomalyDetector {
    fn id(&self) -> &str {
        "always-anomaly"
    }

    fn detect(&self, _case: &CaseRecord) -> Result<Prediction> {
        Ok(Prediction {
            is_anomaly: true,
            anomaly_type: None,
            abstained: false,
        })
    }
}

/// Flags nothing; upper bound on normal accuracy.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeverAnomalyDetector;

impl Detector for NeverAnomalyDetector {
    fn id(&self) -> &str {
        "never-anomaly"
    }

    fn detect(&self, _case: &CaseRecord) -> Result<Prediction> {
        Ok(Prediction {
            is_anomaly: false,
            anomaly_type: None,
            abstained: false,
        })
    }
}

/// The full agent pipeline behind the [`Detector`] interface, with or
/// without the verifier stage.
pub struct PipelineDetector {
    id: String,
    backend: Box<dyn Backend>,
    templates: PromptTemplates,
    ruleset: Ruleset,
    config: PatternConfig,
    verifier_enabled: bool,
}

impl PipelineDetector {
    pub fn new(id: impl Into<String>, backend: Box<dyn Backend>) -> Self {
        PipelineDetector {
            id: id.into(),
            backend,
            templates: PromptTemplates::default(),
            ruleset: Ruleset::default(),
            config: PatternConfig::default(),
            verifier_enabled: true,
        }
    }

    pub fn without_verifier(mut self) -> Self {
        self.verifier_enabled = false;
        self
    }
}

impl Detector for PipelineDetector {
    fn id(&self) -> &str {
        &self.id
    }

    fn produces_types(&self) -> bool {
        true
    }

    fn detect(&self, case: &CaseRecord) -> Result<Prediction> {
        let mut ctx = AgentContext::new(self.backend.as_ref(), &self.templates, &self.ruleset);
        ctx.pattern_config = self.config.clone();
        let pipeline = if self.verifier_enabled {
            Pipeline::new(ctx)
        } else {
            Pipeline::without_verifier(ctx)
        };
        let outcome = pipeline.run_case(case)?;
        Ok(Prediction {
            is_anomaly: outcome.verdict.is_anomaly,
            anomaly_type: outcome.verdict.anomaly_type,
            abstained: outcome.status == VerdictStatus::Abstained,
        })
    }
}
