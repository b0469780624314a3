//! Command-line front end: generate benchmark datasets, run the detection
//! pipeline, certify datasets against the ruleset, score detectors, render
//! operator reports, and export the built-in rule signatures.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or schema error, 4 backend
//! error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cloudano::agents::AgentContext;
use cloudano::backend::{Backend, BackendConfig, HttpBackend};
use cloudano::bench::{generate_dataset, load_dataset, write_dataset, GenSpec};
use cloudano::eval::{
    run_evaluation, summarize, to_csv, to_table, AlwaysAnomalyDetector, Detector, EvalOptions,
    EvalSummary, NeverAnomalyDetector, OovDetector, PipelineDetector, RuleEnsembleDetector,
};
use cloudano::metrics::PatternConfig;
use cloudano::mock::OracleBackend;
use cloudano::model::{CaseRecord, FinalVerdict};
use cloudano::pipeline::Pipeline;
use cloudano::prompt::PromptTemplates;
use cloudano::report::{polish_report, render_report};
use cloudano::verifier::{scan_types, Ruleset};
use cloudano::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cloudano",
    version,
    about = "Anomaly detection over cloud telemetry: benchmark generation, \
             detection, evaluation, and reporting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled benchmark dataset.
    Gen(GenArgs),
    /// Run the detection pipeline on a dataset or a single case.
    Detect(DetectArgs),
    /// Validate a dataset file and certify every case against the ruleset.
    Verify(VerifyArgs),
    /// Score detectors on a dataset.
    Eval(EvalArgs),
    /// Render operator reports for pipeline verdicts.
    Report(ReportArgs),
    /// Write the built-in rule signatures as JSON.
    ExportRuleset(ExportRulesetArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Where to write the dataset document.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = GenSpec::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = GenSpec::default().anomaly_cases)]
    anomaly_cases: usize,
    #[arg(long, default_value_t = GenSpec::default().normal_cases)]
    normal_cases: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// Deterministic offline oracle derived from the rule signatures.
    Mock,
    /// HTTP chat-completion backend; needs the API key environment variable.
    Real,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    /// Endpoint URL override for the real backend.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name override for the real backend.
    #[arg(long)]
    model: Option<String>,
}

impl BackendArgs {
    fn build(&self, ruleset: &Ruleset) -> Result<Box<dyn Backend>> {
        match self.backend {
            BackendKind::Mock => Ok(Box::new(OracleBackend::new(
                duplicate_ruleset(ruleset)?,
                PatternConfig::default(),
            ))),
            BackendKind::Real => {
                let mut config = BackendConfig::default();
                if let Some(url) = &self.endpoint {
                    config.endpoint_url = url.clone();
                }
                if let Some(model) = &self.model {
                    config.model_name = model.clone();
                }
                Ok(Box::new(HttpBackend::new(config)?))
            }
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Dataset document to read cases from.
    #[arg(long)]
    dataset: PathBuf,
    /// Restrict to the case with this id.
    #[arg(long)]
    case: Option<String>,
    /// Skip the symbolic verifier and trust the decision-maker.
    #[arg(long)]
    no_verifier: bool,
    /// Rule signature file overriding the built-in set.
    #[arg(long)]
    ruleset: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    ruleset: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorKind {
    RuleEnsemble,
    OovLogs,
    AlwaysAnomaly,
    NeverAnomaly,
    /// Full agent pipeline over the oracle mock backend.
    PipelineMock,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalFormat {
    Table,
    Csv,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Detectors to score; repeat or comma-separate for several.
    #[arg(long = "detector", value_enum, value_delimiter = ',')]
    detectors: Vec<DetectorKind>,
    #[arg(long, default_value_t = EvalOptions::default().repeats)]
    repeats: u32,
    /// Seed for the per-repeat case shuffle.
    #[arg(long, default_value_t = EvalOptions::default().seed)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: EvalFormat,
    /// Disable the verifier inside the pipeline-mock detector.
    #[arg(long)]
    no_verifier: bool,
    #[arg(long)]
    ruleset: Option<PathBuf>,
    /// Write the rendered scores here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    no_verifier: bool,
    #[arg(long)]
    ruleset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    /// Let the backend rewrite each summary; rewrites that lose evidence
    /// are discarded.
    #[arg(long)]
    polish: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct ExportRulesetArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Backend(_) => 4,
        _ => 3,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Report(args) => cmd_report(args),
        Command::ExportRuleset(args) => cmd_export_ruleset(args),
    }
}

fn load_ruleset(path: &Option<PathBuf>) -> Result<Ruleset> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ruleset::from_json(&text)
        }
        None => Ok(Ruleset::default()),
    }
}

fn duplicate_ruleset(ruleset: &Ruleset) -> Result<Ruleset> {
    Ruleset::from_specs(ruleset.specs().to_vec())
}

fn select_cases<'a>(cases: &'a [CaseRecord], id: &Option<String>) -> Result<Vec<&'a CaseRecord>> {
    match id {
        Some(id) => {
            let case = cases
                .iter()
                .find(|c| &c.id == id)
                .ok_or_else(|| Error::schema("case", format!("no case with id {id}")))?;
            Ok(vec![case])
        }
        None => Ok(cases.iter().collect()),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = GenSpec {
        seed: args.seed,
        anomaly_cases: args.anomaly_cases,
        normal_cases: args.normal_cases,
        ..GenSpec::default()
    };
    let cases = generate_dataset(&spec)?;
    write_dataset(&args.out, &spec, &cases)?;
    println!(
        "wrote {} cases ({} anomaly, {} normal) to {}",
        cases.len(),
        spec.anomaly_cases,
        spec.normal_cases,
        args.out.display()
    );
    Ok(())
}

fn run_pipeline_on(
    cases: &[&CaseRecord],
    backend: &dyn Backend,
    ruleset: &Ruleset,
    no_verifier: bool,
) -> Result<Vec<FinalVerdict>> {
    let templates = PromptTemplates::default();
    let ctx = AgentContext::new(backend, &templates, ruleset);
    let pipeline = if no_verifier {
        Pipeline::without_verifier(ctx)
    } else {
        Pipeline::new(ctx)
    };
    cases.iter().map(|case| pipeline.run_case(case)).collect()
}

fn cmd_detect(args: DetectArgs) -> Result<()> {
    let ruleset = load_ruleset(&args.ruleset)?;
    let doc = load_dataset(&args.dataset)?;
    let selected = select_cases(&doc.cases, &args.case)?;
    let backend = args.backend.build(&ruleset)?;
    let outcomes = run_pipeline_on(&selected, backend.as_ref(), &ruleset, args.no_verifier)?;
    let mut flagged = 0usize;
    for (case, outcome) in selected.iter().zip(&outcomes) {
        let verdict = match outcome.verdict.anomaly_type {
            Some(t) => format!("anomaly {t}"),
            None if outcome.verdict.is_anomaly => "anomaly".to_string(),
            None => "normal".to_string(),
        };
        if outcome.verdict.is_anomaly {
            flagged += 1;
        }
        println!(
            "{}: {verdict} ({}, retests {})",
            case.id, outcome.status, outcome.retries_used
        );
    }
    println!("flagged {flagged} of {} cases as anomalous", selected.len());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let ruleset = load_ruleset(&args.ruleset)?;
    let config = PatternConfig::default();
    let doc = load_dataset(&args.dataset)?;
    let mut mismatches = 0usize;
    for case in &doc.cases {
        let found = scan_types(case, &ruleset, &config)?;
        if found != case.label.anomaly_type {
            mismatches += 1;
            println!(
                "{}: labeled {} but the rules match {}",
                case.id,
                case.label
                    .anomaly_type
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "normal".to_string()),
                found
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "normal".to_string())
            );
        }
    }
    if mismatches > 0 {
        return Err(Error::invariant(
            "dataset",
            format!("{mismatches} case(s) failed certification against the ruleset"),
        ));
    }
    println!(
        "all {} cases certified against the ruleset",
        doc.cases.len()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let ruleset = load_ruleset(&args.ruleset)?;
    let doc = load_dataset(&args.dataset)?;
    let options = EvalOptions {
        repeats: args.repeats,
        seed: args.seed,
        ..EvalOptions::default()
    };
    let kinds = if args.detectors.is_empty() {
        vec![DetectorKind::RuleEnsemble]
    } else {
        args.detectors.clone()
    };
    let mut summaries: Vec<EvalSummary> = Vec::new();
    for kind in kinds {
        let detector: Box<dyn Detector> = match kind {
            DetectorKind::RuleEnsemble => Box::new(RuleEnsembleDetector::default()),
            DetectorKind::OovLogs => {
                let normals: Vec<CaseRecord> = doc
                    .cases
                    .iter()
                    .filter(|c| !c.label.is_anomaly)
                    .cloned()
                    .collect();
                Box::new(OovDetector::fit(&normals)?)
            }
            DetectorKind::AlwaysAnomaly => Box::new(AlwaysAnomalyDetector),
            DetectorKind::NeverAnomaly => Box::new(NeverAnomalyDetector),
            DetectorKind::PipelineMock => {
                let backend =
                    OracleBackend::new(duplicate_ruleset(&ruleset)?, PatternConfig::default());
                let detector = PipelineDetector::new("pipeline-mock", Box::new(backend));
                Box::new(if args.no_verifier {
                    detector.without_verifier()
                } else {
                    detector
                })
            }
        };
        summaries.push(summarize(&run_evaluation(
            detector.as_ref(),
            &doc.cases,
            &options,
        )?));
    }
    let rendered = match args.format {
        EvalFormat::Table => to_table(&summaries),
        EvalFormat::Csv => to_csv(&summaries),
        EvalFormat::Json => {
            let mut json = serde_json::to_string_pretty(&summaries)
                .map_err(|e| Error::json("evaluation summaries", e))?;
            json.push('\n');
            json
        }
    };
    emit(&args.out, &rendered)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let ruleset = load_ruleset(&args.ruleset)?;
    let config = PatternConfig::default();
    let doc = load_dataset(&args.dataset)?;
    let selected = select_cases(&doc.cases, &args.case)?;
    let backend = args.backend.build(&ruleset)?;
    let outcomes = run_pipeline_on(&selected, backend.as_ref(), &ruleset, args.no_verifier)?;
    let mut reports = Vec::with_capacity(selected.len());
    for (case, outcome) in selected.iter().zip(&outcomes) {
        let mut report = render_report(outcome, case, &ruleset, &config)?;
        if args.polish {
            report = polish_report(&report, backend.as_ref());
        }
        reports.push(report);
    }
    let rendered = match args.format {
        ReportFormat::Text => {
            let mut out = String::new();
            for (i, report) in reports.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&report.to_text());
            }
            out
        }
        ReportFormat::Json => {
            let mut json =
                serde_json::to_string_pretty(&reports).map_err(|e| Error::json("reports", e))?;
            json.push('\n');
            json
        }
    };
    emit(&args.out, &rendered)
}

fn cmd_export_ruleset(args: ExportRulesetArgs) -> Result<()> {
    let mut json = Ruleset::default().to_json()?;
    if !json.ends_with('\n') {
        json.push('\n');
    }
    emit(&args.out, &json)
}
