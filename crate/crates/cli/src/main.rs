//! `xattn`: generate models, explain documents, and run the verification
//! suites from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use xattn_core::explain::{compute_explanations, ExplainOptions, ExplanationReport};
use xattn_core::generate::{DEFAULT_DIMS, DESK_DIMS};
use xattn_core::gradient_explain::corrupted_gradient;
use xattn_core::io::compare::{compare_corpus, write_csv};
use xattn_core::io::html::render_heatmap;
use xattn_core::io::model_file::{gen_model, ModelFile};
use xattn_core::io::tokenize::{tokenize, Tokenized, Vocabulary};
use xattn_core::lime::LimeConfig;
use xattn_core::verify::{run_suite, Suite, VerifyOptions};
use xattn_core::{Dims, Method};

const THREADS_ENV: &str = "XATTN_THREADS";

#[derive(Parser)]
#[command(name = "xattn", version, about = "Attention, gradient and LIME explanations for a one-layer attention classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a randomly initialized model file.
    GenModel(GenModelArgs),
    /// Explain documents with one or more methods.
    Explain(ExplainArgs),
    /// LIME explanations: sampled, exact limit, or attention approximation.
    Lime(LimeArgs),
    /// Compare all explainers over a corpus and write CSV.
    Compare(CompareArgs),
    /// Check closed forms against brute-force oracles.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenModelArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start from the small desk-scale dimensions instead of the defaults.
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    d_embed: Option<usize>,
    #[arg(long)]
    d_att: Option<usize>,
    #[arg(long)]
    d_out: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
}

#[derive(Args)]
struct Input {
    #[arg(long)]
    model: PathBuf,
    /// Text of a single document.
    #[arg(long, conflicts_with = "corpus", required_unless_present = "corpus")]
    text: Option<String>,
    /// File with one document per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Args)]
struct LimeFlags {
    /// Number of perturbed samples.
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Kernel bandwidth.
    #[arg(long, default_value_t = 25.0)]
    nu: f64,
    /// Ridge penalty.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl LimeFlags {
    fn config(&self) -> LimeConfig {
        LimeConfig {
            samples: self.n,
            bandwidth: self.nu,
            lambda: self.lambda,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    input: Input,
    /// Comma-separated method tags, or `all`.
    #[arg(long, default_value = "all")]
    methods: String,
    #[command(flatten)]
    lime: LimeFlags,
    /// Also write an HTML heatmap.
    #[arg(long)]
    html: Option<PathBuf>,
    /// Gradient × input uses the word embedding without positions.
    #[arg(long)]
    gxi_word_only: bool,
    /// Record wall-clock timings in the report (output is then not reproducible).
    #[arg(long)]
    timings: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LimeMode {
    Empirical,
    Exact,
    Approx,
    All,
}

impl LimeMode {
    fn methods(self) -> Vec<Method> {
        match self {
            LimeMode::Empirical => vec![Method::LimeEmpirical],
            LimeMode::Exact => vec![Method::LimeLimitExact],
            LimeMode::Approx => vec![Method::LimeLimitApprox],
            LimeMode::All => vec![Method::LimeEmpirical, Method::LimeLimitExact, Method::LimeLimitApprox],
        }
    }
}

#[derive(Args)]
struct LimeArgs {
    #[command(flatten)]
    input: Input,
    #[arg(long, value_enum, default_value = "empirical")]
    mode: LimeMode,
    #[command(flatten)]
    lime: LimeFlags,
    #[arg(long)]
    html: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model: PathBuf,
    /// File with one document per line.
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    lime: LimeFlags,
    #[arg(long)]
    gxi_word_only: bool,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    Gradient,
}

#[derive(Args)]
struct VerifyArgs {
    /// gradient, lemmas, proposition, lime, theorem2 or all.
    #[arg(default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Swap in a deliberately broken closed form.
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|()| run(cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenModel(args) => gen_model_cmd(args),
        Command::Explain(args) => explain_cmd(args),
        Command::Lime(args) => lime_cmd(args),
        Command::Compare(args) => compare_cmd(args),
        Command::Verify(args) => verify_cmd(args),
    }
}

fn write_output(path: Option<&Path>, contents: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, contents).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn gen_model_cmd(args: GenModelArgs) -> anyhow::Result<ExitCode> {
    let base = if args.desk { DESK_DIMS } else { DEFAULT_DIMS };
    let dims = Dims {
        vocab_size: args.vocab_size.unwrap_or(base.vocab_size),
        t_max: args.t_max.unwrap_or(base.t_max),
        d_embed: args.d_embed.unwrap_or(base.d_embed),
        d_att: args.d_att.unwrap_or(base.d_att),
        d_out: args.d_out.unwrap_or(base.d_out),
        heads: args.heads.unwrap_or(base.heads),
    };
    let model = gen_model(dims, args.seed)?;
    write_output(args.out.as_deref(), &model.to_json())?;
    Ok(ExitCode::SUCCESS)
}

fn load_model(path: &Path) -> anyhow::Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn read_documents(input: &Input, vocab: &Vocabulary) -> anyhow::Result<Vec<Tokenized>> {
    if let Some(text) = &input.text {
        return Ok(vec![tokenize(text, vocab)]);
    }
    let path = input.corpus.as_ref().expect("clap requires --text or --corpus");
    read_corpus(path, vocab)
}

fn read_corpus(path: &Path, vocab: &Vocabulary) -> anyhow::Result<Vec<Tokenized>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading corpus {}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| tokenize(l, vocab))
        .collect())
}

fn parse_methods(spec: &str) -> anyhow::Result<Vec<Method>> {
    if spec.trim() == "all" {
        return Ok(Method::STANDARD.to_vec());
    }
    let methods = spec
        .split(',')
        .map(|s| s.trim().parse::<Method>())
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        bail!("no methods given");
    }
    Ok(methods)
}

fn warn_oov(docs: &[Tokenized]) {
    for (i, d) in docs.iter().enumerate() {
        let unknown: Vec<&str> = d
            .words
            .iter()
            .zip(&d.oov)
            .filter(|(_, &o)| o)
            .map(|(w, _)| w.as_str())
            .collect();
        if !unknown.is_empty() {
            eprintln!("warning: document {}: out-of-vocabulary words mapped to UNK: {}", i + 1, unknown.join(" "));
        }
    }
}

/// Explains each document and serializes the reports: a single object for
/// `--text`, an array for `--corpus`.
fn explain_documents(
    model: &ModelFile,
    docs: &[Tokenized],
    methods: &[Method],
    opts: &ExplainOptions,
    timings: bool,
    single: bool,
) -> anyhow::Result<(String, Vec<ExplanationReport>)> {
    use rayon::prelude::*;
    warn_oov(docs);
    let reports: Vec<ExplanationReport> = docs
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let start = Instant::now();
            let set = compute_explanations(&d.document, &model.params, methods, opts)
                .with_context(|| format!("document {}", i + 1))?;
            let mut report = ExplanationReport::build(d, set, methods, opts);
            if timings {
                let ms = start.elapsed().as_secs_f64() * 1e3;
                report.metadata.timings_ms = Some([("explain".to_string(), ms)].into_iter().collect());
            }
            Ok(report)
        })
        .collect::<anyhow::Result<_>>()?;
    let mut json = if single {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    json.push('\n');
    Ok((json, reports))
}

fn explain_cmd(args: ExplainArgs) -> anyhow::Result<ExitCode> {
    let methods = parse_methods(&args.methods)?;
    let model = load_model(&args.input.model)?;
    let vocab = Vocabulary::new(&model.vocab, model.unk_id);
    let docs = read_documents(&args.input, &vocab)?;
    let opts = ExplainOptions {
        lime: args.lime.config(),
        gxi_word_only: args.gxi_word_only,
    };
    let (json, reports) = explain_documents(&model, &docs, &methods, &opts, args.timings, args.input.text.is_some())?;
    write_output(args.out.as_deref(), &json)?;
    if let Some(path) = &args.html {
        std::fs::write(path, render_heatmap(&reports)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn lime_cmd(args: LimeArgs) -> anyhow::Result<ExitCode> {
    let model = load_model(&args.input.model)?;
    let vocab = Vocabulary::new(&model.vocab, model.unk_id);
    let docs = read_documents(&args.input, &vocab)?;
    let opts = ExplainOptions {
        lime: args.lime.config(),
        gxi_word_only: false,
    };
    let methods = args.mode.methods();
    let (json, reports) = explain_documents(&model, &docs, &methods, &opts, false, args.input.text.is_some())?;
    write_output(args.out.as_deref(), &json)?;
    if let Some(path) = &args.html {
        std::fs::write(path, render_heatmap(&reports)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn compare_cmd(args: CompareArgs) -> anyhow::Result<ExitCode> {
    let model = load_model(&args.model)?;
    let vocab = Vocabulary::new(&model.vocab, model.unk_id);
    let docs = read_corpus(&args.corpus, &vocab)?;
    warn_oov(&docs);
    let opts = ExplainOptions {
        lime: args.lime.config(),
        gxi_word_only: args.gxi_word_only,
    };
    let comparisons = compare_corpus(&docs, &model.params, &opts)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &comparisons)?;
    write_output(args.out.as_deref(), &String::from_utf8(buf)?)?;
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let suite: Suite = args.suite.parse()?;
    let mut opts = VerifyOptions {
        seed: args.seed,
        ..VerifyOptions::default()
    };
    if let Some(Fault::Gradient) = args.inject_fault {
        opts.gradient = corrupted_gradient;
    }
    let report = run_suite(suite, &opts)?;
    for c in &report.checks {
        println!(
            "[{}] {:<45} error {:.3e}  tolerance {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.max_error,
            c.tolerance
        );
    }
    if let Some(path) = &args.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
