//! Command-line front end. Each subcommand reads plain TSV files and writes
//! plain TSV (or JSON for reports); progress and statistics go to stderr.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use polyipa_core::config::PipelineConfig;
use polyipa_core::eval::{stratify, EvalItem, EvalReport};
use polyipa_core::ipa::{
    normalize_text, strip_diacritics_tones_with, IpaString, TranscriptionSystem,
};
use polyipa_core::lexicon::tsv::{parse_raw, read_entries, read_lexicon, write_lexicon};
use polyipa_core::lexicon::{clean, extract_ipa_pairs, lang_script_tag};
use polyipa_core::mining::{
    filter_by_feature_distance, filter_generation_by_cer, mine_soundalikes, parse_embeddings,
    write_pairs, IndexMode, DEFAULT_MAX_CER,
};
use polyipa_core::p2g::{
    decode_all, load_external_candidates, write_candidates, JointModel, TrainingPair,
};
use polyipa_core::resources::Resources;
use polyipa_core::split::{
    stratified_split, upsample_generate, variants_from_pairs, write_example,
};

/// Exit status for bad input, bad usage or failed validation.
pub const EXIT_INPUT: u8 = 1;
/// Exit status for failures that are not the caller's fault.
pub const EXIT_INTERNAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "polyipa",
    version,
    about = "Multilingual phoneme-to-grapheme toolkit"
)]
pub struct Cli {
    /// Configuration file of `key = value` lines; POLYIPA_* variables override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalize and filter a raw lexicon, printing a cleaning report
    Clean(CleanArgs),
    /// Convert X-SAMPA or ARPABET transcriptions to IPA
    Convert(ConvertArgs),
    /// Remove diacritics and tones from transcriptions
    Strip(StripArgs),
    /// List pairs of distinct transcriptions of the same word
    Pairs(PairsArgs),
    /// Mine soundalike entry pairs by feature edit distance
    Mine(MineArgs),
    /// Keep generated transcriptions close to their originals
    Filter(FilterArgs),
    /// Split a lexicon into language-stratified train, eval and test sets
    Split(SplitArgs),
    /// Expand a training set with stripped and soundalike variants
    Augment(AugmentArgs),
    /// Train the joint-sequence model
    Train(TrainArgs),
    /// Produce n-best spellings for transcriptions
    Predict(PredictArgs),
    /// Score candidate spellings against a test set
    Eval(EvalArgs),
    /// Render a saved evaluation report
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Raw lexicon: lang<TAB>grapheme<TAB>ipa
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Cleaned lexicon (stdout if omitted)
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Write the JSON report here instead of stderr
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Notation {
    Ipa,
    Xsampa,
    Arpabet,
}

impl From<Notation> for TranscriptionSystem {
    fn from(n: Notation) -> Self {
        match n {
            Notation::Ipa => TranscriptionSystem::Ipa,
            Notation::Xsampa => TranscriptionSystem::XSampa,
            Notation::Arpabet => TranscriptionSystem::Arpabet,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Source notation
    #[arg(long, value_enum)]
    pub from: Notation,
    /// A single transcription to convert
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub text: Option<String>,
    /// Lexicon whose third column is in the source notation
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StripArgs {
    /// A single transcription to strip
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub text: Option<String>,
    /// Lexicon whose transcriptions are stripped
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Rows lang<TAB>grapheme<TAB>ipa_a<TAB>ipa_b
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Nearest neighbours scored per entry
    #[arg(long)]
    pub k: Option<usize>,
    /// Largest feature edit distance kept
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Drop pairs whose swap already exists in the lexicon
    #[arg(long)]
    pub exclude_existing: bool,
    /// Precomputed vectors, id<TAB>v1,v2,... with ids the 0-based line
    /// positions of the deduplicated lexicon
    #[arg(long, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Use an approximate inverted-file index with this many lists
    #[arg(long)]
    pub ivf_lists: Option<usize>,
    /// Lists scanned per query in the approximate index
    #[arg(long, default_value_t = 8)]
    pub ivf_probes: usize,
    /// Seed for the approximate index's clustering
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Rows original<TAB>generated; further columns are kept
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Largest character error rate kept
    #[arg(long, default_value_t = DEFAULT_MAX_CER)]
    pub max_cer: f64,
    /// Also require the stripped normalized feature distance to be below this
    #[arg(long)]
    pub max_feature_distance: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Test set size
    #[arg(long)]
    pub test: Option<usize>,
    /// Eval set size
    #[arg(long)]
    pub eval: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Most entries one language may give to each held-out set
    #[arg(long)]
    pub per_lang_cap: Option<usize>,
    /// Directory receiving train.tsv, eval.tsv and test.tsv
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long, value_name = "FILE")]
    pub train: PathBuf,
    /// Mined pairs as written by `mine`
    #[arg(long, value_name = "FILE")]
    pub pairs: Option<PathBuf>,
    /// Minimum original:augmented emissions per entry
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Examples must have fewer tokens than this
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training lexicon; repeated rows count repeatedly
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// N-gram order
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Lexicon whose transcriptions are spelled; graphemes are ignored
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "ipa",
        conflicts_with = "ipa"
    )]
    pub input: Option<PathBuf>,
    /// A single transcription
    #[arg(long, requires = "tag")]
    pub ipa: Option<String>,
    /// Tag for --ipa, such as <de> or <sr_Cyrl>
    #[arg(long)]
    pub tag: Option<String>,
    /// Candidates per input
    #[arg(long)]
    pub n_best: Option<usize>,
    /// Beam width; three times --n-best by default
    #[arg(long)]
    pub beam_width: Option<usize>,
    /// Rows tag<TAB>ipa<TAB>rank<TAB>grapheme<TAB>log_score
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub test: PathBuf,
    /// Candidate rows as written by `predict`
    #[arg(long, value_name = "FILE")]
    pub candidates: PathBuf,
    /// Comma-separated cutoffs for top-N word error
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub n: Vec<usize>,
    /// JSON report (stdout if omitted)
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Per-language CSV
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON report written by `eval`
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

/// Marks an error as internal rather than the caller's.
#[derive(Debug)]
pub struct Internal(pub String);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Internal {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<Internal>()) {
        EXIT_INTERNAL
    } else {
        EXIT_INPUT
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

struct Output {
    inner: BufWriter<Box<dyn Write>>,
    name: String,
}

impl Output {
    fn open(path: Option<&Path>) -> Result<Output> {
        let (sink, name): (Box<dyn Write>, String) = match path {
            Some(p) => (
                Box::new(
                    File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
                ),
                p.display().to_string(),
            ),
            None => (Box::new(io::stdout()), "stdout".into()),
        };
        Ok(Output {
            inner: BufWriter::new(sink),
            name,
        })
    }

    /// Run a writer against this output, marking I/O failures internal.
    fn write(&mut self, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
        f(&mut self.inner).map_err(|e| Internal(format!("writing {}: {e}", self.name)))?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.inner
            .flush()
            .map_err(|e| Internal(format!("writing {}: {e}", self.name)))?;
        Ok(())
    }
}

fn write_file(path: Option<&Path>, text: &str) -> Result<()> {
    let mut out = Output::open(path)?;
    out.write(|w| w.write_all(text.as_bytes()))?;
    out.finish()
}

pub fn run(cli: Cli) -> Result<()> {
    let config =
        PipelineConfig::from_env(cli.config.as_deref()).context("loading configuration")?;
    let res = config.resources().context("loading data tables")?;
    match cli.command {
        Command::Clean(a) => run_clean(a, &res),
        Command::Convert(a) => run_convert(a, &res),
        Command::Strip(a) => run_strip(a, &res),
        Command::Pairs(a) => run_pairs(a, &res),
        Command::Mine(a) => run_mine(a, &config, &res),
        Command::Filter(a) => run_filter(a, &res),
        Command::Split(a) => run_split(a, &config, &res),
        Command::Augment(a) => run_augment(a, &config, &res),
        Command::Train(a) => run_train(a, &config, &res),
        Command::Predict(a) => run_predict(a, &config, &res),
        Command::Eval(a) => run_eval(a, &res),
        Command::Report(a) => run_report(a),
    }
}

fn run_clean(a: CleanArgs, res: &Resources) -> Result<()> {
    let raw = parse_raw(&read(&a.input)?);
    let (lex, report) = clean(&raw, res);
    let mut out = Output::open(a.output.as_deref())?;
    out.write(|w| write_lexicon(w, &lex))?;
    out.finish()?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Internal(e.to_string()))? + "\n";
    match a.report {
        Some(p) => write_file(Some(&p), &json),
        None => {
            eprint!("{json}");
            Ok(())
        }
    }
}

fn run_convert(a: ConvertArgs, res: &Resources) -> Result<()> {
    let system = TranscriptionSystem::from(a.from);
    let convert = |s: &str| -> Result<IpaString> {
        Ok(match res.chart(system) {
            Some(chart) => chart.convert(system, s, &res.inventory)?,
            None => IpaString::parse_with(&normalize_text(s), &res.inventory)?,
        })
    };
    let mut out = Output::open(a.output.as_deref())?;
    if let Some(text) = a.text {
        let ipa = convert(&text)?;
        out.write(|w| writeln!(w, "{ipa}"))?;
        return out.finish();
    }
    let path = a.input.expect("clap requires --input without --text");
    for (idx, line) in read(&path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut f: Vec<String> = line.split('\t').map(str::to_string).collect();
        if f.len() < 3 {
            bail!(
                "{} line {}: expected lang<TAB>grapheme<TAB>transcription",
                path.display(),
                idx + 1
            );
        }
        f[2] = convert(&f[2])
            .with_context(|| format!("{} line {}", path.display(), idx + 1))?
            .to_string();
        out.write(|w| writeln!(w, "{}", f.join("\t")))?;
    }
    out.finish()
}

fn run_strip(a: StripArgs, res: &Resources) -> Result<()> {
    let mut out = Output::open(a.output.as_deref())?;
    if let Some(text) = a.text {
        let ipa = IpaString::parse_with(&normalize_text(&text), &res.inventory)?;
        let stripped = strip_diacritics_tones_with(&ipa, &res.inventory);
        out.write(|w| writeln!(w, "{stripped}"))?;
        return out.finish();
    }
    let path = a.input.expect("clap requires --input without --text");
    let entries = read_entries(&read(&path)?, res).with_context(|| path.display().to_string())?;
    for mut e in entries {
        e.ipa = strip_diacritics_tones_with(&e.ipa, &res.inventory);
        out.write(|w| writeln!(w, "{}\t{}\t{}", e.lang, e.grapheme, e.ipa))?;
    }
    out.finish()
}

fn run_pairs(a: PairsArgs, res: &Resources) -> Result<()> {
    let lex = read_lexicon(&read(&a.input)?, res).with_context(|| a.input.display().to_string())?;
    let pairs = extract_ipa_pairs(&lex);
    let mut out = Output::open(a.output.as_deref())?;
    for p in &pairs {
        out.write(|w| writeln!(w, "{}\t{}\t{}\t{}", p.lang, p.grapheme, p.ipa_a, p.ipa_b))?;
    }
    out.finish()?;
    eprintln!("{} pairs", pairs.len());
    Ok(())
}

fn run_mine(a: MineArgs, config: &PipelineConfig, res: &Resources) -> Result<()> {
    let lex = read_lexicon(&read(&a.input)?, res).with_context(|| a.input.display().to_string())?;
    let mut params = config.mining;
    if let Some(k) = a.k {
        params.k = k;
    }
    if let Some(t) = a.threshold {
        params.threshold = t;
    }
    params.exclude_existing |= a.exclude_existing;
    if let Some(lists) = a.ivf_lists {
        params.index = IndexMode::Ivf {
            lists,
            probes: a.ivf_probes,
            seed: a.seed,
        };
    }
    let embeddings = match &a.embeddings {
        Some(p) => Some(parse_embeddings(&read(p)?).with_context(|| p.display().to_string())?),
        None => None,
    };
    let pairs = mine_soundalikes(&lex, &params, &config.distance, embeddings, res)?;
    let mut out = Output::open(a.output.as_deref())?;
    out.write(|w| write_pairs(w, &lex, &pairs))?;
    out.finish()?;
    eprintln!("{} entries, {} pairs", lex.len(), pairs.len());
    Ok(())
}

fn run_filter(a: FilterArgs, res: &Resources) -> Result<()> {
    let text = read(&a.input)?;
    let mut out = Output::open(a.output.as_deref())?;
    let (mut kept, mut total) = (0usize, 0usize);
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{} line {}", a.input.display(), idx + 1);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 {
            bail!("{}: expected original<TAB>generated", at());
        }
        let parse =
            |s: &str| IpaString::parse_with(&normalize_text(s), &res.inventory).with_context(at);
        let (original, generated) = (parse(f[0])?, parse(f[1])?);
        total += 1;
        let mut keep =
            filter_generation_by_cer(&original, &generated, a.max_cer).with_context(at)?;
        if keep {
            if let Some(max) = a.max_feature_distance {
                keep =
                    filter_by_feature_distance(&original, &generated, max, res).with_context(at)?;
            }
        }
        if keep {
            kept += 1;
            out.write(|w| writeln!(w, "{line}"))?;
        }
    }
    out.finish()?;
    eprintln!("kept {kept} of {total}");
    Ok(())
}

fn run_split(a: SplitArgs, config: &PipelineConfig, res: &Resources) -> Result<()> {
    let lex = read_lexicon(&read(&a.input)?, res).with_context(|| a.input.display().to_string())?;
    let mut spec = config.split.clone();
    if let Some(n) = a.test {
        spec.test_size = n;
    }
    if let Some(n) = a.eval {
        spec.eval_size = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if a.per_lang_cap.is_some() {
        spec.per_lang_cap = a.per_lang_cap;
    }
    let split = stratified_split(&lex, &spec)?;
    std::fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    for (name, set) in [
        ("train", &split.train),
        ("eval", &split.eval),
        ("test", &split.test),
    ] {
        let mut out = Output::open(Some(&a.out_dir.join(format!("{name}.tsv"))))?;
        out.write(|w| write_lexicon(w, set.iter()))?;
        out.finish()?;
    }
    eprintln!(
        "train {}, eval {}, test {}",
        split.train.len(),
        split.eval.len(),
        split.test.len()
    );
    Ok(())
}

fn run_augment(a: AugmentArgs, config: &PipelineConfig, res: &Resources) -> Result<()> {
    let train =
        read_entries(&read(&a.train)?, res).with_context(|| a.train.display().to_string())?;
    let variants = match &a.pairs {
        Some(p) => variants_from_pairs(&read(p)?, &res.inventory)
            .with_context(|| p.display().to_string())?,
        None => Default::default(),
    };
    let mut spec = config.split.clone();
    if let Some(r) = a.ratio {
        spec.min_original_ratio = r;
    }
    if let Some(m) = a.max_tokens {
        spec.max_tokens = m;
    }
    spec.validate()?;
    let mut gen = upsample_generate(&train, &variants, &spec, &res.scripts, &res.inventory);
    let mut out = Output::open(a.out.as_deref())?;
    for ex in gen.by_ref() {
        out.write(|w| write_example(w, &ex))?;
    }
    out.finish()?;
    let s = gen.stats();
    eprintln!(
        "emitted {}: {} original, {} cleaned, {} similar, {} repeat; filtered {} long, {} duplicate",
        s.emitted(),
        s.originals,
        s.cleaned_variants,
        s.similar_variants,
        s.repeats,
        s.filtered_length,
        s.filtered_duplicate
    );
    Ok(())
}

fn run_train(a: TrainArgs, config: &PipelineConfig, res: &Resources) -> Result<()> {
    let entries =
        read_entries(&read(&a.input)?, res).with_context(|| a.input.display().to_string())?;
    let data: Vec<TrainingPair> = entries
        .iter()
        .map(|e| TrainingPair {
            tag: lang_script_tag(e, &res.scripts),
            ipa: e.ipa.clone(),
            grapheme: e.grapheme.clone(),
        })
        .collect();
    let (model, stats) = JointModel::train(&data, a.order.unwrap_or(config.order))?;
    write_file(Some(&a.model), &model.to_text())?;
    eprintln!(
        "aligned {}, skipped {}, {} tokens, {} tags",
        stats.aligned,
        stats.skipped,
        model.vocab_size(),
        model.tags().len()
    );
    Ok(())
}

fn run_predict(a: PredictArgs, config: &PipelineConfig, res: &Resources) -> Result<()> {
    let model =
        JointModel::from_text(&read(&a.model)?).with_context(|| a.model.display().to_string())?;
    let n_best = a.n_best.unwrap_or(config.n_best);
    let width = a.beam_width.or(config.beam_width);
    let inputs: Vec<(String, IpaString)> = match (&a.input, &a.ipa) {
        (Some(path), _) => {
            let entries =
                read_entries(&read(path)?, res).with_context(|| path.display().to_string())?;
            let mut seen = std::collections::HashSet::new();
            entries
                .iter()
                .map(|e| (lang_script_tag(e, &res.scripts), e.ipa.clone()))
                .filter(|k| seen.insert(k.clone()))
                .collect()
        }
        (None, Some(ipa)) => {
            let tag = a.tag.clone().expect("clap requires --tag with --ipa");
            vec![(
                tag,
                IpaString::parse_with(&normalize_text(ipa), &res.inventory)?,
            )]
        }
        (None, None) => unreachable!("clap requires --input or --ipa"),
    };
    let decoded = decode_all(&model, &inputs, n_best, width);
    let mut out = Output::open(a.output.as_deref())?;
    let mut reported = false;
    let (mut unknown_tags, mut fallbacks, mut deleted) = (0, 0, 0);
    for ((tag, ipa), d) in inputs.iter().zip(decoded) {
        let d = d.with_context(|| format!("decoding {tag} {ipa}"))?;
        if !reported {
            eprintln!("beam width {}", d.beam_width);
            reported = true;
        }
        unknown_tags += usize::from(d.unknown_tag);
        fallbacks += d.base_fallbacks;
        deleted += d.deleted;
        out.write(|w| write_candidates(w, tag, ipa.as_str(), &d.candidates))?;
    }
    out.finish()?;
    eprintln!(
        "{} inputs; {unknown_tags} with unseen tags, {fallbacks} base-symbol fallbacks, {deleted} deleted segments",
        inputs.len()
    );
    Ok(())
}

fn run_eval(a: EvalArgs, res: &Resources) -> Result<()> {
    let test = read_entries(&read(&a.test)?, res).with_context(|| a.test.display().to_string())?;
    let mut cands = load_external_candidates(&read(&a.candidates)?)
        .with_context(|| a.candidates.display().to_string())?;
    let mut missing = BTreeMap::new();
    let mut items = Vec::with_capacity(test.len());
    for e in &test {
        let tag = lang_script_tag(e, &res.scripts);
        let key = (tag.clone(), e.ipa.as_str().to_string());
        let candidates = match cands.get(&key) {
            Some(c) => c.clone(),
            None => {
                *missing.entry(e.lang.clone()).or_insert(0usize) += 1;
                continue;
            }
        };
        items.push(EvalItem {
            lang: e.lang.clone(),
            tag,
            ipa: e.ipa.clone(),
            reference: e.grapheme.clone(),
            candidates,
        });
    }
    if !missing.is_empty() {
        let total: usize = missing.values().sum();
        bail!("{total} test entries have no candidates (by language: {missing:?})");
    }
    cands.clear();
    let report = stratify(&items, &a.n)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Internal(e.to_string()))? + "\n";
    write_file(a.report.as_deref(), &json)?;
    if let Some(csv) = &a.csv {
        write_file(Some(csv), &report.to_csv())?;
    }
    eprintln!("{}", summary(&report));
    Ok(())
}

fn summary(r: &EvalReport) -> String {
    let o = &r.overall;
    let mut s = format!(
        "{} items: CER {:.4}, BLEU {:.4}, exact {:.4}",
        o.n_samples, o.cer_mean, o.bleu_mean, o.exact_match_rate
    );
    for t in &o.top_n_wer {
        s.push_str(&format!(", top-{} WER {:.4}", t.n, t.wer.mean));
    }
    s
}

fn table(r: &EvalReport) -> String {
    let mut head = format!(
        "{:<10} {:>8} {:>8} {:>8} {:>8}",
        "lang", "n", "cer", "bleu", "exact"
    );
    for t in &r.overall.top_n_wer {
        head.push_str(&format!(" {:>9}", format!("top{}_wer", t.n)));
    }
    let mut lines = vec![head];
    for row in r.languages.iter().chain(std::iter::once(&r.overall)) {
        let mut l = format!(
            "{:<10} {:>8} {:>8.4} {:>8.4} {:>8.4}",
            row.lang, row.n_samples, row.cer_mean, row.bleu_mean, row.exact_match_rate
        );
        for t in &row.top_n_wer {
            l.push_str(&format!(" {:>9.4}", t.wer.mean));
        }
        lines.push(l);
    }
    lines.join("\n") + "\n"
}

fn run_report(a: ReportArgs) -> Result<()> {
    let report: EvalReport = serde_json::from_str(&read(&a.report)?)
        .with_context(|| format!("{} is not an evaluation report", a.report.display()))?;
    let text = match a.format {
        ReportFormat::Table => table(&report),
        ReportFormat::Csv => report.to_csv(),
    };
    write_file(a.output.as_deref(), &text)
}
