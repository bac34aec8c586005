//! Command-line driver. Every subcommand reads and writes JSONL corpora; reports are TSV or JSONL.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 I/O error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::{self, ChannelError, NoiseProfile};
use crate::codec::{self, CodecError, EnrichedRecord, SymbolTable};
use crate::corpus::{read_corpus, read_jsonl, write_jsonl, CorpusError, Utterance};
use crate::curriculum::{self, CurriculumError, StagePlan};
use crate::grammar::{Grammar, GrammarError, DEFAULT_MAX_DEPTH};
use crate::lm::{CorpusStats, LmConfig, LmError};
use crate::metrics::{self, EvalReport, MetricsError, UtteranceScore};
use crate::perturb::{self, PerturbError, SubstitutionPlan, SubstitutionStats, SyntaxPlan};
use crate::stats::{CorrelationReport, StatsError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Curriculum(#[from] CurriculumError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Corpus { source, .. } if matches!(**source, CorpusError::Io(_)) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Tsv,
    Jsonl,
}

#[derive(Debug, Parser)]
#[command(name = "slukit", version, about = "Corpus synthesis and scoring for slot-filling SLU")]
pub struct Cli {
    /// Random seed (overrides seeds in profile files)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Symbol table JSON (default: built-in table)
    #[arg(long, global = true)]
    symbols: Option<PathBuf>,
    /// Report format
    #[arg(long, global = true, value_enum, default_value = "tsv")]
    format: Format,
    /// Only print errors
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enumerate or sample annotated utterances from a grammar
    Generate(GenerateArgs),
    /// Annotated corpus -> enriched transcriptions
    Encode(EncodeArgs),
    /// Enriched transcriptions -> annotated corpus
    Decode(DecodeArgs),
    /// Mask out-of-slot words of enriched transcriptions
    Mask(IoArgs),
    /// Score a hypothesis corpus against a reference
    Score(ScoreArgs),
    /// Correlate two per-utterance scores, or run a noise sweep study
    Correlate(CorrelateArgs),
    /// Apply OOV substitution, syntactic variation or length splits
    #[command(subcommand)]
    Perturb(PerturbCommand),
    /// Pass a corpus through the noisy channel
    Corrupt(CorruptArgs),
    /// Language-model statistics
    #[command(subcommand)]
    Lm(LmCommand),
    /// Emit staged training slices and a manifest
    Curriculum(CurriculumArgs),
}

#[derive(Debug, Args)]
struct IoArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output file (default: standard output)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Grammar file (default: built-in demo grammar)
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Stop after this many distinct utterances (enumeration mode)
    #[arg(long)]
    limit: Option<usize>,
    /// Draw this many weighted random derivations instead of enumerating
    #[arg(long, conflicts_with = "limit")]
    sample: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    max_depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Write concept delimiters only
    #[arg(long)]
    concepts_only: bool,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Fail when any transcription needed repairs
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Annotated or enriched hypothesis corpus
    #[arg(long)]
    hyp: PathBuf,
    /// Group rows by this meta key (`noise` or `meta.noise`)
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long, default_value = "system")]
    model: String,
    /// Require slot values to match as well as labels
    #[arg(long)]
    with_values: bool,
    /// Also write per-utterance scores as JSONL
    #[arg(long)]
    scores_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    /// Per-utterance scores JSONL (from `score --scores-out`)
    #[arg(long, required_unless_present = "sweep")]
    scores: Option<PathBuf>,
    #[arg(long, default_value = "wer")]
    x: String,
    #[arg(long, default_value = "cer")]
    y: String,
    /// Noise profiles to simulate against `--ref` instead of reading scores
    #[arg(long, requires = "reference")]
    sweep: Option<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum PerturbCommand {
    /// Replace in-slot words of active categories with unseen synonyms
    Oov(OovArgs),
    /// Rewrite action verbs and add disfluencies
    Syntax(SyntaxArgs),
    /// Split by utterance length
    Split(SplitArgs),
}

#[derive(Debug, Args)]
struct OovArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Substitution plan (default: built-in demo plan)
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Restrict the plan to the cumulative categories of this step
    #[arg(long)]
    step: Option<u8>,
    /// Training corpus whose vocabulary replacements must avoid (default: grammar vocabulary)
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    grammar: Option<PathBuf>,
    /// Write the substitution statistics here (default: standard error)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SyntaxArgs {
    #[command(flatten)]
    io: IoArgs,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    step: Option<u8>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 7)]
    threshold: usize,
    #[arg(long)]
    long_out: PathBuf,
    #[arg(long)]
    short_out: PathBuf,
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Noise profile JSON (an object, or a list with `--pick`)
    #[arg(long)]
    profile: PathBuf,
    /// Profile name to use from a list
    #[arg(long)]
    pick: Option<String>,
}

#[derive(Debug, Subcommand)]
enum LmCommand {
    /// Train on one corpus and report size, perplexity and OOV of another
    Stats(LmStatsArgs),
}

#[derive(Debug, Args)]
struct LmStatsArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 3)]
    order: usize,
    #[arg(short, long, default_value_t = 1.0)]
    k: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurriculumArgs {
    #[arg(long)]
    input: PathBuf,
    /// Stage plan JSON (default: median/10 threshold, factor 3)
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    factor: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Record written beside every output file.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    args: Vec<String>,
    config_hash: String,
    seed: Option<u64>,
    outputs: Vec<String>,
}

struct Ctx {
    seed: Option<u64>,
    format: Format,
    symbols: SymbolTable,
    args: Vec<String>,
}

impl Ctx {
    fn manifest(&self, subcommand: &str, outputs: &[&Path]) -> Result<()> {
        self.manifest_seeded(subcommand, outputs, self.seed)
    }

    /// Like [`Ctx::manifest`] but records the seed actually used.
    fn manifest_seeded(&self, subcommand: &str, outputs: &[&Path], seed: Option<u64>) -> Result<()> {
        let Some(first) = outputs.first() else {
            return Ok(());
        };
        let config_hash = hex::encode(Sha256::digest(self.args.join("\u{0}").as_bytes()));
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            args: self.args.clone(),
            config_hash,
            seed,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        let path = manifest_path(first);
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|source| CliError::Io { path, source })
    }
}

/// `<output>.manifest.json`, or `manifest.json` inside an output directory.
pub fn manifest_path(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("run.manifest.json")
    } else {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn load_corpus(path: &Path) -> Result<Vec<Utterance>> {
    read_corpus(open(path)?).map_err(|source| CliError::Corpus {
        path: path.to_path_buf(),
        source: Box::new(source),
    })
}

fn load_records<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(open(path)?).map_err(|source| CliError::Corpus {
        path: path.to_path_buf(),
        source: Box::new(source),
    })
}

/// A hypothesis line: either a full annotation or an enriched transcription.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum HypRecord {
    Enriched(EnrichedRecord),
    Annotated(Utterance),
}

fn load_hypotheses(path: &Path, st: &SymbolTable) -> Result<Vec<Utterance>> {
    let records: Vec<HypRecord> = load_records(path)?;
    let mut out = Vec::with_capacity(records.len());
    for (i, r) in records.into_iter().enumerate() {
        out.push(match r {
            HypRecord::Enriched(e) => e.decode(st).utterance,
            HypRecord::Annotated(u) => {
                u.validate().map_err(|source| CliError::Corpus {
                    path: path.to_path_buf(),
                    source: Box::new(CorpusError::Invalid { line: i + 1, source }),
                })?;
                u
            }
        });
    }
    Ok(out)
}

/// Annotated corpus, or enriched records decoded into one.
fn load_enriched_or_annotated(path: &Path, st: &SymbolTable) -> Result<Vec<EnrichedRecord>> {
    let records: Vec<HypRecord> = load_records(path)?;
    records
        .into_iter()
        .map(|r| match r {
            HypRecord::Enriched(e) => Ok(e),
            HypRecord::Annotated(u) => Ok(EnrichedRecord::from_utterance(&u, st)?),
        })
        .collect()
}

fn load_grammar(path: Option<&Path>) -> Result<Grammar> {
    match path {
        Some(p) => Ok(Grammar::load(&read_text(p)?)?),
        None => Ok(Grammar::demo()),
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(bytes)
                .and_then(|_| lock.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn jsonl_bytes<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records).expect("writing to memory cannot fail");
    buf
}

fn write_jsonl_output<T: Serialize>(out: Option<&Path>, records: &[T]) -> Result<()> {
    write_output(out, &jsonl_bytes(records))
}

fn write_file_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_jsonl(BufWriter::new(file), records).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Info
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .try_init();
    log::set_max_level(level);
    match execute(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, argv: &[OsString]) -> Result<()> {
    let symbols = match &cli.symbols {
        Some(p) => parse_json(p)?,
        None => SymbolTable::default(),
    };
    let ctx = Ctx {
        seed: cli.seed,
        format: cli.format,
        symbols,
        args: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
    };
    match cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Encode(a) => encode(&ctx, a),
        Command::Decode(a) => decode(&ctx, a),
        Command::Mask(a) => mask(&ctx, a),
        Command::Score(a) => score(&ctx, a),
        Command::Correlate(a) => correlate(&ctx, a),
        Command::Perturb(PerturbCommand::Oov(a)) => perturb_oov(&ctx, a),
        Command::Perturb(PerturbCommand::Syntax(a)) => perturb_syntax(&ctx, a),
        Command::Perturb(PerturbCommand::Split(a)) => perturb_split(&ctx, a),
        Command::Corrupt(a) => corrupt(&ctx, a),
        Command::Lm(LmCommand::Stats(a)) => lm_stats(&ctx, a),
        Command::Curriculum(a) => run_curriculum(&ctx, a),
    }
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> Result<()> {
    let g = load_grammar(a.grammar.as_deref())?;
    let seed = a.sample.map(|_| ctx.seed.unwrap_or(0));
    let corpus = match a.sample {
        Some(n) => g.sample_with_depth(n, seed.unwrap_or(0), a.max_depth)?,
        None => g
            .enumerate_with_depth(a.limit.unwrap_or(usize::MAX), a.max_depth)?
            .collect::<std::result::Result<Vec<_>, _>>()?,
    };
    log::info!("generated {} utterances", corpus.len());
    write_jsonl_output(a.out.as_deref(), &corpus)?;
    ctx.manifest_seeded("generate", &a.out.iter().map(PathBuf::as_path).collect::<Vec<_>>(), seed)
}

fn encode(ctx: &Ctx, a: EncodeArgs) -> Result<()> {
    let corpus = load_corpus(&a.io.input)?;
    let records = corpus
        .iter()
        .map(|u| {
            let enriched = if a.concepts_only {
                codec::encode_concepts(u, &ctx.symbols)?
            } else {
                codec::encode(u, &ctx.symbols)?
            };
            Ok(EnrichedRecord {
                id: u.id.clone(),
                enriched,
                meta: u.meta.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl_output(a.io.out.as_deref(), &records)?;
    ctx.manifest("encode", &a.io.out.iter().map(PathBuf::as_path).collect::<Vec<_>>())
}

fn decode(ctx: &Ctx, a: DecodeArgs) -> Result<()> {
    let records: Vec<EnrichedRecord> = load_records(&a.io.input)?;
    let mut repaired = 0;
    let mut corpus = Vec::with_capacity(records.len());
    for r in &records {
        let d = r.decode(&ctx.symbols);
        if !d.diagnostics.is_empty() {
            repaired += 1;
            log::warn!("{}: {}", r.id, d.diagnostics);
        }
        corpus.push(d.utterance);
    }
    if repaired > 0 && a.strict {
        return Err(CliError::Usage(format!("{repaired} transcriptions needed repairs")));
    }
    write_jsonl_output(a.io.out.as_deref(), &corpus)?;
    ctx.manifest("decode", &a.io.out.iter().map(PathBuf::as_path).collect::<Vec<_>>())
}

fn mask(ctx: &Ctx, a: IoArgs) -> Result<()> {
    let records = load_enriched_or_annotated(&a.input, &ctx.symbols)?;
    let masked = records
        .into_iter()
        .map(|r| {
            Ok(EnrichedRecord {
                enriched: codec::mask_outside_slots(&r.enriched, &ctx.symbols)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", r.id)))?,
                ..r
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl_output(a.out.as_deref(), &masked)?;
    ctx.manifest("mask", &a.out.iter().map(PathBuf::as_path).collect::<Vec<_>>())
}

fn score(ctx: &Ctx, a: ScoreArgs) -> Result<()> {
    let refs = load_corpus(&a.reference)?;
    let hyps = load_hypotheses(&a.hyp, &ctx.symbols)?;
    let scores = metrics::score_corpus(&refs, &hyps, a.with_values)?;
    let group = a.group_by.as_deref().map(|g| g.strip_prefix("meta.").unwrap_or(g));
    let report = EvalReport::from_scores(&a.model, &scores, group);
    let bytes = match ctx.format {
        Format::Tsv => report.to_tsv().into_bytes(),
        Format::Jsonl => jsonl_bytes(&report.rows),
    };
    write_output(a.out.as_deref(), &bytes)?;
    let mut outputs: Vec<&Path> = a.out.iter().map(PathBuf::as_path).collect();
    if let Some(p) = &a.scores_out {
        write_file_jsonl(p, &scores)?;
        outputs.push(p);
    }
    ctx.manifest("score", &outputs)
}

fn correlate(ctx: &Ctx, a: CorrelateArgs) -> Result<()> {
    let bytes = if let Some(sweep_path) = &a.sweep {
        let reference = load_corpus(a.reference.as_deref().expect("clap enforces --ref"))?;
        let mut sweep: Vec<NoiseProfile> = parse_json(sweep_path)?;
        if let Some(seed) = ctx.seed {
            for p in &mut sweep {
                p.seed = seed;
            }
        }
        let rows = channel::wer_cer_study(&reference, &sweep, &ctx.symbols)?;
        match ctx.format {
            Format::Tsv => channel::study_to_tsv(&rows).into_bytes(),
            Format::Jsonl => jsonl_bytes(&rows),
        }
    } else {
        let path = a.scores.as_deref().expect("clap enforces --scores");
        let scores: Vec<UtteranceScore> = load_records(path)?;
        let pick = |name: &str| -> Result<Vec<f64>> {
            scores
                .iter()
                .map(|s| {
                    s.field(name)
                        .ok_or_else(|| CliError::Usage(format!("unknown score field `{name}`")))
                })
                .collect()
        };
        let report = CorrelationReport::compute(&pick(&a.x)?, &pick(&a.y)?)?;
        match ctx.format {
            Format::Tsv => report.to_block(&format!("{}~{}", a.x, a.y)).into_bytes(),
            Format::Jsonl => jsonl_bytes(&[report]),
        }
    };
    write_output(a.out.as_deref(), &bytes)?;
    ctx.manifest("correlate", &a.out.iter().map(PathBuf::as_path).collect::<Vec<_>>())
}

fn perturb_oov(ctx: &Ctx, a: OovArgs) -> Result<()> {
    let corpus = load_corpus(&a.io.input)?;
    let grammar = load_grammar(a.grammar.as_deref())?;
    let mut plan = match &a.plan {
        Some(p) => parse_json(p)?,
        None => SubstitutionPlan::demo(),
    };
    if let Some(step) = a.step {
        plan = plan.at_step(step)?;
    }
    let vocab = match &a.train {
        Some(p) => load_corpus(p)?
            .into_iter()
            .flat_map(|u| u.tokens)
            .collect(),
        None => grammar.vocabulary(),
    };
    let (out, stats) = perturb::apply_oov(&corpus, &plan, &vocab, grammar.semantic_space())?;
    write_jsonl_output(a.io.out.as_deref(), &out)?;
    let report = match ctx.format {
        Format::Tsv => format!("{}\n{}\n", SubstitutionStats::TSV_HEADER, stats.to_tsv_row()).into_bytes(),
        Format::Jsonl => jsonl_bytes(&[stats]),
    };
    match &a.report {
        Some(p) => write_output(Some(p), &report)?,
        None => log::info!("{}", String::from_utf8_lossy(&report).trim_end()),
    }
    let mut outputs: Vec<&Path> = a.io.out.iter().map(PathBuf::as_path).collect();
    outputs.extend(a.report.as_deref());
    ctx.manifest("perturb oov", &outputs)
}

fn perturb_syntax(ctx: &Ctx, a: SyntaxArgs) -> Result<()> {
    let corpus = load_corpus(&a.io.input)?;
    let mut plan = match &a.plan {
        Some(p) => parse_json(p)?,
        None => SyntaxPlan::demo(),
    };
    if let Some(step) = a.step {
        plan = plan.with_step(step)?;
    }
    let out = perturb::apply_syntax(&corpus, &plan)?;
    write_jsonl_output(a.io.out.as_deref(), &out)?;
    ctx.manifest("perturb syntax", &a.io.out.iter().map(PathBuf::as_path).collect::<Vec<_>>())
}

fn perturb_split(ctx: &Ctx, a: SplitArgs) -> Result<()> {
    let corpus = load_corpus(&a.input)?;
    let (long, short) = perturb::split_by_length(&corpus, a.threshold);
    log::info!("{} long, {} short", long.len(), short.len());
    write_file_jsonl(&a.long_out, &long)?;
    write_file_jsonl(&a.short_out, &short)?;
    ctx.manifest("perturb split", &[&a.long_out, &a.short_out])
}

fn corrupt(ctx: &Ctx, a: CorruptArgs) -> Result<()> {
    let records = load_enriched_or_annotated(&a.io.input, &ctx.symbols)?;
    let value: serde_json::Value = parse_json(&a.profile)?;
    let json_err = |source| CliError::Json {
        path: a.profile.clone(),
        source,
    };
    let mut profile: NoiseProfile = if value.is_array() {
        let list: Vec<NoiseProfile> = serde_json::from_value(value).map_err(json_err)?;
        let name = a
            .pick
            .as_deref()
            .ok_or_else(|| CliError::Usage("profile file holds a list; choose one with --pick".into()))?;
        list.into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| CliError::Usage(format!("no profile named `{name}`")))?
    } else {
        serde_json::from_value(value).map_err(json_err)?
    };
    if let Some(seed) = ctx.seed {
        profile.seed = seed;
    }
    let out = channel::corrupt(&records, &profile, &ctx.symbols)?;
    write_jsonl_output(a.io.out.as_deref(), &out)?;
    ctx.manifest_seeded(
        "corrupt",
        &a.io.out.iter().map(PathBuf::as_path).collect::<Vec<_>>(),
        Some(profile.seed),
    )
}

fn lm_stats(ctx: &Ctx, a: LmStatsArgs) -> Result<()> {
    let tokens = |c: Vec<Utterance>| c.into_iter().map(|u| u.tokens).collect::<Vec<_>>();
    let train = tokens(load_hypotheses(&a.train, &ctx.symbols)?);
    let test = tokens(load_hypotheses(&a.test, &ctx.symbols)?);
    let config = LmConfig {
        order: a.order,
        k: a.k,
        ..LmConfig::default()
    };
    let stats = CorpusStats::compute(&train, &test, config)?;
    let bytes = match ctx.format {
        Format::Tsv => format!("{}\n{}\n", CorpusStats::TSV_HEADER, stats.to_tsv_row()).into_bytes(),
        Format::Jsonl => jsonl_bytes(&[stats]),
    };
    write_output(a.out.as_deref(), &bytes)?;
    ctx.manifest("lm stats", &a.out.iter().map(PathBuf::as_path).collect::<Vec<_>>())
}

fn run_curriculum(ctx: &Ctx, a: CurriculumArgs) -> Result<()> {
    let corpus = load_corpus(&a.input)?;
    let mut plan: StagePlan = match &a.plan {
        Some(p) => parse_json(p)?,
        None => StagePlan::default(),
    };
    if let Some(t) = a.threshold {
        plan.concept_frequency_threshold = Some(t);
    }
    if let Some(f) = a.factor {
        plan.duplication_factor = f;
    }
    let stages = curriculum::stage_emit(&corpus, &plan, &ctx.symbols)?;
    fs::create_dir_all(&a.out_dir).map_err(|source| CliError::Io {
        path: a.out_dir.clone(),
        source,
    })?;
    for (name, records) in stages.by_name() {
        write_file_jsonl(&a.out_dir.join(format!("{name}.jsonl")), records)?;
    }
    let manifest_file = a.out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&stages.manifest).expect("manifest serializes");
    fs::write(&manifest_file, text + "\n").map_err(|source| CliError::Io {
        path: manifest_file.clone(),
        source,
    })?;
    ctx.manifest("curriculum", &[a.out_dir.as_path()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        let cases: &[&[&str]] = &[
            &["slukit", "generate", "--limit", "3"],
            &["slukit", "generate", "--sample", "3", "--seed", "4"],
            &["slukit", "encode", "--input", "a"],
            &["slukit", "decode", "--input", "a", "--strict"],
            &["slukit", "mask", "--input", "a"],
            &["slukit", "score", "--ref", "r", "--hyp", "h", "--group-by", "meta.noise"],
            &["slukit", "correlate", "--x", "wer", "--y", "cer", "--scores", "s"],
            &["slukit", "correlate", "--sweep", "s", "--ref", "r"],
            &["slukit", "perturb", "oov", "--input", "a", "--step", "2"],
            &["slukit", "perturb", "syntax", "--input", "a"],
            &["slukit", "perturb", "split", "--input", "a", "--long-out", "l", "--short-out", "s"],
            &["slukit", "corrupt", "--input", "a", "--profile", "p", "--seed", "1"],
            &["slukit", "lm", "stats", "--train", "a", "--test", "b"],
            &["slukit", "curriculum", "--input", "a", "--out-dir", "d"],
            &["slukit", "--quiet", "--format", "jsonl", "score", "--ref", "r", "--hyp", "h"],
        ];
        for c in cases {
            Cli::try_parse_from(*c).unwrap_or_else(|e| panic!("{c:?}: {e}"));
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["slukit", "frobnicate"]), 1);
        assert_eq!(run(["slukit", "generate", "--bogus"]), 1);
        assert_eq!(run(["slukit", "correlate", "--x", "wer"]), 1);
    }

    #[test]
    fn missing_input_exits_two() {
        assert_eq!(run(["slukit", "--quiet", "encode", "--input", "/nonexistent/c.jsonl"]), 2);
    }

    #[test]
    fn manifest_paths() {
        assert_eq!(manifest_path(Path::new("x/c.jsonl")), PathBuf::from("x/c.jsonl.manifest.json"));
    }
}
