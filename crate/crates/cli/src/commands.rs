use crate::CliError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use humor_core::annotate::{annotate_joke, attach_conllu, read_conllu_file, write_conllu, AnnotatedJoke, PosLexicon};
use humor_core::classify::{evaluate, train, Dataset, Model, ModelKind, SvmKernel, TrainConfig};
use humor_core::corpus::{
    clean_text, load_corpus, split_setup_punchline, tokenize, CorpusFormat, Joke, Level, PunctMode, TokenSeq,
};
use humor_core::eval::{draw_items, load_sessions, report, run_session, Clock, SessionStore};
use humor_core::features::{export_feature_table, read_feature_table, FeatureTable, FEATURE_NAMES};
use humor_core::infill::{hybrid_generate, BaselineInfiller, InfillRequest, Infiller, RemoteInfiller, DEFAULT_TOP_K};
use humor_core::lexicons::LexiconSet;
use humor_core::markov::NGramModel;
use humor_core::neural::{self, loss_history_csv, make_windows, NeuralConfig, NeuralLM, Vocab};
use humor_core::template::{extract_template, join_with_spacing, Template, WeightConfig, DEFAULT_PLACEHOLDER};
use log::{info, warn};
use serde_json::json;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Parser, Debug)]
#[command(
    name = "humor",
    version,
    about = "Humor classification and joke generation toolkit",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON object of flag values keyed by long flag name.
    #[arg(long, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Output path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DocInput {
    /// Corpus file, JSONL or CSV by extension.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Gold CoNLL-U parses; heuristic annotation is used when absent.
    #[arg(long)]
    pub conllu: Option<PathBuf>,
    /// Extra `word<TAB>UPOS` entries for the heuristic annotator.
    #[arg(long)]
    pub pos_lexicon: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TemplateOptions {
    /// Directory with slang.txt, antonyms.tsv, connectives.txt, polarity.tsv and freq.txt.
    #[arg(long)]
    pub lexicons: PathBuf,
    /// JSON file overriding dependency weights, scale or mask strategy.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfillerKind {
    Baseline,
    Remote,
}

#[derive(Args, Debug, Clone)]
pub struct InfillOptions {
    /// Fill source: local frequency baseline or the masked-LM service.
    #[arg(long, value_enum, default_value_t = InfillerKind::Baseline)]
    pub infiller: InfillerKind,
    /// Masked-LM service base URL; defaults to $HUMOR_MLM_URL.
    #[arg(long)]
    pub url: Option<String>,
    /// Candidates requested per mask.
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    pub top_k: usize,
    /// Per-request timeout for the remote infiller.
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelArg {
    Word,
    Char,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::Word => Level::Word,
            LevelArg::Char => Level::Char,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelArg {
    Logreg,
    Gnb,
    Svm,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelArg {
    Linear,
    Rbf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockArg {
    Step,
    Wall,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Clean a raw corpus and split each joke into setup and punchline.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
    },
    /// Annotate jokes and write CoNLL-U.
    Annotate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        docs: DocInput,
    },
    /// Export the feature table and per-feature histograms to a directory.
    Features {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        docs: DocInput,
        /// Lexicon directory, as for `template`.
        #[arg(long)]
        lexicons: PathBuf,
    },
    /// Train a classifier on a feature table; prints held-out metrics.
    Train {
        #[command(flatten)]
        common: Common,
        /// features.csv written by `features`.
        #[arg(long)]
        features: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelArg::Svm)]
        model: ModelArg,
        /// SVM kernel; ignored by the other models.
        #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
        kernel: KernelArg,
        /// Share of documents held out for evaluation.
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Training epochs; model default when omitted.
        #[arg(long)]
        epochs: Option<usize>,
        /// Step size for logistic regression.
        #[arg(long)]
        learning_rate: Option<f64>,
        /// L2 strength for logistic regression and the SVM.
        #[arg(long)]
        regularization: Option<f64>,
        /// RBF kernel width.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Predict labels for a feature table as CSV.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Fit an n-gram model.
    MarkovTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        /// Order of the model.
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_enum, default_value_t = LevelArg::Word)]
        level: LevelArg,
        /// Keep letter case instead of lowercasing.
        #[arg(long)]
        keep_case: bool,
        /// Drop punctuation tokens.
        #[arg(long)]
        drop_punct: bool,
    },
    /// Sample from an n-gram model, one output per line.
    MarkovGen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 50)]
        max_tokens: usize,
        /// Seed text the output starts from.
        #[arg(long)]
        prompt: Option<String>,
        /// Back off to shorter contexts when a context was never seen.
        #[arg(long)]
        backoff: bool,
    },
    /// Train the LSTM language model.
    LstmTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        /// Most frequent words kept; the rest map to <unk>.
        #[arg(long)]
        max_vocab: Option<usize>,
        #[arg(long)]
        embed_dim: Option<usize>,
        #[arg(long)]
        hidden_dim: Option<usize>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        sequence_length: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Per-epoch loss history as CSV.
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// Generate from a trained LSTM; one JSON object per line.
    LstmGen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        /// Seed text the output starts from.
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 30)]
        max_tokens: usize,
        /// 0 selects greedy decoding.
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
    },
    /// Extract masked templates as JSONL.
    Template {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        docs: DocInput,
        #[command(flatten)]
        template: TemplateOptions,
        /// Token written in place of each masked word.
        #[arg(long, default_value = DEFAULT_PLACEHOLDER)]
        placeholder: String,
    },
    /// Fill templates produced by `template`.
    Infill {
        #[command(flatten)]
        common: Common,
        /// JSONL written by `template`.
        #[arg(long)]
        templates: PathBuf,
        /// Corpus supplying the baseline vocabulary.
        #[arg(long = "vocab-in", value_name = "PATH")]
        vocab_in: Option<PathBuf>,
        /// Gold parses for the vocabulary corpus.
        #[arg(long)]
        vocab_conllu: Option<PathBuf>,
        #[command(flatten)]
        infill: InfillOptions,
    },
    /// Template extraction followed by infilling, end to end.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        docs: DocInput,
        #[command(flatten)]
        template: TemplateOptions,
        #[command(flatten)]
        infill: InfillOptions,
    },
    /// Run a blind human-or-computer session on the terminal.
    EvalBlind {
        #[command(flatten)]
        common: Common,
        /// Human-written jokes, JSONL.
        #[arg(long)]
        human: PathBuf,
        /// Generated jokes, JSONL.
        #[arg(long)]
        generated: PathBuf,
        /// Items shown; each is drawn from a randomly chosen pool.
        #[arg(long, default_value_t = 50)]
        n_items: usize,
        /// Evaluator name; also names the session file.
        #[arg(long)]
        evaluator: String,
        /// `step` stamps records with their index for reproducible files.
        #[arg(long, value_enum, default_value_t = ClockArg::Step)]
        clock: ClockArg,
    },
    /// Aggregate session files into a confusion matrix and metrics.
    Report {
        #[command(flatten)]
        common: Common,
        /// A session file or a directory of them.
        #[arg(long)]
        sessions: PathBuf,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, content),
        None => print_stdout(content),
    }
}

/// A closed stdout (`humor ... | head`) ends output quietly.
fn print_stdout(content: &str) -> Result<(), CliError> {
    let mut stdout = io::stdout().lock();
    match stdout.write_all(content.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::data(e)),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, content).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_jokes(path: &Path) -> Result<Vec<Joke>, CliError> {
    load_corpus(path, CorpusFormat::from_path(path)).map_err(CliError::data)
}

fn load_docs(source: &DocInput) -> Result<Vec<AnnotatedJoke>, CliError> {
    let jokes = read_jokes(&source.input)?;
    if let Some(path) = &source.conllu {
        let sentences = read_conllu_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        return attach_conllu(&jokes, sentences).map_err(CliError::data);
    }
    let mut pos = PosLexicon::builtin();
    if let Some(path) = &source.pos_lexicon {
        let file = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        pos.extend(PosLexicon::parse(io::BufReader::new(file)).map_err(CliError::data)?);
    }
    let mut docs = Vec::with_capacity(jokes.len());
    for joke in &jokes {
        match annotate_joke(joke, &pos) {
            Ok(d) => docs.push(d),
            Err(e) => warn!("skipping {}: {e}", joke.id),
        }
    }
    if docs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no usable documents",
            source.input.display()
        )));
    }
    Ok(docs)
}

fn load_lexicons(dir: &Path) -> Result<LexiconSet, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Data(format!("{}: not a directory", dir.display())));
    }
    LexiconSet::load_dir(dir).map_err(CliError::data)
}

fn weight_config(path: Option<&Path>) -> Result<WeightConfig, CliError> {
    let Some(path) = path else {
        return Ok(WeightConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let cfg =
        WeightConfig::from_json_overrides(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    cfg.validate().map_err(CliError::data)?;
    Ok(cfg)
}

fn build_infiller(
    opts: &InfillOptions,
    vocab: impl FnOnce() -> Result<Vec<AnnotatedJoke>, CliError>,
) -> Result<Box<dyn Infiller>, CliError> {
    match opts.infiller {
        InfillerKind::Baseline => Ok(Box::new(
            BaselineInfiller::from_docs(&vocab()?).map_err(CliError::data)?,
        )),
        InfillerKind::Remote => {
            let timeout = Duration::from_secs(opts.timeout_secs);
            let remote = RemoteInfiller::from_env_or(opts.url.as_deref(), timeout)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(Box::new(remote))
        }
    }
}

fn word_seqs(jokes: &[Joke], level: Level, punct: PunctMode, lowercase: bool) -> Vec<TokenSeq> {
    jokes
        .iter()
        .filter_map(|j| match clean_text(&j.text) {
            Ok(t) => Some(tokenize(&t, level, punct, lowercase)),
            Err(e) => {
                warn!("skipping {}: {e}", j.id);
                None
            }
        })
        .filter(|s| !s.is_empty())
        .collect()
}

fn jsonl<I: IntoIterator<Item = String>>(lines: I) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest { common, input } => ingest(&common, &input),
        Command::Annotate { common, docs } => {
            let docs = load_docs(&docs)?;
            let sentences: Vec<_> = docs
                .iter()
                .flat_map(|d| {
                    d.sentences.iter().map(|s| {
                        let mut s = s.clone();
                        s.doc_id.get_or_insert_with(|| d.joke.id.clone());
                        s
                    })
                })
                .collect();
            let mut buf = Vec::new();
            write_conllu(&mut buf, &sentences).map_err(CliError::data)?;
            emit(common.out.as_deref(), &String::from_utf8_lossy(&buf))
        }
        Command::Features { common, docs, lexicons } => {
            let docs = load_docs(&docs)?;
            let lex = load_lexicons(&lexicons)?;
            let out = common.out.unwrap_or_else(|| PathBuf::from("features"));
            let summary = export_feature_table(&docs, &lex, &out).map_err(CliError::data)?;
            let text = serde_json::to_string_pretty(&summary).map_err(CliError::data)?;
            print_stdout(&format!("{text}\n"))
        }
        Command::Train {
            common,
            features,
            model,
            kernel,
            test_fraction,
            epochs,
            learning_rate,
            regularization,
            gamma,
        } => {
            let mut cfg = TrainConfig {
                seed: common.seed,
                kernel: match kernel {
                    KernelArg::Linear => SvmKernel::Linear,
                    KernelArg::Rbf => SvmKernel::Rbf,
                },
                gamma,
                ..TrainConfig::default()
            };
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(lr) = learning_rate {
                cfg.learning_rate = lr;
            }
            if let Some(r) = regularization {
                cfg.regularization = r;
            }
            let kind = match model {
                ModelArg::Logreg => ModelKind::Logreg,
                ModelArg::Gnb => ModelKind::Gnb,
                ModelArg::Svm => ModelKind::Svm,
            };
            train_cmd(&common, &features, kind, &cfg, test_fraction)
        }
        Command::Classify {
            common,
            model,
            features,
        } => classify_cmd(&common, &model, &features),
        Command::MarkovTrain {
            common,
            input,
            n,
            level,
            keep_case,
            drop_punct,
        } => {
            let punct = if drop_punct { PunctMode::Drop } else { PunctMode::Keep };
            let seqs = word_seqs(&read_jokes(&input)?, level.into(), punct, !keep_case);
            let model = NGramModel::fit(&seqs, level.into(), n).map_err(CliError::data)?;
            info!("{} contexts", model.counts().len());
            emit(common.out.as_deref(), &model.to_json())
        }
        Command::MarkovGen {
            common,
            model,
            count,
            max_tokens,
            prompt,
            backoff,
        } => {
            let model = NGramModel::load(&model).map_err(CliError::data)?;
            let seed_tokens = prompt
                .map(|p| tokenize(&p, model.level(), PunctMode::Keep, false).tokens)
                .unwrap_or_default();
            let mut lines = Vec::with_capacity(count);
            for i in 0..count {
                let tokens = model
                    .generate(&seed_tokens, max_tokens, common.seed.wrapping_add(i as u64), backoff)
                    .map_err(CliError::data)?;
                let seq = TokenSeq {
                    tokens,
                    level: model.level(),
                    punct_mode: PunctMode::Keep,
                };
                lines.push(seq.join());
            }
            emit(common.out.as_deref(), &jsonl(lines))
        }
        Command::LstmTrain {
            common,
            input,
            max_vocab,
            embed_dim,
            hidden_dim,
            dropout,
            sequence_length,
            learning_rate,
            epochs,
            batch_size,
            loss_out,
        } => {
            let seqs: Vec<Vec<String>> = word_seqs(&read_jokes(&input)?, Level::Word, PunctMode::Keep, true)
                .into_iter()
                .map(|s| s.tokens)
                .collect();
            let vocab = Vocab::build(&seqs, max_vocab);
            let d = NeuralConfig::default();
            let config = NeuralConfig {
                vocab_size: vocab.len(),
                embed_dim: embed_dim.unwrap_or(d.embed_dim),
                hidden_dim: hidden_dim.unwrap_or(d.hidden_dim),
                dropout_rate: dropout.unwrap_or(d.dropout_rate),
                sequence_length: sequence_length.unwrap_or(d.sequence_length),
                seed: common.seed,
                learning_rate: learning_rate.unwrap_or(d.learning_rate),
                epochs: epochs.unwrap_or(d.epochs),
                batch_size: batch_size.unwrap_or(d.batch_size),
            };
            let windows = make_windows(&vocab, &seqs, config.sequence_length);
            if windows.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: no sequence is longer than {} tokens",
                    input.display(),
                    config.sequence_length
                )));
            }
            let mut model = NeuralLM::build(&config, vocab).map_err(|e| CliError::Usage(e.to_string()))?;
            let history = neural::train(&mut model, &windows, &config).map_err(CliError::data)?;
            if let Some(path) = loss_out {
                write_file(&path, &loss_history_csv(&history))?;
            }
            emit(common.out.as_deref(), &model.to_json())
        }
        Command::LstmGen {
            common,
            model,
            prompt,
            count,
            max_tokens,
            temperature,
        } => {
            let model = NeuralLM::load(&model).map_err(CliError::data)?;
            let seed_tokens = tokenize(&prompt, Level::Word, PunctMode::Keep, true).tokens;
            if seed_tokens.is_empty() {
                return Err(CliError::Usage("--prompt needs at least one token".into()));
            }
            let lines = (0..count).map(|i| {
                let g = neural::generate(
                    &model,
                    &seed_tokens,
                    max_tokens,
                    common.seed.wrapping_add(i as u64),
                    temperature,
                );
                json!({
                    "text": g.tokens.join(" "),
                    "generated": g.generated,
                    "stopped_at_eos": g.stopped_at_eos,
                    "trailing_cycle": g.trailing_cycle,
                })
                .to_string()
            });
            emit(common.out.as_deref(), &jsonl(lines))
        }
        Command::Template {
            common,
            docs,
            template,
            placeholder,
        } => {
            let docs = load_docs(&docs)?;
            let lex = load_lexicons(&template.lexicons)?;
            let cfg = weight_config(template.weights.as_deref())?;
            let mut lines = Vec::with_capacity(docs.len());
            for d in &docs {
                let t = extract_template(d, &lex, &cfg).map_err(|e| CliError::Data(format!("{}: {e}", d.joke.id)))?;
                let mut v = serde_json::to_value(&t).map_err(CliError::data)?;
                v["rendered"] = json!(t.render(&placeholder));
                lines.push(v.to_string());
            }
            emit(common.out.as_deref(), &jsonl(lines))
        }
        Command::Infill {
            common,
            templates,
            vocab_in,
            vocab_conllu,
            infill,
        } => {
            let text =
                fs::read_to_string(&templates).map_err(|e| CliError::Data(format!("{}: {e}", templates.display())))?;
            let mut parsed = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let t: Template = serde_json::from_str(line)
                    .map_err(|e| CliError::Data(format!("{} line {}: {e}", templates.display(), i + 1)))?;
                parsed.push(t);
            }
            let infiller = build_infiller(&infill, || match vocab_in {
                Some(input) => load_docs(&DocInput {
                    input,
                    conllu: vocab_conllu,
                    pos_lexicon: None,
                }),
                None => Err(CliError::Usage("the baseline infiller needs --vocab-in".into())),
            })?;
            let mut lines = Vec::with_capacity(parsed.len());
            for t in &parsed {
                let req = InfillRequest::from_template(t, infill.top_k);
                let filled = if req.mask_positions.is_empty() {
                    req.tokens.clone()
                } else {
                    infiller
                        .infill(&req, common.seed)
                        .map_err(|e| CliError::Data(format!("{}: {e}", t.joke_id)))?
                        .filled_tokens
                };
                let parts: Vec<(String, bool)> = filled
                    .into_iter()
                    .zip(&t.tokens)
                    .map(|(f, tok)| (f, tok.space_after))
                    .collect();
                lines.push(
                    json!({
                        "joke_id": t.joke_id,
                        "template": t.render(DEFAULT_PLACEHOLDER),
                        "generated": join_with_spacing(&parts),
                        "infiller": infiller.id(),
                    })
                    .to_string(),
                );
            }
            emit(common.out.as_deref(), &jsonl(lines))
        }
        Command::Generate {
            common,
            docs,
            template,
            infill,
        } => {
            let docs = load_docs(&docs)?;
            let lex = load_lexicons(&template.lexicons)?;
            let cfg = weight_config(template.weights.as_deref())?;
            let infiller = build_infiller(&infill, || Ok(docs.clone()))?;
            let mut lines = Vec::with_capacity(docs.len());
            for d in &docs {
                let out = hybrid_generate(d, &lex, &cfg, infiller.as_ref(), common.seed, infill.top_k)
                    .map_err(|e| CliError::Data(format!("{}: {e}", d.joke.id)))?;
                lines.push(serde_json::to_string(&out).map_err(CliError::data)?);
            }
            emit(common.out.as_deref(), &jsonl(lines))
        }
        Command::EvalBlind {
            common,
            human,
            generated,
            n_items,
            evaluator,
            clock,
        } => {
            let human = read_jokes(&human)?;
            let generated = read_jokes(&generated)?;
            let items = draw_items(&human, &generated, n_items, common.seed).map_err(CliError::data)?;
            let store = SessionStore::new(common.out.unwrap_or_else(|| PathBuf::from("results")));
            let clock = match clock {
                ClockArg::Step => Clock::Step,
                ClockArg::Wall => Clock::Wall,
            };
            let stdin = io::stdin();
            let outcome = run_session(
                &store,
                &evaluator,
                &items,
                common.seed,
                clock,
                stdin.lock(),
                io::stdout(),
            )
            .map_err(CliError::data)?;
            if !outcome.completed {
                eprintln!(
                    "session paused after {} of {} items; rerun the same command to resume",
                    outcome.records.len(),
                    items.len()
                );
            }
            Ok(())
        }
        Command::Report { common, sessions, json } => {
            let records = load_sessions(&sessions).map_err(CliError::data)?;
            let r = report(&records);
            if let Some(path) = &common.out {
                write_file(path, &format!("{}\n", r.to_json()))?;
            }
            if json {
                print_stdout(&format!("{}\n", r.to_json()))
            } else {
                print_stdout(&r.to_table())
            }
        }
    }
}

fn ingest(common: &Common, input: &Path) -> Result<(), CliError> {
    let jokes = read_jokes(input)?;
    let mut lines = Vec::with_capacity(jokes.len());
    for j in &jokes {
        let text = match clean_text(&j.text) {
            Ok(t) => t,
            Err(e) => {
                warn!("skipping {}: {e}", j.id);
                continue;
            }
        };
        let split = split_setup_punchline(&text);
        let mut v = json!({
            "id": j.id,
            "text": text,
            "setup": split.setup,
            "punchline": split.punchline,
            "split_rule": split.split_rule,
        });
        if let Some(l) = j.label {
            v["label"] = json!(l);
        }
        lines.push(v.to_string());
    }
    if lines.is_empty() {
        return Err(CliError::Data(format!("{}: no usable records", input.display())));
    }
    emit(common.out.as_deref(), &jsonl(lines))
}

fn labeled_dataset(path: &Path) -> Result<(Vec<String>, Dataset), CliError> {
    let FeatureTable {
        ids,
        labels,
        names,
        rows: x,
    } = read_feature_table(path).map_err(CliError::Data)?;
    let y = labels
        .iter()
        .zip(&ids)
        .map(|(l, id)| l.ok_or_else(|| CliError::Data(format!("{}: row {id} has no label", path.display()))))
        .collect::<Result<Vec<u8>, _>>()?;
    let data = Dataset::new(x, y, names).map_err(CliError::data)?;
    Ok((ids, data))
}

fn train_cmd(
    common: &Common,
    features: &Path,
    kind: ModelKind,
    cfg: &TrainConfig,
    test_fraction: f64,
) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(CliError::Usage(format!(
            "--test-fraction must be in [0, 1), got {test_fraction}"
        )));
    }
    let (_, data) = labeled_dataset(features)?;
    let (train_set, test_set) = if test_fraction > 0.0 {
        data.stratified_split(test_fraction, common.seed)
    } else {
        (data.clone(), data.subset(&[]))
    };
    let model = train(kind, &train_set, cfg).map_err(CliError::data)?;
    let held_out = if test_set.is_empty() {
        None
    } else {
        Some(evaluate(&model, &test_set).map_err(CliError::data)?)
    };
    let train_metrics = evaluate(&model, &train_set).map_err(CliError::data)?;
    match &common.out {
        Some(path) => write_file(path, &model.to_json())?,
        None => return Err(CliError::Usage("train needs --out for the model file".into())),
    }
    let summary = json!({
        "model": format!("{kind:?}").to_lowercase(),
        "train_rows": train_set.len(),
        "test_rows": test_set.len(),
        "train": train_metrics,
        "test": held_out,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(CliError::data)?;
    print_stdout(&format!("{text}\n"))
}

fn classify_cmd(common: &Common, model: &Path, features: &Path) -> Result<(), CliError> {
    let FeatureTable {
        ids,
        labels,
        names,
        rows: x,
    } = read_feature_table(features).map_err(CliError::Data)?;
    if names != FEATURE_NAMES {
        warn!("{}: non-standard feature columns", features.display());
    }
    let model = Model::load(model, &names).map_err(CliError::data)?;
    let mut out = String::from("id,label,score\n");
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    for ((id, row), label) in ids.iter().zip(&x).zip(&labels) {
        let p = model.predict(row).map_err(CliError::data)?;
        out.push_str(&format!("{id},{},{}\n", p.label, p.score));
        if let Some(l) = label {
            actual.push(*l);
            predicted.push(p.label);
        }
    }
    if !actual.is_empty() && actual.len() == ids.len() {
        let m = humor_core::classify::metrics_from_labels(&actual, &predicted);
        eprintln!(
            "accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4}",
            m.accuracy, m.precision, m.recall, m.f1
        );
    }
    emit(common.out.as_deref(), &out)
}
