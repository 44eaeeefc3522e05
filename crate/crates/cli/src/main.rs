use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mtloop_core::corpus::ParallelCorpus;
use mtloop_core::dictionary::DictionaryIndex;
use mtloop_core::feedback::FeedbackStore;
use mtloop_core::hitl::{retrain, ArchaicMap, QeRebuild, RetrainConfig};
use mtloop_core::nmt::{train_nmt, NmtTrainConfig};
use mtloop_core::qe::{
    build_kfold_dataset, evaluate_qe, gbt_train, FeatureKind, GbtModel, GbtParams, NmtFoldPipeline, QeDataset, SmtFoldPipeline,
    DEFAULT_FOLD_SEED,
};
use mtloop_core::smt::{decoder::DEFAULT_BEAM, train_smt, tune_weights, DecodeOptions, SmtModel, SmtTrainConfig, TuneConfig};
use mtloop_core::synthetic::{SyntheticConfig, SyntheticLexicon};
use mtloop_core::textmetrics::{corpus_bleu_multi, sentence_bleu, tokenize_13a, TokenSeq};
use mtloop_core::{Direction, Language};
use mtloop_service::models::{model_name, qe_file_name};
use mtloop_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "mtloop", version, about = "Cherokee-English translation with quality estimation and expert feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API (configured through MTLOOP_* variables).
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
    /// BLEU of a hypothesis file against one or more reference files.
    Bleu(BleuArgs),
    #[command(subcommand)]
    Smt(SmtCommand),
    #[command(subcommand)]
    Nmt(NmtCommand),
    #[command(subcommand)]
    Qe(QeCommand),
    #[command(subcommand)]
    Hitl(HitlCommand),
    #[command(subcommand)]
    Examples(ExamplesCommand),
    /// Write a seeded synthetic corpus and its dictionary.
    Synth(SynthArgs),
}

#[derive(Args)]
struct BleuArgs {
    #[arg(long)]
    hyp: PathBuf,
    /// Repeat for multiple references.
    #[arg(long = "ref", required = true)]
    refs: Vec<PathBuf>,
    /// Print one sentence-level score per line instead of the corpus score.
    #[arg(long)]
    sentence: bool,
}

/// Pair files hold one `Cherokee ||| English` pair per line.
#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Translation direction of the model being built.
    #[arg(long, default_value = "chr-en")]
    direction: Direction,
}

#[derive(Subcommand)]
enum SmtCommand {
    /// Align, extract phrases and build the language model.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune decoding weights on a dev pair file and save them into the model.
    Tune {
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Translate source lines from standard input.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        /// Maximum phrase jump; unlimited when omitted.
        #[arg(long)]
        distortion: Option<usize>,
    },
}

#[derive(Subcommand)]
enum NmtCommand {
    /// Train the toy decoder ensemble.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum QeCommand {
    /// Translate every pair with a model trained on the other folds.
    BuildData {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value_t = 17)]
        k: usize,
        #[arg(long)]
        kind: FeatureKind,
        #[arg(long, default_value_t = DEFAULT_FOLD_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the boosted-tree regressor on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        depth: usize,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 100)]
        rounds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict BLEU for each dataset row, one value per line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also write each row's proxy BLEU label here.
        #[arg(long)]
        gold_out: Option<PathBuf>,
    },
    /// Pearson correlation between two files of one number per line.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
}

#[derive(Subcommand)]
enum HitlCommand {
    /// Retrain the SMT models with expert corrections and swap in the ones
    /// that pass the dev BLEU guard.
    Retrain {
        /// Feedback data directory.
        #[arg(long)]
        data: PathBuf,
        /// Cherokee-English dev pair file.
        #[arg(long)]
        dev: PathBuf,
        /// Cherokee-English training pair file.
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        /// Replaces the default thy/thou map.
        #[arg(long)]
        archaic_map: Option<PathBuf>,
        /// Keep only the latest correction per translation.
        #[arg(long)]
        dedup: bool,
        /// Where accepted models are written, under the names the server loads.
        #[arg(long)]
        model_dir: Option<PathBuf>,
        /// Rebuild each accepted model's QE regressor with this many folds.
        #[arg(long)]
        qe_folds: Option<usize>,
        /// Write the structured report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExamplesCommand {
    /// Queue one example per non-empty line of FILE.
    Import {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lang: Language,
        file: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long, default_value_t = SyntheticConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SyntheticConfig::default().concepts)]
    concepts: usize,
    /// Cherokee-English pair file.
    #[arg(long)]
    out: PathBuf,
    /// Dictionary TSV.
    #[arg(long)]
    dict: Option<PathBuf>,
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    read_lines(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse()
                .with_context(|| format!("{}:{}: not a number", path.display(), i + 1))
        })
        .collect()
}

fn write_numbers(path: &Path, values: impl IntoIterator<Item = f64>) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for v in values {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

fn read_corpus(args: &CorpusArgs) -> Result<ParallelCorpus> {
    let corpus =
        ParallelCorpus::read_pair_file(&args.corpus, Direction::ChrEn).with_context(|| format!("reading {}", args.corpus.display()))?;
    Ok(corpus.oriented(args.direction))
}

fn bleu(args: BleuArgs) -> Result<()> {
    let hyps: Vec<TokenSeq> = read_lines(&args.hyp)?.iter().map(|l| tokenize_13a(l)).collect();
    let mut streams = Vec::with_capacity(args.refs.len());
    for path in &args.refs {
        let refs: Vec<TokenSeq> = read_lines(path)?.iter().map(|l| tokenize_13a(l)).collect();
        if refs.len() != hyps.len() {
            bail!("{} has {} lines, the hypothesis file has {}", path.display(), refs.len(), hyps.len());
        }
        streams.push(refs);
    }
    if args.sentence {
        for (i, hyp) in hyps.iter().enumerate() {
            let refs: Vec<&TokenSeq> = streams.iter().map(|s| &s[i]).collect();
            println!("{:.1}", sentence_bleu(hyp, &refs)?.value);
        }
    } else {
        let streams: Vec<&[TokenSeq]> = streams.iter().map(Vec::as_slice).collect();
        println!("{:.1}", corpus_bleu_multi(&hyps, &streams)?.value);
    }
    Ok(())
}

fn smt(command: SmtCommand) -> Result<()> {
    match command {
        SmtCommand::Train { corpus, out } => {
            let model = train_smt(&read_corpus(&corpus)?, &SmtTrainConfig::default())?;
            model.save(&out)?;
            eprintln!("{} phrase pairs written to {}", model.phrases.len(), out.display());
        }
        SmtCommand::Tune { dev, model: dir } => {
            let mut model = SmtModel::load(&dir)?;
            let dev = ParallelCorpus::read_pair_file(&dev, Direction::ChrEn)?.oriented(model.direction);
            let report = tune_weights(&dev, model.tables(), &model.weights, &TuneConfig::default())?;
            model.weights = report.weights;
            model.save(&dir)?;
            println!("dev BLEU {:.1} -> {:.1}", report.bleu_before, report.bleu_after);
        }
        SmtCommand::Decode { model, beam, distortion } => {
            let model = SmtModel::load(&model)?;
            let options = DecodeOptions {
                beam,
                distortion_limit: distortion,
            };
            let stdout = std::io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            for line in std::io::stdin().lock().lines() {
                let source = tokenize_13a(&line?);
                if source.is_empty() {
                    writeln!(out)?;
                    continue;
                }
                writeln!(out, "{}", model.translate(&source, options)?.target.join())?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn qe(command: QeCommand) -> Result<()> {
    match command {
        QeCommand::BuildData {
            corpus,
            k,
            kind,
            seed,
            out,
        } => {
            let corpus = read_corpus(&corpus)?;
            let data = match kind {
                FeatureKind::Smt => build_kfold_dataset(&corpus, k, seed, &SmtFoldPipeline::default())?,
                FeatureKind::Nmt => build_kfold_dataset(&corpus, k, seed, &NmtFoldPipeline::default())?,
            };
            data.save(&out)?;
            eprintln!("{} rows written to {}", data.rows.len(), out.display());
        }
        QeCommand::Train {
            data,
            depth,
            eta,
            rounds,
            out,
        } => {
            let data = QeDataset::load(&data)?;
            let model = gbt_train(
                &data,
                GbtParams {
                    max_depth: depth,
                    eta,
                    rounds,
                },
            )?;
            model.save(&out)?;
            if let Some(mse) = model.train_mse.last() {
                eprintln!("final training MSE {mse:.3}");
            }
        }
        QeCommand::Predict { model, data, gold_out } => {
            let model = GbtModel::load(&model)?;
            let data = QeDataset::load(&data)?;
            let stdout = std::io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            for row in &data.rows {
                writeln!(out, "{}", model.predict(&row.features)?)?;
            }
            out.flush()?;
            if let Some(path) = gold_out {
                write_numbers(&path, data.rows.iter().map(|r| r.bleu))?;
            }
        }
        QeCommand::Eval { pred, gold } => {
            let result = evaluate_qe(&read_numbers(&pred)?, &read_numbers(&gold)?)?;
            println!("pearson {:.4} n {}", result.r, result.n);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn hitl_retrain(
    data: &Path,
    dev: &Path,
    train: &Path,
    repeat: usize,
    archaic_map: Option<&Path>,
    dedup: bool,
    model_dir: Option<&Path>,
    qe_folds: Option<usize>,
    report_path: Option<&Path>,
) -> Result<()> {
    let store = FeedbackStore::open(data)?;
    let corrections = store.export_corrections(dedup)?;
    let train = ParallelCorpus::read_pair_file(train, Direction::ChrEn)?;
    let dev = ParallelCorpus::read_pair_file(dev, Direction::ChrEn)?;
    let archaic = match archaic_map {
        Some(path) => ArchaicMap::load(path)?,
        None => ArchaicMap::default(),
    };
    let config = RetrainConfig {
        repeat,
        archaic: Some(archaic),
        qe: qe_folds.map(|k| QeRebuild {
            k,
            seed: DEFAULT_FOLD_SEED,
            params: GbtParams {
                max_depth: 5,
                eta: 0.1,
                rounds: 100,
            },
        }),
        ..RetrainConfig::default()
    };
    let outcome = retrain(&train, &dev, &corrections, &config)?;
    if let Some(dir) = model_dir {
        for accepted in &outcome.accepted {
            let name = model_name(mtloop_core::feedback::ModelKind::Smt, accepted.direction);
            accepted.model.save(&dir.join(&name))?;
            if let Some(qe) = &accepted.qe {
                qe.save(&dir.join(qe_file_name(accepted.direction)))?;
            }
            tracing::info!(model = %name, "wrote retrained model");
        }
    }
    eprint!("{}", outcome.report.summary());
    let json = serde_json::to_string_pretty(&outcome.report)?;
    match report_path {
        Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let lexicon = SyntheticLexicon::generate(SyntheticConfig {
        seed: args.seed,
        concepts: args.concepts,
        ..SyntheticConfig::default()
    })?;
    lexicon.corpus(args.pairs).write_pair_file(&args.out)?;
    if let Some(path) = args.dict {
        DictionaryIndex::build(lexicon.dictionary())?.save_tsv(&path)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Serve { port } => {
            let mut config = ServiceConfig::from_env()?;
            if let Some(port) = port {
                config.port = port;
            }
            tokio::runtime::Runtime::new()?.block_on(mtloop_service::serve(config))?;
        }
        Command::Bleu(args) => bleu(args)?,
        Command::Smt(command) => smt(command)?,
        Command::Nmt(NmtCommand::Train { corpus, out }) => {
            train_nmt(&read_corpus(&corpus)?, &NmtTrainConfig::default())?.save(&out)?;
        }
        Command::Qe(command) => qe(command)?,
        Command::Hitl(HitlCommand::Retrain {
            data,
            dev,
            train,
            repeat,
            archaic_map,
            dedup,
            model_dir,
            qe_folds,
            report,
        }) => hitl_retrain(
            &data,
            &dev,
            &train,
            repeat,
            archaic_map.as_deref(),
            dedup,
            model_dir.as_deref(),
            qe_folds,
            report.as_deref(),
        )?,
        Command::Examples(ExamplesCommand::Import { data, lang, file }) => {
            let store = FeedbackStore::open(&data)?;
            let mut added = 0;
            for line in read_lines(&file)? {
                if !line.trim().is_empty() {
                    store.add_example(lang, line.trim())?;
                    added += 1;
                }
            }
            eprintln!("queued {added} examples");
        }
        Command::Synth(args) => synth(args)?,
    }
    Ok(())
}
