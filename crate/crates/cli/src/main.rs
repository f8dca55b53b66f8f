//! `abductkg` command line: split, sample, evaluate, search, smatch and the
//! reward server.
//!
//! Every flag can also be set through an `ABDUCTKG_*` environment variable.
//! Results go to stdout as JSON (tables with `--pretty`); failures exit
//! nonzero with `{"error": kind, "message": ...}` on stderr.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use abductkg::env::serve;
use abductkg::report::{score_hypothesis, score_prediction, summarize, PredictionRecord, Summary};
use abductkg::sampler::{read_jsonl, read_pairs, write_pairs};
use abductkg::smatch::{smatch_views, SmatchConfig};
use abductkg::{
    hypothesis_to_actions, load_triple_files, one_hop_search, sample_split_datasets, split_edges, to_amr_view,
    DatasetPlan, GraphSplit, GraphTag, HypothesisGraph, HypothesisPattern, KnowledgeGraph, RewardEnv, SamplerConfig,
    SplitRatios, TripleFormat, Vocabulary,
};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "abductkg", version, about = "Abductive reasoning over knowledge graphs")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "ABDUCTKG_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for sampling and scoring (default: all cores).
    #[arg(long, global = true, env = "ABDUCTKG_WORKERS")]
    workers: Option<usize>,
    /// Human-readable output instead of JSON.
    #[arg(long, global = true, env = "ABDUCTKG_PRETTY")]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load triples and write a cumulative train/valid/test split.
    Split {
        /// Triple files, merged into one graph (comma-separated or repeated).
        #[arg(long = "in", env = "ABDUCTKG_IN", required = true, value_delimiter = ',')]
        input: Vec<PathBuf>,
        #[arg(long, env = "ABDUCTKG_FORMAT", default_value = "label-tsv")]
        format: TripleFormat,
        /// Edge ratios as train:valid:test.
        #[arg(long, env = "ABDUCTKG_RATIOS", default_value = "8:1:1", value_parser = parse_ratios)]
        ratios: SplitRatios,
        #[arg(long, env = "ABDUCTKG_OUT")]
        out: PathBuf,
    },
    /// Sample observation/hypothesis pairs from a split directory.
    Sample {
        #[arg(long, env = "ABDUCTKG_GRAPH")]
        graph: PathBuf,
        /// `all` or a comma-separated list such as `1p,2in`.
        #[arg(long, env = "ABDUCTKG_PATTERNS", default_value = "all", value_parser = parse_patterns)]
        patterns: PatternList,
        /// Training pairs per pattern.
        #[arg(long, env = "ABDUCTKG_COUNT")]
        count: usize,
        /// Validation pairs per pattern.
        #[arg(long, env = "ABDUCTKG_VALID_COUNT", default_value_t = 0)]
        valid_count: usize,
        /// Test pairs per pattern.
        #[arg(long, env = "ABDUCTKG_TEST_COUNT", default_value_t = 0)]
        test_count: usize,
        #[arg(long, env = "ABDUCTKG_MAX_OBSERVATION", default_value_t = abductkg::sampler::MAX_OBSERVATION)]
        max_observation: usize,
        #[arg(long, env = "ABDUCTKG_RETRIES", default_value_t = abductkg::sampler::RETRY_BUDGET)]
        retries: usize,
        #[arg(long, env = "ABDUCTKG_OUT")]
        out: PathBuf,
    },
    /// Score a predictions file: Jaccard on the graph, Smatch against references.
    Evaluate {
        #[arg(long, env = "ABDUCTKG_PRED")]
        pred: PathBuf,
        /// Split directory (test graph), `<split dir>/<train|valid|test>`, or a triple file.
        #[arg(long, env = "ABDUCTKG_GRAPH")]
        graph: PathBuf,
    },
    /// One-hop search baseline: search on the training graph, score on a held-out one.
    Search {
        #[arg(long, env = "ABDUCTKG_PAIRS")]
        pairs: PathBuf,
        /// Split directory.
        #[arg(long, env = "ABDUCTKG_GRAPH")]
        graph: PathBuf,
        #[arg(long, env = "ABDUCTKG_EVAL_SPLIT", value_enum, default_value = "test")]
        eval_split: SplitName,
        /// Also write the found hypotheses as a predictions file.
        #[arg(long, env = "ABDUCTKG_OUT")]
        out: Option<PathBuf>,
    },
    /// Serve rewards on the training graph over newline-delimited JSON.
    ServeEnv {
        /// Split directory (training graph), `<split dir>/<split>`, or a triple file.
        #[arg(long, env = "ABDUCTKG_GRAPH")]
        graph: PathBuf,
        #[arg(long, env = "ABDUCTKG_LISTEN", default_value = "127.0.0.1:7878")]
        listen: String,
    },
    /// Smatch between two hypotheses (canonical JSON, or a token list with --graph).
    Smatch {
        #[arg(long, env = "ABDUCTKG_PRED")]
        pred: PathBuf,
        #[arg(long, env = "ABDUCTKG_GOLD")]
        gold: PathBuf,
        #[arg(long, env = "ABDUCTKG_GRAPH")]
        graph: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitName {
    Train,
    Valid,
    Test,
}

impl From<SplitName> for GraphTag {
    fn from(s: SplitName) -> GraphTag {
        match s {
            SplitName::Train => GraphTag::Train,
            SplitName::Valid => GraphTag::Valid,
            SplitName::Test => GraphTag::Test,
        }
    }
}

#[derive(Clone)]
struct PatternList(Vec<HypothesisPattern>);

fn parse_patterns(s: &str) -> Result<PatternList, String> {
    if s == "all" {
        return Ok(PatternList(HypothesisPattern::ALL.to_vec()));
    }
    let list = s.split(',').map(|p| p.trim().parse()).collect::<Result<Vec<_>, _>>()?;
    if list.is_empty() {
        return Err("no patterns given".into());
    }
    Ok(PatternList(list))
}

fn parse_ratios(s: &str) -> Result<SplitRatios, String> {
    let parts: Vec<u32> = s
        .split(':')
        .map(|x| x.trim().parse::<u32>().map_err(|_| format!("bad ratio `{x}`")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [train, valid, test] if train > 0 && valid > 0 && test > 0 => Ok(SplitRatios { train, valid, test }),
        _ => Err(format!("expected three positive ratios like 8:1:1, got `{s}`")),
    }
}

struct Failure {
    kind: &'static str,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

trait OrFail<T> {
    fn or_fail(self, kind: &'static str) -> CliResult<T>;
}

impl<T, E: Display> OrFail<T> for Result<T, E> {
    fn or_fail(self, kind: &'static str) -> CliResult<T> {
        self.map_err(|e| Failure { kind, message: e.to_string() })
    }
}

fn fail<T>(kind: &'static str, message: impl Into<String>) -> CliResult<T> {
    Err(Failure { kind, message: message.into() })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report(&Failure { kind: "usage", message: e.render().to_string().trim().to_owned() });
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f);
            ExitCode::FAILURE
        }
    }
}

fn report(f: &Failure) {
    eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().or_fail("workers")?;
    }
    match cli.command {
        Command::Split { input, format, ratios, out } => {
            let g = load_triple_files(&input, format).or_fail("load")?;
            let split = split_edges(&g, ratios, cli.seed);
            split.write_dir(&out).or_fail("write")?;
            emit(
                cli.pretty,
                &json!({
                    "entities": g.num_entities(),
                    "relations": g.num_relations(),
                    "edges": g.num_edges(),
                    "counts": split.counts(),
                    "seed": cli.seed,
                    "out": out,
                }),
            )
        }
        Command::Sample { graph, patterns, count, valid_count, test_count, max_observation, retries, out } => {
            let split = GraphSplit::read_dir(&graph).or_fail("load")?;
            let plan = DatasetPlan { patterns: patterns.0, train: count, valid: valid_count, test: test_count };
            let cfg = SamplerConfig { max_observation, retries };
            let data = sample_split_datasets(&split, &plan, cli.seed, &cfg);
            let vocab = Vocabulary::from_graph(&split.train);
            fs::create_dir_all(&out).or_fail("write")?;
            for (name, samples) in [("train", &data.train), ("valid", &data.valid), ("test", &data.test)] {
                write_pairs(out.join(format!("{name}.jsonl")), samples, &vocab).or_fail("write")?;
            }
            vocab.write(out.join("vocab.txt")).or_fail("write")?;
            let shortfalls: Vec<_> = data
                .shortfalls
                .iter()
                .map(|s| json!({"split": s.split.to_string(), "pattern": s.pattern, "wanted": s.wanted, "got": s.got}))
                .collect();
            emit(
                cli.pretty,
                &json!({
                    "train": data.train.len(),
                    "valid": data.valid.len(),
                    "test": data.test.len(),
                    "vocab": vocab.len(),
                    "shortfalls": shortfalls,
                    "seed": cli.seed,
                    "out": out,
                }),
            )
        }
        Command::Evaluate { pred, graph } => {
            let g = load_graph(&graph, GraphTag::Test)?;
            let vocab = Vocabulary::from_graph(&g);
            let records: Vec<PredictionRecord> = read_jsonl(&pred).or_fail("predictions")?;
            let scores: Vec<_> = records.par_iter().map(|r| score_prediction(r, &g, &vocab)).collect();
            emit_summary(cli.pretty, &summarize(&scores))
        }
        Command::Search { pairs, graph, eval_split, out } => {
            let split = GraphSplit::read_dir(&graph).or_fail("load")?;
            let eval = split.graph(eval_split.into()).expect("named split");
            let vocab = Vocabulary::from_graph(&split.train);
            let pairs = read_pairs(&pairs).or_fail("pairs")?;
            let results: Vec<_> = pairs
                .par_iter()
                .map(|p| {
                    let obs = p.observation_set();
                    let found = one_hop_search(&obs, &split.train).map(|r| r.hypothesis);
                    let reference = abductkg::report::reference_hypothesis(p, &vocab);
                    let score = score_hypothesis(p.pattern, found.as_ref(), reference.as_ref(), &obs, eval);
                    (found, score)
                })
                .collect();
            if let Some(out) = out {
                let mut w = std::io::BufWriter::new(fs::File::create(&out).or_fail("write")?);
                for (p, (found, _)) in pairs.iter().zip(&results) {
                    let prediction = found
                        .as_ref()
                        .and_then(|h| hypothesis_to_actions(h).ok())
                        .map(|a| vocab.to_strings(&a))
                        .unwrap_or_default();
                    let rec = PredictionRecord { pair: p.clone(), prediction };
                    serde_json::to_writer(&mut w, &rec).or_fail("write")?;
                    w.write_all(b"\n").or_fail("write")?;
                }
                w.flush().or_fail("write")?;
            }
            let scores: Vec<_> = results.into_iter().map(|(_, s)| s).collect();
            emit_summary(cli.pretty, &summarize(&scores))
        }
        Command::ServeEnv { graph, listen } => {
            let g = load_graph(&graph, GraphTag::Train)?;
            let listener = TcpListener::bind(&listen).or_fail("listen")?;
            let addr = listener.local_addr().or_fail("listen")?;
            let env = Arc::new(RewardEnv::new(g));
            emit(false, &json!({ "listening": addr.to_string(), "vocab": env.vocab().len() }))?;
            serve(listener, env).or_fail("serve")
        }
        Command::Smatch { pred, gold, graph } => {
            let vocab = match &graph {
                Some(p) => Some(Vocabulary::from_graph(&load_graph(p, GraphTag::Train)?)),
                None => None,
            };
            let p = read_hypothesis(&pred, vocab.as_ref())?;
            let g = read_hypothesis(&gold, vocab.as_ref())?;
            let (pv, gv) = (to_amr_view(&p).expect("validated"), to_amr_view(&g).expect("validated"));
            let s = smatch_views(&pv, &gv, &SmatchConfig::default());
            emit(
                cli.pretty,
                &json!({
                    "precision": s.precision(),
                    "recall": s.recall(),
                    "f1": s.f1(),
                    "matched": s.matched,
                    "pred_triples": s.pred_total,
                    "gold_triples": s.gold_total,
                }),
            )
        }
    }
}

fn emit(pretty: bool, value: &impl Serialize) -> CliResult<()> {
    let text =
        if pretty { serde_json::to_string_pretty(value) } else { serde_json::to_string(value) }.or_fail("output")?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").and_then(|_| out.flush()).or_fail("output")
}

fn emit_summary(pretty: bool, summary: &Summary) -> CliResult<()> {
    if pretty {
        print!("{}", summary.to_table());
        Ok(())
    } else {
        emit(false, summary)
    }
}

/// A split directory (its `default` graph), `<split dir>/<train|valid|test>`,
/// or a plain label-tsv triple file.
fn load_graph(path: &Path, default: GraphTag) -> CliResult<KnowledgeGraph> {
    let is_split = |p: &Path| p.join("manifest.json").is_file();
    let (dir, tag) = if is_split(path) {
        (path, default)
    } else {
        let tag = match path.file_name().and_then(|n| n.to_str()) {
            Some("train") => Some(GraphTag::Train),
            Some("valid") => Some(GraphTag::Valid),
            Some("test") => Some(GraphTag::Test),
            _ => None,
        };
        match (tag, path.parent()) {
            (Some(tag), Some(parent)) if is_split(parent) => (parent, tag),
            _ if path.is_file() => {
                return load_triple_files(&[path], TripleFormat::LabelTsv).or_fail("load");
            }
            _ => return fail("load", format!("{} is neither a split directory nor a triple file", path.display())),
        }
    };
    let split = GraphSplit::read_dir(dir).or_fail("load")?;
    Ok(match tag {
        GraphTag::Train => split.train,
        GraphTag::Valid => split.valid,
        _ => split.test,
    })
}

/// Canonical hypothesis JSON, or a JSON array of action tokens (needs a
/// vocabulary).
fn read_hypothesis(path: &Path, vocab: Option<&Vocabulary>) -> CliResult<HypothesisGraph> {
    let text = fs::read_to_string(path).or_fail("read")?;
    let text = text.trim();
    if text.starts_with('[') {
        let tokens: Vec<String> = serde_json::from_str(text).or_fail("parse")?;
        let Some(vocab) = vocab else {
            return fail("usage", "token lists need --graph to resolve labels");
        };
        vocab.parse_hypothesis(&tokens).or_fail("invalid_hypothesis")
    } else {
        HypothesisGraph::from_json_str(text).or_fail("invalid_hypothesis")
    }
}
