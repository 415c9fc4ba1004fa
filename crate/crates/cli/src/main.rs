use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use flate2::read::MultiGzDecoder;
use mogen::baselines::{fit_akom, fit_net, fit_rnd};
use mogen::model::fit_counts;
use mogen::path_data::{derive_topology, parse_ngram, split_train_validation, summary_stats};
use mogen::prediction::{
    cross_entropy_eval, sample_paths, top_path_roc, EvalConfig, EvaluationReport, FallbackPolicy,
    Predictor, RocConfig,
};
use mogen::selection::{default_max_order, select_order_with, SelectionConfig, WalkCounting};
use mogen::{normalize, parallel, MultiOrderModel, Path, PathMultiset};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "mogen",
    version,
    about = "Multi-order generative models for paths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus summary statistics.
    Stats {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Fit a model of fixed maximum order and write it as JSON.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        /// Maximum order K.
        #[arg(long)]
        order: usize,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Score every maximum order up to --max-order and pick the best.
    Select {
        #[command(flatten)]
        input: InputArgs,
        /// Largest candidate order; defaults to min(longest path, 6).
        #[arg(long)]
        max_order: Option<usize>,
        /// Clip path counts to reachability when computing degrees of freedom.
        #[arg(long)]
        reachable: bool,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Held-out next-element cross-entropy of one or more methods.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        holdout: HoldoutArgs,
        /// Methods to evaluate, comma separated.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "mogen")]
        method: Vec<Method>,
        /// Order of NET and AKOM, or a fixed K for the model.
        #[arg(long)]
        order: Option<usize>,
        /// Largest candidate order when K is selected on the training part.
        #[arg(long)]
        max_order: Option<usize>,
        /// Longest prefix used in a query.
        #[arg(long, default_value_t = 6)]
        max_prefix: usize,
        /// Score unknown prefixes as impossible instead of backing off.
        #[arg(long)]
        no_fallback: bool,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sample paths from a fitted model.
    Generate {
        /// Model JSON written by `fit`.
        #[arg(long)]
        model: PathBuf,
        /// Number of paths to draw.
        #[arg(long, short = 'n', default_value_t = 1000)]
        count: usize,
        /// Length guard; longer walks are dropped.
        #[arg(long, default_value_t = 1000)]
        max_len: usize,
        /// Separator of the written paths.
        #[arg(long, default_value = ",")]
        sep: String,
        /// Merge identical paths into weighted lines.
        #[arg(long)]
        weighted: bool,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// ROC curve for predicting the most frequent held-out paths.
    Roc {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        holdout: HoldoutArgs,
        /// Fixed K; selected on the training part when absent.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        max_order: Option<usize>,
        /// Generated paths; defaults to ten per validation observation.
        #[arg(long)]
        n_samples: Option<usize>,
        /// Share of distinct validation paths that count as frequent.
        #[arg(long, default_value_t = 0.10)]
        top_fraction: f64,
        #[arg(long, default_value_t = 1000)]
        max_len: usize,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct InputArgs {
    /// ngram file, optionally gzip compressed; `-` reads stdin.
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long, default_value = ",")]
    sep: String,
    /// Lines end with an observation count.
    #[arg(long)]
    weighted: bool,
}

#[derive(Args)]
struct HoldoutArgs {
    /// Held-out ngram file in the input format; replaces the random split.
    #[arg(long)]
    validation: Option<PathBuf>,
    /// Share of observations used for training.
    #[arg(long, default_value_t = 0.9)]
    train_frac: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    /// Aligned table instead of CSV.
    #[arg(long)]
    pretty: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Mogen,
    Rnd,
    Net,
    Akom,
}

fn open_input(path: &FsPath) -> Result<Box<dyn BufRead>> {
    let raw: Box<dyn Read> = if path == FsPath::new("-") {
        Box::new(io::stdin().lock())
    } else {
        Box::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?)
    };
    let mut reader = BufReader::new(raw);
    let gzip = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    Ok(if gzip {
        Box::new(BufReader::new(MultiGzDecoder::new(reader)))
    } else {
        Box::new(reader)
    })
}

fn read_corpus(path: &FsPath, sep: &str, weighted: bool) -> Result<PathMultiset> {
    parse_ngram(open_input(path)?, sep, weighted)
        .with_context(|| format!("reading {}", path.display()))
}

/// Re-expresses `other` in the vocabulary of `base`; unknown labels are an error.
fn align(base: &PathMultiset, other: &PathMultiset) -> Result<PathMultiset> {
    let paths = other
        .paths()
        .iter()
        .map(|p| {
            let labels: Vec<&str> = p
                .nodes
                .iter()
                .map(|&n| other.vocabulary().label(n).unwrap_or_default())
                .collect();
            Ok(Path::new(base.vocabulary().resolve(&labels)?, p.frequency))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathMultiset::new(base.vocabulary().clone(), paths)?)
}

/// Writes through a temporary file so a failed run leaves nothing behind.
fn emit(output: &OutputArgs, text: &str) -> Result<()> {
    let Some(path) = &output.out else {
        io::stdout().write_all(text.as_bytes())?;
        return Ok(());
    };
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(FsPath::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write to {}", dir.display()))?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn pretty_table(csv: &str) -> String {
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.len())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in &rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{s:>w$}", w = widths[i]))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}

fn render(output: &OutputArgs, csv: String) -> Result<()> {
    if output.pretty {
        emit(output, &pretty_table(&csv))
    } else {
        emit(output, &csv)
    }
}

fn with_workers<R: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<R> + Send,
) -> Result<R> {
    match workers {
        Some(w) => parallel::with_workers(w, f)?,
        None => f(),
    }
}

/// Training and validation parts, plus the generator for later random steps.
fn holdout(
    input: &InputArgs,
    holdout: &HoldoutArgs,
    seed: u64,
) -> Result<(PathMultiset, PathMultiset, ChaCha8Rng)> {
    let s = read_corpus(&input.input, &input.sep, input.weighted)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split_seed = rng.next_u64();
    let (train, valid) = match &holdout.validation {
        Some(v) => {
            let v = read_corpus(v, &input.sep, input.weighted)?;
            (s.clone(), align(&s, &v)?)
        }
        None => split_train_validation(&s, holdout.train_frac, split_seed)?,
    };
    Ok((train, valid, rng))
}

fn selected_model(
    train: &PathMultiset,
    order: Option<usize>,
    max_order: Option<usize>,
) -> Result<MultiOrderModel> {
    let k = match order {
        Some(k) => k,
        None => {
            let cfg = SelectionConfig::new(max_order.unwrap_or_else(|| default_max_order(train)));
            select_order_with(train, &derive_topology(train), &cfg)?.selected
        }
    };
    Ok(MultiOrderModel::fit(train, k)?)
}

fn stats(input: &InputArgs, output: &OutputArgs) -> Result<()> {
    let s = read_corpus(&input.input, &input.sep, input.weighted)?;
    let st = summary_stats(&s);
    let csv = format!(
        "total_paths,unique_paths,mean_length,median_length,min_length,max_length,nodes,links,density\n{},{},{},{},{},{},{},{},{}\n",
        st.total_paths,
        st.unique_paths,
        st.mean_length,
        st.median_length,
        st.min_length,
        st.max_length,
        st.nodes,
        st.links,
        st.density
    );
    render(output, csv)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats { input, output } => stats(&input, &output),
        Command::Fit {
            input,
            order,
            run,
            output,
        } => {
            let s = read_corpus(&input.input, &input.sep, input.weighted)?;
            let counts = with_workers(run.workers, || Ok(fit_counts(&s, order)?))?;
            let mut text = normalize(&counts)?.to_json()?;
            text.push('\n');
            emit(&output, &text)
        }
        Command::Select {
            input,
            max_order,
            reachable,
            run,
            output,
        } => {
            let s = read_corpus(&input.input, &input.sep, input.weighted)?;
            let mut cfg = SelectionConfig::new(max_order.unwrap_or_else(|| default_max_order(&s)));
            cfg.workers = run.workers;
            if reachable {
                cfg.counting = WalkCounting::Reachable;
            }
            let report = select_order_with(&s, &derive_topology(&s), &cfg)?;
            render(&output, report.to_csv())
        }
        Command::Evaluate {
            input,
            holdout: h,
            method,
            order,
            max_order,
            max_prefix,
            no_fallback,
            run,
            output,
        } => {
            let (train, valid, _) = holdout(&input, &h, run.seed)?;
            let cfg = EvalConfig {
                max_prefix,
                policy: if no_fallback {
                    FallbackPolicy::Disabled
                } else {
                    FallbackPolicy::Tiered
                },
                workers: None,
            };
            let reports = with_workers(run.workers, || {
                method
                    .iter()
                    .map(|m| {
                        let k = order.unwrap_or(1);
                        let p: Box<dyn Predictor> = match m {
                            Method::Mogen => Box::new(selected_model(&train, order, max_order)?),
                            Method::Rnd => Box::new(fit_rnd(&train)),
                            Method::Net => Box::new(fit_net(&train, k)?),
                            Method::Akom => Box::new(fit_akom(&train, k)?),
                        };
                        Ok(cross_entropy_eval(p.as_ref(), &valid, &cfg)?)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut csv = format!("{}\n", EvaluationReport::CSV_HEADER);
            for r in reports {
                let _ = writeln!(csv, "{}", r.csv_row());
            }
            render(&output, csv)
        }
        Command::Generate {
            model,
            count,
            max_len,
            sep,
            weighted,
            run,
            output,
        } => {
            let mut text = String::new();
            File::open(&model)
                .with_context(|| format!("cannot open {}", model.display()))?
                .read_to_string(&mut text)?;
            let model = MultiOrderModel::from_json(&text)
                .with_context(|| format!("reading {}", model.display()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            let draws = sample_paths(&model, &mut rng, count, max_len)?;
            let vocab = model.vocabulary();
            let line = |p: &Path| {
                p.nodes
                    .iter()
                    .map(|&n| vocab.label(n).unwrap_or_default())
                    .collect::<Vec<_>>()
                    .join(&sep)
            };
            let mut out = String::new();
            let kept = draws.iter().filter(|d| !d.truncated);
            if weighted {
                let mut merged: BTreeMap<Vec<mogen::NodeId>, u64> = BTreeMap::new();
                for d in kept {
                    *merged.entry(d.path.nodes.clone()).or_insert(0) += 1;
                }
                let mut merged: Vec<_> = merged.into_iter().collect();
                merged.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                for (nodes, c) in merged {
                    let _ = writeln!(out, "{}{sep}{c}", line(&Path::new(nodes, c)));
                }
            } else {
                for d in kept {
                    let _ = writeln!(out, "{}", line(&d.path));
                }
            }
            let dropped = draws.iter().filter(|d| d.truncated).count();
            if dropped > 0 {
                eprintln!("dropped {dropped} paths longer than {max_len} nodes");
            }
            emit(&output, &out)
        }
        Command::Roc {
            input,
            holdout: h,
            order,
            max_order,
            n_samples,
            top_fraction,
            max_len,
            run,
            output,
        } => {
            let (train, valid, mut rng) = holdout(&input, &h, run.seed)?;
            let model = with_workers(run.workers, || selected_model(&train, order, max_order))?;
            let mut cfg = RocConfig::for_validation(&valid, rng.next_u64());
            if let Some(n) = n_samples {
                cfg.n_samples = n;
            }
            cfg.top_fraction = top_fraction;
            cfg.max_len = max_len;
            let r = top_path_roc(&model, &valid, &cfg)?;
            if output.pretty {
                eprintln!(
                    "K={} positives={} negatives={} distinct_generated={} truncated={}",
                    model.max_order(),
                    r.positives,
                    r.negatives,
                    r.distinct_generated,
                    r.truncated_samples
                );
            }
            render(&output, r.curve.to_csv())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("mogen: error: {message}");
            ExitCode::FAILURE
        }
    }
}
