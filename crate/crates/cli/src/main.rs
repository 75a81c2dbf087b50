use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use microgrid::ccg::{ccg_train, CcgConfig};
use microgrid::cg::{cg_train, EmConfig};
use microgrid::corpus::Corpus;
use microgrid::eval::{
    self, ClarityModel, ClassifierConfig, EvalTuple, IntrusionAnswer, IntrusionConfig, IntrusionTask, ModelKind,
};
use microgrid::grid::{parse_pair, GridGeometry};
use microgrid::hierarchy::{
    collapse, hcg_joint_em, pretrain_stack, seed_comparison_harness, stack_log_likelihoods, HarnessConfig, Layer,
    LayerKind, LayerSpec, LayerStack, JointConfig,
};
use microgrid::io::export::{export_grid, model_grid, render_html, to_json};
use microgrid::io::raster::{self, Raster, DEFAULT_TOKENS_PER_IMAGE};
use microgrid::io::{read_corpus, write_corpus, ModelFile};

#[derive(Parser)]
#[command(name = "microgrid", version, about = "Counting grids and hierarchical counting grids")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainKind {
    Cg,
    Ccg,
    Hcg,
    Hccg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Json,
    Html,
}

#[derive(clap::Args)]
struct EmArgs {
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Stop when the relative bound change falls below this.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Theta iterations per CCG E-step.
    #[arg(long, default_value_t = 10)]
    inner_iters: usize,
    /// Theta iterations when folding in a document for its likelihood.
    #[arg(long, default_value_t = 50)]
    fold_in_iters: usize,
}

impl EmArgs {
    fn ccg(&self) -> CcgConfig {
        CcgConfig {
            em: EmConfig::new(self.max_iters, self.tol),
            inner_iters: self.inner_iters,
            fold_in_iters: self.fold_in_iters,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a corpus.
    Train {
        #[arg(long, value_enum)]
        model: TrainKind,
        #[arg(long, default_value = "32x32")]
        grid: String,
        #[arg(long, default_value = "5x5")]
        window: String,
        /// Layer list, bottom first, e.g. `32x32:5x5:ccg,32x32:5x5:cg`; a
        /// layer may add `:K/SIGMA` to smooth the counts it receives.
        #[arg(long)]
        layers: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        em: EmArgs,
        /// Joint refinement iterations after pretraining a two-layer HCG.
        #[arg(long, default_value_t = 50)]
        joint_iters: usize,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace a stack by the equivalent single grid.
    Collapse {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-document and total log-likelihood of a corpus.
    Loglik {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 50)]
        fold_in_iters: usize,
    },
    /// Flat CG against two-layer HCG over many seeds at equal budget.
    CompareSeeds {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "24x24")]
        grid: String,
        #[arg(long, default_value = "5x5")]
        window: String,
        /// Top-layer geometry as `ExE:WxW`; defaults to the flat geometry.
        #[arg(long)]
        top: Option<String>,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Budget in flat EM iterations.
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sample word tuples from a model's cells.
    Tuples {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..=5))]
        n: u32,
        #[arg(long, default_value_t = 5000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Consistency, diversity and clarity of sampled tuples.
    Metrics {
        #[arg(long)]
        tuples: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        clarity_samples: usize,
        #[arg(long, default_value_t = 10)]
        diversity_repeats: usize,
        /// Also report top-k coherence of this model's cells.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        coherence_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximum-likelihood classification with one grid per class.
    Classify {
        #[arg(long = "in")]
        input: PathBuf,
        /// Held-out corpus; without it, cross-validate on `--in`.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ccg")]
        model: ClassifierKind,
        #[arg(long, default_value = "16x16")]
        grid: String,
        #[arg(long, default_value = "3x3")]
        window: String,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        em: EmArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate word-intrusion tasks as JSON lines.
    Intrusion {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=3))]
        window: u32,
        #[arg(long, default_value_t = 5)]
        in_group_size: usize,
        #[arg(long, default_value_t = 0.1)]
        bottom_quantile: f64,
        #[arg(long, default_value_t = 5)]
        top_k_other: usize,
        /// Identifier written into every task; defaults to the model file name.
        #[arg(long)]
        model_id: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score intrusion answers against their tasks.
    ScoreIntrusion {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        answers: PathBuf,
        /// Width of the distance bins.
        #[arg(long, default_value_t = 1.0)]
        bin_width: f64,
    },
    /// Export a model's strongest words per cell as JSON or HTML.
    Export {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: ExportFormat,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert images (PNG, PGM, or an IDX file) into a pixel corpus.
    ImagesToCorpus {
        images: Vec<PathBuf>,
        #[arg(long)]
        idx_images: Option<PathBuf>,
        #[arg(long)]
        idx_labels: Option<PathBuf>,
        /// Use at most this many IDX images.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TOKENS_PER_IMAGE)]
        tokens: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Overlay pairs of digits from different classes into a pixel corpus.
    MixDigits {
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_TOKENS_PER_IMAGE)]
        tokens: usize,
        /// Source digits from IDX files; without them digits are rendered.
        #[arg(long, requires = "idx_labels")]
        idx_images: Option<PathBuf>,
        #[arg(long)]
        idx_labels: Option<PathBuf>,
        /// Rendered digits per class when no IDX source is given.
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        /// Side of rendered digits.
        #[arg(long, default_value_t = 28)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the source pairs; defaults to `<out>.pairs.tsv`.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierKind {
    Cg,
    Ccg,
}

fn geometry(grid: &str, window: &str) -> Result<GridGeometry> {
    Ok(GridGeometry::new(parse_pair(grid)?, parse_pair(window)?)?)
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    read_corpus(path).with_context(|| format!("reading corpus {}", path.display()))
}

fn load_model(path: &Path) -> Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("reading model {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn train(
    kind: TrainKind,
    geometry: GridGeometry,
    layers: Option<&str>,
    seed: u64,
    em: &EmArgs,
    joint_iters: usize,
    corpus: &Corpus,
) -> Result<LayerStack> {
    let config = em.ccg();
    let stack = match kind {
        TrainKind::Cg => {
            let fit = cg_train(corpus, geometry, seed, &config.em)?;
            log::info!("CG: {} bound evaluations, final {:?}", fit.trace.len(), fit.trace.last());
            LayerStack::new(vec![Layer::Cg(fit.model)])?
        }
        TrainKind::Ccg => {
            let fit = ccg_train(corpus, geometry, seed, &config)?;
            log::info!("CCG: {} bound evaluations, final {:?}", fit.trace.len(), fit.trace.last());
            LayerStack::new(vec![Layer::Ccg(fit.model)])?
        }
        TrainKind::Hcg | TrainKind::Hccg => {
            let top_kind = if matches!(kind, TrainKind::Hcg) { LayerKind::Cg } else { LayerKind::Ccg };
            let specs = match layers {
                Some(s) => LayerSpec::parse_list(s)?,
                None => vec![LayerSpec::new(geometry, LayerKind::Ccg), LayerSpec::new(geometry, top_kind)],
            };
            if specs.len() < 2 {
                bail!("a hierarchical model needs at least two layers");
            }
            if specs.last().map(|s| s.kind) != Some(top_kind) {
                bail!("the top layer of this model must be {top_kind}");
            }
            let fit = pretrain_stack(corpus, &specs, seed, &config)?;
            if fit.stack.is_two_layer_hcg() && joint_iters > 0 {
                let joint = JointConfig {
                    em: EmConfig::new(joint_iters, em.tol),
                    alternations: 5,
                    init_fold_in_iters: em.inner_iters,
                };
                let refined = hcg_joint_em(&fit.stack, &corpus.docs, &joint)?;
                log::info!("joint refinement: bound {:?} -> {:?}", refined.trace.first(), refined.trace.last());
                refined.stack
            } else {
                fit.stack
            }
        }
    };
    Ok(stack)
}

fn loglik(model: &ModelFile, corpus: &Corpus, fold_in_iters: usize) -> Result<Vec<f64>> {
    model.check_corpus(corpus)?;
    if model.stack.len() == 1 {
        let layer = model.stack.bottom();
        Ok(corpus
            .docs
            .iter()
            .map(|d| layer.log_likelihood(d, fold_in_iters))
            .collect::<microgrid::Result<_>>()?)
    } else {
        Ok(stack_log_likelihoods(&model.stack, &corpus.docs, fold_in_iters)?)
    }
}

#[derive(Serialize)]
struct MetricsReport {
    tuples: usize,
    consistency: f64,
    diversity: eval::DiversityCurve,
    mean_clarity_bits: f64,
    clarity_defined_for: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_coherence: Option<f64>,
}

fn read_lines<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    eval::read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn load_idx(images: &Path, labels: Option<&Path>, limit: Option<usize>) -> Result<(Vec<Raster>, Option<Vec<usize>>)> {
    let mut imgs = raster::read_idx_images(images).with_context(|| format!("reading {}", images.display()))?;
    let mut labs = match labels {
        Some(p) => Some(raster::read_idx_labels(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    if let Some(l) = &labs {
        if l.len() != imgs.len() {
            bail!("{} images but {} labels", imgs.len(), l.len());
        }
    }
    if let Some(n) = limit {
        imgs.truncate(n);
        if let Some(l) = labs.as_mut() {
            l.truncate(n);
        }
    }
    Ok((imgs, labs))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            model,
            grid,
            window,
            layers,
            seed,
            em,
            joint_iters,
            input,
            out,
        } => {
            let corpus = load_corpus(&input)?;
            let stack = train(model, geometry(&grid, &window)?, layers.as_deref(), seed, &em, joint_iters, &corpus)?;
            ModelFile::new(&corpus, stack)?.save(&out)?;
        }
        Command::Collapse { input, out } => {
            let model = load_model(&input)?;
            let layer = collapse(&model.stack)?;
            let collapsed = ModelFile {
                vocab: model.vocab,
                image_shape: model.image_shape,
                stack: LayerStack::new(vec![layer])?,
            };
            collapsed.save(&out)?;
        }
        Command::Loglik {
            model,
            input,
            fold_in_iters,
        } => {
            let model = load_model(&model)?;
            let corpus = load_corpus(&input)?;
            let ll = loglik(&model, &corpus, fold_in_iters)?;
            let mut out = std::io::stdout().lock();
            for (id, v) in corpus.doc_ids.iter().zip(&ll) {
                writeln!(out, "{id}\t{v:e}")?;
            }
            writeln!(out, "total\t{:e}", ll.iter().sum::<f64>())?;
        }
        Command::CompareSeeds {
            input,
            grid,
            window,
            top,
            seeds,
            budget,
            seed,
            tol,
            json,
        } => {
            let corpus = load_corpus(&input)?;
            let top_geometry = match top {
                Some(t) => {
                    let (g, w) = t.split_once(':').context("--top must look like ExE:WxW")?;
                    Some(geometry(g, w)?)
                }
                None => None,
            };
            let config = HarnessConfig {
                n_seeds: seeds,
                budget,
                base_seed: seed,
                rel_tol: tol,
                top_geometry,
                ..HarnessConfig::default()
            };
            let report = seed_comparison_harness(&corpus, geometry(&grid, &window)?, &config)?;
            print!("{report}");
            if let Some(p) = json {
                write_json(&report, Some(&p))?;
            }
        }
        Command::Tuples {
            model,
            n,
            count,
            seed,
            out,
        } => {
            let model = load_model(&model)?;
            let layer = model_grid(&model)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tuples = eval::sample_tuples(layer.grid(), n as usize, count, &mut rng)?;
            let mut w = create(&out)?;
            for t in &tuples {
                serde_json::to_writer(&mut w, t)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            if tuples.len() < count {
                log::warn!("only {} distinct tuples could be drawn", tuples.len());
            }
        }
        Command::Metrics {
            tuples,
            corpus,
            clarity_samples,
            diversity_repeats,
            model,
            coherence_k,
            seed,
            out,
        } => {
            let tuples: Vec<EvalTuple> = read_lines(&tuples)?;
            let corpus = load_corpus(&corpus)?;
            for t in &tuples {
                if let Some(w) = t.words.iter().find(|w| **w >= corpus.vocab_size()) {
                    bail!("tuple word {w} is outside the corpus vocabulary");
                }
            }
            let index = corpus.inverted_index();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let diversity = eval::diversity_curve(&tuples, &index, diversity_repeats, &mut rng);
            let clarity = ClarityModel::new(&corpus);
            let (mean_clarity_bits, clarity_defined_for) = clarity.mean_clarity(&tuples, clarity_samples, &mut rng);
            let mean_coherence = match model {
                Some(p) => {
                    let m = load_model(&p)?;
                    m.check_corpus(&corpus)?;
                    let scores = eval::coherence_topk(model_grid(&m)?.grid(), &index, coherence_k, false);
                    Some(scores.iter().sum::<f64>() / scores.len().max(1) as f64)
                }
                None => None,
            };
            let report = MetricsReport {
                tuples: tuples.len(),
                consistency: eval::consistency(&tuples, &index),
                diversity,
                mean_clarity_bits,
                clarity_defined_for,
                mean_coherence,
            };
            write_json(&report, out.as_deref())?;
        }
        Command::Classify {
            input,
            test,
            model,
            grid,
            window,
            folds,
            seed,
            em,
            out,
        } => {
            let corpus = load_corpus(&input)?;
            let g = geometry(&grid, &window)?;
            let kind = match model {
                ClassifierKind::Cg => ModelKind::Cg,
                ClassifierKind::Ccg => ModelKind::Ccg,
            };
            let config = ClassifierConfig { ccg: em.ccg(), seed };
            match test {
                Some(p) => {
                    let test = load_corpus(&p)?;
                    if test.vocab_hash() != corpus.vocab_hash() {
                        bail!("training and test corpora have different vocabularies");
                    }
                    let truth: Option<Vec<usize>> = match (&test.labels, &corpus.labels) {
                        (Some(l), Some(_)) => Some(
                            l.iter()
                                .map(|&c| {
                                    let name = &test.label_names[c];
                                    corpus
                                        .label_names
                                        .iter()
                                        .position(|n| n == name)
                                        .with_context(|| format!("test label {name} not seen in training"))
                                })
                                .collect::<Result<_>>()?,
                        ),
                        _ => None,
                    };
                    let result = eval::classify_max_likelihood(&corpus, &test.docs, truth.as_deref(), kind, g, &config)?;
                    if let Some(a) = result.accuracy {
                        eprintln!("accuracy {a:.4}");
                    }
                    let labels: Vec<&str> = result.predictions.iter().map(|c| corpus.label_names[*c].as_str()).collect();
                    let report = serde_json::json!({
                        "accuracy": result.accuracy,
                        "predictions": test.doc_ids.iter().zip(&labels).map(|(d, l)| (d.clone(), l.to_string())).collect::<Vec<_>>(),
                    });
                    write_json(&report, out.as_deref())?;
                }
                None => {
                    let cv = eval::cross_validate(&corpus, kind, g, folds, &config)?;
                    eprintln!("{folds}-fold accuracy {:.4}", cv.accuracy);
                    write_json(&cv, out.as_deref())?;
                }
            }
        }
        Command::Intrusion {
            model,
            count,
            window,
            in_group_size,
            bottom_quantile,
            top_k_other,
            model_id,
            seed,
            out,
        } => {
            let id = model_id.unwrap_or_else(|| {
                model
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let m = load_model(&model)?;
            let layer = model_grid(&m)?;
            let config = IntrusionConfig {
                window: window as usize,
                in_group_size,
                bottom_quantile,
                top_k_other,
                ..IntrusionConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tasks = eval::generate_intrusion_tasks(layer.grid(), &m.vocab, count, &config, &id, &mut rng)?;
            let mut w = create(&out)?;
            eval::write_tasks_jsonl(&tasks, &mut w)?;
            w.flush()?;
        }
        Command::ScoreIntrusion {
            tasks,
            answers,
            bin_width,
        } => {
            let tasks: Vec<IntrusionTask> = read_lines(&tasks)?;
            let answers: Vec<IntrusionAnswer> = read_lines(&answers)?;
            write_json(&eval::score_intrusion(&tasks, &answers, bin_width), None)?;
        }
        Command::Export {
            model,
            format,
            top_k,
            threshold,
            out,
        } => {
            let m = load_model(&model)?;
            let layer = model_grid(&m)?;
            let export = export_grid(&layer, &m.vocab, m.image_shape, top_k, threshold)?;
            let text = match format {
                ExportFormat::Json => to_json(&export)?,
                ExportFormat::Html => render_html(&layer, &export)?,
            };
            std::fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::ImagesToCorpus {
            images,
            idx_images,
            idx_labels,
            limit,
            tokens,
            out,
        } => {
            let (imgs, labels) = match idx_images {
                Some(p) => {
                    if !images.is_empty() {
                        bail!("give either image files or --idx-images, not both");
                    }
                    load_idx(&p, idx_labels.as_deref(), limit)?
                }
                None => {
                    let imgs = images
                        .iter()
                        .map(|p| Raster::load(p).with_context(|| format!("reading {}", p.display())))
                        .collect::<Result<Vec<_>>>()?;
                    (imgs, None)
                }
            };
            if imgs.is_empty() {
                bail!("no images given");
            }
            let names: Option<Vec<String>> = labels.map(|l| l.iter().map(|c| c.to_string()).collect());
            let corpus = raster::images_to_corpus(&imgs, tokens, names.as_deref())?;
            write_corpus(&corpus, &out)?;
        }
        Command::MixDigits {
            count,
            tokens,
            idx_images,
            idx_labels,
            per_class,
            size,
            seed,
            out,
            truth,
        } => {
            let (imgs, labels) = match idx_images {
                Some(p) => {
                    let (i, l) = load_idx(&p, idx_labels.as_deref(), None)?;
                    (i, l.context("--idx-labels is required")?)
                }
                None => raster::synthetic_digits(per_class, size, seed),
            };
            let mixed = raster::synthesize_mixed_digits(&imgs, &labels, count, tokens, seed)?;
            write_corpus(&mixed.corpus, &out)?;
            let truth = truth.unwrap_or_else(|| {
                let mut s = out.clone().into_os_string();
                s.push(".pairs.tsv");
                PathBuf::from(s)
            });
            let mut w = create(&truth)?;
            writeln!(w, "doc_id\tsource_a\tsource_b\tlabel_a\tlabel_b")?;
            for (i, ((a, b), (la, lb))) in mixed.sources.iter().zip(&mixed.pair_labels).enumerate() {
                writeln!(w, "{}\t{a}\t{b}\t{la}\t{lb}", mixed.corpus.doc_ids[i])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MICROGRID_THREADS") {
        let n: usize = v.trim().parse().context("MICROGRID_THREADS must be a positive integer")?;
        if n == 0 {
            bail!("MICROGRID_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose { "info" } else { "warn" }))
        .init();
    init_threads()?;
    run(cli)
}
