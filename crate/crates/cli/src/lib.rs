//! The `draftlab` command line: simulation, import, training, evaluation,
//! synergy analysis and the live draft server.

pub mod http;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use draftlab_core::agents::{Agent, AgentCatalog, AgentSpec};
use draftlab_core::dataset::{
    import_draftsim_export, load_logs, split_dataset, write_logs, DraftLog, LogHeader,
};
use draftlab_core::engine::{simulate_corpus, SEATS};
use draftlab_core::eval::{self, compare_agents, EvalReport, DEFAULT_RESAMPLES};
use draftlab_core::model_io::{self, load_model_dir, Model};
use draftlab_core::nn::TrainConfig;
use draftlab_core::service::DraftService;
use draftlab_core::{synergy, training, CardSet};

#[derive(Debug, Parser)]
#[command(name = "draftlab", version, about = "Booster draft simulation and pick-agent evaluation")]
pub struct Cli {
    /// Worker threads for per-draft work (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SetArg {
    /// Card set JSON file, or `desk` for the bundled demo set.
    #[arg(long)]
    pub set: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic draft logs with bot agents.
    Simulate {
        #[command(flatten)]
        set: SetArg,
        /// One agent spec for every seat, or eight comma-separated specs.
        #[arg(long)]
        agents: String,
        #[arg(long)]
        drafts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Seats to mark as human: `all`, `none` or a list like `0,3`.
        #[arg(long, default_value = "none")]
        human_seats: String,
        /// Directory of trained models referenced by `bayes:`/`nnet:` specs.
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Convert a CSV pick export into canonical JSONL logs.
    Import {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split logs into train and test files by draft.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to `<input stem>.train.jsonl` next to the input.
        #[arg(long)]
        train_out: Option<PathBuf>,
        /// Defaults to `<input stem>.test.jsonl` next to the input.
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
    /// Count pick statistics into a Bayes model.
    TrainBayes {
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        out: PathBuf,
        /// Train on bot seats too.
        #[arg(long)]
        all_seats: bool,
    },
    /// Train the pick network.
    TrainNnet {
        #[arg(long)]
        train: PathBuf,
        #[command(flatten)]
        set: SetArg,
        /// TrainConfig JSON; missing fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Run k-fold cross-validation before the final fit.
        #[arg(long)]
        cv: Option<usize>,
        /// Per-epoch metrics CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        all_seats: bool,
    },
    /// Top-one accuracy of one or more agents on a test file.
    Eval {
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        set: SetArg,
        /// Agent spec; repeat for a comparison.
        #[arg(long = "agent", required = true)]
        agents: Vec<String>,
        /// Directory for JSON and CSV reports.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        /// `SPEC=FRACTION`; exit 1 when the agent scores below it.
        #[arg(long = "min-accuracy")]
        min_accuracy: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        all_seats: bool,
    },
    /// Co-draft statistics and the 2D synergy embedding.
    Synergy {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        human_only: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = synergy::EMBED_MAX_ITERS)]
        iters: usize,
    },
    /// Serve live drafts over HTTP.
    Serve {
        #[command(flatten)]
        set: SetArg,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Append-only snapshot directory for crash recovery.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Allowed CORS origin; repeat for several. Any origin when omitted.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
    },
}

pub fn load_card_set(arg: &str) -> Result<Arc<CardSet>> {
    let set = if arg == "desk" {
        CardSet::desk()
    } else {
        draftlab_core::load_set(arg).with_context(|| format!("loading card set {arg}"))?
    };
    Ok(Arc::new(set))
}

/// Catalog with every model in `dir` plus any `bayes:`/`nnet:` spec whose
/// model part is a path to a model file.
pub fn build_catalog(set: &Arc<CardSet>, dir: Option<&Path>, specs: &[String]) -> Result<AgentCatalog> {
    let mut catalog = AgentCatalog::new(Arc::clone(set));
    if let Some(dir) = dir {
        let names = load_model_dir(dir, &mut catalog)
            .with_context(|| format!("loading models from {}", dir.display()))?;
        log::info!("loaded {} models from {}", names.len(), dir.display());
    }
    for spec in specs {
        let model = match spec.parse::<AgentSpec>()? {
            AgentSpec::Bayes { model } | AgentSpec::NNet { model } => model,
            _ => continue,
        };
        let (bayes, nnet) = catalog.model_names();
        if bayes.contains(&model) || nnet.contains(&model) || !Path::new(&model).is_file() {
            continue;
        }
        match model_io::load_model(&model, set).with_context(|| format!("loading model {model}"))? {
            Model::Bayes(m) => catalog.add_bayes(model.clone(), Arc::new(m))?,
            Model::NNet(m) => catalog.add_nnet(model.clone(), Arc::new(m))?,
        }
    }
    Ok(catalog)
}

fn parse_human_seats(arg: &str) -> Result<Vec<usize>> {
    match arg {
        "all" => Ok((0..SEATS).collect()),
        "none" | "" => Ok(Vec::new()),
        list => list
            .split(',')
            .map(|s| {
                let k: usize = s.trim().parse().with_context(|| format!("bad seat {s:?}"))?;
                if k >= SEATS {
                    bail!("seat {k} out of range");
                }
                Ok(k)
            })
            .collect(),
    }
}

fn agent_list(arg: &str) -> Result<Vec<String>> {
    let specs: Vec<String> = arg.split(',').map(|s| s.trim().to_string()).collect();
    match specs.len() {
        1 => Ok(vec![specs[0].clone(); SEATS]),
        SEATS => Ok(specs),
        n => bail!("expected 1 or {SEATS} agent specs, got {n}"),
    }
}

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let name = input.file_name().and_then(|n| n.to_str()).unwrap_or("logs");
    let stem = name
        .strip_suffix(".gz")
        .unwrap_or(name)
        .trim_end_matches(".jsonl");
    input.with_file_name(format!("{stem}.{suffix}.jsonl"))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

fn label_reports(reports: &mut [EvalReport], specs: &[String]) {
    for (r, s) in reports.iter_mut().zip(specs) {
        r.agent = s.clone();
    }
}

fn file_name_for(spec: &str) -> String {
    spec.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn write_reports(dir: &Path, reports: &[EvalReport], resamples: usize, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    for r in reports {
        let base = file_name_for(&r.agent);
        eval::write_report_json(BufWriter::new(File::create(dir.join(format!("{base}.json")))?), r)?;
        eval::write_per_pick_csv(File::create(dir.join(format!("{base}.per_pick.csv")))?, r)?;
        eval::write_strength_csv(File::create(dir.join(format!("{base}.strength.csv")))?, r)?;
    }
    if reports.len() >= 2 {
        let cmp = compare_agents(reports, resamples, seed)?;
        serde_json::to_writer_pretty(File::create(dir.join("comparison.json"))?, &cmp)?;
        eval::write_comparison_csv(File::create(dir.join("comparison.csv"))?, &cmp)?;
    }
    Ok(())
}

fn parse_threshold(arg: &str) -> Result<(String, f64)> {
    let (spec, value) = arg
        .rsplit_once('=')
        .with_context(|| format!("threshold {arg:?} is not SPEC=FRACTION"))?;
    let v: f64 = value.parse().with_context(|| format!("bad fraction in {arg:?}"))?;
    Ok((spec.to_string(), v))
}

/// Runs a parsed command. Errors map to exit code 1 in `main`.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Simulate {
            set,
            agents,
            drafts,
            seed,
            out,
            human_seats,
            models,
        } => {
            let set = load_card_set(&set.set)?;
            let specs = agent_list(&agents)?;
            let catalog = build_catalog(&set, models.as_deref(), &specs)?;
            let built: Vec<Arc<dyn Agent>> = specs
                .iter()
                .map(|s| catalog.build_str(s))
                .collect::<draftlab_core::Result<_>>()?;
            let humans = parse_human_seats(&human_seats)?;
            let logs = simulate_corpus(&set, &built, drafts, seed, &humans)?;
            create_parent(&out)?;
            let header = LogHeader::new(set.code.clone())
                .with_seed(seed)
                .with_source(format!("simulate:{}", specs.join(",")));
            write_logs(&out, &header, &logs)?;
            println!("wrote {} seat logs from {drafts} drafts to {}", logs.len(), out.display());
        }
        Command::Import { input, set, out } => {
            let set = load_card_set(&set.set)?;
            let outcome = import_draftsim_export(&input, &set)?;
            create_parent(&out)?;
            let header = LogHeader::new(set.code.clone()).with_source(input.display().to_string());
            write_logs(&out, &header, &outcome.logs)?;
            println!(
                "imported {} seat logs, skipped {} truncated",
                outcome.logs.len(),
                outcome.skipped_truncated
            );
        }
        Command::Split {
            input,
            ratio,
            seed,
            train_out,
            test_out,
        } => {
            let file = draftlab_core::dataset::read_logs(&input)?;
            let (train, test) = split_dataset(file.logs, ratio, seed)?;
            let header = LogHeader {
                seed: Some(seed),
                ..file.header
            };
            let train_path = train_out.unwrap_or_else(|| sibling(&input, "train"));
            let test_path = test_out.unwrap_or_else(|| sibling(&input, "test"));
            write_logs(&train_path, &header, &train)?;
            write_logs(&test_path, &header, &test)?;
            let drafts = |l: &[DraftLog]| {
                let mut ids: Vec<&str> = l.iter().map(|x| x.draft_id.as_str()).collect();
                ids.sort_unstable();
                ids.dedup();
                ids.len()
            };
            println!(
                "train: {} drafts -> {}; test: {} drafts -> {}",
                drafts(&train),
                train_path.display(),
                drafts(&test),
                test_path.display()
            );
        }
        Command::TrainBayes {
            train,
            set,
            out,
            all_seats,
        } => {
            let set = load_card_set(&set.set)?;
            let file = load_logs(&train, &set)?;
            let model = training::train_bayes(&file.logs, &set, !all_seats)?;
            create_parent(&out)?;
            model_io::save_model(&out, &Model::Bayes(model))?;
            println!("saved bayes model to {}", out.display());
        }
        Command::TrainNnet {
            train,
            set,
            config,
            out,
            cv,
            metrics,
            epochs,
            seed,
            all_seats,
        } => {
            let set = load_card_set(&set.set)?;
            let mut cfg: TrainConfig = match config {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => TrainConfig::default(),
            };
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let file = load_logs(&train, &set)?;
            let result = training::train_nnet(&file.logs, &set, &cfg, cv, !all_seats, |m| {
                let fold = m.fold.map_or_else(|| "all".to_string(), |f| f.to_string());
                eprintln!("epoch {:>3} fold {fold:>3} loss {:.4} accuracy {:.4}", m.epoch, m.loss, m.accuracy);
            })?;
            if let Some(path) = metrics {
                create_parent(&path)?;
                training::write_metrics_csv(File::create(&path)?, &result.metrics)?;
            }
            if !result.fold_accuracy.is_empty() {
                let mean = result.fold_accuracy.iter().sum::<f64>() / result.fold_accuracy.len() as f64;
                println!("cross-validation accuracy {mean:.4} per fold {:?}", result.fold_accuracy);
            }
            create_parent(&out)?;
            model_io::save_model(&out, &Model::NNet(result.model))?;
            println!("saved nnet model to {}", out.display());
        }
        Command::Eval {
            test,
            set,
            agents,
            report,
            models,
            min_accuracy,
            resamples,
            seed,
            all_seats,
        } => {
            let set = load_card_set(&set.set)?;
            let thresholds: Vec<(String, f64)> =
                min_accuracy.iter().map(|t| parse_threshold(t)).collect::<Result<_>>()?;
            let catalog = build_catalog(&set, models.as_deref(), &agents)?;
            let file = load_logs(&test, &set)?;
            let mut reports = Vec::with_capacity(agents.len());
            for spec in &agents {
                let agent = catalog.build_str(spec)?;
                reports.push(eval::evaluate(agent.as_ref(), &file.logs, &set, !all_seats)?);
            }
            label_reports(&mut reports, &agents);
            println!("{:<32} {:>10} {:>10}", "agent", "accuracy", "events");
            for r in &reports {
                println!("{:<32} {:>9.2}% {:>10}", r.agent, 100.0 * r.overall_accuracy, r.n_events);
            }
            if reports.len() >= 2 {
                let cmp = compare_agents(&reports, resamples, seed)?;
                for s in &cmp.ranked {
                    println!(
                        "{:<32} 95% CI [{:.2}%, {:.2}%]",
                        s.agent,
                        100.0 * s.ci.low,
                        100.0 * s.ci.high
                    );
                }
            }
            if let Some(dir) = report {
                write_reports(&dir, &reports, resamples, seed)?;
            }
            let mut failed = Vec::new();
            for (spec, min) in &thresholds {
                let r = reports
                    .iter()
                    .find(|r| &r.agent == spec)
                    .with_context(|| format!("threshold names agent {spec} which was not evaluated"))?;
                if r.overall_accuracy < *min {
                    failed.push(format!("{spec}: {:.4} < {min}", r.overall_accuracy));
                }
            }
            if !failed.is_empty() {
                bail!("accuracy below threshold: {}", failed.join("; "));
            }
        }
        Command::Synergy {
            input,
            set,
            out,
            human_only,
            seed,
            iters,
        } => {
            let set = load_card_set(&set.set)?;
            let file = load_logs(&input, &set)?;
            let m = synergy::cooccurrence(&file.logs, &set, human_only)?;
            let e = synergy::embed_2d(&m.d, m.len(), seed, iters)?;
            fs::create_dir_all(&out)?;
            synergy::export_plot_data(File::create(out.join("plot.csv"))?, &m, &e, &set)?;
            let summary = serde_json::json!({
                "collections": m.collections,
                "cards": m.len(),
                "dropped": m.dropped.iter().map(|&c| set.card(c).name.clone()).collect::<Vec<_>>(),
                "pearson_r": e.r,
                "iterations": e.iterations,
                "seed": seed,
            });
            fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
            println!(
                "embedded {} cards from {} collections, r = {:.4}",
                m.len(),
                m.collections,
                e.r
            );
        }
        Command::Serve {
            set,
            models,
            port,
            host,
            snapshots,
            cors_origins,
        } => {
            let set = load_card_set(&set.set)?;
            let catalog = build_catalog(&set, models.as_deref(), &[])?;
            let mut service = DraftService::new(vec![catalog]);
            if let Some(dir) = snapshots {
                let (s, n) = service.with_snapshots(&dir)?;
                log::info!("recovered {n} drafts from {}", dir.display());
                service = s;
            }
            let app = http::router(Arc::new(service), &cors_origins);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                println!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
    }
    Ok(())
}
