//! callcast: generate synthetic earnings-call corpora, run the numeral
//! pre-training tasks, train the multi-task forecaster, evaluate it, and
//! drive the trading simulation.
//!
//! Exit codes: 0 success, 2 usage, 3 validation/configuration, 4 numeric
//! failure, 5 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use callcast_core::data::synthetic::{generate, EffectSizes};
use callcast_core::data::{load_corpus, save_corpus, split_chronological, CallRecord, Split};
use callcast_core::encoder::Model;
use callcast_core::error::Error;
use callcast_core::pipeline::{
    corpus_summary, evaluate, parse_config_text, pretrain_mc, pretrain_ncc,
    render_trajectories, simulate_strategy, simulate_with_model, train, write_manifest,
    RunConfig, TrainOptions,
};
use callcast_core::trading::Strategy;

#[derive(Parser)]
#[command(name = "callcast", version, about = "Numeral-aware multi-task forecasting over earnings-call data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PretrainTask {
    /// Numeral category classification over masked sentences.
    Ncc,
    /// Magnitude comparison (list maximum of five numbers).
    Mc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitName {
    Train,
    Valid,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyName {
    /// Movement calls from the trained model.
    Model,
    BuyAll,
    ShortAll,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus with planted signal.
    GenData {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        calls: usize,
        /// Corpus file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        effect_text: f64,
        #[arg(long, default_value_t = 1.0)]
        effect_numeral: f64,
        #[arg(long, default_value_t = 1.0)]
        effect_audio: f64,
    },
    /// Run one adaptive pre-training task and write a checkpoint.
    Pretrain {
        #[arg(long, value_enum)]
        task: PretrainTask,
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory for checkpoints and reports.
        #[arg(long)]
        out: PathBuf,
        /// Flat key=value config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// key=value overrides applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Prior-stage checkpoint (defaults to <out>/ncc.ckpt for --task mc).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the multi-task forecaster.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Pre-trained checkpoint (defaults to <out>/mc.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Fixed equal task weights instead of Pareto decomposition.
        #[arg(long)]
        no_pareto: bool,
        /// Start from a fresh encoder instead of a pre-trained checkpoint.
        #[arg(long)]
        no_pretrain: bool,
        /// Zero the audio pathway.
        #[arg(long)]
        text_only: bool,
    },
    /// Report MCC/F1/volatility-MSE per horizon on a split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitName::Test)]
        split: SplitName,
        /// Optional directory for the metrics report and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trading simulation on the test split.
    Simulate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        tau: i64,
        #[arg(long, value_enum, default_value_t = StrategyName::Model)]
        strategy: StrategyName,
        /// Seed for the random baseline.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        risk_free_rate: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dimension { .. } | Error::Contract(_) | Error::Config(_) | Error::Parse { .. } => 3,
        Error::Numeric { .. } => 4,
        Error::Io(_) => 5,
    }
}

fn load_config(path: Option<&Path>, sets: &[String]) -> Result<(RunConfig, String), Error> {
    let mut cfg = match path {
        Some(p) => parse_config_text(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    for kv in sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    let rendered = format!("{cfg:?}");
    Ok((cfg, rendered))
}

fn load_split(corpus: &Path) -> Result<Split, Error> {
    let records = load_corpus(corpus)?;
    split_chronological(records)
}

fn split_of<'a>(split: &'a Split, name: SplitName) -> &'a [CallRecord] {
    match name {
        SplitName::Train => &split.train,
        SplitName::Valid => &split.valid,
        SplitName::Test => &split.test,
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::GenData {
            seed,
            calls,
            out,
            effect_text,
            effect_numeral,
            effect_audio,
        } => {
            for (name, v) in [
                ("effect-text", effect_text),
                ("effect-numeral", effect_numeral),
                ("effect-audio", effect_audio),
            ] {
                if v < 0.0 {
                    return Err(Error::config(format!("--{name} must be >= 0, got {v}")));
                }
            }
            let effects = EffectSizes {
                text: effect_text,
                numeral: effect_numeral,
                audio: effect_audio,
            };
            let (records, _latents) = generate(seed, calls, &effects);
            save_corpus(&out, &records)?;
            print!("{}", corpus_summary(&records));
            println!("out={}", out.display());
            Ok(())
        }

        Command::Pretrain {
            task,
            corpus,
            out,
            config,
            sets,
            checkpoint,
        } => {
            let (cfg, cfg_text) = load_config(config.as_deref(), &sets)?;
            let split = load_split(&corpus)?;
            fs::create_dir_all(&out)?;
            match task {
                PretrainTask::Ncc => {
                    let (model, report) = pretrain_ncc(&split, &cfg)?;
                    model.save(&out.join("ncc.ckpt"))?;
                    fs::write(out.join("pretrain_ncc_report.txt"), report.render())?;
                    print!("{}", report.render());
                }
                PretrainTask::Mc => {
                    let ckpt = checkpoint.unwrap_or_else(|| out.join("ncc.ckpt"));
                    if !ckpt.exists() {
                        return Err(Error::config(format!(
                            "staged run needs the NCC checkpoint; `{}` does not exist (run `pretrain --task ncc` first or pass --checkpoint)",
                            ckpt.display()
                        )));
                    }
                    let mut model = Model::load(&ckpt)?;
                    let report = pretrain_mc(&mut model, &split, &cfg)?;
                    model.save(&out.join("mc.ckpt"))?;
                    fs::write(out.join("pretrain_mc_report.txt"), report.render())?;
                    print!("{}", report.render());
                }
            }
            let manifest = write_manifest(
                &out,
                &[("corpus".to_string(), corpus.display().to_string())],
                &cfg_text,
            )?;
            println!("manifest={}", manifest.display());
            Ok(())
        }

        Command::Train {
            corpus,
            out,
            config,
            sets,
            checkpoint,
            no_pareto,
            no_pretrain,
            text_only,
        } => {
            let (cfg, cfg_text) = load_config(config.as_deref(), &sets)?;
            let split = load_split(&corpus)?;
            fs::create_dir_all(&out)?;
            let base = if no_pretrain {
                None
            } else {
                let ckpt = checkpoint.unwrap_or_else(|| out.join("mc.ckpt"));
                if !ckpt.exists() {
                    return Err(Error::config(format!(
                        "training without --no-pretrain needs a checkpoint; `{}` does not exist",
                        ckpt.display()
                    )));
                }
                Some(Model::load(&ckpt)?)
            };
            let (model, report) = train(
                &split,
                &cfg,
                TrainOptions {
                    pareto: !no_pareto,
                    text_only,
                    base,
                },
            )?;
            model.save(&out.join("model.ckpt"))?;
            for (name, body) in render_trajectories(&report) {
                fs::write(out.join(name), body)?;
            }
            let mut summary = String::new();
            summary.push_str(&format!("chosen_k={}\n", report.chosen_k));
            for run in &report.runs {
                summary.push_str(&format!(
                    "k={} feasible={} initial_iterations={} critical={} val_return_mse={} val_vol_mse={}\n",
                    run.k,
                    run.feasible,
                    run.initial_iterations,
                    run.critical,
                    run.val_return_mse,
                    run.val_vol_mse,
                ));
            }
            fs::write(out.join("train_report.txt"), &summary)?;
            print!("{summary}");
            let manifest = write_manifest(
                &out,
                &[("corpus".to_string(), corpus.display().to_string())],
                &cfg_text,
            )?;
            println!("manifest={}", manifest.display());
            Ok(())
        }

        Command::Evaluate {
            model,
            corpus,
            split: split_name,
            out,
        } => {
            let model = Model::load(&model)?;
            let split = load_split(&corpus)?;
            let records = split_of(&split, split_name);
            let report = evaluate(&model, records)?;
            print!("{}", report.render());
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("metrics.txt"), report.render())?;
                let manifest = write_manifest(
                    &dir,
                    &[("corpus".to_string(), corpus.display().to_string())],
                    "evaluate",
                )?;
                println!("manifest={}", manifest.display());
            }
            Ok(())
        }

        Command::Simulate {
            model,
            corpus,
            tau,
            strategy,
            seed,
            risk_free_rate,
            out,
        } => {
            if tau <= 0 {
                return Err(Error::config(format!("--tau must be positive, got {tau}")));
            }
            let split = load_split(&corpus)?;
            let records = &split.test;
            let (ledger, report) = match strategy {
                StrategyName::Model => {
                    let path = model.ok_or_else(|| {
                        Error::config("--strategy model needs --model <checkpoint>".to_string())
                    })?;
                    let model = Model::load(&path)?;
                    simulate_with_model(&model, records, tau, risk_free_rate)?
                }
                StrategyName::BuyAll => {
                    simulate_strategy(Strategy::BuyAll, records, tau, risk_free_rate)
                }
                StrategyName::ShortAll => {
                    simulate_strategy(Strategy::ShortAll, records, tau, risk_free_rate)
                }
                StrategyName::Random => {
                    simulate_strategy(Strategy::Random { seed }, records, tau, risk_free_rate)
                }
            };
            print!("{}", report.render());
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("ledger.jsonl"), ledger.render(risk_free_rate))?;
                fs::write(dir.join("simulation.txt"), report.render())?;
                let manifest = write_manifest(
                    &dir,
                    &[("corpus".to_string(), corpus.display().to_string())],
                    "simulate",
                )?;
                println!("manifest={}", manifest.display());
            }
            Ok(())
        }
    }
}