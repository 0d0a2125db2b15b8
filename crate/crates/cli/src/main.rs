use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dmr_core::{
    augment, cascade_predict_with, evaluate, export_rules, flat_predict, load_csv, load_model, load_queries,
    merge_megaclouds, rank_prototypes, save_model, train, DmrError, DmrModel, EvalConfig, FeatureVector, Prediction,
    TrainConfig, DEFAULT_BALANCE_CAP, DEFAULT_THRESHOLD,
};

/// Prototype-based classifier: train, balance, inspect, explain and evaluate.
#[derive(Parser)]
#[command(name = "dmr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a model from a labelled CSV and write it as JSON.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Output model file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        thr: f64,
        #[command(flatten)]
        balance: BalanceArgs,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Balance prototype counts of an existing model with synthetic samples.
    Augment {
        #[arg(long)]
        model: PathBuf,
        /// Training CSV the model was learned from.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BALANCE_CAP)]
        balance_cap: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Print mega-clouds with their class and member counts.
    Megaclouds {
        #[arg(long)]
        model: PathBuf,
    },
    /// Re-rank prototypes by error on a labelled CSV and print the order.
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the re-ranked model here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict each row of a CSV; prints row,label,score,path.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Confidence threshold; defaults to the model's.
        #[arg(long)]
        thr: Option<f64>,
        /// Use the single-stage nearest-prototype decision.
        #[arg(long)]
        flat: bool,
    },
    /// Show the winning prototype, similarity, path and fired rule per row.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        thr: Option<f64>,
    },
    /// Print one IF-THEN rule per mega-cloud.
    Rules {
        #[arg(long)]
        model: PathBuf,
    },
    /// Repeated stratified hold-out evaluation.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        /// Fraction of each class used for training.
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        thr: f64,
        #[arg(long)]
        flat: bool,
        #[command(flatten)]
        balance: BalanceArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BalanceArgs {
    /// Equalize per-class prototype counts with synthetic samples.
    #[arg(long)]
    balance: bool,
    /// Generated-sample budget per unit of initial deficit.
    #[arg(long, default_value_t = DEFAULT_BALANCE_CAP)]
    balance_cap: usize,
}

#[derive(Args)]
struct SeedArg {
    #[arg(long, env = "DMR_SEED", default_value_t = 0)]
    seed: u64,
}

struct Failure {
    code: u8,
    message: String,
}

type Outcome<T = ()> = Result<T, Failure>;

fn fail(code: u8, e: impl Display) -> Failure {
    Failure {
        code,
        message: e.to_string(),
    }
}

fn data_err(e: DmrError) -> Failure {
    match e {
        DmrError::InvalidThreshold(_) | DmrError::InvalidConfig(_) => fail(1, e),
        e => fail(2, e),
    }
}

fn model_err(e: DmrError) -> Failure {
    fail(3, e)
}

fn read_model(path: &Path) -> Outcome<DmrModel> {
    load_model(path).map_err(|e| fail(3, format!("{}: {e}", path.display())))
}

fn read_queries(path: &Path, model: &DmrModel) -> Outcome<Vec<FeatureVector>> {
    let rows = load_queries(path, model.dimensionality).map_err(|e| fail(2, format!("{}: {e}", path.display())))?;
    rows.into_iter()
        .map(|(x, _)| model.standardize(&x).map_err(data_err))
        .collect()
}

fn predict_all(model: &DmrModel, queries: &[FeatureVector], thr: Option<f64>, flat: bool) -> Outcome<Vec<Prediction>> {
    let thr = thr.unwrap_or(model.threshold);
    if !(0.0..=1.0).contains(&thr) {
        return Err(fail(1, DmrError::InvalidThreshold(thr)));
    }
    queries
        .iter()
        .map(|z| {
            if flat {
                flat_predict(z, model)
            } else {
                cascade_predict_with(z, model, thr)
            }
            .map_err(model_err)
        })
        .collect()
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Train {
            data,
            model,
            thr,
            balance,
            seed,
        } => {
            let ds = load_csv(&data).map_err(data_err)?;
            let cfg = TrainConfig {
                threshold: thr,
                balance: balance.balance,
                balance_cap: balance.balance_cap,
                seed: seed.seed,
            };
            let out = train(&ds, &cfg).map_err(data_err)?;
            for (label, b) in out.balance.iter().filter(|(_, b)| b.cap_fired) {
                eprintln!(
                    "warning: class {label}: balance cap fired, residual deficit {}",
                    b.residual_deficit
                );
            }
            save_model(&out.model, &model).map_err(|e| fail(3, e))?;
            eprintln!(
                "trained {} prototypes in {} mega-clouds ({} synthetic samples)",
                out.model.n_clouds(),
                out.model.megaclouds.as_ref().map_or(0, Vec::len),
                out.synthetic.len()
            );
        }
        Command::Augment {
            model,
            data,
            out,
            balance_cap,
            seed,
        } => {
            let m = read_model(&model)?;
            let ds = load_csv(&data).map_err(data_err)?;
            let cfg = TrainConfig {
                threshold: m.threshold,
                balance: true,
                balance_cap,
                seed: seed.seed,
            };
            let res = augment(&m, &ds, &cfg).map_err(data_err)?;
            for (label, b) in &res.balance {
                println!(
                    "{label}: deficit {} generated {} residual {}{}",
                    b.initial_deficit,
                    b.generated,
                    b.residual_deficit,
                    if b.cap_fired { " (cap fired)" } else { "" }
                );
            }
            save_model(&res.model, &out).map_err(|e| fail(3, e))?;
        }
        Command::Megaclouds { model } => {
            let m = read_model(&model)?;
            let mg = m.megaclouds.clone().unwrap_or_else(|| merge_megaclouds(&m));
            println!("megaclouds: {}", mg.len());
            println!("prototypes: {}", m.n_clouds());
            for g in &mg {
                println!("{} class={} members={}", g.id, g.class_label, g.member_cloud_ids.len());
            }
        }
        Command::Rank { model, data, out } => {
            let mut m = read_model(&model)?;
            let ds = load_csv(&data).map_err(data_err)?;
            let z: Vec<FeatureVector> = ds
                .samples
                .iter()
                .map(|x| m.standardize(x))
                .collect::<Result<_, _>>()
                .map_err(data_err)?;
            let ranking = rank_prototypes(&m, &z, &ds.labels).map_err(data_err)?;
            println!("rank,prototype,label,error,support");
            for (k, id) in ranking.order.iter().enumerate() {
                let c = m.cloud(*id).expect("ranked cloud exists");
                println!(
                    "{},{id},{},{},{}",
                    k + 1,
                    c.class_label,
                    ranking.per_cloud_error[id],
                    c.support
                );
            }
            m.ranking = Some(ranking);
            if let Some(out) = out {
                save_model(&m, &out).map_err(|e| fail(3, e))?;
            }
        }
        Command::Predict { model, data, thr, flat } => {
            let m = read_model(&model)?;
            let queries = read_queries(&data, &m)?;
            println!("row,label,score,path");
            for (i, p) in predict_all(&m, &queries, thr, flat)?.iter().enumerate() {
                println!("{i},{},{},{}", p.label, p.score, p.path);
            }
        }
        Command::Explain { model, data, thr } => {
            let m = read_model(&model)?;
            let rules = export_rules(&m).map_err(model_err)?;
            let queries = read_queries(&data, &m)?;
            for (i, p) in predict_all(&m, &queries, thr, false)?.iter().enumerate() {
                let c = m.cloud(p.winning_cloud).expect("winner exists");
                let origin = match (c.synthetic, c.source_sample_id) {
                    (true, _) => "synthetic".to_string(),
                    (false, Some(row)) => format!("row {row}"),
                    (false, None) => "unknown".to_string(),
                };
                println!("row {i}: {}", p.label);
                println!("  prototype: {} ({origin}, support {})", c.id, c.support);
                println!("  similarity: {}", p.score);
                println!("  path: {}", p.path);
                match rules.iter().find(|r| r.mentions(c.id)) {
                    Some(r) => println!("  rule {}: {r}", r.mega_cloud_id),
                    None => println!("  rule: none"),
                }
            }
        }
        Command::Rules { model } => {
            let m = read_model(&model)?;
            for r in export_rules(&m).map_err(model_err)? {
                println!("rule {}: {r}", r.mega_cloud_id);
            }
        }
        Command::Evaluate {
            data,
            repeats,
            split,
            thr,
            flat,
            balance,
            seed,
            out,
        } => {
            let ds = load_csv(&data).map_err(data_err)?;
            let cfg = EvalConfig {
                repeats,
                train_fraction: split,
                seed: seed.seed,
                balance: balance.balance,
                balance_cap: balance.balance_cap,
                threshold: thr,
                flat,
            };
            if !(0.0..=1.0).contains(&thr) {
                return Err(fail(1, DmrError::InvalidThreshold(thr)));
            }
            let report = evaluate(&ds, &cfg).map_err(data_err)?;
            print!("{report}");
            if let Some(out) = out {
                let json = serde_json::to_string_pretty(&report).map_err(|e| fail(2, e))?;
                std::fs::write(&out, json + "\n").map_err(|e| fail(2, format!("{}: {e}", out.display())))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
