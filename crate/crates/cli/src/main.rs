mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hsi_mvt::data::{
    load_cube, load_labels, mmnorm, save_cube, save_labels, stratified_split, synth_scene, HsiCube, LabelMap,
    SynthConfig,
};
use hsi_mvt::map::{classification_map, write_ppm};
use hsi_mvt::model::{load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use hsi_mvt::mpca::{mpca, plain_pca, save_pca_models};
use hsi_mvt::train::{evaluate, rotation_audit, sweep, train_with_split, PatchSource, SweepAxis};
use log::info;
use serde::Serialize;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "hsi-mvt", version, about = "Hyperspectral pixel classification with a multiview transformer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic Voronoi scene (cube.hsz, labels.hsz).
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 40)]
        bands: usize,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Normalize and reduce the cube (representation.hsz, pca.hsz).
    Preprocess {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train on the reduced cube (model.hsz, history.jsonl).
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print test-split metrics as JSON.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print metrics on original and 180°-rotated test patches as JSON.
    Audit {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate once per value of one hyper-parameter; write CSV.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// patch_size, views, components, heads or train_fraction
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 3,5,7
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render predictions for every labeled pixel as a PPM image.
    Map {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn synth(cfg: SynthConfig, out: &Path) -> Result<()> {
    let (cube, labels) = synth_scene(&cfg)?;
    let (cp, lp) = (out.join("cube.hsz"), out.join("labels.hsz"));
    save_cube(&cube, &cp)?;
    save_labels(&labels, &lp)?;
    print_json(&serde_json::json!({ "cube": cp, "labels": lp }))
}

fn preprocess(run: &RunConfig) -> Result<()> {
    let cube = load_cube(&run.data.cube_path)?;
    let norm = mmnorm(&cube)?;
    let (rep, models) = if run.mpca.enabled {
        mpca(&norm, run.mpca.g, run.mpca.d)?
    } else {
        plain_pca(&norm, run.mpca.g * run.mpca.d)?
    };
    let (rp, pp) = (run.out("representation.hsz"), run.out("pca.hsz"));
    save_cube(&rep.cube, &rp)?;
    save_pca_models(&models, &pp)?;
    info!("{}×{}×{} -> {} channels", cube.height, cube.width, cube.bands, rep.cube.bands);
    print_json(&serde_json::json!({
        "representation": rp,
        "pca": pp,
        "shape": [rep.cube.height, rep.cube.width, rep.cube.bands],
    }))
}

/// Reduced cube, labels and the model config they imply.
fn inputs(run: &RunConfig) -> Result<(HsiCube, LabelMap, ModelConfig)> {
    let labels = load_labels(&run.data.labels_path)?;
    let rep_path = run.out("representation.hsz");
    let cube = load_cube(&rep_path).with_context(|| "run `preprocess` first")?;
    let cfg = run.model_config(labels.classes)?;
    if cube.bands != cfg.in_channels() {
        return Err(hsi_mvt::Error::Compatibility(format!(
            "{} has {} channels but the config asks for {}; rerun preprocess",
            rep_path.display(),
            cube.bands,
            cfg.in_channels()
        ))
        .into());
    }
    Ok((cube, labels, cfg))
}

fn rep_of(cube: HsiCube, cfg: &ModelConfig) -> hsi_mvt::mpca::MultiviewRepresentation {
    let (views, components) = if cfg.use_mpca {
        (cfg.views, cfg.view_components)
    } else {
        (1, cfg.in_channels())
    };
    hsi_mvt::mpca::MultiviewRepresentation { cube, views, components }
}

fn train_cmd(run: &RunConfig) -> Result<()> {
    let (cube, labels, cfg) = inputs(run)?;
    let tc = run.train_config();
    let split = stratified_split(&labels, tc.fractions(), tc.seed)?;
    let (n_train, n_val) = (split.train.len(), split.val.len());
    let outcome = train_with_split(&rep_of(cube, &cfg), &labels, split, &cfg, &tc)?;
    let (mp, hp) = (run.out("model.hsz"), run.out("history.jsonl"));
    save_checkpoint(&cfg, &outcome.params, &mp)?;
    let file = File::create(&hp).with_context(|| format!("{}: cannot create", hp.display()))?;
    let mut w = BufWriter::new(file);
    for rec in &outcome.history {
        serde_json::to_writer(&mut w, rec)?;
        writeln!(w)?;
    }
    w.flush()?;
    let best = &outcome.history[outcome.best_epoch - 1];
    print_json(&serde_json::json!({
        "checkpoint": mp,
        "history": hp,
        "epochs": outcome.history.len(),
        "best_epoch": outcome.best_epoch,
        "val_oa": best.val_oa,
        "train_samples": n_train,
        "val_samples": n_val,
    }))
}

/// Checkpoint parameters after checking they match the run config.
fn checkpoint(run: &RunConfig, path: Option<&Path>, cfg: &ModelConfig) -> Result<ModelParams<f32>> {
    let path = path.map(Path::to_path_buf).unwrap_or_else(|| run.out("model.hsz"));
    let (saved, params) = load_checkpoint(&path)?;
    if &saved != cfg {
        return Err(hsi_mvt::Error::Compatibility(format!(
            "{} was trained with {} but the config describes {}",
            path.display(),
            serde_json::to_string(&saved)?,
            serde_json::to_string(cfg)?
        ))
        .into());
    }
    Ok(params)
}

fn eval_cmd(run: &RunConfig, ckpt: Option<&Path>, audit: bool) -> Result<()> {
    let (cube, labels, cfg) = inputs(run)?;
    let params = checkpoint(run, ckpt, &cfg)?;
    let tc = run.train_config();
    let split = stratified_split(&labels, tc.fractions(), tc.seed)?;
    let source = PatchSource::new(&cube, &labels, cfg.patch_size);
    if audit {
        let report = rotation_audit(&params, &cfg, &source, &split.test)?;
        eprintln!("oa {:.4} -> {:.4} (delta {:+.4})", report.original.oa, report.rotated.oa, report.delta_oa);
        print_json(&report)
    } else {
        print_json(&evaluate(&params, &cfg, &source, &split.test)?)
    }
}

fn sweep_cmd(run: &RunConfig, axis: &str, values: &[f64], out: Option<PathBuf>) -> Result<()> {
    let axis: SweepAxis = axis.parse()?;
    if values.is_empty() {
        return Err(hsi_mvt::Error::Usage("--values is empty".into()).into());
    }
    let cube = load_cube(&run.data.cube_path)?;
    let labels = load_labels(&run.data.labels_path)?;
    let cfg = run.model_config(labels.classes)?;
    let rows = sweep(&cube, &labels, &cfg, &run.train_config(), axis, values)?;
    let path = out.unwrap_or_else(|| run.out(&format!("sweep_{axis}.csv")));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("{}: cannot create", dir.display()))?;
    }
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("{}: cannot create", path.display()))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    print_json(&serde_json::json!({ "table": path, "rows": rows.len() }))
}

fn map_cmd(run: &RunConfig, ckpt: Option<&Path>, out: Option<PathBuf>) -> Result<()> {
    let (cube, labels, cfg) = inputs(run)?;
    let params = checkpoint(run, ckpt, &cfg)?;
    let source = PatchSource::new(&cube, &labels, cfg.patch_size);
    let map = classification_map(&params, &cfg, &source)?;
    let path = out.unwrap_or_else(|| run.out("map.ppm"));
    write_ppm(&path, &map.ids, map.height, map.width, map.classes)?;
    print_json(&serde_json::json!({ "map": path, "height": map.height, "width": map.width }))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            seed,
            height,
            width,
            bands,
            classes,
            noise,
            out,
        } => synth(
            SynthConfig {
                seed,
                height,
                width,
                bands,
                classes,
                noise_sigma: noise,
            },
            &out,
        ),
        Command::Preprocess { config } => preprocess(&RunConfig::load(config.as_deref())?),
        Command::Train { config } => train_cmd(&RunConfig::load(config.as_deref())?),
        Command::Eval { config, checkpoint } => {
            eval_cmd(&RunConfig::load(config.as_deref())?, checkpoint.as_deref(), false)
        }
        Command::Audit { config, checkpoint } => {
            eval_cmd(&RunConfig::load(config.as_deref())?, checkpoint.as_deref(), true)
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => sweep_cmd(&RunConfig::load(config.as_deref())?, &axis, &values, out),
        Command::Map { config, checkpoint, out } => {
            map_cmd(&RunConfig::load(config.as_deref())?, checkpoint.as_deref(), out)
        }
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use hsi_mvt::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Dimension(_) => "dimension",
                E::Config(_) => "config",
                E::Usage(_) => "usage",
                E::Degenerate(_) => "degenerate",
                E::Range(_) => "range",
                E::Parse(_) => "parse",
                E::Length { .. } => "length",
                E::Compatibility(_) => "compatibility",
                E::Io { .. } => "io",
            };
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "error"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}");
            let line = serde_json::json!({ "error": error_kind(&err), "message": message });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
