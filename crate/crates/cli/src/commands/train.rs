use crate::commands::{check_network, ensure_dir};
use crate::failure::{Failure, Phase};
use crate::TrainArgs;
use hypersr_core::config::load_run_config;
use hypersr_core::crf::{default_crf, load_crf};
use hypersr_core::io::load_manifest;
use hypersr_core::train::{
    load_checkpoint, load_training_data, read_manifest, save_checkpoint, LogRecord,
};
use hypersr_core::{Error, Model, Trainer};
use std::fs::OpenOptions;
use std::io::Write;

pub fn run(args: TrainArgs) -> Result<(), Failure> {
    let mut cfg = load_run_config(&args.config).setup()?;
    if let Some(seed) = args.seed {
        if args.resume.is_some() {
            return Err(Error::InvalidArgument(
                "--seed cannot change a resumed run; the checkpoint fixes the seed".into(),
            ))
            .setup();
        }
        cfg.train.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    let out = cfg
        .resolve_output_dir(args.out.as_deref(), &args.config)
        .setup()?;

    let manifest = load_manifest(&cfg.data.manifest).setup()?;
    let data = load_training_data(&manifest, &cfg.scale).setup()?;
    if data.labeled.is_empty() {
        return Err(Error::InvalidConfig(
            "training requires at least one labeled patch".into(),
        ))
        .setup();
    }
    let centers = data.labeled[0].hr.band_centers_nm();
    let crf = match &cfg.data.crf {
        Some(p) => load_crf(p, &centers),
        None => default_crf(&centers),
    }
    .setup()?;

    let mut trainer = match &args.resume {
        Some(ckpt) => {
            let stored = read_manifest(ckpt).setup()?;
            check_network(&stored.network, &cfg.network).setup()?;
            let mut t = load_checkpoint(ckpt, data, crf).setup()?;
            if let Some(epochs) = args.epochs {
                t.train.epochs = epochs;
            }
            t
        }
        None => {
            let model = Model::init(cfg.network, cfg.train.seed).setup()?;
            Trainer::new(model, data, cfg.train.clone(), crf).setup()?
        }
    };

    ensure_dir(&out).runtime()?;
    let log_path = out.join("train_log.csv");
    let fresh = args.resume.is_none();
    let mut log = OpenOptions::new()
        .create(true)
        .append(!fresh)
        .truncate(fresh)
        .write(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))
        .runtime()?;
    if fresh {
        writeln!(log, "{}", LogRecord::CSV_HEADER)
            .map_err(|e| Error::io(&log_path, e))
            .runtime()?;
    }

    let total_epochs = trainer.train.epochs;
    while trainer.epoch() < total_epochs {
        let mut records: Vec<LogRecord> = Vec::new();
        let outcome = trainer.train_epoch(&mut |r: &LogRecord| records.push(r.clone()));
        for r in &records {
            writeln!(log, "{}", r.to_csv_row())
                .map_err(|e| Error::io(&log_path, e))
                .runtime()?;
        }
        log.flush().map_err(|e| Error::io(&log_path, e)).runtime()?;
        outcome.runtime()?;

        let epoch = trainer.epoch();
        save_checkpoint(out.join(format!("ckpt_epoch_{epoch:04}")), &trainer).runtime()?;
        let mean_total = records.iter().map(|r| r.total).sum::<f64>() / records.len().max(1) as f64;
        let lr = records.last().map(|r| r.lr).unwrap_or(0.0);
        println!(
            "epoch {epoch}/{total_epochs}  lr {lr:.3e}  mean loss {mean_total:.6}  ({} steps)",
            records.len()
        );
    }
    save_checkpoint(out.join("ckpt_final"), &trainer).runtime()?;
    println!("log: {}", log_path.display());
    println!("final checkpoint: {}", out.join("ckpt_final").display());
    Ok(())
}
