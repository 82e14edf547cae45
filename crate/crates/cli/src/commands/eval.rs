use crate::commands::{check_network, ensure_dir};
use crate::failure::{Failure, Phase};
use crate::EvalArgs;
use hypersr_core::config::load_run_config;
use hypersr_core::io::{load_cube, load_manifest, Role};
use hypersr_core::train::{evaluate, load_model, EvalRow};
use hypersr_core::Error;
use std::fs::File;
use std::io::Write;

pub fn run(args: EvalArgs) -> Result<(), Failure> {
    let cfg = load_run_config(&args.config).setup()?;
    let (model, ckpt) = load_model(&args.checkpoint).setup()?;
    check_network(&ckpt.network, &cfg.network).setup()?;

    let manifest = load_manifest(&cfg.data.manifest).setup()?;
    let mut test = Vec::new();
    for entry in manifest.entries_with_role(Role::Test) {
        let cube = load_cube(manifest.resolve(&entry.hr_cube_path)).setup()?;
        test.push((entry.id.clone(), cube));
    }
    if test.is_empty() {
        return Err(Error::EmptyTestSet).setup();
    }
    let out = cfg
        .resolve_output_dir(args.out.as_deref(), &args.config)
        .setup()?;

    ensure_dir(&out).runtime()?;
    let report = evaluate(&model, &test).runtime()?;

    let csv_path = out.join("eval.csv");
    let mut csv = File::create(&csv_path)
        .map_err(|e| Error::io(&csv_path, e))
        .runtime()?;
    let write_line = |csv: &mut File, line: &str| {
        writeln!(csv, "{line}").map_err(|e| Error::io(&csv_path, e))
    };
    write_line(&mut csv, EvalRow::CSV_HEADER).runtime()?;
    for row in &report.rows {
        write_line(&mut csv, &row.to_csv_row()).runtime()?;
    }
    write_line(&mut csv, &report.summary_csv_row()).runtime()?;

    println!("images: {}", report.rows.len());
    println!(
        "model    rmse {:.6}  cc {:.6}  mpsnr {:.3}  mssim {:.6}  ergas {:.4}  sam {:.4}",
        report.mean_model.rmse,
        report.mean_model.cc,
        report.mean_model.mpsnr,
        report.mean_model.mssim,
        report.mean_model.ergas,
        report.mean_model.sam,
    );
    println!(
        "bicubic  rmse {:.6}  cc {:.6}  mpsnr {:.3}  mssim {:.6}  ergas {:.4}  sam {:.4}",
        report.mean_bicubic.rmse,
        report.mean_bicubic.cc,
        report.mean_bicubic.mpsnr,
        report.mean_bicubic.mssim,
        report.mean_bicubic.ergas,
        report.mean_bicubic.sam,
    );
    println!("per-image csv: {}", csv_path.display());
    Ok(())
}
