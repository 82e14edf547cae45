//! Throwaway training diagnostics, not part of the suite. Run with
//! `cargo test --test probe -- --ignored --nocapture`.

use hypersr_core::crf::{default_crf, project_to_rgb};
use hypersr_core::io::{extract_patches, synth_dataset};
use hypersr_core::loss::Term;
use hypersr_core::net::{Model, NetworkConfig};
use hypersr_core::train::{evaluate, moving_average, Trainer, TrainerData};
use hypersr_core::types::{BatchCounts, HsiCube, TrainConfig};

fn overfit_data() -> (TrainerData, hypersr_core::crf::CrfMatrix) {
    let labeled_cubes = synth_dataset(8, 31, 64, 80);
    let unlabeled_cubes = synth_dataset(8, 31, 64, 81);
    let test_cubes = synth_dataset(4, 31, 64, 82);
    let rgb_cubes = synth_dataset(8, 31, 64, 83);
    let crf = default_crf(&labeled_cubes[0].band_centers_nm()).unwrap();

    let mut data = TrainerData {
        labeled: Vec::new(),
        rgb: Vec::new(),
        unlabeled_lr: Vec::new(),
        test: Vec::new(),
    };
    for (i, cube) in labeled_cubes.iter().enumerate() {
        data.labeled
            .extend(extract_patches(cube, 4, 32, &format!("lab{i}")).unwrap());
    }
    for (i, cube) in unlabeled_cubes.iter().enumerate() {
        let pairs = extract_patches(cube, 4, 32, &format!("unlab{i}")).unwrap();
        data.unlabeled_lr.extend(pairs.into_iter().map(|p| p.lr));
    }
    for (i, cube) in test_cubes.into_iter().enumerate() {
        data.test.push((format!("test{i}"), cube));
    }
    for (i, cube) in rgb_cubes.iter().enumerate() {
        let img = project_to_rgb(cube, &crf).unwrap();
        data.rgb
            .extend(extract_patches(&img, 4, 32, &format!("pic{i}")).unwrap());
    }
    (data, crf)
}

#[test]
#[ignore]
fn training_probe() {
    let (data, crf) = overfit_data();
    let test: Vec<(String, HsiCube)> = data.test.clone();
    let config = NetworkConfig {
        hsi_bands: 31,
        tau: 4,
        group_size: 8,
        overlap: 0,
        feature_width: 32,
        ssb_per_stage: 1,
    };
    let model: Model<f32> = Model::init(config, 84).unwrap();
    let train = TrainConfig {
        lr_initial: 1e-4,
        lr_decay: 0.3,
        lr_decay_every_epochs: 25,
        epochs: 75,
        batch_size: None,
        batches_per_iter: BatchCounts { hsi: 1, rgb: 1, mixup: 1, ssl: 1 },
        alpha_mixup: 0.5,
        seed: 85,
    };
    let mut trainer = Trainer::new(model, data, train, crf).unwrap();
    let mut ssl_l1 = Vec::new();
    let mut hsi_total = Vec::new();
    for e in 0..75 {
        trainer
            .train_epoch(&mut |r| match r.term {
                Term::Ssl => ssl_l1.push(r.l1),
                Term::Hsi => hsi_total.push(r.total),
                _ => {}
            })
            .unwrap();
        if (e + 1) % 5 == 0 {
            let rep = evaluate(&trainer.model, &test).unwrap();
            eprintln!(
                "epoch {e:3}  iter {:3}  gain {:+.3} dB ({:.3} vs {:.3})",
                trainer.iteration(),
                rep.mean_model.mpsnr - rep.mean_bicubic.mpsnr,
                rep.mean_model.mpsnr,
                rep.mean_bicubic.mpsnr
            );
        }
    }
    let n = hsi_total.len();
    eprintln!(
        "hsi MA(50): {:.5} at 50 -> {:.5} at {n}",
        moving_average(&hsi_total, 50, 50),
        moving_average(&hsi_total, 50, n)
    );
    eprintln!(
        "ssl l1 MA(50): {:.5} at 50 -> {:.5} at {n}",
        moving_average(&ssl_l1, 50, 50),
        moving_average(&ssl_l1, 50, n)
    );
}
