use crate::commands::ensure_dir;
use crate::failure::{Failure, Phase};
use crate::PrepareArgs;
use hypersr_core::io::{
    extract_patches, load_cube, load_manifest, load_rgb, save_cube, save_manifest, save_rgb_png,
    CubeEntry, DatasetManifest, RgbEntry, Role,
};
use hypersr_core::resample::bicubic_resize;
use hypersr_core::types::Raster;
use hypersr_core::ScaleConfig;

pub fn run(args: PrepareArgs) -> Result<(), Failure> {
    let scale = ScaleConfig::new(args.tau, args.patch).setup()?;
    let manifest = load_manifest(&args.manifest).setup()?;
    if manifest.entries.is_empty() && manifest.rgb_entries.is_empty() {
        eprintln!("warning: manifest has no entries; writing an empty store");
    }

    let out = args.out.as_path();
    ensure_dir(out).runtime()?;
    let mut store = DatasetManifest::new(".");
    let (mut labeled, mut unlabeled, mut test, mut rgb) = (0usize, 0usize, 0usize, 0usize);

    for entry in &manifest.entries {
        let cube = load_cube(manifest.resolve(&entry.hr_cube_path)).runtime()?;
        match entry.role {
            Role::LabeledTrain | Role::UnlabeledTrain => {
                let (dir, counter) = if entry.role == Role::LabeledTrain {
                    ("labeled", &mut labeled)
                } else {
                    ("unlabeled", &mut unlabeled)
                };
                ensure_dir(&out.join(dir)).runtime()?;
                let pairs =
                    extract_patches(&cube, scale.tau, scale.patch_hr, &entry.id).runtime()?;
                for (k, pair) in pairs.iter().enumerate() {
                    let id = format!("{}_{k:04}", entry.id);
                    let rel_hr = format!("{dir}/{id}.hsr");
                    save_cube(&pair.hr, out.join(&rel_hr)).runtime()?;
                    // underscore, not a dotted suffix: .hsr names are
                    // stems, and a dot there would collide with the pair
                    save_cube(&pair.lr, out.join(format!("{dir}/{id}_lr.hsr"))).runtime()?;
                    store.entries.push(CubeEntry {
                        id,
                        hr_cube_path: rel_hr,
                        role: entry.role,
                    });
                }
                *counter += pairs.len();
            }
            Role::Test => {
                ensure_dir(&out.join("test")).runtime()?;
                let rel_hr = format!("test/{}.hsr", entry.id);
                save_cube(&cube, out.join(&rel_hr)).runtime()?;
                store.entries.push(CubeEntry {
                    id: entry.id.clone(),
                    hr_cube_path: rel_hr,
                    role: Role::Test,
                });
                test += 1;
            }
        }
    }

    for entry in &manifest.rgb_entries {
        let mut img = load_rgb(manifest.resolve(&entry.hr_rgb_path)).runtime()?;
        if args.rgb_predownsample_2 {
            img = bicubic_resize(&img, img.height() / 2, img.width() / 2).runtime()?;
        }
        ensure_dir(&out.join("rgb")).runtime()?;
        let pairs = extract_patches(&img, scale.tau, scale.patch_hr, &entry.id).runtime()?;
        for (k, pair) in pairs.iter().enumerate() {
            let id = format!("{}_{k:04}", entry.id);
            let rel_hr = format!("rgb/{id}.png");
            save_rgb_png(&pair.hr, out.join(&rel_hr)).runtime()?;
            save_rgb_png(&pair.lr, out.join(format!("rgb/{id}_lr.png"))).runtime()?;
            store.rgb_entries.push(RgbEntry {
                id,
                hr_rgb_path: rel_hr,
            });
        }
        rgb += pairs.len();
    }

    let store_path = out.join("manifest.json");
    save_manifest(&store, &store_path).runtime()?;
    println!("labeled_train: {labeled} pairs");
    println!("unlabeled_train: {unlabeled} pairs");
    println!("test: {test} images");
    println!("rgb: {rgb} pairs");
    println!("store manifest: {}", store_path.display());
    Ok(())
}
