use crate::failure::{Failure, Phase};
use crate::SrArgs;
use hypersr_core::io::{load_cube, save_cube};
use hypersr_core::train::eval::{clamp_01, EVAL_TILE_LR, EVAL_TILE_OVERLAP_LR};
use hypersr_core::train::load_model;
use hypersr_core::types::Raster;

pub fn run(args: SrArgs) -> Result<(), Failure> {
    let (model, _) = load_model(&args.checkpoint).setup()?;
    let lr = load_cube(&args.input).setup()?;

    let sr = if lr.height() > EVAL_TILE_LR || lr.width() > EVAL_TILE_LR {
        model.super_resolve_tiled(&lr, EVAL_TILE_LR, EVAL_TILE_OVERLAP_LR)
    } else {
        model.super_resolve(&lr)
    }
    .runtime()?;
    let sr = clamp_01(&sr);
    save_cube(&sr, &args.out).runtime()?;
    println!(
        "{}x{}x{} -> {}x{}x{}  written to {}",
        lr.bands(),
        lr.height(),
        lr.width(),
        sr.bands(),
        sr.height(),
        sr.width(),
        args.out.display()
    );
    Ok(())
}
