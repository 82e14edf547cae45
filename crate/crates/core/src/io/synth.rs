//! Synthetic hyperspectral cubes for desk-scale experiments: sums of
//! low-frequency 2-D sinusoids whose phase drifts slowly along the spectrum.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::types::{HsiCube, Raster};

/// Generate `n_images` smooth random cubes of shape `bands` x `edge` x `edge`
/// with values in `[0.05, 0.95]`. Deterministic in `seed`.
pub fn synth_dataset(n_images: usize, bands: usize, edge: usize, seed: u64) -> Vec<HsiCube> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_images)
        .map(|_| synth_cube(bands, edge, &mut rng))
        .collect()
}

fn synth_cube(bands: usize, edge: usize, rng: &mut ChaCha8Rng) -> HsiCube {
    struct Wave {
        amp: f32,
        fx: f32,
        fy: f32,
        phase: f32,
        // Phase advance from the first band to the last; kept small so
        // adjacent bands stay strongly correlated.
        drift: f32,
    }
    let n_waves = rng.random_range(3..=5);
    let waves: Vec<Wave> = (0..n_waves)
        .map(|_| Wave {
            amp: rng.random_range(0.3..1.0),
            fx: rng.random_range(1..=6) as f32,
            fy: rng.random_range(1..=6) as f32,
            phase: rng.random_range(0.0..std::f32::consts::TAU),
            drift: rng.random_range(-1.5..1.5),
        })
        .collect();

    let band_frac = |b: usize| {
        if bands == 1 {
            0.0
        } else {
            b as f32 / (bands - 1) as f32
        }
    };
    let mut cube = HsiCube::from_fn(bands, edge, edge, |b, r, c| {
        let x = c as f32 / edge as f32;
        let y = r as f32 / edge as f32;
        waves
            .iter()
            .map(|w| {
                let arg = std::f32::consts::TAU * (w.fx * x + w.fy * y)
                    + w.phase
                    + w.drift * band_frac(b);
                w.amp * arg.sin()
            })
            .sum()
    });

    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for &v in cube.data().iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-6);
    for v in cube.data_mut() {
        *v = (0.05 + 0.9 * (*v - lo) / span).clamp(0.05, 0.95);
    }
    cube
}
