use ndarray::Array2;
use rand::Rng;

use crate::envs::{RenderMode, IMAGE_SIDE};

/// Random shift augmentation for image batches: pad by `pad` replicated-edge
/// pixels on each side, then crop back at a per-sample uniform offset.
///
/// `offsets` gives one `(dy, dx)` pair per row, each in `0..=2*pad`
/// (`(pad, pad)` is the identity). For factor-vector observations the
/// augmentation is the identity by definition.
pub fn shift_with_offsets(
    images: &Array2<f64>,
    channels: usize,
    pad: usize,
    offsets: &[(usize, usize)],
) -> Array2<f64> {
    let side = IMAGE_SIDE;
    assert_eq!(images.ncols(), side * side * channels, "unexpected image width");
    assert_eq!(images.nrows(), offsets.len());
    let mut out = Array2::zeros(images.dim());
    for (r, &(dy, dx)) in offsets.iter().enumerate() {
        let src = images.row(r);
        let mut dst = out.row_mut(r);
        for y in 0..side {
            // Shift then clamp into the source; clamping reproduces the
            // replicated-edge padding without materialising it.
            let sy = (y + dy).saturating_sub(pad).min(side - 1);
            for x in 0..side {
                let sx = (x + dx).saturating_sub(pad).min(side - 1);
                for c in 0..channels {
                    dst[(y * side + x) * channels + c] = src[(sy * side + sx) * channels + c];
                }
            }
        }
    }
    out
}

/// Draws per-sample offsets and shifts an image batch. Identity for
/// factor-vector mode.
pub fn random_shift_augment<R: Rng>(
    obs: &Array2<f64>,
    mode: RenderMode,
    greyscale: bool,
    pad: usize,
    rng: &mut R,
) -> Array2<f64> {
    match mode {
        RenderMode::FactorVector => obs.clone(),
        RenderMode::Image16 => {
            let channels = if greyscale { 1 } else { 3 };
            let offsets: Vec<(usize, usize)> = (0..obs.nrows())
                .map(|_| (rng.gen_range(0..=2 * pad), rng.gen_range(0..=2 * pad)))
                .collect();
            shift_with_offsets(obs, channels, pad, &offsets)
        }
    }
}

/// Draws one offset pair per sample for reuse across the frames of a stack.
pub fn draw_offsets<R: Rng>(rows: usize, pad: usize, rng: &mut R) -> Vec<(usize, usize)> {
    (0..rows).map(|_| (rng.gen_range(0..=2 * pad), rng.gen_range(0..=2 * pad))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{render, FactorState, Rgb, Variant};

    fn image_row(position: f64, variant: Variant) -> Vec<f64> {
        let state = FactorState {
            variant,
            colour: Rgb::green(),
            position,
            velocity: 0.0,
            step: 0,
            horizon: 100,
        };
        render(&state, RenderMode::Image16, false).values
    }

    #[test]
    fn zero_offset_is_identity() {
        let img = Array2::from_shape_vec((1, 768), image_row(0.2, Variant::B)).unwrap();
        let out = shift_with_offsets(&img, 3, 4, &[(4, 4)]);
        assert_eq!(out, img);
    }

    #[test]
    fn all_black_stays_all_black() {
        let img = Array2::zeros((3, 768));
        for off in [(0, 0), (8, 8), (1, 7)] {
            let out = shift_with_offsets(&img, 3, 4, &[off, off, off]);
            assert!(out.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn interior_shifts_conserve_pixel_mass() {
        // Object at the centre stays inside the frame for |shift| <= 4.
        let img = Array2::from_shape_vec((1, 768), image_row(0.0, Variant::A)).unwrap();
        let mass: f64 = img.sum();
        for dy in 0..=8 {
            for dx in 0..=8 {
                let out = shift_with_offsets(&img, 3, 4, &[(dy, dx)]);
                assert!(
                    (out.sum() - mass).abs() < 1e-12,
                    "mass changed at offset ({dy},{dx})"
                );
            }
        }
    }

    #[test]
    fn factor_vector_mode_is_identity() {
        let mut rng = rand::rngs::mock::StepRng::new(7, 11);
        let obs = Array2::from_shape_fn((4, 5), |(i, j)| (i * 5 + j) as f64);
        let out = random_shift_augment(&obs, RenderMode::FactorVector, false, 4, &mut rng);
        assert_eq!(out, obs);
    }
}
