use super::FactorState;

/// Side length of the square image observation.
pub const IMAGE_SIDE: usize = 16;

/// Observation encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderMode {
    /// `[position, width cue, colour...]` where colour is RGB or luminance.
    FactorVector,
    /// 16x16 image, channel-last, flattened row-major, pixels in `[0,1]`.
    Image16,
}

/// Flat observation vector plus its encoding tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub mode: RenderMode,
    pub greyscale: bool,
    pub values: Vec<f64>,
}

pub fn obs_dim(mode: RenderMode, greyscale: bool) -> usize {
    let channels = if greyscale { 1 } else { 3 };
    match mode {
        RenderMode::FactorVector => 2 + channels,
        RenderMode::Image16 => IMAGE_SIDE * IMAGE_SIDE * channels,
    }
}

/// Renders the state. Velocity is deliberately absent from a single
/// observation; agents recover it from stacked representations.
pub fn render(state: &FactorState, mode: RenderMode, greyscale: bool) -> Observation {
    let values = match mode {
        RenderMode::FactorVector => {
            let mut v = vec![state.position, state.variant.width_cue()];
            if greyscale {
                v.push(state.colour.luminance());
            } else {
                v.extend_from_slice(&state.colour.0);
            }
            v
        }
        RenderMode::Image16 => {
            let channels = if greyscale { 1 } else { 3 };
            let mut img = vec![0.0; IMAGE_SIDE * IMAGE_SIDE * channels];
            let centre = (((state.position + 1.0) / 2.0) * (IMAGE_SIDE - 1) as f64).round() as i64;
            let width_px = ((state.variant.width_cue() * IMAGE_SIDE as f64).round() as i64).max(1);
            let half_left = (width_px - 1) / 2;
            let half_right = width_px - 1 - half_left;
            let (row_lo, row_hi) = (IMAGE_SIDE / 2 - 2, IMAGE_SIDE / 2 + 2);
            for y in row_lo..row_hi {
                for x in (centre - half_left).max(0)..=(centre + half_right).min(IMAGE_SIDE as i64 - 1) {
                    let base = (y * IMAGE_SIDE + x as usize) * channels;
                    if greyscale {
                        img[base] = state.colour.luminance();
                    } else {
                        img[base..base + 3].copy_from_slice(&state.colour.0);
                    }
                }
            }
            img
        }
    };
    Observation { mode, greyscale, values }
}

/// Factors recovered from an observation; used by hand-coded reference
/// policies.
#[derive(Debug, Clone)]
pub struct DecodedFactors {
    pub position: f64,
    pub width_cue: f64,
    /// RGB channels, or a single luminance value for greyscale.
    pub colour: Vec<f64>,
}

/// Inverts [`render`]. Exact for factor vectors; images recover position
/// from the lit-column span (quantised to the pixel grid).
pub fn decode_observation(obs: &Observation) -> DecodedFactors {
    match obs.mode {
        RenderMode::FactorVector => DecodedFactors {
            position: obs.values[0],
            width_cue: obs.values[1],
            colour: obs.values[2..].to_vec(),
        },
        RenderMode::Image16 => {
            let channels = if obs.greyscale { 1 } else { 3 };
            let mut lit_cols: Vec<usize> = Vec::new();
            let mut colour = vec![0.0; channels];
            for y in 0..IMAGE_SIDE {
                for x in 0..IMAGE_SIDE {
                    let base = (y * IMAGE_SIDE + x) * channels;
                    if obs.values[base..base + channels].iter().any(|&v| v > 0.0) {
                        if !lit_cols.contains(&x) {
                            lit_cols.push(x);
                        }
                        colour.copy_from_slice(&obs.values[base..base + channels]);
                    }
                }
            }
            if lit_cols.is_empty() {
                return DecodedFactors { position: 0.0, width_cue: 0.0, colour };
            }
            lit_cols.sort_unstable();
            let width_px = lit_cols.len() as f64;
            // Undo the half-left/half-right split around the centre column.
            let half_left = ((width_px - 1.0) / 2.0).floor();
            let centre = lit_cols[0] as f64 + half_left;
            let position = centre / (IMAGE_SIDE - 1) as f64 * 2.0 - 1.0;
            DecodedFactors { position, width_cue: width_px / IMAGE_SIDE as f64, colour }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Rgb, Variant};

    fn state(variant: Variant, colour: Rgb, position: f64) -> FactorState {
        FactorState { variant, colour, position, velocity: 0.3, step: 4, horizon: 100 }
    }

    #[test]
    fn factor_vector_layout() {
        let s = state(Variant::A, Rgb::blue(), 0.0);
        let obs = render(&s, RenderMode::FactorVector, false);
        assert_eq!(obs.values, vec![0.0, 0.2, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn greyscale_collapses_colour_channels() {
        let s = state(Variant::B, Rgb::green(), -0.25);
        let obs = render(&s, RenderMode::FactorVector, true);
        assert_eq!(obs.values.len(), 3);
        assert!((obs.values[2] - 0.587).abs() < 1e-12);
        let img = render(&s, RenderMode::Image16, true);
        assert_eq!(img.values.len(), IMAGE_SIDE * IMAGE_SIDE);
    }

    #[test]
    fn image_pixels_in_unit_range_and_deterministic() {
        let s = state(Variant::B, Rgb::green(), 0.4);
        let a = render(&s, RenderMode::Image16, false);
        let b = render(&s, RenderMode::Image16, false);
        assert_eq!(a, b);
        assert!(a.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(a.values.len(), obs_dim(RenderMode::Image16, false));
    }

    #[test]
    fn decode_inverts_factor_vectors_exactly() {
        let s = state(Variant::B, Rgb::green(), 0.37);
        let obs = render(&s, RenderMode::FactorVector, false);
        let d = decode_observation(&obs);
        assert_eq!(d.position, 0.37);
        assert_eq!(d.width_cue, 0.4);
        assert_eq!(d.colour, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn decode_recovers_image_factors_to_pixel_accuracy() {
        for (variant, want_w) in [(Variant::A, 3.0 / 16.0), (Variant::B, 6.0 / 16.0)] {
            for k in 0..=10 {
                let pos = -0.9 + 0.18 * k as f64;
                let s = state(variant, Rgb::blue(), pos);
                let obs = render(&s, RenderMode::Image16, false);
                let d = decode_observation(&obs);
                // Interior positions only: near the walls the rectangle
                // clips and the cues coarsen.
                if pos.abs() < 0.55 {
                    assert!((d.position - pos).abs() < 0.07, "pos {pos} decoded {}", d.position);
                    assert!((d.width_cue - want_w).abs() < 1e-12);
                }
                assert_eq!(d.colour, vec![0.0, 0.0, 1.0]);
            }
        }
    }

    #[test]
    fn wider_variant_lights_more_pixels_at_every_position() {
        for k in 0..=20 {
            let pos = -1.0 + k as f64 * 0.1;
            let a = render(&state(Variant::A, Rgb::blue(), pos), RenderMode::Image16, false);
            let b = render(&state(Variant::B, Rgb::blue(), pos), RenderMode::Image16, false);
            let lit = |o: &Observation| o.values.iter().filter(|&&v| v > 0.0).count();
            assert!(
                lit(&b) > lit(&a),
                "pos {pos}: B lit {} vs A lit {}",
                lit(&b),
                lit(&a)
            );
        }
    }
}
