use ndarray::Array2;

use crate::{Error, Result};

/// Builds the per-sample conditioning matrix for feature `feature`
/// (0-based) from `history` previous steps.
///
/// Each step contributes a slotted latent (the previous value of the same
/// feature placed at its slot in an otherwise-zero length-N vector, so one
/// discriminator can serve every feature) followed by that step's action.
/// `prev_latents`/`prev_actions` are ordered most recent first; the output
/// is `[B, history * (N + action_dim)]`. `history = 0` yields a zero-width
/// matrix (the unconditional variant).
pub fn build_conditioning(
    prev_latents: &[Array2<f64>],
    prev_actions: &[Array2<f64>],
    feature: usize,
    history: usize,
) -> Result<Array2<f64>> {
    if history > prev_latents.len() || history > prev_actions.len() {
        return Err(Error::Config(format!(
            "conditioning history {history} exceeds stored history {}",
            prev_latents.len().min(prev_actions.len())
        )));
    }
    if history == 0 {
        let rows = prev_latents.first().map_or(0, |l| l.nrows());
        return Ok(Array2::zeros((rows, 0)));
    }
    let b = prev_latents[0].nrows();
    let n = prev_latents[0].ncols();
    let da = prev_actions[0].ncols();
    assert!(feature < n, "feature index out of range");
    let mut out = Array2::zeros((b, history * (n + da)));
    for step in 0..history {
        let base = step * (n + da);
        let latents = &prev_latents[step];
        let actions = &prev_actions[step];
        for r in 0..b {
            out[[r, base + feature]] = latents[[r, feature]];
            for c in 0..da {
                out[[r, base + n + c]] = actions[[r, c]];
            }
        }
    }
    Ok(out)
}
