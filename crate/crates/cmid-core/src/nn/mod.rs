//! Minimal dense-tensor reverse-mode autodiff with MLP layers, layer
//! normalisation, Adam, and soft (Polyak) parameter updates.
//!
//! All math is `f64`; storage and matrix products are backed by [`ndarray`].
//! A [`Graph`] records a forward pass as a flat tape of nodes; calling
//! [`Graph::backward`] on a scalar node propagates gradients to every
//! reachable [`Param`]. Parameters live outside the tape so they survive
//! across steps; a fresh graph is built per update.

mod adam;
mod checkpoint;
mod graph;
mod mlp;
mod tensor;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, restore_params, save_checkpoint};
pub use graph::{Graph, NodeId};
pub use mlp::{Activation, Linear, Mlp, ParamMode, Tail};
pub use tensor::{Param, Tensor};

use crate::{Error, Result};

/// Polyak update: `target <- (1 - new_weight) * target + new_weight * online`.
///
/// `new_weight` is the mass placed on the online parameters, so small values
/// make the target track slowly.
pub fn soft_update(targets: &[Param], onlines: &[Param], new_weight: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&new_weight) {
        return Err(Error::Config(format!(
            "soft_update new_weight must lie in [0, 1], got {new_weight}"
        )));
    }
    if targets.len() != onlines.len() {
        return Err(Error::Config(format!(
            "soft_update parameter count mismatch: {} vs {}",
            targets.len(),
            onlines.len()
        )));
    }
    for (t, o) in targets.iter().zip(onlines) {
        let online = o.value();
        t.update_value(|tv| {
            assert_eq!(tv.dim(), online.dim(), "soft_update shape mismatch");
            tv.zip_mut_with(&online, |a, &b| *a = (1.0 - new_weight) * *a + new_weight * b);
        });
    }
    Ok(())
}
