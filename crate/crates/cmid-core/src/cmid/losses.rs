use ndarray::Array2;

use crate::nn::{Graph, Mlp, NodeId, ParamMode};
use crate::Result;

/// Clamp bound keeping both losses finite when the discriminator saturates.
pub const SIGMOID_CLAMP: f64 = 1e-6;

/// `sigmoid(D(..))` clamped into `[SIGMOID_CLAMP, 1 - SIGMOID_CLAMP]`.
pub fn sigmoid_clamped(g: &mut Graph, logits: NodeId) -> NodeId {
    let s = g.sigmoid(logits);
    g.clamp(s, SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
}

/// Discriminator objective, summed over features and averaged by their
/// count: `mean ln sigma(D(true)) + mean ln(1 - sigma(D(permuted)))`.
///
/// Minimising drives `sigma(D)` toward 0 on true rows and 1 on permuted
/// rows, so the permuted batch plays the positive class. `true_rows` and
/// `perm_rows` stack the per-feature blocks `[latent | conditioning]`; the
/// discriminator parameters are trainable, the inputs are data.
pub fn discriminator_loss(
    g: &mut Graph,
    disc: &Mlp,
    true_rows: &Array2<f64>,
    perm_rows: &Array2<f64>,
) -> Result<NodeId> {
    let t = g.constant(true_rows.clone());
    let d_true = disc.forward(g, t, ParamMode::Trainable)?;
    let s_true = sigmoid_clamped(g, d_true);
    let ln_true = g.ln(s_true);
    let m_true = g.mean_all(ln_true);

    let p = g.constant(perm_rows.clone());
    let d_perm = disc.forward(g, p, ParamMode::Trainable)?;
    let s_perm = sigmoid_clamped(g, d_perm);
    let neg = g.neg(s_perm);
    let one_minus = g.add_scalar(neg, 1.0);
    let ln_perm = g.ln(one_minus);
    let m_perm = g.mean_all(ln_perm);

    Ok(g.add(m_true, m_perm))
}

/// Adversarial encoder objective on true samples only:
/// `alpha * mean ln(1 - sigma(D(z, c)))` over all features.
///
/// `latents` is the taped encoder output; each conditioning matrix enters
/// through an explicit stop-gradient, and the discriminator is frozen, so
/// gradient reaches the encoder only through `z`. Returns the loss and the
/// conditioning input nodes (whose gradients must stay exactly zero).
pub fn adversarial_loss(
    g: &mut Graph,
    disc: &Mlp,
    latents: NodeId,
    conditioning_per_feature: &[Array2<f64>],
    alpha: f64,
) -> Result<(NodeId, Vec<NodeId>)> {
    let mut cond_inputs = Vec::with_capacity(conditioning_per_feature.len());
    let mut rows = Vec::with_capacity(conditioning_per_feature.len());
    for c in conditioning_per_feature {
        if c.ncols() == 0 {
            rows.push(latents);
            continue;
        }
        let cn = g.input(c.clone());
        cond_inputs.push(cn);
        let blocked = g.stop_grad(cn);
        rows.push(g.cat_cols(&[latents, blocked]));
    }
    let all = if rows.len() == 1 { rows[0] } else { g.vstack(&rows) };
    let d = disc.forward(g, all, ParamMode::Frozen)?;
    let s = sigmoid_clamped(g, d);
    let neg = g.neg(s);
    let one_minus = g.add_scalar(neg, 1.0);
    let ln = g.ln(one_minus);
    let m = g.mean_all(ln);
    Ok((g.scale(m, alpha), cond_inputs))
}

/// Fraction of rows the discriminator classifies correctly, with permuted
/// as the positive class and a 0.5 threshold.
pub fn disc_accuracy(disc: &Mlp, true_rows: &Array2<f64>, perm_rows: &Array2<f64>) -> f64 {
    let sig = |rows: &Array2<f64>| -> Vec<f64> {
        disc.forward_values(rows)
            .column(0)
            .iter()
            .map(|&v| 1.0 / (1.0 + (-v).exp()))
            .collect()
    };
    let mut correct = 0usize;
    let true_scores = sig(true_rows);
    let perm_scores = sig(perm_rows);
    for s in &true_scores {
        if *s < 0.5 {
            correct += 1;
        }
    }
    for s in &perm_scores {
        if *s > 0.5 {
            correct += 1;
        }
    }
    correct as f64 / (true_scores.len() + perm_scores.len()) as f64
}
