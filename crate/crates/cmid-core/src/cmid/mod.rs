//! Conditional-mutual-information auxiliary task.
//!
//! For every latent feature `z^n` the task builds a conditioning set from
//! the previous step's momentum-encoded feature and action, samples an
//! approximate product-of-marginals batch by swapping the complementary
//! features between samples whose conditioning values are k-nearest
//! neighbours, trains a conditional discriminator to tell true from
//! permuted samples, and updates the encoder adversarially so it cannot.
//! Driving the discriminator to chance pushes the conditional mutual
//! information between `z^n` and `z^{-n}` toward zero.

mod conditioning;
mod knn;
mod losses;
mod task;

pub use conditioning::build_conditioning;
pub use knn::{knn_permute, PermutedBatch};
pub use losses::{adversarial_loss, disc_accuracy, discriminator_loss, sigmoid_clamped};
pub use task::{assemble_disc_inputs, CmidConfig, CmidTask, CmidVariant};
