//! Feed-forward networks, the squashed-Gaussian policy head and checkpoints.

pub mod checkpoint;
pub mod mlp;
pub mod policy;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use mlp::{Dense, ForwardCache, Gradients, Mlp};
pub use policy::{
    deterministic_action, sample_squashed_gaussian, sanitize_action, squash_backward, squash_forward, squash_tangent,
    standard_normal_matrix, GaussianPolicyOutput,
};
