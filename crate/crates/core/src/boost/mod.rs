//! Latent Boost: a magnet-style loss evaluated on PCA-compressed latents,
//! with per-cluster kernel widths and epoch-scheduled α/β.

pub mod loss;
pub mod pca;
pub mod schedule;

pub use loss::{latent_boost_loss, latent_boost_terms};
pub use pca::{fit_pca, select_dim, PcaProjection};
pub use schedule::{alpha_schedule, beta_schedule, ScheduleState};
