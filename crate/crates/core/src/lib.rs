//! Industrial load disaggregation workbench.
//!
//! The crate covers the full desk-scale loop for single-appliance NILM on
//! synthetic industrial facilities:
//!
//! * [`sim`] — deterministic generation of facility-year datasets (weather,
//!   five appliance traces, aggregate) calibrated to yearly energy targets.
//! * [`augment`] — contribution-weighted scaling augmentation (`amda`), the
//!   random-scaling baseline (`rdm`), and training-set composition.
//! * [`pipeline`] — resampling, robust median/IQR normalization, and
//!   sequence-to-point windowing with exact inverse transforms.
//! * [`model`] — small seq2point regressors (linear, MLP, dilated conv)
//!   trained with Adam and early stopping.
//! * [`metrics`] — regression metrics, histogram divergences, Friedman +
//!   Nemenyi ranking, and a 2-D principal-component export.
//! * [`experiments`] — the three evaluation protocols (appliance variation,
//!   facility variation, distribution alignment) with seeded repetitions.
//! * [`io`] — CSV/config/checkpoint file formats and run manifests.

pub mod augment;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sim;

pub use sim::{ApplianceKind, FacilityConfig, FacilityDataset};
