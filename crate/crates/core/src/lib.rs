//! Label-free accuracy estimation for classifiers.
//!
//! Given a labeled reference set and an unlabeled new set, both run through
//! `T` stochastic predictions (Monte-Carlo dropout passes or a mutant
//! ensemble), the crate estimates the model's accuracy on the new set from how
//! the samples spread over Label Variation Ratio areas.
//!
//! ```
//! use lvr_core::estimator::{estimate, EstimationConfig};
//! use lvr_core::lvr::LabelMatrix;
//!
//! let reference = LabelMatrix::from_rows(&[vec![0, 0], vec![1, 0], vec![1, 1]], 2)?;
//! let truth = [0, 1, 1];
//! let new = LabelMatrix::from_rows(&[vec![0, 0], vec![0, 1]], 2)?;
//! let r = estimate(&reference, &truth, &new, &EstimationConfig::with_areas(2))?;
//! assert_eq!(r.acc_new, (r.acc1 + r.acc2) / 2.0);
//! # Ok::<(), lvr_core::Error>(())
//! ```

pub mod baselines;
pub mod cli;
pub mod corruptions;
pub mod data;
pub mod error;
pub mod estimator;
pub mod io;
pub mod lvr;
pub mod manifest;
pub mod mutation;
pub mod nn;
pub mod rng;
pub mod studies;

pub use error::{Error, Result};
pub use estimator::{estimate, EstimationConfig, EstimationResult};
pub use lvr::{compute_lvr, partition_areas, LabelMatrix, LvrVector};
pub use nn::{mc_predict, MlpModel};
