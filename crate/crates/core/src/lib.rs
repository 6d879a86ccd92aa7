//! Voxel-wise semantic segmentation of gray-scale micro-CT volumes.
//!
//! A random forest trained on a Difference-of-Gaussians feature bank from a
//! sparse hand-labelled mask segments whole stacks; the [`bench`] module pits
//! it against k-nearest neighbours, naive Bayes, logistic regression, a linear
//! SVM and dense neural networks on accuracy and wall-clock time.

pub mod bench;
pub mod classifiers;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod synth;
pub mod volume;

pub use dataset::Dataset;
pub use error::{Error, ErrorKind, Result};
pub use volume::{ClassCatalog, ClassEntry, ClassId, Dims, GrayVolume, LabelVolume, RealVolume};
