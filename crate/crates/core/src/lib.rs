//! Symmetry-reduced MLP ensembles for tabular data.
//!
//! The crate builds four-layer GeLU MLPs and their W-asymmetric variant
//! (WMLP), where a few seeded weights per unit are frozen at random values
//! shared by every ensemble member. On top of that it provides:
//!
//! - [`ensemble`]: deep ensembles (output/logit averaging) and the
//!   weight-averaged "interpolated" model,
//! - [`moe`]: softmax- and Gumbel-gated mixtures of experts, and the mixture of
//!   interpolated experts that mixes parameters instead of outputs,
//! - [`optim`]: AdamW with decoupled weight decay and early stopping,
//! - [`data`]: CSV/IDX loaders, stratified splits and scaling,
//! - [`experiment`] and [`report`]: the grid runner and CSV/SVG output.
//!
//! All randomness is keyed through [`rng::SeedKey`], so a run is a pure
//! function of its configuration.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod matrix;
pub mod moe;
pub mod net;
pub mod optim;
pub mod report;
pub mod rng;
pub mod selftest;

pub use data::{load_dataset, prepare, split, synth_dataset, DatasetName, FeatureScaler, OneHotEncoder, PreparedData, SplitIndices, SynthOptions, TabularDataset};
pub use ensemble::{subsets_for_sizes, DeepEnsemble};
pub use error::{Error, Result};
pub use init::{build_mlp, build_network, build_wmlp, kaiming_uniform_bound, n_fix, FixSchedule};
pub use loss::{Predictions, Targets, Task};
pub use matrix::DenseMatrix;
pub use moe::{Combine, GateKind, GateSpec, MoeModel};
pub use net::{gelu, interpolate_params, LayerParams, NetMode, NetSpec, Network};
pub use optim::{adamw_step, train, TrainConfig, TrainData, TrainReport};
pub use rng::{derive_seed, Purpose, RngStream, SeedKey};
