//! Desk-scale training rig: synthetic two-view data, an MLP encoder trained
//! with Adam, matching and linear-probe evaluation.

pub mod adam;
pub mod data;
pub mod encoder;
pub mod fig1b;
pub mod probe;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{gen_two_view_dataset, SyntheticSpec, TwoViewDataset, ViewTransform};
pub use encoder::{Embedder, InverseTransform, MlpEncoder, View};
pub use fig1b::fig1b_instance;
pub use probe::{linear_probe, stratified_split, ProbeConfig};
pub use train::{evaluate_matching, evaluate_probe, run, train, EpochRecord, RunReport, TrainConfig};
