//! Datasets, training, multi-step rollouts and the commutativity experiment.

pub mod commute;
pub mod dataset;
pub mod model;
pub mod report;
pub mod rollout;
pub mod train;
pub mod witness;

pub use commute::{
    commutation_loss, commute_experiment, commute_experiment_from, disagreement, verify_commuting_solutions,
    CommuteConfig, CommuteReport,
};
pub use dataset::{generate_dataset, Dataset};
pub use model::{build_model, exact_rule_network, identity_network, CellModel, Chain, ExactRule, GridMap, IdentityMap};
pub use rollout::{divergence_histogram, rollout, Rollout};
pub use train::{evaluate, train, train_on, EpochRecord, Evaluation, TrainConfig, TrainHistory, Trainer};
pub use witness::{half_step_witness, lower_network, two_step_witness, LoweredNetwork, WitnessReport};
pub use report::Manifest;
