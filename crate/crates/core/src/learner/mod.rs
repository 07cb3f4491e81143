//! Online dataset upkeep and discriminative learning of object AOGs.

mod dataset;
mod examples;
mod lbfgs;
mod lsvm;
mod merits;
mod online;
mod structure;
mod svm;

pub use dataset::{Negative, NegativePool, Positive, TrainingDataset};
pub use examples::{best_at_box, example_pyramid, placements_near, relabel, ExamplePyramid, Scored};
pub use lbfgs::{minimize, LbfgsOptions, LbfgsResult, StopReason};
pub use lsvm::{lsvm_train, mine_pool, optimize, optimize_lbfgs, LsvmReport, MinedKey, PoolCache, RoundTrace};
pub use merits::{error_rate, evaluate_node_merits, retrieve_initial_object_aog, select_children, NodeMerits};
pub use online::OnlineLearner;
pub use structure::{
    full_model, grid_side, init_terminal_params, learn_object_aog, prune_majority_vote, train_root_svm, verify_model,
    Attempt, Learned, Outcome,
};
pub use svm::{train_dcd, train_dcd_bounded, train_dcd_warm, DualState, HingeProblem};
