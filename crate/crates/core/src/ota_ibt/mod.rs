//! Over-the-air iterative bi-directional training.

pub mod estimators;
pub mod pilots;
pub mod schedule;
pub mod signals;

pub use estimators::{
    estimate_ap_gradients, estimate_ap_precoders, estimate_combiner_ota, estimate_gradient_ota, estimate_lipschitz,
    estimate_precoder_ota, Ul2Term,
};
pub use pilots::{make_pilots, PilotBook};
pub use schedule::{run_ibt, run_method, IbtBlock, IbtConfig, IbtMethod, IbtRun, ResourceCounter};
pub use signals::{compute_beta, dl_training, ul_training, ul_training_1, ul_training_2, OtaSignals, StreamLayout};
