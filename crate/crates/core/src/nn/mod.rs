//! Dense networks with analytic gradients.

mod adam;
mod grad;
mod loss;
mod lstm;
mod mlp;
mod params;

pub use adam::AdamState;
pub use grad::{
    compare_gradients, finite_difference_gradients, gradient_check, Arch, GradCheckReport, Input,
};
pub use loss::{softmax, Loss, LossKind};
pub use lstm::{LstmCache, LstmSpec, LstmState};
pub use mlp::{MlpCache, MlpSpec};
pub use params::{blend, ParamSet, Tensor};
