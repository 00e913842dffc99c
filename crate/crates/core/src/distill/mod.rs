//! Toy cascade with exit heads, trained in two stages.
//!
//! Stage one fits the backbone and teacher head on final-layer cross-entropy
//! and freezes them. Stage two fits the exit heads on hard labels and on the
//! teacher's distribution through `KL(student || teacher)`. All gradients are
//! written out by hand.

mod ablation;
mod loss;
mod model;
mod task;
mod train;

pub use ablation::{
    run_ablation, AblationConfig, AblationResult, VariantResult, DEEPEST_EXIT_EPSILON,
    TEACHER_GAP_EPSILON,
};
pub use loss::{
    confidence_and_argmax, cross_entropy, exit_loss, finetune_loss, kl_divergence, softmax,
    LossBreakdown, PROB_FLOOR,
};
pub use model::{
    CascadeDims, Dense, ParamGroup, Params, TokenOutput, ToyCascade, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
pub use task::{separable_two_class, SyntheticExample, ToyTask};
pub use train::{
    exit_losses, gradient_check, kl_gradient_wrt_logits, layer_accuracy, train_backbone,
    train_exits, GradCheckReport, LossMix, LrSchedule, Objective, TrainConfig, TrainReport,
    FD_STEP,
};
