//! Differentiable models written out by hand: the windowed Transformer
//! regressor, the convolutional direction classifier, their training
//! loops, gradient checking and text serialisation.

mod classifier;
mod gradcheck;
mod norm;
mod ops;
mod optim;
mod regressor;
mod serialize;
mod tensor;
mod train;

pub use classifier::{argmax, ClassifierCache, ClassifierConfig, ClassifierModel, N_CLASSES};
pub use gradcheck::{grad_check, grad_check_with_fault, GradCheckReport, ModelKind, DEFAULT_EPS, TOLERANCE};
pub use norm::Standardizer;
pub use ops::LAYER_NORM_EPS;
pub use regressor::{RegressorCache, RegressorConfig, RegressorModel};
pub use optim::Adam;
pub use serialize::{
    classifier_to_string, load_classifier, load_model, load_regressor, model_from_str, regressor_to_string,
    save_classifier, save_model, save_regressor, Model, MODEL_FORMAT,
};
pub use tensor::{Grads, ParamSet, Tensor};
pub use train::{
    classifier_accuracy, split_trials, train_classifier, train_regressor, ClassifierFit, RegressorFit, TrainConfig,
    TrainHistory, TrialSplit, MIN_SEQUENCES_PER_CLASS, MIN_WINDOWS,
};
