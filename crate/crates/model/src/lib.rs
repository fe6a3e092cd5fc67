//! Sequence classifiers over Euclidean and Lorentz geometry: a reverse-mode
//! tape, manifold-aware layers, Adam variants, and a binary checkpoint format.

pub mod checkpoint;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod tape;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, FORMAT_VERSION, MAGIC};
pub use error::{ModelError, Result};
pub use layers::{
    conv_out_len, conv_windows, euclidean_batch_norm, euclidean_mlr, exp_rows, lift_rows,
    log_rows, lorentz_batch_norm, lorentz_fc, lorentz_mlr, origin_row, pt_rows, reproject_rows,
    BnBatchStats, BnMode, EBnMode, EBnStats, LBN_EPS,
};
pub use metrics::{accuracy, confusion_matrix, mcc};
pub use model::{
    BnState, BnUpdate, ConvSpec, ForwardPass, Geometry, ModelInstance, ModelSpec, Param,
    ParamKind, BN_MOMENTUM,
};
pub use optim::{
    adam_step, riemannian_adam_step, riemannian_point_step, AdamState, PointAdamState,
    TrainConfig, ADAM_EPS,
};
pub use tape::{NodeId, Op, Tape};
pub use train::{
    cross_entropy, evaluate_mcc, predict_all, train, EpochRecord, SeqDataset, TrainOutcome,
};
