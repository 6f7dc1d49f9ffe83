//! Adapter training: AdamW on prefix or LoRA parameters with a plateau
//! schedule, plus full-weight pretraining for building a base model.

mod adamw;
mod pretrain;
mod schedule;
mod trainer;

pub use adamw::{adamw_step, AdamWConfig, AdamWState, Trainable};
pub use pretrain::{pretrain, PretrainConfig};
pub use schedule::{lr_schedule_update, PlateauSchedule};
pub use trainer::{
    batch_loss, batch_loss_and_grads, train_adapter, train_on_sentences, AdapterSpec, TrainRunConfig, TrainTrace,
    TrainedAdapter,
};
