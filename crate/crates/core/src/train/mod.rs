//! Initialization, optimizer, learning-rate schedule and the training loop.

mod init;
mod optim;
mod run;
mod schedule;

pub use init::kaiming_init;
pub use optim::{Adam, AdamConfig, StepInfo};
pub use run::{
    accuracy, bce_mean, evaluate, format_log, score_clips, score_set, select_best, targets_of, train_loop,
    train_step, DevEval, EpochLog, RunResult, SeedResult, TrainConfig, LOG_HEADER,
};
pub use schedule::{Decay, ScheduleConfig};
