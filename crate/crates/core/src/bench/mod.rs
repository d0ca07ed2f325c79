//! Desk-scale benchmarks: memory capacity, a synthetic frame-labelled
//! classification task and paired variant comparisons.

pub mod compare;
pub mod mc;
pub mod synthetic;

pub use compare::{compare_variants, BenchTask, ComparisonReport};
pub use mc::{
    delay_line_reservoir, generate_mc_task, generate_mc_task_with, memory_capacity, memory_capacity_shuffled,
    squared_correlation, MCResult, MCTask, McSplit,
};
pub use synthetic::{
    generate_synthetic_frames, generate_with_params, synthetic_split, ArChannel, ClassParams, SyntheticFrameTask,
};
