//! Linear probe, semi-supervised fine-tuning and embedding-angle analysis.

mod angles;
mod probe;

pub use angles::{
    angle_report, embedding_angle, embedding_angles, inter_class_angles, AngleReport, AngleStats,
};
pub use probe::{
    labeled_subset, linear_evaluate, semi_supervised_finetune, EvalReport, FinetuneConfig,
    LinearEvalConfig,
};
