pub mod audio;
pub mod effects;
pub mod fixtures;
pub mod lime;
pub mod pipeline;
pub mod predictor;
pub mod rng;
pub mod segmentation;
