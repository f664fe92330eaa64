//! Library surface backing the `darkgrid` binary: command implementations,
//! image ingestion, the detection pipeline and the text formats the tool
//! reads and writes. Integration tests drive commands through this crate
//! rather than spawning the binary.

pub mod commands;
pub mod dump;
pub mod error;
pub mod image;
pub mod pipeline;

pub use commands::{cmd_compare, cmd_detect, cmd_eval, cmd_inspect, EvalArgs, EvalSource};
pub use error::CliError;
pub use pipeline::{detect_image, Network, PixelDetection, RunConfig, WeightSource};
