//! Illumination-adaptive visual front-end: exposure-aware enhancement, locally adaptive
//! FAST thresholds, pyramid detection with oriented binary descriptors, and
//! quad-tree stability culling.
//!
//! ```no_run
//! use lumen_front::{io::load_gray, pipeline::{run_frame, PipelineConfig}};
//!
//! let img = load_gray("frame.png")?;
//! let result = run_frame(&img, &PipelineConfig::default())?;
//! println!("{} of {} keypoints kept", result.kept(), result.detected);
//! # Ok::<(), lumen_front::Error>(())
//! ```

// `!(x > 0.0)` checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cull;
pub mod describe;
pub mod detect;
pub mod enhance;
pub mod error;
pub mod image;
pub mod io;
pub mod pipeline;
pub mod synth;
pub mod threshold;

pub use error::{Error, Result};
pub use image::{GrayImage, Rect};
