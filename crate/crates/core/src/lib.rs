//! Post-processing toolkit for instance segmentation.
//!
//! * [`mask`]: logit fields, binary and run-length masks, IoU, size buckets.
//! * [`refine`]: coarse-to-fine rendering by adaptive subdivision, biased
//!   point sampling and horizontal-flip fusion.
//! * [`fusion`]: score-weighted multi-model ensembling with soft-NMS.
//! * [`evalmap`]: COCO-style mask AP with small/medium/large buckets.
//! * [`ingest`]: COCO dataset/results files, compressed RLE strings,
//!   polygon rasterization and box-size statistics.
//! * [`cli`]: the `segkit` command line.

pub mod cli;
pub mod error;
pub mod evalmap;
pub mod fusion;
pub mod ingest;
pub mod mask;
pub mod refine;

pub use error::{Error, Result};
