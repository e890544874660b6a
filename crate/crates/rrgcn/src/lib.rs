//! File formats, dataset IO and the experiment pipeline around `rrgcn-core`.

pub mod dataset;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod ntriples;
pub mod pipeline;
pub mod report;
pub mod tsv;

pub use dataset::{Dataset, Dictionary};
pub use error::{Error, Result};
pub use manifest::{Manifest, Overrides, Task};
