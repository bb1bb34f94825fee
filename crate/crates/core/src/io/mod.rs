//! File formats: TRK tractograms, label and class-name text files, and
//! flat config files. The model file lives in [`crate::nn`].

mod config;
mod labels;
mod trk;

pub use config::{Config, ConfigError};
pub use labels::{
    format_labels, parse_class_names, parse_labels, read_class_names, read_labels, read_labels_with_names,
    write_class_names, write_labels, LabelError, LabelFile,
};
pub use trk::{decode_trk, encode_trk, read_trk, write_trk, TrkError, TrkHeader};
