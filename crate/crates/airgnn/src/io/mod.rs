//! On-disk formats: hexadecimal floats, JSON checkpoints, and little-endian
//! binary blobs for channel realizations and datasets.

pub mod binary;
pub mod checkpoint;
pub mod hexfloat;

pub use binary::{decode_dataset, decode_realization, encode_dataset, encode_realization, StoredDataset};
pub use checkpoint::Checkpoint;
pub use hexfloat::{format_hex, parse_hex};
