//! Volumes and everything needed to move them between disk, preprocessing
//! and the models.

mod bvol;
mod manifest;
mod phantom;
mod split;
mod volume;

pub use bvol::{decode_volume, encode_volume, read_volume, write_volume, BVOL_HEADER_LEN, BVOL_MAGIC};
pub use manifest::{read_manifest, write_manifest, Direction, ManifestRow};
pub use phantom::{phantom_pair, MIN_PHANTOM_EXTENT};
pub use split::{split_indices, PairedDataset, Split, DEFAULT_SPLIT_RATIOS};
pub use volume::{
    crop, crop_center, denormalize, downsample, minmax_normalize, pad_offsets, zero_pad, Axis, Modality, NormRecord,
    Volume, VolumeMeta,
};
