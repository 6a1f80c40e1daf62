//! Image-quality metrics and the evaluation reports built from them.

mod fa;
mod mmd;
mod psnr;
mod report;
mod ssim;

pub use fa::fractional_anisotropy;
pub use mmd::{extract_patches, mmd, mmd_with_bandwidth, permutation_test, Bandwidth, MmdConfig, PermutationTest};
pub use psnr::{psnr, psnr_from_mse, psnr_values, PSNR_CAP_DB};
pub use report::{
    slice_report, subject_report, write_slice_csv, write_subject_csv, SliceReport, SliceRow, SubjectRow,
};
pub use ssim::{ms_ssim, ms_ssim_slice, ms_ssim_volume, MsSsimConfig};
