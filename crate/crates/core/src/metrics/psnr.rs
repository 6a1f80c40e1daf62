use crate::data::Volume;
use crate::{Error, Result};

/// Value reported when the two inputs are identical.
pub const PSNR_CAP_DB: f64 = 100.0;

/// `10 log10(1 / mse)` for data on `[0, 1]`, capped at [`PSNR_CAP_DB`].
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

pub fn psnr_values(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InsufficientData("PSNR of empty inputs".into()));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr(a: &Volume, b: &Volume) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(a.shape(), b.shape()));
    }
    psnr_values(&a.to_f64(), &b.to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_values() {
        let a = Volume::new([2, 2, 2], vec![0.3; 8]).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let zeros = Volume::zeros([2, 2, 2]).unwrap();
        let ones = Volume::new([2, 2, 2], vec![1.0; 8]).unwrap();
        assert_eq!(psnr(&zeros, &ones).unwrap(), 0.0);
        assert_eq!(psnr_from_mse(0.01), 20.0);
    }

    #[test]
    fn symmetric_and_shape_checked() {
        let a = [0.1, 0.5, 0.9, 0.2];
        let b = [0.0, 0.6, 0.7, 0.25];
        assert_eq!(psnr_values(&a, &b).unwrap(), psnr_values(&b, &a).unwrap());
        assert!(psnr_values(&a, &b[..3]).is_err());
        let x = Volume::zeros([1, 2, 2]).unwrap();
        let y = Volume::zeros([2, 2, 1]).unwrap();
        assert!(psnr(&x, &y).is_err());
    }
}
