use crate::{Error, Result};

/// Fractional anisotropy of a diffusion tensor with eigenvalues
/// `l1, l2, l3`:
///
/// ```text
/// FA = sqrt(1/2) sqrt((l1-l2)^2 + (l2-l3)^2 + (l3-l1)^2) / sqrt(l1^2 + l2^2 + l3^2)
/// ```
pub fn fractional_anisotropy(l1: f64, l2: f64, l3: f64) -> Result<f64> {
    for l in [l1, l2, l3] {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Domain {
                what: "eigenvalue",
                value: l,
                domain: "[0, inf)",
            });
        }
    }
    let norm = (l1 * l1 + l2 * l2 + l3 * l3).sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("fractional anisotropy of an all-zero tensor".into()));
    }
    let spread = ((l1 - l2).powi(2) + (l2 - l3).powi(2) + (l3 - l1).powi(2)).sqrt();
    Ok(0.5f64.sqrt() * spread / norm)
}
