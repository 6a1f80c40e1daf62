use ndarray::Array2;

use crate::bridge::{precond, MomentStats, PrecondCoeffs};
use crate::schedule::BridgeSchedule;
use crate::{Error, Result};

use super::{Denoiser, TinyNet};

/// `x0_hat = c_skip(t) x_t + c_out(t) F(c_in(t) x_t, x1, c_noise(t))`.
///
/// The raw network `F` sees fixed-size chunks of the data vector: the
/// chunk width `k` is the network's output width and its input width must
/// be `2k + 1`. With `k` equal to the data dimension this is the plain
/// whole-vector denoiser; with `k = 1` the same net is applied voxel by
/// voxel, which is how volumes are handled.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionedNet {
    pub net: TinyNet,
    pub schedule: BridgeSchedule,
    pub moments: MomentStats,
}

impl PreconditionedNet {
    pub fn new(net: TinyNet, schedule: BridgeSchedule, moments: MomentStats) -> Result<Self> {
        let k = net.output_dim();
        if net.input_dim() != 2 * k + 1 {
            return Err(Error::InvalidConfig(format!(
                "network input width {} must be 2 * {k} + 1",
                net.input_dim()
            )));
        }
        moments.validate()?;
        Ok(Self { net, schedule, moments })
    }

    pub fn chunk(&self) -> usize {
        self.net.output_dim()
    }

    pub fn coeffs(&self, t: f64) -> Result<PrecondCoeffs> {
        precond(t, &self.schedule, &self.moments)
    }

    fn check_lengths(&self, xt: &[f64], x1: &[f64]) -> Result<()> {
        if xt.len() != x1.len() {
            return Err(Error::shape(xt.len(), x1.len()));
        }
        if xt.is_empty() || !xt.len().is_multiple_of(self.chunk()) {
            return Err(Error::ShapeMismatch {
                left: format!("data length {}", xt.len()),
                right: format!("multiple of chunk width {}", self.chunk()),
            });
        }
        Ok(())
    }

    /// Raw network input rows `[c_in x_t, x1, c_noise]`, one per chunk.
    pub(crate) fn network_input(&self, p: &PrecondCoeffs, xt: &[f64], x1: &[f64]) -> Array2<f64> {
        let k = self.chunk();
        let rows = xt.len() / k;
        let mut input = Array2::zeros((rows, 2 * k + 1));
        for (r, mut row) in input.rows_mut().into_iter().enumerate() {
            for j in 0..k {
                row[j] = p.c_in * xt[r * k + j];
                row[k + j] = x1[r * k + j];
            }
            row[2 * k] = p.c_noise;
        }
        input
    }

    /// The raw network output `F` for each chunk, flattened.
    pub fn raw_output(&self, t: f64, xt: &[f64], x1: &[f64]) -> Result<Vec<f64>> {
        self.check_lengths(xt, x1)?;
        let p = self.coeffs(t)?;
        let out = self.net.forward(self.network_input(&p, xt, x1).view());
        Ok(out.iter().copied().collect())
    }
}

impl Denoiser for PreconditionedNet {
    fn predict(&self, t: f64, xt: &[f64], x1: &[f64]) -> Result<Vec<f64>> {
        self.check_lengths(xt, x1)?;
        let p = self.coeffs(t)?;
        let raw = self.net.forward(self.network_input(&p, xt, x1).view());
        // row-major: chunk r, coordinate j is element r * k + j
        Ok(xt
            .iter()
            .zip(raw.iter())
            .map(|(x, f)| p.c_skip * x + p.c_out * f)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn model(dim: usize, seed: u64) -> PreconditionedNet {
        let net = TinyNet::for_chunk(dim, 8, &mut seeded(seed)).unwrap();
        PreconditionedNet::new(net, BridgeSchedule::default(), MomentStats::new(0.05, 0.04, 0.03).unwrap()).unwrap()
    }

    #[test]
    fn zero_network_gives_skip_term() {
        let mut m = model(2, 0);
        let last = m.net.layers_mut().last_mut().unwrap();
        last.weights.fill(0.0);
        last.bias.fill(0.0);
        let xt = [0.3, 0.6, 0.1, 0.9];
        let x1 = [0.5, 0.5, 0.2, 0.2];
        let t = 0.35;
        let p = m.coeffs(t).unwrap();
        let pred = m.predict(t, &xt, &x1).unwrap();
        for (a, x) in pred.iter().zip(xt) {
            assert_eq!(*a, p.c_skip * x);
        }
    }

    #[test]
    fn output_collapses_to_skip_term_near_zero() {
        let m = model(1, 1);
        let xt = [0.42];
        let x1 = [0.7];
        let mut prev = f64::INFINITY;
        for &t in &[1e-2, 1e-4, 1e-6, 1e-8] {
            let p = m.coeffs(t).unwrap();
            let gap = (m.predict(t, &xt, &x1).unwrap()[0] - p.c_skip * xt[0]).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn matches_hand_composed_parameterization() {
        // evaluate F with the raw network on hand-built inputs and compose
        // the preconditioning separately
        let m = model(1, 2);
        let mut rng = seeded(3);
        for _ in 0..50 {
            let t: f64 = rng.random_range(0.01..0.99);
            let xt: Vec<f64> = (0..5).map(|_| rng.random_range(-0.5..1.5)).collect();
            let x1: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let pred = m.predict(t, &xt, &x1).unwrap();
            let p = precond(t, &m.schedule, &m.moments).unwrap();
            for i in 0..5 {
                let input = ndarray::array![[p.c_in * xt[i], x1[i], 0.25 * t.ln()]];
                let f = m.net.forward(input.view())[[0, 0]];
                let expected = p.c_skip * xt[i] + p.c_out * f;
                assert!((pred[i] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn chunking_is_independent_per_chunk() {
        let m = model(2, 4);
        let a = m.predict(0.5, &[0.1, 0.2, 0.3, 0.4], &[0.5, 0.6, 0.7, 0.8]).unwrap();
        let b = m.predict(0.5, &[0.3, 0.4], &[0.7, 0.8]).unwrap();
        assert_eq!(&a[2..], &b[..]);
    }

    #[test]
    fn shape_errors() {
        let m = model(2, 5);
        assert!(m.predict(0.5, &[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]).is_err());
        assert!(m.predict(0.5, &[0.1, 0.2], &[0.1]).is_err());
        let net = TinyNet::new(&[4, 3, 2], &mut seeded(0)).unwrap();
        assert!(PreconditionedNet::new(net, BridgeSchedule::default(), MomentStats::new(1.0, 1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn deterministic() {
        let m = model(1, 6);
        let a = m.predict(0.7, &[0.2, 0.4], &[0.9, 0.1]).unwrap();
        let b = m.predict(0.7, &[0.2, 0.4], &[0.9, 0.1]).unwrap();
        assert_eq!(a, b);
    }
}
