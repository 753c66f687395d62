//! Seeded Wiener increments, one reproducible source per trajectory.
//!
//! A source owns two ChaCha8 streams keyed by the master seed: the thermal
//! stream (`2·stream_id`) feeds the `dW^{μν}` channels and the reduction stream
//! (`2·stream_id + 1`) feeds the sector channels `dW^k`. Keeping the families
//! apart means a hybrid step draws the same thermal increments as a pure
//! thermalization step, and ensemble size never reshuffles earlier streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
pub struct WienerSource {
    seed: u64,
    stream_id: u64,
    thermal: ChaCha8Rng,
    reduction: ChaCha8Rng,
}

impl WienerSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut thermal = ChaCha8Rng::seed_from_u64(seed);
        thermal.set_stream(stream_id.wrapping_mul(2));
        let mut reduction = ChaCha8Rng::seed_from_u64(seed);
        reduction.set_stream(stream_id.wrapping_mul(2).wrapping_add(1));
        WienerSource {
            seed,
            stream_id,
            thermal,
            reduction,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fill `out` with independent `N(0, dt)` increments from the thermal stream.
    pub fn fill_thermal(&mut self, dt: f64, out: &mut [f64]) {
        fill(&mut self.thermal, dt, out);
    }

    /// Fill `out` with independent `N(0, dt)` increments from the reduction stream.
    pub fn fill_reduction(&mut self, dt: f64, out: &mut [f64]) {
        fill(&mut self.reduction, dt, out);
    }
}

fn fill(rng: &mut ChaCha8Rng, dt: f64, out: &mut [f64]) {
    let s = dt.sqrt();
    for x in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *x = s * z;
    }
}

/// Auxiliary RNG for scenario builders (spectra, phases, random observables).
///
/// Uses stream ids with the top bit set so they never collide with trajectory
/// streams under the same seed.
pub fn builder_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1u64 << 63) | purpose);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_reproduce() {
        let mut a = WienerSource::new(7, 3);
        let mut b = WienerSource::new(7, 3);
        let (mut x, mut y) = ([0.0; 16], [0.0; 16]);
        a.fill_thermal(1e-3, &mut x);
        b.fill_thermal(1e-3, &mut y);
        assert_eq!(x, y);
        a.fill_reduction(1e-3, &mut x);
        b.fill_reduction(1e-3, &mut y);
        assert_eq!(x, y);
    }

    #[test]
    fn streams_differ() {
        let mut a = WienerSource::new(7, 3);
        let mut b = WienerSource::new(7, 4);
        let (mut x, mut y, mut z) = ([0.0; 8], [0.0; 8], [0.0; 8]);
        a.fill_thermal(1.0, &mut x);
        b.fill_thermal(1.0, &mut y);
        a.fill_reduction(1.0, &mut z);
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn increments_have_variance_dt() {
        let dt = 0.01;
        let mut src = WienerSource::new(11, 0);
        let mut buf = vec![0.0; 200_000];
        src.fill_thermal(dt, &mut buf);
        let n = buf.len() as f64;
        let mean = buf.iter().sum::<f64>() / n;
        let var = buf.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Standard error of the variance estimate is dt·√(2/n) ≈ 3.2e-5.
        assert!(mean.abs() < 4.0 * (dt / n).sqrt());
        assert!((var - dt).abs() < 4.0 * dt * (2.0 / n).sqrt());
    }
}
