use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Noise channel identifiers; each channel draws from its own ChaCha8 stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Excitation = 0,
    Process = 1,
    Measurement = 2,
}

/// Seeded standard-normal source: ChaCha8 uniforms fed through the
/// Marsaglia polar method. Output is identical across platforms.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, channel: Channel) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(channel as u64);
        Self { rng, spare: None }
    }

    /// Uniform on [0, 1) with 53 random bits.
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let a = 2.0 * self.uniform() - 1.0;
            let b = 2.0 * self.uniform() - 1.0;
            let s = a * a + b * b;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(b * factor);
                return a * factor;
            }
        }
    }

    /// Fills `out` with draws scaled by `sigma`. A zero `sigma` still
    /// advances the stream so other channels stay aligned across runs.
    pub fn fill(&mut self, out: &mut [f64], sigma: f64) {
        for v in out.iter_mut() {
            *v = sigma * self.next_standard();
        }
    }
}
