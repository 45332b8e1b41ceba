//! Deterministic random substreams and the geometric samplers built on them.
//!
//! Every trajectory draws from its own ChaCha8 stream whose 256-bit key is the
//! tuple (seed, instance, point, trajectory). A walk is therefore a pure
//! function of that tuple, independent of scheduling or worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vector::{scale, Vector};

pub type WalkRng = ChaCha8Rng;

/// Identifies one trajectory's random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub instance: u64,
    pub point: u64,
    pub trajectory: u64,
}

impl StreamKey {
    pub fn new(seed: u64, instance: u64, point: u64, trajectory: u64) -> Self {
        Self {
            seed,
            instance,
            point,
            trajectory,
        }
    }

    pub fn rng(&self) -> WalkRng {
        let mut key = [0u8; 32];
        for (chunk, word) in
            key.chunks_exact_mut(8)
                .zip([self.seed, self.instance, self.point, self.trajectory])
        {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Shorthand for `StreamKey::new(..).rng()`.
pub fn substream(seed: u64, instance: u64, point: u64, trajectory: u64) -> WalkRng {
    StreamKey::new(seed, instance, point, trajectory).rng()
}

/// Uniform direction on the unit sphere S^{D-1}.
pub fn uniform_direction<const D: usize, R: Rng + ?Sized>(rng: &mut R) -> Vector<D> {
    let mut v = [0.0; D];
    match D {
        1 => v[0] = if rng.random::<bool>() { 1.0 } else { -1.0 },
        2 => {
            let t = std::f64::consts::TAU * rng.random::<f64>();
            let (s, c) = t.sin_cos();
            v[0] = c;
            v[1] = s;
        }
        3 => {
            let z = 1.0 - 2.0 * rng.random::<f64>();
            let rxy = (1.0 - z * z).max(0.0).sqrt();
            let phi = std::f64::consts::TAU * rng.random::<f64>();
            let (s, c) = phi.sin_cos();
            v[0] = rxy * c;
            v[1] = rxy * s;
            v[2] = z;
        }
        _ => loop {
            // Marsaglia-style rejection from the cube for higher dimensions.
            for x in v.iter_mut() {
                *x = 2.0 * rng.random::<f64>() - 1.0;
            }
            let n2: f64 = v.iter().map(|x| x * x).sum();
            if n2 > 1e-12 && n2 <= 1.0 {
                let inv = 1.0 / n2.sqrt();
                v.iter_mut().for_each(|x| *x *= inv);
                break;
            }
        },
    }
    v
}

/// Uniform offset inside the ball of `radius` centred at the origin.
///
/// Offsets closer than `1e-12 * radius` to the centre are redrawn, since the
/// ball Green's function is singular there.
pub fn uniform_in_ball<const D: usize, R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Vector<D> {
    loop {
        let u: f64 = rng.random();
        let rho = match D {
            2 => u.sqrt(),
            3 => u.cbrt(),
            _ => u.powf(1.0 / D as f64),
        };
        let dir = uniform_direction::<D, R>(rng);
        if rho >= 1e-12 {
            return scale(&dir, rho * radius);
        }
    }
}
