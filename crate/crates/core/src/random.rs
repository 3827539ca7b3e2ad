//! Seeded random fields.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::Field;
use crate::spectral_basis::SpectralBasis;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coefficients i.i.d. uniform on `[-1, 1]` over the first `m` modes, scaled
/// to unit H-norm.
pub fn unit_field_leading<R: Rng>(basis: &Arc<SpectralBasis>, m: usize, rng: &mut R) -> Field {
    let n = basis.len();
    let m = m.min(n);
    loop {
        let mut c = vec![0.0; n];
        for v in c.iter_mut().take(m) {
            *v = rng.random_range(-1.0..=1.0);
        }
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-8 {
            c.iter_mut().for_each(|v| *v /= norm);
            return Field::from_raw(basis.clone(), c);
        }
    }
}

pub fn unit_field<R: Rng>(basis: &Arc<SpectralBasis>, rng: &mut R) -> Field {
    unit_field_leading(basis, basis.len(), rng)
}
