//! Seeded parameter initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

/// Deterministic generator for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `(fan_in, fan_out)` of a weight shape. Dense weights are `[in, out]`;
/// higher-rank shapes follow the `[out, in, receptive...]` convention.
pub fn fans(shape: &[usize]) -> Result<(usize, usize)> {
    let fans = match *shape {
        [fan_in, fan_out] => (fan_in, fan_out),
        [out, inp, ref rest @ ..] if !rest.is_empty() => {
            let rf: usize = rest.iter().product();
            (inp * rf, out * rf)
        }
        _ => return Err(TensorError::DegenerateShape(shape.to_vec())),
    };
    if fans.0 == 0 || fans.1 == 0 {
        return Err(TensorError::DegenerateShape(shape.to_vec()));
    }
    Ok(fans)
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor {
    Tensor::from_fn(shape.to_vec(), |_| lo + (hi - lo) * rng.random::<f64>())
}

/// Glorot/Xavier uniform: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform_with(shape: &[usize], rng: &mut impl Rng) -> Result<Tensor> {
    let (fi, fo) = fans(shape)?;
    let a = (6.0 / (fi + fo) as f64).sqrt();
    Ok(uniform(shape, -a, a, rng))
}

pub fn xavier_init(shape: &[usize], seed: u64) -> Result<Tensor> {
    xavier_uniform_with(shape, &mut rng_for(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_and_determinism() {
        let a = xavier_init(&[200, 200], 3).unwrap();
        let bound = (6.0f64 / 400.0).sqrt();
        assert!(a.data().iter().all(|x| x.abs() <= bound));
        assert_eq!(a, xavier_init(&[200, 200], 3).unwrap());
        assert_ne!(a, xavier_init(&[200, 200], 4).unwrap());
    }

    #[test]
    fn variance_matches_uniform_law() {
        let t = xavier_init(&[400, 250], 11).unwrap();
        let n = t.len() as f64;
        let mean = t.data().iter().sum::<f64>() / n;
        let var = t.data().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let expected = 2.0 / 650.0;
        assert!((var / expected - 1.0).abs() < 0.1, "{var} vs {expected}");
    }

    #[test]
    fn degenerate_shapes() {
        assert!(xavier_init(&[5], 0).is_err());
        assert!(xavier_init(&[0, 3], 0).is_err());
        assert!(xavier_init(&[], 0).is_err());
        assert_eq!(fans(&[8, 4, 3]).unwrap(), (12, 24));
    }
}
