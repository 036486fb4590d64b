use rand::Rng;

use super::{Mode, NnError, Result};

/// Inverted dropout. Returns the output and the multiplicative mask
/// (0 or `1 / (1 - rate)` per element) for the backward pass.
pub fn dropout<R: Rng>(input: &[f64], rate: f64, mode: Mode, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidRate(rate));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((input.to_vec(), vec![1.0; input.len()]));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = input
        .iter()
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let out = input.iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = [1.0, -2.0, 3.5];
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng).unwrap().0, x.to_vec());
        assert_eq!(dropout(&x, 0.9, Mode::Infer, &mut rng).unwrap().0, x.to_vec());
    }

    #[test]
    fn invalid_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(dropout(&[1.0], 1.0, Mode::Train, &mut rng), Err(NnError::InvalidRate(1.0)));
        assert_eq!(dropout(&[1.0], -0.1, Mode::Train, &mut rng), Err(NnError::InvalidRate(-0.1)));
    }

    #[test]
    fn half_rate_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = vec![1.0; 10_000];
        let (out, _) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let kept = out.iter().filter(|v| **v != 0.0).count() as f64 / x.len() as f64;
        assert!((0.48..=0.52).contains(&kept), "{kept}");
        let mean = out.iter().sum::<f64>() / x.len() as f64;
        assert!((mean - 1.0).abs() < 0.04, "{mean}");
        assert!(out.iter().all(|v| *v == 0.0 || *v == 2.0));
    }
}
