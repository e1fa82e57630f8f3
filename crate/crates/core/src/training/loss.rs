use crate::error::{Error, Result};
use crate::numerics::{pinball_term, NumericsError, Tensor};

fn check_level(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("quantile level must lie in (0, 1), got {q}")))
    }
}

/// Mean of `max(q (y - p), (q - 1)(y - p))` over paired elements.
pub fn pinball_loss(actual: &[f64], predicted: &[f64], q: f64) -> Result<f64> {
    check_level(q)?;
    if actual.len() != predicted.len() || actual.is_empty() {
        return Err(Error::Numerics(NumericsError::Shape(format!(
            "pinball loss needs equal non-empty lengths, got {} and {}",
            actual.len(),
            predicted.len()
        ))));
    }
    let sum: f64 = actual.iter().zip(predicted).map(|(&y, &p)| pinball_term(y, p, q)).sum();
    Ok(sum / actual.len() as f64)
}

/// Unweighted mean over levels and elements. The last axis of `predicted`
/// indexes `levels`; `actual` has the remaining shape.
pub fn total_quantile_loss(actual: &Tensor, predicted: &Tensor, levels: &[f64]) -> Result<f64> {
    for &q in levels {
        check_level(q)?;
    }
    let q = levels.len();
    if q == 0 || predicted.last_dim() != q || predicted.len() != actual.len() * q {
        return Err(Error::Numerics(NumericsError::Shape(format!(
            "prediction {:?} does not match target {:?} with {q} levels",
            predicted.shape(),
            actual.shape()
        ))));
    }
    let p = predicted.data();
    let mut sum = 0.0;
    for (i, &y) in actual.data().iter().enumerate() {
        for (k, &level) in levels.iter().enumerate() {
            sum += pinball_term(y, p[i * q + k], level);
        }
    }
    Ok(sum / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_values() {
        assert_eq!(pinball_loss(&[1.0], &[1.0], 0.3).unwrap(), 0.0);
        assert_eq!(pinball_loss(&[1.0], &[0.0], 0.5).unwrap(), 0.5);
        assert!((pinball_loss(&[0.0], &[1.0], 0.9).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn bad_level_is_config_error() {
        for q in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(matches!(pinball_loss(&[1.0], &[0.0], q), Err(Error::Config(_))));
        }
    }

    #[test]
    fn level_count_mismatch() {
        let y = Tensor::zeros(&[4, 5]);
        let p = Tensor::zeros(&[4, 5, 3]);
        assert!(matches!(total_quantile_loss(&y, &p, &[0.1, 0.5]), Err(Error::Numerics(_))));
    }

    #[test]
    fn median_is_half_mae() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p: Vec<f64> = (0..500).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mae = y.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum::<f64>() / 500.0;
        let yt = Tensor::new(&[500], y).unwrap();
        let pt = Tensor::new(&[500, 1], p).unwrap();
        assert!((total_quantile_loss(&yt, &pt, &[0.5]).unwrap() - 0.5 * mae).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_graph_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let levels = [0.05, 0.5, 0.95];
        let y = Tensor::new(&[6, 5], (0..30).map(|_| rng.random()).collect()).unwrap();
        let p = Tensor::new(&[6, 5, 3], (0..90).map(|_| rng.random()).collect()).unwrap();
        let mut g = crate::numerics::Graph::new();
        let pv = g.input(p.clone());
        let l = g.pinball(pv, &y, &levels).unwrap();
        assert!((g.value(l).item() - total_quantile_loss(&y, &p, &levels).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn translation_invariant(c in -50.0f64..50.0, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let levels = [0.025, 0.5, 0.975];
            let y = Tensor::new(&[8], (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let p = Tensor::new(&[8, 3], (0..24).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let a = total_quantile_loss(&y, &p, &levels).unwrap();
            let b = total_quantile_loss(&y.map(|v| v + c), &p.map(|v| v + c), &levels).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + c.abs()));
        }

        #[test]
        fn convex_in_prediction(y in -5.0f64..5.0, a in -5.0f64..5.0, b in -5.0f64..5.0, lam in 0.0f64..=1.0, q in 0.01f64..0.99) {
            let mix = pinball_loss(&[y], &[lam * a + (1.0 - lam) * b], q).unwrap();
            let bound = lam * pinball_loss(&[y], &[a], q).unwrap() + (1.0 - lam) * pinball_loss(&[y], &[b], q).unwrap();
            prop_assert!(mix <= bound + 1e-12);
        }
    }
}
