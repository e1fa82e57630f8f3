//! Dense tensors and reverse-mode automatic differentiation.

mod gradcheck;
mod graph;
mod param;
mod tensor;

pub use gradcheck::{gradient_check, gradient_check_sampled, relative_error, GradCheckReport, REL_ERR_FLOOR};
pub use graph::{pinball_term, Gradients, Graph, Var};
pub use param::{ParamId, ParamSet, Parameter};
pub use tensor::{elu, sigmoid, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("dimension error: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn square_derivative() {
        let mut ps = ParamSet::new();
        let x = ps.add("x", Tensor::scalar(3.0)).unwrap();
        let mut g = Graph::with_params(&ps);
        let xv = g.param(x);
        let loss = g.mul(xv, xv).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.params()[0].item(), 6.0);
    }

    #[test]
    fn sum_gives_ones() {
        let mut g = Graph::new();
        let v = g.variable(Tensor::new(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap());
        let s = g.sum(v);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(v).unwrap(), &Tensor::ones(&[2, 3]));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::new();
        let v = g.variable(Tensor::zeros(&[2]));
        assert!(matches!(g.backward(v), Err(NumericsError::Contract(_))));
    }

    #[test]
    fn unreachable_params_get_zero_grad() {
        let mut ps = ParamSet::new();
        let a = ps.add("a", Tensor::scalar(2.0)).unwrap();
        ps.add("unused", Tensor::ones(&[3])).unwrap();
        let mut g = Graph::with_params(&ps);
        let av = g.param(a);
        let loss = g.scale(av, 4.0);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.params()[0].item(), 4.0);
        assert_eq!(grads.params()[1], Tensor::zeros(&[3]));
    }

    #[test]
    fn reused_node_accumulates() {
        // y = s * s + s with s = sum(x) uses s from three consumers.
        let mut g = Graph::new();
        let x = g.variable(Tensor::new(&[3], vec![0.5, 1.0, 1.5]).unwrap());
        let s = g.sum(x);
        let sq = g.mul(s, s).unwrap();
        let y = g.add(sq, s).unwrap();
        let grads = g.backward(y).unwrap();
        // dy/ds = 2s + 1 = 7
        assert_eq!(grads.wrt(s).unwrap().item(), 7.0);
        assert_eq!(grads.wrt(x).unwrap().data(), &[7.0, 7.0, 7.0]);
    }

    #[test]
    fn random_composite_matches_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ps = ParamSet::new();
            let w1 = ps.add("w1", rand_tensor(&mut rng, &[4, 5])).unwrap();
            let b1 = ps.add("b1", rand_tensor(&mut rng, &[5])).unwrap();
            let w2 = ps.add("w2", rand_tensor(&mut rng, &[5, 3])).unwrap();
            let w3 = ps.add("w3", rand_tensor(&mut rng, &[3, 2])).unwrap();
            let x = rand_tensor(&mut rng, &[3, 4]);
            let report = gradient_check(
                &ps,
                |g| -> Result<Var, NumericsError> {
                    let xi = g.input(x.clone());
                    let (w1, b1, w2, w3) = (g.param(w1), g.param(b1), g.param(w2), g.param(w3));
                    let h = g.matmul(xi, w1)?;
                    let h = g.add_row_bias(h, b1)?;
                    let h = g.tanh(h);
                    let h = g.matmul(h, w2)?;
                    let h = g.sigmoid(h);
                    let h = g.matmul(h, w3)?;
                    let h = g.elu(h);
                    let h = g.softmax(h);
                    let e = g.exp(h);
                    Ok(g.mean(e))
                },
                1e-5,
                1e-6,
            )
            .unwrap();
            assert!(report.pass, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn linear_function_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ps = ParamSet::new();
        let w = ps.add("w", rand_tensor(&mut rng, &[1, 6])).unwrap();
        let x = rand_tensor(&mut rng, &[6, 1]);
        let report = gradient_check(
            &ps,
            |g| -> Result<Var, NumericsError> {
                let (w, x) = (g.param(w), g.input(x.clone()));
                let d = g.matmul(w, x)?;
                Ok(g.sum(d))
            },
            1e-5,
            1e-9,
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-9, "{report:?}");
    }

    #[test]
    fn quadratic_form_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ps = ParamSet::new();
        let x = ps.add("x", rand_tensor(&mut rng, &[4, 1])).unwrap();
        let a = rand_tensor(&mut rng, &[4, 4]);
        let report = gradient_check(
            &ps,
            |g| -> Result<Var, NumericsError> {
                let (xv, av) = (g.param(x), g.input(a.clone()));
                let ax = g.matmul(av, xv)?;
                let xt = g.transpose(xv)?;
                let q = g.matmul(xt, ax)?;
                Ok(g.sum(q))
            },
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn nan_is_surfaced() {
        let mut ps = ParamSet::new();
        let x = ps.add("x", Tensor::scalar(1.0)).unwrap();
        let res = gradient_check(
            &ps,
            |g| -> Result<Var, NumericsError> {
                let xv = g.param(x);
                let nan = g.input(Tensor::scalar(f64::NAN));
                let y = g.mul(xv, nan)?;
                Ok(g.sum(y))
            },
            1e-5,
            1e-6,
        );
        assert!(matches!(res, Err(NumericsError::NonFinite(_))));
    }

    #[test]
    fn structural_ops_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = ParamSet::new();
        let a = ps.add("a", rand_tensor(&mut rng, &[3, 4])).unwrap();
        let gain = ps.add("gain", rand_tensor(&mut rng, &[4])).unwrap();
        let bias = ps.add("bias", rand_tensor(&mut rng, &[4])).unwrap();
        let gates = ps.add("gates", rand_tensor(&mut rng, &[2, 8])).unwrap();
        let c = ps.add("c", rand_tensor(&mut rng, &[2, 2])).unwrap();
        let w = rand_tensor(&mut rng, &[3, 4]);
        let mask = Tensor::new(&[3, 4], (0..12).map(|i| (i % 3) as f64 * 0.7).collect()).unwrap();
        let report = gradient_check(
            &ps,
            |g| -> Result<Var, NumericsError> {
                let av = g.param(a);
                let left = g.slice_cols(av, 0, 2)?;
                let right = g.slice_cols(av, 2, 4)?;
                let swapped = g.concat_cols(&[right, left])?;
                let top = g.slice_rows(swapped, 0, 1)?;
                let rest = g.slice_rows(swapped, 1, 3)?;
                let stacked = g.concat_rows(&[rest, top])?;
                let masked = g.mask_mul(stacked, mask.clone())?;
                let (gv, bv) = (g.param(gain), g.param(bias));
                let ln = g.layer_norm(masked, gv, bv, 1e-5)?;
                let wv = g.input(w.clone());
                let prod = g.mul(ln, wv)?;
                let r = g.reshape(prod, &[2, 6])?;
                let r = g.transpose(r)?;
                let s1 = g.sum(r);
                let (gt, cv) = (g.param(gates), g.param(c));
                let cell = g.lstm_gates(gt, cv)?;
                let sq = g.mul(cell, cell)?;
                let s2 = g.mean(sq);
                let s2 = g.add_scalar(s2, 0.3);
                let out = g.sub(s1, s2)?;
                Ok(out)
            },
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn pinball_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ps = ParamSet::new();
        let p = ps.add("p", rand_tensor(&mut rng, &[4, 2, 3])).unwrap();
        let y = rand_tensor(&mut rng, &[4, 2]);
        let levels = [0.1, 0.5, 0.9];
        let report = gradient_check(
            &ps,
            |g| -> Result<Var, NumericsError> {
                let pv = g.param(p);
                g.pinball(pv, &y, &levels)
            },
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
    }
}
