use super::{ModelParams, TrainConfig};
use crate::error::Result;

/// First/second moment accumulators and step counter for AdamW.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(dims: usize) -> Self {
        Self {
            m: ModelParams::zeros(dims),
            v: ModelParams::zeros(dims),
            t: 0,
        }
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn update(theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, c: &TrainConfig, bc1: f64, bc2: f64, decay: f64) {
    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    *theta = *theta - c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon) - c.learning_rate * decay * *theta;
}

/// One AdamW step with decoupled weight decay.
///
/// Decay is applied to the pre-step weights and never to the bias vector.
pub fn adamw_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut OptimizerState,
    config: &TrainConfig,
) -> Result<()> {
    params.shape_matches(grads)?;
    params.shape_matches(&state.m)?;
    params.shape_matches(&state.v)?;
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - config.beta1.powf(t);
    let bc2 = 1.0 - config.beta2.powf(t);

    let weights = params.weights.iter_mut().zip(&grads.weights);
    let moments = state.m.weights.iter_mut().zip(state.v.weights.iter_mut());
    for ((theta, &g), (m, v)) in weights.zip(moments) {
        update(theta, g, m, v, config, bc1, bc2, config.weight_decay);
    }
    for k in 0..params.bias.len() {
        update(
            &mut params.bias[k],
            grads.bias[k],
            &mut state.m.bias[k],
            &mut state.v.bias[k],
            config,
            bc1,
            bc2,
            0.0,
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(lr: f64, wd: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            weight_decay: wd,
            ..TrainConfig::default()
        }
    }

    fn scalar(theta: f64) -> ModelParams {
        // dims = 1: three weights, one per class
        ModelParams::from_parts(1, vec![theta; 3], [theta; 3]).unwrap()
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = ModelParams::from_parts(2, vec![0.3, -1.0, 2.0, 0.0, 5.0, -0.25], [1.0, 2.0, 3.0]).unwrap();
        let before = p.clone();
        let mut s = OptimizerState::new(2);
        adamw_step(&mut p, &ModelParams::zeros(2), &mut s, &config(0.1, 0.0)).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradient_pure_decay() {
        let mut p = ModelParams::from_parts(2, vec![0.3, -1.0, 2.0, 0.0, 5.0, -0.25], [1.0, 2.0, 3.0]).unwrap();
        let before = p.clone();
        let mut s = OptimizerState::new(2);
        adamw_step(&mut p, &ModelParams::zeros(2), &mut s, &config(0.1, 0.01)).unwrap();
        for (a, b) in p.weights().iter().zip(before.weights()) {
            assert!((a - b * (1.0 - 0.001)).abs() < 1e-15);
        }
        assert_eq!(p.bias(), before.bias(), "bias is exempt from decay");
    }

    #[test]
    fn single_step_hand_value() {
        let mut p = scalar(1.0);
        let grads = scalar(0.5);
        let mut s = OptimizerState::new(1);
        adamw_step(&mut p, &grads, &mut s, &config(0.1, 0.01)).unwrap();
        let expected = 1.0 - 0.1 * (0.5 / (0.5 + 1e-8)) - 0.1 * 0.01 * 1.0;
        for &w in p.weights() {
            assert!((w - 0.899000).abs() < 1e-6);
            assert!((w - expected).abs() < 1e-15);
        }
        assert_eq!(s.t, 1);
        assert!(s.v.weights().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn first_step_moves_against_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = 16;
        let init: Vec<f64> = (0..3 * dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..3 * dims).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut p = ModelParams::from_parts(dims, init.clone(), [0.0; 3]).unwrap();
        let grads = ModelParams::from_parts(dims, g.clone(), [0.2, -0.3, 0.1]).unwrap();
        let mut s = OptimizerState::new(dims);
        adamw_step(&mut p, &grads, &mut s, &config(1e-3, 0.0)).unwrap();
        for ((after, before), g) in p.weights().iter().zip(&init).zip(&g) {
            assert_eq!((after - before).signum(), -g.signum());
        }
        assert!(p.bias()[0] < 0.0 && p.bias()[1] > 0.0 && p.bias()[2] < 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = ModelParams::zeros(2);
        let mut s = OptimizerState::new(2);
        let err = adamw_step(&mut p, &ModelParams::zeros(3), &mut s, &TrainConfig::default());
        assert!(matches!(err, Err(Error::ShapeMismatch { .. })));
        assert_eq!(s.t, 0);
    }
}
