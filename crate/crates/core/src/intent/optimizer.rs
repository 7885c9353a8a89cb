use serde::{Deserialize, Serialize};

use super::NetworkParameters;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    /// Per-update inverse-time decay of the learning rate.
    pub decay: f64,
    pub momentum: f64,
    pub nesterov: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.01,
            decay: 1e-6,
            momentum: 0.9,
            nesterov: true,
        }
    }
}

/// `lr0 / (1 + decay * step)`.
pub fn learning_rate_at(config: &OptimizerConfig, step: u64) -> f64 {
    config.learning_rate / (1.0 + config.decay * step as f64)
}

/// One momentum-SGD update, in place.
///
/// With `nesterov` the lookahead is folded into the update:
/// `v <- mu v - lr g`, `theta <- theta + mu v - lr g`. Without it,
/// `theta <- theta + v`.
pub fn sgd_step(
    params: &mut NetworkParameters,
    velocity: &mut NetworkParameters,
    grads: &NetworkParameters,
    config: &OptimizerConfig,
    step: u64,
) {
    debug_assert!(params.same_shape(velocity) && params.same_shape(grads));
    let lr = learning_rate_at(config, step);
    let mu = config.momentum;
    for ((theta, v), g) in params.values_mut().zip(velocity.values_mut()).zip(grads.values()) {
        *v = mu * *v - lr * g;
        if config.nesterov {
            *theta += mu * *v - lr * g;
        } else {
            *theta += *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn filled(value: f64) -> NetworkParameters {
        let mut p = NetworkParameters::zeros(2, 2).unwrap();
        p.values_mut().for_each(|v| *v = value);
        p
    }

    #[test]
    fn plain_sgd_degenerate_case() {
        let config = OptimizerConfig {
            learning_rate: 0.01,
            decay: 0.0,
            momentum: 0.0,
            nesterov: true,
        };
        let mut theta = filled(0.0);
        let mut v = filled(0.0);
        sgd_step(&mut theta, &mut v, &filled(1.0), &config, 0);
        assert!(theta.values().all(|t| *t == -0.01));
    }

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut theta = filled(0.3);
        let mut v = filled(0.0);
        sgd_step(&mut theta, &mut v, &filled(0.0), &OptimizerConfig::default(), 17);
        assert_eq!(theta, filled(0.3));
    }

    #[test]
    fn decay_schedule() {
        let c = OptimizerConfig::default();
        assert_eq!(learning_rate_at(&c, 0), 0.01);
        assert_abs_diff_eq!(learning_rate_at(&c, 1_000_000), 0.005, epsilon = 1e-15);
    }

    /// Scalar hand simulation on f(x) = x^2 / 2 (gradient x), starting at
    /// x = 1, mu = 0.9, lr = 0.1, no decay. Expected trajectory, written out:
    ///   step 0: g = 1,      v = -0.1,              x = 1 + 0.9(-0.1) - 0.1 = 0.81
    ///   step 1: g = 0.81,   v = 0.9(-0.1) - 0.081 = -0.171,
    ///                       x = 0.81 + 0.9(-0.171) - 0.081 = 0.5751
    #[test]
    fn two_nesterov_steps_match_hand_simulation() {
        let config = OptimizerConfig {
            learning_rate: 0.1,
            decay: 0.0,
            momentum: 0.9,
            nesterov: true,
        };
        let mut x = filled(1.0);
        let mut v = filled(0.0);
        let expected = [(0.81, -0.1), (0.5751, -0.171)];
        for (step, (x_exp, v_exp)) in expected.into_iter().enumerate() {
            let g = x.clone();
            sgd_step(&mut x, &mut v, &g, &config, step as u64);
            for (xi, vi) in x.values().zip(v.values()) {
                assert_abs_diff_eq!(*xi, x_exp, epsilon = 1e-12);
                assert_abs_diff_eq!(*vi, v_exp, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn classical_momentum_when_nesterov_is_off() {
        let config = OptimizerConfig {
            learning_rate: 0.1,
            decay: 0.0,
            momentum: 0.9,
            nesterov: false,
        };
        let mut x = filled(1.0);
        let mut v = filled(0.0);
        sgd_step(&mut x, &mut v, &filled(1.0), &config, 0);
        sgd_step(&mut x, &mut v, &filled(1.0), &config, 1);
        // v1 = -0.1, x1 = 0.9; v2 = -0.19, x2 = 0.71
        assert!(x.values().all(|xi| (xi - 0.71).abs() < 1e-12));
    }
}
