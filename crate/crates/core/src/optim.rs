//! First-order adaptive-moment optimizer and gradient clipping.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// Adaptive moment estimation with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64, dim: usize) -> Adam {
        assert!(learning_rate > 0.0);
        assert!((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2));
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }

    /// One in-place parameter update from the given gradient.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "optimizer dimension mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient dimension mismatch");
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Scales `grads` so its Euclidean norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converges_on_a_quadratic() {
        // minimize (x - 3)^2 + (y + 1)^2
        let mut p = vec![0.0, 0.0];
        let mut opt = Adam::new(0.05, 0.9, 0.999, 1e-8, 2);
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 3.0), 2.0 * (p[1] + 1.0)];
            opt.update(&mut p, &g);
        }
        assert!((p[0] - 3.0).abs() < 1e-3);
        assert!((p[1] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // with bias correction, |step 1| = lr for any nonzero gradient
        let mut p = vec![0.0];
        let mut opt = Adam::new(0.1, 0.9, 0.999, 0.0, 1);
        opt.update(&mut p, &[123.456]);
        assert!((p[0] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut g = vec![0.3, -0.4];
        let norm = clip_global_norm(&mut g, 10.0);
        assert!((norm - 0.5).abs() < 1e-15);
        assert_eq!(g, vec![0.3, -0.4]);
    }

    #[test]
    fn clip_rescales_to_max_norm() {
        let mut g = vec![30.0, -40.0];
        let norm = clip_global_norm(&mut g, 10.0);
        assert!((norm - 50.0).abs() < 1e-12);
        let clipped = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((clipped - 10.0).abs() < 1e-12);
    }
}
