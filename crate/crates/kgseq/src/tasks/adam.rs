//! Adam with bias correction and a linear warmup/decay schedule.

use crate::tensor::Real;

/// First/second-moment state for a fixed tensor layout.
pub struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: usize,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl<T: Real> Adam<T> {
    pub fn new(tensor_sizes: &[usize], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            m: tensor_sizes.iter().map(|&n| vec![T::ZERO; n]).collect(),
            v: tensor_sizes.iter().map(|&n| vec![T::ZERO; n]).collect(),
            step: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// One update over parallel lists of parameter and gradient slices. The
    /// slice layout must match the one the optimizer was constructed with.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "optimizer layout mismatch");
        assert_eq!(grads.len(), self.m.len(), "optimizer layout mismatch");
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one_minus_b1 = T::from_f64(1.0 - self.beta1);
        let one_minus_b2 = T::from_f64(1.0 - self.beta2);
        let corr1 = T::from_f64(1.0 - self.beta1.powi(self.step as i32));
        let corr2 = T::from_f64(1.0 - self.beta2.powi(self.step as i32));
        let lr_t = T::from_f64(lr);
        let eps = T::from_f64(self.epsilon);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(p.len(), m.len(), "tensor size changed under optimizer");
            for i in 0..p.len() {
                let grad = g[i];
                m[i] = b1 * m[i] + one_minus_b1 * grad;
                v[i] = b2 * v[i] + one_minus_b2 * grad * grad;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                p[i] -= lr_t * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }
}

/// Linear warmup to the base rate over `warmup_fraction` of `total_steps`,
/// then linear decay to zero.
pub fn scheduled_lr(base: f64, step: usize, total_steps: usize, warmup_fraction: f64) -> f64 {
    if total_steps == 0 {
        return base;
    }
    let step = step.min(total_steps - 1);
    let warmup = (warmup_fraction * total_steps as f64).round() as usize;
    if step < warmup {
        base * (step + 1) as f64 / warmup as f64
    } else if total_steps == warmup {
        base
    } else {
        base * (total_steps - step) as f64 / (total_steps - warmup) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_quadratic() {
        // f(x) = (x - 3)^2, df/dx = 2(x - 3)
        let mut adam = Adam::<f64>::new(&[1], 0.9, 0.999, 1e-8);
        let mut x = vec![0.0f64];
        for _ in 0..2000 {
            let g = vec![2.0 * (x[0] - 3.0)];
            adam.step(&mut [&mut x[..]], &[&g[..]], 0.05);
        }
        assert!((x[0] - 3.0).abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn schedule_warms_up_and_decays() {
        let base = 1.0;
        let total = 100;
        let wf = 0.1;
        assert!((scheduled_lr(base, 0, total, wf) - 0.1).abs() < 1e-12);
        assert!((scheduled_lr(base, 9, total, wf) - 1.0).abs() < 1e-12);
        assert!(scheduled_lr(base, 50, total, wf) < 1.0);
        assert!(scheduled_lr(base, 99, total, wf) > 0.0);
        // No warmup: starts at full rate.
        assert!((scheduled_lr(base, 0, total, 0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_gradients_same_updates() {
        let run = || {
            let mut adam = Adam::<f32>::new(&[3], 0.9, 0.999, 1e-8);
            let mut x = vec![1.0f32, -2.0, 0.5];
            for i in 0..50 {
                let g: Vec<f32> = x.iter().map(|v| v * 0.1 + i as f32 * 0.01).collect();
                adam.step(&mut [&mut x[..]], &[&g[..]], 0.01);
            }
            x
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
